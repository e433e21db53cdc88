#include <benchmark/benchmark.h>

#include "bbkit/prefix_dataset.hpp"
#include "bbkit/random.hpp"

using namespace bbkit;

namespace {

prefix_dataset random_table(std::size_t n) {
  seeded_rng rng(1);
  prefix_dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    const auto len = static_cast<std::uint8_t>(8 + rng.below(17));
    d.insert(cidr{ipv4{static_cast<std::uint32_t>(rng.next()) & cidr::mask_for(len)}, len},
             std::to_string(rng.below(60'000)));
  }
  return d;
}

void BM_lookup(benchmark::State& state) {
  const auto d = random_table(static_cast<std::size_t>(state.range(0)));
  seeded_rng rng(2);
  std::vector<ipv4> queries(4096);
  for (auto& q : queries)
    q = ipv4{static_cast<std::uint32_t>(rng.next())};
  std::size_t i = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(d.lookup(queries[i++ & 4095]));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_lookup)->Arg(1'000)->Arg(100'000)->Arg(900'000);

void BM_insert(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(random_table(static_cast<std::size_t>(state.range(0))).size());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_insert)->Arg(100'000)->Unit(benchmark::kMillisecond);

} // namespace
