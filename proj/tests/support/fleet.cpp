#include "fleet.hpp"

#include "bbkit/random.hpp"

namespace bbkit::testing {

namespace {

timing_profile random_timing(seeded_rng& rng) {
  switch (rng.below(8)) {
    case 0:
      return timing_profile::silent();
    case 1:
      return timing_profile::single();
    case 2:
      return timing_profile::burst({2 + rng.below(2)}, {});
    case 3:
      return timing_profile::burst({1 + rng.below(3), 1 + rng.below(4)}, {0.5 + static_cast<double>(rng.below(4))});
    case 4:
      return timing_profile::ramp(1 + rng.below(3), static_cast<double>(2 + rng.below(3)));
    case 5:
      return timing_profile::pulse(1, 1 + static_cast<double>(rng.below(2)), static_cast<double>(2 + rng.below(4)), 4);
    default:
      return timing_profile::constant(static_cast<double>(1 + rng.below(10)), static_cast<double>(1 + rng.below(4)));
  }
}

packet_mix random_mix(seeded_rng& rng) {
  static constexpr packet_mix presets[] = {
    {1.0, 0, 0, 0, 0},
    {0.5, 0.3, 0.2, 0, 0},
    {0, 0, 0, 1.0, 0},
    {0.2, 0.2, 0.2, 0.2, 0.2},
    {0.0434, 0.3666, 0.2925, 0.2618, 0.0357},
  };
  return presets[rng.below(std::size(presets))];
}

} // namespace

std::vector<generator_spec> make_fleet(std::uint64_t seed, const fleet_options& options) {
  seeded_rng rng(seed);
  std::vector<generator_spec> specs;
  specs.reserve(options.generators);
  for (std::size_t i = 0; i < options.generators; ++i) {
    generator_spec g;
    g.ip = ipv4{static_cast<std::uint32_t>(0x0a000001u + i)};
    g.protocol = options.all_protocols ? all_protocols[rng.below(all_protocols.size())] : options.protocol;
    g.timing = random_timing(rng);
    const auto extra = rng.below(4);
    if (extra == 0 || rng.chance(0.7))
      g.rg_members.push_back(g.ip);
    for (std::uint64_t k = 0; k < extra; ++k)
      g.rg_members.push_back(ipv4{static_cast<std::uint32_t>(0xac100000u + rng.below(1u << 20))});
    g.mix = random_mix(rng);
    g.delay_us = static_cast<time_us>(rng.below(2 * us_per_second));
    if (options.rounds > 0 && rng.chance(0.3)) {
      g.churn = "1";
      for (int r = 1; r < options.rounds; ++r)
        g.churn += rng.chance(0.6) ? '1' : '0';
    }
    specs.push_back(std::move(g));
  }
  return specs;
}


std::vector<generator_profile> recover_round(const synth_round& round, const match_config& config,
                                             match_report* report) {
  auto r = match_stream(round.ledger, round.packets, config);
  auto profiles = build_profiles(r.responses, round.round_id);
  add_silent_targets(profiles, round.ledger, round.round_id);
  if (report)
    *report = std::move(r);
  return profiles;
}

} // namespace bbkit::testing
