#include "bbkit/probe_engine.hpp"

#include <unordered_set>

#include "bbkit/errors.hpp"
#include "bbkit/random.hpp"

namespace bbkit {

namespace {

constexpr std::string_view label_alphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
constexpr std::size_t label_length = 16;
constexpr std::size_t unique_chars = 13; // 36^13 > 2^64

// Full-period LCG over 2^32 (Hull-Dobell: c odd, a % 4 == 1).
class sweep_order {
public:
  explicit sweep_order(std::uint64_t seed)
    : state_(static_cast<std::uint32_t>(seed >> 32)),
      increment_(static_cast<std::uint32_t>(seed) | 1u) {}

  ipv4 next() {
    state_ = state_ * 1664525u + increment_;
    return ipv4{state_};
  }

private:
  std::uint32_t state_;
  std::uint32_t increment_;
};

class token_source {
public:
  explicit token_source(const scan_plan& plan)
    : plan_(plan), rng_(plan.seed), key_(seeded_rng(plan.seed ^ 0x5bd1e995ull).next()) {}

  match_token next() {
    switch (plan_.protocol) {
      case probe_protocol::dns:
        return next_qname();
      case probe_protocol::icmp:
        return next_icmp();
      case probe_protocol::ntp:
        return no_token{};
      default:
        return next_seq();
    }
  }

private:
  // The first 13 characters encode a bijective mix of the probe index, so
  // labels are distinct without remembering them; the rest is random.
  match_token next_qname() {
    std::uint64_t v = mix(index_++ + key_);
    std::string label(label_length, '\0');
    for (std::size_t i = 0; i < unique_chars; ++i) {
      label[i] = label_alphabet[v % label_alphabet.size()];
      v /= label_alphabet.size();
    }
    for (std::size_t i = unique_chars; i < label_length; ++i)
      label[i] = label_alphabet[rng_.below(label_alphabet.size())];
    return make_qname(label + "." + plan_.zone);
  }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  match_token next_icmp() {
    while (true) {
      auto id = static_cast<std::uint16_t>(rng_.next() >> 48);
      if (!plan_.distinct_tokens)
        return icmp_echo_id{id};
      if (used_.size() >= 65536)
        throw validation_error("more than 65536 ICMP probes cannot carry distinct echo ids");
      if (used_.insert(id).second)
        return icmp_echo_id{id};
    }
  }

  match_token next_seq() {
    while (true) {
      auto seq = static_cast<std::uint32_t>(rng_.next() >> 32);
      if (!plan_.distinct_tokens)
        return tcp_seq{seq};
      // Keep seq, seq+1 disjoint from every other probe's seq, seq+1 so an
      // ack can only ever point at one probe in either ack mode.
      const std::uint64_t s = seq;
      if (used_.contains(s) || used_.contains(s + 1) || used_.contains(s - 1))
        continue;
      used_.insert(s);
      return tcp_seq{seq};
    }
  }

  const scan_plan& plan_;
  seeded_rng rng_;
  std::uint64_t key_;
  std::uint64_t index_ = 0;
  std::unordered_set<std::uint64_t> used_;
};

} // namespace

target_source target_source::list(std::vector<ipv4> targets) {
  target_source t;
  t.targets = std::move(targets);
  return t;
}

target_source target_source::sweep(std::uint64_t limit) {
  target_source t;
  t.full_sweep = true;
  t.sweep_limit = std::min(limit, std::uint64_t{1} << 32);
  return t;
}

std::int64_t default_rate(scan_kind kind, probe_protocol protocol) {
  if (kind == scan_kind::rescan)
    return 100;
  return protocol == probe_protocol::icmp ? 100'000 : 40'000;
}

std::uint32_t default_probe_size(probe_protocol protocol) {
  switch (protocol) {
    case probe_protocol::dns:
      return 70;
    case probe_protocol::icmp:
      return 74;
    case probe_protocol::ntp:
      return 90;
    default:
      return 60;
  }
}

void scan_plan::validate() const {
  if (rate_pps && *rate_pps <= 0)
    throw validation_error("rate_pps must be positive, got " + std::to_string(*rate_pps));
  if (kind == scan_kind::rescan && targets.full_sweep)
    throw validation_error("a rescan needs an explicit target list");
  if (probe_size && *probe_size == 0)
    throw validation_error("probe_size must be positive");
  if (protocol == probe_protocol::dns && zone.empty())
    throw validation_error("DNS probes need a zone suffix");
}

std::int64_t scan_plan::effective_rate() const {
  return rate_pps.value_or(default_rate(kind, protocol));
}

std::uint32_t scan_plan::effective_probe_size() const {
  return probe_size.value_or(default_probe_size(protocol));
}

void generate_ledger(const scan_plan& plan, const std::function<void(const probe_record&)>& sink) {
  plan.validate();
  const auto rate = plan.effective_rate();
  const auto size = plan.effective_probe_size();
  token_source tokens(plan);
  auto emit = [&](std::uint64_t index, ipv4 target) {
    probe_record p;
    p.send_time = plan.start_time + send_offset(index, rate);
    p.target = target;
    p.protocol = plan.protocol;
    p.token = tokens.next();
    p.probe_size = size;
    sink(p);
  };
  if (plan.targets.full_sweep) {
    sweep_order order(plan.seed ^ 0x9e3779b97f4a7c15ull);
    for (std::uint64_t i = 0; i < plan.targets.sweep_limit; ++i)
      emit(i, order.next());
  } else {
    for (std::uint64_t i = 0; i < plan.targets.targets.size(); ++i)
      emit(i, plan.targets.targets[i]);
  }
}

std::vector<probe_record> generate_ledger(const scan_plan& plan) {
  std::vector<probe_record> out;
  if (!plan.targets.full_sweep)
    out.reserve(plan.targets.targets.size());
  generate_ledger(plan, [&out](const probe_record& p) { out.push_back(p); });
  return out;
}

void rescan_schedule::validate() const {
  if (rounds < 1)
    throw validation_error("rescan rounds must be at least 1");
  if (first_offset_days < 6 || first_offset_days > 9)
    throw validation_error("first rescan offset must be 6-9 days");
  if (inter_rescan_days < 1)
    throw validation_error("rescans must be at least one day apart");
}

std::vector<time_us> schedule_rescans(time_us full_scan_end, const rescan_schedule& schedule) {
  schedule.validate();
  std::vector<time_us> starts;
  starts.reserve(static_cast<std::size_t>(schedule.rounds));
  for (int i = 0; i < schedule.rounds; ++i)
    starts.push_back(full_scan_end + (schedule.first_offset_days + i * schedule.inter_rescan_days)
                                       * us_per_day);
  return starts;
}

} // namespace bbkit
