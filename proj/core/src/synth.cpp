#include "bbkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "bbkit/errors.hpp"
#include "bbkit/random.hpp"
#include "bbkit/wire.hpp"

namespace bbkit {

namespace {

// Silences longer than this would let a probe expire in the matcher's
// default window before its generator resumes.
constexpr double max_silence_s = 600.0;

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(seed ^ mix64(a * 0x100000001b3ull + mix64(b)));
}

time_us seconds_to_us(double s) { return static_cast<time_us>(std::floor(s * 1e6)); }

/// floor(k * 1e6 / rate) without losing precision for large k.
time_us rate_offset(std::uint64_t k, double rate) {
  return static_cast<time_us>(std::floor(static_cast<long double>(k) * 1e6L / static_cast<long double>(rate)));
}

void require(bool ok, const std::string& what) {
  if (!ok)
    throw validation_error(what);
}

} // namespace

std::string_view to_string(timing_kind k) {
  switch (k) {
    case timing_kind::ramp: return "RAMP";
    case timing_kind::pulse: return "PULSE";
    case timing_kind::burst: return "BURST";
    case timing_kind::constant: return "CONSTANT";
    case timing_kind::single: return "SINGLE";
    case timing_kind::silent: return "SILENT";
  }
  return "?";
}

timing_kind parse_timing_kind(std::string_view text) {
  std::string up(text);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
  for (auto k : {timing_kind::ramp, timing_kind::pulse, timing_kind::burst, timing_kind::constant,
                 timing_kind::single, timing_kind::silent})
    if (to_string(k) == up)
      return k;
  throw validation_error("unknown timing pattern '" + std::string(text) + "'");
}

timing_profile timing_profile::constant(double rate, double duration_s) {
  timing_profile t;
  t.kind = timing_kind::constant;
  t.rate = rate;
  t.duration_s = duration_s;
  return t;
}

timing_profile timing_profile::ramp(std::uint64_t rate_step, double duration_s) {
  timing_profile t;
  t.kind = timing_kind::ramp;
  t.rate_step = rate_step;
  t.duration_s = duration_s;
  return t;
}

timing_profile timing_profile::pulse(double on_s, double off_s, double rate, double duration_s) {
  timing_profile t;
  t.kind = timing_kind::pulse;
  t.on_s = on_s;
  t.off_s = off_s;
  t.rate = rate;
  t.duration_s = duration_s;
  return t;
}

timing_profile timing_profile::burst(std::vector<std::uint64_t> sizes, std::vector<double> gaps_s) {
  timing_profile t;
  t.kind = timing_kind::burst;
  t.burst_sizes = std::move(sizes);
  t.gaps_s = std::move(gaps_s);
  return t;
}

void timing_profile::validate() const {
  require(std::isfinite(duration_s) && duration_s >= 0, "timing duration must be non-negative");
  switch (kind) {
    case timing_kind::constant:
      require(std::isfinite(rate) && rate > 0, "CONSTANT needs a positive rate");
      require(1.0 / rate <= max_silence_s, "CONSTANT rate leaves gaps longer than 600 s");
      break;
    case timing_kind::ramp:
      require(rate_step > 0, "RAMP needs a positive rate step");
      break;
    case timing_kind::pulse:
      require(std::isfinite(rate) && rate > 0, "PULSE needs a positive rate");
      require(on_s > 0 && off_s >= 0, "PULSE needs on > 0 and off >= 0");
      require(off_s <= max_silence_s, "PULSE silences must not exceed 600 s");
      break;
    case timing_kind::burst:
      require(!burst_sizes.empty(), "BURST needs at least one burst");
      require(gaps_s.size() + 1 >= burst_sizes.size(), "BURST needs a gap before every burst after the first");
      for (double g : gaps_s)
        require(std::isfinite(g) && g >= 0 && g <= max_silence_s, "BURST gaps must lie in [0, 600] s");
      break;
    case timing_kind::single:
    case timing_kind::silent:
      break;
  }
}

std::vector<time_us> timing_profile::offsets() const {
  std::vector<time_us> out;
  switch (kind) {
    case timing_kind::silent:
      break;
    case timing_kind::single:
      out.push_back(0);
      break;
    case timing_kind::constant: {
      const auto n = static_cast<std::uint64_t>(std::llround(rate * duration_s));
      out.reserve(n);
      for (std::uint64_t k = 0; k < n; ++k)
        out.push_back(rate_offset(k, rate));
      break;
    }
    case timing_kind::ramp: {
      const auto seconds = static_cast<std::uint64_t>(std::floor(duration_s));
      for (std::uint64_t s = 0; s < seconds; ++s) {
        const std::uint64_t n = rate_step * (s + 1);
        for (std::uint64_t j = 0; j < n; ++j)
          out.push_back(static_cast<time_us>(s) * us_per_second + rate_offset(j, static_cast<double>(n)));
      }
      break;
    }
    case timing_kind::pulse: {
      const time_us end = seconds_to_us(duration_s);
      const time_us on = seconds_to_us(on_s);
      const time_us cycle = on + seconds_to_us(off_s);
      for (time_us start = 0; start < end; start += cycle) {
        const time_us window = std::min(on, end - start);
        for (std::uint64_t k = 0;; ++k) {
          const time_us off = rate_offset(k, rate);
          if (off >= window)
            break;
          out.push_back(start + off);
        }
      }
      break;
    }
    case timing_kind::burst: {
      time_us start = 0;
      for (std::size_t i = 0; i < burst_sizes.size(); ++i) {
        if (i > 0)
          start = out.empty() ? start : std::max(start, out.back()) + seconds_to_us(gaps_s[i - 1]);
        for (std::uint64_t j = 0; j < burst_sizes[i]; ++j)
          out.push_back(start + static_cast<time_us>(j) * burst_spacing);
      }
      break;
    }
  }
  return out;
}

kind_counts allocate_mix(const packet_mix& mix, std::uint64_t n) {
  kind_counts counts{};
  std::array<double, 5> rest{};
  std::uint64_t given = 0;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    const double exact = mix[i] * static_cast<double>(n);
    counts[i] = static_cast<std::uint64_t>(std::floor(exact));
    rest[i] = exact - static_cast<double>(counts[i]);
    given += counts[i];
  }
  std::array<std::size_t, 5> order{0, 1, 2, 3, 4};
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rest[a] > rest[b]; });
  for (std::size_t i = 0; given < n; i = (i + 1) % order.size(), ++given)
    ++counts[order[i]];
  while (given > n) { // floating-point overshoot
    auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --given;
  }
  return counts;
}

bool generator_spec::present_in(int round_id) const {
  if (round_id < 0 || static_cast<std::size_t>(round_id) >= churn.size())
    return true;
  return churn[static_cast<std::size_t>(round_id)] == '1';
}

void generator_spec::validate() const {
  timing.validate();
  const double sum = std::accumulate(mix.begin(), mix.end(), 0.0);
  require(std::all_of(mix.begin(), mix.end(), [](double s) { return s >= 0; }),
          "packet mix shares must be non-negative");
  require(std::abs(sum - 1.0) < 1e-9, "packet mix of " + to_string(ip) + " does not sum to 1");
  require(timing.kind == timing_kind::silent || !rg_members.empty(),
          "generator " + to_string(ip) + " needs at least one responder group member");
  require(std::all_of(churn.begin(), churn.end(), [](char c) { return c == '0' || c == '1'; }),
          "churn must be a string of 0 and 1");
  require(delay_us >= 0 && delay_us <= seconds_to_us(max_silence_s), "delay must lie in [0, 600] s");
  require(!packet_size || *packet_size >= 20, "packet size must be at least 20 bytes");
}

std::uint32_t default_packet_size(probe_protocol protocol, packet_kind kind) {
  if (kind != packet_kind::in_protocol)
    return 70;
  switch (protocol) {
    case probe_protocol::dns: return 120;
    case probe_protocol::icmp: return 74;
    case probe_protocol::ntp: return 90;
    default: return 60;
  }
}

std::vector<generator_spec> preset_specs(std::string_view name) {
  if (name == anecdote_preset) {
    // One SYN to port 80 drew 32K+ packets, 1.6 MB+, over 2.3 s from the
    // target and two other addresses.
    generator_spec s;
    s.ip = parse_ipv4("103.40.65.97");
    s.protocol = probe_protocol::tcp80;
    s.timing = timing_profile::constant(14'300, 2.3);
    s.rg_members = {s.ip, parse_ipv4("103.57.177.61"), parse_ipv4("43.225.214.58")};
    s.mix = {0.4, 0.2, 0.2, 0.0, 0.2};
    s.packet_size = 50;
    return {s};
  }
  throw validation_error("unknown preset '" + std::string(name) + "'");
}

void campaign_config::validate() const {
  require(rescans >= 0, "rescans must not be negative");
  require(std::isfinite(noise_pps) && noise_pps >= 0, "noise rate must be non-negative");
  schedule.validate();
  require(!full_rate_pps || *full_rate_pps > 0, "full scan rate must be positive");
  require(!rescan_rate_pps || *rescan_rate_pps > 0, "rescan rate must be positive");
  require(!noise_sources.contains(scanner), "the scanner must not sit in the noise range");
}

namespace {

class campaign_builder {
public:
  campaign_builder(const std::vector<generator_spec>& specs, const campaign_config& config)
    : specs_(specs), config_(config) {}

  synth_campaign build() {
    synth_campaign campaign;
    std::vector<std::size_t> targets(specs_.size());
    std::iota(targets.begin(), targets.end(), 0);

    auto schedule = config_.schedule;
    schedule.rounds = config_.rescans;
    time_us start = config_.start_time;
    std::vector<time_us> rescan_starts;
    for (int round = 0; round <= config_.rescans; ++round) {
      if (round == 1) {
        // Rescans are scheduled from the end of the full scan.
        const auto& full = campaign.rounds.front();
        rescan_starts = schedule_rescans(full.ledger.empty() ? full.start_time : full.ledger.back().send_time,
                                         schedule);
        if (!config_.rescan_all) {
          targets.clear();
          for (std::size_t i = 0; i < specs_.size(); ++i)
            if (blowback_in_round0(campaign.rounds.front(), specs_[i]))
              targets.push_back(i);
        }
      }
      if (round >= 1)
        start = rescan_starts[static_cast<std::size_t>(round - 1)];
      campaign.rounds.push_back(build_round(round, start, targets));
    }
    return campaign;
  }

private:
  static bool blowback_in_round0(const synth_round& r, const generator_spec& s) {
    auto it = std::lower_bound(r.truth.begin(), r.truth.end(), std::pair{s.protocol, s.ip},
                               [](const generator_profile& p, const std::pair<probe_protocol, ipv4>& key) {
                                 return std::pair{p.protocol, p.generator_ip} < key;
                               });
    return it != r.truth.end() && it->generator_ip == s.ip && it->rounds.front().cls == profile_class::blowback;
  }

  synth_round build_round(int round, time_us start, const std::vector<std::size_t>& targets) {
    synth_round out;
    out.round_id = round;
    out.kind = round == 0 ? scan_kind::full : scan_kind::rescan;
    out.start_time = start;

    // One scan per protocol, all starting together.
    std::map<probe_protocol, std::vector<std::size_t>> by_protocol;
    for (auto i : targets)
      by_protocol[specs_[i].protocol].push_back(i);
    std::unordered_map<ipv4, std::size_t> spec_of;
    for (auto i : targets)
      spec_of.emplace(specs_[i].ip, i);

    std::unordered_set<std::uint64_t> seqs; // across the TCP scans of this round
    seeded_rng reseq(derive_seed(config_.seed, 0x5e9, static_cast<std::uint64_t>(round)));
    for (const auto& [protocol, members] : by_protocol) {
      scan_plan plan;
      plan.protocol = protocol;
      plan.kind = out.kind;
      plan.seed = derive_seed(config_.seed, static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(protocol));
      plan.start_time = start;
      plan.zone = config_.zone;
      plan.rate_pps = out.kind == scan_kind::full ? config_.full_rate_pps : config_.rescan_rate_pps;
      plan.distinct_tokens = true;
      std::vector<ipv4> ips;
      for (auto i : members)
        ips.push_back(specs_[i].ip);
      plan.targets = target_source::list(std::move(ips));
      generate_ledger(plan, [&](const probe_record& p) {
        probe_record probe = p;
        if (auto* seq = std::get_if<tcp_seq>(&probe.token)) {
          auto taken = [&](std::uint64_t s) { return seqs.contains(s) || seqs.contains(s + 1) || seqs.contains(s - 1); };
          while (taken(seq->seq))
            seq->seq = static_cast<std::uint32_t>(reseq.next() >> 32);
          seqs.insert(seq->seq);
        }
        out.ledger.push_back(std::move(probe));
      });
    }
    std::stable_sort(out.ledger.begin(), out.ledger.end(),
                     [](const auto& a, const auto& b) { return a.send_time < b.send_time; });

    std::vector<packet_record> packets;
    std::vector<bool> noise;
    for (const auto& probe : out.ledger) {
      const auto i = spec_of.at(probe.target);
      out.truth.push_back(respond(specs_[i], probe, round, i, packets));
    }
    noise.assign(packets.size(), false);
    std::sort(out.truth.begin(), out.truth.end(), [](const auto& a, const auto& b) {
      return std::tie(a.protocol, a.generator_ip) < std::tie(b.protocol, b.generator_ip);
    });

    if (config_.noise_pps > 0) {
      time_us end = start;
      if (!out.ledger.empty())
        end = std::max(end, out.ledger.back().send_time);
      for (const auto& p : packets)
        end = std::max(end, p.recv_time);
      end += us_per_second;
      const auto count = static_cast<std::uint64_t>(
        std::llround(config_.noise_pps * static_cast<double>(end - start) / 1e6));
      seeded_rng rng(derive_seed(config_.seed, 0x4015e, static_cast<std::uint64_t>(round)));
      for (std::uint64_t k = 0; k < count; ++k) {
        packets.push_back(noise_packet(rng, start, end));
        noise.push_back(true);
      }
      out.noise_packets = count;
    }

    std::vector<std::size_t> order(packets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return packets[a].recv_time < packets[b].recv_time; });
    out.packets.reserve(packets.size());
    out.noise.reserve(packets.size());
    for (auto k : order) {
      out.packets.push_back(std::move(packets[k]));
      out.noise.push_back(noise[k]);
    }
    return out;
  }

  generator_profile respond(const generator_spec& spec, const probe_record& probe, int round,
                            std::size_t spec_index, std::vector<packet_record>& packets) const {
    generator_profile truth{spec.ip, spec.protocol, {}};
    round_record rec;
    rec.round_id = round;
    if (spec.present_in(round)) {
      const auto offsets = spec.timing.offsets();
      const auto counts = allocate_mix(spec.mix, offsets.size());
      std::vector<packet_kind> kinds;
      kinds.reserve(offsets.size());
      for (std::size_t k = 0; k < counts.size(); ++k)
        kinds.insert(kinds.end(), counts[k], all_packet_kinds[k]);
      seeded_rng rng(derive_seed(config_.seed, 0x5bec + spec_index, static_cast<std::uint64_t>(round)));
      for (std::size_t k = kinds.size(); k > 1; --k)
        std::swap(kinds[k - 1], kinds[rng.below(k)]);

      std::set<ipv4> sources;
      std::size_t next_member = 0;
      for (std::size_t k = 0; k < offsets.size(); ++k) {
        const auto kind = kinds[k];
        ipv4 src = spec.ip;
        if (!(kind == packet_kind::in_protocol && spec.protocol == probe_protocol::ntp))
          src = spec.rg_members[next_member++ % spec.rg_members.size()];
        auto p = make_packet(spec, probe, kind, src, probe.send_time + spec.delay_us + offsets[k]);
        sources.insert(src);
        ++rec.kinds[static_cast<std::size_t>(kind)];
        rec.byte_count += p.size;
        packets.push_back(std::move(p));
      }
      rec.packet_count = offsets.size();
      rec.member_ips.assign(sources.begin(), sources.end());
    }
    rec.cls = classify_count(rec.packet_count);
    truth.rounds.push_back(std::move(rec));
    return truth;
  }

  packet_record make_packet(const generator_spec& spec, const probe_record& probe, packet_kind kind,
                            ipv4 src, time_us when) const {
    packet_record p;
    p.recv_time = when;
    p.src_ip = src;
    p.dst_ip = config_.scanner;
    p.size = spec.packet_size.value_or(default_packet_size(spec.protocol, kind));
    auto quote = [&](std::uint8_t type, std::uint8_t code) {
      p.transport = transport::icmp;
      p.icmp_type = type;
      p.icmp_code = code;
      p.quoted_dst_ip = probe.target;
    };
    switch (kind) {
      case packet_kind::in_protocol:
        switch (spec.protocol) {
          case probe_protocol::dns: {
            p.transport = transport::udp;
            p.src_port = 53;
            p.dst_port = wire::default_ephemeral_port;
            const auto msg = wire::dns_response_message(std::get<dns_qname>(probe.token).name, 0);
            p.payload_text = cap_payload({reinterpret_cast<const char*>(msg.data()), msg.size()});
            break;
          }
          case probe_protocol::icmp:
            p.transport = transport::icmp;
            p.icmp_type = icmp_type::echo_reply;
            p.icmp_code = 0;
            p.icmp_echo_id = std::get<icmp_echo_id>(probe.token).id;
            break;
          case probe_protocol::ntp:
            p.transport = transport::udp;
            p.src_port = 123;
            p.dst_port = wire::default_ephemeral_port;
            break;
          default:
            p.transport = transport::tcp;
            p.src_port = probed_port(spec.protocol);
            p.dst_port = wire::default_ephemeral_port;
            p.tcp_flags = tcp_flag::syn | tcp_flag::ack;
            p.tcp_ack = std::get<tcp_seq>(probe.token).seq + 1;
            break;
        }
        break;
      case packet_kind::ttl_expired: quote(icmp_type::time_exceeded, 0); break;
      case packet_kind::redirect: quote(icmp_type::redirect, 1); break;
      case packet_kind::unreachable: quote(icmp_type::unreachable, 1); break;
      case packet_kind::other: quote(icmp_type::parameter_problem, 0); break;
    }
    return p;
  }

  // Noise fails every rule by construction: unprobed sources, no port
  // 55000, no SYN/ACK, no echo messages, quotations of unprobed addresses
  // and payload bytes that cannot spell a query name.
  packet_record noise_packet(seeded_rng& rng, time_us start, time_us end) const {
    const auto& range = config_.noise_sources;
    auto noise_ip = [&] {
      return ipv4{range.network.value + static_cast<std::uint32_t>(rng.below(range.size()))};
    };
    auto port = [&] {
      std::uint16_t v;
      do
        v = static_cast<std::uint16_t>(rng.below(65536));
      while (v == wire::default_ephemeral_port);
      return v;
    };
    auto payload = [&] {
      std::string s(rng.below(33), '\0');
      for (auto& c : s)
        c = static_cast<char>(0x80 + rng.below(0x80));
      return s;
    };
    packet_record p;
    p.recv_time = start + static_cast<time_us>(rng.below(static_cast<std::uint64_t>(end - start)));
    p.src_ip = noise_ip();
    p.dst_ip = config_.scanner;
    switch (rng.below(4)) {
      case 0:
        p.transport = transport::udp;
        p.src_port = port();
        p.dst_port = port();
        p.payload_text = payload();
        p.size = static_cast<std::uint32_t>(28 + p.payload_text.size());
        break;
      case 1: {
        static constexpr std::uint8_t flags[] = {tcp_flag::ack, tcp_flag::rst, tcp_flag::rst | tcp_flag::ack,
                                                 tcp_flag::fin | tcp_flag::ack, tcp_flag::psh | tcp_flag::ack};
        p.transport = transport::tcp;
        p.src_port = port();
        p.dst_port = port();
        p.tcp_flags = flags[rng.below(std::size(flags))];
        p.tcp_ack = static_cast<std::uint32_t>(rng.next());
        p.payload_text = payload();
        p.size = static_cast<std::uint32_t>(40 + p.payload_text.size());
        break;
      }
      case 2:
        p.transport = transport::icmp;
        p.icmp_type = icmp_type::unreachable;
        p.icmp_code = static_cast<std::uint8_t>(rng.below(16));
        p.quoted_dst_ip = noise_ip();
        p.size = 56;
        break;
      default:
        p.transport = transport::other;
        p.size = static_cast<std::uint32_t>(24 + rng.below(1400));
        break;
    }
    return p;
  }

  const std::vector<generator_spec>& specs_;
  const campaign_config& config_;
};

} // namespace

synth_campaign generate_campaign(const std::vector<generator_spec>& specs, const campaign_config& config) {
  config.validate();
  std::unordered_set<ipv4> ips;
  for (const auto& s : specs) {
    s.validate();
    if (!ips.insert(s.ip).second)
      throw validation_error("duplicate generator address " + to_string(s.ip));
    require(!config.noise_sources.contains(s.ip), "generator " + to_string(s.ip) + " lies in the noise range");
    for (auto m : s.rg_members)
      require(!config.noise_sources.contains(m),
              "responder " + to_string(m) + " lies in the noise range");
    if (s.protocol == probe_protocol::dns)
      require(config.zone.size() < 200, "zone too long");
  }
  return campaign_builder(specs, config).build();
}

} // namespace bbkit
