#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bbkit/classifier.hpp"
#include "bbkit/ipv4.hpp"
#include "bbkit/model.hpp"
#include "bbkit/probe_engine.hpp"

namespace bbkit {

enum class timing_kind : std::uint8_t { ramp, pulse, burst, constant, single, silent };

std::string_view to_string(timing_kind k);
timing_kind parse_timing_kind(std::string_view text);

/// When a generator's packets leave, relative to its first response.
struct timing_profile {
  timing_kind kind = timing_kind::single;
  double rate = 0;            // pulse, constant: packets per second
  double duration_s = 0;      // ramp, pulse, constant
  std::uint64_t rate_step = 0; // ramp: second s carries rate_step * (s + 1)
  double on_s = 0, off_s = 0; // pulse
  std::vector<std::uint64_t> burst_sizes;
  std::vector<double> gaps_s; // gap before each burst after the first

  static timing_profile single() { return {}; }
  static timing_profile silent() {
    timing_profile t;
    t.kind = timing_kind::silent;
    return t;
  }
  static timing_profile constant(double rate, double duration_s);
  static timing_profile ramp(std::uint64_t rate_step, double duration_s);
  static timing_profile pulse(double on_s, double off_s, double rate, double duration_s);
  static timing_profile burst(std::vector<std::uint64_t> sizes, std::vector<double> gaps_s);

  void validate() const;
  /// Offsets of every packet, ascending.
  std::vector<time_us> offsets() const;
};

inline constexpr time_us burst_spacing = 1000; // between packets of one burst

/// Shares over packet_kind, in all_packet_kinds order.
using packet_mix = std::array<double, 5>;

inline constexpr packet_mix in_protocol_only{1.0, 0, 0, 0, 0};

/// Splits n packets by the mix using largest remainders (ties to the
/// earlier kind).
kind_counts allocate_mix(const packet_mix& mix, std::uint64_t n);

struct generator_spec {
  ipv4 ip;
  probe_protocol protocol = probe_protocol::dns;
  timing_profile timing;
  std::vector<ipv4> rg_members; // sources used round-robin
  packet_mix mix = in_protocol_only;
  /// Presence per round id ('1' or '0'); rounds past the end are present.
  std::string churn;
  time_us delay_us = 0; // probe to first packet
  std::optional<std::uint32_t> packet_size;

  bool present_in(int round_id) const;
  void validate() const;
};

/// Size of one synthetic packet when the spec does not fix it.
std::uint32_t default_packet_size(probe_protocol protocol, packet_kind kind);

inline constexpr std::string_view anecdote_preset = "anecdote-103-40-65-97";

/// Named generator presets; throws validation_error for unknown names.
std::vector<generator_spec> preset_specs(std::string_view name);

struct campaign_config {
  int rescans = 6;
  double noise_pps = 0;
  std::uint64_t seed = 1;
  time_us start_time = 1'600'000'000 * us_per_second;
  rescan_schedule schedule{};
  /// Rescan every target instead of only round-0 blowback generators.
  bool rescan_all = false;
  std::optional<std::int64_t> full_rate_pps;
  std::optional<std::int64_t> rescan_rate_pps;
  cidr noise_sources{ipv4{203, 0, 113, 0}, 24};
  ipv4 scanner{192, 0, 2, 1};
  std::string zone{default_zone};

  void validate() const;
};

struct synth_round {
  int round_id = 0;
  scan_kind kind = scan_kind::full;
  time_us start_time = 0;
  std::vector<probe_record> ledger;   // by send_time
  std::vector<packet_record> packets; // by recv_time
  std::vector<bool> noise;            // parallel to packets
  /// What a correct match and classify must recover: every probed target,
  /// silent ones included, ordered like build_profiles output.
  std::vector<generator_profile> truth;
  std::uint64_t noise_packets = 0;
};

struct synth_campaign {
  std::vector<synth_round> rounds; // round ids 0..rescans
};

/// Builds ledgers, traces and ground truth. Deterministic for a fixed seed.
/// Throws validation_error on duplicate generator addresses.
synth_campaign generate_campaign(const std::vector<generator_spec>& specs, const campaign_config& config);

} // namespace bbkit
