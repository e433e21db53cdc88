#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "bbkit/classifier.hpp"
#include "bbkit/model.hpp"

namespace bbkit {

/// Responses of one protocol's rescan plus the time that rescan started.
struct attack_input {
  probe_protocol protocol = probe_protocol::dns;
  time_us rescan_start = 0;
  std::vector<matched_response> responses;
  /// Attacker cost; summed from the probe ledger.
  probe_totals probes;
};

struct attack_bin {
  std::uint64_t packets = 0;
  std::uint64_t bytes = 0;
  friend bool operator==(const attack_bin&, const attack_bin&) = default;
};

struct attack_options {
  /// Experimental: replay the whole probe set this many times.
  int repeat = 1;
  /// Experimental: seconds between replays.
  std::int64_t period_s = 0;

  void validate() const;
};

struct attack_timeline {
  std::vector<attack_bin> bins; // bins[s] covers [s, s+1) seconds after attack start
  std::set<probe_protocol> protocols;
  std::uint64_t total_packets = 0;
  std::uint64_t total_bytes = 0;
  std::uint64_t skewed_packets = 0; // arrived before their probe; clamped to bin 0
  probe_totals probes;

  std::size_t duration_s() const { return bins.size(); }
  attack_bin at(std::size_t second) const { return second < bins.size() ? bins[second] : attack_bin{}; }
  std::optional<double> first_second_packet_amplification() const;
  std::optional<double> first_second_byte_amplification() const;
};

/// Moves every probe to the attack start and sums per-second arrivals over
/// all inputs. Protocols are assumed to add up when probed simultaneously.
attack_timeline simulate_attack(std::span<const attack_input> inputs, const attack_options& options = {});

/// Bin-wise sum; used to check that aggregation is linear.
attack_timeline combine(const attack_timeline& a, const attack_timeline& b);

} // namespace bbkit
