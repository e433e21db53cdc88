#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bbkit/model.hpp"

namespace bbkit {

enum class profile_class : std::uint8_t { silent, single, multipacket, blowback };

std::string_view to_string(profile_class c);
profile_class parse_profile_class(std::string_view text);

inline constexpr std::uint64_t default_blowback_threshold = 4;

/// silent: 0 packets, single: 1, multipacket: 2..threshold-1, blowback: >= threshold.
profile_class classify_count(std::uint64_t packets,
                             std::uint64_t blowback_threshold = default_blowback_threshold);

/// Response packet kinds used for the packet-type breakdown.
enum class packet_kind : std::uint8_t { in_protocol, ttl_expired, redirect, unreachable, other };

inline constexpr std::array<packet_kind, 5> all_packet_kinds{
  packet_kind::in_protocol, packet_kind::ttl_expired, packet_kind::redirect,
  packet_kind::unreachable, packet_kind::other};

std::string_view to_string(packet_kind k);

/// In-protocol means: DNS - UDP from port 53 carrying the query name;
/// ICMP - echo reply; NTP - UDP from port 123; TCP - TCP from the probed
/// port. Otherwise ICMP 11/0, ICMP 5 (any code), ICMP 3, or other.
packet_kind classify_packet(const probe_record& probe, const packet_record& packet);

using kind_counts = std::array<std::uint64_t, 5>;

struct round_record {
  int round_id = 0;
  std::uint64_t packet_count = 0;
  std::uint64_t byte_count = 0;
  std::vector<ipv4> member_ips; // sorted, distinct
  profile_class cls = profile_class::silent;
  kind_counts kinds{};

  friend bool operator==(const round_record&, const round_record&) = default;
};

/// Per-target classification across the full scan (round 0) and rescans.
struct generator_profile {
  ipv4 generator_ip;
  probe_protocol protocol = probe_protocol::dns;
  std::vector<round_record> rounds; // ascending round_id

  const round_record* find_round(int round_id) const;
  std::uint64_t packets_in(int round_id) const;
};

/// One profile per probed target that matched at least one packet, ordered
/// by (protocol, generator_ip). Throws data_error when a target was probed
/// more than once in the round.
std::vector<generator_profile> build_profiles(std::span<const matched_response> responses,
                                              int round_id,
                                              std::uint64_t blowback_threshold = default_blowback_threshold);

/// Adds SILENT entries for ledger targets that produced nothing.
void add_silent_targets(std::vector<generator_profile>& profiles,
                        std::span<const probe_record> ledger, int round_id);

/// Folds per-round profile lists into one profile per (ip, protocol).
std::vector<generator_profile> merge_rounds(std::span<const std::vector<generator_profile>> rounds);

struct probe_totals {
  std::uint64_t packets = 0;
  std::uint64_t bytes = 0;
};

probe_totals totals_of(std::span<const probe_record> ledger);

/// Ratio of response to probe traffic; nullopt when the probe side is zero.
std::optional<double> amplification(double response, double probe);

struct scan_summary {
  std::uint64_t total_rggs = 0;
  std::uint64_t multipacket_rggs = 0; // includes blowback
  std::uint64_t blowback_rggs = 0;
  std::uint64_t multipacket_packets = 0;
  std::uint64_t blowback_packets = 0;
  std::optional<double> blowback_share_of_multipacket_traffic;
  std::uint64_t probe_packets = 0;
  std::uint64_t probe_bytes = 0;
  std::uint64_t response_packets = 0;
  std::uint64_t response_bytes = 0;
  std::optional<double> packet_amplification;
  std::optional<double> volume_amplification;
};

/// Summarizes one round of profiles against its ledger totals.
scan_summary summarize_scan(std::span<const generator_profile> profiles, int round_id,
                            probe_totals probes,
                            std::uint64_t blowback_threshold = default_blowback_threshold);

/// Packet-type shares over multipacket responses.
struct type_breakdown {
  kind_counts counts{};

  void add(packet_kind k, std::uint64_t n = 1) { counts[static_cast<std::size_t>(k)] += n; }
  std::uint64_t total() const;
  /// Percentages; all zero for an empty breakdown.
  std::array<double, 5> shares_percent() const;
};

/// Expects responses already restricted to multipacket generators.
type_breakdown response_type_breakdown(std::span<const matched_response> responses);

/// Percent with two decimals, e.g. "36.66%".
std::string format_percent(double percent);

} // namespace bbkit
