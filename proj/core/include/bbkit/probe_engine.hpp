#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bbkit/model.hpp"

namespace bbkit {

enum class scan_kind : std::uint8_t { full, rescan };

/// Either an explicit, ordered list of targets or a sweep of the IPv4 space
/// in a seeded full-period order.
struct target_source {
  std::vector<ipv4> targets;
  bool full_sweep = false;
  std::uint64_t sweep_limit = std::uint64_t{1} << 32;

  static target_source list(std::vector<ipv4> targets);
  static target_source sweep(std::uint64_t limit = std::uint64_t{1} << 32);
};

inline constexpr std::string_view default_zone = "probe.example.net";

struct scan_plan {
  probe_protocol protocol = probe_protocol::dns;
  target_source targets;
  std::optional<std::int64_t> rate_pps; // unset: protocol/kind default
  scan_kind kind = scan_kind::full;
  std::uint64_t seed = 0;
  time_us start_time = 0;
  std::string zone{default_zone};
  std::optional<std::uint32_t> probe_size; // unset: protocol default
  /// Forbid token collisions inside the ledger (ICMP ids, TCP seq and
  /// seq+1 neighbours). Used by the synthetic campaign generator.
  bool distinct_tokens = false;

  /// Throws validation_error.
  void validate() const;
  std::int64_t effective_rate() const;
  std::uint32_t effective_probe_size() const;
};

/// 40K pps for full scans (100K for ICMP), 100 pps for rescans.
std::int64_t default_rate(scan_kind kind, probe_protocol protocol);
/// DNS 70 B, ICMP 74 B, TCP SYN 60 B, NTP 90 B.
std::uint32_t default_probe_size(probe_protocol protocol);

/// Offset of the i-th probe from the scan start, in microseconds.
__extension__ using wide_int = __int128;

constexpr time_us send_offset(std::uint64_t index, std::int64_t rate_pps) {
  return static_cast<time_us>((static_cast<wide_int>(index) * us_per_second) / rate_pps);
}

/// Streams one record per target. Deterministic for a fixed seed.
void generate_ledger(const scan_plan& plan, const std::function<void(const probe_record&)>& sink);
std::vector<probe_record> generate_ledger(const scan_plan& plan);

struct rescan_schedule {
  int first_offset_days = 6;
  int inter_rescan_days = 3;
  int rounds = 6;

  void validate() const;
};

inline constexpr time_us us_per_day = 86'400 * us_per_second;

std::vector<time_us> schedule_rescans(time_us full_scan_end, const rescan_schedule& schedule);

} // namespace bbkit
