#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "bbkit/model.hpp"

namespace bbkit {

/// Which acknowledgment numbers count as pointing at a probe's sequence
/// number. SYN/ACKs carry seq+1; a literal reading accepts seq itself.
enum class ack_mode : std::uint8_t { seq_plus_one, seq_exact, either };

std::string_view to_string(ack_mode m);
ack_mode parse_ack_mode(std::string_view text);

struct match_config {
  time_us expiry_window = 600 * us_per_second;
  bbkit::ack_mode ack_mode = ack_mode::either;
  std::uint16_t ephemeral_port = 55000;
  /// Live-entry cap; the oldest entry is evicted when exceeded.
  std::size_t ledger_capacity = 10'000'000;
  /// Timestamp regressions up to this much are tolerated in either stream.
  time_us disorder_tolerance = us_per_second;

  void validate() const;
};

/// A probe held in the in-memory ledger. An entry is live at time t when
/// send_time <= t <= expiry_time.
struct ledger_entry {
  const probe_record* probe = nullptr;
  std::size_t probe_index = 0;
  time_us expiry_time = 0;
  std::size_t matched_packets = 0;
};

/// Among candidates that passed the same rule, the one with the latest
/// send_time not after the packet; ties go to the lower target address,
/// then to the earlier ledger position.
const ledger_entry& resolve_ambiguity(std::span<const ledger_entry> candidates,
                                      const packet_record& packet);

struct attribution {
  std::size_t probe_index = 0;
  match_rule rule = match_rule::ps1;
  /// PS2 only: the ack equalled the sequence number itself rather than seq+1.
  bool ack_exact = false;

  friend bool operator==(const attribution&, const attribution&) = default;
};

struct match_counters {
  std::uint64_t matched_packets = 0;
  std::uint64_t matched_bytes = 0;
  std::uint64_t unmatched_packets = 0;
  std::uint64_t unmatched_bytes = 0;
  std::uint64_t other_transport = 0;
  std::uint64_t evicted = 0;
  std::uint64_t ack_plus_one = 0;
  std::uint64_t ack_exact = 0;
  std::array<std::uint64_t, 5> per_rule{};

  std::uint64_t per(match_rule r) const { return per_rule[static_cast<std::size_t>(r)]; }
  /// matched / (matched + unmatched); 0 for an empty trace.
  double matched_fraction() const;
};

/// Chronological merge of a probe ledger with a packet stream. Probes are
/// admitted as packet time passes their send_time; each packet is offered
/// to the protocol-specific rules its shape allows, then to the
/// protocol-agnostic ones. A packet refreshes the expiry of every live
/// entry it satisfies, and is attributed to one of them.
class stream_matcher {
public:
  /// probes must be sorted by send_time and outlive the matcher.
  stream_matcher(std::span<const probe_record> probes, match_config config);
  ~stream_matcher();
  stream_matcher(stream_matcher&&) noexcept;
  stream_matcher& operator=(stream_matcher&&) noexcept;

  /// Throws data_error if either stream regresses by more than the
  /// configured tolerance.
  std::optional<attribution> push(const packet_record& packet);

  const match_counters& counters() const;
  std::size_t live_entries() const;

private:
  struct impl;
  std::unique_ptr<impl> impl_;
};

struct match_report {
  /// Probes with at least one packet, in ledger order; packets by recv_time.
  std::vector<matched_response> responses;
  /// One slot per input packet, in input order.
  std::vector<std::optional<attribution>> attributions;
  match_counters counters;

  std::uint64_t unmatched_count() const { return counters.unmatched_packets; }
  double matched_fraction() const { return counters.matched_fraction(); }
};

match_report match_stream(std::span<const probe_record> probes,
                          std::span<const packet_record> packets, const match_config& config);

void sort_by_time(std::vector<probe_record>& probes);
void sort_by_time(std::vector<packet_record>& packets);

} // namespace bbkit
