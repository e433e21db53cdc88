#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bbkit/classifier.hpp"
#include "bbkit/model.hpp"
#include "bbkit/prefix_dataset.hpp"
#include "bbkit/traceroute.hpp"

namespace bbkit {

// ---- stability across rescans ----

struct round_prevalence {
  int round_id = 0;
  std::uint64_t blowback_count = 0; // BBGs still at or above the threshold
  std::uint64_t active_count = 0;   // BBGs with at least one packet
  double blowback = 0.0;
  double active = 0.0;
};

struct stability_report {
  std::size_t bbg_count = 0;
  std::vector<round_prevalence> rounds;
  double blowback_min = 0.0, blowback_max = 0.0;
  double active_min = 0.0, active_max = 0.0;
  /// Rounds whose prevalence exceeds that of some earlier round.
  std::vector<int> blowback_rises;
  std::vector<int> active_rises;

  bool blowback_churn() const { return !blowback_rises.empty(); }
  bool active_churn() const { return !active_rises.empty(); }
  const round_prevalence& first() const { return rounds.front(); }
};

/// Prevalence of the full-scan BBG set in each listed round. Profiles must
/// all be of one protocol. Throws data_error on an empty BBG set or no rounds.
stability_report stability(std::span<const ipv4> full_scan_bbgs,
                           std::span<const generator_profile> profiles,
                           std::span<const int> round_ids,
                           std::uint64_t blowback_threshold = default_blowback_threshold);

/// Targets that were BBGs in the given round.
std::vector<ipv4> blowback_generators(std::span<const generator_profile> profiles, int round_id,
                                      std::uint64_t blowback_threshold = default_blowback_threshold);

// ---- activity concentration ----

struct concentration_curve {
  int round_id = 0;
  std::vector<std::uint64_t> cumulative; // cumulative[k] = packets of ranks 0..k
};

struct concentration_report {
  int rank_round = 0;
  std::vector<ipv4> ranking;
  std::vector<concentration_curve> curves; // in round_ids order
  std::size_t excluded = 0; // generators not active in every round

  const concentration_curve* curve(int round_id) const;
};

/// Ranks generators responsive (>= 1 packet) in every listed round by
/// their activity in rank_round (descending, ties by address), then
/// accumulates each round's packets along that ranking.
concentration_report activity_concentration(std::span<const generator_profile> profiles,
                                            std::span<const int> round_ids, int rank_round = 0);

/// Smallest rank count whose cumulative total reaches the fraction of the
/// curve's final total.
std::size_t ranks_to_reach(const concentration_curve& curve, double fraction);

// ---- origins ----

struct origin_share {
  std::string value;
  std::uint64_t packets = 0;
  double share = 0.0;
};

struct origin_round {
  int round_id = 0;
  std::uint64_t total_packets = 0;
  std::vector<origin_share> by_asn;     // share descending, "unknown" included
  std::vector<origin_share> by_country; // share descending, "unknown" included
  std::optional<origin_share> dominant_asn;
  std::optional<origin_share> dominant_country;
  std::uint64_t unknown_asn_generators = 0;
  std::uint64_t unknown_country_generators = 0;
  /// Fraction of the geo dataset's address space per country.
  std::map<std::string, double> country_address_share;
};

/// Every packet counts toward the ASN and country of its generator, not of
/// the address that sent it. Dominance ignores "unknown"; ties go to the
/// numerically smaller ASN and the lexicographically smaller country.
std::vector<origin_round> attribute_origins(std::span<const generator_profile> profiles,
                                            const prefix_dataset& asn_dataset,
                                            const prefix_dataset& geo_dataset,
                                            std::span<const int> round_ids);

// ---- routing loops ----

/// A path loops when some router address occurs at least repeat_threshold
/// times. Timeouts never count.
bool has_loop(const traceroute_path& path, int repeat_threshold = 3);

struct loop_report {
  std::size_t total = 0;
  std::size_t looping = 0;
  std::optional<double> prevalence; // nullopt for no paths
};

loop_report detect_loops(std::span<const traceroute_path> paths, int repeat_threshold = 3);

// ---- timing ----

/// Packet counts per bin after the probe; bins are floor((recv - send) /
/// bin_width) and run up to the last non-empty one. Throws data_error for
/// an empty response and validation_error for a non-positive bin width.
std::vector<std::uint64_t> timing_histogram(const matched_response& response,
                                            time_us bin_width = us_per_second);

} // namespace bbkit
