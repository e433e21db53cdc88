#pragma once

#include <iosfwd>
#include <set>
#include <span>
#include <vector>

#include "bbkit/analysis.hpp"
#include "bbkit/attack_sim.hpp"
#include "bbkit/classifier.hpp"
#include "bbkit/prefix_dataset.hpp"
#include "bbkit/report_io.hpp"
#include "bbkit/traceroute.hpp"
#include "bbkit/tsv.hpp"

// Table and figure data files shared by the subcommands and `bbkit run`.

namespace bbkit {

std::set<probe_protocol> protocols_in(const profiles_file& file);
std::vector<int> rounds_in(const profiles_file& file);
std::vector<generator_profile> profiles_for(const profiles_file& file, probe_protocol protocol);
/// Profiles of the given protocol that were blowback generators in bbg_round.
std::vector<generator_profile> bbg_profiles_for(const profiles_file& file, probe_protocol protocol,
                                                int bbg_round, std::uint64_t threshold);

using digests = std::vector<input_digest>;

/// Per protocol: probes, RGGs, multipacket and blowback RGGs and traffic.
void write_full_scan_table(std::ostream& out, const profiles_file& file, int round, std::uint64_t threshold,
                           const digests& inputs);
/// Per protocol averages over the listed rescans, with amplification.
void write_amplification_table(std::ostream& out, const profiles_file& file, std::span<const int> rescans,
                               std::uint64_t threshold, const digests& inputs);
/// Origins of round-0 blowback generator traffic in every listed round.
void write_origins_table(std::ostream& out, const profiles_file& file, const prefix_dataset& asn,
                         const prefix_dataset& geo, std::span<const int> rounds, std::uint64_t threshold,
                         const digests& inputs);
/// Packet-type shares over multipacket generators of one round.
void write_packet_types_table(std::ostream& out, const profiles_file& file, int round, const digests& inputs);
/// Prevalence of round-0 blowback generators in every listed rescan.
void write_stability_data(std::ostream& out, const profiles_file& file, std::span<const int> rescans,
                          std::uint64_t threshold, const digests& inputs);
/// Cumulative activity of round-0 blowback generators.
void write_concentration_data(std::ostream& out, const profiles_file& file, std::span<const int> rounds,
                              int rank_round, std::uint64_t threshold, const digests& inputs);

/// Generators with at least two packets in every listed round.
std::set<ipv4> persistent_multipacket(const profiles_file& file, std::span<const int> rounds);
/// One row for all paths, plus one for paths toward `subset` when given.
void write_loop_data(std::ostream& out, std::span<const traceroute_path> paths, const std::set<ipv4>* subset,
                     int repeat_threshold, const digests& inputs);

/// One attack input per protocol of the file.
std::vector<attack_input> attack_inputs(const responses_file& file);
void write_attack_timeline(std::ostream& out, const attack_timeline& timeline, const digests& inputs);

/// Histograms of the `top` largest responses (or of the given targets).
void write_timing_data(std::ostream& out, std::span<const matched_response> responses, std::size_t top,
                       const std::vector<ipv4>& only_targets, time_us bin_width, const digests& inputs);

} // namespace bbkit
