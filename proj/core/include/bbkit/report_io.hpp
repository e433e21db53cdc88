#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "bbkit/classifier.hpp"
#include "bbkit/matcher.hpp"
#include "bbkit/model.hpp"
#include "bbkit/tsv.hpp"

namespace bbkit {

// Responses file: one line per matched packet,
//   probe_index,<probe ledger fields>,rule,<packet record fields>
// followed by '#'-comments holding the round, per-protocol ledger facts
// and the match counters:
//   # round <id>
//   # ledger <protocol> <probes> <probe_bytes> <first_send_us>
//   # counters matched=<n> unmatched=<n> ...

struct ledger_facts {
  probe_totals totals;
  time_us first_send = 0;
};

struct responses_file {
  int round_id = 0;
  std::map<probe_protocol, ledger_facts> ledgers;
  std::vector<matched_response> responses; // ledger order
  match_counters counters;
};

/// Per-protocol totals and first send time of a ledger.
std::map<probe_protocol, ledger_facts> describe_ledger(std::span<const probe_record> ledger);

void write_responses(std::ostream& out, const responses_file& file);
void write_responses(const std::filesystem::path& path, const responses_file& file);
/// Throws data_error on malformed content.
responses_file read_responses(std::istream& in);
responses_file read_responses(const std::filesystem::path& path);

// Profiles table: one row per (generator, round) plus '# probes' comments
// carrying each round's per-protocol ledger totals.
struct profiles_file {
  std::vector<generator_profile> profiles; // by (protocol, ip)
  std::map<std::pair<int, probe_protocol>, probe_totals> probes;
};

void write_profiles(std::ostream& out, const profiles_file& file, const std::vector<input_digest>& inputs);
profiles_file read_profiles(std::istream& in);
profiles_file read_profiles(const std::filesystem::path& path);

} // namespace bbkit
