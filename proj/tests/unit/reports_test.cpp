#include "doctest.h"

#include <sstream>

#include "bbkit/digest.hpp"
#include "bbkit/errors.hpp"
#include "bbkit/reports.hpp"
#include "bbkit/synth.hpp"
#include "fleet.hpp"

using namespace bbkit;

namespace {

struct sample {
  responses_file responses;
  profiles_file profiles;
};

// Two rounds of a small mixed fleet, matched and classified.
sample make_sample() {
  testing::fleet_options opt;
  opt.generators = 200;
  opt.rounds = 2;
  campaign_config cfg;
  cfg.rescans = 1;
  cfg.rescan_all = true;
  const auto c = generate_campaign(testing::make_fleet(31, opt), cfg);
  sample s;
  for (const auto& round : c.rounds) {
    match_report report;
    auto profiles = testing::recover_round(round, {}, &report);
    if (round.round_id == 1) {
      s.responses.round_id = 1;
      s.responses.ledgers = describe_ledger(round.ledger);
      s.responses.responses = report.responses;
      s.responses.counters = report.counters;
    }
    for (const auto& [p, facts] : describe_ledger(round.ledger))
      s.profiles.probes[{round.round_id, p}] = facts.totals;
    s.profiles.profiles = round.round_id == 0 ? profiles : merge_rounds(std::vector{s.profiles.profiles, profiles});
  }
  return s;
}

bool same_responses(const std::vector<matched_response>& a, const std::vector<matched_response>& b) {
  if (a.size() != b.size())
    return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a[i].probe == b[i].probe && a[i].packets == b[i].packets))
      return false;
  return true;
}

} // namespace

TEST_CASE("TSV tables end with a version and digest footer") {
  std::ostringstream out;
  tsv_writer w(out, {"a", "b", "c"});
  w << "x" << std::uint64_t{3} << 0.5;
  w.end_row();
  w << "y" << -2 << std::optional<double>{};
  w.end_row();
  w.comment("note");
  w.finish({{"ledger.csv", sha256_hex("abc")}});
  const std::string expected = "a\tb\tc\nx\t3\t0.500000\ny\t-2\tNA\n# note\n# bbkit " + std::string(library_version())
                               + " inputs: ledger.csv=sha256:"
                                 "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad\n";
  CHECK(out.str() == expected);

  std::istringstream in(out.str());
  const auto t = read_tsv(in);
  CHECK(t.columns == std::vector<std::string>{"a", "b", "c"});
  CHECK(t.rows.size() == 2);
  CHECK(t.rows[1][2] == "NA");
  CHECK(t.comments.size() == 2);
  CHECK(t.column("c") == 2);
  CHECK_THROWS_AS(t.column("d"), data_error);

  std::ostringstream empty;
  tsv_writer(empty, {"only"}).finish({});
  CHECK(empty.str().find("inputs: none") != std::string::npos);
}

TEST_CASE("TSV shape errors") {
  std::ostringstream out;
  tsv_writer w(out, {"a", "b"});
  w << "x";
  CHECK_THROWS(w.end_row());
  std::istringstream bad("a\tb\n1\n");
  CHECK_THROWS_AS(read_tsv(bad), data_error);
  std::istringstream none("# just a comment\n");
  CHECK_THROWS_AS(read_tsv(none), data_error);
}

TEST_CASE("number formatting") {
  CHECK(format_number(1.0 / 3.0) == "0.333333");
  CHECK(format_number(959.0) == "959.000000");
  CHECK(format_number(std::nullopt) == "NA");
}

TEST_CASE("digests") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK_THROWS_AS(sha256_file("/nonexistent/file"), data_error);
}

TEST_CASE("responses and profiles files round trip") {
  const auto s = make_sample();
  REQUIRE_FALSE(s.responses.responses.empty());

  std::stringstream rio;
  write_responses(rio, s.responses);
  const auto back = read_responses(rio);
  CHECK(back.round_id == 1);
  CHECK(same_responses(back.responses, s.responses.responses));
  CHECK(back.counters.matched_packets == s.responses.counters.matched_packets);
  CHECK(back.counters.per_rule == s.responses.counters.per_rule);
  REQUIRE(back.ledgers.size() == s.responses.ledgers.size());
  for (const auto& [p, f] : s.responses.ledgers) {
    CHECK(back.ledgers.at(p).totals.packets == f.totals.packets);
    CHECK(back.ledgers.at(p).first_send == f.first_send);
  }

  std::stringstream pio;
  write_profiles(pio, s.profiles, {});
  const auto pb = read_profiles(pio);
  REQUIRE(pb.profiles.size() == s.profiles.profiles.size());
  for (std::size_t i = 0; i < pb.profiles.size(); ++i) {
    CHECK(pb.profiles[i].generator_ip == s.profiles.profiles[i].generator_ip);
    CHECK(pb.profiles[i].rounds == s.profiles.profiles[i].rounds);
  }
  CHECK(pb.probes.size() == s.profiles.probes.size());

  std::istringstream junk("0,garbage\n");
  CHECK_THROWS_AS(read_responses(junk), data_error);
}

TEST_CASE("full-scan table agrees with the summary") {
  const auto s = make_sample();
  std::stringstream out;
  write_full_scan_table(out, s.profiles, 0, default_blowback_threshold, {});
  const auto t = read_tsv(out);
  CHECK(t.rows.size() == protocols_in(s.profiles).size());
  for (const auto& row : t.rows) {
    const auto p = parse_protocol(row[t.column("protocol")]);
    const auto sum = summarize_scan(profiles_for(s.profiles, p), 0, s.profiles.probes.at({0, p}));
    CHECK(row[t.column("rggs")] == std::to_string(sum.total_rggs));
    CHECK(row[t.column("blowback_rggs")] == std::to_string(sum.blowback_rggs));
    CHECK(row[t.column("probes")] == std::to_string(sum.probe_packets));
  }
  CHECK(rounds_in(s.profiles) == std::vector<int>{0, 1});
}

TEST_CASE("attack timeline file conserves packets") {
  const auto s = make_sample();
  const auto inputs = attack_inputs(s.responses);
  const auto timeline = simulate_attack(inputs);
  std::stringstream out;
  write_attack_timeline(out, timeline, {});
  const auto t = read_tsv(out);
  CHECK(t.columns == std::vector<std::string>{"second", "pps", "Bps"});
  std::uint64_t pps = 0;
  for (const auto& row : t.rows)
    pps += std::stoull(row[1]);
  CHECK(pps == s.responses.counters.matched_packets);
}

TEST_CASE("timing data keeps the largest responses") {
  const auto s = make_sample();
  std::stringstream out;
  write_timing_data(out, s.responses.responses, 3, {}, us_per_second, {});
  const auto t = read_tsv(out);
  std::set<std::string> ips;
  for (const auto& row : t.rows)
    ips.insert(row[1]);
  CHECK(ips.size() <= 3);
  CHECK_FALSE(ips.empty());
}
