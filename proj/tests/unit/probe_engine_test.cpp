#include "doctest.h"

#include <set>

#include "bbkit/errors.hpp"
#include "bbkit/probe_emitter.hpp"
#include "bbkit/probe_engine.hpp"

using namespace bbkit;

namespace {

scan_plan plan_for(probe_protocol p, std::vector<ipv4> targets, std::int64_t rate, std::uint64_t seed) {
  scan_plan plan;
  plan.protocol = p;
  plan.targets = target_source::list(std::move(targets));
  plan.rate_pps = rate;
  plan.seed = seed;
  return plan;
}

} // namespace

TEST_CASE("three TCP80 targets at 100 pps") {
  const std::vector<ipv4> t{{10, 0, 0, 1}, {10, 0, 0, 2}, {10, 0, 0, 3}};
  const auto a = generate_ledger(plan_for(probe_protocol::tcp80, t, 100, 7));
  REQUIRE(a.size() == 3);
  const time_us spacing = us_per_second / 100;
  CHECK(a[1].send_time - a[0].send_time == spacing);
  CHECK(a[2].send_time - a[1].send_time == spacing);
  std::set<std::uint32_t> seqs;
  for (const auto& p : a)
    seqs.insert(std::get<tcp_seq>(p.token).seq);
  CHECK(seqs.size() == 3);
  CHECK(a == generate_ledger(plan_for(probe_protocol::tcp80, t, 100, 7)));
  CHECK(a != generate_ledger(plan_for(probe_protocol::tcp80, t, 100, 8)));
}

TEST_CASE("NTP probes carry no token") {
  const auto a = generate_ledger(plan_for(probe_protocol::ntp, {{10, 0, 0, 1}}, 100, 1));
  REQUIRE(a.size() == 1);
  CHECK(std::holds_alternative<no_token>(a[0].token));
  CHECK(a[0].probe_size == 90);
}

TEST_CASE("no targets, no probes") {
  CHECK(generate_ledger(plan_for(probe_protocol::dns, {}, 100, 1)).empty());
}

TEST_CASE("rate must be positive and rescans need a list") {
  auto p = plan_for(probe_protocol::dns, {{10, 0, 0, 1}}, 0, 1);
  CHECK_THROWS_AS(p.validate(), validation_error);
  p.rate_pps = -5;
  CHECK_THROWS_AS(generate_ledger(p), validation_error);
  scan_plan r;
  r.kind = scan_kind::rescan;
  r.targets = target_source::sweep(10);
  CHECK_THROWS_AS(r.validate(), validation_error);
}

TEST_CASE("rate and size defaults") {
  CHECK(default_rate(scan_kind::full, probe_protocol::dns) == 40'000);
  CHECK(default_rate(scan_kind::full, probe_protocol::icmp) == 100'000);
  CHECK(default_rate(scan_kind::rescan, probe_protocol::tcp443) == 100);
  CHECK(default_probe_size(probe_protocol::dns) == 70);
  CHECK(default_probe_size(probe_protocol::icmp) == 74);
  CHECK(default_probe_size(probe_protocol::tcp25) == 60);
  CHECK(default_probe_size(probe_protocol::ntp) == 90);
}

TEST_CASE("the send rate is never exceeded") {
  for (std::int64_t rate : {1, 3, 7, 100, 40'000, 100'000, 999'999}) {
    scan_plan p;
    p.protocol = probe_protocol::icmp;
    p.targets = target_source::sweep(2000);
    p.rate_pps = rate;
    const auto ledger = generate_ledger(p);
    REQUIRE(ledger.size() == 2000);
    const time_us floor_gap = us_per_second / rate;
    for (std::size_t i = 1; i < ledger.size(); ++i)
      REQUIRE(ledger[i].send_time - ledger[i - 1].send_time >= floor_gap);
  }
}

TEST_CASE("DNS query names are distinct and under the zone") {
  scan_plan p;
  p.protocol = probe_protocol::dns;
  p.targets = target_source::sweep(20'000);
  p.zone = "scan.lab.example";
  const auto ledger = generate_ledger(p);
  std::set<std::string> names;
  for (const auto& r : ledger) {
    const auto& n = std::get<dns_qname>(r.token).name;
    CHECK(n.size() == 16 + 1 + p.zone.size());
    CHECK(n.ends_with(".scan.lab.example"));
    names.insert(n);
  }
  CHECK(names.size() == ledger.size());
}

TEST_CASE("sweep order visits distinct addresses") {
  scan_plan p;
  p.protocol = probe_protocol::ntp;
  p.targets = target_source::sweep(50'000);
  p.seed = 5;
  std::set<std::uint32_t> seen;
  generate_ledger(p, [&](const probe_record& r) { seen.insert(r.target.value); });
  CHECK(seen.size() == 50'000);
}

TEST_CASE("distinct tokens avoid sequence neighbours") {
  scan_plan p;
  p.protocol = probe_protocol::tcp25;
  p.targets = target_source::sweep(30'000);
  p.distinct_tokens = true;
  std::set<std::uint32_t> seqs;
  for (const auto& r : generate_ledger(p))
    seqs.insert(std::get<tcp_seq>(r.token).seq);
  REQUIRE(seqs.size() == 30'000);
  std::uint32_t prev = 0;
  bool first = true;
  for (auto s : seqs) {
    if (!first)
      CHECK(s - prev >= 2);
    prev = s;
    first = false;
  }
}

TEST_CASE("rescan schedule") {
  const time_us T = 1'000 * us_per_second;
  auto s = schedule_rescans(T, {6, 3, 6});
  REQUIRE(s.size() == 6);
  for (int i = 0; i < 6; ++i)
    CHECK(s[static_cast<std::size_t>(i)] == T + (6 + 3 * i) * us_per_day);
  s = schedule_rescans(T, {6, 3, 1});
  REQUIRE(s.size() == 1);
  CHECK(s[0] == T + 6 * us_per_day);
  s = schedule_rescans(T, {9, 3, 6});
  CHECK(s.back() == T + 24 * us_per_day);
  CHECK_THROWS_AS(schedule_rescans(T, {6, 3, 0}), validation_error);
  CHECK_THROWS_AS(schedule_rescans(T, {5, 3, 6}), validation_error);
}

TEST_CASE("emission is confined to lab prefixes") {
  CHECK_NOTHROW(check_allowed_prefixes(std::vector<cidr>{parse_cidr("10.1.0.0/16"), parse_cidr("198.18.0.0/15")}));
  CHECK_NOTHROW(check_allowed_prefixes(std::vector<cidr>{parse_cidr("127.0.0.1")}));
  CHECK_THROWS_AS(check_allowed_prefixes(std::vector<cidr>{parse_cidr("8.8.8.0/24")}), validation_error);
  CHECK_THROWS_AS(check_allowed_prefixes(std::vector<cidr>{parse_cidr("0.0.0.0/0")}), validation_error);
  CHECK_THROWS_AS(check_allowed_prefixes(std::vector<cidr>{parse_cidr("172.0.0.0/8")}), validation_error);

  struct counting_sink : probe_sink {
    int* n;
    explicit counting_sink(int* c) : n(c) {}
    void send(const probe_record&, std::span<const std::uint8_t>) override { ++*n; }
  };
  int sent = 0;
  probe_emitter e({parse_cidr("192.168.0.0/16")}, ipv4{192, 168, 0, 1}, std::make_unique<counting_sink>(&sent));
  CHECK(e.permitted(ipv4{192, 168, 4, 4}));
  CHECK_FALSE(e.permitted(ipv4{1, 1, 1, 1}));
  const auto ok = generate_ledger(plan_for(probe_protocol::icmp, {{192, 168, 1, 1}, {192, 168, 1, 2}}, 1000, 1));
  e.emit_all(ok);
  CHECK(sent == 2);
  const auto bad = generate_ledger(plan_for(probe_protocol::icmp, {{192, 168, 1, 1}, {9, 9, 9, 9}}, 1000, 1));
  CHECK_THROWS_AS(e.emit_all(bad), validation_error);
  CHECK(sent == 2); // nothing sent from a refused batch
}
