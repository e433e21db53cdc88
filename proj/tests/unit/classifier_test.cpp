#include "doctest.h"

#include <cmath>

#include "bbkit/classifier.hpp"
#include "bbkit/errors.hpp"
#include "bbkit/matcher.hpp"
#include "bbkit/synth.hpp"
#include "fleet.hpp"

using namespace bbkit;

namespace {

generator_profile one_round(ipv4 ip, std::uint64_t packets, std::uint64_t bytes, int round = 1) {
  generator_profile g;
  g.generator_ip = ip;
  round_record r;
  r.round_id = round;
  r.packet_count = packets;
  r.byte_count = bytes;
  r.cls = classify_count(packets);
  g.rounds.push_back(r);
  return g;
}

long rounded(const std::optional<double>& v) {
  REQUIRE(v);
  return std::lround(*v);
}

packet_record from(ipv4 src, transport t) {
  packet_record p;
  p.src_ip = src;
  p.transport = t;
  p.size = 60;
  return p;
}

} // namespace

TEST_CASE("class thresholds") {
  CHECK(classify_count(0) == profile_class::silent);
  CHECK(classify_count(1) == profile_class::single);
  CHECK(classify_count(2) == profile_class::multipacket);
  CHECK(classify_count(3) == profile_class::multipacket);
  CHECK(classify_count(4) == profile_class::blowback);
  CHECK(classify_count(32'890) == profile_class::blowback);
  CHECK(classify_count(4, 10) == profile_class::multipacket);
  CHECK(classify_count(10, 10) == profile_class::blowback);
  for (auto c : {profile_class::silent, profile_class::single, profile_class::multipacket, profile_class::blowback})
    CHECK(parse_profile_class(to_string(c)) == c);
}

TEST_CASE("three packets are multipacket, not blowback") {
  matched_response r;
  r.probe = {0, ipv4{10, 0, 0, 1}, probe_protocol::ntp, no_token{}, 90};
  for (int i = 0; i < 3; ++i) {
    auto p = from(ipv4{10, 0, 0, 1}, transport::udp);
    p.recv_time = i;
    r.packets.push_back({p, match_rule::pa2});
  }
  const auto profiles = build_profiles(std::vector{r}, 0);
  REQUIRE(profiles.size() == 1);
  CHECK(profiles[0].rounds[0].cls == profile_class::multipacket);
}

TEST_CASE("the port-80 anecdote is one blowback generator with three senders") {
  const auto specs = preset_specs(anecdote_preset);
  campaign_config cfg;
  cfg.rescans = 0;
  const auto c = generate_campaign(specs, cfg);
  const auto profiles = testing::recover_round(c.rounds[0]);
  REQUIRE(profiles.size() == 1);
  const auto& r = profiles[0].rounds[0];
  CHECK(profiles[0].generator_ip == parse_ipv4("103.40.65.97"));
  CHECK(profiles[0].protocol == probe_protocol::tcp80);
  CHECK(r.cls == profile_class::blowback);
  CHECK(r.packet_count > 32'000);
  CHECK(r.byte_count > 1'600'000);
  CHECK(r.member_ips == std::vector<ipv4>{parse_ipv4("43.225.214.58"), parse_ipv4("103.40.65.97"),
                                          parse_ipv4("103.57.177.61")});
  const auto& pk = c.rounds[0].packets;
  CHECK(pk.back().recv_time - pk.front().recv_time < 23 * us_per_second / 10);
  CHECK(pk.back().recv_time - pk.front().recv_time > 22 * us_per_second / 10);
}

TEST_CASE("a thousand synthetic generators classify as planted") {
  const auto specs = testing::make_fleet(21, {1000, 0});
  campaign_config cfg;
  cfg.rescans = 0;
  const auto c = generate_campaign(specs, cfg);
  const auto got = testing::recover_round(c.rounds[0]);
  REQUIRE(got.size() == c.rounds[0].truth.size());
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < got.size(); ++i)
    mismatches += !(got[i].generator_ip == c.rounds[0].truth[i].generator_ip
                    && got[i].rounds == c.rounds[0].truth[i].rounds);
  CHECK(mismatches == 0);
}

TEST_CASE("duplicate targets in one round are malformed") {
  matched_response a;
  a.probe = {0, ipv4{10, 0, 0, 1}, probe_protocol::ntp, no_token{}, 90};
  a.packets.push_back({from(ipv4{10, 0, 0, 1}, transport::udp), match_rule::pa2});
  auto b = a;
  b.probe.send_time = 5;
  CHECK_THROWS_AS(build_profiles(std::vector{a, b}, 0), data_error);
  // Same target on different protocols is fine.
  b.probe.protocol = probe_protocol::tcp80;
  b.probe.token = tcp_seq{1};
  CHECK(build_profiles(std::vector{a, b}, 0).size() == 2);
}

TEST_CASE("silent targets and round folding") {
  const std::vector<probe_record> ledger{{0, ipv4{10, 0, 0, 1}, probe_protocol::ntp, no_token{}, 90},
                                         {1, ipv4{10, 0, 0, 2}, probe_protocol::ntp, no_token{}, 90}};
  matched_response a;
  a.probe = ledger[0];
  a.packets.push_back({from(ipv4{10, 0, 0, 1}, transport::udp), match_rule::pa2});
  auto r0 = build_profiles(std::vector{a}, 0);
  add_silent_targets(r0, ledger, 0);
  REQUIRE(r0.size() == 2);
  CHECK(r0[1].rounds[0].cls == profile_class::silent);
  auto r1 = build_profiles(std::vector{a}, 1);
  const std::vector<std::vector<generator_profile>> both{r0, r1};
  const auto merged = merge_rounds(both);
  REQUIRE(merged.size() == 2);
  REQUIRE(merged[0].rounds.size() == 2);
  CHECK(merged[0].rounds[0].round_id == 0);
  CHECK(merged[0].rounds[1].round_id == 1);
  CHECK(merged[0].packets_in(1) == 1);
  CHECK(merged[1].packets_in(1) == 0);
  CHECK(merged[1].find_round(1) == nullptr);
}

TEST_CASE("Table 2 rows reproduce from raw counts") {
  struct row {
    double probes, probe_mb, resp_m, resp_mb;
    long pkt, vol;
  };
  const row rows[] = {{60'511, 6.1, 1.8, 132.6, 30, 22},        {107'912, 3.0, 103.5, 7'271.6, 959, 2'424},
                      {241'353, 9.7, 2.7, 144.2, 11, 15},       {85'687, 3.4, 1.6, 89.0, 19, 26},
                      {298'379, 11.9, 3.2, 167.7, 11, 14},      {56'149, 4.3, 21.0, 1'585.2, 374, 369}};
  for (const auto& r : rows) {
    const auto g = one_round(ipv4{1, 1, 1, 1}, static_cast<std::uint64_t>(r.resp_m * 1e6),
                             static_cast<std::uint64_t>(r.resp_mb * 1e6));
    const auto s = summarize_scan(std::vector{g}, 1,
                                  {static_cast<std::uint64_t>(r.probes), static_cast<std::uint64_t>(r.probe_mb * 1e6)});
    CHECK(std::abs(rounded(s.packet_amplification) - r.pkt) <= 1);
    CHECK(std::abs(rounded(s.volume_amplification) - r.vol) <= 1);
  }
}

TEST_CASE("identity amplification and an empty probe side") {
  const auto g = one_round(ipv4{1, 1, 1, 1}, 1, 100);
  auto s = summarize_scan(std::vector{g}, 1, {1, 100});
  CHECK(*s.packet_amplification == doctest::Approx(1.0));
  CHECK(*s.volume_amplification == doctest::Approx(1.0));
  s = summarize_scan(std::vector{g}, 1, {0, 0});
  CHECK_FALSE(s.packet_amplification);
  CHECK_FALSE(s.volume_amplification);
  CHECK_FALSE(amplification(5, 0));
}

TEST_CASE("amplification is scale-invariant") {
  for (double k : {0.5, 3.0, 1000.0})
    CHECK(*amplification(1.8e6 * k, 60'511 * k) == doctest::Approx(*amplification(1.8e6, 60'511)));
}

TEST_CASE("scan summary counts and blowback share") {
  std::vector<generator_profile> p{one_round(ipv4{1, 0, 0, 1}, 1, 60), one_round(ipv4{1, 0, 0, 2}, 3, 180),
                                   one_round(ipv4{1, 0, 0, 3}, 10, 600), one_round(ipv4{1, 0, 0, 4}, 0, 0)};
  const auto s = summarize_scan(p, 1, {4, 240});
  CHECK(s.total_rggs == 3);
  CHECK(s.multipacket_rggs == 2);
  CHECK(s.blowback_rggs == 1);
  CHECK(*s.blowback_share_of_multipacket_traffic == doctest::Approx(10.0 / 13.0));
  CHECK(s.response_packets == 14);
  CHECK(*s.packet_amplification == doctest::Approx(3.5));
}

TEST_CASE("packet kinds per protocol") {
  const probe_record dns{0, ipv4{9, 9, 9, 9}, probe_protocol::dns, make_qname("q.z.example"), 70};
  auto ans = from(ipv4{9, 9, 9, 9}, transport::udp);
  ans.src_port = 53;
  ans.dst_port = 55000;
  ans.payload_text = "Q.Z.EXAMPLE";
  CHECK(classify_packet(dns, ans) == packet_kind::in_protocol);
  ans.payload_text.clear();
  CHECK(classify_packet(dns, ans) == packet_kind::other);

  const probe_record ntp{0, ipv4{9, 9, 9, 9}, probe_protocol::ntp, no_token{}, 90};
  auto n = from(ipv4{9, 9, 9, 9}, transport::udp);
  n.src_port = 123;
  CHECK(classify_packet(ntp, n) == packet_kind::in_protocol);

  const probe_record tcp{0, ipv4{9, 9, 9, 9}, probe_protocol::tcp443, tcp_seq{1}, 60};
  auto t = from(ipv4{9, 9, 9, 9}, transport::tcp);
  t.src_port = 443;
  CHECK(classify_packet(tcp, t) == packet_kind::in_protocol);
  t.src_port = 80;
  CHECK(classify_packet(tcp, t) == packet_kind::other);

  const probe_record echo{0, ipv4{9, 9, 9, 9}, probe_protocol::icmp, icmp_echo_id{1}, 74};
  auto e = from(ipv4{9, 9, 9, 9}, transport::icmp);
  e.icmp_type = 0;
  CHECK(classify_packet(echo, e) == packet_kind::in_protocol);
  e.icmp_type = 11;
  e.icmp_code = 0;
  CHECK(classify_packet(echo, e) == packet_kind::ttl_expired);
  e.icmp_code = 1;
  CHECK(classify_packet(echo, e) == packet_kind::other);
  e.icmp_type = 5;
  CHECK(classify_packet(echo, e) == packet_kind::redirect);
  e.icmp_code = 3;
  CHECK(classify_packet(echo, e) == packet_kind::redirect);
  e.icmp_type = 3;
  CHECK(classify_packet(echo, e) == packet_kind::unreachable);
  CHECK(classify_packet(tcp, e) == packet_kind::unreachable);
}

TEST_CASE("packet-type shares") {
  type_breakdown b;
  b.add(packet_kind::in_protocol, 50);
  b.add(packet_kind::ttl_expired, 30);
  b.add(packet_kind::redirect, 20);
  const auto s = b.shares_percent();
  CHECK(s[0] == doctest::Approx(50));
  CHECK(s[1] == doctest::Approx(30));
  CHECK(s[2] == doctest::Approx(20));
  CHECK(s[3] == 0);
  CHECK(s[4] == 0);

  type_breakdown u;
  u.add(packet_kind::unreachable, 7);
  CHECK(u.shares_percent()[3] == doctest::Approx(100));
  CHECK(type_breakdown{}.shares_percent() == std::array<double, 5>{});

  type_breakdown dns;
  dns.counts = {434, 3'666, 2'925, 2'618, 357};
  const auto d = dns.shares_percent();
  const char* expected[] = {"4.34%", "36.66%", "29.25%", "26.18%", "3.57%"};
  double sum = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(format_percent(d[i]) == expected[i]);
    sum += std::round(d[i] * 100) / 100;
  }
  CHECK(sum >= 99.9);
  CHECK(sum <= 100.1);
}

TEST_CASE("breakdown over matched responses") {
  matched_response r;
  r.probe = {0, ipv4{9, 9, 9, 9}, probe_protocol::icmp, icmp_echo_id{1}, 74};
  auto e = from(ipv4{9, 9, 9, 9}, transport::icmp);
  e.icmp_type = 0;
  r.packets.push_back({e, match_rule::ps3});
  e.icmp_type = 3;
  r.packets.push_back({e, match_rule::pa1});
  r.packets.push_back({e, match_rule::pa1});
  const auto b = response_type_breakdown(std::vector{r});
  CHECK(b.counts == kind_counts{1, 0, 0, 2, 0});
  CHECK(b.total() == 3);
}
