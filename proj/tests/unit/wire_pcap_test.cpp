#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bbkit/errors.hpp"
#include "bbkit/pcap.hpp"
#include "bbkit/records_io.hpp"
#include "bbkit/synth.hpp"
#include "bbkit/wire.hpp"

using namespace bbkit;
namespace fs = std::filesystem;

namespace {

packet_record ttl_expired_quoting(ipv4 quoted) {
  packet_record p;
  p.recv_time = 1'000'000;
  p.src_ip = ipv4{10, 0, 0, 1};
  p.dst_ip = ipv4{192, 0, 2, 1};
  p.transport = transport::icmp;
  p.size = 70;
  p.icmp_type = 11;
  p.icmp_code = 0;
  p.quoted_dst_ip = quoted;
  return p;
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("bbkit_wire_" + name);
}

} // namespace

TEST_CASE("internet checksum") {
  // Example header from RFC 1071 style worked examples.
  const std::uint8_t hdr[] = {0x45, 0x00, 0x00, 0x73, 0x00, 0x00, 0x40, 0x00, 0x40, 0x11,
                              0x00, 0x00, 0xc0, 0xa8, 0x00, 0x01, 0xc0, 0xa8, 0x00, 0xc7};
  CHECK(wire::internet_checksum(hdr) == 0xb861);
}

TEST_CASE("DNS names in label form") {
  CHECK(wire::dns_wire_name("ab.cd") == std::string("\x02" "ab" "\x02" "cd"));
  const auto q = wire::dns_query_message("x.example", 7);
  CHECK(q.size() == 12 + wire::dns_wire_name("x.example").size() + 1 + 4);
  CHECK(wire::ntp_client_message().size() == 48);
  CHECK((wire::ntp_client_message()[0] & 0x07) == 3);
}

TEST_CASE("ICMP time exceeded decodes its quotation") {
  const auto pkt = ttl_expired_quoting(ipv4{5, 6, 7, 8});
  const auto bytes = wire::encode_packet(pkt);
  const auto back = wire::decode_ipv4(bytes, 70, pkt.recv_time);
  REQUIRE(back);
  CHECK(back->transport == transport::icmp);
  CHECK(*back->icmp_type == 11);
  CHECK(*back->icmp_code == 0);
  CHECK(*back->quoted_dst_ip == ipv4{5, 6, 7, 8});
  CHECK(*back == pkt);
}

TEST_CASE("truncated quotation yields absent fields") {
  auto pkt = ttl_expired_quoting(ipv4{5, 6, 7, 8});
  pkt.payload_text = "abc.example";
  const auto bytes = wire::encode_packet(pkt);
  for (std::size_t cut : {20u + 8u, 20u + 8u + 10u, 20u + 8u + 19u}) {
    std::span<const std::uint8_t> head(bytes.data(), cut);
    const auto back = wire::decode_ipv4(head, 70, 0);
    REQUIRE(back);
    CHECK(back->transport == transport::icmp);
    CHECK_FALSE(back->quoted_dst_ip);
    CHECK(back->payload_text.empty());
  }
}

TEST_CASE("GRE is transport OTHER") {
  packet_record p;
  p.recv_time = 1;
  p.src_ip = ipv4{1, 2, 3, 4};
  p.dst_ip = ipv4{192, 0, 2, 1};
  p.transport = transport::other;
  p.size = 64;
  auto bytes = wire::encode_packet(p);
  CHECK(bytes[9] == wire::ip_proto_gre);
  const auto back = wire::decode_ipv4(bytes, 64, 1);
  REQUIRE(back);
  CHECK(back->transport == transport::other);
  CHECK_FALSE(back->src_port);
}

TEST_CASE("decoder never emits ported ICMP or portless TCP/UDP") {
  std::string why;
  std::vector<std::uint8_t> v6(40, 0);
  v6[0] = 0x60;
  CHECK_FALSE(wire::decode_ipv4(v6, 40, 0, &why));
  CHECK(why.find("IPv6") != std::string::npos);

  packet_record tcp;
  tcp.src_ip = ipv4{1, 1, 1, 1};
  tcp.transport = transport::tcp;
  tcp.size = 60;
  tcp.src_port = 80;
  tcp.dst_port = 55000;
  tcp.tcp_flags = tcp_flag::syn | tcp_flag::ack;
  tcp.tcp_ack = 1001;
  const auto bytes = wire::encode_packet(tcp);
  CHECK_FALSE(wire::decode_ipv4(std::span(bytes.data(), 30), 60, 0, &why));
  const auto back = wire::decode_ipv4(bytes, 60, 0);
  REQUIRE(back);
  CHECK(back->src_port);
  CHECK(back->dst_port);
  CHECK_NOTHROW(back->validate());
}

TEST_CASE("probe datagrams carry their tokens") {
  probe_record dns{0, ipv4{10, 1, 1, 1}, probe_protocol::dns, make_qname("q1.z.example"), 70};
  const auto d = wire::encode_probe(dns);
  const auto back = wire::decode_ipv4(d, static_cast<std::uint32_t>(d.size()), 0);
  REQUIRE(back);
  CHECK(back->dst_ip == ipv4{10, 1, 1, 1});
  CHECK(*back->src_port == wire::default_ephemeral_port);
  CHECK(*back->dst_port == 53);
  CHECK(back->payload_text.find(wire::dns_wire_name("q1.z.example")) != std::string::npos);

  probe_record syn{0, ipv4{10, 1, 1, 1}, probe_protocol::tcp443, tcp_seq{99}, 60};
  const auto s = wire::decode_ipv4(wire::encode_probe(syn), 60, 0);
  REQUIRE(s);
  CHECK(*s->dst_port == 443);
  CHECK(*s->tcp_flags == tcp_flag::syn);
}

TEST_CASE("synthetic pcap of 500 frames parses back to the same tuples") {
  generator_spec g;
  g.ip = ipv4{10, 9, 0, 1};
  g.protocol = probe_protocol::dns;
  g.timing = timing_profile::constant(100, 3);
  g.rg_members = {g.ip, ipv4{10, 9, 0, 2}};
  g.mix = {0.4, 0.2, 0.2, 0.1, 0.1};
  generator_spec t;
  t.ip = ipv4{10, 9, 0, 3};
  t.protocol = probe_protocol::tcp80;
  t.timing = timing_profile::constant(100, 3);
  t.rg_members = {t.ip};
  campaign_config cfg;
  cfg.rescans = 0;
  cfg.noise_pps = 20;
  const auto c = generate_campaign({g, t}, cfg);
  auto packets = c.rounds[0].packets;
  REQUIRE(packets.size() >= 500);
  packets.resize(500);

  const auto path = temp_file("500.pcap");
  write_pcap(path, packets);
  const auto parsed = read_pcap(path);
  CHECK(parsed.rejected == 0);
  REQUIRE(parsed.records.size() == 500);
  for (std::size_t i = 0; i < 500; ++i) {
    const auto& a = packets[i];
    const auto& b = parsed.records[i];
    CHECK(a.recv_time == b.recv_time);
    CHECK(a.src_ip == b.src_ip);
    CHECK(a.dst_ip == b.dst_ip);
    CHECK(a.transport == b.transport);
    CHECK(a.size == b.size);
    CHECK(a.src_port == b.src_port);
    CHECK(a.dst_port == b.dst_port);
    CHECK(a.icmp_type == b.icmp_type);
    CHECK(a.quoted_dst_ip == b.quoted_dst_ip);
    CHECK(a.payload_text == b.payload_text);
  }
  // parse_packet_trace recognizes pcap by magic.
  CHECK(parse_packet_trace(path).records.size() == 500);
  fs::remove(path);
}

TEST_CASE("corrupt pcap frames are skipped and counted") {
  std::ostringstream out;
  {
    pcap_writer w(out);
    w.write(ttl_expired_quoting(ipv4{1, 1, 1, 1}));
    w.write(ttl_expired_quoting(ipv4{2, 2, 2, 2}));
  }
  std::string bytes = out.str();
  // Corrupt the first frame's IP version nibble (24 header + 16 record + 14 ethernet).
  bytes[24 + 16 + 14] = 0x15;
  std::istringstream in(bytes);
  const auto r = read_pcap(in);
  CHECK(r.rejected == 1);
  REQUIRE(r.records.size() == 1);
  CHECK(*r.records[0].quoted_dst_ip == ipv4{2, 2, 2, 2});

  // Truncated trailing frame.
  std::istringstream cut(out.str().substr(0, out.str().size() - 5));
  const auto t = read_pcap(cut);
  CHECK(t.records.size() == 1);
  CHECK(t.rejected == 1);

  std::istringstream junk(std::string(24, 'x'));
  CHECK_THROWS_AS(read_pcap(junk), data_error);
}
