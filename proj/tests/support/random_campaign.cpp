#include "random_campaign.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <string>

#include "bbkit/probe_engine.hpp"
#include "bbkit/random.hpp"
#include "bbkit/wire.hpp"

namespace bbkit::testing {

namespace {

constexpr ipv4 scanner{192, 0, 2, 1};
constexpr std::uint16_t ephemeral = 55000;

std::string random_label(seeded_rng& rng, std::size_t len) {
  static constexpr char alphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789";
  std::string s(len, 'a');
  for (auto& c : s)
    c = alphabet[rng.below(36)];
  return s;
}

std::string shuffle_case(seeded_rng& rng, std::string s) {
  for (auto& c : s)
    if (rng.chance(0.5))
      c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

packet_record base_packet(time_us t, ipv4 src, transport tr, seeded_rng& rng) {
  packet_record p;
  p.recv_time = t;
  p.src_ip = src;
  p.dst_ip = scanner;
  p.transport = tr;
  p.size = static_cast<std::uint32_t>(40 + rng.below(1460));
  return p;
}

class builder {
public:
  builder(std::uint64_t seed, const campaign_limits& limits) : rng_(seed), limits_(limits) {}

  random_campaign build() {
    random_campaign c;
    c.config.expiry_window = std::array<time_us, 3>{600, 30, 120}[rng_.below(3)] * us_per_second;
    c.config.ack_mode = static_cast<ack_mode>(rng_.below(3));
    window_ = c.config.expiry_window;

    const double lo = std::log(20.0);
    const double hi = std::log(static_cast<double>(std::max<std::size_t>(limits_.max_probes, 21)));
    const auto n_probes = static_cast<std::size_t>(std::exp(lo + rng_.unit() * (hi - lo)));
    const auto n_packets = std::min(limits_.max_packets, n_probes * (1 + rng_.below(10)));

    make_targets(n_probes);
    make_probes(c.probes, n_probes);
    for (std::size_t k = 0; k < n_packets; ++k)
      c.packets.push_back(make_packet(c.probes));
    std::stable_sort(c.packets.begin(), c.packets.end(),
                     [](const auto& a, const auto& b) { return a.recv_time < b.recv_time; });
    return c;
  }

private:
  void make_targets(std::size_t n_probes) {
    const auto pool = std::max<std::size_t>(4, n_probes / 4);
    for (std::size_t i = 0; i < pool; ++i)
      targets_.push_back(ipv4{static_cast<std::uint32_t>(0x0a000000u + rng_.below(1u << 16))});
  }

  match_token make_token(probe_protocol proto) {
    switch (proto) {
      case probe_protocol::dns: {
        std::string name;
        if (!qnames_.empty() && rng_.chance(0.2))
          name = random_label(rng_, 1) + qnames_[rng_.below(qnames_.size())]; // suffix collision
        else if (!qnames_.empty() && rng_.chance(0.05))
          name = qnames_[rng_.below(qnames_.size())]; // exact duplicate
        else
          name = random_label(rng_, 4 + rng_.below(8)) + ".z.example";
        qnames_.push_back(name);
        return make_qname(name);
      }
      case probe_protocol::icmp:
        return icmp_echo_id{static_cast<std::uint16_t>(rng_.below(48))};
      case probe_protocol::ntp:
        return no_token{};
      default: {
        static constexpr std::uint32_t bases[] = {0u, 1000u, 0xfffffffeu, 77777u, 123456789u};
        const auto base = rng_.chance(0.5) ? bases[rng_.below(5)]
                                           : static_cast<std::uint32_t>(rng_.below(64) * 16);
        return tcp_seq{static_cast<std::uint32_t>(base + rng_.below(3))};
      }
    }
  }

  void make_probes(std::vector<probe_record>& out, std::size_t n) {
    const double span_s = 100.0 + rng_.unit() * 2900.0;
    const auto mean_gap = static_cast<std::uint64_t>(span_s * 1e6 / static_cast<double>(n)) + 1;
    time_us t = 1'600'000'000 * us_per_second;
    for (std::size_t i = 0; i < n; ++i) {
      if (!rng_.chance(0.15))
        t += static_cast<time_us>(rng_.below(2 * mean_gap));
      probe_record p;
      p.send_time = t;
      p.target = targets_[rng_.below(targets_.size())];
      p.protocol = all_protocols[rng_.below(all_protocols.size())];
      p.token = make_token(p.protocol);
      p.probe_size = default_probe_size(p.protocol);
      out.push_back(std::move(p));
    }
  }

  time_us reply_delay() {
    const auto r = rng_.unit();
    if (r < 0.65)
      return static_cast<time_us>(rng_.below(5 * us_per_second));
    if (r < 0.9)
      return static_cast<time_us>(rng_.below(static_cast<std::uint64_t>(window_ * 3 / 2)));
    return -static_cast<time_us>(rng_.below(us_per_second / 2));
  }

  ipv4 stranger() { return ipv4{static_cast<std::uint32_t>(0xcb007100u + rng_.below(256))}; }

  std::string qname_text(const std::string& name) {
    std::string body = rng_.chance(0.3) ? wire::dns_wire_name(name) : name;
    return random_label(rng_, rng_.below(6)) + shuffle_case(rng_, body) + random_label(rng_, rng_.below(6));
  }

  packet_record make_packet(const std::vector<probe_record>& probes) {
    const auto& probe = probes[rng_.below(probes.size())];
    const time_us t = probe.send_time + reply_delay();
    const bool from_target = rng_.chance(0.7);
    const ipv4 src = from_target ? probe.target
                     : rng_.chance(0.5) ? targets_[rng_.below(targets_.size())] : stranger();
    const auto port = rng_.chance(0.7) ? ephemeral : static_cast<std::uint16_t>(1024 + rng_.below(60000));

    switch (rng_.below(7)) {
      case 0: { // UDP reply, possibly carrying a query name
        auto p = base_packet(t, src, transport::udp, rng_);
        p.src_port = static_cast<std::uint16_t>(probe.protocol == probe_protocol::ntp ? 123 : 53);
        p.dst_port = port;
        if (const auto* q = std::get_if<dns_qname>(&probe.token); q && rng_.chance(0.8))
          p.payload_text = qname_text(q->name);
        else if (rng_.chance(0.2))
          p.payload_text = random_label(rng_, 10);
        return p;
      }
      case 1: { // TCP
        auto p = base_packet(t, src, transport::tcp, rng_);
        p.src_port = probed_port(probe.protocol) ? probed_port(probe.protocol) : 80;
        p.dst_port = port;
        const auto pick = rng_.below(5);
        p.tcp_flags = pick == 4 ? tcp_flag::rst | tcp_flag::ack : tcp_flag::syn | tcp_flag::ack;
        std::uint32_t seq = static_cast<std::uint32_t>(rng_.below(1024));
        if (const auto* s = std::get_if<tcp_seq>(&probe.token))
          seq = s->seq;
        p.tcp_ack = pick == 0 ? seq : pick == 3 ? static_cast<std::uint32_t>(rng_.next()) : seq + 1;
        if (rng_.chance(0.1))
          p.payload_text = qname_text(qnames_.empty() ? "x.z.example" : qnames_[rng_.below(qnames_.size())]);
        return p;
      }
      case 2: { // echo reply
        auto p = base_packet(t, src, transport::icmp, rng_);
        p.icmp_type = 0;
        p.icmp_code = 0;
        if (const auto* e = std::get_if<icmp_echo_id>(&probe.token); e && rng_.chance(0.8))
          p.icmp_echo_id = e->id;
        else
          p.icmp_echo_id = static_cast<std::uint16_t>(rng_.below(64));
        return p;
      }
      case 3:
      case 4: { // ICMP error with quotation
        auto p = base_packet(t, rng_.chance(0.5) ? stranger() : src, transport::icmp, rng_);
        static constexpr std::uint8_t types[] = {3, 11, 5, 12};
        p.icmp_type = types[rng_.below(4)];
        p.icmp_code = static_cast<std::uint8_t>(rng_.below(2));
        p.quoted_dst_ip = rng_.chance(0.8) ? probe.target : targets_[rng_.below(targets_.size())];
        if (const auto* q = std::get_if<dns_qname>(&probe.token); q && rng_.chance(0.5))
          p.payload_text = qname_text(q->name);
        return p;
      }
      case 5: { // non-IP-transport traffic from the target
        auto p = base_packet(t, src, transport::other, rng_);
        if (rng_.chance(0.3))
          p.payload_text = "junk";
        return p;
      }
      default: { // TCP without SYN, or an unrelated UDP packet
        auto p = base_packet(t, rng_.chance(0.5) ? stranger() : src,
                             rng_.chance(0.5) ? transport::tcp : transport::udp, rng_);
        p.src_port = static_cast<std::uint16_t>(rng_.below(65536));
        p.dst_port = port;
        if (p.transport == transport::tcp) {
          p.tcp_flags = tcp_flag::ack;
          p.tcp_ack = static_cast<std::uint32_t>(rng_.below(1024));
        }
        return p;
      }
    }
  }

  seeded_rng rng_;
  campaign_limits limits_;
  time_us window_ = 0;
  std::vector<ipv4> targets_;
  std::vector<std::string> qnames_;
};

} // namespace

random_campaign make_random_campaign(std::uint64_t seed, const campaign_limits& limits) {
  return builder(seed, limits).build();
}

} // namespace bbkit::testing
