#include "bbkit/wire.hpp"

#include <algorithm>

#include "bbkit/errors.hpp"

namespace bbkit::wire {

namespace {

constexpr std::size_t ip_header_len = 20;
constexpr std::size_t tcp_header_len = 20;
constexpr std::size_t udp_header_len = 8;
constexpr std::size_t icmp_header_len = 8;

void put16(bytes& b, std::size_t at, std::uint16_t v) {
  b[at] = static_cast<std::uint8_t>(v >> 8);
  b[at + 1] = static_cast<std::uint8_t>(v);
}

void put32(bytes& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    b[at + i] = static_cast<std::uint8_t>(v >> (24 - 8 * i));
}

std::uint16_t get16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

std::uint32_t get32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16)
         | (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void append(bytes& b, std::string_view s) {
  b.insert(b.end(), s.begin(), s.end());
}

void append(bytes& b, std::span<const std::uint8_t> s) {
  const auto at = b.size();
  b.resize(at + s.size());
  std::copy(s.begin(), s.end(), b.begin() + static_cast<std::ptrdiff_t>(at));
}

bytes ip_header(ipv4 src, ipv4 dst, std::uint8_t proto, std::size_t payload_len,
                std::uint8_t ttl = 64) {
  bytes h(ip_header_len, 0);
  h[0] = 0x45;
  put16(h, 2, static_cast<std::uint16_t>(ip_header_len + payload_len));
  h[8] = ttl;
  h[9] = proto;
  put32(h, 12, src.value);
  put32(h, 16, dst.value);
  put16(h, 10, internet_checksum(h));
  return h;
}

bytes datagram(ipv4 src, ipv4 dst, std::uint8_t proto, const bytes& l4) {
  auto out = ip_header(src, dst, proto, l4.size());
  append(out, l4);
  return out;
}

bytes tcp_segment(std::uint16_t sport, std::uint16_t dport, std::uint32_t seq, std::uint32_t ack,
                  std::uint8_t flags, std::string_view payload) {
  bytes t(tcp_header_len, 0);
  put16(t, 0, sport);
  put16(t, 2, dport);
  put32(t, 4, seq);
  put32(t, 8, ack);
  t[12] = 5 << 4;
  t[13] = flags;
  put16(t, 14, 65535);
  append(t, payload);
  return t;
}

bytes udp_datagram(std::uint16_t sport, std::uint16_t dport, std::span<const std::uint8_t> payload) {
  bytes u(udp_header_len, 0);
  put16(u, 0, sport);
  put16(u, 2, dport);
  put16(u, 4, static_cast<std::uint16_t>(udp_header_len + payload.size()));
  append(u, payload);
  return u;
}

bytes icmp_message(std::uint8_t type, std::uint8_t code, std::uint32_t rest,
                   std::span<const std::uint8_t> body) {
  bytes m(icmp_header_len, 0);
  m[0] = type;
  m[1] = code;
  put32(m, 4, rest);
  append(m, body);
  put16(m, 2, internet_checksum(m));
  return m;
}

void fail(std::string* why, const char* reason) {
  if (why)
    *why = reason;
}

std::string as_text(std::span<const std::uint8_t> b) {
  return cap_payload(std::string_view(reinterpret_cast<const char*>(b.data()), b.size()));
}

} // namespace

std::uint16_t internet_checksum(std::span<const std::uint8_t> data) {
  std::uint32_t sum = 0;
  std::size_t i = 0;
  for (; i + 1 < data.size(); i += 2)
    sum += static_cast<std::uint32_t>((data[i] << 8) | data[i + 1]);
  if (i < data.size())
    sum += static_cast<std::uint32_t>(data[i] << 8);
  while (sum >> 16)
    sum = (sum & 0xffff) + (sum >> 16);
  return static_cast<std::uint16_t>(~sum);
}

std::string dns_wire_name(std::string_view dotted) {
  std::string out;
  out.reserve(dotted.size() + 1);
  while (!dotted.empty()) {
    auto dot = dotted.find('.');
    auto label = dotted.substr(0, dot);
    if (label.size() > 63)
      throw data_error("DNS label longer than 63 bytes");
    out += static_cast<char>(label.size());
    out += label;
    if (dot == std::string_view::npos)
      break;
    dotted.remove_prefix(dot + 1);
  }
  return out;
}

bytes dns_query_message(std::string_view qname, std::uint16_t id) {
  bytes m(12, 0);
  put16(m, 0, id);
  m[2] = 0x01; // RD
  put16(m, 4, 1);
  append(m, dns_wire_name(qname));
  m.push_back(0);
  m.insert(m.end(), {0, 1, 0, 1}); // A, IN
  return m;
}

bytes dns_response_message(std::string_view qname, std::uint16_t id) {
  auto m = dns_query_message(qname, id);
  m[2] = 0x81; // QR, RD
  m[3] = 0x80; // RA
  return m;
}

bytes ntp_client_message() {
  bytes m(48, 0);
  m[0] = 0x23; // LI 0, VN 4, mode 3
  return m;
}

bytes encode_probe(const probe_record& probe, ipv4 scanner, std::uint16_t src_port) {
  const auto dport = probed_port(probe.protocol);
  switch (probe.protocol) {
    case probe_protocol::dns: {
      const auto& q = std::get<dns_qname>(probe.token);
      return datagram(scanner, probe.target, ip_proto_udp,
                      udp_datagram(src_port, dport, dns_query_message(q.name, 0x4242)));
    }
    case probe_protocol::icmp: {
      const auto id = std::get<icmp_echo_id>(probe.token).id;
      bytes body(32, 0);
      return datagram(scanner, probe.target, ip_proto_icmp,
                      icmp_message(icmp_type::echo_request, 0, std::uint32_t{id} << 16, body));
    }
    case probe_protocol::ntp:
      return datagram(scanner, probe.target, ip_proto_udp,
                      udp_datagram(src_port, dport, ntp_client_message()));
    default: {
      const auto seq = std::get<tcp_seq>(probe.token).seq;
      return datagram(scanner, probe.target, ip_proto_tcp,
                      tcp_segment(src_port, dport, seq, 0, tcp_flag::syn, {}));
    }
  }
}

bytes encode_packet(const packet_record& p) {
  const std::span<const std::uint8_t> payload(
    reinterpret_cast<const std::uint8_t*>(p.payload_text.data()), p.payload_text.size());
  switch (p.transport) {
    case transport::tcp:
      return datagram(p.src_ip, p.dst_ip, ip_proto_tcp,
                      tcp_segment(p.src_port.value_or(0), p.dst_port.value_or(0), 0,
                                  p.tcp_ack.value_or(0), p.tcp_flags.value_or(0),
                                  p.payload_text));
    case transport::udp:
      return datagram(p.src_ip, p.dst_ip, ip_proto_udp,
                      udp_datagram(p.src_port.value_or(0), p.dst_port.value_or(0), payload));
    case transport::icmp: {
      const auto type = p.icmp_type.value_or(0);
      std::uint32_t rest = 0;
      if (p.icmp_echo_id)
        rest = std::uint32_t{*p.icmp_echo_id} << 16;
      bytes body;
      if (p.quoted_dst_ip) {
        // The quoted datagram was sent by us (the packet's destination).
        body = ip_header(p.dst_ip, *p.quoted_dst_ip, ip_proto_udp, payload.size(), 1);
      }
      append(body, payload);
      return datagram(p.src_ip, p.dst_ip, ip_proto_icmp,
                      icmp_message(type, p.icmp_code.value_or(0), rest, body));
    }
    case transport::other:
      break;
  }
  bytes l4(payload.begin(), payload.end());
  return datagram(p.src_ip, p.dst_ip, ip_proto_gre, l4);
}

std::optional<packet_record> decode_ipv4(std::span<const std::uint8_t> d, std::uint32_t wire_size,
                                         time_us recv_time, std::string* why) {
  if (d.empty()) {
    fail(why, "empty datagram");
    return std::nullopt;
  }
  const int version = d[0] >> 4;
  if (version == 6) {
    fail(why, "IPv6 datagram; bbkit handles IPv4 only");
    return std::nullopt;
  }
  if (version != 4) {
    fail(why, "not an IPv4 datagram");
    return std::nullopt;
  }
  const std::size_t ihl = std::size_t{d[0] & 0x0fu} * 4;
  if (ihl < ip_header_len || d.size() < ihl) {
    fail(why, "truncated IPv4 header");
    return std::nullopt;
  }
  if (wire_size == 0) {
    fail(why, "zero-length frame");
    return std::nullopt;
  }
  const std::size_t total = get16(d, 2);
  const std::size_t avail = std::min(d.size(), std::max(total, ihl));
  const auto l4 = d.subspan(ihl, avail - ihl);
  const bool later_fragment = (get16(d, 6) & 0x1fff) != 0;

  packet_record p;
  p.recv_time = recv_time;
  p.size = wire_size;
  p.src_ip = ipv4{get32(d, 12)};
  p.dst_ip = ipv4{get32(d, 16)};
  const std::uint8_t proto = d[9];

  if (later_fragment) {
    p.transport = transport::other;
    return p;
  }

  switch (proto) {
    case ip_proto_tcp: {
      if (l4.size() < 14) {
        fail(why, "truncated TCP header");
        return std::nullopt;
      }
      p.transport = transport::tcp;
      p.src_port = get16(l4, 0);
      p.dst_port = get16(l4, 2);
      p.tcp_ack = get32(l4, 8);
      p.tcp_flags = l4[13];
      const std::size_t off = static_cast<std::size_t>(l4[12] >> 4) * 4;
      if (off >= tcp_header_len && l4.size() > off)
        p.payload_text = as_text(l4.subspan(off));
      return p;
    }
    case ip_proto_udp: {
      if (l4.size() < udp_header_len) {
        fail(why, "truncated UDP header");
        return std::nullopt;
      }
      p.transport = transport::udp;
      p.src_port = get16(l4, 0);
      p.dst_port = get16(l4, 2);
      p.payload_text = as_text(l4.subspan(udp_header_len));
      return p;
    }
    case ip_proto_icmp: {
      if (l4.size() < 4) {
        fail(why, "truncated ICMP header");
        return std::nullopt;
      }
      p.transport = transport::icmp;
      p.icmp_type = l4[0];
      p.icmp_code = l4[1];
      if (icmp_is_echo(l4[0])) {
        if (l4.size() >= 6)
          p.icmp_echo_id = get16(l4, 4);
        if (l4.size() > icmp_header_len)
          p.payload_text = as_text(l4.subspan(icmp_header_len));
      } else if (icmp_carries_quotation(l4[0]) && l4.size() >= icmp_header_len + ip_header_len) {
        const auto quote = l4.subspan(icmp_header_len);
        const std::size_t inner_ihl = std::size_t{quote[0] & 0x0fu} * 4;
        if ((quote[0] >> 4) == 4 && inner_ihl >= ip_header_len && quote.size() >= inner_ihl) {
          p.quoted_dst_ip = ipv4{get32(quote, 16)};
          p.payload_text = as_text(quote.subspan(inner_ihl));
        }
      }
      return p;
    }
    default:
      p.transport = transport::other;
      return p;
  }
}

} // namespace bbkit::wire
