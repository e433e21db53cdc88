#include "bbkit/model.hpp"

#include <algorithm>
#include <cctype>

#include "bbkit/errors.hpp"

namespace bbkit {

namespace {

constexpr std::array<std::string_view, 6> protocol_names{
  "DNS", "ICMP", "NTP", "TCP25", "TCP80", "TCP443"};

constexpr std::array<std::string_view, 4> transport_names{"ICMP", "TCP", "UDP", "OTHER"};

constexpr std::array<std::string_view, 5> rule_names{"PS1", "PS2", "PS3", "PA1", "PA2"};

template <class Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& names, std::string_view text) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == text)
      return static_cast<Enum>(i);
  return std::nullopt;
}

} // namespace

std::string_view to_string(probe_protocol p) {
  return protocol_names[static_cast<std::size_t>(p)];
}

std::optional<probe_protocol> try_parse_protocol(std::string_view text) noexcept {
  return lookup<probe_protocol>(protocol_names, text);
}

probe_protocol parse_protocol(std::string_view text) {
  if (auto p = try_parse_protocol(text))
    return *p;
  throw data_error("unknown probe protocol '" + std::string(text) + "'");
}

bool is_tcp(probe_protocol p) {
  return p == probe_protocol::tcp25 || p == probe_protocol::tcp80
         || p == probe_protocol::tcp443;
}

std::uint16_t probed_port(probe_protocol p) {
  switch (p) {
    case probe_protocol::dns:
      return 53;
    case probe_protocol::icmp:
      return 0;
    case probe_protocol::ntp:
      return 123;
    case probe_protocol::tcp25:
      return 25;
    case probe_protocol::tcp80:
      return 80;
    case probe_protocol::tcp443:
      return 443;
  }
  return 0;
}

dns_qname make_qname(std::string_view name) {
  if (name.empty())
    throw data_error("DNS query name must not be empty");
  dns_qname out;
  out.name.resize(name.size());
  std::transform(name.begin(), name.end(), out.name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool token_matches_protocol(const match_token& token, probe_protocol p) {
  switch (p) {
    case probe_protocol::dns:
      return std::holds_alternative<dns_qname>(token);
    case probe_protocol::icmp:
      return std::holds_alternative<icmp_echo_id>(token);
    case probe_protocol::ntp:
      return std::holds_alternative<no_token>(token);
    default:
      return std::holds_alternative<tcp_seq>(token);
  }
}

void probe_record::validate() const {
  if (!token_matches_protocol(token, protocol))
    throw data_error("token kind does not match protocol " + std::string(to_string(protocol)));
  if (probe_size == 0)
    throw data_error("probe_size must be positive");
  if (auto q = std::get_if<dns_qname>(&token)) {
    if (q->name.empty())
      throw data_error("DNS query name must not be empty");
    if (std::any_of(q->name.begin(), q->name.end(),
                    [](unsigned char c) { return std::isupper(c); }))
      throw data_error("DNS query name must be stored lowercase");
  }
}

std::string_view to_string(transport t) {
  return transport_names[static_cast<std::size_t>(t)];
}

transport parse_transport(std::string_view text) {
  if (auto t = lookup<transport>(transport_names, text))
    return *t;
  throw data_error("unknown transport '" + std::string(text) + "'");
}

bool icmp_carries_quotation(std::uint8_t type) {
  return type == icmp_type::unreachable || type == icmp_type::source_quench
         || type == icmp_type::redirect || type == icmp_type::time_exceeded
         || type == icmp_type::parameter_problem;
}

bool icmp_is_echo(std::uint8_t type) {
  return type == icmp_type::echo_reply || type == icmp_type::echo_request;
}

void packet_record::validate() const {
  if (size == 0)
    throw data_error("packet size must be positive");
  if (payload_text.size() > max_payload_text)
    throw data_error("payload excerpt exceeds 512 bytes");
  const bool ported = transport == transport::tcp || transport == transport::udp;
  if (ported != (src_port.has_value() && dst_port.has_value()))
    throw data_error(ported ? "TCP/UDP packet without ports" : "ports set on a portless transport");
  if (ported && (src_port.has_value() != dst_port.has_value()))
    throw data_error("only one port present");
  if (transport != transport::tcp && (tcp_flags || tcp_ack))
    throw data_error("TCP fields on a non-TCP packet");
  if (transport == transport::tcp && !tcp_flags)
    throw data_error("TCP packet without flags");
  if (transport != transport::icmp && (icmp_type || icmp_code || icmp_echo_id || quoted_dst_ip))
    throw data_error("ICMP fields on a non-ICMP packet");
  if (transport == transport::icmp) {
    if (!icmp_type || !icmp_code)
      throw data_error("ICMP packet without type/code");
    if (quoted_dst_ip && !icmp_carries_quotation(*icmp_type))
      throw data_error("quoted_dst_ip on an ICMP type that carries no quotation");
    if (icmp_echo_id && !icmp_is_echo(*icmp_type))
      throw data_error("echo id on a non-echo ICMP message");
  }
}

std::string cap_payload(std::string_view bytes) {
  return std::string(bytes.substr(0, max_payload_text));
}

std::string_view to_string(match_rule r) {
  return rule_names[static_cast<std::size_t>(r)];
}

match_rule parse_rule(std::string_view text) {
  if (auto r = lookup<match_rule>(rule_names, text))
    return *r;
  throw data_error("unknown match rule '" + std::string(text) + "'");
}

std::uint64_t matched_response::byte_count() const {
  std::uint64_t total = 0;
  for (const auto& m : packets)
    total += m.packet.size;
  return total;
}

responder_group make_responder_group(const matched_response& response) {
  responder_group rg;
  rg.generator_ip = response.probe.target;
  rg.packet_count = response.packets.size();
  for (const auto& m : response.packets) {
    rg.byte_count += m.packet.size;
    rg.member_ips.push_back(m.packet.src_ip);
  }
  std::sort(rg.member_ips.begin(), rg.member_ips.end());
  rg.member_ips.erase(std::unique(rg.member_ips.begin(), rg.member_ips.end()),
                      rg.member_ips.end());
  return rg;
}

} // namespace bbkit
