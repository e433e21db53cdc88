#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bbkit/ipv4.hpp"

namespace bbkit {

/// Microseconds since the Unix epoch. Every module uses this resolution.
using time_us = std::int64_t;

inline constexpr time_us us_per_second = 1'000'000;

enum class probe_protocol : std::uint8_t { dns, icmp, ntp, tcp25, tcp80, tcp443 };

inline constexpr std::array<probe_protocol, 6> all_protocols{
  probe_protocol::dns,   probe_protocol::icmp,  probe_protocol::ntp,
  probe_protocol::tcp25, probe_protocol::tcp80, probe_protocol::tcp443};

std::string_view to_string(probe_protocol p);
probe_protocol parse_protocol(std::string_view text);
std::optional<probe_protocol> try_parse_protocol(std::string_view text) noexcept;

bool is_tcp(probe_protocol p);
/// Destination port of the probe (0 for ICMP).
std::uint16_t probed_port(probe_protocol p);

// Match tokens. NTP probes carry nothing distinguishing, hence no_token.
struct no_token {
  friend bool operator==(const no_token&, const no_token&) = default;
};
struct dns_qname {
  std::string name; // lowercase
  friend bool operator==(const dns_qname&, const dns_qname&) = default;
};
struct icmp_echo_id {
  std::uint16_t id = 0;
  friend bool operator==(const icmp_echo_id&, const icmp_echo_id&) = default;
};
struct tcp_seq {
  std::uint32_t seq = 0;
  friend bool operator==(const tcp_seq&, const tcp_seq&) = default;
};

using match_token = std::variant<no_token, dns_qname, icmp_echo_id, tcp_seq>;

/// Builds a qname token, lowercasing the input. Empty names are rejected.
dns_qname make_qname(std::string_view name);

/// True when the token alternative is the one the protocol carries.
bool token_matches_protocol(const match_token& token, probe_protocol p);

struct probe_record {
  time_us send_time = 0;
  ipv4 target;
  probe_protocol protocol = probe_protocol::dns;
  match_token token;
  std::uint32_t probe_size = 0;

  /// Throws data_error if the token does not fit the protocol or size is 0.
  void validate() const;

  friend bool operator==(const probe_record&, const probe_record&) = default;
};

enum class transport : std::uint8_t { icmp, tcp, udp, other };

std::string_view to_string(transport t);
transport parse_transport(std::string_view text);

namespace tcp_flag {
inline constexpr std::uint8_t fin = 0x01;
inline constexpr std::uint8_t syn = 0x02;
inline constexpr std::uint8_t rst = 0x04;
inline constexpr std::uint8_t psh = 0x08;
inline constexpr std::uint8_t ack = 0x10;
inline constexpr std::uint8_t urg = 0x20;
} // namespace tcp_flag

namespace icmp_type {
inline constexpr std::uint8_t echo_reply = 0;
inline constexpr std::uint8_t unreachable = 3;
inline constexpr std::uint8_t source_quench = 4;
inline constexpr std::uint8_t redirect = 5;
inline constexpr std::uint8_t echo_request = 8;
inline constexpr std::uint8_t time_exceeded = 11;
inline constexpr std::uint8_t parameter_problem = 12;
} // namespace icmp_type

/// ICMP types whose body quotes the offending datagram.
bool icmp_carries_quotation(std::uint8_t type);
bool icmp_is_echo(std::uint8_t type);

inline constexpr std::size_t max_payload_text = 512;

/// One received packet, normalized. Optional fields are present only for
/// the transports that carry them.
struct packet_record {
  time_us recv_time = 0;
  ipv4 src_ip;
  ipv4 dst_ip;
  bbkit::transport transport = transport::other;
  std::uint32_t size = 0;
  std::optional<std::uint16_t> src_port;
  std::optional<std::uint16_t> dst_port;
  std::optional<std::uint8_t> tcp_flags;
  std::optional<std::uint32_t> tcp_ack;
  std::optional<std::uint8_t> icmp_type;
  std::optional<std::uint8_t> icmp_code;
  std::optional<std::uint16_t> icmp_echo_id;
  std::optional<ipv4> quoted_dst_ip;
  std::string payload_text; // empty means absent; at most max_payload_text bytes

  /// Throws data_error when the field set is inconsistent with transport.
  void validate() const;

  friend bool operator==(const packet_record&, const packet_record&) = default;
};

/// Truncates to max_payload_text.
std::string cap_payload(std::string_view bytes);

enum class match_rule : std::uint8_t { ps1, ps2, ps3, pa1, pa2 };

inline constexpr std::array<match_rule, 5> all_rules{
  match_rule::ps1, match_rule::ps2, match_rule::ps3, match_rule::pa1, match_rule::pa2};

std::string_view to_string(match_rule r);
match_rule parse_rule(std::string_view text);

struct matched_packet {
  packet_record packet;
  match_rule rule = match_rule::ps1;
  friend bool operator==(const matched_packet&, const matched_packet&) = default;
};

/// A probe plus everything attributed to it, ordered by recv_time.
struct matched_response {
  probe_record probe;
  std::vector<matched_packet> packets;

  std::uint64_t byte_count() const;
};

struct responder_group {
  ipv4 generator_ip;
  std::vector<ipv4> member_ips; // sorted, distinct
  std::uint64_t packet_count = 0;
  std::uint64_t byte_count = 0;
};

responder_group make_responder_group(const matched_response& response);

} // namespace bbkit
