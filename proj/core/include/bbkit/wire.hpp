#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bbkit/model.hpp"

// Byte-level IPv4 datagram encoding and decoding. Used by the pcap adapter,
// the probe emitter and the synthetic pcap writer.
namespace bbkit::wire {

using bytes = std::vector<std::uint8_t>;

/// Documentation address (TEST-NET-1) used as the scanner when none is given.
inline constexpr ipv4 default_scanner_ip{192, 0, 2, 1};
inline constexpr std::uint16_t default_ephemeral_port = 55000;

inline constexpr std::uint8_t ip_proto_icmp = 1;
inline constexpr std::uint8_t ip_proto_tcp = 6;
inline constexpr std::uint8_t ip_proto_udp = 17;
inline constexpr std::uint8_t ip_proto_gre = 47;

std::uint16_t internet_checksum(std::span<const std::uint8_t> data);

/// Length-prefixed label form of a dotted name, without the root byte.
std::string dns_wire_name(std::string_view dotted);

/// DNS message with a single A question for qname.
bytes dns_query_message(std::string_view qname, std::uint16_t id);
/// Minimal NOERROR answer echoing the question.
bytes dns_response_message(std::string_view qname, std::uint16_t id);
/// 48-byte NTP client request (version 4, mode 3).
bytes ntp_client_message();

/// On-the-wire probe datagram as the scanner would send it.
bytes encode_probe(const probe_record& probe, ipv4 scanner = default_scanner_ip,
                   std::uint16_t src_port = default_ephemeral_port);

/// IPv4 datagram reproducing the fields of a packet record. ICMP quotations
/// are rebuilt from quoted_dst_ip plus payload_text.
bytes encode_packet(const packet_record& packet);

/// Decodes an IPv4 datagram (no link layer). wire_size becomes
/// packet_record::size. Returns nullopt with a reason when the datagram is
/// not IPv4 or too short to yield a consistent record.
std::optional<packet_record> decode_ipv4(std::span<const std::uint8_t> datagram,
                                         std::uint32_t wire_size, time_us recv_time,
                                         std::string* why = nullptr);

} // namespace bbkit::wire
