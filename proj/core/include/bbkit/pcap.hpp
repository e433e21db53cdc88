#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>

#include "bbkit/model.hpp"
#include "bbkit/records_io.hpp"

namespace bbkit {

// Classic libpcap files. Link types Ethernet (1), raw IP (101), IPv4 (228)
// and Linux cooked capture (113) are understood.

inline constexpr std::uint32_t pcap_magic_us = 0xa1b2c3d4;
inline constexpr std::uint32_t pcap_magic_ns = 0xa1b23c4d;
inline constexpr std::uint32_t linktype_ethernet = 1;
inline constexpr std::uint32_t linktype_raw = 101;
inline constexpr std::uint32_t linktype_linux_sll = 113;
inline constexpr std::uint32_t linktype_ipv4 = 228;

/// Peeks at the stream without consuming it.
bool looks_like_pcap(std::istream& in);

/// Frames that cannot be decoded are skipped and counted in `rejected`.
/// A bad global header throws data_error.
parse_result<packet_record> read_pcap(std::istream& in);
parse_result<packet_record> read_pcap(const std::filesystem::path& path);

/// Writes Ethernet-framed records. orig_len is the IP-layer wire size plus the
/// Ethernet header, raised to the encoded frame length when the caller's size
/// is smaller than what was encoded.
class pcap_writer {
public:
  explicit pcap_writer(std::ostream& out, std::uint32_t snaplen = 65535);

  void write_datagram(time_us ts, std::span<const std::uint8_t> ip_datagram,
                      std::uint32_t wire_size);
  void write(const packet_record& packet);

  std::size_t frames() const { return frames_; }

private:
  std::ostream& out_;
  std::uint32_t snaplen_;
  std::size_t frames_ = 0;
};

void write_pcap(const std::filesystem::path& path, std::span<const packet_record> packets);

} // namespace bbkit
