#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bbkit/model.hpp"

namespace bbkit {

/// Records plus bookkeeping about lines or frames that were skipped.
template <class T>
struct parse_result {
  std::vector<T> records;
  std::size_t rejected = 0;
  std::vector<std::string> diagnostics; // first few rejection reasons
};

inline constexpr std::size_t max_diagnostics = 16;

// Probe ledger: send_time_us,target_ip,protocol,token,probe_size
// token: qname=<name> | icmpid=<u16> | seq=<u32> | -
// Blank lines and lines starting with '#' are ignored; extra trailing
// fields are ignored.

std::optional<probe_record> parse_probe_line(std::string_view line, std::string* why = nullptr);
std::string format_probe_line(const probe_record& probe);
std::string format_token(const match_token& token);

/// Throws data_error if the stream cannot be read.
parse_result<probe_record> parse_probe_ledger(std::istream& in);
parse_result<probe_record> read_probe_ledger(const std::filesystem::path& path);
void write_probe_ledger(std::ostream& out, std::span<const probe_record> probes);
void write_probe_ledger(const std::filesystem::path& path, std::span<const probe_record> probes);

// Native packet records, one per line:
// recv_time_us,src_ip,dst_ip,transport,size,src_port,dst_port,tcp_flags,
// tcp_ack,icmp_type,icmp_code,icmp_echo_id,quoted_dst_ip,payload_b64
// Absent fields are '-'. tcp_flags is the decimal flag byte.

std::optional<packet_record> parse_packet_line(std::string_view line, std::string* why = nullptr);
std::string format_packet_line(const packet_record& packet);

parse_result<packet_record> parse_packet_records(std::istream& in);
void write_packet_records(std::ostream& out, std::span<const packet_record> packets);
void write_packet_records(const std::filesystem::path& path, std::span<const packet_record> packets);

/// Reads either format; a pcap file is recognized by its magic number.
parse_result<packet_record> parse_packet_trace(const std::filesystem::path& path);

/// Pull-style reader for large native traces.
class packet_line_reader {
public:
  explicit packet_line_reader(std::istream& in) : in_(in) {}

  std::optional<packet_record> next();
  std::size_t rejected() const { return rejected_; }
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

private:
  std::istream& in_;
  std::string line_;
  std::size_t line_no_ = 0;
  std::size_t rejected_ = 0;
  std::vector<std::string> diagnostics_;
};

std::string base64_encode(std::string_view bytes);
/// Throws data_error on invalid input.
std::string base64_decode(std::string_view text);

/// Splits on a single-character delimiter, keeping empty fields.
std::vector<std::string_view> split_fields(std::string_view line, char delim);

} // namespace bbkit
