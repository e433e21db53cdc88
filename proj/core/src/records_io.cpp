#include "bbkit/records_io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "bbkit/errors.hpp"
#include "bbkit/pcap.hpp"

namespace bbkit {

namespace {

template <class Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty())
    return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

template <class Int>
Int require_int(std::string_view s, const char* what) {
  Int v{};
  if (!parse_int(s, v))
    throw data_error(std::string("bad ") + what + " '" + std::string(s) + "'");
  return v;
}

template <class Int>
std::optional<Int> optional_int(std::string_view s, const char* what) {
  if (s == "-")
    return std::nullopt;
  return require_int<Int>(s, what);
}

bool skippable(std::string_view line) {
  auto first = line.find_first_not_of(" \t\r");
  return first == std::string_view::npos || line[first] == '#';
}

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r')
    line.remove_suffix(1);
  return line;
}

match_token parse_token(std::string_view text, probe_protocol protocol) {
  match_token token;
  if (text == "-")
    token = no_token{};
  else if (text.starts_with("qname="))
    token = make_qname(text.substr(6));
  else if (text.starts_with("icmpid="))
    token = icmp_echo_id{require_int<std::uint16_t>(text.substr(7), "icmp id")};
  else if (text.starts_with("seq="))
    token = tcp_seq{require_int<std::uint32_t>(text.substr(4), "tcp seq")};
  else
    throw data_error("unrecognized token '" + std::string(text) + "'");
  if (!token_matches_protocol(token, protocol))
    throw data_error("token '" + std::string(text) + "' does not fit protocol "
                     + std::string(to_string(protocol)));
  return token;
}

template <class T, class Fn>
parse_result<T> parse_lines(std::istream& in, Fn&& parse_one) {
  parse_result<T> result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skippable(line))
      continue;
    std::string why;
    if (auto rec = parse_one(line, &why)) {
      result.records.push_back(std::move(*rec));
    } else {
      ++result.rejected;
      if (result.diagnostics.size() < max_diagnostics)
        result.diagnostics.push_back("line " + std::to_string(line_no) + ": " + why);
    }
  }
  if (in.bad())
    throw data_error("failed reading input stream");
  return result;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in)
    throw data_error("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw data_error("cannot open '" + path.string() + "' for writing");
  return out;
}

} // namespace

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string format_token(const match_token& token) {
  struct visitor {
    std::string operator()(const no_token&) const { return "-"; }
    std::string operator()(const dns_qname& q) const { return "qname=" + q.name; }
    std::string operator()(const icmp_echo_id& i) const { return "icmpid=" + std::to_string(i.id); }
    std::string operator()(const tcp_seq& s) const { return "seq=" + std::to_string(s.seq); }
  };
  return std::visit(visitor{}, token);
}

std::optional<probe_record> parse_probe_line(std::string_view line, std::string* why) {
  line = trim_cr(line);
  try {
    auto f = split_fields(line, ',');
    if (f.size() < 5)
      throw data_error("expected 5 fields, got " + std::to_string(f.size()));
    probe_record p;
    p.send_time = require_int<time_us>(f[0], "send_time");
    p.target = parse_ipv4(f[1]);
    p.protocol = parse_protocol(f[2]);
    p.token = parse_token(f[3], p.protocol);
    p.probe_size = require_int<std::uint32_t>(f[4], "probe_size");
    p.validate();
    return p;
  } catch (const error& e) {
    if (why)
      *why = e.what();
    return std::nullopt;
  }
}

std::string format_probe_line(const probe_record& p) {
  std::string out = std::to_string(p.send_time);
  out += ',';
  out += to_string(p.target);
  out += ',';
  out += to_string(p.protocol);
  out += ',';
  out += format_token(p.token);
  out += ',';
  out += std::to_string(p.probe_size);
  return out;
}

parse_result<probe_record> parse_probe_ledger(std::istream& in) {
  return parse_lines<probe_record>(in, [](std::string_view l, std::string* why) {
    return parse_probe_line(l, why);
  });
}

parse_result<probe_record> read_probe_ledger(const std::filesystem::path& path) {
  auto in = open_in(path);
  return parse_probe_ledger(in);
}

void write_probe_ledger(std::ostream& out, std::span<const probe_record> probes) {
  for (const auto& p : probes)
    out << format_probe_line(p) << '\n';
}

void write_probe_ledger(const std::filesystem::path& path, std::span<const probe_record> probes) {
  auto out = open_out(path);
  write_probe_ledger(out, probes);
  if (!out)
    throw data_error("failed writing '" + path.string() + "'");
}

std::optional<packet_record> parse_packet_line(std::string_view line, std::string* why) {
  line = trim_cr(line);
  try {
    auto f = split_fields(line, ',');
    if (f.size() < 14)
      throw data_error("expected 14 fields, got " + std::to_string(f.size()));
    packet_record p;
    p.recv_time = require_int<time_us>(f[0], "recv_time");
    p.src_ip = parse_ipv4(f[1]);
    p.dst_ip = parse_ipv4(f[2]);
    p.transport = parse_transport(f[3]);
    p.size = require_int<std::uint32_t>(f[4], "size");
    p.src_port = optional_int<std::uint16_t>(f[5], "src_port");
    p.dst_port = optional_int<std::uint16_t>(f[6], "dst_port");
    p.tcp_flags = optional_int<std::uint8_t>(f[7], "tcp_flags");
    p.tcp_ack = optional_int<std::uint32_t>(f[8], "tcp_ack");
    p.icmp_type = optional_int<std::uint8_t>(f[9], "icmp_type");
    p.icmp_code = optional_int<std::uint8_t>(f[10], "icmp_code");
    p.icmp_echo_id = optional_int<std::uint16_t>(f[11], "icmp_echo_id");
    if (f[12] != "-")
      p.quoted_dst_ip = parse_ipv4(f[12]);
    if (f[13] != "-")
      p.payload_text = cap_payload(base64_decode(f[13]));
    p.validate();
    return p;
  } catch (const error& e) {
    if (why)
      *why = e.what();
    return std::nullopt;
  }
}

std::string format_packet_line(const packet_record& p) {
  auto opt = [](const auto& v) -> std::string {
    return v ? std::to_string(static_cast<std::uint64_t>(*v)) : std::string("-");
  };
  std::string out = std::to_string(p.recv_time);
  auto add = [&out](std::string_view s) {
    out += ',';
    out += s;
  };
  add(to_string(p.src_ip));
  add(to_string(p.dst_ip));
  add(to_string(p.transport));
  add(std::to_string(p.size));
  add(opt(p.src_port));
  add(opt(p.dst_port));
  add(opt(p.tcp_flags));
  add(opt(p.tcp_ack));
  add(opt(p.icmp_type));
  add(opt(p.icmp_code));
  add(opt(p.icmp_echo_id));
  add(p.quoted_dst_ip ? to_string(*p.quoted_dst_ip) : std::string("-"));
  add(p.payload_text.empty() ? std::string("-") : base64_encode(p.payload_text));
  return out;
}

parse_result<packet_record> parse_packet_records(std::istream& in) {
  return parse_lines<packet_record>(in, [](std::string_view l, std::string* why) {
    return parse_packet_line(l, why);
  });
}

void write_packet_records(std::ostream& out, std::span<const packet_record> packets) {
  for (const auto& p : packets)
    out << format_packet_line(p) << '\n';
}

void write_packet_records(const std::filesystem::path& path, std::span<const packet_record> packets) {
  auto out = open_out(path);
  write_packet_records(out, packets);
  if (!out)
    throw data_error("failed writing '" + path.string() + "'");
}

parse_result<packet_record> parse_packet_trace(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  if (looks_like_pcap(in))
    return read_pcap(in);
  return parse_packet_records(in);
}

std::optional<packet_record> packet_line_reader::next() {
  while (std::getline(in_, line_)) {
    ++line_no_;
    if (skippable(line_))
      continue;
    std::string why;
    if (auto rec = parse_packet_line(line_, &why))
      return rec;
    ++rejected_;
    if (diagnostics_.size() < max_diagnostics)
      diagnostics_.push_back("line " + std::to_string(line_no_) + ": " + why);
  }
  if (in_.bad())
    throw data_error("failed reading packet stream");
  return std::nullopt;
}

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  auto n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                           reinterpret_cast<const unsigned char*>(bytes.data()),
                           static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0)
    throw data_error("base64 length is not a multiple of 4");
  std::string out(3 * (text.size() / 4), '\0');
  auto n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                           reinterpret_cast<const unsigned char*>(text.data()),
                           static_cast<int>(text.size()));
  if (n < 0)
    throw data_error("invalid base64 payload");
  // EVP_DecodeBlock keeps the zero bytes that stand in for '=' padding.
  std::size_t pad = 0;
  for (auto it = text.rbegin(); it != text.rend() && *it == '=' && pad < 2; ++it)
    ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

} // namespace bbkit
