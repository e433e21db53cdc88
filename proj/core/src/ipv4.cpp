#include "bbkit/ipv4.hpp"

#include <charconv>

#include "bbkit/errors.hpp"

namespace bbkit {

namespace {

bool parse_octet(std::string_view s, std::uint32_t& out) {
  if (s.empty() || s.size() > 3)
    return false;
  if (s.size() > 1 && s.front() == '0')
    return false;
  unsigned v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || v > 255)
    return false;
  out = v;
  return true;
}

} // namespace

std::optional<ipv4> try_parse_ipv4(std::string_view text) noexcept {
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) {
    auto dot = text.find('.');
    auto part = i < 3 ? text.substr(0, dot) : text;
    if (i < 3 && dot == std::string_view::npos)
      return std::nullopt;
    std::uint32_t octet = 0;
    if (!parse_octet(part, octet))
      return std::nullopt;
    value = (value << 8) | octet;
    if (i < 3)
      text.remove_prefix(dot + 1);
  }
  return ipv4{value};
}

ipv4 parse_ipv4(std::string_view text) {
  if (auto a = try_parse_ipv4(text))
    return *a;
  if (text.find(':') != std::string_view::npos)
    throw data_error("IPv6 address '" + std::string(text)
                     + "' is not supported; bbkit handles IPv4 only");
  throw data_error("malformed IPv4 address '" + std::string(text) + "'");
}

std::string to_string(ipv4 addr) {
  std::string out;
  out.reserve(15);
  for (int shift = 24; shift >= 0; shift -= 8) {
    out += std::to_string((addr.value >> shift) & 0xff);
    if (shift)
      out += '.';
  }
  return out;
}

cidr parse_cidr(std::string_view text) {
  auto slash = text.find('/');
  auto addr = parse_ipv4(text.substr(0, slash));
  unsigned len = 32;
  if (slash != std::string_view::npos) {
    auto rest = text.substr(slash + 1);
    auto [p, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), len);
    if (rest.empty() || ec != std::errc{} || p != rest.data() + rest.size() || len > 32)
      throw data_error("malformed prefix length in '" + std::string(text) + "'");
  }
  cidr out{addr, static_cast<std::uint8_t>(len)};
  if ((addr.value & out.mask()) != addr.value)
    throw data_error("prefix '" + std::string(text) + "' has host bits set");
  return out;
}

std::string to_string(const cidr& prefix) {
  return to_string(prefix.network) + "/" + std::to_string(prefix.length);
}

} // namespace bbkit
