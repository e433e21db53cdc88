#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace bbkit {

/// IPv4 address in host byte order.
struct ipv4 {
  std::uint32_t value = 0;

  constexpr ipv4() = default;
  constexpr explicit ipv4(std::uint32_t v) : value(v) {}
  constexpr ipv4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d)
    : value((std::uint32_t{a} << 24) | (std::uint32_t{b} << 16)
            | (std::uint32_t{c} << 8) | std::uint32_t{d}) {}

  friend constexpr auto operator<=>(ipv4, ipv4) = default;
};

/// Parses dotted-quad notation. IPv6 input is rejected with a dedicated
/// message; anything else malformed throws data_error.
ipv4 parse_ipv4(std::string_view text);
std::optional<ipv4> try_parse_ipv4(std::string_view text) noexcept;
std::string to_string(ipv4 addr);

/// An IPv4 prefix. The network address is always masked.
struct cidr {
  ipv4 network;
  std::uint8_t length = 0;

  static constexpr std::uint32_t mask_for(std::uint8_t len) {
    return len == 0 ? 0u : ~std::uint32_t{0} << (32 - len);
  }
  constexpr std::uint32_t mask() const { return mask_for(length); }
  constexpr bool contains(ipv4 addr) const {
    return (addr.value & mask()) == network.value;
  }
  constexpr bool contains(const cidr& other) const {
    return other.length >= length && contains(other.network);
  }
  constexpr std::uint64_t size() const { return std::uint64_t{1} << (32 - length); }

  friend constexpr auto operator<=>(const cidr&, const cidr&) = default;
};

/// Accepts "a.b.c.d/len" or a bare address (treated as /32). Host bits set
/// beyond the prefix length are an error.
cidr parse_cidr(std::string_view text);
std::string to_string(const cidr& prefix);

} // namespace bbkit

template <>
struct std::hash<bbkit::ipv4> {
  std::size_t operator()(bbkit::ipv4 a) const noexcept {
    return std::hash<std::uint32_t>{}(a.value);
  }
};
