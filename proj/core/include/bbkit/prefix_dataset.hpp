#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bbkit/ipv4.hpp"

namespace bbkit {

inline constexpr std::string_view unknown_origin = "unknown";

/// Longest-prefix-match table from IPv4 prefixes to a string value (an ASN
/// or a country code). File format: one "CIDR,value" per line; '#' starts a
/// comment line.
class prefix_dataset {
public:
  /// Re-inserting an identical prefix replaces its value.
  void insert(const cidr& prefix, std::string_view value);

  std::optional<std::string_view> lookup(ipv4 addr) const;
  std::string_view lookup_or_unknown(ipv4 addr) const {
    return lookup(addr).value_or(unknown_origin);
  }

  std::size_t size() const { return prefixes_.size(); }
  bool empty() const { return prefixes_.empty(); }

  /// Addresses per value, each address counted once under its most
  /// specific covering prefix.
  std::map<std::string, std::uint64_t> address_counts() const;
  std::uint64_t covered_addresses() const;

  struct load_result;
  static load_result parse(std::istream& in);
  static load_result load(const std::filesystem::path& path);

private:
  std::array<std::unordered_map<std::uint32_t, std::uint32_t>, 33> by_length_;
  std::vector<std::uint8_t> lengths_desc_;
  std::vector<std::string> values_;
  std::unordered_map<std::string, std::uint32_t> value_ids_;
  std::vector<cidr> prefixes_;
};

struct prefix_dataset::load_result {
  prefix_dataset dataset;
  std::size_t rejected = 0;
  std::vector<std::string> diagnostics;
};

} // namespace bbkit
