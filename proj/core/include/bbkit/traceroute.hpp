#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "bbkit/ipv4.hpp"
#include "bbkit/records_io.hpp"

namespace bbkit {

struct hop {
  int ttl = 0;
  std::optional<ipv4> router; // nullopt for a timeout ('*')

  friend bool operator==(const hop&, const hop&) = default;
};

struct traceroute_path {
  ipv4 target;
  std::vector<hop> hops; // strictly increasing ttl

  void validate() const;
  friend bool operator==(const traceroute_path&, const traceroute_path&) = default;
};

// Text format:
//   target 203.0.113.7
//   1 10.0.0.1
//   2 *
// '#' starts a comment line. A path with a malformed hop or a non-increasing
// ttl is rejected as a whole.
parse_result<traceroute_path> parse_traceroute_paths(std::istream& in);
parse_result<traceroute_path> read_traceroute_paths(const std::filesystem::path& path);
void write_traceroute_paths(std::ostream& out, std::span<const traceroute_path> paths);

} // namespace bbkit
