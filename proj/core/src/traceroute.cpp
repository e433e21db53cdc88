#include "bbkit/traceroute.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "bbkit/errors.hpp"

namespace bbkit {

void traceroute_path::validate() const {
  for (std::size_t i = 1; i < hops.size(); ++i)
    if (hops[i].ttl <= hops[i - 1].ttl)
      throw data_error("ttl not strictly increasing at hop " + std::to_string(hops[i].ttl));
  if (!hops.empty() && hops.front().ttl < 1)
    throw data_error("ttl must be positive");
}

parse_result<traceroute_path> parse_traceroute_paths(std::istream& in) {
  parse_result<traceroute_path> result;
  std::optional<traceroute_path> current;
  bool current_bad = false;
  std::string reason;
  auto finish = [&] {
    if (!current)
      return;
    if (!current_bad) {
      try {
        current->validate();
      } catch (const error& e) {
        current_bad = true;
        reason = e.what();
      }
    }
    if (current_bad) {
      ++result.rejected;
      if (result.diagnostics.size() < max_diagnostics)
        result.diagnostics.push_back("path to " + to_string(current->target) + ": " + reason);
    } else {
      result.records.push_back(std::move(*current));
    }
    current.reset();
    current_bad = false;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string a, b;
    if (!(fields >> a) || a.front() == '#')
      continue;
    fields >> b;
    if (a == "target") {
      finish();
      current.emplace();
      try {
        current->target = parse_ipv4(b);
      } catch (const error& e) {
        current_bad = true;
        reason = e.what();
      }
      continue;
    }
    if (!current) {
      ++result.rejected;
      if (result.diagnostics.size() < max_diagnostics)
        result.diagnostics.push_back("line " + std::to_string(line_no) + ": hop before any target");
      continue;
    }
    if (current_bad)
      continue;
    hop h;
    auto [p, ec] = std::from_chars(a.data(), a.data() + a.size(), h.ttl);
    if (ec != std::errc{} || p != a.data() + a.size() || b.empty()) {
      current_bad = true;
      reason = "line " + std::to_string(line_no) + ": malformed hop";
      continue;
    }
    if (b != "*") {
      if (auto ip = try_parse_ipv4(b)) {
        h.router = *ip;
      } else {
        current_bad = true;
        reason = "line " + std::to_string(line_no) + ": bad router address '" + b + "'";
        continue;
      }
    }
    current->hops.push_back(h);
  }
  finish();
  if (in.bad())
    throw data_error("failed reading traceroute paths");
  return result;
}

parse_result<traceroute_path> read_traceroute_paths(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw data_error("cannot open traceroute file '" + path.string() + "'");
  return parse_traceroute_paths(in);
}

void write_traceroute_paths(std::ostream& out, std::span<const traceroute_path> paths) {
  for (const auto& p : paths) {
    out << "target " << to_string(p.target) << '\n';
    for (const auto& h : p.hops)
      out << h.ttl << ' ' << (h.router ? to_string(*h.router) : std::string("*")) << '\n';
  }
}

} // namespace bbkit
