#include "bbkit/prefix_dataset.hpp"

#include <algorithm>
#include <fstream>
#include <istream>

#include "bbkit/errors.hpp"
#include "bbkit/records_io.hpp"

namespace bbkit {

void prefix_dataset::insert(const cidr& prefix, std::string_view value) {
  auto [it, fresh] = value_ids_.try_emplace(std::string(value), static_cast<std::uint32_t>(values_.size()));
  if (fresh)
    values_.emplace_back(value);
  auto& table = by_length_[prefix.length];
  auto [slot, added] = table.insert_or_assign(prefix.network.value, it->second);
  (void)slot;
  if (!added)
    return;
  prefixes_.push_back(prefix);
  if (std::find(lengths_desc_.begin(), lengths_desc_.end(), prefix.length) == lengths_desc_.end()) {
    lengths_desc_.push_back(prefix.length);
    std::sort(lengths_desc_.rbegin(), lengths_desc_.rend());
  }
}

std::optional<std::string_view> prefix_dataset::lookup(ipv4 addr) const {
  for (auto len : lengths_desc_) {
    const auto& table = by_length_[len];
    auto it = table.find(addr.value & cidr::mask_for(len));
    if (it != table.end())
      return std::string_view(values_[it->second]);
  }
  return std::nullopt;
}

std::map<std::string, std::uint64_t> prefix_dataset::address_counts() const {
  auto sorted = prefixes_;
  std::sort(sorted.begin(), sorted.end(), [](const cidr& a, const cidr& b) {
    if (a.network != b.network)
      return a.network < b.network;
    return a.length < b.length;
  });
  std::vector<std::uint64_t> effective(sorted.size());
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    effective[i] = sorted[i].size();
    while (!stack.empty() && !sorted[stack.back()].contains(sorted[i]))
      stack.pop_back();
    if (!stack.empty())
      effective[stack.back()] -= sorted[i].size();
    stack.push_back(i);
  }
  std::map<std::string, std::uint64_t> counts;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& p = sorted[i];
    const auto id = by_length_[p.length].at(p.network.value);
    counts[values_[id]] += effective[i];
  }
  return counts;
}

std::uint64_t prefix_dataset::covered_addresses() const {
  std::uint64_t total = 0;
  for (const auto& [value, n] : address_counts())
    total += n;
  return total;
}

prefix_dataset::load_result prefix_dataset::parse(std::istream& in) {
  load_result result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty() || line.front() == '#')
      continue;
    try {
      auto fields = split_fields(line, ',');
      if (fields.size() < 2 || fields[1].empty())
        throw data_error("expected CIDR,value");
      result.dataset.insert(parse_cidr(fields[0]), fields[1]);
    } catch (const error& e) {
      ++result.rejected;
      if (result.diagnostics.size() < max_diagnostics)
        result.diagnostics.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (in.bad())
    throw data_error("failed reading prefix dataset");
  return result;
}

prefix_dataset::load_result prefix_dataset::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw data_error("cannot open prefix dataset '" + path.string() + "'");
  return parse(in);
}

} // namespace bbkit
