#include "bbkit/report_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "bbkit/errors.hpp"
#include "bbkit/records_io.hpp"

namespace bbkit {

namespace {

template <class T>
T number(std::string_view s, std::string_view what) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
    throw data_error("bad " + std::string(what) + " '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> out;
  while (!s.empty()) {
    auto b = s.find_first_not_of(' ');
    if (b == std::string_view::npos)
      break;
    s.remove_prefix(b);
    auto e = std::min(s.find(' '), s.size());
    out.push_back(s.substr(0, e));
    s.remove_prefix(e);
  }
  return out;
}

constexpr std::size_t probe_fields = 5;
constexpr std::size_t packet_fields = 14;

std::string join_fields(std::span<const std::string_view> f, std::size_t from, std::size_t n) {
  std::string out;
  for (std::size_t i = from; i < from + n; ++i) {
    if (i > from)
      out += ',';
    out += f[i];
  }
  return out;
}

} // namespace

std::map<probe_protocol, ledger_facts> describe_ledger(std::span<const probe_record> ledger) {
  std::map<probe_protocol, ledger_facts> out;
  for (const auto& p : ledger) {
    auto [it, fresh] = out.try_emplace(p.protocol);
    auto& f = it->second;
    if (fresh || p.send_time < f.first_send)
      f.first_send = p.send_time;
    ++f.totals.packets;
    f.totals.bytes += p.probe_size;
  }
  return out;
}

void write_responses(std::ostream& out, const responses_file& file) {
  out << "# bbkit responses " << library_version() << '\n';
  std::size_t index = 0;
  for (const auto& r : file.responses) {
    const auto probe = format_probe_line(r.probe);
    for (const auto& m : r.packets)
      out << index << ',' << probe << ',' << to_string(m.rule) << ',' << format_packet_line(m.packet) << '\n';
    ++index;
  }
  out << "# round " << file.round_id << '\n';
  for (const auto& [protocol, f] : file.ledgers)
    out << "# ledger " << to_string(protocol) << ' ' << f.totals.packets << ' ' << f.totals.bytes << ' '
        << f.first_send << '\n';
  const auto& c = file.counters;
  out << "# counters matched=" << c.matched_packets << " matched_bytes=" << c.matched_bytes
      << " unmatched=" << c.unmatched_packets << " unmatched_bytes=" << c.unmatched_bytes
      << " other_transport=" << c.other_transport << " evicted=" << c.evicted
      << " ack_plus_one=" << c.ack_plus_one << " ack_exact=" << c.ack_exact;
  for (auto r : all_rules)
    out << ' ' << to_string(r) << '=' << c.per(r);
  out << '\n';
}

void write_responses(const std::filesystem::path& path, const responses_file& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw data_error("cannot write " + path.string());
  write_responses(out, file);
  if (!out)
    throw data_error("write failed: " + path.string());
}

responses_file read_responses(std::istream& in) {
  responses_file file;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> current;
  auto fail = [&](const std::string& why) -> data_error {
    return data_error("responses line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    if (line.front() == '#') {
      auto w = words(std::string_view(line).substr(1));
      if (w.empty())
        continue;
      if (w[0] == "round" && w.size() == 2) {
        file.round_id = number<int>(w[1], "round");
      } else if (w[0] == "ledger" && w.size() == 5) {
        auto& f = file.ledgers[parse_protocol(w[1])];
        f.totals.packets = number<std::uint64_t>(w[2], "probe count");
        f.totals.bytes = number<std::uint64_t>(w[3], "probe bytes");
        f.first_send = number<time_us>(w[4], "send time");
      } else if (w[0] == "counters") {
        auto& c = file.counters;
        for (std::size_t i = 1; i < w.size(); ++i) {
          auto eq = w[i].find('=');
          if (eq == std::string_view::npos)
            continue;
          auto key = w[i].substr(0, eq);
          auto v = number<std::uint64_t>(w[i].substr(eq + 1), key);
          if (key == "matched") c.matched_packets = v;
          else if (key == "matched_bytes") c.matched_bytes = v;
          else if (key == "unmatched") c.unmatched_packets = v;
          else if (key == "unmatched_bytes") c.unmatched_bytes = v;
          else if (key == "other_transport") c.other_transport = v;
          else if (key == "evicted") c.evicted = v;
          else if (key == "ack_plus_one") c.ack_plus_one = v;
          else if (key == "ack_exact") c.ack_exact = v;
          else
            for (auto r : all_rules)
              if (key == to_string(r))
                c.per_rule[static_cast<std::size_t>(r)] = v;
        }
      }
      continue;
    }
    const auto f = split_fields(line, ',');
    if (f.size() < 2 + probe_fields + packet_fields)
      throw fail("expected " + std::to_string(2 + probe_fields + packet_fields) + " fields");
    const auto index = number<std::size_t>(f[0], "probe index");
    std::string why;
    auto probe = parse_probe_line(join_fields(f, 1, probe_fields), &why);
    if (!probe)
      throw fail(why);
    const auto rule = parse_rule(f[1 + probe_fields]);
    auto packet = parse_packet_line(join_fields(f, 2 + probe_fields, packet_fields), &why);
    if (!packet)
      throw fail(why);
    if (!current || *current != index) {
      if (current && index < *current)
        throw fail("probe indexes must not decrease");
      file.responses.push_back({*probe, {}});
      current = index;
    }
    file.responses.back().packets.push_back({std::move(*packet), rule});
  }
  return file;
}

responses_file read_responses(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw data_error("cannot read " + path.string());
  try {
    return read_responses(in);
  } catch (const data_error& e) {
    throw data_error(path.string() + ": " + e.what());
  }
}

namespace {

const std::vector<std::string> profile_columns{
  "generator_ip", "protocol", "round", "packets", "bytes", "class", "members",
  "in_protocol", "ttl_expired", "redirect", "unreachable", "other"};

} // namespace

void write_profiles(std::ostream& out, const profiles_file& file, const std::vector<input_digest>& inputs) {
  tsv_writer w(out, profile_columns);
  for (const auto& p : file.profiles)
    for (const auto& r : p.rounds) {
      std::string members;
      for (auto ip : r.member_ips) {
        if (!members.empty())
          members += ';';
        members += to_string(ip);
      }
      w << to_string(p.generator_ip) << to_string(p.protocol) << r.round_id << r.packet_count << r.byte_count
        << to_string(r.cls) << (members.empty() ? std::string("-") : members);
      for (auto k : r.kinds)
        w << k;
      w.end_row();
    }
  for (const auto& [key, totals] : file.probes)
    w.comment("probes " + std::to_string(key.first) + ' ' + std::string(to_string(key.second)) + ' '
              + std::to_string(totals.packets) + ' ' + std::to_string(totals.bytes));
  w.finish(inputs);
}

profiles_file read_profiles(std::istream& in) {
  const auto t = read_tsv(in);
  std::vector<std::size_t> col;
  for (const auto& c : profile_columns)
    col.push_back(t.column(c));
  std::map<std::pair<probe_protocol, ipv4>, generator_profile> merged;
  for (const auto& row : t.rows) {
    const auto ip = parse_ipv4(row[col[0]]);
    const auto protocol = parse_protocol(row[col[1]]);
    round_record r;
    r.round_id = number<int>(row[col[2]], "round");
    r.packet_count = number<std::uint64_t>(row[col[3]], "packet count");
    r.byte_count = number<std::uint64_t>(row[col[4]], "byte count");
    r.cls = parse_profile_class(row[col[5]]);
    if (row[col[6]] != "-")
      for (auto m : split_fields(row[col[6]], ';'))
        r.member_ips.push_back(parse_ipv4(m));
    for (std::size_t k = 0; k < r.kinds.size(); ++k)
      r.kinds[k] = number<std::uint64_t>(row[col[7 + k]], "kind count");
    auto& p = merged[{protocol, ip}];
    p.generator_ip = ip;
    p.protocol = protocol;
    if (p.find_round(r.round_id))
      throw data_error("duplicate round " + std::to_string(r.round_id) + " for " + to_string(ip));
    p.rounds.push_back(std::move(r));
  }
  profiles_file file;
  for (auto& [key, p] : merged) {
    std::sort(p.rounds.begin(), p.rounds.end(), [](const auto& a, const auto& b) { return a.round_id < b.round_id; });
    file.profiles.push_back(std::move(p));
  }
  for (const auto& c : t.comments) {
    auto w = words(c);
    if (w.size() == 5 && w[0] == "probes")
      file.probes[{number<int>(w[1], "round"), parse_protocol(w[2])}] =
        probe_totals{number<std::uint64_t>(w[3], "probe count"), number<std::uint64_t>(w[4], "probe bytes")};
  }
  return file;
}

profiles_file read_profiles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw data_error("cannot read " + path.string());
  return read_profiles(in);
}

} // namespace bbkit
