#include "bbkit/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "bbkit/errors.hpp"

namespace bbkit {

namespace {

[[noreturn]] void bad(std::string_view where, std::string_view what) {
  throw validation_error("scenario: " + std::string(where) + ": " + std::string(what));
}

double number_of(const toml::node& n, std::string_view where) {
  if (auto v = n.value<double>())
    return *v;
  bad(where, "expected a number");
}

template <class T>
T integer_of(const toml::node& n, std::string_view where) {
  auto v = n.value<std::int64_t>();
  if (!v)
    bad(where, "expected an integer");
  if (*v < static_cast<std::int64_t>(std::numeric_limits<T>::min())
      || static_cast<std::uint64_t>(*v) > static_cast<std::uint64_t>(std::numeric_limits<T>::max()))
    bad(where, "integer out of range");
  return static_cast<T>(*v);
}

std::string string_of(const toml::node& n, std::string_view where) {
  if (auto v = n.value<std::string>())
    return *v;
  bad(where, "expected a string");
}

void reject_unknown(const toml::table& t, std::initializer_list<std::string_view> known, std::string_view where) {
  for (const auto& [key, _] : t) {
    bool ok = false;
    for (auto k : known)
      ok = ok || key.str() == k;
    if (!ok)
      bad(where, "unknown key '" + std::string(key.str()) + "'");
  }
}

timing_profile timing_of(const toml::node& n, std::string_view where) {
  const auto* t = n.as_table();
  if (!t)
    bad(where, "timing must be a table");
  reject_unknown(*t, {"kind", "rate", "duration_s", "rate_step", "on_s", "off_s", "bursts", "gaps_s"}, where);
  timing_profile tp;
  if (!t->contains("kind"))
    bad(where, "timing needs a kind");
  tp.kind = parse_timing_kind(string_of(*t->get("kind"), where));
  if (auto* v = t->get("rate")) tp.rate = number_of(*v, where);
  if (auto* v = t->get("duration_s")) tp.duration_s = number_of(*v, where);
  if (auto* v = t->get("rate_step")) tp.rate_step = integer_of<std::uint64_t>(*v, where);
  if (auto* v = t->get("on_s")) tp.on_s = number_of(*v, where);
  if (auto* v = t->get("off_s")) tp.off_s = number_of(*v, where);
  if (auto* arr = t->get_as<toml::array>("bursts"))
    for (const auto& e : *arr)
      tp.burst_sizes.push_back(integer_of<std::uint64_t>(e, where));
  if (auto* arr = t->get_as<toml::array>("gaps_s"))
    for (const auto& e : *arr)
      tp.gaps_s.push_back(number_of(e, where));
  return tp;
}

packet_mix mix_of(const toml::node& n, std::string_view where) {
  const auto* t = n.as_table();
  if (!t)
    bad(where, "mix must be a table");
  reject_unknown(*t, {"in_protocol", "ttl_expired", "redirect", "unreachable", "other"}, where);
  packet_mix mix{};
  static constexpr std::string_view keys[] = {"in_protocol", "ttl_expired", "redirect", "unreachable", "other"};
  for (std::size_t i = 0; i < 5; ++i)
    if (auto* v = t->get(keys[i]))
      mix[i] = number_of(*v, where);
  return mix;
}

/// Fields shared by [[generator]] and [[population]].
void common_fields(const toml::table& t, generator_spec& s, std::string_view where) {
  if (auto* v = t.get("protocol")) {
    auto name = string_of(*v, where);
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::toupper(c); });
    const auto p = try_parse_protocol(name);
    if (!p)
      bad(where, "unknown protocol '" + string_of(*v, where) + "'");
    s.protocol = *p;
  } else
    bad(where, "protocol is required");
  if (auto* v = t.get("timing"))
    s.timing = timing_of(*v, where);
  if (auto* v = t.get("mix"))
    s.mix = mix_of(*v, where);
  if (auto* v = t.get("churn"))
    s.churn = string_of(*v, where);
  if (auto* v = t.get("delay_ms"))
    s.delay_us = static_cast<time_us>(std::llround(number_of(*v, where) * 1000.0));
  if (auto* v = t.get("packet_size"))
    s.packet_size = integer_of<std::uint32_t>(*v, where);
}

cidr cidr_of(const toml::node& n, std::string_view where) {
  try {
    return parse_cidr(string_of(n, where));
  } catch (const validation_error& e) {
    bad(where, e.what());
  }
}

} // namespace

scenario parse_scenario(std::string_view text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "scenario: line " << e.source().begin.line << ": " << e.description();
    throw validation_error(msg.str());
  }
  reject_unknown(root, {"campaign", "generator", "population"}, "top level");

  scenario sc;
  auto& c = sc.campaign;
  if (auto* camp = root["campaign"].as_table()) {
    reject_unknown(*camp,
                   {"rescans", "noise_pps", "seed", "start_time_s", "rescan_all", "first_rescan_offset_days",
                    "inter_rescan_days", "full_rate_pps", "rescan_rate_pps", "noise_sources", "scanner", "zone",
                    "presets"},
                   "[campaign]");
    const std::string_view w = "[campaign]";
    if (auto* v = camp->get("rescans")) c.rescans = integer_of<int>(*v, w);
    if (auto* v = camp->get("noise_pps")) c.noise_pps = number_of(*v, w);
    if (auto* v = camp->get("seed")) c.seed = integer_of<std::uint64_t>(*v, w);
    if (auto* v = camp->get("start_time_s")) c.start_time = integer_of<std::int64_t>(*v, w) * us_per_second;
    if (auto* v = camp->get("rescan_all")) {
      auto b = v->value<bool>();
      if (!b)
        bad(w, "rescan_all must be a boolean");
      c.rescan_all = *b;
    }
    if (auto* v = camp->get("first_rescan_offset_days")) c.schedule.first_offset_days = integer_of<int>(*v, w);
    if (auto* v = camp->get("inter_rescan_days")) c.schedule.inter_rescan_days = integer_of<int>(*v, w);
    if (auto* v = camp->get("full_rate_pps")) c.full_rate_pps = integer_of<std::int64_t>(*v, w);
    if (auto* v = camp->get("rescan_rate_pps")) c.rescan_rate_pps = integer_of<std::int64_t>(*v, w);
    if (auto* v = camp->get("noise_sources")) c.noise_sources = cidr_of(*v, w);
    if (auto* v = camp->get("scanner")) c.scanner = parse_ipv4(string_of(*v, w));
    if (auto* v = camp->get("zone")) c.zone = string_of(*v, w);
    if (auto* arr = camp->get_as<toml::array>("presets"))
      for (const auto& e : *arr)
        for (auto& s : preset_specs(string_of(e, w)))
          sc.specs.push_back(std::move(s));
  }

  if (auto* gens = root["generator"].as_array()) {
    std::size_t i = 0;
    for (const auto& node : *gens) {
      const std::string where = "[[generator]] #" + std::to_string(++i);
      const auto* t = node.as_table();
      if (!t)
        bad(where, "expected a table");
      reject_unknown(*t, {"ip", "protocol", "timing", "members", "mix", "churn", "delay_ms", "packet_size"}, where);
      generator_spec s;
      if (auto* v = t->get("ip"))
        s.ip = parse_ipv4(string_of(*v, where));
      else
        bad(where, "ip is required");
      common_fields(*t, s, where);
      if (auto* arr = t->get_as<toml::array>("members")) {
        for (const auto& e : *arr)
          s.rg_members.push_back(parse_ipv4(string_of(e, where)));
      } else {
        s.rg_members = {s.ip};
      }
      sc.specs.push_back(std::move(s));
    }
  } else if (root.contains("generator")) {
    bad("generator", "use [[generator]] tables");
  }

  if (auto* pops = root["population"].as_array()) {
    std::size_t i = 0;
    for (const auto& node : *pops) {
      const std::string where = "[[population]] #" + std::to_string(++i);
      const auto* t = node.as_table();
      if (!t)
        bad(where, "expected a table");
      reject_unknown(*t,
                     {"count", "prefix", "protocol", "timing", "mix", "churn", "delay_ms", "packet_size",
                      "extra_members", "member_prefix", "include_self"},
                     where);
      generator_spec base;
      common_fields(*t, base, where);
      const auto* count_node = t->get("count");
      const auto* prefix_node = t->get("prefix");
      if (!count_node || !prefix_node)
        bad(where, "count and prefix are required");
      const auto count = integer_of<std::uint32_t>(*count_node, where);
      const auto prefix = cidr_of(*prefix_node, where);
      if (count > prefix.size())
        bad(where, "prefix too small for count");
      const auto extra = t->get("extra_members") ? integer_of<std::uint32_t>(*t->get("extra_members"), where) : 0u;
      std::optional<cidr> member_prefix;
      if (auto* v = t->get("member_prefix"))
        member_prefix = cidr_of(*v, where);
      if (extra > 0 && !member_prefix)
        bad(where, "extra_members needs member_prefix");
      if (member_prefix && std::uint64_t{count} * extra > member_prefix->size())
        bad(where, "member_prefix too small");
      bool include_self = true;
      if (auto* v = t->get("include_self"))
        include_self = v->value<bool>().value_or(true);
      if (!include_self && extra == 0)
        bad(where, "include_self = false needs extra_members");
      for (std::uint32_t k = 0; k < count; ++k) {
        generator_spec s = base;
        s.ip = ipv4{prefix.network.value + k};
        if (include_self)
          s.rg_members.push_back(s.ip);
        for (std::uint32_t j = 0; j < extra; ++j)
          s.rg_members.push_back(ipv4{member_prefix->network.value + k * extra + j});
        sc.specs.push_back(std::move(s));
      }
    }
  }

  c.validate();
  return sc;
}

scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw validation_error("scenario file not found: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str());
}

} // namespace bbkit
