#include "bbkit/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <unordered_map>

#include "bbkit/errors.hpp"

namespace bbkit {

namespace {

std::optional<std::uint64_t> as_number(std::string_view s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
    return std::nullopt;
  return v;
}

bool asn_less(const std::string& a, const std::string& b) {
  auto na = as_number(a);
  auto nb = as_number(b);
  if (na && nb)
    return *na < *nb;
  if (na != nb)
    return na.has_value(); // numbers sort before names
  return a < b;
}

template <class Less>
std::vector<origin_share> ranked_shares(const std::map<std::string, std::uint64_t>& counts,
                                        std::uint64_t total, Less less) {
  std::vector<origin_share> out;
  for (const auto& [value, n] : counts)
    out.push_back({value, n, total ? static_cast<double>(n) / static_cast<double>(total) : 0.0});
  std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
    if (a.packets != b.packets)
      return a.packets > b.packets;
    return less(a.value, b.value);
  });
  return out;
}

std::optional<origin_share> dominant(const std::vector<origin_share>& ranked) {
  for (const auto& s : ranked)
    if (s.value != unknown_origin && s.packets > 0)
      return s;
  return std::nullopt;
}

} // namespace

std::vector<ipv4> blowback_generators(std::span<const generator_profile> profiles, int round_id,
                                      std::uint64_t threshold) {
  std::vector<ipv4> out;
  for (const auto& p : profiles)
    if (classify_count(p.packets_in(round_id), threshold) == profile_class::blowback)
      out.push_back(p.generator_ip);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

stability_report stability(std::span<const ipv4> full_scan_bbgs,
                           std::span<const generator_profile> profiles,
                           std::span<const int> round_ids, std::uint64_t threshold) {
  std::set<ipv4> bbgs(full_scan_bbgs.begin(), full_scan_bbgs.end());
  if (bbgs.empty())
    throw data_error("stability needs a non-empty set of full-scan blowback generators");
  if (round_ids.empty())
    throw data_error("stability needs at least one rescan round");
  std::unordered_map<ipv4, const generator_profile*> by_ip;
  for (const auto& p : profiles) {
    if (!by_ip.emplace(p.generator_ip, &p).second)
      throw data_error("generator " + to_string(p.generator_ip)
                       + " appears twice; stability expects one protocol");
  }

  stability_report report;
  report.bbg_count = bbgs.size();
  const double n = static_cast<double>(bbgs.size());
  for (int round : round_ids) {
    round_prevalence rp;
    rp.round_id = round;
    for (auto ip : bbgs) {
      auto it = by_ip.find(ip);
      const auto packets = it == by_ip.end() ? 0 : it->second->packets_in(round);
      if (packets >= 1)
        ++rp.active_count;
      if (classify_count(packets, threshold) == profile_class::blowback)
        ++rp.blowback_count;
    }
    rp.blowback = static_cast<double>(rp.blowback_count) / n;
    rp.active = static_cast<double>(rp.active_count) / n;
    report.rounds.push_back(rp);
  }

  auto [bmin, bmax] = std::minmax_element(report.rounds.begin(), report.rounds.end(),
                                          [](const auto& a, const auto& b) { return a.blowback < b.blowback; });
  auto [amin, amax] = std::minmax_element(report.rounds.begin(), report.rounds.end(),
                                          [](const auto& a, const auto& b) { return a.active < b.active; });
  report.blowback_min = bmin->blowback;
  report.blowback_max = bmax->blowback;
  report.active_min = amin->active;
  report.active_max = amax->active;

  std::uint64_t low_b = report.rounds.front().blowback_count;
  std::uint64_t low_a = report.rounds.front().active_count;
  for (std::size_t i = 1; i < report.rounds.size(); ++i) {
    const auto& r = report.rounds[i];
    if (r.blowback_count > low_b)
      report.blowback_rises.push_back(r.round_id);
    if (r.active_count > low_a)
      report.active_rises.push_back(r.round_id);
    low_b = std::min(low_b, r.blowback_count);
    low_a = std::min(low_a, r.active_count);
  }
  return report;
}

const concentration_curve* concentration_report::curve(int round_id) const {
  for (const auto& c : curves)
    if (c.round_id == round_id)
      return &c;
  return nullptr;
}

concentration_report activity_concentration(std::span<const generator_profile> profiles,
                                            std::span<const int> round_ids, int rank_round) {
  concentration_report report;
  report.rank_round = rank_round;
  std::vector<const generator_profile*> persistent;
  for (const auto& p : profiles) {
    const bool everywhere =
      std::all_of(round_ids.begin(), round_ids.end(), [&](int r) { return p.packets_in(r) >= 1; });
    if (everywhere)
      persistent.push_back(&p);
    else
      ++report.excluded;
  }
  std::sort(persistent.begin(), persistent.end(), [&](const auto* a, const auto* b) {
    const auto pa = a->packets_in(rank_round);
    const auto pb = b->packets_in(rank_round);
    if (pa != pb)
      return pa > pb;
    return a->generator_ip < b->generator_ip;
  });
  for (const auto* p : persistent)
    report.ranking.push_back(p->generator_ip);
  for (int r : round_ids) {
    concentration_curve c;
    c.round_id = r;
    std::uint64_t running = 0;
    for (const auto* p : persistent) {
      running += p->packets_in(r);
      c.cumulative.push_back(running);
    }
    report.curves.push_back(std::move(c));
  }
  return report;
}

std::size_t ranks_to_reach(const concentration_curve& curve, double fraction) {
  if (curve.cumulative.empty())
    return 0;
  const double goal = fraction * static_cast<double>(curve.cumulative.back());
  for (std::size_t k = 0; k < curve.cumulative.size(); ++k)
    if (static_cast<double>(curve.cumulative[k]) >= goal)
      return k + 1;
  return curve.cumulative.size();
}

std::vector<origin_round> attribute_origins(std::span<const generator_profile> profiles,
                                            const prefix_dataset& asn_dataset,
                                            const prefix_dataset& geo_dataset,
                                            std::span<const int> round_ids) {
  std::map<std::string, double> address_share;
  if (const auto covered = geo_dataset.covered_addresses(); covered > 0)
    for (const auto& [country, n] : geo_dataset.address_counts())
      address_share[country] = static_cast<double>(n) / static_cast<double>(covered);

  std::vector<origin_round> out;
  for (int round : round_ids) {
    origin_round o;
    o.round_id = round;
    o.country_address_share = address_share;
    std::map<std::string, std::uint64_t> asn_counts, geo_counts;
    for (const auto& p : profiles) {
      const auto packets = p.packets_in(round);
      if (packets == 0)
        continue;
      o.total_packets += packets;
      const auto asn = asn_dataset.lookup(p.generator_ip);
      const auto geo = geo_dataset.lookup(p.generator_ip);
      if (!asn)
        ++o.unknown_asn_generators;
      if (!geo)
        ++o.unknown_country_generators;
      asn_counts[std::string(asn.value_or(unknown_origin))] += packets;
      geo_counts[std::string(geo.value_or(unknown_origin))] += packets;
    }
    o.by_asn = ranked_shares(asn_counts, o.total_packets, asn_less);
    o.by_country = ranked_shares(geo_counts, o.total_packets, std::less<std::string>{});
    o.dominant_asn = dominant(o.by_asn);
    o.dominant_country = dominant(o.by_country);
    out.push_back(std::move(o));
  }
  return out;
}

bool has_loop(const traceroute_path& path, int repeat_threshold) {
  std::unordered_map<ipv4, int> seen;
  for (const auto& h : path.hops)
    if (h.router && ++seen[*h.router] >= repeat_threshold)
      return true;
  return false;
}

loop_report detect_loops(std::span<const traceroute_path> paths, int repeat_threshold) {
  if (repeat_threshold < 1)
    throw validation_error("repeat threshold must be positive");
  loop_report r;
  r.total = paths.size();
  for (const auto& p : paths)
    if (has_loop(p, repeat_threshold))
      ++r.looping;
  if (r.total > 0)
    r.prevalence = static_cast<double>(r.looping) / static_cast<double>(r.total);
  return r;
}

std::vector<std::uint64_t> timing_histogram(const matched_response& response, time_us bin_width) {
  if (response.packets.empty())
    throw data_error("timing histogram of an empty response");
  if (bin_width <= 0)
    throw validation_error("bin width must be positive");
  std::vector<std::uint64_t> bins;
  for (const auto& m : response.packets) {
    const auto offset = std::max<time_us>(0, m.packet.recv_time - response.probe.send_time);
    const auto bin = static_cast<std::size_t>(offset / bin_width);
    if (bin >= bins.size())
      bins.resize(bin + 1, 0);
    ++bins[bin];
  }
  return bins;
}

} // namespace bbkit
