#include "bbkit/reports.hpp"

#include <algorithm>
#include <ostream>

#include "bbkit/errors.hpp"

namespace bbkit {

std::set<probe_protocol> protocols_in(const profiles_file& file) {
  std::set<probe_protocol> out;
  for (const auto& p : file.profiles)
    out.insert(p.protocol);
  for (const auto& [key, _] : file.probes)
    out.insert(key.second);
  return out;
}

std::vector<int> rounds_in(const profiles_file& file) {
  std::set<int> ids;
  for (const auto& p : file.profiles)
    for (const auto& r : p.rounds)
      ids.insert(r.round_id);
  for (const auto& [key, _] : file.probes)
    ids.insert(key.first);
  return {ids.begin(), ids.end()};
}

std::vector<generator_profile> profiles_for(const profiles_file& file, probe_protocol protocol) {
  std::vector<generator_profile> out;
  for (const auto& p : file.profiles)
    if (p.protocol == protocol)
      out.push_back(p);
  return out;
}

std::vector<generator_profile> bbg_profiles_for(const profiles_file& file, probe_protocol protocol, int bbg_round,
                                                std::uint64_t threshold) {
  std::vector<generator_profile> out;
  for (const auto& p : file.profiles)
    if (p.protocol == protocol && classify_count(p.packets_in(bbg_round), threshold) == profile_class::blowback)
      out.push_back(p);
  return out;
}

namespace {

probe_totals probes_of(const profiles_file& file, int round, probe_protocol p) {
  auto it = file.probes.find({round, p});
  return it == file.probes.end() ? probe_totals{} : it->second;
}

std::vector<ipv4> ips_of(const std::vector<generator_profile>& profiles) {
  std::vector<ipv4> out;
  for (const auto& p : profiles)
    out.push_back(p.generator_ip);
  return out;
}

} // namespace

void write_full_scan_table(std::ostream& out, const profiles_file& file, int round, std::uint64_t threshold,
                           const digests& inputs) {
  tsv_writer w(out, {"protocol", "probes", "rggs", "multipacket_rggs", "blowback_rggs", "multipacket_packets",
                     "blowback_packets", "blowback_share_of_multipacket_traffic"});
  for (auto p : protocols_in(file)) {
    const auto s = summarize_scan(profiles_for(file, p), round, probes_of(file, round, p), threshold);
    w << to_string(p) << s.probe_packets << s.total_rggs << s.multipacket_rggs << s.blowback_rggs
      << s.multipacket_packets << s.blowback_packets << s.blowback_share_of_multipacket_traffic;
    w.end_row();
  }
  w.comment("round " + std::to_string(round));
  w.finish(inputs);
}

void write_amplification_table(std::ostream& out, const profiles_file& file, std::span<const int> rescans,
                               std::uint64_t threshold, const digests& inputs) {
  tsv_writer w(out, {"protocol", "rescans", "probe_packets", "probe_bytes", "response_packets", "response_bytes",
                     "packet_amplification", "volume_amplification"});
  for (auto p : protocols_in(file)) {
    const auto profiles = profiles_for(file, p);
    double probe_packets = 0, probe_bytes = 0, packets = 0, bytes = 0;
    std::uint64_t n = 0;
    for (int id : rescans) {
      const auto totals = probes_of(file, id, p);
      if (totals.packets == 0)
        continue;
      const auto s = summarize_scan(profiles, id, totals, threshold);
      probe_packets += static_cast<double>(s.probe_packets);
      probe_bytes += static_cast<double>(s.probe_bytes);
      packets += static_cast<double>(s.response_packets);
      bytes += static_cast<double>(s.response_bytes);
      ++n;
    }
    if (n == 0)
      continue;
    const double k = static_cast<double>(n);
    w << to_string(p) << n << probe_packets / k << probe_bytes / k << packets / k << bytes / k
      << amplification(packets, probe_packets) << amplification(bytes, probe_bytes);
    w.end_row();
  }
  w.comment("averages over rescan rounds");
  w.finish(inputs);
}

void write_origins_table(std::ostream& out, const profiles_file& file, const prefix_dataset& asn,
                         const prefix_dataset& geo, std::span<const int> rounds, std::uint64_t threshold,
                         const digests& inputs) {
  std::vector<generator_profile> bbgs;
  for (auto p : protocols_in(file))
    for (auto& g : bbg_profiles_for(file, p, 0, threshold))
      bbgs.push_back(std::move(g));
  const auto origins = attribute_origins(bbgs, asn, geo, rounds);
  tsv_writer w(out, {"round", "dimension", "value", "packets", "share", "dominant"});
  for (const auto& o : origins) {
    auto rows = [&](const char* dim, const std::vector<origin_share>& shares, const std::optional<origin_share>& dom) {
      for (const auto& s : shares) {
        w << o.round_id << dim << s.value << s.packets << s.share
          << ((dom && dom->value == s.value) ? "yes" : "no");
        w.end_row();
      }
    };
    rows("asn", o.by_asn, o.dominant_asn);
    rows("country", o.by_country, o.dominant_country);
  }
  w.finish(inputs);
}

void write_packet_types_table(std::ostream& out, const profiles_file& file, int round, const digests& inputs) {
  std::vector<std::string> cols{"protocol", "multipacket_rggs", "packets"};
  for (auto k : all_packet_kinds)
    cols.push_back(std::string(to_string(k)) + "_pct");
  tsv_writer w(out, cols);
  for (auto p : protocols_in(file)) {
    type_breakdown b;
    std::uint64_t rggs = 0;
    for (const auto& g : file.profiles) {
      const auto* r = g.protocol == p ? g.find_round(round) : nullptr;
      if (!r || r->packet_count < 2)
        continue;
      ++rggs;
      for (std::size_t k = 0; k < r->kinds.size(); ++k)
        b.counts[k] += r->kinds[k];
    }
    w << to_string(p) << rggs << b.total();
    for (double s : b.shares_percent())
      w << s;
    w.end_row();
  }
  w.comment("round " + std::to_string(round));
  w.finish(inputs);
}

void write_stability_data(std::ostream& out, const profiles_file& file, std::span<const int> rescans,
                          std::uint64_t threshold, const digests& inputs) {
  tsv_writer w(out, {"protocol", "round", "bbgs", "blowback_count", "active_count", "blowback_prevalence",
                     "active_prevalence"});
  for (auto p : protocols_in(file)) {
    const auto bbgs = ips_of(bbg_profiles_for(file, p, 0, threshold));
    if (rescans.empty() || bbgs.empty())
      continue;
    const auto rep = stability(bbgs, profiles_for(file, p), rescans, threshold);
    for (const auto& r : rep.rounds) {
      w << to_string(p) << r.round_id << std::uint64_t{rep.bbg_count} << r.blowback_count << r.active_count
        << r.blowback << r.active;
      w.end_row();
    }
    w.comment(std::string(to_string(p)) + " blowback " + format_number(rep.blowback_min) + ".."
              + format_number(rep.blowback_max) + " active " + format_number(rep.active_min) + ".."
              + format_number(rep.active_max) + " blowback_churn " + (rep.blowback_churn() ? "yes" : "no")
              + " active_churn " + (rep.active_churn() ? "yes" : "no"));
  }
  w.finish(inputs);
}

void write_concentration_data(std::ostream& out, const profiles_file& file, std::span<const int> rounds,
                              int rank_round, std::uint64_t threshold, const digests& inputs) {
  tsv_writer w(out, {"protocol", "round", "rank", "cumulative_packets", "cumulative_fraction"});
  for (auto p : protocols_in(file)) {
    const auto bbgs = bbg_profiles_for(file, p, 0, threshold);
    if (bbgs.empty())
      continue;
    const auto rep = activity_concentration(bbgs, rounds, rank_round);
    for (const auto& c : rep.curves) {
      const double total = c.cumulative.empty() ? 0.0 : static_cast<double>(c.cumulative.back());
      for (std::size_t k = 0; k < c.cumulative.size(); ++k) {
        w << to_string(p) << c.round_id << std::uint64_t{k + 1} << c.cumulative[k]
          << (total > 0 ? std::optional<double>(static_cast<double>(c.cumulative[k]) / total) : std::nullopt);
        w.end_row();
      }
    }
    w.comment(std::string(to_string(p)) + " excluded " + std::to_string(rep.excluded)
              + " generators not active in every round");
  }
  w.finish(inputs);
}

std::set<ipv4> persistent_multipacket(const profiles_file& file, std::span<const int> rounds) {
  std::set<ipv4> out;
  for (const auto& g : file.profiles)
    if (std::all_of(rounds.begin(), rounds.end(), [&](int r) { return g.packets_in(r) >= 2; }))
      out.insert(g.generator_ip);
  return out;
}

void write_loop_data(std::ostream& out, std::span<const traceroute_path> paths, const std::set<ipv4>* subset,
                     int repeat_threshold, const digests& inputs) {
  tsv_writer w(out, {"paths", "total", "looping", "prevalence"});
  auto row = [&](const char* name, std::span<const traceroute_path> list) {
    const auto r = detect_loops(list, repeat_threshold);
    w << name << std::uint64_t{r.total} << std::uint64_t{r.looping} << r.prevalence;
    w.end_row();
  };
  row("all", paths);
  if (subset) {
    std::vector<traceroute_path> chosen;
    for (const auto& p : paths)
      if (subset->contains(p.target))
        chosen.push_back(p);
    row("persistent_multipacket", chosen);
  }
  w.finish(inputs);
}

std::vector<attack_input> attack_inputs(const responses_file& file) {
  std::vector<attack_input> out;
  for (const auto& [protocol, facts] : file.ledgers) {
    attack_input in;
    in.protocol = protocol;
    in.rescan_start = facts.first_send;
    in.probes = facts.totals;
    for (const auto& r : file.responses)
      if (r.probe.protocol == protocol)
        in.responses.push_back(r);
    out.push_back(std::move(in));
  }
  for (const auto& r : file.responses)
    if (!file.ledgers.contains(r.probe.protocol))
      throw data_error("responses file lacks ledger facts for " + std::string(to_string(r.probe.protocol)));
  return out;
}

void write_attack_timeline(std::ostream& out, const attack_timeline& t, const digests& inputs) {
  tsv_writer w(out, {"second", "pps", "Bps"});
  for (std::size_t s = 0; s < t.bins.size(); ++s) {
    w << std::uint64_t{s} << t.bins[s].packets << t.bins[s].bytes;
    w.end_row();
  }
  std::string protocols;
  for (auto p : t.protocols)
    protocols += std::string(protocols.empty() ? "" : ",") + std::string(to_string(p));
  w.comment("protocols " + (protocols.empty() ? std::string("-") : protocols)
            + (t.protocols.size() > 1 ? " (aggregate assumes simultaneous probing adds up)" : ""));
  w.comment("probes " + std::to_string(t.probes.packets) + " probe_bytes " + std::to_string(t.probes.bytes)
            + " first_second_packet_amplification " + format_number(t.first_second_packet_amplification())
            + " first_second_byte_amplification " + format_number(t.first_second_byte_amplification())
            + " skewed " + std::to_string(t.skewed_packets));
  w.finish(inputs);
}

void write_timing_data(std::ostream& out, std::span<const matched_response> responses, std::size_t top,
                       const std::vector<ipv4>& only_targets, time_us bin_width, const digests& inputs) {
  std::vector<const matched_response*> chosen;
  for (const auto& r : responses)
    if (only_targets.empty() || std::find(only_targets.begin(), only_targets.end(), r.probe.target) != only_targets.end())
      chosen.push_back(&r);
  std::sort(chosen.begin(), chosen.end(), [](const auto* a, const auto* b) {
    if (a->packets.size() != b->packets.size())
      return a->packets.size() > b->packets.size();
    return std::tie(a->probe.protocol, a->probe.target) < std::tie(b->probe.protocol, b->probe.target);
  });
  if (only_targets.empty() && chosen.size() > top)
    chosen.resize(top);
  tsv_writer w(out, {"protocol", "generator_ip", "bin", "packets"});
  for (const auto* r : chosen) {
    const auto bins = timing_histogram(*r, bin_width);
    for (std::size_t s = 0; s < bins.size(); ++s) {
      w << to_string(r->probe.protocol) << to_string(r->probe.target) << std::uint64_t{s} << bins[s];
      w.end_row();
    }
  }
  w.comment("bin width " + std::to_string(bin_width) + " us");
  w.finish(inputs);
}

} // namespace bbkit
