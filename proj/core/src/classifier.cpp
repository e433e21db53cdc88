#include "bbkit/classifier.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <set>
#include <tuple>

#include "bbkit/errors.hpp"
#include "bbkit/wire.hpp"

namespace bbkit {

namespace {

constexpr std::array<std::string_view, 4> class_names{"SILENT", "SINGLE", "MULTIPACKET", "BLOWBACK"};
constexpr std::array<std::string_view, 5> kind_names{"in-protocol", "ttl-expired", "redirect",
                                                     "unreachable", "other"};

bool contains_nocase(std::string_view hay, std::string_view needle) {
  if (needle.empty() || needle.size() > hay.size())
    return false;
  auto it = std::search(hay.begin(), hay.end(), needle.begin(), needle.end(),
                        [](char a, char b) {
                          return std::tolower(static_cast<unsigned char>(a))
                                 == std::tolower(static_cast<unsigned char>(b));
                        });
  return it != hay.end();
}

bool carries_qname(const probe_record& probe, const packet_record& packet) {
  const auto* q = std::get_if<dns_qname>(&probe.token);
  if (!q)
    return false;
  return contains_nocase(packet.payload_text, q->name)
         || contains_nocase(packet.payload_text, wire::dns_wire_name(q->name));
}

} // namespace

std::string_view to_string(profile_class c) {
  return class_names[static_cast<std::size_t>(c)];
}

profile_class parse_profile_class(std::string_view text) {
  for (std::size_t i = 0; i < class_names.size(); ++i)
    if (class_names[i] == text)
      return static_cast<profile_class>(i);
  throw data_error("unknown profile class '" + std::string(text) + "'");
}

profile_class classify_count(std::uint64_t packets, std::uint64_t threshold) {
  if (packets == 0)
    return profile_class::silent;
  if (packets == 1)
    return profile_class::single;
  return packets >= threshold ? profile_class::blowback : profile_class::multipacket;
}

std::string_view to_string(packet_kind k) {
  return kind_names[static_cast<std::size_t>(k)];
}

packet_kind classify_packet(const probe_record& probe, const packet_record& packet) {
  switch (probe.protocol) {
    case probe_protocol::dns:
      if (packet.transport == transport::udp && packet.src_port == 53 && carries_qname(probe, packet))
        return packet_kind::in_protocol;
      break;
    case probe_protocol::icmp:
      if (packet.transport == transport::icmp && packet.icmp_type == icmp_type::echo_reply)
        return packet_kind::in_protocol;
      break;
    case probe_protocol::ntp:
      if (packet.transport == transport::udp && packet.src_port == 123)
        return packet_kind::in_protocol;
      break;
    default:
      if (packet.transport == transport::tcp && packet.src_port == probed_port(probe.protocol))
        return packet_kind::in_protocol;
      break;
  }
  if (packet.transport == transport::icmp) {
    const auto type = packet.icmp_type.value_or(255);
    if (type == icmp_type::time_exceeded && packet.icmp_code == 0)
      return packet_kind::ttl_expired;
    if (type == icmp_type::redirect)
      return packet_kind::redirect;
    if (type == icmp_type::unreachable)
      return packet_kind::unreachable;
  }
  return packet_kind::other;
}

const round_record* generator_profile::find_round(int round_id) const {
  for (const auto& r : rounds)
    if (r.round_id == round_id)
      return &r;
  return nullptr;
}

std::uint64_t generator_profile::packets_in(int round_id) const {
  const auto* r = find_round(round_id);
  return r ? r->packet_count : 0;
}

std::vector<generator_profile> build_profiles(std::span<const matched_response> responses,
                                              int round_id, std::uint64_t threshold) {
  std::set<std::pair<probe_protocol, ipv4>> seen;
  std::vector<generator_profile> out;
  for (const auto& r : responses) {
    if (!seen.emplace(r.probe.protocol, r.probe.target).second)
      throw data_error("target " + to_string(r.probe.target) + " was probed more than once with "
                       + std::string(to_string(r.probe.protocol)) + " in round "
                       + std::to_string(round_id));
    if (r.packets.empty())
      continue;
    const auto rg = make_responder_group(r);
    round_record rec;
    rec.round_id = round_id;
    rec.packet_count = rg.packet_count;
    rec.byte_count = rg.byte_count;
    rec.member_ips = rg.member_ips;
    rec.cls = classify_count(rec.packet_count, threshold);
    for (const auto& m : r.packets)
      ++rec.kinds[static_cast<std::size_t>(classify_packet(r.probe, m.packet))];
    out.push_back({r.probe.target, r.probe.protocol, {std::move(rec)}});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.protocol, a.generator_ip) < std::tie(b.protocol, b.generator_ip);
  });
  return out;
}

void add_silent_targets(std::vector<generator_profile>& profiles,
                        std::span<const probe_record> ledger, int round_id) {
  std::set<std::pair<probe_protocol, ipv4>> present;
  for (const auto& p : profiles)
    if (p.find_round(round_id))
      present.emplace(p.protocol, p.generator_ip);
  for (const auto& probe : ledger) {
    if (!present.emplace(probe.protocol, probe.target).second)
      continue;
    round_record rec;
    rec.round_id = round_id;
    profiles.push_back({probe.target, probe.protocol, {rec}});
  }
  std::sort(profiles.begin(), profiles.end(), [](const auto& a, const auto& b) {
    return std::tie(a.protocol, a.generator_ip) < std::tie(b.protocol, b.generator_ip);
  });
}

std::vector<generator_profile> merge_rounds(std::span<const std::vector<generator_profile>> rounds) {
  std::map<std::pair<probe_protocol, ipv4>, generator_profile> merged;
  for (const auto& list : rounds)
    for (const auto& p : list) {
      auto& m = merged[{p.protocol, p.generator_ip}];
      m.generator_ip = p.generator_ip;
      m.protocol = p.protocol;
      for (const auto& r : p.rounds) {
        if (m.find_round(r.round_id))
          throw data_error("duplicate round " + std::to_string(r.round_id) + " for "
                           + to_string(p.generator_ip));
        m.rounds.push_back(r);
      }
    }
  std::vector<generator_profile> out;
  out.reserve(merged.size());
  for (auto& [key, p] : merged) {
    std::sort(p.rounds.begin(), p.rounds.end(),
              [](const auto& a, const auto& b) { return a.round_id < b.round_id; });
    out.push_back(std::move(p));
  }
  return out;
}

probe_totals totals_of(std::span<const probe_record> ledger) {
  probe_totals t;
  for (const auto& p : ledger) {
    ++t.packets;
    t.bytes += p.probe_size;
  }
  return t;
}

std::optional<double> amplification(double response, double probe) {
  if (probe <= 0.0)
    return std::nullopt;
  return response / probe;
}

scan_summary summarize_scan(std::span<const generator_profile> profiles, int round_id,
                            probe_totals probes, std::uint64_t threshold) {
  scan_summary s;
  s.probe_packets = probes.packets;
  s.probe_bytes = probes.bytes;
  for (const auto& p : profiles) {
    const auto* r = p.find_round(round_id);
    if (!r || r->packet_count == 0)
      continue;
    ++s.total_rggs;
    s.response_packets += r->packet_count;
    s.response_bytes += r->byte_count;
    if (r->packet_count >= 2) {
      ++s.multipacket_rggs;
      s.multipacket_packets += r->packet_count;
    }
    if (r->packet_count >= threshold && r->packet_count >= 2) {
      ++s.blowback_rggs;
      s.blowback_packets += r->packet_count;
    }
  }
  if (s.multipacket_packets > 0)
    s.blowback_share_of_multipacket_traffic =
      static_cast<double>(s.blowback_packets) / static_cast<double>(s.multipacket_packets);
  s.packet_amplification = amplification(static_cast<double>(s.response_packets),
                                         static_cast<double>(s.probe_packets));
  s.volume_amplification = amplification(static_cast<double>(s.response_bytes),
                                         static_cast<double>(s.probe_bytes));
  return s;
}

std::uint64_t type_breakdown::total() const {
  std::uint64_t t = 0;
  for (auto c : counts)
    t += c;
  return t;
}

std::array<double, 5> type_breakdown::shares_percent() const {
  std::array<double, 5> out{};
  const auto t = total();
  if (t == 0)
    return out;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = 100.0 * static_cast<double>(counts[i]) / static_cast<double>(t);
  return out;
}

type_breakdown response_type_breakdown(std::span<const matched_response> responses) {
  type_breakdown b;
  for (const auto& r : responses)
    for (const auto& m : r.packets)
      b.add(classify_packet(r.probe, m.packet));
  return b;
}

std::string format_percent(double percent) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", percent);
  return buf;
}

} // namespace bbkit
