#include "reference_matcher.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "bbkit/wire.hpp"

namespace bbkit::testing {

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool rule_holds(match_rule rule, const probe_record& probe, const packet_record& pkt,
                const std::string& lowered_payload, const match_config& cfg) {
  if (pkt.transport == transport::other)
    return false;
  switch (rule) {
    case match_rule::ps1: {
      const auto* q = std::get_if<dns_qname>(&probe.token);
      if (!q || lowered_payload.empty())
        return false;
      return lowered_payload.find(q->name) != std::string::npos
             || lowered_payload.find(wire::dns_wire_name(q->name)) != std::string::npos;
    }
    case match_rule::ps2: {
      const auto* s = std::get_if<tcp_seq>(&probe.token);
      if (!s || pkt.transport != transport::tcp || !pkt.tcp_ack)
        return false;
      const auto f = pkt.tcp_flags.value_or(0);
      if (!(f & tcp_flag::syn) || !(f & tcp_flag::ack))
        return false;
      const bool plus_one = *pkt.tcp_ack == static_cast<std::uint32_t>(s->seq + 1);
      const bool exact = *pkt.tcp_ack == s->seq;
      switch (cfg.ack_mode) {
        case ack_mode::seq_plus_one:
          return plus_one;
        case ack_mode::seq_exact:
          return exact;
        case ack_mode::either:
          return plus_one || exact;
      }
      return false;
    }
    case match_rule::ps3: {
      const auto* id = std::get_if<icmp_echo_id>(&probe.token);
      return id && pkt.transport == transport::icmp && pkt.icmp_type == 0 && pkt.icmp_echo_id == id->id;
    }
    case match_rule::pa1:
      return pkt.transport == transport::icmp && pkt.quoted_dst_ip == probe.target;
    case match_rule::pa2:
      return (pkt.transport == transport::tcp || pkt.transport == transport::udp)
             && pkt.src_ip == probe.target && pkt.dst_port == cfg.ephemeral_port;
  }
  return false;
}

bool better(const probe_record& a, std::size_t ia, const probe_record& b, std::size_t ib) {
  if (a.send_time != b.send_time)
    return a.send_time > b.send_time;
  if (a.target != b.target)
    return a.target < b.target;
  return ia < ib;
}

} // namespace

reference_result reference_match(std::span<const probe_record> probes,
                                 std::span<const packet_record> packets, const match_config& config) {
  reference_result out;
  std::vector<time_us> expiry(probes.size());
  for (std::size_t i = 0; i < probes.size(); ++i)
    expiry[i] = probes[i].send_time + config.expiry_window;

  std::vector<std::size_t> open; // sent and not yet expired
  std::size_t next = 0;
  for (const auto& pkt : packets) {
    const time_us t = pkt.recv_time;
    while (next < probes.size() && probes[next].send_time <= t)
      open.push_back(next++);
    std::erase_if(open, [&](std::size_t i) { return expiry[i] < t; });

    const auto lowered = lowercase(pkt.payload_text);
    std::optional<attribution> got;
    for (auto rule : all_rules) {
      std::optional<std::size_t> best;
      std::size_t candidates = 0;
      for (auto i : open) {
        if (!rule_holds(rule, probes[i], pkt, lowered, config))
          continue;
        ++candidates;
        expiry[i] = std::max(expiry[i], t + config.expiry_window);
        if (!best || better(probes[i], i, probes[*best], *best))
          best = i;
      }
      if (best && !got) {
        got = attribution{*best, rule, false};
        out.ambiguous += candidates > 1;
      }
    }

    if (pkt.transport == transport::other)
      ++out.counters.other_transport;
    if (got) {
      ++out.counters.matched_packets;
      out.counters.matched_bytes += pkt.size;
      ++out.counters.per_rule[static_cast<std::size_t>(got->rule)];
      if (got->rule == match_rule::ps2) {
        got->ack_exact = *pkt.tcp_ack == std::get<tcp_seq>(probes[got->probe_index].token).seq;
        ++(got->ack_exact ? out.counters.ack_exact : out.counters.ack_plus_one);
      }
    } else {
      ++out.counters.unmatched_packets;
      out.counters.unmatched_bytes += pkt.size;
    }
    out.attributions.push_back(got);
  }
  return out;
}

} // namespace bbkit::testing
