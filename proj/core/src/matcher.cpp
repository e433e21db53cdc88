#include "bbkit/matcher.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <deque>
#include <limits>
#include <map>
#include <queue>
#include <string>
#include <unordered_map>

#include "bbkit/errors.hpp"
#include "bbkit/wire.hpp"

namespace bbkit {

std::string_view to_string(ack_mode m) {
  switch (m) {
    case ack_mode::seq_plus_one:
      return "seq+1";
    case ack_mode::seq_exact:
      return "exact";
    case ack_mode::either:
      return "either";
  }
  return "either";
}

ack_mode parse_ack_mode(std::string_view text) {
  if (text == "either")
    return ack_mode::either;
  if (text == "seq+1" || text == "plus-one" || text == "seq-plus-one")
    return ack_mode::seq_plus_one;
  if (text == "exact" || text == "seq-exact")
    return ack_mode::seq_exact;
  throw validation_error("unknown ack mode '" + std::string(text)
                         + "' (expected either, seq+1 or exact)");
}

void match_config::validate() const {
  if (expiry_window <= 0)
    throw validation_error("expiry window must be positive");
  if (ledger_capacity == 0)
    throw validation_error("ledger capacity must be positive");
  if (disorder_tolerance < 0)
    throw validation_error("disorder tolerance must not be negative");
}

double match_counters::matched_fraction() const {
  const auto total = matched_packets + unmatched_packets;
  return total == 0 ? 0.0 : static_cast<double>(matched_packets) / static_cast<double>(total);
}

namespace {

bool precedes(const probe_record& a, std::size_t ia, const probe_record& b, std::size_t ib) {
  if (a.send_time != b.send_time)
    return a.send_time > b.send_time;
  if (a.target != b.target)
    return a.target < b.target;
  return ia < ib;
}

// Polynomial rolling hash over lowercased bytes, base 257 modulo 2^64.
constexpr std::uint64_t hash_base = 257;

std::uint64_t power(std::uint64_t base, std::size_t exp) {
  std::uint64_t r = 1;
  while (exp--)
    r *= base;
  return r;
}

std::uint64_t hash_of(std::string_view s) {
  std::uint64_t h = 0;
  for (unsigned char c : s)
    h = h * hash_base + c;
  return h;
}

unsigned char lower(unsigned char c) {
  return static_cast<unsigned char>(std::tolower(c));
}

// Substring index for live DNS query names, searched with Rabin-Karp once
// per distinct needle length. A counting filter on hash bits skips most
// table lookups.
class qname_index {
public:
  void add(std::uint32_t entry, const std::string& needle) {
    auto& slot = by_length_[needle.size()];
    if (slot.entries == 0)
      slot.top_power = power(hash_base, needle.size() - 1);
    ++slot.entries;
    const auto h = hash_of(needle);
    slot.table[h].push_back({entry, &needle});
    ++filter_[filter_slot(h)];
  }

  void remove(std::uint32_t entry, const std::string& needle) {
    auto it = by_length_.find(needle.size());
    if (it == by_length_.end())
      return;
    const auto h = hash_of(needle);
    auto bucket = it->second.table.find(h);
    if (bucket == it->second.table.end())
      return;
    auto& vec = bucket->second;
    auto pos = std::find_if(vec.begin(), vec.end(), [&](const item& i) { return i.entry == entry; });
    if (pos == vec.end())
      return;
    vec.erase(pos);
    --filter_[filter_slot(h)];
    if (vec.empty())
      it->second.table.erase(bucket);
    if (--it->second.entries == 0)
      by_length_.erase(it);
  }

  bool empty() const { return by_length_.empty(); }

  // Appends every entry whose needle occurs in the (already lowercased) text.
  void search(std::string_view text, std::vector<std::uint32_t>& out) const {
    for (const auto& [len, slot] : by_length_) {
      if (len > text.size())
        break;
      std::uint64_t h = hash_of(text.substr(0, len));
      for (std::size_t i = 0;; ++i) {
        if (filter_[filter_slot(h)] != 0) {
          if (auto b = slot.table.find(h); b != slot.table.end())
            for (const auto& it : b->second)
              if (std::memcmp(it.needle->data(), text.data() + i, len) == 0)
                out.push_back(it.entry);
        }
        if (i + len >= text.size())
          break;
        h = (h - static_cast<unsigned char>(text[i]) * slot.top_power) * hash_base
            + static_cast<unsigned char>(text[i + len]);
      }
    }
  }

private:
  struct item {
    std::uint32_t entry;
    const std::string* needle;
  };
  struct length_slot {
    std::unordered_map<std::uint64_t, std::vector<item>> table;
    std::uint64_t top_power = 1;
    std::size_t entries = 0;
  };

  static constexpr unsigned filter_bits = 22;
  static std::size_t filter_slot(std::uint64_t h) {
    return static_cast<std::size_t>((h * 0x9e3779b97f4a7c15ull) >> (64 - filter_bits));
  }

  std::map<std::size_t, length_slot> by_length_;
  std::vector<std::uint32_t> filter_ = std::vector<std::uint32_t>(std::size_t{1} << filter_bits, 0);
};

template <class Key>
void index_add(std::unordered_map<Key, std::vector<std::uint32_t>>& idx, Key k, std::uint32_t e) {
  idx[k].push_back(e);
}

template <class Key>
void index_remove(std::unordered_map<Key, std::vector<std::uint32_t>>& idx, Key k, std::uint32_t e) {
  auto it = idx.find(k);
  if (it == idx.end())
    return;
  auto& v = it->second;
  v.erase(std::remove(v.begin(), v.end(), e), v.end());
  if (v.empty())
    idx.erase(it);
}

} // namespace

const ledger_entry& resolve_ambiguity(std::span<const ledger_entry> candidates,
                                      const packet_record& packet) {
  const ledger_entry* best = nullptr;
  for (const auto& c : candidates) {
    if (c.probe->send_time > packet.recv_time)
      continue;
    if (!best || precedes(*c.probe, c.probe_index, *best->probe, best->probe_index))
      best = &c;
  }
  if (!best)
    throw data_error("no candidate probe was sent before the packet arrived");
  return *best;
}

struct stream_matcher::impl {
  struct state {
    time_us expiry = 0;
    bool live = false;
    std::string dotted; // DNS only: lowercase dotted and wire-form needles
    std::string wire;
  };

  std::span<const probe_record> probes;
  match_config config;
  std::vector<state> states;
  std::size_t next_probe = 0;
  std::size_t live = 0;
  time_us watermark = std::numeric_limits<time_us>::min();
  time_us last_probe_time = std::numeric_limits<time_us>::min();
  bool seen_packet = false;

  using heap_item = std::pair<time_us, std::uint32_t>;
  std::priority_queue<heap_item, std::vector<heap_item>, std::greater<>> expiries;
  std::deque<std::uint32_t> admission_order;

  qname_index qnames;
  std::unordered_map<std::uint16_t, std::vector<std::uint32_t>> by_echo_id;
  std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> by_seq;
  std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> by_target;

  match_counters counters;

  // scratch
  std::string lowered;
  std::array<std::vector<std::uint32_t>, 5> cand;

  impl(std::span<const probe_record> p, match_config c)
    : probes(p), config(c), states(p.size()) {
    config.validate();
  }

  void admit(std::uint32_t i) {
    const auto& p = probes[i];
    if (p.send_time + config.disorder_tolerance < last_probe_time)
      throw data_error("probe ledger is not sorted by send_time (regression at record "
                       + std::to_string(i + 1) + "); sort it first");
    last_probe_time = std::max(last_probe_time, p.send_time);
    if (live >= config.ledger_capacity)
      evict_oldest();
    auto& s = states[i];
    s.live = true;
    s.expiry = p.send_time + config.expiry_window;
    ++live;
    expiries.emplace(s.expiry, i);
    admission_order.push_back(i);
    by_target[p.target.value].push_back(i);
    std::visit(
      [&](const auto& tok) {
        using T = std::decay_t<decltype(tok)>;
        if constexpr (std::is_same_v<T, dns_qname>) {
          s.dotted = tok.name;
          s.wire = wire::dns_wire_name(tok.name);
          qnames.add(i, s.dotted);
          qnames.add(i, s.wire);
        } else if constexpr (std::is_same_v<T, icmp_echo_id>) {
          index_add(by_echo_id, tok.id, i);
        } else if constexpr (std::is_same_v<T, tcp_seq>) {
          index_add(by_seq, tok.seq, i);
        }
      },
      p.token);
  }

  void remove(std::uint32_t i) {
    auto& s = states[i];
    if (!s.live)
      return;
    s.live = false;
    --live;
    const auto& p = probes[i];
    index_remove(by_target, p.target.value, i);
    std::visit(
      [&](const auto& tok) {
        using T = std::decay_t<decltype(tok)>;
        if constexpr (std::is_same_v<T, dns_qname>) {
          qnames.remove(i, s.dotted);
          qnames.remove(i, s.wire);
          s.dotted.clear();
          s.wire.clear();
          s.dotted.shrink_to_fit();
          s.wire.shrink_to_fit();
        } else if constexpr (std::is_same_v<T, icmp_echo_id>) {
          index_remove(by_echo_id, tok.id, i);
        } else if constexpr (std::is_same_v<T, tcp_seq>) {
          index_remove(by_seq, tok.seq, i);
        }
      },
      p.token);
  }

  void evict_oldest() {
    while (!admission_order.empty()) {
      const auto i = admission_order.front();
      admission_order.pop_front();
      if (states[i].live) {
        remove(i);
        ++counters.evicted;
        return;
      }
    }
  }

  void expire(time_us horizon) {
    while (!expiries.empty() && expiries.top().first < horizon) {
      const auto [recorded, i] = expiries.top();
      expiries.pop();
      auto& s = states[i];
      if (!s.live)
        continue;
      if (s.expiry > recorded)
        expiries.emplace(s.expiry, i); // refreshed since it was queued
      else
        remove(i);
    }
    while (!admission_order.empty() && !states[admission_order.front()].live)
      admission_order.pop_front();
  }

  bool usable(std::uint32_t i, time_us t) const {
    const auto& s = states[i];
    return s.live && probes[i].send_time <= t && t <= s.expiry;
  }

  void collect(const std::vector<std::uint32_t>* bucket, time_us t, std::vector<std::uint32_t>& out,
               bool tcp_only = false) {
    if (!bucket)
      return;
    for (auto i : *bucket)
      if (usable(i, t) && (!tcp_only || is_tcp(probes[i].protocol)))
        out.push_back(i);
  }

  template <class Map, class Key>
  static const std::vector<std::uint32_t>* find(const Map& m, Key k) {
    auto it = m.find(k);
    return it == m.end() ? nullptr : &it->second;
  }

  std::optional<attribution> push(const packet_record& pkt) {
    const time_us t = pkt.recv_time;
    if (seen_packet && t + config.disorder_tolerance < watermark)
      throw data_error("packet trace is not sorted by recv_time (regression of "
                       + std::to_string(watermark - t) + " us); sort it first");
    seen_packet = true;
    watermark = std::max(watermark, t);

    while (next_probe < probes.size() && probes[next_probe].send_time <= watermark)
      admit(static_cast<std::uint32_t>(next_probe++));
    expire(watermark - config.disorder_tolerance);

    for (auto& c : cand)
      c.clear();
    auto& ps1 = cand[0];
    auto& ps2 = cand[1];
    auto& ps3 = cand[2];
    auto& pa1 = cand[3];
    auto& pa2 = cand[4];

    if (pkt.transport == transport::other) {
      ++counters.other_transport;
    } else {
      if (!pkt.payload_text.empty() && !qnames.empty()) {
        lowered.resize(pkt.payload_text.size());
        std::transform(pkt.payload_text.begin(), pkt.payload_text.end(), lowered.begin(),
                       [](char c) { return static_cast<char>(lower(static_cast<unsigned char>(c))); });
        std::vector<std::uint32_t> hits;
        qnames.search(lowered, hits);
        std::sort(hits.begin(), hits.end());
        hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
        for (auto i : hits)
          if (usable(i, t))
            ps1.push_back(i);
      }
      switch (pkt.transport) {
        case transport::tcp: {
          const auto flags = pkt.tcp_flags.value_or(0);
          if ((flags & (tcp_flag::syn | tcp_flag::ack)) == (tcp_flag::syn | tcp_flag::ack)
              && pkt.tcp_ack) {
            const auto ack = *pkt.tcp_ack;
            if (config.ack_mode != ack_mode::seq_exact)
              collect(find(by_seq, static_cast<std::uint32_t>(ack - 1)), t, ps2, true);
            if (config.ack_mode != ack_mode::seq_plus_one)
              collect(find(by_seq, ack), t, ps2, true);
          }
          if (pkt.dst_port == config.ephemeral_port)
            collect(find(by_target, pkt.src_ip.value), t, pa2);
          break;
        }
        case transport::udp:
          if (pkt.dst_port == config.ephemeral_port)
            collect(find(by_target, pkt.src_ip.value), t, pa2);
          break;
        case transport::icmp:
          if (pkt.icmp_type == icmp_type::echo_reply && pkt.icmp_echo_id)
            collect(find(by_echo_id, *pkt.icmp_echo_id), t, ps3);
          if (pkt.quoted_dst_ip)
            collect(find(by_target, pkt.quoted_dst_ip->value), t, pa1);
          break;
        case transport::other:
          break;
      }
    }

    std::optional<attribution> result;
    for (std::size_t r = 0; r < cand.size(); ++r) {
      auto& c = cand[r];
      if (c.empty())
        continue;
      for (auto i : c) {
        auto& s = states[i];
        s.expiry = std::max(s.expiry, t + config.expiry_window);
      }
      if (!result) {
        std::uint32_t best = c.front();
        for (auto i : c)
          if (precedes(probes[i], i, probes[best], best))
            best = i;
        result = attribution{best, static_cast<match_rule>(r), false};
      }
    }

    if (result) {
      ++counters.matched_packets;
      counters.matched_bytes += pkt.size;
      ++counters.per_rule[static_cast<std::size_t>(result->rule)];
      if (result->rule == match_rule::ps2) {
        const auto seq = std::get<tcp_seq>(probes[result->probe_index].token).seq;
        result->ack_exact = *pkt.tcp_ack == seq;
        ++(result->ack_exact ? counters.ack_exact : counters.ack_plus_one);
      }
    } else {
      ++counters.unmatched_packets;
      counters.unmatched_bytes += pkt.size;
    }
    return result;
  }
};

stream_matcher::stream_matcher(std::span<const probe_record> probes, match_config config)
  : impl_(std::make_unique<impl>(probes, config)) {}

stream_matcher::~stream_matcher() = default;
stream_matcher::stream_matcher(stream_matcher&&) noexcept = default;
stream_matcher& stream_matcher::operator=(stream_matcher&&) noexcept = default;

std::optional<attribution> stream_matcher::push(const packet_record& packet) {
  return impl_->push(packet);
}

const match_counters& stream_matcher::counters() const {
  return impl_->counters;
}

std::size_t stream_matcher::live_entries() const {
  return impl_->live;
}

match_report match_stream(std::span<const probe_record> probes,
                          std::span<const packet_record> packets, const match_config& config) {
  stream_matcher matcher(probes, config);
  match_report report;
  report.attributions.reserve(packets.size());
  std::vector<std::pair<std::uint32_t, std::uint32_t>> links; // probe, packet
  for (std::size_t k = 0; k < packets.size(); ++k) {
    auto a = matcher.push(packets[k]);
    if (a)
      links.emplace_back(static_cast<std::uint32_t>(a->probe_index), static_cast<std::uint32_t>(k));
    report.attributions.push_back(a);
  }
  report.counters = matcher.counters();

  std::stable_sort(links.begin(), links.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first)
      return a.first < b.first;
    return packets[a.second].recv_time < packets[b.second].recv_time;
  });
  for (std::size_t i = 0; i < links.size();) {
    matched_response r;
    r.probe = probes[links[i].first];
    std::size_t j = i;
    for (; j < links.size() && links[j].first == links[i].first; ++j)
      r.packets.push_back({packets[links[j].second], report.attributions[links[j].second]->rule});
    report.responses.push_back(std::move(r));
    i = j;
  }
  return report;
}

void sort_by_time(std::vector<probe_record>& probes) {
  std::stable_sort(probes.begin(), probes.end(),
                   [](const auto& a, const auto& b) { return a.send_time < b.send_time; });
}

void sort_by_time(std::vector<packet_record>& packets) {
  std::stable_sort(packets.begin(), packets.end(),
                   [](const auto& a, const auto& b) { return a.recv_time < b.recv_time; });
}

} // namespace bbkit
