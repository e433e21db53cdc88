#include "bbkit/attack_sim.hpp"

#include <algorithm>

#include "bbkit/errors.hpp"

namespace bbkit {

void attack_options::validate() const {
  if (repeat < 1)
    throw validation_error("repeat must be at least 1");
  if (period_s < 0)
    throw validation_error("period must not be negative");
  if (repeat > 1 && period_s == 0)
    throw validation_error("repeat needs a positive period");
}

std::optional<double> attack_timeline::first_second_packet_amplification() const {
  return amplification(static_cast<double>(at(0).packets), static_cast<double>(probes.packets));
}

std::optional<double> attack_timeline::first_second_byte_amplification() const {
  return amplification(static_cast<double>(at(0).bytes), static_cast<double>(probes.bytes));
}

namespace {

void add_to(std::vector<attack_bin>& bins, std::size_t bin, std::uint64_t packets, std::uint64_t bytes) {
  if (bin >= bins.size())
    bins.resize(bin + 1);
  bins[bin].packets += packets;
  bins[bin].bytes += bytes;
}

} // namespace

attack_timeline simulate_attack(std::span<const attack_input> inputs, const attack_options& options) {
  options.validate();
  attack_timeline t;
  for (const auto& in : inputs) {
    t.protocols.insert(in.protocol);
    t.probes.packets += in.probes.packets * static_cast<std::uint64_t>(options.repeat);
    t.probes.bytes += in.probes.bytes * static_cast<std::uint64_t>(options.repeat);
    for (const auto& r : in.responses) {
      const time_us shift = r.probe.send_time - in.rescan_start;
      for (const auto& m : r.packets) {
        time_us shifted = m.packet.recv_time - shift - in.rescan_start;
        if (shifted < 0) {
          shifted = 0;
          t.skewed_packets += static_cast<std::uint64_t>(options.repeat);
        }
        const auto base = static_cast<std::size_t>(shifted / us_per_second);
        for (int k = 0; k < options.repeat; ++k)
          add_to(t.bins, base + static_cast<std::size_t>(k * options.period_s), 1, m.packet.size);
        t.total_packets += static_cast<std::uint64_t>(options.repeat);
        t.total_bytes += std::uint64_t{m.packet.size} * static_cast<std::uint64_t>(options.repeat);
      }
    }
  }
  return t;
}

attack_timeline combine(const attack_timeline& a, const attack_timeline& b) {
  attack_timeline t = a;
  for (std::size_t s = 0; s < b.bins.size(); ++s)
    add_to(t.bins, s, b.bins[s].packets, b.bins[s].bytes);
  t.protocols.insert(b.protocols.begin(), b.protocols.end());
  t.total_packets += b.total_packets;
  t.total_bytes += b.total_bytes;
  t.skewed_packets += b.skewed_packets;
  t.probes.packets += b.probes.packets;
  t.probes.bytes += b.probes.bytes;
  return t;
}

} // namespace bbkit
