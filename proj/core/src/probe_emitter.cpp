#include "bbkit/probe_emitter.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

#include "bbkit/errors.hpp"
#include "bbkit/wire.hpp"

namespace bbkit {

const std::vector<cidr>& lab_prefixes() {
  static const std::vector<cidr> prefixes{
    parse_cidr("10.0.0.0/8"),      parse_cidr("172.16.0.0/12"),   parse_cidr("192.168.0.0/16"),
    parse_cidr("127.0.0.0/8"),     parse_cidr("198.18.0.0/15"),   parse_cidr("192.0.2.0/24"),
    parse_cidr("198.51.100.0/24"), parse_cidr("203.0.113.0/24"),
  };
  return prefixes;
}

void check_allowed_prefixes(std::span<const cidr> allowed) {
  if (allowed.empty())
    throw validation_error("emission requires at least one --allow-prefix");
  for (const auto& p : allowed) {
    const auto& lab = lab_prefixes();
    if (std::none_of(lab.begin(), lab.end(), [&](const cidr& l) { return l.contains(p); }))
      throw validation_error("allowed prefix " + to_string(p)
                             + " is not a private, loopback, benchmark or documentation range");
  }
}

pcap_probe_sink::pcap_probe_sink(const std::filesystem::path& path)
  : out_(path, std::ios::binary), writer_(out_) {
  if (!out_)
    throw data_error("cannot open '" + path.string() + "' for writing");
}

void pcap_probe_sink::send(const probe_record& probe, std::span<const std::uint8_t> datagram) {
  writer_.write_datagram(probe.send_time, datagram,
                         std::max<std::uint32_t>(probe.probe_size,
                                                 static_cast<std::uint32_t>(datagram.size() + 14)));
  out_.flush();
}

raw_socket_sink::raw_socket_sink() {
  fd_ = ::socket(AF_INET, SOCK_RAW, IPPROTO_RAW);
  if (fd_ < 0)
    throw error(std::string("cannot open raw socket: ") + std::strerror(errno));
  int on = 1;
  if (::setsockopt(fd_, IPPROTO_IP, IP_HDRINCL, &on, sizeof on) != 0) {
    ::close(fd_);
    throw error(std::string("IP_HDRINCL failed: ") + std::strerror(errno));
  }
}

raw_socket_sink::~raw_socket_sink() {
  if (fd_ >= 0)
    ::close(fd_);
}

void raw_socket_sink::send(const probe_record& probe, std::span<const std::uint8_t> datagram) {
  sockaddr_in to{};
  to.sin_family = AF_INET;
  to.sin_addr.s_addr = htonl(probe.target.value);
  if (::sendto(fd_, datagram.data(), datagram.size(), 0, reinterpret_cast<sockaddr*>(&to),
               sizeof to)
      < 0)
    throw error(std::string("sendto failed: ") + std::strerror(errno));
}

probe_emitter::probe_emitter(std::vector<cidr> allowed, ipv4 scanner,
                             std::unique_ptr<probe_sink> sink)
  : allowed_(std::move(allowed)), scanner_(scanner), sink_(std::move(sink)) {
  check_allowed_prefixes(allowed_);
}

bool probe_emitter::permitted(ipv4 target) const {
  return std::any_of(allowed_.begin(), allowed_.end(),
                     [&](const cidr& p) { return p.contains(target); });
}

void probe_emitter::emit_all(std::span<const probe_record> probes, bool pace) {
  for (const auto& p : probes)
    if (!permitted(p.target))
      throw validation_error("refusing to emit: target " + to_string(p.target)
                             + " is outside the allowed prefixes");
  if (probes.empty())
    return;
  const auto wall_start = std::chrono::steady_clock::now();
  const auto ledger_start = probes.front().send_time;
  for (const auto& p : probes) {
    if (pace)
      std::this_thread::sleep_until(wall_start + std::chrono::microseconds(p.send_time - ledger_start));
    const auto datagram = wire::encode_probe(p, scanner_);
    sink_->send(p, datagram);
    ++sent_;
  }
}

} // namespace bbkit
