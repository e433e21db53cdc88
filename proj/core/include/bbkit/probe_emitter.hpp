#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <vector>

#include "bbkit/model.hpp"
#include "bbkit/pcap.hpp"

namespace bbkit {

/// Ranges probes may be emitted into: RFC 1918, loopback, the benchmark
/// range 198.18.0.0/15 and the three documentation nets.
const std::vector<cidr>& lab_prefixes();

/// Throws validation_error unless every allowed prefix lies inside a lab
/// range.
void check_allowed_prefixes(std::span<const cidr> allowed);

class probe_sink {
public:
  virtual ~probe_sink() = default;
  virtual void send(const probe_record& probe, std::span<const std::uint8_t> datagram) = 0;
};

/// Simulated sink: writes the emitted probes to a pcap file.
class pcap_probe_sink : public probe_sink {
public:
  explicit pcap_probe_sink(const std::filesystem::path& path);
  void send(const probe_record& probe, std::span<const std::uint8_t> datagram) override;

private:
  std::ofstream out_;
  pcap_writer writer_;
};

/// Linux raw IPv4 socket with IP_HDRINCL. Needs CAP_NET_RAW.
class raw_socket_sink : public probe_sink {
public:
  raw_socket_sink();
  ~raw_socket_sink() override;
  raw_socket_sink(const raw_socket_sink&) = delete;
  raw_socket_sink& operator=(const raw_socket_sink&) = delete;

  void send(const probe_record& probe, std::span<const std::uint8_t> datagram) override;

private:
  int fd_ = -1;
};

class probe_emitter {
public:
  /// Validates the allowed prefixes up front.
  probe_emitter(std::vector<cidr> allowed, ipv4 scanner, std::unique_ptr<probe_sink> sink);

  bool permitted(ipv4 target) const;
  /// Refuses (validation_error) before sending anything if any target is
  /// outside the allowed prefixes.
  void emit_all(std::span<const probe_record> probes, bool pace = false);

  std::size_t sent() const { return sent_; }

private:
  std::vector<cidr> allowed_;
  ipv4 scanner_;
  std::unique_ptr<probe_sink> sink_;
  std::size_t sent_ = 0;
};

} // namespace bbkit
