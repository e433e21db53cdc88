#include "bbkit/pcap.hpp"

#include <array>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "bbkit/errors.hpp"
#include "bbkit/wire.hpp"

namespace bbkit {

namespace {

constexpr std::size_t max_frame = 262144;
constexpr std::size_t ethernet_header = 14;

std::uint32_t load32(const std::uint8_t* p, bool swap) {
  std::uint32_t v = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8)
                    | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
  if (swap)
    v = ((v & 0xff) << 24) | ((v & 0xff00) << 8) | ((v >> 8) & 0xff00) | (v >> 24);
  return v;
}

void store32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v), static_cast<char>(v >> 8),
                              static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
  out.write(b.data(), b.size());
}

void store16(std::ostream& out, std::uint16_t v) {
  const std::array<char, 2> b{static_cast<char>(v), static_cast<char>(v >> 8)};
  out.write(b.data(), b.size());
}

// Strips the link layer; returns false for non-IPv4 frames.
bool ip_payload(std::uint32_t linktype, std::span<const std::uint8_t> frame,
                std::span<const std::uint8_t>& ip, std::string& why) {
  auto ethertype_at = [&](std::size_t at) -> int {
    if (frame.size() < at + 2)
      return -1;
    return (frame[at] << 8) | frame[at + 1];
  };
  switch (linktype) {
    case linktype_raw:
    case linktype_ipv4:
      ip = frame;
      return true;
    case linktype_ethernet: {
      std::size_t at = 12;
      int type = ethertype_at(at);
      while (type == 0x8100 || type == 0x88a8) {
        at += 4;
        type = ethertype_at(at);
      }
      if (type == 0x86dd) {
        why = "IPv6 frame; bbkit handles IPv4 only";
        return false;
      }
      if (type != 0x0800) {
        why = "non-IPv4 ethernet frame";
        return false;
      }
      ip = frame.subspan(at + 2);
      return true;
    }
    case linktype_linux_sll: {
      int type = ethertype_at(14);
      if (type != 0x0800) {
        why = type == 0x86dd ? "IPv6 frame; bbkit handles IPv4 only" : "non-IPv4 cooked frame";
        return false;
      }
      ip = frame.subspan(16);
      return true;
    }
    default:
      why = "unsupported link type";
      return false;
  }
}

} // namespace

bool looks_like_pcap(std::istream& in) {
  std::array<std::uint8_t, 4> magic{};
  const auto pos = in.tellg();
  in.read(reinterpret_cast<char*>(magic.data()), magic.size());
  const bool got = in.gcount() == 4;
  in.clear();
  in.seekg(pos);
  if (!got)
    return false;
  const auto le = load32(magic.data(), false);
  const auto be = load32(magic.data(), true);
  return le == pcap_magic_us || be == pcap_magic_us || le == pcap_magic_ns || be == pcap_magic_ns;
}

parse_result<packet_record> read_pcap(std::istream& in) {
  std::array<std::uint8_t, 24> header{};
  in.read(reinterpret_cast<char*>(header.data()), header.size());
  if (in.gcount() != 24)
    throw data_error("pcap file shorter than its global header");
  bool swap = false;
  bool nanos = false;
  const auto magic = load32(header.data(), false);
  if (magic == pcap_magic_us || magic == pcap_magic_ns) {
    nanos = magic == pcap_magic_ns;
  } else {
    const auto swapped = load32(header.data(), true);
    if (swapped != pcap_magic_us && swapped != pcap_magic_ns)
      throw data_error("not a pcap file (bad magic)");
    swap = true;
    nanos = swapped == pcap_magic_ns;
  }
  const auto linktype = load32(header.data() + 20, swap) & 0x0fffffff;
  if (linktype != linktype_ethernet && linktype != linktype_raw && linktype != linktype_ipv4
      && linktype != linktype_linux_sll)
    throw data_error("unsupported pcap link type " + std::to_string(linktype));

  parse_result<packet_record> result;
  auto reject = [&](std::size_t frame_no, const std::string& why) {
    ++result.rejected;
    if (result.diagnostics.size() < max_diagnostics)
      result.diagnostics.push_back("frame " + std::to_string(frame_no) + ": " + why);
  };

  std::vector<std::uint8_t> frame;
  std::array<std::uint8_t, 16> rec{};
  for (std::size_t frame_no = 1;; ++frame_no) {
    in.read(reinterpret_cast<char*>(rec.data()), rec.size());
    if (in.gcount() == 0)
      break;
    if (in.gcount() != 16) {
      reject(frame_no, "truncated record header");
      break;
    }
    const auto sec = load32(rec.data(), swap);
    const auto frac = load32(rec.data() + 4, swap);
    const auto incl = load32(rec.data() + 8, swap);
    const auto orig = load32(rec.data() + 12, swap);
    if (incl > max_frame) {
      // The length field itself is garbage; nothing after it can be trusted.
      reject(frame_no, "captured length out of range");
      break;
    }
    frame.resize(incl);
    in.read(reinterpret_cast<char*>(frame.data()), incl);
    if (static_cast<std::uint32_t>(in.gcount()) != incl) {
      reject(frame_no, "truncated frame data");
      break;
    }
    const time_us ts = time_us{sec} * us_per_second + (nanos ? frac / 1000 : frac);
    std::span<const std::uint8_t> ip;
    std::string why;
    if (!ip_payload(linktype, frame, ip, why)) {
      reject(frame_no, why);
      continue;
    }
    // orig_len counts the link header; packet sizes are IP-layer.
    const auto link_bytes = static_cast<std::uint32_t>(frame.size() - ip.size());
    const auto wire = orig > link_bytes ? orig - link_bytes : static_cast<std::uint32_t>(ip.size());
    auto packet = wire::decode_ipv4(ip, wire, ts, &why);
    if (!packet) {
      reject(frame_no, why);
      continue;
    }
    result.records.push_back(std::move(*packet));
  }
  if (in.bad())
    throw data_error("failed reading pcap stream");
  return result;
}

parse_result<packet_record> read_pcap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw data_error("cannot open '" + path.string() + "' for reading");
  return read_pcap(in);
}

pcap_writer::pcap_writer(std::ostream& out, std::uint32_t snaplen) : out_(out), snaplen_(snaplen) {
  store32(out_, pcap_magic_us);
  store16(out_, 2);
  store16(out_, 4);
  store32(out_, 0);
  store32(out_, 0);
  store32(out_, snaplen_);
  store32(out_, linktype_ethernet);
}

void pcap_writer::write_datagram(time_us ts, std::span<const std::uint8_t> ip_datagram,
                                 std::uint32_t wire_size) {
  std::vector<std::uint8_t> frame(ethernet_header, 0);
  frame[0] = 0x02; // locally administered MACs
  frame[6] = 0x02;
  frame[5] = 0x01;
  frame[11] = 0x02;
  frame[12] = 0x08;
  frame.insert(frame.end(), ip_datagram.begin(), ip_datagram.end());
  const auto incl = static_cast<std::uint32_t>(std::min<std::size_t>(frame.size(), snaplen_));
  const auto orig = std::max<std::uint32_t>(wire_size + ethernet_header, incl);
  store32(out_, static_cast<std::uint32_t>(ts / us_per_second));
  store32(out_, static_cast<std::uint32_t>(ts % us_per_second));
  store32(out_, incl);
  store32(out_, orig);
  out_.write(reinterpret_cast<const char*>(frame.data()), incl);
  ++frames_;
}

void pcap_writer::write(const packet_record& packet) {
  write_datagram(packet.recv_time, wire::encode_packet(packet), packet.size);
}

void write_pcap(const std::filesystem::path& path, std::span<const packet_record> packets) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw data_error("cannot open '" + path.string() + "' for writing");
  pcap_writer writer(out);
  for (const auto& p : packets)
    writer.write(p);
  if (!out)
    throw data_error("failed writing '" + path.string() + "'");
}

} // namespace bbkit
