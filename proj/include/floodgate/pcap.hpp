#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "floodgate/error.hpp"
#include "floodgate/io_util.hpp"

namespace floodgate {

struct Timestamp {
  std::uint32_t sec = 0;
  std::uint32_t usec = 0;

  double seconds() const { return static_cast<double>(sec) + static_cast<double>(usec) * 1e-6; }

  static Timestamp from_seconds(double s) {
    auto micros = static_cast<std::uint64_t>(std::llround(s * 1e6));
    return {static_cast<std::uint32_t>(micros / 1000000), static_cast<std::uint32_t>(micros % 1000000)};
  }

  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

/// A captured frame as stored in a pcap record.
struct RawPacket {
  Timestamp ts;
  std::vector<std::uint8_t> frame;
  std::uint32_t original_len = 0;  // 0 means "same as frame.size()"

  friend bool operator==(const RawPacket&, const RawPacket&) = default;
};

enum class LinkProtocol : std::uint8_t { IPv4, Other };
enum class Transport : std::uint8_t { TCP, UDP, OtherIp, NonIp };

struct TcpFlags {
  bool syn = false;
  bool ack = false;
  bool fin = false;
  bool rst = false;
  bool psh = false;
  bool urg = false;

  static TcpFlags from_byte(std::uint8_t b) {
    return {.syn = (b & 0x02) != 0,
            .ack = (b & 0x10) != 0,
            .fin = (b & 0x01) != 0,
            .rst = (b & 0x04) != 0,
            .psh = (b & 0x08) != 0,
            .urg = (b & 0x20) != 0};
  }

  friend bool operator==(const TcpFlags&, const TcpFlags&) = default;
};

inline constexpr std::size_t kPayloadPrefixLen = 8;

struct PacketMeta {
  Timestamp ts;
  std::uint32_t captured_len = 0;
  std::uint32_t original_len = 0;
  LinkProtocol link = LinkProtocol::Other;
  Transport transport = Transport::NonIp;
  std::uint32_t src_ip = 0;
  std::uint32_t dst_ip = 0;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  TcpFlags flags;
  std::uint8_t ttl = 0;
  std::uint32_t payload_len = 0;
  std::uint8_t prefix_len = 0;
  std::array<std::uint8_t, kPayloadPrefixLen> payload_prefix{};

  bool payload_starts_with(std::string_view s) const {
    if (s.size() > prefix_len) return false;
    return std::equal(s.begin(), s.end(), payload_prefix.begin(),
                      [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; });
  }
};

namespace detail {

inline std::uint16_t be16(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint16_t>((b[off] << 8) | b[off + 1]);
}
inline std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

inline void fill_prefix(PacketMeta& m, std::span<const std::uint8_t> frame, std::size_t offset) {
  if (offset >= frame.size() || m.payload_len == 0) return;
  const auto n = std::min({kPayloadPrefixLen, frame.size() - offset, std::size_t{m.payload_len}});
  std::copy_n(frame.begin() + static_cast<std::ptrdiff_t>(offset), n, m.payload_prefix.begin());
  m.prefix_len = static_cast<std::uint8_t>(n);
}

}  // namespace detail

inline constexpr std::size_t kEthernetHeaderLen = 14;
inline constexpr std::uint16_t kEtherTypeIPv4 = 0x0800;

/// Decodes Ethernet / IPv4 / TCP|UDP headers. Never throws: anything that
/// fails to parse leaves the packet at the deepest layer reached.
inline PacketMeta decode_frame(std::span<const std::uint8_t> frame, Timestamp ts, std::uint32_t original_len = 0) {
  PacketMeta m;
  m.ts = ts;
  m.captured_len = static_cast<std::uint32_t>(frame.size());
  m.original_len = std::max(original_len, m.captured_len);

  if (frame.size() < kEthernetHeaderLen || detail::be16(frame, 12) != kEtherTypeIPv4) return m;
  const auto ip = frame.subspan(kEthernetHeaderLen);
  if (ip.size() < 20 || (ip[0] >> 4) != 4) return m;
  const std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
  if (ihl < 20 || ihl > ip.size()) return m;

  m.link = LinkProtocol::IPv4;
  m.transport = Transport::OtherIp;
  m.ttl = ip[8];
  m.src_ip = detail::be32(ip, 12);
  m.dst_ip = detail::be32(ip, 16);
  const std::uint8_t protocol = ip[9];
  const std::size_t total_len = detail::be16(ip, 2);
  const bool later_fragment = (detail::be16(ip, 6) & 0x1fff) != 0;
  if (later_fragment) return m;

  const auto l4 = ip.subspan(ihl);
  const std::size_t l4_offset = kEthernetHeaderLen + ihl;
  if (protocol == 6 && l4.size() >= 20) {
    const std::size_t data_offset = static_cast<std::size_t>(l4[12] >> 4) * 4;
    m.transport = Transport::TCP;
    m.src_port = detail::be16(l4, 0);
    m.dst_port = detail::be16(l4, 2);
    m.flags = TcpFlags::from_byte(l4[13]);
    const std::size_t headers = ihl + data_offset;
    m.payload_len = total_len > headers ? static_cast<std::uint32_t>(total_len - headers) : 0;
    detail::fill_prefix(m, frame, l4_offset + data_offset);
  } else if (protocol == 17 && l4.size() >= 8) {
    m.transport = Transport::UDP;
    m.src_port = detail::be16(l4, 0);
    m.dst_port = detail::be16(l4, 2);
    const std::size_t udp_len = detail::be16(l4, 4);
    m.payload_len = udp_len > 8 ? static_cast<std::uint32_t>(udp_len - 8) : 0;
    detail::fill_prefix(m, frame, l4_offset + 8);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Classic pcap container

inline constexpr std::uint32_t kPcapMagic = 0xa1b2c3d4;
inline constexpr std::uint32_t kPcapMagicSwapped = 0xd4c3b2a1;
inline constexpr std::size_t kPcapGlobalHeaderLen = 24;
inline constexpr std::size_t kPcapRecordHeaderLen = 16;
inline constexpr std::size_t kMaxFrameLen = 65535;
inline constexpr std::uint32_t kLinkTypeEthernet = 1;

namespace detail {

inline void put_le16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void put_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

class ByteCursor {
 public:
  ByteCursor(std::span<const std::uint8_t> data, bool swapped) : data_(data), swapped_(swapped) {}

  std::size_t remaining() const { return data_.size() - pos_; }

  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{data_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
    pos_ += 4;
    return swapped_ ? byteswap(v) : v;
  }
  std::uint16_t u16() {
    auto v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
    pos_ += 2;
    return swapped_ ? static_cast<std::uint16_t>((v >> 8) | (v << 8)) : v;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  static std::uint32_t byteswap(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xff00) | ((v << 8) & 0xff0000) | (v << 24);
  }

  std::span<const std::uint8_t> data_;
  bool swapped_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Serializes packets as a little-endian, microsecond-resolution pcap image.
inline std::vector<std::uint8_t> encode_pcap(std::span<const RawPacket> packets) {
  std::vector<std::uint8_t> out;
  detail::put_le32(out, kPcapMagic);
  detail::put_le16(out, 2);
  detail::put_le16(out, 4);
  detail::put_le32(out, 0);  // thiszone
  detail::put_le32(out, 0);  // sigfigs
  detail::put_le32(out, static_cast<std::uint32_t>(kMaxFrameLen));
  detail::put_le32(out, kLinkTypeEthernet);
  for (const auto& p : packets) {
    if (p.frame.size() > kMaxFrameLen)
      throw Error(ErrorCode::FrameTooLarge, std::to_string(p.frame.size()) + "-byte frame exceeds 65535");
    const auto incl = static_cast<std::uint32_t>(p.frame.size());
    detail::put_le32(out, p.ts.sec);
    detail::put_le32(out, p.ts.usec);
    detail::put_le32(out, incl);
    detail::put_le32(out, std::max(incl, p.original_len));
    out.insert(out.end(), p.frame.begin(), p.frame.end());
  }
  return out;
}

inline void write_pcap(const std::filesystem::path& path, std::span<const RawPacket> packets) {
  const auto bytes = encode_pcap(packets);
  atomic_write(
      path,
      [&](std::ostream& os) { os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())); },
      true);
}

inline std::vector<RawPacket> decode_pcap(std::span<const std::uint8_t> data) {
  if (data.size() < 4) throw Error(ErrorCode::BadMagic, "file too short for a pcap magic number");
  const std::uint32_t magic =
      std::uint32_t{data[0]} | (std::uint32_t{data[1]} << 8) | (std::uint32_t{data[2]} << 16) | (std::uint32_t{data[3]} << 24);
  if (magic != kPcapMagic && magic != kPcapMagicSwapped) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", magic);
    throw Error(ErrorCode::BadMagic, std::string("unrecognized pcap magic ") + buf);
  }
  if (data.size() < kPcapGlobalHeaderLen) throw Error(ErrorCode::TruncatedRecord, "truncated pcap global header");

  detail::ByteCursor cur(data, magic == kPcapMagicSwapped);
  cur.u32();  // magic
  cur.u16();  // version major
  cur.u16();  // version minor
  cur.u32();  // thiszone
  cur.u32();  // sigfigs
  cur.u32();  // snaplen
  const std::uint32_t linktype = cur.u32();
  if (linktype != kLinkTypeEthernet)
    throw Error(ErrorCode::UnsupportedLinkType, "linktype " + std::to_string(linktype) + " (only Ethernet is supported)");

  std::vector<RawPacket> packets;
  while (cur.remaining() > 0) {
    const auto index = std::to_string(packets.size());
    if (cur.remaining() < kPcapRecordHeaderLen)
      throw Error(ErrorCode::TruncatedRecord, "record " + index + ": incomplete record header");
    RawPacket p;
    p.ts.sec = cur.u32();
    p.ts.usec = cur.u32();
    const std::uint32_t incl = cur.u32();
    p.original_len = cur.u32();
    if (incl > cur.remaining())
      throw Error(ErrorCode::TruncatedRecord, "record " + index + " claims " + std::to_string(incl) +
                                                  " bytes but only " + std::to_string(cur.remaining()) + " remain");
    const auto bytes = cur.take(incl);
    p.frame.assign(bytes.begin(), bytes.end());
    packets.push_back(std::move(p));
  }
  return packets;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<RawPacket> read_pcap_frames(const std::filesystem::path& path) {
  return decode_pcap(read_file_bytes(path));
}

/// One PacketMeta per record, in file order.
inline std::vector<PacketMeta> read_pcap(const std::filesystem::path& path) {
  std::vector<PacketMeta> metas;
  for (const auto& p : read_pcap_frames(path)) metas.push_back(decode_frame(p.frame, p.ts, p.original_len));
  return metas;
}

}  // namespace floodgate
