#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "floodgate/pcap.hpp"

namespace floodgate {

/// IPv4 address from dotted octets.
constexpr std::uint32_t ipv4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
  return (std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) | (std::uint32_t{c} << 8) | d;
}

inline std::string format_ipv4(std::uint32_t addr) {
  return std::to_string(addr >> 24) + '.' + std::to_string((addr >> 16) & 0xff) + '.' +
         std::to_string((addr >> 8) & 0xff) + '.' + std::to_string(addr & 0xff);
}

namespace tcp_flag {
inline constexpr std::uint8_t kFin = 0x01;
inline constexpr std::uint8_t kSyn = 0x02;
inline constexpr std::uint8_t kRst = 0x04;
inline constexpr std::uint8_t kPsh = 0x08;
inline constexpr std::uint8_t kAck = 0x10;
inline constexpr std::uint8_t kUrg = 0x20;
}  // namespace tcp_flag

struct Endpoints {
  std::uint32_t src_ip = 0;
  std::uint32_t dst_ip = 0;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t ttl = 64;
};

namespace detail {

inline void put_be16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}
inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline std::uint16_t ipv4_checksum(std::span<const std::uint8_t> header) {
  std::uint32_t sum = 0;
  for (std::size_t i = 0; i + 1 < header.size(); i += 2) sum += (std::uint32_t{header[i]} << 8) | header[i + 1];
  while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
  return static_cast<std::uint16_t>(~sum);
}

inline std::vector<std::uint8_t> ethernet_ipv4(const Endpoints& ep, std::uint8_t protocol, std::size_t l4_len) {
  std::vector<std::uint8_t> f;
  f.reserve(kEthernetHeaderLen + 20 + l4_len);
  // Locally administered MACs derived from the addresses.
  f.insert(f.end(), {0x02, 0x00});
  put_be32(f, ep.dst_ip);
  f.insert(f.end(), {0x02, 0x00});
  put_be32(f, ep.src_ip);
  put_be16(f, kEtherTypeIPv4);

  const std::size_t ip_start = f.size();
  f.push_back(0x45);  // version 4, IHL 5
  f.push_back(0x00);
  put_be16(f, static_cast<std::uint16_t>(20 + l4_len));
  put_be16(f, 0);       // identification
  put_be16(f, 0x4000);  // DF
  f.push_back(ep.ttl);
  f.push_back(protocol);
  put_be16(f, 0);  // checksum placeholder
  put_be32(f, ep.src_ip);
  put_be32(f, ep.dst_ip);
  const auto csum = ipv4_checksum(std::span<const std::uint8_t>(f).subspan(ip_start, 20));
  f[ip_start + 10] = static_cast<std::uint8_t>(csum >> 8);
  f[ip_start + 11] = static_cast<std::uint8_t>(csum);
  return f;
}

}  // namespace detail

/// Ethernet + IPv4 + 20-byte TCP header + payload. L4 checksums are left zero.
inline std::vector<std::uint8_t> build_tcp_frame(const Endpoints& ep, std::uint8_t flags,
                                                 std::span<const std::uint8_t> payload = {},
                                                 std::uint32_t seq = 0, std::uint32_t ack = 0) {
  auto f = detail::ethernet_ipv4(ep, 6, 20 + payload.size());
  detail::put_be16(f, ep.src_port);
  detail::put_be16(f, ep.dst_port);
  detail::put_be32(f, seq);
  detail::put_be32(f, ack);
  f.push_back(0x50);  // data offset 5 words
  f.push_back(flags);
  detail::put_be16(f, 64240);  // window
  detail::put_be16(f, 0);      // checksum
  detail::put_be16(f, 0);      // urgent pointer
  f.insert(f.end(), payload.begin(), payload.end());
  return f;
}

inline std::vector<std::uint8_t> build_tcp_frame(const Endpoints& ep, std::uint8_t flags, std::string_view payload,
                                                 std::uint32_t seq = 0, std::uint32_t ack = 0) {
  return build_tcp_frame(
      ep, flags, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()),
      seq, ack);
}

/// Ethernet + IPv4 + UDP header + payload.
inline std::vector<std::uint8_t> build_udp_frame(const Endpoints& ep, std::span<const std::uint8_t> payload) {
  auto f = detail::ethernet_ipv4(ep, 17, 8 + payload.size());
  detail::put_be16(f, ep.src_port);
  detail::put_be16(f, ep.dst_port);
  detail::put_be16(f, static_cast<std::uint16_t>(8 + payload.size()));
  detail::put_be16(f, 0);
  f.insert(f.end(), payload.begin(), payload.end());
  return f;
}

}  // namespace floodgate
