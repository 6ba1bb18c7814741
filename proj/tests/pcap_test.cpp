#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <vector>

#include "floodgate/frames.hpp"
#include "floodgate/pcap.hpp"
#include "floodgate/rng.hpp"

namespace fg = floodgate;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("floodgate_pcap_test_" + name);
}

// Ethernet + IPv4 (IHL 5) + TCP (data offset 5), typed out byte by byte.
std::vector<std::uint8_t> hand_tcp(std::uint8_t flags, std::uint16_t ip_total_len = 40) {
  std::vector<std::uint8_t> f = {
      // ethernet: dst, src, type 0x0800
      0x00, 0x11, 0x22, 0x33, 0x44, 0x55, 0x66, 0x77, 0x88, 0x99, 0xaa, 0xbb, 0x08, 0x00,
      // ipv4: ver/ihl, tos, total len, id, frag, ttl 64, proto 6, csum, src 192.168.1.2, dst 10.0.0.1
      0x45, 0x00, static_cast<std::uint8_t>(ip_total_len >> 8), static_cast<std::uint8_t>(ip_total_len), 0x12,
      0x34, 0x40, 0x00, 0x40, 0x06, 0x00, 0x00, 192, 168, 1, 2, 10, 0, 0, 1,
      // tcp: sport 40000 (0x9c40), dport 80, seq, ack, offset 5, flags, window, csum, urg
      0x9c, 0x40, 0x00, 0x50, 0, 0, 0, 1, 0, 0, 0, 0, 0x50, flags, 0xff, 0xff, 0, 0, 0, 0};
  return f;
}

std::vector<std::uint8_t> hand_udp(std::uint16_t udp_len) {
  const std::uint16_t ip_len = static_cast<std::uint16_t>(20 + udp_len);
  std::vector<std::uint8_t> f = {
      0x00, 0x11, 0x22, 0x33, 0x44, 0x55, 0x66, 0x77, 0x88, 0x99, 0xaa, 0xbb, 0x08, 0x00,
      0x45, 0x00, static_cast<std::uint8_t>(ip_len >> 8), static_cast<std::uint8_t>(ip_len), 0, 0, 0, 0, 0x80, 17,
      0, 0, 1, 2, 3, 4, 5, 6, 7, 8,
      // udp: sport 5353, dport 53, length, checksum
      0x14, 0xe9, 0x00, 0x35, static_cast<std::uint8_t>(udp_len >> 8), static_cast<std::uint8_t>(udp_len), 0, 0};
  f.resize(f.size() + (udp_len - 8), 0xab);
  return f;
}

}  // namespace

TEST(DecodeFrame, HandAssembledSyn) {
  const auto m = fg::decode_frame(hand_tcp(0x02), {100, 5});
  EXPECT_EQ(m.link, fg::LinkProtocol::IPv4);
  EXPECT_EQ(m.transport, fg::Transport::TCP);
  EXPECT_TRUE(m.flags.syn);
  EXPECT_FALSE(m.flags.ack);
  EXPECT_FALSE(m.flags.fin);
  EXPECT_EQ(m.payload_len, 0u);
  EXPECT_EQ(m.src_ip, fg::ipv4(192, 168, 1, 2));
  EXPECT_EQ(m.dst_ip, fg::ipv4(10, 0, 0, 1));
  EXPECT_EQ(m.src_port, 40000);
  EXPECT_EQ(m.dst_port, 80);
  EXPECT_EQ(m.ttl, 64);
  EXPECT_EQ(m.captured_len, 54u);
  EXPECT_EQ(m.original_len, 54u);
  EXPECT_EQ(m.ts, (fg::Timestamp{100, 5}));
}

TEST(DecodeFrame, SynAckFlags) {
  const auto m = fg::decode_frame(hand_tcp(0x12), {});
  EXPECT_TRUE(m.flags.syn);
  EXPECT_TRUE(m.flags.ack);
  EXPECT_FALSE(m.flags.rst);
  const auto all = fg::decode_frame(hand_tcp(0x3f), {});
  EXPECT_TRUE(all.flags.fin && all.flags.syn && all.flags.rst && all.flags.psh && all.flags.ack && all.flags.urg);
}

TEST(DecodeFrame, TcpPayloadLengthFromHeaders) {
  auto f = hand_tcp(0x18, 40 + 5);
  for (char c : std::string("GET /")) f.push_back(static_cast<std::uint8_t>(c));
  const auto m = fg::decode_frame(f, {});
  EXPECT_EQ(m.payload_len, 5u);
  EXPECT_EQ(m.prefix_len, 5);
  EXPECT_TRUE(m.payload_starts_with("GET "));
}

TEST(DecodeFrame, UdpPayloadLength) {
  const auto m = fg::decode_frame(hand_udp(108), {});
  EXPECT_EQ(m.transport, fg::Transport::UDP);
  EXPECT_EQ(m.payload_len, 100u);
  EXPECT_EQ(m.dst_port, 53);
  EXPECT_EQ(m.src_port, 5353);
  EXPECT_EQ(m.ttl, 128);
  EXPECT_EQ(m.prefix_len, 8);
  EXPECT_FALSE(m.flags.syn || m.flags.ack);
}

TEST(DecodeFrame, ArpIsNonIp) {
  auto f = hand_tcp(0x02);
  f[12] = 0x08;
  f[13] = 0x06;
  const auto m = fg::decode_frame(f, {});
  EXPECT_EQ(m.transport, fg::Transport::NonIp);
  EXPECT_EQ(m.link, fg::LinkProtocol::Other);
  EXPECT_EQ(m.src_ip, 0u);
  EXPECT_EQ(m.dst_port, 0);
}

TEST(DecodeFrame, LaterFragmentIsOtherIp) {
  auto f = hand_tcp(0x02);
  f[14 + 6] = 0x00;
  f[14 + 7] = 0x10;  // fragment offset 16
  const auto m = fg::decode_frame(f, {});
  EXPECT_EQ(m.transport, fg::Transport::OtherIp);
  EXPECT_EQ(m.link, fg::LinkProtocol::IPv4);
  EXPECT_FALSE(m.flags.syn);
}

TEST(DecodeFrame, TruncatedTransportDegrades) {
  auto f = hand_tcp(0x02);
  f.resize(14 + 20 + 10);
  const auto m = fg::decode_frame(f, {});
  EXPECT_EQ(m.transport, fg::Transport::OtherIp);
  EXPECT_EQ(fg::decode_frame(std::vector<std::uint8_t>(5, 0), {}).transport, fg::Transport::NonIp);
}

TEST(DecodeFrame, TcpPayloadInvariantAgainstBuilder) {
  fg::Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::uint8_t> payload(rng.below(1400));
    const fg::Endpoints ep{fg::ipv4(1, 2, 3, 4), fg::ipv4(5, 6, 7, 8), 1000, 80, 64};
    const auto f = fg::build_tcp_frame(ep, fg::tcp_flag::kAck, payload);
    const auto m = fg::decode_frame(f, {});
    const std::size_t ip_total = (std::size_t{f[16]} << 8) | f[17];
    const std::size_t ihl = (f[14] & 0x0f) * 4u;
    const std::size_t doff = (f[14 + ihl + 12] >> 4) * 4u;
    EXPECT_EQ(m.payload_len, ip_total - ihl - doff);
    EXPECT_EQ(m.payload_len, payload.size());
  }
}

TEST(DecodeFrame, FuzzNeverThrows) {
  fg::Rng rng(1234);
  for (int i = 0; i < 10000; ++i) {
    std::vector<std::uint8_t> bytes(rng.below(120));
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.below(256));
    if (bytes.size() > 14 && rng.below(2)) {
      bytes[12] = 0x08;  // steer half the cases into the IPv4 path
      bytes[13] = 0x00;
      bytes[14] = static_cast<std::uint8_t>(0x40 | (bytes[14] & 0x0f));
    }
    EXPECT_NO_THROW({
      const auto m = fg::decode_frame(bytes, {});
      if (m.transport != fg::Transport::TCP) {
        EXPECT_FALSE(m.flags.syn || m.flags.ack || m.flags.fin);
      }
      EXPECT_LE(m.captured_len, m.original_len);
    });
  }
}

TEST(Pcap, EmptyFileIsGlobalHeaderOnly) {
  const auto bytes = fg::encode_pcap({});
  ASSERT_EQ(bytes.size(), 24u);
  const std::vector<std::uint8_t> expected = {0xd4, 0xc3, 0xb2, 0xa1, 2, 0, 4, 0, 0, 0, 0, 0,
                                              0,    0,    0,    0,    0xff, 0xff, 0, 0, 1, 0, 0, 0};
  EXPECT_EQ(bytes, expected);
  const auto path = temp_path("empty.pcap");
  fg::write_pcap(path, {});
  EXPECT_EQ(std::filesystem::file_size(path), 24u);
  EXPECT_TRUE(fg::read_pcap(path).empty());
  std::filesystem::remove(path);
}

TEST(Pcap, RecordHeaderLayout) {
  const std::vector<fg::RawPacket> pkts = {{{0x01020304, 0x0a0b0c}, {0xde, 0xad}, 0}};
  const auto bytes = fg::encode_pcap(pkts);
  ASSERT_EQ(bytes.size(), 24u + 16u + 2u);
  const std::vector<std::uint8_t> rec(bytes.begin() + 24, bytes.end());
  const std::vector<std::uint8_t> expected = {4, 3, 2, 1, 0x0c, 0x0b, 0x0a, 0, 2, 0, 0, 0, 2, 0, 0, 0, 0xde, 0xad};
  EXPECT_EQ(rec, expected);
}

TEST(Pcap, RoundTripRandomFrames) {
  fg::Rng rng(77);
  std::vector<fg::RawPacket> pkts(1000);
  std::uint32_t sec = 1700000000;
  for (auto& p : pkts) {
    sec += static_cast<std::uint32_t>(rng.below(3));
    p.ts = {sec, static_cast<std::uint32_t>(rng.below(1000000))};
    p.frame.resize(rng.below(1600));
    for (auto& b : p.frame) b = static_cast<std::uint8_t>(rng.below(256));
  }
  const auto path = temp_path("roundtrip.pcap");
  fg::write_pcap(path, pkts);
  const auto back = fg::read_pcap_frames(path);
  ASSERT_EQ(back.size(), pkts.size());
  for (std::size_t i = 0; i < pkts.size(); ++i) {
    EXPECT_EQ(back[i].frame, pkts[i].frame);
    EXPECT_EQ(back[i].ts, pkts[i].ts);
  }
  EXPECT_EQ(fg::read_pcap(path).size(), 1000u);
  std::filesystem::remove(path);
}

TEST(Pcap, MetasKeepWrittenOrder) {
  std::vector<fg::RawPacket> pkts;
  for (std::uint32_t i = 0; i < 50; ++i) pkts.push_back({{1000 + i / 10, (i % 10) * 1000}, hand_tcp(0x02), 0});
  const auto path = temp_path("order.pcap");
  fg::write_pcap(path, pkts);
  const auto metas = fg::read_pcap(path);
  ASSERT_EQ(metas.size(), 50u);
  for (std::size_t i = 1; i < metas.size(); ++i) EXPECT_LE(metas[i - 1].ts, metas[i].ts);
  std::filesystem::remove(path);
}

TEST(Pcap, FrameTooLarge) {
  std::vector<fg::RawPacket> pkts(1);
  pkts[0].frame.resize(70000);
  try {
    fg::encode_pcap(pkts);
    FAIL();
  } catch (const fg::Error& e) {
    EXPECT_EQ(e.code(), fg::ErrorCode::FrameTooLarge);
  }
}

namespace {
fg::ErrorCode decode_error(const std::vector<std::uint8_t>& bytes) {
  try {
    fg::decode_pcap(bytes);
  } catch (const fg::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "decoded unexpectedly";
  return fg::ErrorCode::Io;
}
}  // namespace

TEST(Pcap, BadMagic) {
  auto bytes = fg::encode_pcap({});
  bytes[0] = 0xef;
  bytes[1] = 0xbe;
  bytes[2] = 0xad;
  bytes[3] = 0xde;
  EXPECT_EQ(decode_error(bytes), fg::ErrorCode::BadMagic);
  EXPECT_EQ(decode_error({1, 2}), fg::ErrorCode::BadMagic);
}

TEST(Pcap, TruncatedRecord) {
  const std::vector<fg::RawPacket> pkts = {{{1, 0}, hand_tcp(0x02), 0}};
  auto bytes = fg::encode_pcap(pkts);
  bytes.pop_back();
  EXPECT_EQ(decode_error(bytes), fg::ErrorCode::TruncatedRecord);
  bytes.resize(24 + 10);
  EXPECT_EQ(decode_error(bytes), fg::ErrorCode::TruncatedRecord);
}

TEST(Pcap, UnsupportedLinkType) {
  auto bytes = fg::encode_pcap({});
  bytes[20] = 101;  // raw IP
  EXPECT_EQ(decode_error(bytes), fg::ErrorCode::UnsupportedLinkType);
}

TEST(Pcap, BigEndianFilesAreAccepted) {
  std::vector<std::uint8_t> be = {0xa1, 0xb2, 0xc3, 0xd4, 0, 2, 0, 4, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0xff, 0xff, 0, 0, 0, 1};
  const auto frame = hand_tcp(0x02);
  const std::vector<std::uint8_t> rec = {0, 0, 0, 9, 0, 0, 0, 7, 0, 0, 0, 54, 0, 0, 0, 60};
  be.insert(be.end(), rec.begin(), rec.end());
  be.insert(be.end(), frame.begin(), frame.end());
  const auto pkts = fg::decode_pcap(be);
  ASSERT_EQ(pkts.size(), 1u);
  EXPECT_EQ(pkts[0].ts, (fg::Timestamp{9, 7}));
  EXPECT_EQ(pkts[0].frame, frame);
  EXPECT_EQ(pkts[0].original_len, 60u);
  EXPECT_EQ(fg::decode_frame(pkts[0].frame, pkts[0].ts, pkts[0].original_len).original_len, 60u);
}
