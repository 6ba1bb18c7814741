#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "floodgate/dataset.hpp"
#include "floodgate/error.hpp"
#include "floodgate/io_util.hpp"
#include "floodgate/pcap.hpp"

namespace floodgate {

inline constexpr int kFeatureSchemaVersion = 1;
inline constexpr double kDefaultWindowSeconds = 1.0;

/// Names of the 24 window features, in network input order.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "packet_count",      "byte_count",          "mean_packet_size",  "std_packet_size",
    "tcp_ratio",         "udp_ratio",           "other_ratio",       "syn_count",
    "syn_ratio",         "pure_ack_count",      "pure_ack_ratio",    "finrst_ratio",
    "synack_count",      "unique_src_ips",      "unique_dst_ports",  "dst_port_entropy",
    "src_ip_entropy",    "mean_interarrival",   "std_interarrival",  "http_request_count",
    "http_request_ratio", "small_udp_ratio",    "mean_ttl",          "unique_five_tuples"};

namespace feature {
enum Index : std::size_t {
  PacketCount, ByteCount, MeanSize, StdSize, TcpRatio, UdpRatio, OtherRatio, SynCount, SynRatio,
  PureAckCount, PureAckRatio, FinRstRatio, SynAckCount, UniqueSrcIps, UniqueDstPorts, DstPortEntropy,
  SrcIpEntropy, MeanInterArrival, StdInterArrival, HttpRequestCount, HttpRequestRatio, SmallUdpRatio,
  MeanTtl, UniqueFiveTuples
};
}  // namespace feature

/// Half-open time slice [start_ts, end_ts).
struct Window {
  double start_ts = 0.0;
  double end_ts = 0.0;
  std::vector<PacketMeta> packets;
};

/// Tiles the stream with windows [base + k*len, base + (k+1)*len) where
/// base = floor(first_ts / len) * len. Empty windows inside the span are kept.
inline std::vector<Window> window_packets(std::span<const PacketMeta> packets, double window_len) {
  if (!(window_len > 0) || !std::isfinite(window_len))
    throw Error(ErrorCode::BadConfig, "window length must be positive");
  std::vector<Window> windows;
  if (packets.empty()) return windows;
  for (std::size_t i = 1; i < packets.size(); ++i)
    if (packets[i].ts < packets[i - 1].ts)
      throw Error(ErrorCode::UnsortedInput, "packet " + std::to_string(i) + " precedes its predecessor in time");

  const double base = std::floor(packets.front().ts.seconds() / window_len) * window_len;
  auto start_of = [&](std::int64_t k) { return base + static_cast<double>(k) * window_len; };
  auto window_index = [&](double t) {
    auto k = static_cast<std::int64_t>(std::floor((t - base) / window_len));
    while (start_of(k + 1) <= t) ++k;
    while (k > 0 && start_of(k) > t) --k;
    return k;
  };

  const auto last = window_index(packets.back().ts.seconds());
  windows.resize(static_cast<std::size_t>(last + 1));
  for (std::int64_t k = 0; k <= last; ++k) {
    windows[static_cast<std::size_t>(k)].start_ts = start_of(k);
    windows[static_cast<std::size_t>(k)].end_ts = start_of(k + 1);
  }
  for (const auto& p : packets) windows[static_cast<std::size_t>(window_index(p.ts.seconds()))].packets.push_back(p);
  return windows;
}

namespace detail {

template <typename Key>
double shannon_entropy_bits(const std::map<Key, std::size_t>& counts, std::size_t n) {
  double h = 0.0;
  for (const auto& [key, c] : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    h -= p * std::log2(p);
  }
  return h <= 0.0 ? 0.0 : h;
}

inline bool is_http_request(const PacketMeta& p) {
  if (p.transport != Transport::TCP || (p.dst_port != 80 && p.dst_port != 8080)) return false;
  return p.payload_starts_with("GET ") || p.payload_starts_with("POST") || p.payload_starts_with("HEAD") ||
         p.payload_starts_with("PUT ");
}

}  // namespace detail

/// Window features, schema v1. Only the inter-arrival features depend on
/// packet order, and they use the time-sorted order.
inline FeatureVector extract_features(const Window& w) {
  const auto n = w.packets.size();
  if (n == 0) throw Error(ErrorCode::EmptyWindow, "cannot extract features from an empty window");
  const double dn = static_cast<double>(n);

  std::uint64_t bytes = 0;
  unsigned __int128 bytes_sq = 0;
  std::size_t tcp = 0, udp = 0, syn = 0, pure_ack = 0, finrst = 0, synack = 0, http = 0, small_udp = 0;
  std::size_t ipv4 = 0;
  std::uint64_t ttl_sum = 0;
  std::map<std::uint32_t, std::size_t> src_ips;
  std::map<std::uint16_t, std::size_t> dst_ports;
  std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint16_t, std::uint16_t, std::uint8_t>> five_tuples;
  std::vector<double> times;
  times.reserve(n);

  for (const auto& p : w.packets) {
    bytes += p.original_len;
    bytes_sq += static_cast<unsigned __int128>(p.original_len) * p.original_len;
    if (p.transport == Transport::TCP) {
      ++tcp;
      const auto& f = p.flags;
      if (f.syn && !f.ack) ++syn;
      if (f.syn && f.ack) ++synack;
      if (f.ack && !f.syn && p.payload_len == 0) ++pure_ack;
      if (f.fin || f.rst) ++finrst;
      if (detail::is_http_request(p)) ++http;
    } else if (p.transport == Transport::UDP) {
      ++udp;
      if (p.payload_len <= 64) ++small_udp;
    }
    if (p.link == LinkProtocol::IPv4) {
      ++ipv4;
      ttl_sum += p.ttl;
    }
    // Non-IP packets contribute address/port 0, so every packet is counted.
    ++src_ips[p.src_ip];
    ++dst_ports[p.dst_port];
    five_tuples.emplace(p.src_ip, p.dst_ip, p.src_port, p.dst_port, static_cast<std::uint8_t>(p.transport));
    times.push_back(p.ts.seconds());
  }
  std::sort(times.begin(), times.end());

  FeatureVector f{};
  using namespace feature;
  f[PacketCount] = dn;
  f[ByteCount] = static_cast<double>(bytes);
  f[MeanSize] = static_cast<double>(bytes) / dn;
  {
    // Exact integer variance numerator: n*sum(x^2) - (sum x)^2.
    const auto sum = static_cast<unsigned __int128>(bytes);
    const unsigned __int128 num = static_cast<unsigned __int128>(n) * bytes_sq - sum * sum;
    f[StdSize] = std::sqrt(static_cast<double>(num)) / dn;
  }
  f[TcpRatio] = static_cast<double>(tcp) / dn;
  f[UdpRatio] = static_cast<double>(udp) / dn;
  f[OtherRatio] = static_cast<double>(n - tcp - udp) / dn;
  f[SynCount] = static_cast<double>(syn);
  f[SynRatio] = static_cast<double>(syn) / dn;
  f[PureAckCount] = static_cast<double>(pure_ack);
  f[PureAckRatio] = static_cast<double>(pure_ack) / dn;
  f[FinRstRatio] = static_cast<double>(finrst) / dn;
  f[SynAckCount] = static_cast<double>(synack);
  f[UniqueSrcIps] = static_cast<double>(src_ips.size());
  f[UniqueDstPorts] = static_cast<double>(dst_ports.size());
  f[DstPortEntropy] = detail::shannon_entropy_bits(dst_ports, n);
  f[SrcIpEntropy] = detail::shannon_entropy_bits(src_ips, n);
  if (n >= 2) {
    const double mean_gap = (times.back() - times.front()) / (dn - 1.0);
    double ss = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      const double d = (times[i] - times[i - 1]) - mean_gap;
      ss += d * d;
    }
    f[MeanInterArrival] = mean_gap;
    f[StdInterArrival] = std::sqrt(ss / (dn - 1.0));
  }
  f[HttpRequestCount] = static_cast<double>(http);
  f[HttpRequestRatio] = static_cast<double>(http) / dn;
  f[SmallUdpRatio] = static_cast<double>(small_udp) / dn;
  f[MeanTtl] = ipv4 > 0 ? static_cast<double>(ttl_sum) / static_cast<double>(ipv4) : 0.0;
  f[UniqueFiveTuples] = static_cast<double>(five_tuples.size());
  return f;
}

// ---------------------------------------------------------------------------
// Ground truth

struct TruthInterval {
  double start_ts = 0.0;
  double end_ts = 0.0;
  TrafficClass label = TrafficClass::Normal;

  friend bool operator==(const TruthInterval&, const TruthInterval&) = default;
};

inline void check_truth(std::span<const TruthInterval> truth) {
  std::vector<TruthInterval> sorted(truth.begin(), truth.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start_ts < b.start_ts; });
  for (const auto& t : sorted)
    if (!(t.end_ts > t.start_ts))
      throw Error(ErrorCode::BadConfig, "truth interval must have end > start");
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i].start_ts < sorted[i - 1].end_ts)
      throw Error(ErrorCode::OverlappingTruth, "truth intervals [" + format_double(sorted[i - 1].start_ts) + ", " +
                                                   format_double(sorted[i - 1].end_ts) + ") and [" +
                                                   format_double(sorted[i].start_ts) + ", " +
                                                   format_double(sorted[i].end_ts) + ") overlap");
}

/// Labels each non-empty window by the interval containing its midpoint;
/// uncovered windows are Normal. Empty windows are skipped.
inline Dataset label_windows(std::span<const Window> windows, std::span<const TruthInterval> truth) {
  check_truth(truth);
  Dataset ds;
  for (const auto& w : windows) {
    if (w.packets.empty()) continue;
    const double mid = 0.5 * (w.start_ts + w.end_ts);
    TrafficClass label = TrafficClass::Normal;
    for (const auto& t : truth)
      if (mid >= t.start_ts && mid < t.end_ts) {
        label = t.label;
        break;
      }
    ds.records.push_back({extract_features(w), label});
  }
  return ds;
}

inline constexpr std::string_view kTruthHeader = "start_ts,end_ts,label";

inline void write_truth(std::ostream& os, std::span<const TruthInterval> truth) {
  os << kTruthHeader << '\n';
  for (const auto& t : truth)
    os << format_double(t.start_ts) << ',' << format_double(t.end_ts) << ',' << label_name(t.label) << '\n';
}

inline void write_truth(std::span<const TruthInterval> truth, const std::filesystem::path& path) {
  atomic_write(path, [&](std::ostream& os) { write_truth(os, truth); });
}

inline std::vector<TruthInterval> read_truth(std::istream& is, std::string_view source = "<stream>") {
  std::string line;
  if (!std::getline(is, line) || trim(line) != kTruthHeader)
    throw Error(ErrorCode::MalformedRow, std::string(source) + ": expected header '" + std::string(kTruthHeader) + "'");
  std::vector<TruthInterval> out;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(trim(line), ',');
    const auto where = std::string(source) + ":" + std::to_string(line_no);
    if (fields.size() != 3) throw Error(ErrorCode::MalformedRow, where + ": expected 3 columns");
    const auto start = parse_double(fields[0]);
    const auto end = parse_double(fields[1]);
    if (!start || !end) throw Error(ErrorCode::MalformedRow, where + ": bad timestamp");
    out.push_back({*start, *end, encode_label(trim(fields[2]))});
  }
  check_truth(out);
  return out;
}

inline std::vector<TruthInterval> read_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_truth(in, path.string());
}

/// Packets -> windows -> labeled feature records.
inline Dataset extract_dataset(std::span<const PacketMeta> packets, double window_len,
                               std::span<const TruthInterval> truth = {}) {
  const auto windows = window_packets(packets, window_len);
  return label_windows(windows, truth);
}

}  // namespace floodgate
