#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "floodgate/dataset.hpp"
#include "floodgate/error.hpp"
#include "floodgate/features.hpp"
#include "floodgate/frames.hpp"
#include "floodgate/io_util.hpp"
#include "floodgate/pcap.hpp"
#include "floodgate/rng.hpp"

namespace floodgate {

struct Episode {
  TrafficClass attack = TrafficClass::UdpFlood;
  double start = 0.0;  // seconds from scenario start
  double end = 0.0;
  double rate = 1000.0;  // packets per second
  std::uint32_t attackers = 1;

  friend bool operator==(const Episode&, const Episode&) = default;
};

struct ScenarioConfig {
  double duration = 60.0;
  std::uint64_t seed = 1;
  double benign_rate = 100.0;  // packets per second
  double start_time = 1700000000.0;  // epoch seconds of t = 0
  std::uint32_t victim_ip = ipv4(10, 0, 1, 10);
  std::uint16_t victim_port = 80;
  std::vector<Episode> episodes;

  void validate() const;
};

inline void ScenarioConfig::validate() const {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::BadConfig, msg); };
  if (!(duration > 0) || !std::isfinite(duration)) bad("duration must be positive");
  if (!(benign_rate > 0) || !std::isfinite(benign_rate)) bad("benign_rate must be positive");
  if (!(start_time >= 0) || start_time + duration >= 4294967295.0) bad("start_time out of pcap range");
  std::vector<Episode> sorted = episodes;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& e = sorted[i];
    if (e.attack == TrafficClass::Normal) bad("episode attack must be a flood class");
    if (!(e.start >= 0) || !(e.end <= duration) || !(e.end > e.start))
      bad("episode [" + format_double(e.start) + ", " + format_double(e.end) + ") outside [0, duration]");
    if (!(e.rate > 0) || !std::isfinite(e.rate)) bad("episode rate must be positive");
    if (e.attackers == 0) bad("episode attackers must be at least 1");
    if (i > 0 && e.start < sorted[i - 1].end) bad("episodes overlap at t=" + format_double(e.start));
  }
}

/// Scenario file grammar, one directive per line, '#' starts a comment:
///
///   duration = 600
///   seed = 7
///   benign_rate = 100
///   start_time = 1700000000
///   victim_ip = 10.0.1.10
///   victim_port = 80
///   episode = <syn|ack|http|udp> <start_s> <end_s> <rate_pps> <attackers>
inline ScenarioConfig parse_scenario(std::istream& is, std::string_view source = "<stream>") {
  ScenarioConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto where = std::string(source) + ":" + std::to_string(line_no);
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::BadConfig, where + ": expected 'key = value'");
    const auto key = trim(body.substr(0, eq));
    const auto value = trim(body.substr(eq + 1));
    auto number = [&](std::string_view v) {
      const auto d = parse_double(v);
      if (!d) throw Error(ErrorCode::BadConfig, where + ": bad number '" + std::string(v) + "'");
      return *d;
    };
    if (key == "duration") {
      cfg.duration = number(value);
    } else if (key == "seed") {
      const auto s = parse_int<std::uint64_t>(value);
      if (!s) throw Error(ErrorCode::BadConfig, where + ": bad seed");
      cfg.seed = *s;
    } else if (key == "benign_rate") {
      cfg.benign_rate = number(value);
    } else if (key == "start_time") {
      cfg.start_time = number(value);
    } else if (key == "victim_port") {
      const auto p = parse_int<std::uint16_t>(value);
      if (!p) throw Error(ErrorCode::BadConfig, where + ": bad port");
      cfg.victim_port = *p;
    } else if (key == "victim_ip") {
      const auto parts = split_fields(value, '.');
      std::uint32_t addr = 0;
      if (parts.size() != 4) throw Error(ErrorCode::BadConfig, where + ": bad IPv4 address");
      for (auto part : parts) {
        const auto octet = parse_int<std::uint8_t>(part);
        if (!octet) throw Error(ErrorCode::BadConfig, where + ": bad IPv4 address");
        addr = (addr << 8) | *octet;
      }
      cfg.victim_ip = addr;
    } else if (key == "episode") {
      std::istringstream fields{std::string(value)};
      std::string kind, start, end, rate, attackers, extra;
      if (!(fields >> kind >> start >> end >> rate >> attackers) || (fields >> extra))
        throw Error(ErrorCode::BadConfig, where + ": episode needs <kind> <start> <end> <rate> <attackers>");
      Episode e;
      try {
        e.attack = encode_label(kind);
      } catch (const Error&) {
        throw Error(ErrorCode::BadConfig, where + ": unknown attack kind '" + kind + "'");
      }
      e.start = number(start);
      e.end = number(end);
      e.rate = number(rate);
      const auto a = parse_int<std::uint32_t>(attackers);
      if (!a) throw Error(ErrorCode::BadConfig, where + ": bad attacker count");
      e.attackers = *a;
      cfg.episodes.push_back(e);
    } else {
      throw Error(ErrorCode::BadConfig, where + ": unknown key '" + std::string(key) + "'");
    }
  }
  cfg.validate();
  return cfg;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return parse_scenario(in, path.string());
}

/// Generated packets carry a sequence tag so merging streams stays stable.
struct TimedFrame {
  double t = 0.0;  // seconds from scenario start
  std::vector<std::uint8_t> frame;
};

namespace synth_detail {

inline constexpr std::uint32_t kDnsServer = ipv4(10, 0, 1, 53);

inline std::uint16_t ephemeral_port(Rng& rng) { return static_cast<std::uint16_t>(32768 + rng.below(28232)); }

inline std::uint32_t benign_client(Rng& rng) {
  return ipv4(10, 0, 0, static_cast<std::uint8_t>(10 + rng.below(64)));
}

inline std::uint32_t attacker_ip(std::uint32_t index) {
  return ipv4(203, 0, static_cast<std::uint8_t>(113 + index / 250), static_cast<std::uint8_t>(1 + index % 250));
}

inline std::vector<std::uint8_t> random_bytes(Rng& rng, std::size_t n) {
  std::vector<std::uint8_t> out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng.below(256));
  return out;
}

inline Endpoints reversed(const Endpoints& ep, std::uint8_t ttl) {
  return {.src_ip = ep.dst_ip, .dst_ip = ep.src_ip, .src_port = ep.dst_port, .dst_port = ep.src_port, .ttl = ttl};
}

/// SYN -> SYN-ACK -> ACK starting at t. Returns the time of the final ACK.
inline double handshake(std::vector<TimedFrame>& out, Rng& rng, const Endpoints& client, double t, double rtt,
                        std::uint8_t server_ttl) {
  const auto isn = static_cast<std::uint32_t>(rng.next_u64());
  const auto server_isn = static_cast<std::uint32_t>(rng.next_u64());
  out.push_back({t, build_tcp_frame(client, tcp_flag::kSyn, std::string_view{}, isn, 0)});
  out.push_back({t + rtt / 2,
                 build_tcp_frame(reversed(client, server_ttl), tcp_flag::kSyn | tcp_flag::kAck, std::string_view{},
                                 server_isn, isn + 1)});
  out.push_back({t + rtt, build_tcp_frame(client, tcp_flag::kAck, std::string_view{}, isn + 1, server_isn + 1)});
  return t + rtt;
}

}  // namespace synth_detail

/// Background traffic over [t0, t1): exponential event arrivals, each event
/// one of a completed TCP handshake (0.25), an HTTP exchange on port 80
/// (0.35), a DNS query/response on UDP 53 (0.20) or a burst of bulk TCP
/// data (0.20). Event rate is scaled so the packet rate averages `rate`.
inline std::vector<TimedFrame> gen_benign(const ScenarioConfig& cfg, double t0, double t1, Rng& rng) {
  using namespace synth_detail;
  constexpr double kPacketsPerEvent = 0.25 * 3 + 0.35 * 6 + 0.20 * 2 + 0.20 * 3;
  const double event_rate = cfg.benign_rate / kPacketsPerEvent;
  constexpr std::uint8_t kServerTtl = 64;
  static constexpr std::array<std::uint16_t, 5> kHandshakePorts = {22, 443, 25, 143, 21};
  static constexpr std::array<std::string_view, 4> kPaths = {"/", "/index.html", "/img/logo.png", "/api/status"};

  std::vector<TimedFrame> out;
  double t = t0 + rng.exponential(event_rate);
  while (t < t1) {
    const std::uint32_t client_ip = benign_client(rng);
    const std::uint8_t client_ttl = (client_ip & 1) ? 128 : 64;
    const double rtt = rng.uniform(0.0005, 0.02);
    const double kind = rng.uniform();
    Endpoints client{.src_ip = client_ip, .dst_ip = cfg.victim_ip, .src_port = ephemeral_port(rng), .dst_port = 0,
                     .ttl = client_ttl};
    if (kind < 0.25) {
      client.dst_port = kHandshakePorts[rng.below(kHandshakePorts.size())];
      handshake(out, rng, client, t, rtt, kServerTtl);
    } else if (kind < 0.60) {
      client.dst_port = cfg.victim_port;
      const double t_ack = handshake(out, rng, client, t, rtt, kServerTtl);
      const std::string request = "GET " + std::string(kPaths[rng.below(kPaths.size())]) +
                                  " HTTP/1.1\r\nHost: " + format_ipv4(cfg.victim_ip) + "\r\n\r\n";
      out.push_back({t_ack + 0.0002, build_tcp_frame(client, tcp_flag::kPsh | tcp_flag::kAck, request)});
      const auto body = random_bytes(rng, 300 + rng.below(1100));
      out.push_back({t_ack + 0.0002 + rtt / 2,
                     build_tcp_frame(reversed(client, kServerTtl), tcp_flag::kPsh | tcp_flag::kAck, body)});
      out.push_back({t_ack + 0.0002 + rtt, build_tcp_frame(client, tcp_flag::kAck, std::string_view{})});
    } else if (kind < 0.80) {
      client.dst_ip = kDnsServer;
      client.dst_port = 53;
      out.push_back({t, build_udp_frame(client, random_bytes(rng, 28 + rng.below(30)))});
      out.push_back({t + rtt / 2, build_udp_frame(reversed(client, kServerTtl), random_bytes(rng, 60 + rng.below(200)))});
    } else {
      // Bulk download on an established connection: two data segments, one ACK.
      client.dst_port = static_cast<std::uint16_t>(rng.below(2) ? 443 : 21);
      const auto server = reversed(client, kServerTtl);
      out.push_back({t, build_tcp_frame(server, tcp_flag::kAck, random_bytes(rng, 1000 + rng.below(461)))});
      out.push_back({t + 0.0003, build_tcp_frame(server, tcp_flag::kPsh | tcp_flag::kAck,
                                                 random_bytes(rng, 1000 + rng.below(461)))});
      out.push_back({t + rtt / 2, build_tcp_frame(client, tcp_flag::kAck, std::string_view{})});
    }
    t += rng.exponential(event_rate);
  }
  return out;
}

/// Flood traffic for one episode at ep.rate packets per second.
inline std::vector<TimedFrame> gen_attack(const ScenarioConfig& cfg, const Episode& ep, Rng& rng) {
  using namespace synth_detail;
  std::vector<TimedFrame> out;
  const auto attacker = [&] { return attacker_ip(static_cast<std::uint32_t>(rng.below(ep.attackers))); };

  if (ep.attack == TrafficClass::HttpFlood) {
    // Each connection: SYN, SYN-ACK, ACK, then four GET requests.
    constexpr std::size_t kRequests = 4;
    constexpr double kPacketsPerConnection = 3 + kRequests;
    const std::string request = "GET / HTTP/1.1\r\nHost: " + format_ipv4(cfg.victim_ip) + "\r\n\r\n";
    double t = ep.start + rng.exponential(ep.rate / kPacketsPerConnection);
    while (t < ep.end) {
      const Endpoints client{.src_ip = attacker(), .dst_ip = cfg.victim_ip, .src_port = ephemeral_port(rng),
                             .dst_port = cfg.victim_port, .ttl = 64};
      const double rtt = rng.uniform(0.0002, 0.004);
      double tr = handshake(out, rng, client, t, rtt, 64);
      for (std::size_t r = 0; r < kRequests; ++r) {
        tr += rng.uniform(0.0001, 0.002);
        out.push_back({tr, build_tcp_frame(client, tcp_flag::kPsh | tcp_flag::kAck, request)});
      }
      t += rng.exponential(ep.rate / kPacketsPerConnection);
    }
    return out;
  }

  double t = ep.start + rng.exponential(ep.rate);
  while (t < ep.end) {
    switch (ep.attack) {
      case TrafficClass::SynFlood: {
        const Endpoints spoofed{.src_ip = ipv4(198, 18, static_cast<std::uint8_t>(rng.below(256)),
                                               static_cast<std::uint8_t>(rng.below(256))),
                                .dst_ip = cfg.victim_ip,
                                .src_port = static_cast<std::uint16_t>(1024 + rng.below(64512)),
                                .dst_port = cfg.victim_port,
                                .ttl = static_cast<std::uint8_t>(32 + rng.below(97))};
        out.push_back({t, build_tcp_frame(spoofed, tcp_flag::kSyn, std::string_view{},
                                          static_cast<std::uint32_t>(rng.next_u64()), 0)});
        break;
      }
      case TrafficClass::AckFlood: {
        const Endpoints src{.src_ip = attacker(), .dst_ip = cfg.victim_ip,
                            .src_port = static_cast<std::uint16_t>(1024 + rng.below(64512)),
                            .dst_port = cfg.victim_port, .ttl = 64};
        out.push_back({t, build_tcp_frame(src, tcp_flag::kAck, std::string_view{},
                                          static_cast<std::uint32_t>(rng.next_u64()),
                                          static_cast<std::uint32_t>(rng.next_u64()))});
        break;
      }
      case TrafficClass::UdpFlood: {
        const Endpoints src{.src_ip = attacker(), .dst_ip = cfg.victim_ip,
                            .src_port = static_cast<std::uint16_t>(1024 + rng.below(64512)),
                            .dst_port = static_cast<std::uint16_t>(1 + rng.below(65535)), .ttl = 64};
        out.push_back({t, build_udp_frame(src, random_bytes(rng, rng.below(65)))});
        break;
      }
      default:
        throw Error(ErrorCode::InvalidClass, "no generator for " + std::string(label_name(ep.attack)));
    }
    t += rng.exponential(ep.rate);
  }
  return out;
}

struct Scenario {
  std::vector<RawPacket> packets;
  std::vector<TruthInterval> truth;  // absolute timestamps
};

/// Benign background over the whole duration merged with every episode,
/// ordered by timestamp (ties keep generation order).
inline Scenario generate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  std::vector<TimedFrame> all;
  {
    Rng rng(mix_seed(cfg.seed, 0));
    all = gen_benign(cfg, 0.0, cfg.duration, rng);
  }
  std::vector<Episode> episodes = cfg.episodes;
  std::sort(episodes.begin(), episodes.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    Rng rng(mix_seed(cfg.seed, i + 1));
    auto frames = gen_attack(cfg, episodes[i], rng);
    all.insert(all.end(), std::make_move_iterator(frames.begin()), std::make_move_iterator(frames.end()));
  }

  Scenario s;
  std::vector<std::pair<Timestamp, std::size_t>> order;
  order.reserve(all.size());
  for (std::size_t i = 0; i < all.size(); ++i)
    order.emplace_back(Timestamp::from_seconds(cfg.start_time + all[i].t), i);
  std::sort(order.begin(), order.end());
  s.packets.reserve(all.size());
  for (const auto& [ts, i] : order) s.packets.push_back({ts, std::move(all[i].frame), 0});
  for (const auto& e : episodes) s.truth.push_back({cfg.start_time + e.start, cfg.start_time + e.end, e.attack});
  return s;
}

struct ScenarioSummary {
  std::size_t packets = 0;
  std::size_t episodes = 0;
};

inline ScenarioSummary run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_pcap,
                                    const std::filesystem::path& out_truth) {
  const auto s = generate_scenario(cfg);
  write_pcap(out_pcap, s.packets);
  write_truth(s.truth, out_truth);
  return {s.packets.size(), s.truth.size()};
}

}  // namespace floodgate
