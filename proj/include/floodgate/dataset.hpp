#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "floodgate/error.hpp"
#include "floodgate/io_util.hpp"
#include "floodgate/rng.hpp"

namespace floodgate {

inline constexpr std::size_t kFeatureCount = 24;
inline constexpr std::size_t kClassCount = 5;

enum class TrafficClass : std::uint8_t {
  Normal = 0,
  SynFlood = 1,
  AckFlood = 2,
  HttpFlood = 3,
  UdpFlood = 4,
};

inline constexpr std::array<TrafficClass, kClassCount> kAllClasses = {
    TrafficClass::Normal, TrafficClass::SynFlood, TrafficClass::AckFlood,
    TrafficClass::HttpFlood, TrafficClass::UdpFlood};

constexpr std::size_t index_of(TrafficClass c) { return static_cast<std::size_t>(c); }

inline TrafficClass class_from_index(std::size_t i) {
  if (i >= kClassCount) throw Error(ErrorCode::InvalidClass, "class index " + std::to_string(i));
  return static_cast<TrafficClass>(i);
}

/// Canonical alias written to CSV files.
inline std::string_view label_name(TrafficClass c) {
  static constexpr std::array<std::string_view, kClassCount> names = {
      "normal", "syn_flood", "ack_flood", "http_flood", "udp_flood"};
  return names[index_of(c)];
}

/// Human-readable name used in reports.
inline std::string_view display_name(TrafficClass c) {
  static constexpr std::array<std::string_view, kClassCount> names = {
      "Normal traffic", "SYN Flooding", "ACK Flooding", "HTTP Flooding", "UDP Flooding"};
  return names[index_of(c)];
}

inline TrafficClass encode_label(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "normal") return TrafficClass::Normal;
  if (lower == "syn" || lower == "syn_flood") return TrafficClass::SynFlood;
  if (lower == "ack" || lower == "ack_flood") return TrafficClass::AckFlood;
  if (lower == "http" || lower == "http_flood") return TrafficClass::HttpFlood;
  if (lower == "udp" || lower == "udp_flood") return TrafficClass::UdpFlood;
  throw Error(ErrorCode::UnknownLabel, "'" + std::string(name) + "'");
}

using FeatureVector = std::array<double, kFeatureCount>;

inline bool all_finite(const FeatureVector& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

struct LabeledRecord {
  FeatureVector features{};
  TrafficClass label = TrafficClass::Normal;

  friend bool operator==(const LabeledRecord&, const LabeledRecord&) = default;
};

using ClassCounts = std::array<std::size_t, kClassCount>;

struct Dataset {
  std::vector<LabeledRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  ClassCounts class_counts() const {
    ClassCounts counts{};
    for (const auto& r : records) ++counts[index_of(r.label)];
    return counts;
  }
};

struct SplitRatios {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

struct SplitResult {
  Dataset train;
  Dataset validation;
  Dataset test;
};

namespace detail {
// Round half up; the split sizes depend on it.
inline std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }
}  // namespace detail

/// Stratified three-way split. Per class the records are shuffled with a
/// generator seeded once for the whole call, then test and validation take
/// round(count * ratio) records each and train keeps the remainder. Records
/// inside each partition keep their original dataset order.
inline SplitResult stratified_split(const Dataset& ds, SplitRatios ratios, std::uint64_t seed) {
  const bool positive = ratios.train > 0 && ratios.validation > 0 && ratios.test > 0;
  const double sum = ratios.train + ratios.validation + ratios.test;
  if (!positive || !std::isfinite(sum) || std::abs(sum - 1.0) > 1e-9)
    throw Error(ErrorCode::BadRatios, "ratios must be positive and sum to 1");

  std::array<std::vector<std::size_t>, kClassCount> by_class;
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    by_class[index_of(ds.records[i].label)].push_back(i);
  for (auto c : kAllClasses) {
    if (by_class[index_of(c)].size() < 3)
      throw Error(ErrorCode::EmptyClass, std::string(label_name(c)) + " has fewer than 3 records");
  }

  enum Part : std::uint8_t { kTrain, kVal, kTest };
  std::vector<Part> assignment(ds.records.size(), kTrain);
  Rng rng(seed);
  for (auto& idx : by_class) {
    rng.shuffle(std::span<std::size_t>(idx));
    const std::size_t n_test = detail::round_half_up(static_cast<double>(idx.size()) * ratios.test);
    const std::size_t n_val =
        std::min(idx.size() - n_test,
                 detail::round_half_up(static_cast<double>(idx.size()) * ratios.validation));
    for (std::size_t k = 0; k < n_test; ++k) assignment[idx[k]] = kTest;
    for (std::size_t k = n_test; k < n_test + n_val; ++k) assignment[idx[k]] = kVal;
  }

  SplitResult out;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    switch (assignment[i]) {
      case kTrain: out.train.records.push_back(ds.records[i]); break;
      case kVal: out.validation.records.push_back(ds.records[i]); break;
      case kTest: out.test.records.push_back(ds.records[i]); break;
    }
  }
  return out;
}

struct NormalizationStats {
  FeatureVector mean{};
  FeatureVector std{};

  static NormalizationStats identity() {
    NormalizationStats s;
    s.std.fill(1.0);
    return s;
  }

  friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

inline constexpr double kMinStd = 1e-12;

/// Per-feature z-score statistics (population std). Near-constant features
/// get std 1 so they normalize to 0.
inline NormalizationStats fit_normalization(const Dataset& train) {
  if (train.empty()) throw Error(ErrorCode::EmptyDataset, "cannot fit normalization on 0 records");
  const auto n = static_cast<double>(train.size());
  NormalizationStats s;
  for (const auto& r : train.records)
    for (std::size_t i = 0; i < kFeatureCount; ++i) s.mean[i] += r.features[i];
  for (auto& m : s.mean) m /= n;
  for (const auto& r : train.records)
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      const double d = r.features[i] - s.mean[i];
      s.std[i] += d * d;
    }
  for (auto& sd : s.std) {
    sd = std::sqrt(sd / n);
    if (!(sd >= kMinStd)) sd = 1.0;
  }
  return s;
}

inline FeatureVector apply_normalization(const FeatureVector& v, const NormalizationStats& stats) {
  FeatureVector out;
  for (std::size_t i = 0; i < kFeatureCount; ++i) out[i] = (v[i] - stats.mean[i]) / stats.std[i];
  return out;
}

inline Dataset apply_normalization(const Dataset& ds, const NormalizationStats& stats) {
  Dataset out;
  out.records.reserve(ds.size());
  for (const auto& r : ds.records) out.records.push_back({apply_normalization(r.features, stats), r.label});
  return out;
}

// ---------------------------------------------------------------------------
// CSV: header f01,...,f24,label

inline std::string csv_header() {
  std::ostringstream os;
  for (std::size_t i = 1; i <= kFeatureCount; ++i)
    os << 'f' << std::setw(2) << std::setfill('0') << i << ',';
  os << "label";
  return os.str();
}

inline void write_csv(std::ostream& os, const Dataset& ds) {
  os << csv_header() << '\n';
  for (const auto& r : ds.records) {
    for (double x : r.features) os << format_double(x) << ',';
    os << label_name(r.label) << '\n';
  }
}

inline void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  atomic_write(path, [&](std::ostream& os) { write_csv(os, ds); });
}

inline Dataset read_csv(std::istream& is, std::string_view source = "<stream>") {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(is, line)) throw Error(ErrorCode::MalformedRow, std::string(source) + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != csv_header())
    throw Error(ErrorCode::MalformedRow, std::string(source) + ": header does not match f01..f24,label");

  Dataset ds;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line, ',');
    const auto where = std::string(source) + ":" + std::to_string(line_no);
    if (fields.size() != kFeatureCount + 1)
      throw Error(ErrorCode::MalformedRow,
                  where + ": expected 25 columns, got " + std::to_string(fields.size()));
    LabeledRecord r;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      const auto v = parse_double(fields[i]);
      if (!v || !std::isfinite(*v))
        throw Error(ErrorCode::MalformedRow, where + ": bad feature value '" + std::string(fields[i]) + "'");
      r.features[i] = *v;
    }
    r.label = encode_label(trim(fields[kFeatureCount]));
    ds.records.push_back(r);
  }
  return ds;
}

inline Dataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_csv(in, path.string());
}

}  // namespace floodgate
