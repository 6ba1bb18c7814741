#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>

#include "floodgate/dataset.hpp"
#include "floodgate/error.hpp"

namespace floodgate {

/// cells[true][predicted], classes in TrafficClass order.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kClassCount>, kClassCount> cells{};

  std::uint64_t& at(TrafficClass truth, TrafficClass predicted) {
    return cells[index_of(truth)][index_of(predicted)];
  }
  std::uint64_t at(TrafficClass truth, TrafficClass predicted) const {
    return cells[index_of(truth)][index_of(predicted)];
  }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto& row : cells)
      for (auto c : row) t += c;
    return t;
  }

  std::uint64_t trace() const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < kClassCount; ++i) t += cells[i][i];
    return t;
  }

  std::uint64_t row_sum(TrafficClass truth) const {
    std::uint64_t t = 0;
    for (auto c : cells[index_of(truth)]) t += c;
    return t;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

using Prediction = std::pair<TrafficClass, TrafficClass>;  // (true, predicted)

inline ConfusionMatrix build_confusion(std::span<const Prediction> pairs) {
  ConfusionMatrix cm;
  for (const auto& [truth, predicted] : pairs) ++cm.at(truth, predicted);
  return cm;
}

struct BinaryCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  friend bool operator==(const BinaryCounts&, const BinaryCounts&) = default;
};

/// Normal vs. all DDoS: any attack predicted as any attack counts as a hit.
inline BinaryCounts collapse_binary(const ConfusionMatrix& cm) {
  BinaryCounts b;
  b.tn = cm.cells[0][0];
  for (std::size_t p = 1; p < kClassCount; ++p) b.fp += cm.cells[0][p];
  for (std::size_t t = 1; t < kClassCount; ++t) {
    b.fn += cm.cells[t][0];
    for (std::size_t p = 1; p < kClassCount; ++p) b.tp += cm.cells[t][p];
  }
  return b;
}

/// Normal vs. one attack, restricted to the 2x2 {Normal, attack} submatrix.
inline BinaryCounts pairwise_counts(const ConfusionMatrix& cm, TrafficClass attack) {
  if (attack == TrafficClass::Normal)
    throw Error(ErrorCode::InvalidClass, "pairwise metrics need an attack class, not normal");
  const auto a = index_of(attack);
  return {.tp = cm.cells[a][a], .tn = cm.cells[0][0], .fp = cm.cells[0][a], .fn = cm.cells[a][0]};
}

/// Percentages in [0, 100] and an F-score in [0, 1]. A metric whose
/// denominator is zero is nullopt ("undefined"), never 0.
struct MetricSet {
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> specificity;
  std::optional<double> f_score;
};

inline MetricSet metric_set(const BinaryCounts& c) {
  auto ratio = [](std::uint64_t num, std::uint64_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  const auto acc = ratio(c.tp + c.tn, c.total());
  const auto prec = ratio(c.tp, c.tp + c.fp);
  const auto rec = ratio(c.tp, c.tp + c.fn);
  const auto spec = ratio(c.tn, c.tn + c.fp);

  MetricSet m;
  auto pct = [](std::optional<double> v) { return v ? std::optional<double>(100.0 * *v) : std::nullopt; };
  m.accuracy = pct(acc);
  m.precision = pct(prec);
  m.recall = pct(rec);
  m.specificity = pct(spec);
  if (prec && rec && (*prec + *rec) > 0) m.f_score = 2.0 * *rec * *prec / (*rec + *prec);
  return m;
}

inline double overall_accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw Error(ErrorCode::EmptyMatrix, "overall accuracy of an empty confusion matrix");
  return 100.0 * static_cast<double>(cm.trace()) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Reports

/// Two decimals, ties to even on the scaled value.
inline std::string format_2dp(double x) {
  const double scaled = std::nearbyint(x * 100.0);
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << scaled / 100.0;
  return os.str();
}

inline std::string format_metric(const std::optional<double>& v, std::string_view undefined) {
  return v ? format_2dp(*v) : std::string(undefined);
}

struct ScopedMetrics {
  std::string scope;    // csv key: overall, syn, ack, http, udp
  std::string title;    // display title
  BinaryCounts counts;
  MetricSet metrics;
};

inline std::array<ScopedMetrics, kClassCount> report_scopes(const ConfusionMatrix& cm) {
  std::array<ScopedMetrics, kClassCount> out;
  const auto overall = collapse_binary(cm);
  out[0] = {"overall", "All DDoS Flooding", overall, metric_set(overall)};
  static constexpr std::array<const char*, kClassCount> keys = {"overall", "syn", "ack", "http", "udp"};
  for (std::size_t a = 1; a < kClassCount; ++a) {
    const auto cls = class_from_index(a);
    const auto counts = pairwise_counts(cm, cls);
    out[a] = {keys[a], std::string(display_name(cls)), counts, metric_set(counts)};
  }
  return out;
}

/// Machine-readable rows: scope,accuracy,precision,recall,specificity,f_score.
inline std::string render_report_csv(const ConfusionMatrix& cm) {
  std::ostringstream os;
  os << "scope,accuracy,precision,recall,specificity,f_score\n";
  for (const auto& s : report_scopes(cm)) {
    const auto& m = s.metrics;
    os << s.scope << ',' << format_metric(m.accuracy, "NA") << ',' << format_metric(m.precision, "NA") << ','
       << format_metric(m.recall, "NA") << ',' << format_metric(m.specificity, "NA") << ','
       << format_metric(m.f_score, "NA") << '\n';
  }
  return os.str();
}

inline std::string render_report_text(const ConfusionMatrix& cm) {
  std::ostringstream os;
  constexpr int label_w = 16;
  constexpr int cell_w = 16;
  os << "Confusion matrix (rows: true label, columns: predicted label)\n";
  os << std::left << std::setw(label_w) << "" << std::right;
  for (auto c : kAllClasses) os << std::setw(cell_w) << display_name(c);
  os << '\n';
  for (auto t : kAllClasses) {
    os << std::left << std::setw(label_w) << display_name(t) << std::right;
    for (auto p : kAllClasses) os << std::setw(cell_w) << cm.at(t, p);
    os << '\n';
  }
  os << "Total records: " << cm.total();
  if (cm.total() > 0) os << "   overall accuracy (trace/total): " << format_2dp(overall_accuracy(cm)) << '%';
  os << "\n\n";

  os << std::left << std::setw(20) << "Scope" << std::right << std::setw(12) << "Accuracy" << std::setw(12)
     << "Precision" << std::setw(12) << "Recall" << std::setw(13) << "Specificity" << std::setw(10) << "F-score"
     << '\n';
  for (const auto& s : report_scopes(cm)) {
    const auto& m = s.metrics;
    os << std::left << std::setw(20) << s.title << std::right << std::setw(12)
       << format_metric(m.accuracy, "undefined") << std::setw(12) << format_metric(m.precision, "undefined")
       << std::setw(12) << format_metric(m.recall, "undefined") << std::setw(13)
       << format_metric(m.specificity, "undefined") << std::setw(10) << format_metric(m.f_score, "undefined")
       << '\n';
  }
  return os.str();
}

struct Report {
  std::string text;
  std::string csv;
};

inline Report render_report(const ConfusionMatrix& cm) { return {render_report_text(cm), render_report_csv(cm)}; }

}  // namespace floodgate
