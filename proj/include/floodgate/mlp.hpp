#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "floodgate/dataset.hpp"
#include "floodgate/error.hpp"
#include "floodgate/io_util.hpp"
#include "floodgate/rng.hpp"

namespace floodgate {

inline constexpr std::size_t kHiddenUnits = 106;
inline constexpr std::size_t kOutputUnits = kClassCount;

enum class Activation { Tanh, Softmax };

using Probabilities = std::array<double, kOutputUnits>;

inline double tanh_activate(double x) { return std::tanh(x); }

/// Max-shifted softmax; numerically identical in exact arithmetic to the
/// plain exp/sum form and never overflows.
inline Probabilities softmax(const std::array<double, kOutputUnits>& z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  Probabilities out;
  double sum = 0.0;
  for (std::size_t i = 0; i < kOutputUnits; ++i) {
    out[i] = std::exp(z[i] - zmax);
    sum += out[i];
  }
  for (auto& p : out) p /= sum;
  return out;
}

inline constexpr double kProbabilityFloor = 1e-15;

inline double cross_entropy_loss(const Probabilities& p, TrafficClass label) {
  return -std::log(std::max(p[index_of(label)], kProbabilityFloor));
}

/// Fully connected layer. weights are row-major (out_dim x in_dim).
struct DenseLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> weights;
  std::vector<double> biases;
  Activation activation = Activation::Tanh;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out, Activation act)
      : in_dim(in), out_dim(out), weights(in * out, 0.0), biases(out, 0.0), activation(act) {}

  double& w(std::size_t row, std::size_t col) { return weights[row * in_dim + col]; }
  double w(std::size_t row, std::size_t col) const { return weights[row * in_dim + col]; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// The 24-106-5 classifier: tanh hidden layer, softmax output, plus the
/// normalization statistics its inputs were fitted with.
struct MlpModel {
  static constexpr int kFormatVersion = 1;

  DenseLayer hidden{kFeatureCount, kHiddenUnits, Activation::Tanh};
  DenseLayer output{kHiddenUnits, kOutputUnits, Activation::Softmax};
  NormalizationStats norm = NormalizationStats::identity();
  int version = kFormatVersion;

  /// Parameter blocks in a fixed order: hidden W, hidden b, output W, output b.
  std::array<std::span<double>, 4> parameters() {
    return {hidden.weights, hidden.biases, output.weights, output.biases};
  }
  std::array<std::span<const double>, 4> parameters() const {
    return {hidden.weights, hidden.biases, output.weights, output.biases};
  }

  std::size_t parameter_count() const {
    return hidden.weights.size() + hidden.biases.size() + output.weights.size() + output.biases.size();
  }

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

/// Glorot-uniform weights, zero biases.
inline MlpModel init_model(std::uint64_t seed, const NormalizationStats& norm) {
  MlpModel m;
  m.norm = norm;
  Rng rng(seed);
  for (DenseLayer* layer : {&m.hidden, &m.output}) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer->in_dim + layer->out_dim));
    for (auto& w : layer->weights) w = rng.uniform(-limit, limit);
  }
  return m;
}

namespace detail {

struct ForwardTrace {
  std::array<double, kHiddenUnits> hidden{};  // post-tanh
  std::array<double, kOutputUnits> logits{};
  Probabilities probs{};
};

inline ForwardTrace forward_trace(const MlpModel& m, std::span<const double> x) {
  ForwardTrace t;
  for (std::size_t j = 0; j < kHiddenUnits; ++j) {
    const double* row = &m.hidden.weights[j * kFeatureCount];
    double acc = m.hidden.biases[j];
    for (std::size_t i = 0; i < kFeatureCount; ++i) acc += row[i] * x[i];
    t.hidden[j] = tanh_activate(acc);
  }
  for (std::size_t k = 0; k < kOutputUnits; ++k) {
    const double* row = &m.output.weights[k * kHiddenUnits];
    double acc = m.output.biases[k];
    for (std::size_t j = 0; j < kHiddenUnits; ++j) acc += row[j] * t.hidden[j];
    t.logits[k] = acc;
  }
  t.probs = softmax(t.logits);
  return t;
}

inline void check_input(std::span<const double> x) {
  if (x.size() != kFeatureCount)
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(kFeatureCount) + " inputs, got " + std::to_string(x.size()));
}

}  // namespace detail

/// Class probabilities for an already-normalized input.
inline Probabilities forward(const MlpModel& m, std::span<const double> x) {
  detail::check_input(x);
  return detail::forward_trace(m, x).probs;
}

/// Raw network outputs before softmax.
inline std::array<double, kOutputUnits> logits(const MlpModel& m, std::span<const double> x) {
  detail::check_input(x);
  return detail::forward_trace(m, x).logits;
}

/// Argmax with ties resolved toward the lowest class ordinal.
template <typename Scores>
TrafficClass argmax_class(const Scores& scores) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < kOutputUnits; ++k)
    if (scores[k] > scores[best]) best = k;
  return class_from_index(best);
}

inline TrafficClass predict(const MlpModel& m, std::span<const double> x) {
  return argmax_class(forward(m, x));
}

/// Normalizes a raw feature vector with the model's statistics, then predicts.
inline Probabilities forward_raw(const MlpModel& m, const FeatureVector& raw) {
  const auto x = apply_normalization(raw, m.norm);
  return forward(m, x);
}

// ---------------------------------------------------------------------------
// Backpropagation

/// Gradient buffers laid out exactly like MlpModel::parameters().
struct Gradients {
  std::vector<double> hidden_w = std::vector<double>(kHiddenUnits * kFeatureCount, 0.0);
  std::vector<double> hidden_b = std::vector<double>(kHiddenUnits, 0.0);
  std::vector<double> output_w = std::vector<double>(kOutputUnits * kHiddenUnits, 0.0);
  std::vector<double> output_b = std::vector<double>(kOutputUnits, 0.0);
  double loss = 0.0;  // mean batch loss at the evaluated parameters

  std::array<std::span<double>, 4> blocks() { return {hidden_w, hidden_b, output_w, output_b}; }
  std::array<std::span<const double>, 4> blocks() const { return {hidden_w, hidden_b, output_w, output_b}; }
};

/// Mean cross-entropy gradient over the batch. Uses dL/dz = p - onehot at the
/// softmax and tanh' = 1 - tanh^2 in the hidden layer.
inline Gradients gradients(const MlpModel& m, std::span<const LabeledRecord> batch) {
  if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "gradient of an empty batch");
  Gradients g;
  std::array<double, kHiddenUnits> delta_hidden{};
  for (const auto& rec : batch) {
    const auto& x = rec.features;
    const auto t = detail::forward_trace(m, x);
    const std::size_t label = index_of(rec.label);
    g.loss += cross_entropy_loss(t.probs, rec.label);

    std::array<double, kOutputUnits> delta_out;
    for (std::size_t k = 0; k < kOutputUnits; ++k)
      delta_out[k] = t.probs[k] - (k == label ? 1.0 : 0.0);

    delta_hidden.fill(0.0);
    for (std::size_t k = 0; k < kOutputUnits; ++k) {
      const double d = delta_out[k];
      g.output_b[k] += d;
      double* grow = &g.output_w[k * kHiddenUnits];
      const double* wrow = &m.output.weights[k * kHiddenUnits];
      for (std::size_t j = 0; j < kHiddenUnits; ++j) {
        grow[j] += d * t.hidden[j];
        delta_hidden[j] += d * wrow[j];
      }
    }
    for (std::size_t j = 0; j < kHiddenUnits; ++j) {
      const double d = delta_hidden[j] * (1.0 - t.hidden[j] * t.hidden[j]);
      g.hidden_b[j] += d;
      double* grow = &g.hidden_w[j * kFeatureCount];
      for (std::size_t i = 0; i < kFeatureCount; ++i) grow[i] += d * x[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto block : g.blocks())
    for (auto& v : block) v *= inv;
  g.loss *= inv;
  return g;
}

/// Mean loss of the model over a (normalized) dataset.
inline double mean_loss(const MlpModel& m, std::span<const LabeledRecord> records) {
  if (records.empty()) throw Error(ErrorCode::EmptyDataset, "loss over an empty dataset");
  double total = 0.0;
  for (const auto& r : records) total += cross_entropy_loss(detail::forward_trace(m, r.features).probs, r.label);
  return total / static_cast<double>(records.size());
}

inline double accuracy(const MlpModel& m, std::span<const LabeledRecord> records) {
  if (records.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& r : records) hits += predict(m, r.features) == r.label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  std::uint64_t seed = 42;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t patience = 10;  // 0 disables early stopping

  void validate() const {
    if (!(learning_rate > 0) || !std::isfinite(learning_rate))
      throw Error(ErrorCode::BadConfig, "learning_rate must be positive");
    if (epochs == 0) throw Error(ErrorCode::BadConfig, "epochs must be positive");
    if (batch_size == 0) throw Error(ErrorCode::BadConfig, "batch_size must be positive");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
      throw Error(ErrorCode::BadConfig, "Adam betas must lie in [0, 1)");
    if (!(epsilon > 0)) throw Error(ErrorCode::BadConfig, "Adam epsilon must be positive");
  }
};

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 1-based; the epoch whose model was returned
};

struct TrainResult {
  MlpModel model;
  TrainHistory history;
};

/// Any parameter beyond this magnitude is treated as divergence. Normalized
/// inputs never need weights anywhere near it, and the clamped loss alone
/// cannot signal a blow-up (it saturates at -ln 1e-15).
inline constexpr double kDivergenceBound = 1e4;

class AdamOptimizer {
 public:
  AdamOptimizer(const TrainConfig& cfg, std::size_t n_params)
      : cfg_(cfg), m_(n_params, 0.0), v_(n_params, 0.0) {}

  void step(MlpModel& model, const Gradients& g) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::size_t idx = 0;
    auto params = model.parameters();
    const auto grads = g.blocks();
    for (std::size_t b = 0; b < params.size(); ++b) {
      for (std::size_t i = 0; i < params[b].size(); ++i, ++idx) {
        const double gi = grads[b][i];
        m_[idx] = cfg_.beta1 * m_[idx] + (1.0 - cfg_.beta1) * gi;
        v_[idx] = cfg_.beta2 * v_[idx] + (1.0 - cfg_.beta2) * gi * gi;
        const double mhat = m_[idx] / bc1;
        const double vhat = v_[idx] / bc2;
        params[b][i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
      }
    }
  }

 private:
  TrainConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

namespace detail {
inline bool diverged(const MlpModel& m) {
  for (auto block : m.parameters())
    for (double p : block)
      if (!std::isfinite(p) || std::abs(p) > kDivergenceBound) return true;
  return false;
}
}  // namespace detail

using EpochCallback = std::function<void(std::size_t epoch, const EpochStats&)>;

/// Mini-batch Adam on raw (unnormalized) features. Normalization is fitted on
/// `train` and stored in the returned model. The model with the lowest
/// validation loss is returned; training stops after `patience` epochs
/// without improvement.
inline TrainResult train(const Dataset& train_raw, const Dataset& val_raw, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  if (train_raw.empty() || val_raw.empty())
    throw Error(ErrorCode::EmptyDataset, "training and validation sets must be non-empty");
  cfg.validate();

  const auto norm = fit_normalization(train_raw);
  const auto train_set = apply_normalization(train_raw, norm);
  const auto val_set = apply_normalization(val_raw, norm);

  MlpModel model = init_model(cfg.seed, norm);
  AdamOptimizer adam(cfg, model.parameter_count());
  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<LabeledRecord> order = train_set.records;
  TrainResult result{model, {}};
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<LabeledRecord>(order));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const auto g = gradients(model, std::span<const LabeledRecord>(order).subspan(start, len));
      if (!std::isfinite(g.loss))
        throw Error(ErrorCode::NonFiniteLoss, "loss became non-finite in epoch " + std::to_string(epoch));
      loss_sum += g.loss;
      ++batches;
      adam.step(model, g);
      if (detail::diverged(model))
        throw Error(ErrorCode::NonFiniteLoss,
                    "parameters diverged in epoch " + std::to_string(epoch) + " (lr " +
                        format_double(cfg.learning_rate) + " too large?)");
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(batches);
    stats.val_loss = mean_loss(model, val_set.records);
    stats.val_accuracy = accuracy(model, val_set.records);
    if (!std::isfinite(stats.val_loss))
      throw Error(ErrorCode::NonFiniteLoss, "validation loss became non-finite in epoch " + std::to_string(epoch));
    result.history.epochs.push_back(stats);
    if (on_epoch) on_epoch(epoch, stats);

    if (stats.val_loss < best_val) {
      best_val = stats.val_loss;
      result.model = model;
      result.history.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Persistence

inline constexpr std::string_view kModelMagic = "FLOODGATE-MLP";

inline void save_model(std::ostream& os, const MlpModel& m) {
  auto write_values = [&os](std::span<const double> vals) {
    for (std::size_t i = 0; i < vals.size(); ++i) os << (i ? " " : "") << format_double(vals[i]);
    os << '\n';
  };
  os << kModelMagic << " v" << m.version << '\n';
  os << "layers " << m.hidden.in_dim << ' ' << m.hidden.out_dim << ' ' << m.output.out_dim << '\n';
  os << "activations tanh softmax\n";
  os << "norm_mean ";
  write_values(m.norm.mean);
  os << "norm_std ";
  write_values(m.norm.std);
  for (const DenseLayer* layer : {&m.hidden, &m.output}) {
    os << "weights " << layer->out_dim << ' ' << layer->in_dim << '\n';
    for (std::size_t r = 0; r < layer->out_dim; ++r)
      write_values(std::span<const double>(layer->weights).subspan(r * layer->in_dim, layer->in_dim));
    os << "biases " << layer->out_dim << '\n';
    write_values(layer->biases);
  }
}

inline void save_model(const MlpModel& m, const std::filesystem::path& path) {
  atomic_write(path, [&](std::ostream& os) { save_model(os, m); });
}

namespace detail {

class TokenReader {
 public:
  explicit TokenReader(std::istream& is) : is_(is) {}

  std::string next(const char* what) {
    std::string tok;
    if (!(is_ >> tok)) throw Error(ErrorCode::CorruptModel, std::string("unexpected end of file reading ") + what);
    return tok;
  }

  void expect(std::string_view keyword) {
    const auto tok = next(keyword.data());
    if (tok != keyword) throw Error(ErrorCode::CorruptModel, "expected '" + std::string(keyword) + "', got '" + tok + "'");
  }

  std::size_t size(const char* what) {
    const auto tok = next(what);
    const auto v = parse_int<std::size_t>(tok);
    if (!v) throw Error(ErrorCode::CorruptModel, std::string("bad ") + what + " '" + tok + "'");
    return *v;
  }

  double value(const char* what) {
    const auto tok = next(what);
    const auto v = parse_double(tok);
    if (!v || !std::isfinite(*v)) throw Error(ErrorCode::CorruptModel, std::string("bad ") + what + " '" + tok + "'");
    return *v;
  }

  void values(std::span<double> out, const char* what) {
    for (auto& v : out) v = value(what);
  }

 private:
  std::istream& is_;
};

inline void read_layer(TokenReader& in, DenseLayer& layer) {
  in.expect("weights");
  const auto rows = in.size("weight rows");
  const auto cols = in.size("weight cols");
  if (rows != layer.out_dim || cols != layer.in_dim)
    throw Error(ErrorCode::CorruptModel, "weight block " + std::to_string(rows) + "x" + std::to_string(cols) +
                                             " does not match " + std::to_string(layer.out_dim) + "x" +
                                             std::to_string(layer.in_dim));
  in.values(layer.weights, "weight");
  in.expect("biases");
  if (in.size("bias count") != layer.out_dim) throw Error(ErrorCode::CorruptModel, "bias count mismatch");
  in.values(layer.biases, "bias");
}

}  // namespace detail

inline MlpModel load_model(std::istream& is) {
  detail::TokenReader in(is);
  std::string magic;
  if (!(is >> magic) || magic != kModelMagic) throw Error(ErrorCode::BadMagic, "not a floodgate model file");
  const auto version = in.next("version");
  if (version != "v" + std::to_string(MlpModel::kFormatVersion))
    throw Error(ErrorCode::VersionMismatch, "model version " + version + ", expected v" +
                                                std::to_string(MlpModel::kFormatVersion));
  MlpModel m;
  in.expect("layers");
  const auto n_in = in.size("input width");
  const auto n_hidden = in.size("hidden width");
  const auto n_out = in.size("output width");
  if (n_in != kFeatureCount || n_hidden != kHiddenUnits || n_out != kOutputUnits)
    throw Error(ErrorCode::CorruptModel, "layer shape " + std::to_string(n_in) + "-" + std::to_string(n_hidden) +
                                             "-" + std::to_string(n_out) + " is not 24-106-5");
  in.expect("activations");
  in.expect("tanh");
  in.expect("softmax");
  in.expect("norm_mean");
  in.values(m.norm.mean, "norm_mean");
  in.expect("norm_std");
  in.values(m.norm.std, "norm_std");
  for (double s : m.norm.std)
    if (!(s > 0)) throw Error(ErrorCode::CorruptModel, "norm_std entries must be positive");
  detail::read_layer(in, m.hidden);
  detail::read_layer(in, m.output);
  std::string extra;
  if (is >> extra) throw Error(ErrorCode::CorruptModel, "trailing data '" + extra + "'");
  return m;
}

inline MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return load_model(in);
}

}  // namespace floodgate
