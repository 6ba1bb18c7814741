#pragma once

// Command-line driver: synth -> extract -> train -> eval -> classify.
// Exit codes: 0 success, 1 usage error, 2 input/format error, 3 runtime failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "floodgate/dataset.hpp"
#include "floodgate/error.hpp"
#include "floodgate/features.hpp"
#include "floodgate/metrics.hpp"
#include "floodgate/mlp.hpp"
#include "floodgate/pcap.hpp"
#include "floodgate/synth.hpp"

namespace floodgate::cli {

enum ExitStatus : int { kOk = 0, kUsage = 1, kInput = 2, kRuntime = 3 };

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteLoss:
      return kRuntime;
    case ErrorCode::BadRatios:
      return kUsage;
    default:
      return kInput;
  }
}

inline std::uint64_t default_seed() {
  if (const char* env = std::getenv("FLOODGATE_SEED")) {
    if (const auto v = parse_int<std::uint64_t>(env)) return *v;
  }
  return 42;
}

/// Packets from a pcap file in timestamp order (stable for equal stamps).
inline std::vector<PacketMeta> load_packets(const std::filesystem::path& path) {
  auto metas = read_pcap(path);
  std::stable_sort(metas.begin(), metas.end(), [](const auto& a, const auto& b) { return a.ts < b.ts; });
  return metas;
}

inline void print_class_counts(std::ostream& out, const Dataset& ds) {
  const auto counts = ds.class_counts();
  for (auto c : kAllClasses) out << "  " << std::left << std::setw(12) << label_name(c) << counts[index_of(c)] << '\n';
  out << std::right;
}

inline std::optional<SplitRatios> parse_split(const std::string& text) {
  const auto parts = split_fields(text, ',');
  if (parts.size() != 3) return std::nullopt;
  SplitRatios r;
  const auto a = parse_double(parts[0]);
  const auto b = parse_double(parts[1]);
  const auto c = parse_double(parts[2]);
  if (!a || !b || !c) return std::nullopt;
  r.train = *a;
  r.validation = *b;
  r.test = *c;
  const double sum = r.train + r.validation + r.test;
  if (!(r.train > 0 && r.validation > 0 && r.test > 0) || std::abs(sum - 1.0) > 1e-9) return std::nullopt;
  return r;
}

struct Options {
  // synth
  std::string config, out_pcap, out_truth;
  // extract / classify
  std::string pcap, truth, out;
  double window = kDefaultWindowSeconds;
  // train
  std::string data, out_model, split = "0.7,0.15,0.15", test_out;
  std::uint64_t seed = 0;
  std::size_t epochs = 100, batch = 64, patience = 10;
  double lr = 1e-3;
  // eval / classify
  std::string model, report, report_csv;
};

inline int cmd_synth(const Options& o, std::ostream& out) {
  const auto cfg = load_scenario(o.config);
  const auto summary = run_scenario(cfg, o.out_pcap, o.out_truth);
  out << "wrote " << summary.packets << " packets (" << summary.episodes << " attack episodes, "
      << format_double(cfg.duration) << " s) to " << o.out_pcap << '\n';
  return kOk;
}

inline int cmd_extract(const Options& o, std::ostream& out, std::ostream& err) {
  if (!(o.window > 0)) {
    err << "--window must be positive\n";
    return kUsage;
  }
  const auto packets = load_packets(o.pcap);
  std::vector<TruthInterval> truth;
  if (!o.truth.empty()) truth = read_truth(o.truth);
  const auto ds = extract_dataset(packets, o.window, truth);
  write_csv(ds, o.out);
  out << "extracted " << ds.size() << " windows from " << packets.size() << " packets\n";
  print_class_counts(out, ds);
  return kOk;
}

inline void print_metrics_line(std::ostream& out, const char* tag, const ConfusionMatrix& cm) {
  const auto overall = metric_set(collapse_binary(cm));
  out << tag << " accuracy " << (cm.total() ? format_2dp(overall_accuracy(cm)) : std::string("undefined"))
      << "%  binary F-score " << format_metric(overall.f_score, "undefined") << '\n';
}

inline ConfusionMatrix evaluate(const MlpModel& model, const Dataset& raw) {
  ConfusionMatrix cm;
  for (const auto& r : raw.records) ++cm.at(r.label, argmax_class(forward_raw(model, r.features)));
  return cm;
}

inline int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const auto ratios = parse_split(o.split);
  if (!ratios) {
    err << "--split must be three positive ratios summing to 1, e.g. 0.7,0.15,0.15\n";
    return kUsage;
  }
  if (!(o.lr > 0) || o.epochs == 0 || o.batch == 0) {
    err << "--lr, --epochs and --batch must be positive\n";
    return kUsage;
  }
  const auto ds = read_csv(o.data);
  const auto parts = stratified_split(ds, *ratios, o.seed);
  out << "records: train " << parts.train.size() << ", validation " << parts.validation.size() << ", test "
      << parts.test.size() << '\n';

  TrainConfig cfg;
  cfg.learning_rate = o.lr;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.seed = o.seed;
  cfg.patience = o.patience;
  const auto result = train(parts.train, parts.validation, cfg, [&](std::size_t epoch, const EpochStats& s) {
    out << "epoch " << std::setw(3) << epoch << "  train_loss " << std::fixed << std::setprecision(6) << s.train_loss
        << "  val_loss " << s.val_loss << "  val_acc " << std::setprecision(4) << s.val_accuracy << '\n'
        << std::defaultfloat;
  });
  save_model(result.model, o.out_model);
  out << "best epoch " << result.history.best_epoch << "; model written to " << o.out_model << '\n';
  print_metrics_line(out, "validation", evaluate(result.model, parts.validation));
  print_metrics_line(out, "test", evaluate(result.model, parts.test));
  if (!o.test_out.empty()) write_csv(parts.test, o.test_out);
  return kOk;
}

inline int cmd_eval(const Options& o, std::ostream& out) {
  const auto model = load_model(o.model);
  const auto ds = read_csv(o.data);
  const auto cm = evaluate(model, ds);
  const auto report = render_report(cm);
  std::filesystem::path csv_path = o.report_csv;
  if (csv_path.empty()) {
    csv_path = std::filesystem::path(o.report).replace_extension(".csv");
    if (csv_path == std::filesystem::path(o.report)) csv_path += ".csv";
  }
  atomic_write(o.report, [&](std::ostream& os) { os << report.text; });
  atomic_write(csv_path, [&](std::ostream& os) { os << report.csv; });
  out << report.text;
  return kOk;
}

inline int cmd_classify(const Options& o, std::ostream& out, std::ostream& err) {
  if (!(o.window > 0)) {
    err << "--window must be positive\n";
    return kUsage;
  }
  const auto model = load_model(o.model);
  const auto packets = load_packets(o.pcap);
  const auto windows = window_packets(packets, o.window);
  std::array<std::size_t, kClassCount> tally{};
  atomic_write(o.out, [&](std::ostream& os) {
    os << "window_start,window_end,predicted_label,p_normal,p_syn,p_ack,p_http,p_udp\n";
    for (const auto& w : windows) {
      if (w.packets.empty()) continue;
      const auto p = forward_raw(model, extract_features(w));
      const auto cls = argmax_class(p);
      ++tally[index_of(cls)];
      os << format_double(w.start_ts) << ',' << format_double(w.end_ts) << ',' << label_name(cls);
      for (double v : p) os << ',' << format_double(v);
      os << '\n';
    }
  });
  out << "classified windows:\n";
  for (auto c : kAllClasses) out << "  " << std::left << std::setw(12) << label_name(c) << tally[index_of(c)] << '\n';
  out << std::right;
  return kOk;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"floodgate: DDoS flood detection with a 24-106-5 neural network"};
  app.require_subcommand(1);
  Options o;
  o.seed = default_seed();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic scenario as pcap + ground truth");
  synth->add_option("--config", o.config, "Scenario config file")->required();
  synth->add_option("--out-pcap", o.out_pcap, "Output pcap path")->required();
  synth->add_option("--out-truth", o.out_truth, "Output ground-truth CSV path")->required();

  auto* extract = app.add_subcommand("extract", "Window a pcap and write the labeled feature CSV");
  extract->add_option("--pcap", o.pcap, "Input pcap")->required();
  extract->add_option("--truth", o.truth, "Ground-truth CSV (windows default to normal)");
  extract->add_option("--window", o.window, "Window length in seconds")->capture_default_str();
  extract->add_option("--out", o.out, "Output dataset CSV")->required();

  auto* train_cmd = app.add_subcommand("train", "Train the classifier on a dataset CSV");
  train_cmd->add_option("--data", o.data, "Dataset CSV")->required();
  train_cmd->add_option("--out-model", o.out_model, "Output model file")->required();
  train_cmd->add_option("--seed", o.seed, "Seed (default: $FLOODGATE_SEED or 42)");
  train_cmd->add_option("--epochs", o.epochs, "Maximum epochs")->capture_default_str();
  train_cmd->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--batch", o.batch, "Mini-batch size")->capture_default_str();
  train_cmd->add_option("--patience", o.patience, "Early-stop patience in epochs (0 disables)")->capture_default_str();
  train_cmd->add_option("--split", o.split, "train,validation,test ratios")->capture_default_str();
  train_cmd->add_option("--test-out", o.test_out, "Also write the held-out test split to this CSV");

  auto* eval = app.add_subcommand("eval", "Evaluate a model on a labeled dataset CSV");
  eval->add_option("--data", o.data, "Dataset CSV")->required();
  eval->add_option("--model", o.model, "Model file")->required();
  eval->add_option("--report", o.report, "Text report output path")->required();
  eval->add_option("--report-csv", o.report_csv, "CSV report path (default: report path with .csv)");

  auto* classify = app.add_subcommand("classify", "Classify every window of a pcap");
  classify->add_option("--pcap", o.pcap, "Input pcap")->required();
  classify->add_option("--model", o.model, "Model file")->required();
  classify->add_option("--window", o.window, "Window length in seconds")->capture_default_str();
  classify->add_option("--out", o.out, "Output predictions CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help requests exit 0; everything else is a usage error.
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return cmd_synth(o, out);
    if (*extract) return cmd_extract(o, out, err);
    if (*train_cmd) return cmd_train(o, out, err);
    if (*eval) return cmd_eval(o, out);
    if (*classify) return cmd_classify(o, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}

}  // namespace floodgate::cli
