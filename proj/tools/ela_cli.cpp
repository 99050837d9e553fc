// ela: error level analysis, dataset preparation, CNN training and evaluation.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 training diverged.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "ela/dataset.hpp"
#include "ela/error_level.hpp"
#include "ela/metrics.hpp"
#include "ela/train.hpp"

namespace {

namespace fs = std::filesystem;
using namespace ela;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDiverged = 3;

struct Options {
  std::string input;
  std::string second;
  std::string out;
  int quality = 95;
  std::string size = "128x128";
  std::uint64_t seed = 42;
  std::vector<double> ratios{0.8, 0.2, 0.0};
  bool no_enhance = false;
  bool raw = false;
  int epochs = 20;
  int batch = 32;
  double lr = 1e-4;
  std::vector<int> channels{16, 32, 64};
  unsigned threads = 0;
  bool deterministic = false;
  std::string split = "val";
  double threshold = 0.5;
  double beta = 1.0;
  std::string csv_out;
  std::vector<int> rect;
  int donor_quality = 60;
  int count = 100;
  std::vector<int> donor_range{55, 75};
};

unsigned worker_threads(const Options& o) {
  if (o.deterministic) return 1;
  if (o.threads > 0) return o.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, s.find_last_not_of(" \t\r") - b + 1));
}

// Command-line arguments plus `--key=value` for every config entry the command
// line did not set.
std::vector<std::string> with_config_defaults(const CLI::App& sub, const std::string& path, int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::istringstream in(read_text(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::InvalidArgument, path + ":" + std::to_string(lineno) + ": expected key=value");
    const auto key = trim(std::string_view(line).substr(0, eq));
    const auto value = trim(std::string_view(line).substr(eq + 1));
    const auto* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config")
      throw Error(ErrorCode::InvalidArgument,
                  path + ":" + std::to_string(lineno) + ": unknown key '" + key + "' for " + sub.get_name());
    if (opt->count() == 0) args.push_back("--" + key + "=" + value);
  }
  return args;
}

std::string seed_line(std::uint64_t seed) { return "# seed=" + std::to_string(seed) + "\n"; }

int cmd_ela(const Options& o) {
  const auto img = decode_image(read_file(o.input));
  const auto map = compute_ela(img, QualityLevel{o.quality});
  write_ela(o.out, o.input, map, !o.raw);
  std::printf("ela: %s -> %s (%dx%d, q=%d, max_error=%d)\n", o.input.c_str(), o.out.c_str(), map.width,
              map.height, o.quality, map.max_error);
  return 0;
}

int cmd_scan(const Options& o) {
  const auto result = scan_corpus(o.input);
  for (const auto& s : result.skipped) std::fprintf(stderr, "skipped %s: %s\n", s.path.c_str(), s.reason.c_str());
  write_text_atomic(o.out, format_records_csv(result.records));
  std::size_t tampered = 0;
  for (const auto& r : result.records) tampered += r.label == Label::Tampered ? 1 : 0;
  std::printf("scan: %zu authentic, %zu tampered, %zu skipped -> %s\n", result.records.size() - tampered, tampered,
              result.skipped.size(), o.out.c_str());
  return 0;
}

int cmd_split(const Options& o) {
  if (o.ratios.size() != 3) throw Error(ErrorCode::InvalidArgument, "--ratios needs three values");
  const auto records = parse_records_csv(read_text(o.input));
  PreprocessSettings settings;
  settings.quality = QualityLevel{o.quality};
  std::tie(settings.target_width, settings.target_height) = parse_size(o.size);
  settings.enhance = !o.no_enhance;
  const auto m = split_manifest(records, {o.ratios[0], o.ratios[1], o.ratios[2]}, o.seed, settings);
  write_text_atomic(o.out, format_manifest(m));
  std::printf("split: train %zu, val %zu, test %zu (seed %llu) -> %s\n", m.in_split(Split::Train).size(),
              m.in_split(Split::Val).size(), m.in_split(Split::Test).size(),
              static_cast<unsigned long long>(o.seed), o.out.c_str());
  return 0;
}

int cmd_train(const Options& o) {
  const auto manifest = parse_manifest(read_text(o.input));
  TrainConfig config;
  config.epochs = o.epochs;
  config.batch_size = o.batch;
  config.adam.learning_rate = o.lr;
  config.seed = o.seed;
  config.conv_channels = o.channels;
  config.threads = worker_threads(o);
  fs::create_directories(o.out);
  const auto result = train(manifest, config, [](const EpochRecord& e) {
    std::fprintf(stderr, "epoch %d: train_loss %.4f train_acc %.4f val_loss %.4f val_acc %.4f\n", e.epoch,
                 e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy);
  });
  const std::string preamble = seed_line(o.seed) + "# epochs=" + std::to_string(o.epochs) +
                               "\n# batch=" + std::to_string(o.batch) + "\n# lr=" + csv::shortest(o.lr) + "\n";
  write_file_atomic(fs::path(o.out) / "model.ckpt", save_checkpoint(result.params));
  write_text_atomic(fs::path(o.out) / "history.csv", format_history(result.history, preamble));
  const double last_val = result.history.epochs.empty() ? 0.0 : result.history.epochs.back().val_accuracy;
  std::printf("train: %d epochs, final val_acc %.4f -> %s\n", o.epochs, last_val, o.out.c_str());
  return 0;
}

int cmd_predict(const Options& o) {
  const auto params = load_checkpoint(read_file(o.input));
  const auto manifest = parse_manifest(read_text(o.second));
  const auto split = parse_split(o.split);
  const auto preds = predict(params, manifest, split, worker_threads(o));
  const std::string preamble = seed_line(manifest.seed) + "# checkpoint=" + o.input + "\n# split=" + o.split + "\n";
  write_text_atomic(o.out, format_predictions(preds, preamble));
  std::printf("predict: %zu rows (%s) -> %s\n", preds.rows.size(), o.split.c_str(), o.out.c_str());
  return 0;
}

int cmd_evaluate(const Options& o) {
  const auto parsed = parse_predictions(read_text(o.input));
  for (const auto& w : parsed.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  const auto report = evaluate(parsed.predictions, o.threshold, o.beta);
  const auto text = format_report_text(report);
  if (!o.out.empty()) write_text_atomic(o.out, text);
  if (!o.csv_out.empty()) write_text_atomic(o.csv_out, format_report_csv(report));
  std::fputs(text.c_str(), stdout);
  return 0;
}

// The "# seed=" line of an input CSV, so derived files keep the seed.
std::string carried_seed(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line) && line.starts_with("#"))
    if (line.starts_with("# seed=")) return line + "\n";
  return {};
}

int cmd_roc(const Options& o) {
  const auto text = read_text(o.input);
  const auto parsed = parse_predictions(text);
  for (const auto& w : parsed.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  const auto curve = roc_curve(parsed.predictions);
  write_text_atomic(o.out, carried_seed(text) + format_roc(curve));
  std::printf("roc: %zu points, auc %.6f -> %s\n", curve.points.size(), auc(curve), o.out.c_str());
  return 0;
}

int cmd_synth(const Options& o) {
  if (o.rect.size() != 4) throw Error(ErrorCode::InvalidArgument, "--rect needs x,y,w,h");
  const auto base = decode_image(read_file(o.input));
  const Rect rect{o.rect[0], o.rect[1], o.rect[2], o.rect[3]};
  const auto out = synth_splice(base, rect, QualityLevel{o.donor_quality}, QualityLevel{o.quality}, o.seed);
  write_file_atomic(o.out, encode_png(out));
  std::printf("synth: %s -> %s (donor q=%d, base q=%d)\n", o.input.c_str(), o.out.c_str(), o.donor_quality,
              o.quality);
  return 0;
}

int cmd_synth_corpus(const Options& o) {
  if (o.donor_range.size() != 2) throw Error(ErrorCode::InvalidArgument, "--donor-range needs lo,hi");
  SyntheticCorpusOptions opt;
  opt.count_per_class = o.count;
  std::tie(opt.width, opt.height) = parse_size(o.size);
  opt.seed = o.seed;
  opt.base_quality = QualityLevel{o.quality};
  opt.donor_quality_min = QualityLevel{o.donor_range[0]}.value();
  opt.donor_quality_max = QualityLevel{o.donor_range[1]}.value();
  require(opt.count_per_class >= 1 && opt.donor_quality_min <= opt.donor_quality_max, ErrorCode::InvalidArgument,
          "count must be positive and donor range ordered");
  write_synthetic_corpus(o.out, opt);
  std::printf("synth-corpus: %d authentic + %d tampered (%dx%d, seed %llu) -> %s\n", o.count, o.count, opt.width,
              opt.height, static_cast<unsigned long long>(o.seed), o.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Error level analysis and forgery classification"};
  app.require_subcommand(1);
  Options o;

  auto add_quality = [&](CLI::App* c) {
    c->add_option("--quality", o.quality, "JPEG quality for recompression")->check(CLI::Range(1, 100))->capture_default_str();
  };
  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "seed for every random choice")->capture_default_str(); };
  auto add_threads = [&](CLI::App* c) {
    c->add_option("--threads", o.threads, "preprocessing workers (0 = all cores)");
    c->add_flag("--deterministic", o.deterministic, "single-threaded end to end");
  };

  auto* ela_cmd = app.add_subcommand("ela", "write the enhanced ELA map of one image as PNG plus sidecar");
  ela_cmd->add_option("input", o.input, "input image")->required();
  ela_cmd->add_option("--out", o.out, "output PNG")->required();
  ela_cmd->add_flag("--raw", o.raw, "write the unscaled difference map");
  add_quality(ela_cmd);

  auto* scan = app.add_subcommand("scan", "list Au/ and Tp/ images of a corpus as path,label CSV");
  scan->add_option("root", o.input, "corpus root")->required();
  scan->add_option("--out", o.out, "records CSV")->required();

  auto* split = app.add_subcommand("split", "stratified seeded train/val/test manifest");
  split->add_option("records", o.input, "records CSV from scan")->required();
  split->add_option("--out", o.out, "manifest CSV")->required();
  split->add_option("--ratios", o.ratios, "train,val,test")->delimiter(',')->expected(3)->capture_default_str();
  split->add_option("--size", o.size, "network input WxH")->capture_default_str();
  split->add_flag("--no-enhance", o.no_enhance, "feed raw ELA differences instead of rescaled maps");
  add_quality(split);
  add_seed(split);

  auto* train_cmd = app.add_subcommand("train", "train the CNN; writes model.ckpt and history.csv");
  train_cmd->add_option("manifest", o.input, "manifest CSV")->required();
  train_cmd->add_option("--out", o.out, "output directory")->required();
  train_cmd->add_option("--epochs", o.epochs)->check(CLI::NonNegativeNumber)->capture_default_str();
  train_cmd->add_option("--batch", o.batch)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--lr", o.lr)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--channels", o.channels, "conv block widths")->delimiter(',')->capture_default_str();
  add_seed(train_cmd);
  add_threads(train_cmd);

  auto* predict_cmd = app.add_subcommand("predict", "write p_authentic/p_tampered for one split");
  predict_cmd->add_option("checkpoint", o.input, "model.ckpt")->required();
  predict_cmd->add_option("manifest", o.second, "manifest CSV")->required();
  predict_cmd->add_option("--out", o.out, "predictions CSV")->required();
  predict_cmd->add_option("--split", o.split)->check(CLI::IsMember({"train", "val", "test"}))->capture_default_str();
  add_threads(predict_cmd);

  auto* evaluate_cmd = app.add_subcommand("evaluate", "metrics report for a predictions CSV");
  evaluate_cmd->add_option("predictions", o.input, "predictions CSV")->required();
  evaluate_cmd->add_option("--threshold", o.threshold)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  evaluate_cmd->add_option("--beta", o.beta)->check(CLI::PositiveNumber)->capture_default_str();
  evaluate_cmd->add_option("--out", o.out, "also write the key=value report here");
  evaluate_cmd->add_option("--csv-out", o.csv_out, "machine-readable report");

  auto* roc_cmd = app.add_subcommand("roc", "ROC curve of a predictions CSV");
  roc_cmd->add_option("predictions", o.input, "predictions CSV")->required();
  roc_cmd->add_option("--out", o.out, "ROC CSV")->required();

  auto* synth = app.add_subcommand("synth", "splice a recompressed region into one image");
  synth->add_option("input", o.input, "base image")->required();
  synth->add_option("--out", o.out, "output PNG")->required();
  synth->add_option("--rect", o.rect, "x,y,w,h")->delimiter(',')->expected(4)->required();
  synth->add_option("--donor-quality", o.donor_quality)->check(CLI::Range(1, 100))->capture_default_str();
  add_quality(synth);
  add_seed(synth);

  auto* corpus = app.add_subcommand("synth-corpus", "write a seeded Au/ + Tp/ synthetic corpus");
  corpus->add_option("--out", o.out, "corpus root")->required();
  corpus->add_option("--count", o.count, "images per class")->check(CLI::PositiveNumber)->capture_default_str();
  corpus->add_option("--size", o.size, "WxH")->capture_default_str();
  corpus->add_option("--donor-range", o.donor_range, "lo,hi")->delimiter(',')->expected(2)->capture_default_str();
  add_quality(corpus);
  add_seed(corpus);

  std::string config_path;
  for (auto* sub : app.get_subcommands({}))
    sub->add_option("--config", config_path, "key=value file of option defaults; flags on the command line win");

  try {
    app.parse(argc, argv);
    if (!config_path.empty()) {
      auto args = with_config_defaults(*app.get_subcommands().front(), config_path, argc, argv);
      app.clear();
      o = Options{};
      std::reverse(args.begin(), args.end());
      app.parse(args);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", std::string(to_string(e.code())).c_str(), e.what());
    return e.code() == ErrorCode::Io ? kExitData : kExitUsage;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const auto& name = sub->get_name();
    if (name == "ela") return cmd_ela(o);
    if (name == "scan") return cmd_scan(o);
    if (name == "split") return cmd_split(o);
    if (name == "train") return cmd_train(o);
    if (name == "predict") return cmd_predict(o);
    if (name == "evaluate") return cmd_evaluate(o);
    if (name == "roc") return cmd_roc(o);
    if (name == "synth") return cmd_synth(o);
    if (name == "synth-corpus") return cmd_synth_corpus(o);
    return kExitUsage;
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", std::string(to_string(e.code())).c_str(), e.what());
    if (e.code() == ErrorCode::DivergedLoss) return kExitDiverged;
    if (e.code() == ErrorCode::InvalidArgument) return kExitUsage;
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
}
