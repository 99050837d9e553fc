#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ela/cnn.hpp"
#include "ela/csv.hpp"
#include "ela/dataset.hpp"
#include "ela/metrics.hpp"

namespace ela {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 32;
  cnn::AdamHyper adam;
  std::uint64_t seed = 42;
  std::vector<int> conv_channels{16, 32, 64};
  unsigned threads = 1;  // preprocessing workers
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double train_accuracy = 0;
  double val_loss = 0;
  double val_accuracy = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  cnn::ModelParams<float> params;
  TrainHistory history;
};

/// Seed of the per-epoch shuffle stream, kept apart from the init stream.
constexpr std::uint64_t shuffle_seed(std::uint64_t seed) { return SplitMix64::mix(seed ^ 0xA5A5A5A5A5A5A5A5ULL); }

inline cnn::NetConfig net_config_for(const PreprocessSettings& settings, const TrainConfig& config) {
  return {settings.target_height, settings.target_width, 3, config.conv_channels};
}

template <typename T>
cnn::Tensor4<T> gather_batch(std::span<const ExampleTensor> examples, std::span<const std::size_t> indices,
                             std::vector<cnn::ProbRow<T>>& labels) {
  const auto& first = examples[indices.front()];
  cnn::Tensor4<T> batch(indices.size(), static_cast<std::size_t>(first.height),
                        static_cast<std::size_t>(first.width), 3);
  labels.resize(indices.size());
  const std::size_t stride = batch.height * batch.width * 3;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& ex = examples[indices[i]];
    require(ex.data.size() == stride, ErrorCode::ShapeMismatch, "examples have inconsistent sizes");
    std::copy(ex.data.begin(), ex.data.end(), batch.data.begin() + static_cast<std::ptrdiff_t>(i * stride));
    labels[i] = {static_cast<T>(ex.one_hot[0]), static_cast<T>(ex.one_hot[1])};
  }
  return batch;
}

struct LossAccuracy {
  double loss = 0;
  double accuracy = 0;
};

/// Forward-only pass over `examples` in order, in chunks of `batch_size`.
template <typename T>
std::vector<cnn::ProbRow<T>> infer(const cnn::ModelParams<T>& params, std::span<const ExampleTensor> examples,
                                   int batch_size = 32) {
  std::vector<cnn::ProbRow<T>> probs;
  probs.reserve(examples.size());
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<cnn::ProbRow<T>> labels;
  for (std::size_t start = 0; start < examples.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(examples.size(), start + static_cast<std::size_t>(batch_size));
    const auto batch = gather_batch<T>(examples, std::span(order).subspan(start, end - start), labels);
    const auto r = cnn::forward(params, batch);
    probs.insert(probs.end(), r.probs.begin(), r.probs.end());
  }
  return probs;
}

template <typename T>
LossAccuracy evaluate_examples(const cnn::ModelParams<T>& params, std::span<const ExampleTensor> examples,
                               int batch_size = 32) {
  if (examples.empty()) return {};
  const auto probs = infer(params, examples, batch_size);
  std::vector<cnn::ProbRow<T>> labels(examples.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    labels[i] = {static_cast<T>(examples[i].one_hot[0]), static_cast<T>(examples[i].one_hot[1])};
    const int truth = examples[i].one_hot[1] > examples[i].one_hot[0] ? 1 : 0;
    correct += cnn::predicted_class(probs[i]) == truth ? 1 : 0;
  }
  return {cnn::bce_loss<T>(probs, labels), static_cast<double>(correct) / static_cast<double>(examples.size())};
}

/// Minibatch Adam over preprocessed examples. The training order of each epoch
/// is a Fisher-Yates shuffle from one SplitMix64(shuffle_seed(seed)) stream;
/// the final partial batch is kept. Training loss/accuracy are averaged over
/// the examples seen during the epoch (with the weights of that moment).
template <typename T = float>
TrainResult train_examples(std::span<const ExampleTensor> train_set, std::span<const ExampleTensor> val_set,
                           const cnn::NetConfig& net, const TrainConfig& config,
                           const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  require(config.epochs >= 0, ErrorCode::InvalidArgument, "epochs must be non-negative");
  require(config.batch_size >= 1, ErrorCode::InvalidArgument, "batch size must be positive");
  require(config.adam.learning_rate > 0, ErrorCode::InvalidArgument, "learning rate must be positive");
  auto params = cnn::init_params<T>(net, config.seed);
  TrainResult result;
  if (config.epochs > 0) {
    require(!train_set.empty() && !val_set.empty(), ErrorCode::InvalidArgument,
            "training needs non-empty train and val splits");
  }
  auto adam = cnn::AdamState<T>::fresh(params, config.adam);
  SplitMix64 order_rng(shuffle_seed(config.seed));
  std::vector<std::size_t> order(train_set.size());
  std::vector<cnn::ProbRow<T>> labels;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(std::span(order), order_rng);
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const auto idx = std::span(order).subspan(start, end - start);
      const auto batch = gather_batch<T>(train_set, idx, labels);
      const auto fwd = cnn::forward(params, batch);
      const double loss = cnn::bce_loss<T>(fwd.probs, labels);
      if (!std::isfinite(loss))
        throw Error(ErrorCode::DivergedLoss, "non-finite training loss in epoch " + std::to_string(epoch) +
                                                 " at example " + std::to_string(start));
      loss_sum += loss * static_cast<double>(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i)
        correct += cnn::predicted_class(fwd.probs[i]) == (labels[i][1] > labels[i][0] ? 1 : 0) ? 1 : 0;
      const auto grads = cnn::backward<T>(params, fwd.cache, fwd.probs, labels);
      cnn::adam_step(params, grads, adam);
    }
    if (!cnn::all_finite(params))
      throw Error(ErrorCode::DivergedLoss, "parameters became non-finite in epoch " + std::to_string(epoch));
    const auto val = evaluate_examples(params, val_set, config.batch_size);
    if (!std::isfinite(val.loss))
      throw Error(ErrorCode::DivergedLoss, "non-finite validation loss in epoch " + std::to_string(epoch));
    EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()),
                    static_cast<double>(correct) / static_cast<double>(order.size()), val.loss, val.accuracy};
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if constexpr (std::is_same_v<T, float>) {
    result.params = std::move(params);
  } else {
    result.params = params.template cast<float>();
  }
  return result;
}

/// Preprocesses the manifest's train and val splits and trains on them.
inline TrainResult train(const DatasetManifest& manifest, const TrainConfig& config,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  const auto train_records = manifest.in_split(Split::Train);
  const auto val_records = manifest.in_split(Split::Val);
  const auto net = net_config_for(manifest.settings, config);
  if (config.epochs == 0) return {cnn::init_params<float>(net, config.seed), {}};
  require(!train_records.empty() && !val_records.empty(), ErrorCode::InvalidArgument,
          "manifest needs non-empty train and val splits");
  const auto train_set = preprocess_all(train_records, manifest.settings, config.threads);
  const auto val_set = preprocess_all(val_records, manifest.settings, config.threads);
  return train_examples<float>(train_set, val_set, net, config, on_epoch);
}

/// One row per record of `split`, in manifest order.
inline PredictionSet predict(const cnn::ModelParams<float>& params, const DatasetManifest& manifest, Split split,
                             unsigned threads = 1) {
  const auto records = manifest.in_split(split);
  const auto examples = preprocess_all(records, manifest.settings, threads);
  const auto probs = infer(params, examples);
  PredictionSet out;
  for (std::size_t i = 0; i < records.size(); ++i)
    out.rows.push_back({records[i].path, label_index(records[i].label), static_cast<double>(probs[i][0]),
                        static_cast<double>(probs[i][1])});
  return out;
}

// ---- history CSV -------------------------------------------------------------

inline std::string format_history(const TrainHistory& h, std::string_view preamble = {}) {
  std::string out(preamble);
  out += "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const auto& e : h.epochs)
    out += std::to_string(e.epoch) + "," + csv::fixed(e.train_loss, 6) + "," + csv::fixed(e.train_accuracy, 6) +
           "," + csv::fixed(e.val_loss, 6) + "," + csv::fixed(e.val_accuracy, 6) + "\n";
  return out;
}

inline TrainHistory parse_history(std::string_view text) {
  TrainHistory h;
  bool header = false;
  for (const auto& line : csv::lines(text)) {
    if (line.empty() || line.front() == '#') continue;
    const auto cells = csv::split_row(line);
    if (!header) {
      require(line == "epoch,train_loss,train_acc,val_loss,val_acc", ErrorCode::Parse,
              "history header must be 'epoch,train_loss,train_acc,val_loss,val_acc'");
      header = true;
      continue;
    }
    require(cells.size() == 5, ErrorCode::Parse, "history row needs five fields");
    h.epochs.push_back({static_cast<int>(csv::parse_int(cells[0])), csv::parse_double(cells[1]),
                        csv::parse_double(cells[2]), csv::parse_double(cells[3]), csv::parse_double(cells[4])});
  }
  require(header, ErrorCode::Parse, "history CSV has no header");
  return h;
}

// ---- checkpoint --------------------------------------------------------------
// Little-endian throughout:
//   char[8]  magic "ELACNNCK"
//   u32      format version (1)
//   u32 x 3  input height, width, channels
//   u32      tensor count N
//   N x { u16 name length, name bytes, u32 rank, rank x u32 dims }
//   N x { prod(dims) x f32 values }        tensors in the same order

inline constexpr char kCheckpointMagic[8] = {'E', 'L', 'A', 'C', 'N', 'N', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {
inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::span<const std::uint8_t> take(std::size_t n) {
    require(bytes_.size() - pos_ >= n, ErrorCode::CorruptFile, "checkpoint truncated");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    const auto s = take(4);
    return static_cast<std::uint32_t>(s[0]) | static_cast<std::uint32_t>(s[1]) << 8 |
           static_cast<std::uint32_t>(s[2]) << 16 | static_cast<std::uint32_t>(s[3]) << 24;
  }
  std::uint16_t u16() {
    const auto s = take(2);
    return static_cast<std::uint16_t>(s[0] | s[1] << 8);
  }
  [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};
}  // namespace detail

inline std::vector<std::uint8_t> save_checkpoint(const cnn::ModelParams<float>& params) {
  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 8);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(params.config.input_height));
  detail::put_u32(out, static_cast<std::uint32_t>(params.config.input_width));
  detail::put_u32(out, static_cast<std::uint32_t>(params.config.input_channels));
  detail::put_u32(out, static_cast<std::uint32_t>(params.blocks.size()));
  for (const auto& b : params.blocks) {
    detail::put_u16(out, static_cast<std::uint16_t>(b.name.size()));
    out.insert(out.end(), b.name.begin(), b.name.end());
    detail::put_u32(out, static_cast<std::uint32_t>(b.shape.size()));
    for (auto d : b.shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (const auto& b : params.blocks)
    for (float v : b.values) {
      std::uint32_t bits = 0;
      std::memcpy(&bits, &v, sizeof bits);
      detail::put_u32(out, bits);
    }
  return out;
}

inline cnn::ModelParams<float> load_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::Reader in(bytes);
  const auto magic = in.take(8);
  require(std::equal(magic.begin(), magic.end(), kCheckpointMagic), ErrorCode::CorruptFile,
          "not a checkpoint file (bad magic)");
  const auto version = in.u32();
  require(version == kCheckpointVersion, ErrorCode::UnsupportedFormat,
          "checkpoint format version " + std::to_string(version) + " is not supported");
  cnn::NetConfig config;
  config.input_height = static_cast<int>(in.u32());
  config.input_width = static_cast<int>(in.u32());
  config.input_channels = static_cast<int>(in.u32());
  const auto count = in.u32();
  require(count >= 4 && count % 2 == 0 && count < 1024, ErrorCode::CorruptFile, "implausible tensor count");
  struct Entry {
    std::string name;
    std::vector<std::size_t> shape;
  };
  std::vector<Entry> entries(count);
  for (auto& e : entries) {
    const auto len = in.u16();
    const auto name = in.take(len);
    e.name.assign(name.begin(), name.end());
    const auto rank = in.u32();
    require(rank >= 1 && rank <= 4, ErrorCode::CorruptFile, "implausible tensor rank");
    for (std::uint32_t r = 0; r < rank; ++r) e.shape.push_back(in.u32());
  }
  config.conv_channels.clear();
  for (std::size_t l = 0; l + 4 < count; l += 2) {
    require(entries[l].shape.size() == 4, ErrorCode::CorruptFile, "expected a conv kernel at " + entries[l].name);
    config.conv_channels.push_back(static_cast<int>(entries[l].shape[3]));
  }
  auto params = cnn::empty_params<float>(config);
  require(params.blocks.size() == entries.size(), ErrorCode::CorruptFile, "tensor list does not match layout");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    require(entries[i].name == params.blocks[i].name && entries[i].shape == params.blocks[i].shape,
            ErrorCode::CorruptFile, "unexpected tensor " + entries[i].name);
    for (auto& v : params.blocks[i].values) {
      const std::uint32_t bits = in.u32();
      std::memcpy(&v, &bits, sizeof v);
    }
  }
  require(in.done(), ErrorCode::CorruptFile, "trailing bytes after checkpoint data");
  return params;
}

}  // namespace ela
