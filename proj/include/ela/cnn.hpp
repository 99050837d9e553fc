#pragma once

// Compact CNN with explicit forward and backward passes.
//
//   input (B, H, W, 3)
//   N x [conv 3x3 same, ReLU, maxpool 2x2]       channels e.g. 16/32/64
//   global average pool                           -> (B, C)
//   dense C -> 1024, ReLU
//   dense 1024 -> 2, softmax
//
// Loss is two-class cross-entropy (identical to binary cross-entropy on
// p_tampered). Layout is NHWC; conv kernels are [ky][kx][c_in][c_out] and dense
// weights are [in][out], so every inner loop runs over contiguous outputs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ela/error.hpp"
#include "ela/rng.hpp"

namespace ela::cnn {

inline constexpr int kHeadUnits = 1024;
inline constexpr int kClasses = 2;

/// Parameter count of the classification head on top of `feature_channels`
/// pooled features: dense(c -> 1024) + dense(1024 -> 2), weights and biases.
constexpr std::int64_t head_param_count(std::int64_t feature_channels) {
  if (feature_channels < 1) throw Error(ErrorCode::InvalidArgument, "feature width must be positive");
  return feature_channels * kHeadUnits + kHeadUnits + std::int64_t{kHeadUnits} * kClasses + kClasses;
}

struct NetConfig {
  int input_height = 128;
  int input_width = 128;
  int input_channels = 3;
  std::vector<int> conv_channels{16, 32, 64};

  [[nodiscard]] int feature_channels() const {
    return conv_channels.empty() ? input_channels : conv_channels.back();
  }
  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

template <typename T>
struct ParamBlock {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> values;
};

/// All trainable tensors in canonical order: conv{i}.kernel, conv{i}.bias for
/// each conv layer, then dense1.weight, dense1.bias, dense2.weight, dense2.bias.
template <typename T>
struct ModelParams {
  NetConfig config;
  std::vector<ParamBlock<T>> blocks;

  [[nodiscard]] std::size_t conv_layers() const { return config.conv_channels.size(); }
  ParamBlock<T>& conv_kernel(std::size_t l) { return blocks[2 * l]; }
  ParamBlock<T>& conv_bias(std::size_t l) { return blocks[2 * l + 1]; }
  [[nodiscard]] const ParamBlock<T>& conv_kernel(std::size_t l) const { return blocks[2 * l]; }
  [[nodiscard]] const ParamBlock<T>& conv_bias(std::size_t l) const { return blocks[2 * l + 1]; }
  [[nodiscard]] const ParamBlock<T>& dense1_w() const { return blocks[2 * conv_layers()]; }
  [[nodiscard]] const ParamBlock<T>& dense1_b() const { return blocks[2 * conv_layers() + 1]; }
  [[nodiscard]] const ParamBlock<T>& dense2_w() const { return blocks[2 * conv_layers() + 2]; }
  [[nodiscard]] const ParamBlock<T>& dense2_b() const { return blocks[2 * conv_layers() + 3]; }

  [[nodiscard]] std::size_t total() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.values.size();
    return n;
  }

  template <typename U>
  [[nodiscard]] ModelParams<U> cast() const {
    ModelParams<U> out{config, {}};
    for (const auto& b : blocks)
      out.blocks.push_back({b.name, b.shape, std::vector<U>(b.values.begin(), b.values.end())});
    return out;
  }
};

/// Same layout as ModelParams, all values zero.
template <typename T>
ModelParams<T> zeros_like(const ModelParams<T>& p) {
  ModelParams<T> out{p.config, {}};
  for (const auto& b : p.blocks) out.blocks.push_back({b.name, b.shape, std::vector<T>(b.values.size(), T{0})});
  return out;
}

template <typename T>
ModelParams<T> empty_params(const NetConfig& config) {
  require(config.input_height >= 1 && config.input_width >= 1 && config.input_channels >= 1,
          ErrorCode::InvalidArgument, "input dimensions must be positive");
  for (int c : config.conv_channels) require(c >= 1, ErrorCode::InvalidArgument, "conv channels must be positive");
  require((config.input_height >> config.conv_channels.size()) >= 1 &&
              (config.input_width >> config.conv_channels.size()) >= 1,
          ErrorCode::InvalidArgument, "input too small for the number of pooling stages");
  ModelParams<T> p{config, {}};
  auto add = [&](std::string name, std::vector<std::size_t> shape) {
    const auto n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    p.blocks.push_back({std::move(name), std::move(shape), std::vector<T>(n, T{0})});
  };
  auto cin = static_cast<std::size_t>(config.input_channels);
  for (std::size_t l = 0; l < config.conv_channels.size(); ++l) {
    const auto cout = static_cast<std::size_t>(config.conv_channels[l]);
    add("conv" + std::to_string(l + 1) + ".kernel", {3, 3, cin, cout});
    add("conv" + std::to_string(l + 1) + ".bias", {cout});
    cin = cout;
  }
  add("dense1.weight", {cin, kHeadUnits});
  add("dense1.bias", {kHeadUnits});
  add("dense2.weight", {kHeadUnits, kClasses});
  add("dense2.bias", {kClasses});
  return p;
}

/// He-uniform for conv kernels and the ReLU dense layer, Glorot-uniform for
/// the softmax layer, zero biases. Blocks draw from one SplitMix64(seed)
/// stream in canonical order.
template <typename T>
ModelParams<T> init_params(const NetConfig& config, std::uint64_t seed) {
  auto p = empty_params<T>(config);
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    auto& b = p.blocks[i];
    if (b.shape.size() == 1) continue;
    double limit = 0;
    if (b.shape.size() == 4) {
      limit = std::sqrt(6.0 / static_cast<double>(9 * b.shape[2]));
    } else if (i + 2 == p.blocks.size()) {
      limit = std::sqrt(6.0 / static_cast<double>(b.shape[0] + b.shape[1]));
    } else {
      limit = std::sqrt(6.0 / static_cast<double>(b.shape[0]));
    }
    for (auto& v : b.values) v = static_cast<T>(rng.uniform(-limit, limit));
  }
  return p;
}

/// Batch of images in NHWC order.
template <typename T>
struct Tensor4 {
  std::size_t batch = 0, height = 0, width = 0, channels = 0;
  std::vector<T> data;

  Tensor4() = default;
  Tensor4(std::size_t b, std::size_t h, std::size_t w, std::size_t c)
      : batch(b), height(h), width(w), channels(c), data(b * h * w * c, T{0}) {}

  [[nodiscard]] std::size_t offset(std::size_t b, std::size_t y, std::size_t x) const {
    return ((b * height + y) * width + x) * channels;
  }
};

template <typename T>
using ProbRow = std::array<T, kClasses>;

template <typename T>
struct ConvCache {
  Tensor4<T> input;                 // conv input
  std::vector<T> pre;               // conv output before ReLU, (B, H, W, C)
  std::vector<std::uint32_t> argmax;  // per pooled cell: flat index into `pre`
  std::size_t out_h = 0, out_w = 0, channels = 0;
};

template <typename T>
struct ForwardCache {
  NetConfig config;
  std::size_t batch = 0;
  std::vector<ConvCache<T>> conv;
  std::vector<T> pooled_last;  // (B, h, w, C) after the last block
  std::size_t last_h = 0, last_w = 0;
  std::vector<T> gap;          // (B, C)
  std::vector<T> hidden_pre;   // (B, 1024)
  std::vector<T> hidden;       // (B, 1024)
};

template <typename T>
struct ForwardResult {
  std::vector<ProbRow<T>> probs;
  ForwardCache<T> cache;
};

namespace detail {

template <typename T>
void conv3x3_forward(const Tensor4<T>& in, const ParamBlock<T>& kernel, const ParamBlock<T>& bias,
                     std::vector<T>& out) {
  const std::size_t H = in.height, W = in.width, Cin = in.channels, Cout = kernel.shape[3];
  out.assign(in.batch * H * W * Cout, T{0});
  const T* K = kernel.values.data();
  for (std::size_t b = 0; b < in.batch; ++b)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        T* acc = out.data() + ((b * H + y) * W + x) * Cout;
        std::copy(bias.values.begin(), bias.values.end(), acc);
        for (std::size_t ky = 0; ky < 3; ++ky) {
          const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x + kx) - 1;
            if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(W)) continue;
            const T* src = in.data.data() + in.offset(b, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
            const T* w = K + (ky * 3 + kx) * Cin * Cout;
            for (std::size_t ci = 0; ci < Cin; ++ci) {
              const T v = src[ci];
              const T* wr = w + ci * Cout;
              for (std::size_t co = 0; co < Cout; ++co) acc[co] += v * wr[co];
            }
          }
        }
      }
}

// dz: gradient w.r.t. conv output (B, H, W, Cout). Accumulates into dK, db and,
// when `din` is non-null, writes the gradient w.r.t. the conv input.
template <typename T>
void conv3x3_backward(const Tensor4<T>& in, const ParamBlock<T>& kernel, const std::vector<T>& dz,
                      std::vector<T>& dK, std::vector<T>& db, std::vector<T>* din) {
  const std::size_t H = in.height, W = in.width, Cin = in.channels, Cout = kernel.shape[3];
  const T* K = kernel.values.data();
  if (din != nullptr) din->assign(in.data.size(), T{0});
  for (std::size_t b = 0; b < in.batch; ++b)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const T* g = dz.data() + ((b * H + y) * W + x) * Cout;
        for (std::size_t co = 0; co < Cout; ++co) db[co] += g[co];
        for (std::size_t ky = 0; ky < 3; ++ky) {
          const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x + kx) - 1;
            if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(W)) continue;
            const std::size_t src_off = in.offset(b, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
            const T* src = in.data.data() + src_off;
            T* dw = dK.data() + (ky * 3 + kx) * Cin * Cout;
            const T* w = K + (ky * 3 + kx) * Cin * Cout;
            for (std::size_t ci = 0; ci < Cin; ++ci) {
              const T v = src[ci];
              T* dwr = dw + ci * Cout;
              for (std::size_t co = 0; co < Cout; ++co) dwr[co] += v * g[co];
            }
            if (din != nullptr) {
              T* dst = din->data() + src_off;
              for (std::size_t ci = 0; ci < Cin; ++ci) {
                const T* wr = w + ci * Cout;
                T s{0};
                for (std::size_t co = 0; co < Cout; ++co) s += wr[co] * g[co];
                dst[ci] += s;
              }
            }
          }
        }
      }
}

// 2x2 max pool (floor) of relu(pre). Pooling before the ReLU gives the same
// values because ReLU is monotone, and only the argmax is kept.
template <typename T>
void relu_maxpool_forward(const std::vector<T>& pre, std::size_t B, std::size_t H, std::size_t W,
                          std::size_t C, Tensor4<T>& out, std::vector<std::uint32_t>& argmax) {
  const std::size_t H2 = H / 2, W2 = W / 2;
  out = Tensor4<T>(B, H2, W2, C);
  argmax.assign(B * H2 * W2 * C, 0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t y = 0; y < H2; ++y)
      for (std::size_t x = 0; x < W2; ++x) {
        const std::size_t o = out.offset(b, y, x);
        const std::size_t i00 = ((b * H + 2 * y) * W + 2 * x) * C;
        const std::size_t cand[4] = {i00, i00 + C, i00 + W * C, i00 + W * C + C};
        for (std::size_t c = 0; c < C; ++c) {
          std::size_t best = cand[0] + c;
          for (int k = 1; k < 4; ++k)
            if (pre[cand[k] + c] > pre[best]) best = cand[k] + c;
          argmax[o + c] = static_cast<std::uint32_t>(best);
          out.data[o + c] = std::max(pre[best], T{0});
        }
      }
}

template <typename T>
void softmax_row(const T* logits, ProbRow<T>& p) {
  const T m = std::max(logits[0], logits[1]);
  const T e0 = std::exp(logits[0] - m), e1 = std::exp(logits[1] - m);
  const T s = e0 + e1;
  p = {e0 / s, e1 / s};
}

}  // namespace detail

template <typename T>
void check_input(const ModelParams<T>& params, const Tensor4<T>& batch) {
  require(batch.batch >= 1 && batch.height == static_cast<std::size_t>(params.config.input_height) &&
              batch.width == static_cast<std::size_t>(params.config.input_width) &&
              batch.channels == static_cast<std::size_t>(params.config.input_channels) &&
              batch.data.size() == batch.batch * batch.height * batch.width * batch.channels,
          ErrorCode::ShapeMismatch, "input batch does not match the configured input size");
}

template <typename T>
ForwardResult<T> forward(const ModelParams<T>& params, const Tensor4<T>& batch) {
  check_input(params, batch);
  ForwardResult<T> r;
  auto& cache = r.cache;
  cache.config = params.config;
  cache.batch = batch.batch;
  const std::size_t L = params.conv_layers();
  cache.conv.resize(L);
  Tensor4<T> current = batch;
  for (std::size_t l = 0; l < L; ++l) {
    auto& cc = cache.conv[l];
    cc.channels = params.conv_kernel(l).shape[3];
    detail::conv3x3_forward(current, params.conv_kernel(l), params.conv_bias(l), cc.pre);
    Tensor4<T> pooled;
    detail::relu_maxpool_forward(cc.pre, current.batch, current.height, current.width, cc.channels, pooled,
                                 cc.argmax);
    cc.out_h = pooled.height;
    cc.out_w = pooled.width;
    cc.input = std::move(current);
    current = std::move(pooled);
  }
  const std::size_t B = batch.batch, C = current.channels, HW = current.height * current.width;
  cache.last_h = current.height;
  cache.last_w = current.width;
  cache.gap.assign(B * C, T{0});
  for (std::size_t b = 0; b < B; ++b) {
    T* g = cache.gap.data() + b * C;
    for (std::size_t s = 0; s < HW; ++s) {
      const T* px = current.data.data() + (b * HW + s) * C;
      for (std::size_t c = 0; c < C; ++c) g[c] += px[c];
    }
    for (std::size_t c = 0; c < C; ++c) g[c] /= static_cast<T>(HW);
  }
  cache.pooled_last = std::move(current.data);

  const auto& W1 = params.dense1_w().values;
  const auto& b1 = params.dense1_b().values;
  cache.hidden_pre.assign(B * kHeadUnits, T{0});
  cache.hidden.assign(B * kHeadUnits, T{0});
  for (std::size_t b = 0; b < B; ++b) {
    T* h = cache.hidden_pre.data() + b * kHeadUnits;
    std::copy(b1.begin(), b1.end(), h);
    for (std::size_t c = 0; c < C; ++c) {
      const T v = cache.gap[b * C + c];
      const T* w = W1.data() + c * kHeadUnits;
      for (std::size_t j = 0; j < kHeadUnits; ++j) h[j] += v * w[j];
    }
    T* a = cache.hidden.data() + b * kHeadUnits;
    for (std::size_t j = 0; j < kHeadUnits; ++j) a[j] = std::max(h[j], T{0});
  }

  const auto& W2 = params.dense2_w().values;
  const auto& b2 = params.dense2_b().values;
  r.probs.resize(B);
  for (std::size_t b = 0; b < B; ++b) {
    T logits[kClasses] = {b2[0], b2[1]};
    const T* a = cache.hidden.data() + b * kHeadUnits;
    for (std::size_t j = 0; j < kHeadUnits; ++j) {
      logits[0] += a[j] * W2[j * kClasses];
      logits[1] += a[j] * W2[j * kClasses + 1];
    }
    detail::softmax_row(logits, r.probs[b]);
  }
  return r;
}

/// Probability assigned to the true class is clamped to [1e-12, 1].
template <typename T>
double bce_loss(std::span<const ProbRow<T>> probs, std::span<const ProbRow<T>> labels) {
  require(!probs.empty() && probs.size() == labels.size(), ErrorCode::ShapeMismatch,
          "probabilities and labels must have the same non-zero row count");
  double total = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p_true = labels[i][1] > labels[i][0] ? static_cast<double>(probs[i][1])
                                                      : static_cast<double>(probs[i][0]);
    total -= std::log(std::clamp(p_true, 1e-12, 1.0));
  }
  return total / static_cast<double>(probs.size());
}

/// Argmax with ties resolved to class 0 (authentic).
template <typename T>
constexpr int predicted_class(const ProbRow<T>& p) {
  return p[1] > p[0] ? 1 : 0;
}

/// Exact gradient of mean cross-entropy over the batch w.r.t. every parameter.
template <typename T>
ModelParams<T> backward(const ModelParams<T>& params, const ForwardCache<T>& cache,
                        std::span<const ProbRow<T>> probs, std::span<const ProbRow<T>> labels) {
  require(cache.config == params.config && cache.conv.size() == params.conv_layers(), ErrorCode::StaleCache,
          "forward cache was produced by a different network layout");
  for (std::size_t l = 0; l < cache.conv.size(); ++l)
    require(cache.conv[l].channels == params.conv_kernel(l).shape[3], ErrorCode::StaleCache,
            "forward cache channel count differs from parameters");
  require(probs.size() == cache.batch && labels.size() == cache.batch, ErrorCode::ShapeMismatch,
          "probabilities/labels do not match the cached batch");

  auto grads = zeros_like(params);
  const std::size_t B = cache.batch, C = static_cast<std::size_t>(params.config.feature_channels());
  const std::size_t L = params.conv_layers();
  const T inv_b = T{1} / static_cast<T>(B);

  // softmax + cross-entropy
  std::vector<T> dlogits(B * kClasses);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t k = 0; k < kClasses; ++k) dlogits[b * kClasses + k] = (probs[b][k] - labels[b][k]) * inv_b;

  auto& dW2 = grads.blocks[2 * L + 2].values;
  auto& db2 = grads.blocks[2 * L + 3].values;
  const auto& W2 = params.dense2_w().values;
  std::vector<T> dhidden(B * kHeadUnits, T{0});
  for (std::size_t b = 0; b < B; ++b) {
    const T g0 = dlogits[b * kClasses], g1 = dlogits[b * kClasses + 1];
    db2[0] += g0;
    db2[1] += g1;
    const T* a = cache.hidden.data() + b * kHeadUnits;
    const T* hp = cache.hidden_pre.data() + b * kHeadUnits;
    T* dh = dhidden.data() + b * kHeadUnits;
    for (std::size_t j = 0; j < kHeadUnits; ++j) {
      dW2[j * kClasses] += a[j] * g0;
      dW2[j * kClasses + 1] += a[j] * g1;
      dh[j] = hp[j] > T{0} ? W2[j * kClasses] * g0 + W2[j * kClasses + 1] * g1 : T{0};
    }
  }

  auto& dW1 = grads.blocks[2 * L].values;
  auto& db1 = grads.blocks[2 * L + 1].values;
  const auto& W1 = params.dense1_w().values;
  std::vector<T> dgap(B * C, T{0});
  for (std::size_t b = 0; b < B; ++b) {
    const T* dh = dhidden.data() + b * kHeadUnits;
    for (std::size_t j = 0; j < kHeadUnits; ++j) db1[j] += dh[j];
    for (std::size_t c = 0; c < C; ++c) {
      const T v = cache.gap[b * C + c];
      T* dw = dW1.data() + c * kHeadUnits;
      const T* w = W1.data() + c * kHeadUnits;
      T s{0};
      for (std::size_t j = 0; j < kHeadUnits; ++j) {
        dw[j] += v * dh[j];
        s += w[j] * dh[j];
      }
      dgap[b * C + c] = s;
    }
  }

  // global average pool spreads the gradient evenly over the last feature map
  const std::size_t HW = cache.last_h * cache.last_w;
  std::vector<T> dpooled(B * HW * C);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t s = 0; s < HW; ++s)
      for (std::size_t c = 0; c < C; ++c) dpooled[(b * HW + s) * C + c] = dgap[b * C + c] / static_cast<T>(HW);

  for (std::size_t l = L; l-- > 0;) {
    const auto& cc = cache.conv[l];
    std::vector<T> dpre(cc.pre.size(), T{0});
    for (std::size_t i = 0; i < cc.argmax.size(); ++i) {
      const std::uint32_t src = cc.argmax[i];
      if (cc.pre[src] > T{0}) dpre[src] += dpooled[i];
    }
    std::vector<T> dinput;
    detail::conv3x3_backward(cc.input, params.conv_kernel(l), dpre, grads.blocks[2 * l].values,
                             grads.blocks[2 * l + 1].values, l > 0 ? &dinput : nullptr);
    dpooled = std::move(dinput);
  }
  return grads;
}

struct AdamHyper {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  AdamHyper hyper;
  std::int64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;

  static AdamState fresh(const ModelParams<T>& params, AdamHyper hyper = {}) {
    AdamState s;
    s.hyper = hyper;
    for (const auto& b : params.blocks) {
      s.m.emplace_back(b.values.size(), T{0});
      s.v.emplace_back(b.values.size(), T{0});
    }
    return s;
  }
};

/// One bias-corrected Adam update in place; the step counter advances by one.
template <typename T>
void adam_step(ModelParams<T>& params, const ModelParams<T>& grads, AdamState<T>& state) {
  require(grads.blocks.size() == params.blocks.size() && state.m.size() == params.blocks.size() &&
              state.v.size() == params.blocks.size() && state.step >= 0,
          ErrorCode::ShapeMismatch, "Adam state does not mirror the parameters");
  for (std::size_t i = 0; i < params.blocks.size(); ++i)
    require(grads.blocks[i].values.size() == params.blocks[i].values.size() &&
                state.m[i].size() == params.blocks[i].values.size() &&
                state.v[i].size() == params.blocks[i].values.size(),
            ErrorCode::ShapeMismatch, "Adam shapes differ for " + params.blocks[i].name);
  ++state.step;
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(h.beta1), b2 = static_cast<T>(h.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(h.beta1, t));
  const T c2 = static_cast<T>(1.0 - std::pow(h.beta2, t));
  const T lr = static_cast<T>(h.learning_rate), eps = static_cast<T>(h.epsilon);
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    auto& p = params.blocks[i].values;
    const auto& g = grads.blocks[i].values;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (T{1} - b1) * g[k];
      v[k] = b2 * v[k] + (T{1} - b2) * g[k] * g[k];
      const T m_hat = m[k] / c1;
      const T v_hat = v[k] / c2;
      p[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template <typename T>
bool all_finite(const ModelParams<T>& p) {
  for (const auto& b : p.blocks)
    for (T v : b.values)
      if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace ela::cnn
