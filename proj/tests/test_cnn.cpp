#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "cnn_oracles.hpp"
#include "ela/cnn.hpp"
#include "ela/train.hpp"

namespace ela {
namespace {

using cnn::ProbRow;

void expect_code(ErrorCode code, auto&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TEST(HeadParamCount, TableTotals) {
  EXPECT_EQ(cnn::head_param_count(512), 527'362);
  EXPECT_EQ(cnn::head_param_count(2048), 2'100'226);
  EXPECT_EQ(cnn::head_param_count(1280), 1'313'794);
  EXPECT_EQ(20'024'384 + cnn::head_param_count(512), 20'551'746);
  EXPECT_EQ(23'903'010 - 21'802'784, cnn::head_param_count(2048));
  EXPECT_EQ(60'431'874 - 58'331'648, cnn::head_param_count(2048));
  EXPECT_EQ(22'961'706 - 20'861'480, cnn::head_param_count(2048));
  EXPECT_EQ(119'060'642 - 117'746'848, cnn::head_param_count(1280));
  expect_code(ErrorCode::InvalidArgument, [] { (void)cnn::head_param_count(0); });
}

TEST(Params, LayoutAndHeadSize) {
  const cnn::NetConfig config;
  const auto p = cnn::init_params<float>(config, 42);
  ASSERT_EQ(p.blocks.size(), 10u);
  EXPECT_EQ(p.blocks[0].name, "conv1.kernel");
  EXPECT_EQ(p.blocks[0].shape, (std::vector<std::size_t>{3, 3, 3, 16}));
  EXPECT_EQ(p.blocks[9].name, "dense2.bias");
  std::size_t head = 0;
  for (std::size_t i = 6; i < 10; ++i) head += p.blocks[i].values.size();
  EXPECT_EQ(static_cast<std::int64_t>(head), cnn::head_param_count(64));
  EXPECT_EQ(p.total(), 448u + 4640u + 18496u + head);
}

TEST(Params, InitIsSeededAndBounded) {
  const cnn::NetConfig config;
  const auto a = cnn::init_params<float>(config, 7);
  const auto b = cnn::init_params<float>(config, 7);
  const auto c = cnn::init_params<float>(config, 8);
  EXPECT_EQ(a.blocks[0].values, b.blocks[0].values);
  EXPECT_NE(a.blocks[0].values, c.blocks[0].values);
  const float conv_limit = std::sqrt(6.0f / 27.0f);
  for (float v : a.blocks[0].values) EXPECT_LE(std::abs(v), conv_limit);
  const float out_limit = std::sqrt(6.0f / 1026.0f);
  for (float v : a.blocks[8].values) EXPECT_LE(std::abs(v), out_limit);
  for (float v : a.blocks[1].values) EXPECT_EQ(v, 0.0f);
}

TEST(Forward, ZeroWeightsGiveUniformProbabilities) {
  const cnn::NetConfig config{16, 16, 3, {4, 8}};
  const auto p = cnn::empty_params<double>(config);
  const cnn::Tensor4<double> batch(3, 16, 16, 3);
  const auto r = cnn::forward(p, batch);
  for (const auto& row : r.probs) {
    EXPECT_EQ(row[0], 0.5);
    EXPECT_EQ(row[1], 0.5);
  }
}

// Reference probabilities from an independent numpy forward pass
// (tests/oracles/generate_fixtures.py).
TEST(Forward, FormulaFixture) {
  const auto input = testing::fixture_input(8, 8, 3);
  {
    const auto p = testing::fixture_params({8, 8, 3, {16, 32, 64}});
    const auto r = cnn::forward(p, input);
    EXPECT_NEAR(r.probs[0][0], 0.50158437205095652, 1e-10);
    EXPECT_NEAR(r.probs[0][1], 0.49841562794904348, 1e-10);
  }
  {
    const auto p = testing::fixture_params({8, 8, 3, {4, 8}});
    const auto r = cnn::forward(p, input);
    EXPECT_NEAR(r.probs[0][0], 0.50516902187570145, 1e-10);
    EXPECT_NEAR(r.probs[0][1], 0.49483097812429855, 1e-10);
  }
}

TEST(Forward, RowsSumToOneInBothPrecisions) {
  SplitMix64 rng(3);
  const cnn::NetConfig config{16, 16, 3, {4, 8}};
  const auto pd = cnn::init_params<double>(config, 11);
  const auto pf = pd.cast<float>();
  cnn::Tensor4<double> bd(5, 16, 16, 3);
  for (auto& v : bd.data) v = rng.uniform();
  cnn::Tensor4<float> bf(5, 16, 16, 3);
  std::copy(bd.data.begin(), bd.data.end(), bf.data.begin());
  for (const auto& row : cnn::forward(pd, bd).probs) {
    EXPECT_NEAR(row[0] + row[1], 1.0, 1e-9);
    EXPECT_GE(row[0], 0.0);
    EXPECT_GE(row[1], 0.0);
  }
  for (const auto& row : cnn::forward(pf, bf).probs) EXPECT_NEAR(row[0] + row[1], 1.0f, 1e-6f);
}

TEST(Forward, ShapeMismatch) {
  const auto p = cnn::empty_params<double>({16, 16, 3, {4}});
  expect_code(ErrorCode::ShapeMismatch, [&] { (void)cnn::forward(p, cnn::Tensor4<double>(1, 8, 16, 3)); });
}

TEST(Forward, BatchPermutationInvariance) {
  SplitMix64 rng(21);
  const cnn::NetConfig config{16, 16, 3, {4, 8}};
  const auto p = cnn::init_params<double>(config, 5);
  const std::size_t B = 6, stride = 16 * 16 * 3;
  cnn::Tensor4<double> batch(B, 16, 16, 3);
  for (auto& v : batch.data) v = rng.uniform();
  std::vector<ProbRow<double>> labels(B);
  for (auto& l : labels) l = rng.bounded(2) == 0 ? ProbRow<double>{1, 0} : ProbRow<double>{0, 1};
  std::vector<std::size_t> perm(B);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  shuffle(std::span(perm), rng);
  cnn::Tensor4<double> permuted(B, 16, 16, 3);
  std::vector<ProbRow<double>> permuted_labels(B);
  for (std::size_t i = 0; i < B; ++i) {
    std::copy_n(batch.data.begin() + static_cast<std::ptrdiff_t>(perm[i] * stride), stride,
                permuted.data.begin() + static_cast<std::ptrdiff_t>(i * stride));
    permuted_labels[i] = labels[perm[i]];
  }
  const auto a = cnn::forward(p, batch);
  const auto b = cnn::forward(p, permuted);
  for (std::size_t i = 0; i < B; ++i) {
    EXPECT_EQ(b.probs[i][0], a.probs[perm[i]][0]);
    EXPECT_EQ(b.probs[i][1], a.probs[perm[i]][1]);
  }
  EXPECT_NEAR(cnn::bce_loss<double>(a.probs, labels), cnn::bce_loss<double>(b.probs, permuted_labels), 1e-12);
}

TEST(BceLoss, Examples) {
  const std::vector<ProbRow<double>> half = {{0.5, 0.5}, {0.5, 0.5}};
  const std::vector<ProbRow<double>> labels = {{1, 0}, {0, 1}};
  EXPECT_NEAR(cnn::bce_loss<double>(half, labels), std::log(2.0), 1e-15);

  const std::vector<ProbRow<double>> perfect = {{1, 0}};
  const std::vector<ProbRow<double>> perfect_label = {{1, 0}};
  EXPECT_EQ(cnn::bce_loss<double>(perfect, perfect_label), 0.0);

  const std::vector<ProbRow<double>> pair = {{0.9, 0.1}, {0.2, 0.8}};
  EXPECT_NEAR(cnn::bce_loss<double>(pair, labels), 0.164252033486018, 1e-15);

  const std::vector<ProbRow<double>> wrong = {{0.0, 1.0}};
  EXPECT_NEAR(cnn::bce_loss<double>(wrong, perfect_label), -std::log(1e-12), 1e-9);

  expect_code(ErrorCode::ShapeMismatch,
              [&] { (void)cnn::bce_loss<double>(pair, std::span<const ProbRow<double>>(labels).first(1)); });
}

TEST(Backward, OutputBiasGradientIsMeanResidual) {
  auto pr = testing::random_gradcheck_problem(9);
  const auto fwd = cnn::forward(pr.params, pr.batch);
  const auto g = cnn::backward<double>(pr.params, fwd.cache, fwd.probs, pr.labels);
  for (int k = 0; k < 2; ++k) {
    double mean = 0;
    for (std::size_t b = 0; b < 4; ++b) mean += fwd.probs[b][k] - pr.labels[b][k];
    EXPECT_NEAR(g.blocks.back().values[k], mean / 4, 1e-15);
  }
}

TEST(Backward, ZeroWhenProbabilitiesMatchLabels) {
  auto pr = testing::random_gradcheck_problem(10);
  const auto fwd = cnn::forward(pr.params, pr.batch);
  const auto g = cnn::backward<double>(pr.params, fwd.cache, fwd.probs, fwd.probs);
  for (const auto& b : g.blocks)
    for (double v : b.values) EXPECT_EQ(v, 0.0) << b.name;
}

TEST(Backward, StaleCache) {
  auto pr = testing::random_gradcheck_problem(12);
  const auto fwd = cnn::forward(pr.params, pr.batch);
  auto other = cnn::init_params<double>({8, 8, 3, {5, 5}}, 1);
  expect_code(ErrorCode::StaleCache,
              [&] { (void)cnn::backward<double>(other, fwd.cache, fwd.probs, pr.labels); });
  expect_code(ErrorCode::ShapeMismatch, [&] {
    (void)cnn::backward<double>(pr.params, fwd.cache, std::span(fwd.probs).first(2), pr.labels);
  });
}

TEST(Backward, MatchesCentralDifferences) {
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    auto pr = testing::random_gradcheck_problem(seed);
    const auto st = testing::gradient_check(pr);
    EXPECT_EQ(st.failures, 0u) << "seed " << seed << " worst " << st.worst_relative;
    EXPECT_EQ(st.checked + st.kink_skipped, pr.params.total());
    EXPECT_LE(st.kink_skipped, st.checked / 1000) << "seed " << seed;
  }
}

TEST(Adam, ScalarFixture) {
  cnn::ModelParams<double> p{{}, {{"theta", {1}, {0.0}}}};
  cnn::ModelParams<double> g{{}, {{"theta", {1}, {1.0}}}};
  auto state = cnn::AdamState<double>::fresh(p, {1e-3, 0.9, 0.999, 1e-8});
  const double expected[3] = {-0.00099999999000000028, -0.0019999999799999932, -0.0029999999699999932};
  for (double e : expected) {
    cnn::adam_step(p, g, state);
    EXPECT_NEAR(p.blocks[0].values[0], e, 1e-15);
  }
  EXPECT_EQ(state.step, 3);
}

TEST(Adam, FirstStepIsSignTimesLearningRate) {
  cnn::ModelParams<double> p{{}, {{"w", {3}, {1.0, -2.0, 0.5}}}};
  cnn::ModelParams<double> g{{}, {{"w", {3}, {0.3, -7.0, 0.05}}}};
  auto state = cnn::AdamState<double>::fresh(p);
  cnn::adam_step(p, g, state);
  EXPECT_NEAR(p.blocks[0].values[0] - 1.0, -1e-4, 1e-10);
  EXPECT_NEAR(p.blocks[0].values[1] + 2.0, 1e-4, 1e-10);
  EXPECT_NEAR(p.blocks[0].values[2] - 0.5, -1e-4, 1e-10);
}

TEST(Adam, ZeroGradientIsIdentity) {
  auto p = cnn::init_params<double>({8, 8, 3, {2}}, 3);
  const auto before = p;
  auto state = cnn::AdamState<double>::fresh(p);
  cnn::adam_step(p, cnn::zeros_like(p), state);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) EXPECT_EQ(p.blocks[i].values, before.blocks[i].values);
}

TEST(Adam, ShapeMismatch) {
  auto p = cnn::init_params<double>({8, 8, 3, {2}}, 3);
  auto state = cnn::AdamState<double>::fresh(p);
  auto g = cnn::zeros_like(p);
  g.blocks[0].values.pop_back();
  expect_code(ErrorCode::ShapeMismatch, [&] { cnn::adam_step(p, g, state); });
}

TEST(Training, FullBatchLossMostlyDecreases) {
  SplitMix64 rng(4);
  const cnn::NetConfig config{16, 16, 3, {4, 8}};
  auto p = cnn::init_params<double>(config, 17);
  cnn::Tensor4<double> batch(8, 16, 16, 3);
  std::vector<ProbRow<double>> labels(8);
  for (std::size_t b = 0; b < 8; ++b) {
    labels[b] = b % 2 == 0 ? ProbRow<double>{1, 0} : ProbRow<double>{0, 1};
    for (std::size_t i = 0; i < 16 * 16 * 3; ++i)
      batch.data[b * 768 + i] = rng.uniform() * (b % 2 == 0 ? 0.3 : 1.0);
  }
  auto state = cnn::AdamState<double>::fresh(p, {1e-4, 0.9, 0.999, 1e-8});
  double previous = std::numeric_limits<double>::infinity();
  int decreases = 0;
  for (int step = 0; step < 50; ++step) {
    const auto fwd = cnn::forward(p, batch);
    const double loss = cnn::bce_loss<double>(fwd.probs, labels);
    if (loss <= previous) ++decreases;
    previous = loss;
    cnn::adam_step(p, cnn::backward<double>(p, fwd.cache, fwd.probs, labels), state);
  }
  EXPECT_GE(decreases, 45);
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto p = cnn::init_params<float>({32, 24, 3, {4, 8, 6}}, 99);
  const auto bytes = save_checkpoint(p);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "ELACNNCK");
  const auto back = load_checkpoint(bytes);
  EXPECT_EQ(back.config, p.config);
  ASSERT_EQ(back.blocks.size(), p.blocks.size());
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    EXPECT_EQ(back.blocks[i].name, p.blocks[i].name);
    EXPECT_EQ(back.blocks[i].shape, p.blocks[i].shape);
    EXPECT_EQ(back.blocks[i].values, p.blocks[i].values);
  }
  EXPECT_EQ(save_checkpoint(back), bytes);
}

TEST(Checkpoint, CorruptInputs) {
  const auto bytes = save_checkpoint(cnn::init_params<float>({16, 16, 3, {4}}, 1));
  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  expect_code(ErrorCode::CorruptFile, [&] { (void)load_checkpoint(truncated); });
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  expect_code(ErrorCode::CorruptFile, [&] { (void)load_checkpoint(bad_magic); });
  auto bad_version = bytes;
  bad_version[8] = 9;
  expect_code(ErrorCode::UnsupportedFormat, [&] { (void)load_checkpoint(bad_version); });
  auto trailing = bytes;
  trailing.push_back(0);
  expect_code(ErrorCode::CorruptFile, [&] { (void)load_checkpoint(trailing); });
}

}  // namespace
}  // namespace ela
