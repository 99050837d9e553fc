#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "ela/metrics.hpp"
#include "ela/rng.hpp"
#include "metric_oracles.hpp"

namespace ela {
namespace {

PredictionSet make_set(const std::vector<int>& labels, const std::vector<double>& p_tampered) {
  PredictionSet s;
  for (std::size_t i = 0; i < labels.size(); ++i)
    s.rows.push_back({"img" + std::to_string(i), labels[i], 1.0 - p_tampered[i], p_tampered[i]});
  return s;
}

void expect_points(const RocCurve& c, const std::vector<RocPoint>& expected) {
  ASSERT_EQ(c.points.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_DOUBLE_EQ(c.points[i].fpr, expected[i].fpr) << i;
    EXPECT_DOUBLE_EQ(c.points[i].tpr, expected[i].tpr) << i;
  }
}

void expect_code(ErrorCode code, auto&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TEST(Confusion, Examples) {
  const auto s = make_set({1, 0}, {0.7, 0.2});
  EXPECT_EQ(confusion(s, 0.5), (ConfusionCounts{1, 0, 1, 0}));

  const auto all = make_set({1, 0, 0, 1, 0}, {0.1, 0.2, 0.0, 0.9, 0.4});
  const auto zero = confusion(all, 0.0);
  EXPECT_EQ(zero.fp, 3u);
  EXPECT_EQ(zero.fn, 0u);

  const auto tie = make_set({0}, {0.5});
  EXPECT_EQ(confusion(tie, 0.5).fp, 1u);
}

TEST(Confusion, Errors) {
  expect_code(ErrorCode::EmptyPredictionSet, [] { (void)confusion(PredictionSet{}, 0.5); });
  expect_code(ErrorCode::InvalidArgument, [] { (void)confusion(make_set({1}, {0.5}), 1.5); });
  PredictionSet bad;
  bad.rows.push_back({"x", 1, 0.3, 0.3});
  expect_code(ErrorCode::InvalidArgument, [&] { (void)confusion(bad, 0.5); });
}

TEST(PrecisionRecall, Examples) {
  EXPECT_DOUBLE_EQ(precision({1, 1, 0, 0}), 0.5);
  EXPECT_DOUBLE_EQ(recall({1, 0, 0, 1}), 0.5);
  EXPECT_DOUBLE_EQ(precision({0, 0, 5, 5}), 0.0);
  EXPECT_DOUBLE_EQ(recall({0, 5, 5, 0}), 0.0);
}

TEST(FMeasure, TableRows) {
  EXPECT_NEAR(f_measure(0.9825, 0.7934, 1.0), 0.8779, 1e-4);
  EXPECT_NEAR(f_measure(0.9461, 0.8661, 1.0), 0.9044, 1e-4);
  for (double x : {0.0, 0.3, 0.77, 1.0})
    for (double beta : {0.5, 1.0, 2.0}) EXPECT_NEAR(f_measure(x, x, beta), x, 1e-15);
}

TEST(FMeasure, BetaLimitsAndHarmonicMean) {
  SplitMix64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const double p = rng.uniform(0.01, 1.0), r = rng.uniform(0.01, 1.0);
    EXPECT_NEAR(f_measure(p, r, 1.0), 2.0 / (1.0 / p + 1.0 / r), 1e-12);
    EXPECT_NEAR(f_measure(p, r, 1e-3), p, 1e-3);
    EXPECT_NEAR(f_measure(p, r, 1e3), r, 1e-3);
  }
  EXPECT_DOUBLE_EQ(f_measure(0.0, 0.0, 1.0), 0.0);
  expect_code(ErrorCode::InvalidArgument, [] { (void)f_measure(0.5, 0.5, 0.0); });
}

TEST(Roc, Examples) {
  expect_points(roc_curve(make_set({1, 0}, {0.9, 0.8})), {{0, 0}, {0, 1}, {1, 1}});
  expect_points(roc_curve(make_set({1, 0}, {0.6, 0.6})), {{0, 0}, {1, 1}});
  const auto c = roc_curve(make_set({1, 0, 1}, {0.8, 0.6, 0.4}));
  expect_points(c, {{0, 0}, {0, 0.5}, {1, 0.5}, {1, 1}});
  EXPECT_DOUBLE_EQ(auc(c), 0.5);
  EXPECT_TRUE(std::isinf(c.thresholds.front()));
  EXPECT_DOUBLE_EQ(c.thresholds[1], 0.8);
  EXPECT_DOUBLE_EQ(c.thresholds[3], 0.4);
}

TEST(Roc, SingleClassIsRejected) {
  expect_code(ErrorCode::SingleClassOnly, [] { (void)roc_curve(make_set({1, 1}, {0.2, 0.9})); });
}

TEST(Auc, PerfectAndDiagonal) {
  EXPECT_DOUBLE_EQ(auc(roc_curve(make_set({1, 0}, {0.9, 0.8}))), 1.0);
  EXPECT_DOUBLE_EQ(auc(roc_curve(make_set({1, 0, 1, 0}, {0.5, 0.5, 0.5, 0.5}))), 0.5);
}

TEST(Auc, MatchesPairwiseStatisticWithTies) {
  SplitMix64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = testing::random_prediction_set(rng, 60);
    EXPECT_NEAR(auc(roc_curve(s)), testing::pairwise_auc(s), 1e-12);
  }
}

TEST(Evaluate, Perfect) {
  const auto r = evaluate(make_set({1, 0, 1, 0}, {0.9, 0.1, 0.8, 0.3}));
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(r.precision, 1.0);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
  EXPECT_DOUBLE_EQ(r.f_measure, 1.0);
  EXPECT_DOUBLE_EQ(r.auc, 1.0);
}

TEST(Evaluate, InvertedScoresComplementAuc) {
  SplitMix64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = testing::random_prediction_set(rng, 40);
    auto inverted = s;
    for (auto& row : inverted.rows) std::swap(row.p_authentic, row.p_tampered);
    EXPECT_NEAR(auc(roc_curve(s)), 1.0 - auc(roc_curve(inverted)), 1e-12);
  }
}

// Reference values from scikit-learn (tests/oracles/generate_fixtures.py).
TEST(Evaluate, TwentyRowFixture) {
  const auto s = make_set({1, 0, 1, 1, 0, 0, 1, 0, 1, 0, 1, 1, 0, 0, 1, 0, 0, 1, 1, 0},
                          {0.95, 0.10, 0.80, 0.40, 0.55, 0.20, 0.70, 0.70, 0.50, 0.05, 0.90, 0.65, 0.30, 0.45,
                           0.35, 0.60, 0.15, 0.85, 0.50, 0.25});
  const auto r = evaluate(s, 0.5, 1.0);
  EXPECT_EQ(r.counts, (ConfusionCounts{8, 3, 7, 2}));
  EXPECT_NEAR(r.accuracy, 0.75, 1e-12);
  EXPECT_NEAR(r.precision, 0.72727272727272729, 1e-12);
  EXPECT_NEAR(r.recall, 0.8, 1e-12);
  EXPECT_NEAR(r.f_measure, 0.76190476190476186, 1e-12);
  EXPECT_NEAR(r.auc, 0.845, 1e-12);
  EXPECT_NEAR(r.mean_bce, 0.46927314544013149, 1e-12);
  EXPECT_NEAR(evaluate(s, 0.5, 0.5).f_measure, 0.7407407407407407, 1e-12);
  EXPECT_NEAR(evaluate(s, 0.5, 2.0).f_measure, 0.78431372549019607, 1e-12);
}

TEST(Evaluate, RatesStayInUnitInterval) {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = testing::random_prediction_set(rng, 30);
    const auto r = evaluate(s, rng.uniform());
    for (double v : {r.accuracy, r.precision, r.recall, r.f_measure, r.auc}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_GE(r.mean_bce, 0.0);
    EXPECT_EQ(r.counts.total(), s.rows.size());
  }
}

TEST(PredictionsCsv, RoundTripAndWarnings) {
  const auto s = make_set({1, 0, 1}, {0.123456789012345, 0.5, 1.0 / 3.0});
  const auto text = format_predictions(s, "# model=test\n");
  const auto parsed = parse_predictions(text);
  EXPECT_TRUE(parsed.warnings.empty());
  ASSERT_EQ(parsed.predictions.rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(parsed.predictions.rows[i].path, s.rows[i].path);
    EXPECT_EQ(parsed.predictions.rows[i].label, s.rows[i].label);
    EXPECT_EQ(parsed.predictions.rows[i].p_tampered, s.rows[i].p_tampered);
  }

  const auto dup = parse_predictions("path,label,p_authentic,p_tampered\na.png,1,0.2,0.8\na.png,0,0.6,0.4,x\n");
  EXPECT_EQ(dup.warnings.size(), 2u);
}

TEST(PredictionsCsv, Errors) {
  expect_code(ErrorCode::Parse, [] { (void)parse_predictions("path,label,p\n"); });
  expect_code(ErrorCode::Parse,
              [] { (void)parse_predictions("path,label,p_authentic,p_tampered\na,1,0.2,0.7\n"); });
  expect_code(ErrorCode::Parse,
              [] { (void)parse_predictions("path,label,p_authentic,p_tampered\na,2,0.2,0.8\n"); });
  expect_code(ErrorCode::EmptyPredictionSet, [] { (void)parse_predictions("path,label,p_authentic,p_tampered\n"); });
}

TEST(Report, TextAndCsv) {
  // 672/12/175 rounds to the VGG-19 table row: P 0.9825, R 0.7934.
  PredictionSet s;
  auto add = [&](int n, int label, double p) {
    for (int i = 0; i < n; ++i) s.rows.push_back({"r", label, 1 - p, p});
  };
  add(672, 1, 0.9);
  add(12, 0, 0.9);
  add(175, 1, 0.1);
  add(100, 0, 0.1);
  const auto r = evaluate(s);
  EXPECT_NEAR(r.precision, 0.9825, 5e-5);
  EXPECT_NEAR(r.recall, 0.7934, 5e-5);
  const auto text = format_report_text(r);
  EXPECT_NE(text.find("f_measure=0.877858"), std::string::npos) << text;
  const auto csv_text = format_report_csv(r);
  EXPECT_EQ(csv_text.substr(0, csv_text.find('\n')),
            "accuracy,precision,recall,f_measure,auc,mean_bce,threshold,beta,tp,fp,tn,fn");
  EXPECT_NE(csv_text.find(",672,12,100,175"), std::string::npos);
}

TEST(RocCsv, HeaderAndRows) {
  const auto text = format_roc(roc_curve(make_set({1, 0}, {0.9, 0.8})));
  EXPECT_EQ(text, "threshold,fpr,tpr\ninf,0,0\n0.9,0,1\n0.8,1,1\n");
}

}  // namespace
}  // namespace ela
