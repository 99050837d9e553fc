#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "ela/csv.hpp"
#include "ela/error.hpp"

namespace ela {

struct PredictionRow {
  std::string path;
  int label = 0;  // 1 = tampered (positive)
  double p_authentic = 0.5;
  double p_tampered = 0.5;
};

struct PredictionSet {
  std::vector<PredictionRow> rows;
};

inline constexpr double kProbabilitySumTolerance = 1e-6;

inline void validate(const PredictionSet& preds) {
  require(!preds.rows.empty(), ErrorCode::EmptyPredictionSet, "prediction set has no rows");
  for (const auto& r : preds.rows) {
    require(r.label == 0 || r.label == 1, ErrorCode::InvalidArgument, "label must be 0 or 1 for " + r.path);
    require(r.p_authentic >= 0 && r.p_tampered >= 0 &&
                std::abs(r.p_authentic + r.p_tampered - 1.0) <= kProbabilitySumTolerance,
            ErrorCode::InvalidArgument, "probabilities must be non-negative and sum to 1 for " + r.path);
  }
}

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  [[nodiscard]] std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Tampered is positive; a row is predicted positive iff p_tampered >= threshold.
inline ConfusionCounts confusion(const PredictionSet& preds, double threshold = 0.5) {
  validate(preds);
  require(threshold >= 0.0 && threshold <= 1.0, ErrorCode::InvalidArgument, "threshold must be in [0, 1]");
  ConfusionCounts cc;
  for (const auto& r : preds.rows) {
    const bool positive = r.p_tampered >= threshold;
    if (positive) {
      (r.label == 1 ? cc.tp : cc.fp) += 1;
    } else {
      (r.label == 1 ? cc.fn : cc.tn) += 1;
    }
  }
  return cc;
}

/// tp / (tp + fp), 0 when nothing is predicted positive.
inline double precision(const ConfusionCounts& cc) {
  const auto d = cc.tp + cc.fp;
  return d == 0 ? 0.0 : static_cast<double>(cc.tp) / static_cast<double>(d);
}

/// tp / (tp + fn), 0 when there are no positives.
inline double recall(const ConfusionCounts& cc) {
  const auto d = cc.tp + cc.fn;
  return d == 0 ? 0.0 : static_cast<double>(cc.tp) / static_cast<double>(d);
}

inline double accuracy(const ConfusionCounts& cc) {
  const auto n = cc.total();
  return n == 0 ? 0.0 : static_cast<double>(cc.tp + cc.tn) / static_cast<double>(n);
}

/// (1 + b^2) P R / (b^2 P + R); b < 1 leans toward precision, b > 1 toward recall.
inline double f_measure(double p, double r, double beta = 1.0) {
  require(beta > 0 && std::isfinite(beta), ErrorCode::InvalidArgument, "beta must be positive");
  require(p >= 0 && p <= 1 && r >= 0 && r <= 1, ErrorCode::InvalidArgument, "precision and recall must be in [0, 1]");
  const double b2 = beta * beta;
  const double denom = b2 * p + r;
  return denom == 0 ? 0.0 : (1 + b2) * p * r / denom;
}

struct RocPoint {
  double fpr = 0;
  double tpr = 0;
  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

/// points[i] is the operating point for "predict positive iff score >=
/// thresholds[i]"; the leading (0, 0) carries threshold +inf.
struct RocCurve {
  std::vector<RocPoint> points;
  std::vector<double> thresholds;
};

/// Staircase sweep over distinct p_tampered values, highest first. Rows with
/// equal scores enter together, so ties become a single diagonal step.
inline RocCurve roc_curve(const PredictionSet& preds) {
  validate(preds);
  std::size_t positives = 0;
  for (const auto& r : preds.rows) positives += r.label == 1 ? 1 : 0;
  const std::size_t negatives = preds.rows.size() - positives;
  require(positives > 0 && negatives > 0, ErrorCode::SingleClassOnly,
          "ROC needs at least one positive and one negative row");
  std::vector<std::size_t> order(preds.rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds.rows[a].p_tampered > preds.rows[b].p_tampered;
  });
  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  curve.thresholds.push_back(std::numeric_limits<double>::infinity());
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double score = preds.rows[order[i]].p_tampered;
    for (; i < order.size() && preds.rows[order[i]].p_tampered == score; ++i)
      (preds.rows[order[i]].label == 1 ? tp : fp) += 1;
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                            static_cast<double>(tp) / static_cast<double>(positives)});
    curve.thresholds.push_back(score);
  }
  if (curve.points.back() != RocPoint{1.0, 1.0}) {
    curve.points.push_back({1.0, 1.0});
    curve.thresholds.push_back(-std::numeric_limits<double>::infinity());
  }
  return curve;
}

/// Trapezoidal area under the curve.
inline double auc(const RocCurve& curve) {
  double area = 0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  return area;
}

/// Mean of -log(p_true) with p_true clamped to [1e-12, 1].
inline double mean_bce(const PredictionSet& preds) {
  validate(preds);
  double total = 0;
  for (const auto& r : preds.rows) {
    const double p = r.label == 1 ? r.p_tampered : r.p_authentic;
    total -= std::log(std::clamp(p, 1e-12, 1.0));
  }
  return total / static_cast<double>(preds.rows.size());
}

struct MetricsReport {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f_measure = 0;
  double auc = 0;
  double mean_bce = 0;
  double threshold = 0.5;
  double beta = 1.0;
  ConfusionCounts counts;
};

inline MetricsReport evaluate(const PredictionSet& preds, double threshold = 0.5, double beta = 1.0) {
  MetricsReport r;
  r.threshold = threshold;
  r.beta = beta;
  r.counts = confusion(preds, threshold);
  r.accuracy = accuracy(r.counts);
  r.precision = precision(r.counts);
  r.recall = recall(r.counts);
  r.f_measure = f_measure(r.precision, r.recall, beta);
  r.auc = auc(roc_curve(preds));
  r.mean_bce = mean_bce(preds);
  return r;
}

// ---- files -------------------------------------------------------------------

inline std::string format_predictions(const PredictionSet& preds, std::string_view preamble = {}) {
  std::string out(preamble);
  out += "path,label,p_authentic,p_tampered\n";
  for (const auto& r : preds.rows)
    out += csv::field(r.path) + "," + std::to_string(r.label) + "," + csv::shortest(r.p_authentic) + "," +
           csv::shortest(r.p_tampered) + "\n";
  return out;
}

struct ParsedPredictions {
  PredictionSet predictions;
  std::vector<std::string> warnings;
};

/// Strict on structure and values; non-fatal oddities (duplicate paths, extra
/// columns) are returned as warnings.
inline ParsedPredictions parse_predictions(std::string_view text) {
  ParsedPredictions out;
  bool header = false;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (const auto& line : csv::lines(text)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto cells = csv::split_row(line);
    if (!header) {
      require(cells.size() >= 4 && cells[0] == "path" && cells[1] == "label" && cells[2] == "p_authentic" &&
                  cells[3] == "p_tampered",
              ErrorCode::Parse, "predictions header must be 'path,label,p_authentic,p_tampered'");
      if (cells.size() > 4) out.warnings.push_back("header has extra columns; they are ignored");
      header = true;
      continue;
    }
    const auto where = "line " + std::to_string(line_no);
    require(cells.size() >= 4, ErrorCode::Parse, where + ": expected 4 fields");
    if (cells.size() > 4) out.warnings.push_back(where + ": extra columns ignored");
    PredictionRow row{cells[0], static_cast<int>(csv::parse_int(cells[1])), csv::parse_double(cells[2]),
                      csv::parse_double(cells[3])};
    require(row.label == 0 || row.label == 1, ErrorCode::Parse, where + ": label must be 0 or 1");
    require(row.p_authentic >= 0 && row.p_tampered >= 0 &&
                std::abs(row.p_authentic + row.p_tampered - 1.0) <= kProbabilitySumTolerance,
            ErrorCode::Parse, where + ": probabilities must be non-negative and sum to 1");
    if (!seen.insert(row.path).second) out.warnings.push_back(where + ": duplicate path " + row.path);
    out.predictions.rows.push_back(std::move(row));
  }
  require(header, ErrorCode::Parse, "predictions CSV has no header");
  require(!out.predictions.rows.empty(), ErrorCode::EmptyPredictionSet, "predictions CSV has no rows");
  return out;
}

inline std::string format_roc(const RocCurve& curve) {
  std::string out = "threshold,fpr,tpr\n";
  for (std::size_t i = 0; i < curve.points.size(); ++i)
    out += csv::shortest(curve.thresholds[i]) + "," + csv::shortest(curve.points[i].fpr) + "," +
           csv::shortest(curve.points[i].tpr) + "\n";
  return out;
}

inline std::string format_report_text(const MetricsReport& r) {
  std::string out;
  auto kv = [&](const char* key, double v) { out += std::string(key) + "=" + csv::fixed(v, 6) + "\n"; };
  kv("accuracy", r.accuracy);
  kv("precision", r.precision);
  kv("recall", r.recall);
  kv("f_measure", r.f_measure);
  kv("auc", r.auc);
  kv("mean_bce", r.mean_bce);
  kv("threshold", r.threshold);
  kv("beta", r.beta);
  out += "tp=" + std::to_string(r.counts.tp) + "\nfp=" + std::to_string(r.counts.fp) +
         "\ntn=" + std::to_string(r.counts.tn) + "\nfn=" + std::to_string(r.counts.fn) + "\n";
  return out;
}

inline std::string format_report_csv(const MetricsReport& r) {
  std::string out = "accuracy,precision,recall,f_measure,auc,mean_bce,threshold,beta,tp,fp,tn,fn\n";
  for (double v : {r.accuracy, r.precision, r.recall, r.f_measure, r.auc, r.mean_bce, r.threshold, r.beta})
    out += csv::shortest(v) + ",";
  out += std::to_string(r.counts.tp) + "," + std::to_string(r.counts.fp) + "," + std::to_string(r.counts.tn) +
         "," + std::to_string(r.counts.fn) + "\n";
  return out;
}

}  // namespace ela
