#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace gop {

struct LabeledScore {
  std::string utterance_id;
  std::size_t pos = 0;
  double gop = 0.0;
  bool mispronounced = false;  // positive class
  std::optional<double> human_score;  // 0..2
};

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
};

// Positive = mispronounced; predicted positive when gop < threshold.
ConfusionCounts confusion_at(std::span<const LabeledScore> scores,
                             double threshold);

struct ClassificationMetrics {
  ConfusionCounts counts;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double mcc = 0.0;
  // Set when the metric's denominator was zero and 0 was reported instead.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
  bool mcc_undefined = false;
};

ClassificationMetrics metrics_from_counts(const ConfusionCounts& counts);

double matthews_correlation(const ConfusionCounts& counts);

// Threshold-free ROC AUC with mispronounced as positive and lower GOP meaning
// more likely positive. Rank-based; ties count 1/2. Throws kSingleClass.
double roc_auc(std::span<const LabeledScore> scores);

// AUC of the binarized classifier at one operating point: (TPR + TNR) / 2.
double operating_point_auc(const ConfusionCounts& counts);

// Linear interpolation between order statistics, p in [0, 100].
double percentile(std::span<const double> sorted_values, double p);

struct ThresholdChoice {
  double threshold = 0.0;
  int percentile = 0;
  double mcc = 0.0;
};

// Sweeps integer percentiles 1..99 of the pooled GOP distribution and keeps
// the one with the highest MCC (lowest percentile on ties). Throws
// kSingleClass unless both classes are present.
ThresholdChoice optimize_threshold(std::span<const LabeledScore> scores);

struct ClassificationSummary {
  ClassificationMetrics metrics;
  double auc = 0.0;
  double auc_at_operating_point = 0.0;
};

ClassificationSummary classification_metrics(
    std::span<const LabeledScore> scores, double threshold);

struct Poly2 {
  double a = 0.0, b = 0.0, c = 0.0;
  double operator()(double x) const { return (a * x + b) * x + c; }
};

// Least-squares fit of human ~ a*gop^2 + b*gop + c. Throws kRankDeficient
// for fewer than 3 points or fewer than 3 distinct gop values.
Poly2 fit_poly2(std::span<const double> gop, std::span<const double> human);

struct Correlation {
  double point = 0.0;
  double low = 0.0;
  double high = 0.0;
};

// Pearson r with a Fisher-z confidence interval. Throws kZeroVariance and
// kInvalidArgument for fewer than 4 points.
Correlation pcc_with_ci(std::span<const double> predicted,
                        std::span<const double> human,
                        double confidence = 0.95);

double mse(std::span<const double> predicted, std::span<const double> human);

struct RegressionSummary {
  Poly2 fit;
  std::optional<Correlation> pcc;  // absent when undefined
  double mse = 0.0;
  bool clamped = true;
};

// Fits the polynomial, predicts, optionally clamps predictions to [0, 2],
// then scores against the human ratings.
RegressionSummary regression_metrics(std::span<const double> gop,
                                     std::span<const double> human,
                                     bool clamp = true);

struct EvalSummary {
  ThresholdChoice threshold;
  ClassificationSummary classification;
  std::optional<RegressionSummary> regression;
  std::size_t samples = 0;
  std::size_t excluded_non_finite = 0;
};

struct EvalOptions {
  bool clamp_predictions = true;
};

// Threshold search + classification metrics, plus regression metrics when
// every sample carries a human score. Non-finite GOP values (undecided
// phonemes) are excluded and counted.
EvalSummary evaluate(std::span<const LabeledScore> scores,
                     const EvalOptions& options = {});

// Keys follow the result-table row names: "AUC", "Accuracy", "Precision",
// "Recall", "F1", "MCC", "AUC MCC_max", and with regression
// "PCC (low conf)", "PCC (high conf)", "MSE".
nlohmann::ordered_json to_json(const EvalSummary& summary);

}  // namespace gop
