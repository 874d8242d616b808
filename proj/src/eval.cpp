#include "gop/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "gop/error.hpp"

namespace gop {

namespace {

double safe_ratio(double num, double den, bool& undefined) {
  if (den == 0.0) {
    undefined = true;
    return 0.0;
  }
  return num / den;
}

void require_both_classes(std::span<const LabeledScore> scores) {
  std::size_t positives = 0;
  for (const auto& s : scores) positives += s.mispronounced ? 1 : 0;
  if (positives == 0 || positives == scores.size())
    throw Error(ErrorCode::kSingleClass,
                "both correct and mispronounced samples are required");
}

void require_same_length(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::kLengthMismatch,
                "length mismatch: " + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()));
}

}  // namespace

ConfusionCounts confusion_at(std::span<const LabeledScore> scores,
                             double threshold) {
  ConfusionCounts c;
  for (const auto& s : scores) {
    const bool predicted = s.gop < threshold;
    if (predicted && s.mispronounced) ++c.tp;
    else if (predicted) ++c.fp;
    else if (s.mispronounced) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double matthews_correlation(const ConfusionCounts& c) {
  const double tp = c.tp, fp = c.fp, tn = c.tn, fn = c.fn;
  const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (den == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(den);
}

ClassificationMetrics metrics_from_counts(const ConfusionCounts& c) {
  ClassificationMetrics m;
  m.counts = c;
  const double tp = c.tp, fp = c.fp, tn = c.tn, fn = c.fn;
  bool unused = false;
  m.accuracy = safe_ratio(tp + tn, static_cast<double>(c.total()), unused);
  m.precision = safe_ratio(tp, tp + fp, m.precision_undefined);
  m.recall = safe_ratio(tp, tp + fn, m.recall_undefined);
  m.f1 = safe_ratio(2 * tp, 2 * tp + fp + fn, m.f1_undefined);
  m.mcc_undefined = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn) == 0.0;
  m.mcc = matthews_correlation(c);
  return m;
}

double roc_auc(std::span<const LabeledScore> scores) {
  require_both_classes(scores);
  // Mann-Whitney U over the ranking by -gop (low GOP = positive).
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a].gop > scores[b].gop;
  });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]].gop == scores[order[i]].gop)
      ++j;
    const double average_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (scores[order[k]].mispronounced) {
        positive_rank_sum += average_rank;
        ++positives;
      }
    }
    i = j;
  }
  const double p = positives;
  const double q = static_cast<double>(scores.size()) - p;
  return (positive_rank_sum - p * (p + 1) / 2) / (p * q);
}

double operating_point_auc(const ConfusionCounts& c) {
  bool unused = false;
  const double tpr = safe_ratio(c.tp, c.tp + c.fn, unused);
  const double tnr = safe_ratio(c.tn, c.tn + c.fp, unused);
  return 0.5 * (tpr + tnr);
}

double percentile(std::span<const double> sorted_values, double p) {
  if (sorted_values.empty())
    throw Error(ErrorCode::kInvalidArgument, "percentile of an empty list");
  const double position =
      p / 100.0 * static_cast<double>(sorted_values.size() - 1);
  const auto lower = static_cast<std::size_t>(std::floor(position));
  const std::size_t upper = std::min(lower + 1, sorted_values.size() - 1);
  const double fraction = position - static_cast<double>(lower);
  return sorted_values[lower] +
         fraction * (sorted_values[upper] - sorted_values[lower]);
}

ThresholdChoice optimize_threshold(std::span<const LabeledScore> scores) {
  require_both_classes(scores);
  std::vector<double> sorted;
  sorted.reserve(scores.size());
  for (const auto& s : scores) sorted.push_back(s.gop);
  std::sort(sorted.begin(), sorted.end());

  ThresholdChoice best;
  bool have = false;
  for (int p = 1; p <= 99; ++p) {
    const double threshold = percentile(sorted, p);
    const double mcc = matthews_correlation(confusion_at(scores, threshold));
    if (!have || mcc > best.mcc) {
      best = {threshold, p, mcc};
      have = true;
    }
  }
  return best;
}

ClassificationSummary classification_metrics(
    std::span<const LabeledScore> scores, double threshold) {
  if (!std::isfinite(threshold))
    throw Error(ErrorCode::kInvalidArgument, "threshold must be finite");
  ClassificationSummary summary;
  summary.metrics = metrics_from_counts(confusion_at(scores, threshold));
  summary.auc = roc_auc(scores);
  summary.auc_at_operating_point = operating_point_auc(summary.metrics.counts);
  return summary;
}

Poly2 fit_poly2(std::span<const double> gop, std::span<const double> human) {
  require_same_length(gop, human);
  if (gop.size() < 3)
    throw Error(ErrorCode::kRankDeficient, "need at least 3 points");
  const auto n = static_cast<Eigen::Index>(gop.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd target(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = gop[static_cast<std::size_t>(i)];
    design(i, 0) = x * x;
    design(i, 1) = x;
    design(i, 2) = 1.0;
    target(i) = human[static_cast<std::size_t>(i)];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 3)
    throw Error(ErrorCode::kRankDeficient,
                "design matrix is rank deficient (need 3 distinct GOP values)");
  Eigen::Vector3d coef = qr.solve(target);
  return {coef(0), coef(1), coef(2)};
}

Correlation pcc_with_ci(std::span<const double> predicted,
                        std::span<const double> human, double confidence) {
  require_same_length(predicted, human);
  const std::size_t n = predicted.size();
  if (n < 4)
    throw Error(ErrorCode::kInvalidArgument,
                "confidence interval needs at least 4 points");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "confidence must lie in (0, 1)");
  const double mean_x =
      std::accumulate(predicted.begin(), predicted.end(), 0.0) / n;
  const double mean_y = std::accumulate(human.begin(), human.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = predicted[i] - mean_x;
    const double dy = human[i] - mean_y;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw Error(ErrorCode::kZeroVariance, "zero variance in PCC input");

  Correlation out;
  out.point = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  if (std::abs(out.point) == 1.0) {
    out.low = out.high = out.point;
    return out;
  }
  const boost::math::normal_distribution<double> standard;
  const double q = boost::math::quantile(standard, 0.5 + confidence / 2.0);
  const double z = std::atanh(out.point);
  const double se = 1.0 / std::sqrt(static_cast<double>(n) - 3.0);
  out.low = std::tanh(z - q * se);
  out.high = std::tanh(z + q * se);
  return out;
}

double mse(std::span<const double> predicted, std::span<const double> human) {
  require_same_length(predicted, human);
  if (predicted.empty())
    throw Error(ErrorCode::kInvalidArgument, "mse of an empty list");
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double r = predicted[i] - human[i];
    sum += r * r;
  }
  return sum / static_cast<double>(predicted.size());
}

RegressionSummary regression_metrics(std::span<const double> gop,
                                     std::span<const double> human,
                                     bool clamp) {
  RegressionSummary out;
  out.clamped = clamp;
  out.fit = fit_poly2(gop, human);
  std::vector<double> predicted(gop.size());
  for (std::size_t i = 0; i < gop.size(); ++i) {
    predicted[i] = out.fit(gop[i]);
    if (clamp) predicted[i] = std::clamp(predicted[i], 0.0, 2.0);
  }
  out.mse = mse(predicted, human);
  try {
    out.pcc = pcc_with_ci(predicted, human);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kZeroVariance &&
        e.code() != ErrorCode::kInvalidArgument)
      throw;
  }
  return out;
}

EvalSummary evaluate(std::span<const LabeledScore> scores,
                     const EvalOptions& options) {
  std::vector<LabeledScore> usable;
  usable.reserve(scores.size());
  EvalSummary summary;
  for (const auto& s : scores) {
    if (std::isfinite(s.gop)) usable.push_back(s);
    else ++summary.excluded_non_finite;
  }
  summary.samples = usable.size();
  summary.threshold = optimize_threshold(usable);
  summary.classification =
      classification_metrics(usable, summary.threshold.threshold);

  const bool have_human =
      !usable.empty() && std::all_of(usable.begin(), usable.end(),
                                     [](const LabeledScore& s) {
                                       return s.human_score.has_value();
                                     });
  if (have_human) {
    std::vector<double> gop, human;
    for (const auto& s : usable) {
      gop.push_back(s.gop);
      human.push_back(*s.human_score);
    }
    summary.regression =
        regression_metrics(gop, human, options.clamp_predictions);
  }
  return summary;
}

nlohmann::ordered_json to_json(const EvalSummary& summary) {
  const auto& m = summary.classification.metrics;
  nlohmann::ordered_json doc;
  doc["AUC"] = summary.classification.auc;
  doc["Accuracy"] = m.accuracy;
  doc["Precision"] = m.precision;
  doc["Recall"] = m.recall;
  doc["F1"] = m.f1;
  doc["MCC"] = m.mcc;
  doc["AUC MCC_max"] = summary.classification.auc_at_operating_point;
  if (summary.regression) {
    const auto& r = *summary.regression;
    if (r.pcc) {
      doc["PCC (low conf)"] = r.pcc->low;
      doc["PCC (high conf)"] = r.pcc->high;
      doc["PCC"] = r.pcc->point;
    } else {
      doc["PCC (low conf)"] = nullptr;
      doc["PCC (high conf)"] = nullptr;
      doc["PCC"] = nullptr;
      doc["pcc_undefined"] = true;
    }
    doc["MSE"] = r.mse;
    doc["poly2"] = {{"a", r.fit.a}, {"b", r.fit.b}, {"c", r.fit.c}};
    doc["predictions_clamped"] = r.clamped;
  }
  doc["threshold"] = summary.threshold.threshold;
  doc["threshold_percentile"] = summary.threshold.percentile;
  doc["counts"] = {{"TP", m.counts.tp},
                   {"FP", m.counts.fp},
                   {"TN", m.counts.tn},
                   {"FN", m.counts.fn}};
  nlohmann::ordered_json flags = nlohmann::ordered_json::array();
  if (m.precision_undefined) flags.push_back("precision");
  if (m.recall_undefined) flags.push_back("recall");
  if (m.f1_undefined) flags.push_back("f1");
  if (m.mcc_undefined) flags.push_back("mcc");
  doc["undefined_metrics"] = std::move(flags);
  doc["samples"] = summary.samples;
  doc["excluded_non_finite"] = summary.excluded_non_finite;
  return doc;
}

}  // namespace gop
