#pragma once

// Independent oracles and generators shared by the test executables. Nothing
// here calls into the library's algorithms, only its value types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "gop/inventory.hpp"
#include "gop/posterior.hpp"

namespace testing {

using gop::PhonemeId;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Inventory "<blank>", "a", "b", ... with the blank at column 0.
inline gop::PhonemeInventory letters(std::size_t phonemes) {
  std::vector<std::string> symbols{"<blank>"};
  for (std::size_t i = 0; i < phonemes; ++i)
    symbols.push_back(std::string(1, static_cast<char>('a' + i)));
  return gop::PhonemeInventory(symbols, 0);
}

inline gop::PosteriorMatrix matrix_from_probs(
    std::size_t frames, std::size_t columns,
    const std::vector<double>& probs) {
  std::vector<double> logs;
  for (double p : probs) logs.push_back(std::log(p));
  return gop::PosteriorMatrix("m", frames, columns, 0, logs);
}

// Strictly positive normalized rows.
inline gop::PosteriorMatrix random_matrix(std::mt19937_64& rng,
                                          std::size_t frames,
                                          std::size_t columns) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> probs;
  for (std::size_t t = 0; t < frames; ++t) {
    std::vector<double> row(columns);
    double sum = 0.0;
    for (auto& v : row) sum += (v = u(rng));
    for (auto v : row) probs.push_back(v / sum);
  }
  return matrix_from_probs(frames, columns, probs);
}

inline std::vector<PhonemeId> random_sequence(std::mt19937_64& rng,
                                              std::size_t length,
                                              std::size_t phonemes) {
  std::uniform_int_distribution<PhonemeId> pick(
      1, static_cast<PhonemeId>(phonemes));
  std::vector<PhonemeId> seq(length);
  for (auto& s : seq) s = pick(rng);
  return seq;
}

// Blank removal after merging runs.
inline std::vector<PhonemeId> collapse(const std::vector<std::size_t>& path,
                                       std::size_t blank) {
  std::vector<PhonemeId> out;
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (path[t] == blank) continue;
    if (t > 0 && path[t] == path[t - 1]) continue;
    out.push_back(static_cast<PhonemeId>(path[t]));
  }
  return out;
}

struct PathTotals {
  double sum = 0.0;  // linear probability
  double best = 0.0;
  std::size_t count = 0;
};

// Enumerates all columns^T paths in linear probability space.
inline PathTotals enumerate_paths(const gop::PosteriorMatrix& m,
                                  const std::vector<PhonemeId>& labels) {
  const std::size_t T = m.frames(), C = m.columns();
  std::vector<std::size_t> path(T, 0);
  PathTotals totals;
  while (true) {
    if (collapse(path, m.blank_index()) == labels) {
      double p = 1.0;
      for (std::size_t t = 0; t < T; ++t) p *= std::exp(m(t, path[t]));
      totals.sum += p;
      totals.best = std::max(totals.best, p);
      ++totals.count;
    }
    std::size_t t = 0;
    while (t < T && ++path[t] == C) path[t++] = 0;
    if (t == T) break;
  }
  return totals;
}

inline double log_or_neg_inf(double p) {
  return p > 0.0 ? std::log(p) : -kInf;
}

// ---- metric oracles --------------------------------------------------------

inline double mcc_formula(double tp, double fp, double tn, double fn) {
  const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  return den == 0.0 ? 0.0 : (tp * tn - fp * fn) / std::sqrt(den);
}

// Pairwise Mann-Whitney count over (positive, negative) pairs; a positive
// ranks "higher" when its score is lower.
inline double pairwise_auc(const std::vector<double>& scores,
                           const std::vector<bool>& positive) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positive[j]) continue;
      pairs += 1.0;
      if (scores[i] < scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

inline double det3(const double m[3][3]) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

// Normal equations for y ~ a x^2 + b x + c solved by Cramer's rule.
inline std::vector<double> poly2_normal_equations(const std::vector<double>& x,
                                                  const std::vector<double>& y) {
  double s[5] = {0, 0, 0, 0, 0}, r[3] = {0, 0, 0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    double p = 1.0;
    for (int k = 0; k < 5; ++k, p *= x[i]) {
      s[k] += p;
      if (k < 3) r[k] += p * y[i];
    }
  }
  // Unknown order (a, b, c) against powers (2, 1, 0).
  const double A[3][3] = {{s[4], s[3], s[2]}, {s[3], s[2], s[1]},
                          {s[2], s[1], s[0]}};
  const double rhs[3] = {r[2], r[1], r[0]};
  const double d = det3(A);
  std::vector<double> out;
  for (int col = 0; col < 3; ++col) {
    double M[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) M[i][j] = j == col ? rhs[i] : A[i][j];
    out.push_back(det3(M) / d);
  }
  return out;
}

inline double pearson_formula(const std::vector<double>& x,
                              const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) /
         std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

// Standard normal 0.975 quantile.
inline constexpr double kZ975 = 1.959963984540054;

inline double numpy_percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double rank = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (rank - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace testing
