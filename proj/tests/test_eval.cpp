#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "gop/error.hpp"
#include "gop/eval.hpp"
#include "support.hpp"

using namespace gop;

namespace {

std::vector<LabeledScore> labeled(const std::vector<double>& gop,
                                  const std::vector<bool>& positive) {
  std::vector<LabeledScore> out;
  for (std::size_t i = 0; i < gop.size(); ++i)
    out.push_back({"u", i, gop[i], positive[i], std::nullopt});
  return out;
}

double mcc_at(const std::vector<double>& gop, const std::vector<bool>& pos,
              double threshold) {
  double tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < gop.size(); ++i) {
    const bool predicted = gop[i] < threshold;
    if (predicted && pos[i]) ++tp;
    else if (predicted) ++fp;
    else if (pos[i]) ++fn;
    else ++tn;
  }
  return testing::mcc_formula(tp, fp, tn, fn);
}

}  // namespace

TEST_CASE("counts to metrics") {
  const auto m = metrics_from_counts({1, 1, 1, 1});
  CHECK(m.accuracy == 0.5);
  CHECK(m.precision == 0.5);
  CHECK(m.recall == 0.5);
  CHECK(m.mcc == 0.0);

  const auto p = metrics_from_counts({509, 491, 100, 100});
  CHECK(p.precision == doctest::Approx(0.509).epsilon(1e-12));

  const auto neg = metrics_from_counts({0, 0, 5, 3});
  CHECK(neg.recall == 0.0);
  CHECK(neg.precision_undefined);
  CHECK(neg.mcc_undefined);
  CHECK(neg.mcc == 0.0);

  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    ConfusionCounts c{rng() % 20, rng() % 20, rng() % 20, rng() % 20};
    CHECK(std::abs(matthews_correlation(c) -
                   testing::mcc_formula(c.tp, c.fp, c.tn, c.fn)) <= 1e-12);
  }
}

TEST_CASE("rank AUC matches pairwise counting") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 4 + rng() % 46;
    std::vector<double> gop(n);
    std::vector<bool> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      gop[i] = static_cast<double>(rng() % 10);  // plenty of ties
      pos[i] = i < 2 ? i == 0 : rng() % 2 == 0;
    }
    CHECK(std::abs(roc_auc(labeled(gop, pos)) -
                   testing::pairwise_auc(gop, pos)) <= 1e-12);
  }
  CHECK_THROWS_AS(roc_auc(labeled({1, 2}, {true, true})), Error);
  CHECK(operating_point_auc({3, 1, 4, 2}) ==
        doctest::Approx((0.6 + 0.8) / 2));
}

TEST_CASE("percentiles interpolate linearly") {
  std::vector<double> v{4, 1, 3, 2, 10};
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (double p : {0.0, 1.0, 12.5, 50.0, 99.0, 100.0})
    CHECK(percentile(sorted, p) == doctest::Approx(testing::numpy_percentile(v, p)));
}

TEST_CASE("threshold search") {
  // Separable: every mispronounced score lies below every correct one.
  std::vector<double> gop{-5, -4, -3, 1, 2, 3, 4, 5};
  std::vector<bool> pos{true, true, true, false, false, false, false, false};
  const auto sep = optimize_threshold(labeled(gop, pos));
  CHECK(sep.mcc == 1.0);
  int lowest = 0;
  for (int p = 1; p <= 99; ++p) {
    if (mcc_at(gop, pos, testing::numpy_percentile(gop, p)) == 1.0) {
      lowest = p;
      break;
    }
  }
  CHECK(sep.percentile == lowest);

  // Labels independent of scores.
  std::vector<double> g2;
  std::vector<bool> p2;
  for (int s = 0; s < 10; ++s)
    for (bool b : {true, false, false, true}) {
      g2.push_back(s);
      p2.push_back(b);
    }
  const auto null = classification_metrics(
      labeled(g2, p2), optimize_threshold(labeled(g2, p2)).threshold);
  CHECK(std::abs(null.metrics.mcc) < 1e-12);

  // 20-point fixture versus exhaustive midpoint search.
  const std::vector<double> g3{-9.1, -7.4, -6.0, -5.2, -4.8, -3.3, -2.9, -2.0,
                               -1.1, -0.4, 0.3,  0.9,  1.6,  2.2,  2.8,  3.5,
                               4.1,  5.0,  6.3,  7.7};
  const std::vector<bool> p3{true,  true,  false, true,  true,  false, true,
                             false, false, true,  false, false, true,  false,
                             false, false, false, true,  false, false};
  double best_midpoint = -1.0;
  for (std::size_t i = 0; i + 1 < g3.size(); ++i)
    best_midpoint = std::max(best_midpoint,
                             mcc_at(g3, p3, 0.5 * (g3[i] + g3[i + 1])));
  const auto choice = optimize_threshold(labeled(g3, p3));
  CHECK(choice.mcc == doctest::Approx(best_midpoint).epsilon(1e-12));
  CHECK(mcc_at(g3, p3, choice.threshold) == doctest::Approx(choice.mcc));
  CHECK(choice.threshold == testing::numpy_percentile(g3, choice.percentile));
}

TEST_CASE("quadratic fit") {
  std::vector<double> x{-2, -1, 0, 1, 2, 3};
  std::vector<double> y;
  for (double v : x) y.push_back(v * v);
  const auto f = fit_poly2(x, y);
  CHECK(std::abs(f.a - 1.0) <= 1e-9);
  CHECK(std::abs(f.b) <= 1e-9);
  CHECK(std::abs(f.c) <= 1e-9);

  const std::vector<double> flat(6, 1.5);
  const auto g = fit_poly2(x, flat);
  CHECK(std::abs(g.a) <= 1e-12);
  CHECK(std::abs(g.b) <= 1e-12);
  CHECK(g.c == doctest::Approx(1.5));
  const auto summary = regression_metrics(x, flat);
  CHECK_FALSE(summary.pcc.has_value());

  std::mt19937_64 rng(50);
  std::uniform_real_distribution<double> u(-3.0, 3.0), noise(-0.3, 0.3);
  std::vector<double> xs(50), ys(50);
  for (std::size_t i = 0; i < 50; ++i) {
    xs[i] = u(rng);
    ys[i] = 0.2 * xs[i] * xs[i] - 0.5 * xs[i] + 1.0 + noise(rng);
  }
  const auto h = fit_poly2(xs, ys);
  double dot[3] = {0, 0, 0};
  for (std::size_t i = 0; i < 50; ++i) {
    const double r = ys[i] - h(xs[i]);
    dot[0] += r * xs[i] * xs[i];
    dot[1] += r * xs[i];
    dot[2] += r;
  }
  for (double d : dot) CHECK(std::abs(d) <= 1e-8);
  const auto oracle = testing::poly2_normal_equations(xs, ys);
  CHECK(std::abs(h.a - oracle[0]) <= 1e-8);
  CHECK(std::abs(h.b - oracle[1]) <= 1e-8);
  CHECK(std::abs(h.c - oracle[2]) <= 1e-8);

  CHECK_THROWS_AS(fit_poly2(std::vector<double>{1, 1, 1, 2},
                            std::vector<double>{0, 1, 2, 0}),
                  Error);
}

TEST_CASE("Pearson correlation with a Fisher interval") {
  std::vector<double> h{0.0, 0.5, 1.0, 1.5, 2.0, 1.2};
  const auto same = pcc_with_ci(h, h);
  CHECK(same.point == doctest::Approx(1.0));
  CHECK(same.high == doctest::Approx(1.0));
  std::vector<double> neg;
  for (double v : h) neg.push_back(-v);
  CHECK(pcc_with_ci(neg, h).point == doctest::Approx(-1.0));

  std::mt19937_64 rng(30);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::vector<double> a(30), b(30);
  for (std::size_t i = 0; i < 30; ++i) {
    a[i] = u(rng);
    b[i] = 0.6 * a[i] + 0.8 * u(rng);
  }
  const auto c = pcc_with_ci(a, b);
  const double r = testing::pearson_formula(a, b);
  CHECK(std::abs(c.point - r) <= 1e-12);
  const double se = 1.0 / std::sqrt(27.0);
  CHECK(std::abs(c.low - std::tanh(std::atanh(r) - testing::kZ975 * se)) <= 1e-12);
  CHECK(std::abs(c.high - std::tanh(std::atanh(r) + testing::kZ975 * se)) <= 1e-12);

  CHECK_THROWS_AS(pcc_with_ci(std::vector<double>{1, 2, 3},
                              std::vector<double>{1, 2, 3}),
                  Error);
  CHECK_THROWS_AS(pcc_with_ci(std::vector<double>(5, 1.0), h), Error);
}

TEST_CASE("mean squared error") {
  std::vector<double> h{0.0, 1.0, 2.0, 1.5};
  CHECK(mse(h, h) == 0.0);
  std::vector<double> off;
  for (double v : h) off.push_back(v + 1.0);
  CHECK(mse(off, h) == 1.0);
  std::vector<double> p{0.5, 0.0, 2.0, 1.0};
  CHECK(mse(p, h) == doctest::Approx((0.25 + 1.0 + 0.0 + 0.25) / 4.0));
}

TEST_CASE("evaluation summary") {
  std::vector<LabeledScore> scores;
  for (int i = 0; i < 20; ++i)
    scores.push_back({"u", static_cast<std::size_t>(i),
                      i < 6 ? -4.0 - i : 3.0 + i, i < 6, std::nullopt});
  scores.push_back({"u", 99, testing::kInf, false, std::nullopt});
  const auto s = evaluate(scores);
  CHECK(s.samples == 20);
  CHECK(s.excluded_non_finite == 1);
  CHECK(s.classification.metrics.mcc == 1.0);
  CHECK(s.classification.auc == 1.0);
  CHECK_FALSE(s.regression.has_value());

  const auto doc = to_json(s);
  for (const char* key : {"AUC", "Accuracy", "Precision", "Recall", "F1", "MCC",
                          "AUC MCC_max"})
    CHECK(doc.contains(key));
  CHECK_FALSE(doc.contains("PCC"));

  for (auto& x : scores) x.human_score = x.mispronounced ? 0.5 : 1.8;
  scores.back().human_score = 2.0;
  const auto r = evaluate(scores);
  REQUIRE(r.regression.has_value());
  const auto rdoc = to_json(r);
  for (const char* key : {"PCC (low conf)", "PCC (high conf)", "MSE"})
    CHECK(rdoc.contains(key));
}
