// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "gop/ctc.hpp"
#include "gop/eval.hpp"
#include "gop/io.hpp"
#include "gop/posterior.hpp"
#include "gop/scoring.hpp"
#include "gop/synthetic.hpp"
#include "support.hpp"

#ifndef GOP_CLI_PATH
#error "GOP_CLI_PATH must name the gop executable"
#endif

using namespace gop;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using Seq = std::vector<PhonemeId>;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << "  " << name << "  (" << detail
            << ")\n";
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct SmallInstance {
  PosteriorMatrix matrix;
  Seq labels;
};

std::vector<SmallInstance> small_instances(std::size_t count) {
  std::mt19937_64 rng(0xC7C);
  std::vector<SmallInstance> out;
  while (out.size() < count) {
    const std::size_t V = 1 + rng() % 3;
    const std::size_t T = 1 + rng() % 5;
    const std::size_t n = 1 + rng() % 3;
    out.push_back({testing::random_matrix(rng, T, V + 1),
                   testing::random_sequence(rng, n, V)});
  }
  return out;
}

void ctc_oracle() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  bool ok = true;
  for (const auto& inst : small_instances(200)) {
    const double oracle =
        testing::log_or_neg_inf(testing::enumerate_paths(inst.matrix, inst.labels).sum);
    const double got = ctc_forward(inst.matrix, inst.labels).log_likelihood;
    if (std::isinf(oracle)) {
      ok = ok && got == oracle;
    } else {
      worst = std::max(worst, std::abs(got - oracle));
    }
  }
  const double secs = seconds_since(t0);
  ok = ok && worst <= 1e-9 && secs < 10.0;
  std::ostringstream d;
  d << "200 instances, max |diff| " << worst << ", " << secs << " s";
  report("CTC forward matches path enumeration", ok, d.str());
}

void viterbi_oracle() {
  double worst = 0.0;
  bool ok = true;
  std::size_t feasible = 0;
  for (const auto& inst : small_instances(200)) {
    const auto totals = testing::enumerate_paths(inst.matrix, inst.labels);
    if (totals.count == 0) continue;
    ++feasible;
    const auto a = ctc_viterbi_align(inst.matrix, inst.labels);
    worst = std::max(worst, std::abs(a.path_log_prob - std::log(totals.best)));
    ok = ok && a.path_log_prob <=
                   ctc_forward(inst.matrix, inst.labels).log_likelihood + 1e-12;
  }
  ok = ok && worst <= 1e-9;
  std::ostringstream d;
  d << feasible << " feasible instances, max |diff| " << worst
    << ", best path <= forward";
  report("Viterbi best path matches max-path enumeration", ok, d.str());
}

void pass_counts() {
  const auto inv = testing::letters(39);
  Seq seq;
  for (PhonemeId i = 1; i <= 10; ++i) seq.push_back(i * 3);
  std::map<PhonemeId, std::vector<PhonemeId>> entries;
  for (PhonemeId i = 1; i <= 39; ++i)
    entries[i] = {i % 39 + 1, (i + 1) % 39 + 1, (i + 2) % 39 + 1};
  const auto ups = SubstitutionPolicy::unrestricted(inv);
  const auto rps = SubstitutionPolicy::restricted(ConfusionMap(entries, true, inv));
  const auto u = substitution_pass_count(seq, ups);
  const auto r = substitution_pass_count(seq, rps);

  // The scorers evaluate exactly that many perturbations plus the original.
  const auto canon = make_canonical("u", seq, inv);
  const auto m = synthesize_posteriors("u", seq, inv);
  const auto pu = gop_pp_af(m, canon, ups).forward_passes - 1;
  const auto pr = gop_pp_af(m, canon, rps).forward_passes - 1;
  const double ratio = static_cast<double>(r) / static_cast<double>(u);
  const bool ok = u == 390 && r == 40 && pu == u && pr == r &&
                  std::abs(ratio - 0.103) < 5e-4;
  std::ostringstream d;
  d << "UPS " << u << ", RPS " << r << ", ratio " << ratio;
  report("Perturbation pass counts n=10, V=39", ok, d.str());
}

void pa_pp_agreement() {
  std::mt19937_64 rng(0xA9);
  const auto inv = testing::letters(5);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::map<PhonemeId, std::vector<PhonemeId>> entries;
    for (PhonemeId p = 1; p <= 5; ++p)
      entries[p] = {static_cast<PhonemeId>((p + rng() % 4) % 5 + 1)};
    const auto policy =
        SubstitutionPolicy::restricted(ConfusionMap(entries, true, inv));
    const auto seq =
        make_canonical("u", testing::random_sequence(rng, 1 + rng() % 5, 5), inv);
    const auto m = testing::random_matrix(rng, 2 * seq.size() + 1 + rng() % 3, 6);
    const auto pa = gop_pa_af(m, seq, policy);
    const auto pp = gop_pp_af(m, seq, policy);
    for (std::size_t i = 0; i < seq.size(); ++i)
      worst = std::max(worst, std::abs(pa.scores[i].score - pp.scores[i].score));
  }
  std::ostringstream d;
  d << "100 instances, max |diff| " << worst;
  report("PA-AF equals PP-AF under singleton confusion sets", worst <= 1e-9,
         d.str());
}

void rps_dominates_ups() {
  std::mt19937_64 rng(0xD0);
  const auto inv = testing::letters(6);
  const auto ups = SubstitutionPolicy::unrestricted(inv);
  std::size_t checked = 0, violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::map<PhonemeId, std::vector<PhonemeId>> entries;
    for (PhonemeId p = 1; p <= 6; ++p)
      for (PhonemeId q = 1; q <= 6; ++q)
        if (q != p && rng() % 3 == 0) entries[p].push_back(q);
    const auto rps = SubstitutionPolicy::restricted(
        ConfusionMap(entries, rng() % 2 == 0, inv));
    const auto seq =
        make_canonical("u", testing::random_sequence(rng, 1 + rng() % 6, 6), inv);
    const auto m = testing::random_matrix(rng, 2 * seq.size() + 1 + rng() % 3, 7);
    const auto a = gop_pp_af(m, seq, rps);
    const auto b = gop_pp_af(m, seq, ups);
    for (std::size_t i = 0; i < seq.size(); ++i, ++checked)
      if (!(a.scores[i].score >= b.scores[i].score)) ++violations;
  }
  std::ostringstream d;
  d << checked << " positions, " << violations << " violations";
  report("PP-AF RPS score >= UPS score", violations == 0, d.str());
}

void prefix_cache() {
  std::mt19937_64 rng(0xCAC4E);
  double worst = 0.0;
  std::size_t checked = 0, not_fewer = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t V = 4 + rng() % 36;
    const auto y = testing::random_sequence(rng, 2 + rng() % 9, V);
    const auto m = testing::random_matrix(rng, 2 * y.size() + 2 + rng() % 6, V + 1);
    std::vector<Perturbation> perts;
    for (std::size_t pos = 0; pos < y.size(); ++pos) {
      for (PhonemeId q = 1; q <= V; ++q) {
        if (q == y[pos]) continue;
        Seq v = y;
        v[pos] = q;
        perts.push_back({pos, v});
      }
      Seq d = y;
      d.erase(d.begin() + static_cast<std::ptrdiff_t>(pos));
      perts.push_back({pos, d});
    }
    const auto cached = batched_perturbation_forward(m, y, perts, CacheMode::kPrefix);
    const auto naive = batched_perturbation_forward(m, y, perts, CacheMode::kNone);
    for (std::size_t i = 0; i < perts.size(); ++i) {
      const double a = cached.log_likelihoods[i], b = naive.log_likelihoods[i];
      if (!(std::isinf(a) && a == b)) worst = std::max(worst, std::abs(a - b));
      if (perts[i].pos >= 1) {
        ++checked;
        if (!(cached.cells[i] < naive.cells[i])) ++not_fewer;
      }
    }
  }
  std::ostringstream d;
  d << "max |diff| " << worst << ", " << checked << " perturbations at pos>=1, "
    << not_fewer << " without fewer cells";
  report("Prefix cache gives identical results with fewer DP cells",
         worst <= 1e-9 && not_fewer == 0, d.str());
}

void synthetic_end_to_end() {
  const auto t0 = Clock::now();
  const auto inv = english_inventory();
  const auto rules = artificial_error_rules(inv).map;
  const auto policy = SubstitutionPolicy::unrestricted(inv);
  std::vector<PhonemeId> rule_keys;
  for (const auto& [k, v] : rules.entries()) rule_keys.push_back(k);
  const auto& all = inv.phoneme_ids();

  std::mt19937_64 rng(0x5EED);
  std::vector<LabeledScore> scored;
  std::size_t positives = 0;
  for (int u = 0; u < 100; ++u) {
    const std::size_t n = 3 + rng() % 18;
    Seq canon;
    for (std::size_t i = 0; i < n; ++i)
      canon.push_back(rng() % 10 < 3 ? rule_keys[rng() % rule_keys.size()]
                                     : all[rng() % all.size()]);
    const auto injected = inject_artificial_errors(canon, rules, 1000 + u, 0.3);
    SynthesisOptions opts;
    opts.seed = 2000 + u;
    const auto m = synthesize_posteriors("u", injected.sequence, inv, opts);
    const auto report =
        gop_pp_af(m, make_canonical("u" + std::to_string(u), canon, inv), policy);
    for (std::size_t i = 0; i < n; ++i) {
      scored.push_back({report.utterance_id, i, report.scores[i].score,
                        injected.mispronounced[i], std::nullopt});
      positives += injected.mispronounced[i] ? 1 : 0;
    }
  }
  const auto summary = evaluate(scored);
  const double secs = seconds_since(t0);
  const bool ok = summary.classification.auc >= 0.95 &&
                  summary.classification.metrics.mcc >= 0.9 && secs < 60.0;
  std::ostringstream d;
  d << scored.size() << " phonemes, " << positives << " injected, AUC "
    << summary.classification.auc << ", MCC "
    << summary.classification.metrics.mcc << " at percentile "
    << summary.threshold.percentile << ", " << secs << " s";
  report("Synthetic injected-error detection (PP-AF UPS)", ok, d.str());
}

void metric_fixtures() {
  std::mt19937_64 rng(0xE7A1);
  std::uniform_real_distribution<double> u(-4.0, 4.0), h(0.0, 2.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 8 + rng() % 43;
    std::vector<double> gop(n), human(n), pred(n);
    std::vector<bool> pos(n);
    std::vector<LabeledScore> ls;
    for (std::size_t i = 0; i < n; ++i) {
      gop[i] = std::round(u(rng) * 4.0) / 4.0;
      human[i] = h(rng);
      pred[i] = h(rng);
      pos[i] = i < 2 ? i == 0 : rng() % 2 == 0;
      ls.push_back({"u", i, gop[i], pos[i], std::nullopt});
    }
    ConfusionCounts c{rng() % 30, rng() % 30, rng() % 30, rng() % 30};
    worst = std::max(worst, std::abs(matthews_correlation(c) -
                                     testing::mcc_formula(c.tp, c.fp, c.tn, c.fn)));
    worst = std::max(worst, std::abs(roc_auc(ls) - testing::pairwise_auc(gop, pos)));

    const auto cc = pcc_with_ci(pred, human);
    const double r = testing::pearson_formula(pred, human);
    const double se = 1.0 / std::sqrt(static_cast<double>(n) - 3.0);
    worst = std::max({worst, std::abs(cc.point - r),
                      std::abs(cc.low - std::tanh(std::atanh(r) - testing::kZ975 * se)),
                      std::abs(cc.high - std::tanh(std::atanh(r) + testing::kZ975 * se))});

    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += (pred[i] - human[i]) * (pred[i] - human[i]);
    worst = std::max(worst, std::abs(mse(pred, human) - sq / static_cast<double>(n)));

    const auto fit = fit_poly2(gop, human);
    const auto oracle = testing::poly2_normal_equations(gop, human);
    worst = std::max({worst, std::abs(fit.a - oracle[0]), std::abs(fit.b - oracle[1]),
                      std::abs(fit.c - oracle[2])});
  }
  std::ostringstream d;
  d << "20 fixtures of <= 50 points, max |diff| " << worst;
  report("MCC, AUC, PCC with CI, MSE and quadratic fit match oracles",
         worst <= 1e-8, d.str());
}

void determinism() {
  const auto dir = fs::temp_directory_path() / "gop_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir / "post");
  const auto inv = english_inventory();
  std::ofstream(dir / "vocab.json") << inv.to_json().dump();
  std::ofstream(dir / "map.json") << default_english_map(inv).map.to_json(inv).dump();
  {
    std::ofstream canon(dir / "canon.tsv");
    std::mt19937_64 rng(0xDE7);
    const auto& ids = inv.phoneme_ids();
    for (int u = 0; u < 12; ++u) {
      Seq seq;
      for (std::size_t i = 0, n = 3 + rng() % 8; i < n; ++i)
        seq.push_back(ids[rng() % ids.size()]);
      const auto utt = "utt" + std::to_string(u);
      canon << utt << '\t' << sequence_to_string(seq, inv) << '\n';
      SynthesisOptions opts;
      opts.seed = rng();
      opts.dominant_probability = 0.6;
      save_posteriors_binary(dir / "post" / (utt + ".gopp"),
                             synthesize_posteriors(utt, seq, inv, opts));
    }
  }
  bool ok = true;
  std::string detail;
  for (const char* method : {"pp-af", "pa-af"}) {
    std::string outputs[2];
    for (int run = 0; run < 2; ++run) {
      const auto out = dir / ("run" + std::to_string(run) + ".jsonl");
      const std::string cmd =
          std::string("\"") + GOP_CLI_PATH + "\" score --posteriors \"" +
          (dir / "post").string() + "\" --vocab \"" + (dir / "vocab.json").string() +
          "\" --canon \"" + (dir / "canon.tsv").string() + "\" --map \"" +
          (dir / "map.json").string() + "\" --method " + method +
          " --regime rps --jobs 4 --out \"" + out.string() + "\" 2>/dev/null";
      if (std::system(cmd.c_str()) != 0) ok = false;
      std::ifstream in(out, std::ios::binary);
      outputs[run].assign(std::istreambuf_iterator<char>(in), {});
    }
    ok = ok && !outputs[0].empty() && outputs[0] == outputs[1];
    detail += std::string(method) + " " + std::to_string(outputs[0].size()) + " bytes; ";
  }
  report("gop score output is byte-identical across runs", ok,
         detail + "12 utterances, 4 jobs");
}

}  // namespace

int main() {
  ctc_oracle();
  viterbi_oracle();
  pass_counts();
  pa_pp_agreement();
  rps_dominates_ups();
  prefix_cache();
  synthetic_end_to_end();
  metric_fixtures();
  determinism();
  std::cout << (failures == 0 ? "ALL PASS" : "FAILURES: " + std::to_string(failures))
            << '\n';
  return failures == 0 ? 0 : 1;
}
