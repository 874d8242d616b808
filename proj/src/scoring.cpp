#include "gop/scoring.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "gop/error.hpp"
#include "gop/log_math.hpp"

namespace gop {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start)
      .count();
}

double to_loss(double log_likelihood) {
  return log_likelihood == kNegInf ? kPosInf : -log_likelihood;
}

GopReport start_report(const CanonicalSequence& sequence, Method method,
                       const SubstitutionPolicy& policy) {
  GopReport report;
  report.utterance_id = sequence.utterance_id;
  report.method = method;
  report.regime = policy.regime();
  report.scores.resize(sequence.size());
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    auto& s = report.scores[i];
    s.pos = i;
    s.phoneme = sequence.phonemes[i];
    s.method = method;
    s.regime = policy.regime();
  }
  return report;
}

// Every score is undecided when the canonical sequence cannot be produced.
void mark_infeasible(GopReport& report) {
  for (auto& s : report.scores) {
    s.score = std::numeric_limits<double>::quiet_NaN();
    s.loss_original = kPosInf;
    s.loss_best = kPosInf;
  }
}

void finish_score(GopScore& score, double loss_original, double loss_best,
                  std::optional<PerturbationSpec> best) {
  score.loss_original = loss_original;
  score.loss_best = loss_best;
  score.best_perturbation = std::move(best);
  score.score = loss_best == kPosInf ? kPosInf : loss_best - loss_original;
}

}  // namespace

const char* method_name(Method method) {
  switch (method) {
    case Method::kForcedAlignment: return "FA";
    case Method::kPhonemeAdaptive: return "PA-AF";
    case Method::kPhonemePerturbed: return "PP-AF";
  }
  return "?";
}

const char* decision_name(Decision decision) {
  switch (decision) {
    case Decision::kUndecided: return "undecided";
    case Decision::kCorrect: return "correct";
    case Decision::kMispronounced: return "mispronounced";
  }
  return "?";
}

std::vector<PhonemeId> PerturbationSpec::apply(
    std::span<const PhonemeId> sequence) const {
  if (pos >= sequence.size())
    throw Error(ErrorCode::kInvalidArgument, "perturbation out of range");
  std::vector<PhonemeId> out(sequence.begin(), sequence.end());
  switch (kind) {
    case PerturbationKind::kSubstitution:
      out[pos] = substitutes.at(0);
      break;
    case PerturbationKind::kDeletion:
      out.erase(out.begin() + static_cast<std::ptrdiff_t>(pos));
      break;
    case PerturbationKind::kSubstitutionSet:
      throw Error(ErrorCode::kInvalidArgument,
                  "a substitution set has no single perturbed sequence");
  }
  return out;
}

std::string describe(const PerturbationSpec& spec,
                     const PhonemeInventory& inventory) {
  switch (spec.kind) {
    case PerturbationKind::kDeletion:
      return "del";
    case PerturbationKind::kSubstitution:
      return "sub:" + inventory.symbol(spec.substitutes.at(0));
    case PerturbationKind::kSubstitutionSet: {
      std::string out = "subset:";
      for (std::size_t i = 0; i < spec.substitutes.size(); ++i) {
        if (i) out += '|';
        out += inventory.symbol(spec.substitutes[i]);
      }
      return out;
    }
  }
  return "?";
}

std::vector<GopScore> gop_fa(const PosteriorMatrix& matrix,
                             std::span<const AlignmentSegment> segments) {
  std::vector<GopScore> scores;
  scores.reserve(segments.size());
  std::size_t previous_end = 0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    if (seg.start_frame >= seg.end_frame)
      throw Error(ErrorCode::kEmptySegment,
                  "empty segment [" + std::to_string(seg.start_frame) + ", " +
                      std::to_string(seg.end_frame) + ") for phoneme id " +
                      std::to_string(seg.phoneme) + " at position " +
                      std::to_string(i));
    if (seg.end_frame > matrix.frames())
      throw Error(ErrorCode::kInvalidArgument,
                  "segment for position " + std::to_string(i) +
                      " ends past the last frame");
    if (seg.start_frame < previous_end)
      throw Error(ErrorCode::kInvalidArgument,
                  "segments overlap or are out of order at position " +
                      std::to_string(i));
    if (seg.phoneme >= matrix.columns() || seg.phoneme == matrix.blank_index())
      throw Error(ErrorCode::kInvalidArgument,
                  "segment phoneme id " + std::to_string(seg.phoneme) +
                      " is not a phoneme column");
    previous_end = seg.end_frame;

    double sum = 0.0;
    for (std::size_t t = seg.start_frame; t < seg.end_frame; ++t)
      sum += matrix(t, seg.phoneme);
    GopScore score;
    score.pos = i;
    score.phoneme = seg.phoneme;
    score.method = Method::kForcedAlignment;
    score.score = sum / static_cast<double>(seg.end_frame - seg.start_frame);
    scores.push_back(score);
  }
  return scores;
}

GopReport gop_fa_report(const PosteriorMatrix& matrix,
                        const CanonicalSequence& sequence) {
  const auto start = Clock::now();
  GopReport report;
  report.utterance_id = sequence.utterance_id;
  report.method = Method::kForcedAlignment;
  report.regime = Regime::kUnrestricted;
  auto alignment = ctc_viterbi_align(matrix, sequence.phonemes);
  report.scores = gop_fa(matrix, alignment.segments);
  report.forward_passes = 1;
  report.dp_passes = 1;
  report.dp_cells = (2 * sequence.size() + 1) * matrix.frames();
  report.wall_ms = elapsed_ms(start);
  return report;
}

std::vector<PerturbationSpec> generate_perturbations(
    std::span<const PhonemeId> sequence, std::size_t pos,
    const SubstitutionPolicy& policy) {
  if (pos >= sequence.size())
    throw Error(ErrorCode::kInvalidArgument,
                "position " + std::to_string(pos) + " out of range");
  std::vector<PerturbationSpec> specs;
  for (PhonemeId q : policy.substitutes(sequence[pos]))
    specs.push_back(PerturbationSpec::substitution(pos, q));
  if (policy.allow_deletion()) specs.push_back(PerturbationSpec::deletion(pos));
  return specs;
}

GopReport gop_pp_af(const PosteriorMatrix& matrix,
                    const CanonicalSequence& sequence,
                    const SubstitutionPolicy& policy,
                    const ScoringOptions& options) {
  const auto start = Clock::now();
  GopReport report =
      start_report(sequence, Method::kPhonemePerturbed, policy);
  const auto& labels = sequence.phonemes;

  if (matrix.frames() < minimal_frames(labels)) {
    mark_infeasible(report);
    report.forward_passes = 1;
    report.wall_ms = elapsed_ms(start);
    return report;
  }

  std::vector<PerturbationSpec> specs;
  std::vector<std::size_t> first_spec(labels.size() + 1, 0);
  for (std::size_t pos = 0; pos < labels.size(); ++pos) {
    first_spec[pos] = specs.size();
    auto more = generate_perturbations(labels, pos, policy);
    specs.insert(specs.end(), more.begin(), more.end());
  }
  first_spec[labels.size()] = specs.size();

  std::vector<Perturbation> perturbations;
  perturbations.reserve(specs.size());
  for (const auto& spec : specs)
    perturbations.push_back({spec.pos, spec.apply(labels)});

  double original_ll;
  BatchResult batch;
  if (options.cache == CacheMode::kPrefix && !perturbations.empty()) {
    batch = batched_perturbation_forward(matrix, labels, perturbations,
                                         CacheMode::kPrefix);
    original_ll = *batch.original_log_likelihood;
  } else {
    auto original = ctc_forward(matrix, labels);
    original_ll = original.log_likelihood;
    report.dp_cells += original.cells;
    batch = batched_perturbation_forward(matrix, labels, perturbations,
                                         CacheMode::kNone);
  }
  report.dp_cells += batch.total_cells();
  report.dp_passes = 1 + perturbations.size();
  report.forward_passes = 1 + perturbations.size();

  const double loss_original = to_loss(original_ll);
  for (std::size_t pos = 0; pos < labels.size(); ++pos) {
    double loss_best = kPosInf;
    std::optional<PerturbationSpec> best;
    for (std::size_t k = first_spec[pos]; k < first_spec[pos + 1]; ++k) {
      const double loss = to_loss(batch.log_likelihoods[k]);
      if (loss < loss_best) {
        loss_best = loss;
        best = specs[k];
      }
    }
    finish_score(report.scores[pos], loss_original, loss_best, std::move(best));
  }
  report.wall_ms = elapsed_ms(start);
  return report;
}

GopReport gop_pa_af(const PosteriorMatrix& matrix,
                    const CanonicalSequence& sequence,
                    const SubstitutionPolicy& policy,
                    const ScoringOptions& options) {
  const auto start = Clock::now();
  GopReport report = start_report(sequence, Method::kPhonemeAdaptive, policy);
  const auto& labels = sequence.phonemes;
  const std::size_t blank = matrix.blank_index();

  report.forward_passes = 1 + substitution_pass_count(labels, policy);
  if (matrix.frames() < minimal_frames(labels)) {
    mark_infeasible(report);
    report.forward_passes = 1;
    report.wall_ms = elapsed_ms(start);
    return report;
  }

  const bool use_cache = options.cache == CacheMode::kPrefix;
  const auto original = ctc_forward(matrix, labels, use_cache);
  const double loss_original = to_loss(original.log_likelihood);
  report.dp_passes = 1;
  report.dp_cells = original.cells;

  auto run = [&](const CtcLattice& lattice, std::size_t pos) {
    const std::size_t shared = use_cache ? 2 * pos + 1 : 0;
    auto r = lattice_forward(matrix, lattice, false,
                             use_cache ? &original : nullptr, shared);
    report.dp_passes += 1;
    report.dp_cells += r.cells;
    return to_loss(r.log_likelihood);
  };

  std::vector<PhonemeId> shortened;
  for (std::size_t pos = 0; pos < labels.size(); ++pos) {
    const auto allowed = policy.substitutes(labels[pos]);
    double loss_best = kPosInf;
    std::optional<PerturbationSpec> best;
    if (!allowed.empty()) {
      loss_best = run(CtcLattice::masked(labels, blank, pos, allowed), pos);
      if (loss_best < kPosInf) {
        best = allowed.size() == 1
                   ? PerturbationSpec::substitution(pos, allowed[0])
                   : PerturbationSpec{pos, PerturbationKind::kSubstitutionSet,
                                      allowed};
      }
    }
    if (policy.allow_deletion()) {
      shortened.assign(labels.begin(), labels.end());
      shortened.erase(shortened.begin() + static_cast<std::ptrdiff_t>(pos));
      const double loss_del = run(CtcLattice::plain(shortened, blank), pos);
      if (loss_del < loss_best) {
        loss_best = loss_del;
        best = PerturbationSpec::deletion(pos);
      }
    }
    finish_score(report.scores[pos], loss_original, loss_best, std::move(best));
  }
  report.wall_ms = elapsed_ms(start);
  return report;
}

InjectionResult inject_artificial_errors(std::span<const PhonemeId> sequence,
                                         const ConfusionMap& rules,
                                         std::uint64_t seed, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "rate must lie in [0, 1]");
  // Draws are built from raw engine output so results do not depend on the
  // standard library's distribution implementations.
  std::mt19937_64 engine(seed);
  auto uniform = [&engine] {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
  };

  InjectionResult result;
  result.sequence.assign(sequence.begin(), sequence.end());
  result.mispronounced.assign(sequence.size(), false);
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    auto subs = rules.substitutes(sequence[i]);
    if (subs.empty()) continue;
    const double draw = uniform();
    const std::size_t pick = static_cast<std::size_t>(engine() % subs.size());
    if (draw < rate) {
      result.sequence[i] = subs[pick];
      result.mispronounced[i] = true;
    }
  }
  return result;
}

}  // namespace gop
