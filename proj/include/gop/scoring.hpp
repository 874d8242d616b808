#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gop/ctc.hpp"
#include "gop/inventory.hpp"
#include "gop/posterior.hpp"

namespace gop {

enum class Method { kForcedAlignment, kPhonemeAdaptive, kPhonemePerturbed };

const char* method_name(Method method);  // "FA", "PA-AF", "PP-AF"

enum class PerturbationKind { kSubstitution, kDeletion, kSubstitutionSet };

// One edit at one canonical position. kSubstitutionSet is the union event the
// phoneme-adaptive scorer evaluates in a single masked pass.
struct PerturbationSpec {
  std::size_t pos = 0;
  PerturbationKind kind = PerturbationKind::kDeletion;
  std::vector<PhonemeId> substitutes;  // one entry for kSubstitution

  static PerturbationSpec substitution(std::size_t pos, PhonemeId q) {
    return {pos, PerturbationKind::kSubstitution, {q}};
  }
  static PerturbationSpec deletion(std::size_t pos) {
    return {pos, PerturbationKind::kDeletion, {}};
  }

  std::size_t resulting_length(std::size_t n) const {
    return kind == PerturbationKind::kDeletion ? n - 1 : n;
  }
  // The perturbed label sequence; not defined for kSubstitutionSet.
  std::vector<PhonemeId> apply(std::span<const PhonemeId> sequence) const;

  bool operator==(const PerturbationSpec&) const = default;
};

// "sub:d", "del", or "subset:p|m".
std::string describe(const PerturbationSpec& spec,
                     const PhonemeInventory& inventory);

enum class Decision { kUndecided, kCorrect, kMispronounced };

const char* decision_name(Decision decision);

struct GopScore {
  std::size_t pos = 0;
  PhonemeId phoneme = 0;
  // Natural-log units. +inf when no perturbation is allowed; NaN when the
  // canonical sequence itself is infeasible.
  double score = 0.0;
  Method method = Method::kPhonemePerturbed;
  Regime regime = Regime::kUnrestricted;
  std::optional<PerturbationSpec> best_perturbation;
  double loss_original = 0.0;
  double loss_best = 0.0;
  Decision decision = Decision::kUndecided;
};

struct GopReport {
  std::string utterance_id;
  Method method = Method::kPhonemePerturbed;
  Regime regime = Regime::kUnrestricted;
  std::vector<GopScore> scores;
  // Hypotheses evaluated: the canonical sequence plus every perturbation.
  std::size_t forward_passes = 0;
  // Dynamic-programming passes actually run and the cells they evaluated.
  std::size_t dp_passes = 0;
  std::size_t dp_cells = 0;
  double wall_ms = 0.0;
};

// Mean log-posterior of each phoneme over its aligned frames [t1, t2).
// Throws kEmptySegment for t1 == t2 and kInvalidArgument for frames past T.
std::vector<GopScore> gop_fa(const PosteriorMatrix& matrix,
                             std::span<const AlignmentSegment> segments);

// Viterbi-aligns then applies gop_fa.
GopReport gop_fa_report(const PosteriorMatrix& matrix,
                        const CanonicalSequence& sequence);

// Substitutes first (policy order), deletion last when allowed.
std::vector<PerturbationSpec> generate_perturbations(
    std::span<const PhonemeId> sequence, std::size_t pos,
    const SubstitutionPolicy& policy);

struct ScoringOptions {
  CacheMode cache = CacheMode::kPrefix;
};

// score = min over perturbed-sequence losses - original loss.
GopReport gop_pp_af(const PosteriorMatrix& matrix,
                    const CanonicalSequence& sequence,
                    const SubstitutionPolicy& policy,
                    const ScoringOptions& options = {});

// score = min(substitution-union loss, deletion loss) - original loss, with
// the union evaluated by one masked forward pass per position.
GopReport gop_pa_af(const PosteriorMatrix& matrix,
                    const CanonicalSequence& sequence,
                    const SubstitutionPolicy& policy,
                    const ScoringOptions& options = {});

struct InjectionResult {
  std::vector<PhonemeId> sequence;
  // One flag per canonical position; true = rewritten (mispronounced).
  std::vector<bool> mispronounced;
};

// Each position whose phoneme has a rule is rewritten with probability
// `rate`; the replacement is drawn uniformly from the rule's substitutes.
InjectionResult inject_artificial_errors(std::span<const PhonemeId> sequence,
                                         const ConfusionMap& rules,
                                         std::uint64_t seed, double rate);

}  // namespace gop
