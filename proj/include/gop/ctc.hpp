#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gop/inventory.hpp"
#include "gop/posterior.hpp"

namespace gop {

// A left-to-right CTC state graph. Each state emits one matrix column, has an
// implicit self-loop and an explicit list of earlier predecessor states.
// The plain graph for labels y_1..y_n is the blank-interleaved sequence
// (blank, y_1, blank, ..., y_n, blank) of 2n+1 states.
class CtcLattice {
 public:
  static CtcLattice plain(std::span<const PhonemeId> labels,
                          std::size_t blank);

  // Position `pos` is expanded into one parallel state per allowed
  // substitute, so a single forward pass sums the likelihoods of all the
  // substituted sequences. Skip arcs into and out of each branch follow the
  // repeat rule against the original neighbours.
  static CtcLattice masked(std::span<const PhonemeId> labels,
                           std::size_t blank, std::size_t pos,
                           std::span<const PhonemeId> allowed);

  std::size_t size() const { return column_.size(); }
  std::size_t column(std::size_t state) const { return column_[state]; }
  std::span<const std::uint32_t> predecessors(std::size_t state) const {
    return {preds_.data() + pred_offset_[state],
            pred_offset_[state + 1] - pred_offset_[state]};
  }
  bool is_initial(std::size_t state) const { return initial_[state]; }
  bool is_final(std::size_t state) const { return final_[state]; }
  // Canonical position emitted by a state, or -1 for blanks.
  std::int64_t source_position(std::size_t state) const {
    return source_[state];
  }

 private:
  void add_state(std::size_t column, std::int64_t source,
                 std::span<const std::uint32_t> preds, bool initial);

  std::vector<std::uint32_t> column_;
  std::vector<std::int64_t> source_;
  std::vector<std::uint32_t> pred_offset_{0};
  std::vector<std::uint32_t> preds_;
  std::vector<bool> initial_;
  std::vector<bool> final_;
};

// n + number of adjacent equal pairs.
std::size_t minimal_frames(std::span<const PhonemeId> labels);

struct ForwardResult {
  // -inf when no path collapses to the labels (infeasible length).
  double log_likelihood = 0.0;
  bool feasible = true;
  // DP cells evaluated (state x frame), excluding cells copied from a cache.
  std::size_t cells = 0;
  // Frame-major T x S alpha table, filled only on request.
  std::vector<double> alpha;
  std::size_t states = 0;

  double loss() const { return -log_likelihood; }
};

ForwardResult ctc_forward(const PosteriorMatrix& matrix,
                          std::span<const PhonemeId> labels,
                          bool keep_alpha = false);

// Forward pass over an arbitrary lattice. When `cache` is given, states
// [0, cached_states) are copied from its alpha table instead of being
// recomputed; the caller guarantees those states match.
ForwardResult lattice_forward(const PosteriorMatrix& matrix,
                              const CtcLattice& lattice,
                              bool keep_alpha = false,
                              const ForwardResult* cache = nullptr,
                              std::size_t cached_states = 0);

// Sum over every length-T column path whose collapse equals `labels`.
// Throws kInstanceTooLarge when columns^T exceeds 1e7.
double ctc_brute_force(const PosteriorMatrix& matrix,
                       std::span<const PhonemeId> labels);
// Max over the same path set; -inf when there is none.
double ctc_brute_force_best_path(const PosteriorMatrix& matrix,
                                 std::span<const PhonemeId> labels);

struct AlignmentSegment {
  PhonemeId phoneme = 0;
  std::size_t start_frame = 0;  // inclusive
  std::size_t end_frame = 0;    // exclusive
};

struct Alignment {
  std::vector<AlignmentSegment> segments;
  double path_log_prob = 0.0;
  // Lattice state occupied at each frame.
  std::vector<std::size_t> states;
};

// Best path through the plain lattice. At equal scores a state prefers its
// self-loop, then the nearer predecessor; the final blank wins a terminal
// tie. Throws kInfeasible when T < minimal_frames.
Alignment ctc_viterbi_align(const PosteriorMatrix& matrix,
                            std::span<const PhonemeId> labels);

// Log-probability of the union of sequences obtained by replacing labels[pos]
// with each member of `allowed`. Throws kInvalidArgument for an empty set,
// pos out of range, or an allowed member equal to blank or labels[pos].
ForwardResult masked_ctc_forward(const PosteriorMatrix& matrix,
                                 std::span<const PhonemeId> labels,
                                 std::size_t pos,
                                 std::span<const PhonemeId> allowed);

// ctc_forward on labels with position `pos` removed; an empty remainder
// scores the all-blank path.
ForwardResult deletion_forward(const PosteriorMatrix& matrix,
                               std::span<const PhonemeId> labels,
                               std::size_t pos);

struct Perturbation {
  std::size_t pos = 0;
  std::vector<PhonemeId> labels;
};

enum class CacheMode { kNone, kPrefix };

struct BatchResult {
  std::vector<double> log_likelihoods;
  std::vector<std::size_t> cells;  // per perturbation
  std::size_t original_cells = 0;  // cells spent on the shared original pass
  // Likelihood of the unperturbed labels; only computed with kPrefix.
  std::optional<double> original_log_likelihood;
  std::size_t total_cells() const;
};

// Likelihood of each perturbed sequence. With kPrefix the alpha rows of the
// states before the perturbed label (extended positions 0..2*pos) are taken
// from one pass over `labels`; each variant must agree with `labels` on
// positions [0, pos).
BatchResult batched_perturbation_forward(
    const PosteriorMatrix& matrix, std::span<const PhonemeId> labels,
    std::span<const Perturbation> perturbations,
    CacheMode mode = CacheMode::kPrefix);

}  // namespace gop
