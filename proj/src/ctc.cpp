#include "gop/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gop/error.hpp"
#include "gop/log_math.hpp"

namespace gop {

namespace {

void check_labels(const PosteriorMatrix& matrix,
                  std::span<const PhonemeId> labels) {
  for (PhonemeId id : labels) {
    if (id >= matrix.columns() || id == matrix.blank_index())
      throw Error(ErrorCode::kInvalidArgument,
                  "label id " + std::to_string(id) +
                      " is not a phoneme column of the matrix");
  }
}

}  // namespace

void CtcLattice::add_state(std::size_t column, std::int64_t source,
                           std::span<const std::uint32_t> preds,
                           bool initial) {
  column_.push_back(static_cast<std::uint32_t>(column));
  source_.push_back(source);
  preds_.insert(preds_.end(), preds.begin(), preds.end());
  pred_offset_.push_back(static_cast<std::uint32_t>(preds_.size()));
  initial_.push_back(initial);
  final_.push_back(false);
}

CtcLattice CtcLattice::masked(std::span<const PhonemeId> labels,
                              std::size_t blank, std::size_t pos,
                              std::span<const PhonemeId> allowed) {
  CtcLattice lattice;
  const std::size_t n = labels.size();
  std::vector<std::uint32_t> previous_labels;  // states of position i-1
  std::vector<std::uint32_t> current_labels;
  std::vector<std::uint32_t> preds;

  lattice.add_state(blank, -1, {}, true);
  std::uint32_t blank_state = 0;
  for (std::size_t i = 0; i < n; ++i) {
    current_labels.clear();
    auto emit_label = [&](PhonemeId column) {
      preds.assign(1, blank_state);
      for (std::uint32_t p : previous_labels)
        if (lattice.column_[p] != column) preds.push_back(p);
      current_labels.push_back(static_cast<std::uint32_t>(lattice.size()));
      lattice.add_state(column, static_cast<std::int64_t>(i), preds, i == 0);
    };
    if (i == pos) {
      for (PhonemeId q : allowed) emit_label(q);
    } else {
      emit_label(labels[i]);
    }
    blank_state = static_cast<std::uint32_t>(lattice.size());
    lattice.add_state(blank, -1, current_labels, false);
    previous_labels.swap(current_labels);
  }
  lattice.final_[blank_state] = true;
  for (std::uint32_t s : previous_labels) lattice.final_[s] = true;
  return lattice;
}

CtcLattice CtcLattice::plain(std::span<const PhonemeId> labels,
                             std::size_t blank) {
  return masked(labels, blank, labels.size(), {});
}

std::size_t minimal_frames(std::span<const PhonemeId> labels) {
  std::size_t frames = labels.size();
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i] == labels[i - 1]) ++frames;
  return frames;
}

ForwardResult lattice_forward(const PosteriorMatrix& matrix,
                              const CtcLattice& lattice, bool keep_alpha,
                              const ForwardResult* cache,
                              std::size_t cached_states) {
  const std::size_t S = lattice.size();
  const std::size_t T = matrix.frames();
  if (!cache) cached_states = 0;
  if (cached_states > 0 &&
      (cache->alpha.size() != T * cache->states || cached_states > S ||
       cached_states > cache->states))
    throw Error(ErrorCode::kInvalidArgument,
                "prefix cache does not cover the requested states");

  ForwardResult result;
  result.states = S;
  if (keep_alpha) result.alpha.assign(T * S, kNegInf);

  std::vector<double> prev(S, kNegInf);
  std::vector<double> cur(S, kNegInf);
  for (std::size_t t = 0; t < T; ++t) {
    auto row = matrix.row(t);
    if (cached_states > 0) {
      const double* src = cache->alpha.data() + t * cache->states;
      std::copy(src, src + cached_states, cur.begin());
    }
    for (std::size_t s = cached_states; s < S; ++s) {
      double acc;
      if (t == 0) {
        acc = lattice.is_initial(s) ? 0.0 : kNegInf;
      } else {
        acc = prev[s];
        for (std::uint32_t p : lattice.predecessors(s))
          acc = log_add(acc, prev[p]);
      }
      cur[s] = acc == kNegInf ? kNegInf : acc + row[lattice.column(s)];
    }
    result.cells += S - cached_states;
    if (keep_alpha) std::copy(cur.begin(), cur.end(), result.alpha.begin() + t * S);
    prev.swap(cur);
  }

  double total = kNegInf;
  for (std::size_t s = 0; s < S; ++s)
    if (lattice.is_final(s)) total = log_add(total, prev[s]);
  result.log_likelihood = total;
  result.feasible = total != kNegInf;
  return result;
}

ForwardResult ctc_forward(const PosteriorMatrix& matrix,
                          std::span<const PhonemeId> labels, bool keep_alpha) {
  check_labels(matrix, labels);
  if (matrix.frames() < minimal_frames(labels)) {
    ForwardResult infeasible;
    infeasible.log_likelihood = kNegInf;
    infeasible.feasible = false;
    return infeasible;
  }
  return lattice_forward(matrix, CtcLattice::plain(labels, matrix.blank_index()),
                         keep_alpha);
}

namespace {

constexpr double kBruteForceLimit = 1e7;

// Calls visit(log_prob) for every column path whose collapse equals labels.
template <typename Visit>
void enumerate_paths(const PosteriorMatrix& matrix,
                     std::span<const PhonemeId> labels, Visit&& visit) {
  const std::size_t T = matrix.frames();
  const std::size_t C = matrix.columns();
  if (std::pow(static_cast<double>(C), static_cast<double>(T)) >
      kBruteForceLimit)
    throw Error(ErrorCode::kInstanceTooLarge,
                "brute force over " + std::to_string(C) + "^" +
                    std::to_string(T) + " paths exceeds 1e7");
  const std::size_t blank = matrix.blank_index();
  std::vector<std::size_t> path(T, 0);
  std::vector<PhonemeId> collapsed;
  while (true) {
    collapsed.clear();
    std::size_t last = blank;
    double log_prob = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      std::size_t c = path[t];
      log_prob += matrix(t, c);
      if (c != blank && c != last) collapsed.push_back(static_cast<PhonemeId>(c));
      last = c;
    }
    if (std::equal(collapsed.begin(), collapsed.end(), labels.begin(),
                   labels.end()))
      visit(log_prob);
    std::size_t t = 0;
    while (t < T && ++path[t] == C) path[t++] = 0;
    if (t == T) break;
  }
}

}  // namespace

double ctc_brute_force(const PosteriorMatrix& matrix,
                       std::span<const PhonemeId> labels) {
  double total = kNegInf;
  enumerate_paths(matrix, labels, [&](double lp) { total = log_add(total, lp); });
  return total;
}

double ctc_brute_force_best_path(const PosteriorMatrix& matrix,
                                 std::span<const PhonemeId> labels) {
  double best = kNegInf;
  enumerate_paths(matrix, labels, [&](double lp) { best = std::max(best, lp); });
  return best;
}

Alignment ctc_viterbi_align(const PosteriorMatrix& matrix,
                            std::span<const PhonemeId> labels) {
  check_labels(matrix, labels);
  const std::size_t T = matrix.frames();
  if (T < minimal_frames(labels))
    throw Error(ErrorCode::kInfeasible,
                "sequence needs " + std::to_string(minimal_frames(labels)) +
                    " frames, matrix has " + std::to_string(T));
  const auto lattice = CtcLattice::plain(labels, matrix.blank_index());
  const std::size_t S = lattice.size();

  std::vector<double> prev(S, kNegInf);
  std::vector<double> cur(S, kNegInf);
  std::vector<std::uint32_t> back(T * S, 0);
  for (std::size_t t = 0; t < T; ++t) {
    auto row = matrix.row(t);
    for (std::size_t s = 0; s < S; ++s) {
      double best;
      std::uint32_t from = static_cast<std::uint32_t>(s);
      if (t == 0) {
        best = lattice.is_initial(s) ? 0.0 : kNegInf;
      } else {
        best = prev[s];
        for (std::uint32_t p : lattice.predecessors(s)) {
          if (prev[p] > best) {
            best = prev[p];
            from = p;
          }
        }
      }
      cur[s] = best == kNegInf ? kNegInf : best + row[lattice.column(s)];
      back[t * S + s] = from;
    }
    prev.swap(cur);
  }

  std::size_t state = S;
  double best = kNegInf;
  for (std::size_t s = S; s-- > 0;) {
    if (lattice.is_final(s) && (state == S || prev[s] > best)) {
      best = prev[s];
      state = s;
    }
  }

  Alignment alignment;
  alignment.path_log_prob = best;
  alignment.states.resize(T);
  for (std::size_t t = T; t-- > 0;) {
    alignment.states[t] = state;
    state = back[t * S + state];
  }
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t s = alignment.states[t];
    if (lattice.source_position(s) < 0) continue;
    if (t > 0 && alignment.states[t - 1] == s) {
      alignment.segments.back().end_frame = t + 1;
    } else {
      alignment.segments.push_back(
          {static_cast<PhonemeId>(lattice.column(s)), t, t + 1});
    }
  }
  return alignment;
}

ForwardResult masked_ctc_forward(const PosteriorMatrix& matrix,
                                 std::span<const PhonemeId> labels,
                                 std::size_t pos,
                                 std::span<const PhonemeId> allowed) {
  check_labels(matrix, labels);
  if (pos >= labels.size())
    throw Error(ErrorCode::kInvalidArgument,
                "position " + std::to_string(pos) + " out of range");
  if (allowed.empty())
    throw Error(ErrorCode::kInvalidArgument, "empty allowed substitute set");
  check_labels(matrix, allowed);
  for (PhonemeId q : allowed) {
    if (q == labels[pos])
      throw Error(ErrorCode::kInvalidArgument,
                  "allowed set contains the original phoneme");
  }
  return lattice_forward(
      matrix, CtcLattice::masked(labels, matrix.blank_index(), pos, allowed));
}

ForwardResult deletion_forward(const PosteriorMatrix& matrix,
                               std::span<const PhonemeId> labels,
                               std::size_t pos) {
  if (pos >= labels.size())
    throw Error(ErrorCode::kInvalidArgument,
                "position " + std::to_string(pos) + " out of range");
  std::vector<PhonemeId> shortened(labels.begin(), labels.end());
  shortened.erase(shortened.begin() + static_cast<std::ptrdiff_t>(pos));
  return ctc_forward(matrix, shortened);
}

std::size_t BatchResult::total_cells() const {
  return std::accumulate(cells.begin(), cells.end(), original_cells);
}

BatchResult batched_perturbation_forward(
    const PosteriorMatrix& matrix, std::span<const PhonemeId> labels,
    std::span<const Perturbation> perturbations, CacheMode mode) {
  BatchResult result;
  if (perturbations.empty()) return result;
  check_labels(matrix, labels);

  ForwardResult original;
  if (mode == CacheMode::kPrefix) {
    original = lattice_forward(
        matrix, CtcLattice::plain(labels, matrix.blank_index()), true);
    result.original_cells = original.cells;
    result.original_log_likelihood = original.log_likelihood;
  }

  result.log_likelihoods.reserve(perturbations.size());
  result.cells.reserve(perturbations.size());
  for (const auto& p : perturbations) {
    if (p.pos >= labels.size() || p.labels.size() < p.pos ||
        !std::equal(labels.begin(), labels.begin() + p.pos, p.labels.begin()))
      throw Error(ErrorCode::kInvalidArgument,
                  "perturbation at " + std::to_string(p.pos) +
                      " does not share the prefix of the original sequence");
    check_labels(matrix, p.labels);
    const auto lattice = CtcLattice::plain(p.labels, matrix.blank_index());
    ForwardResult r;
    if (mode == CacheMode::kPrefix) {
      // Blank and label states before the perturbed label are unchanged.
      const std::size_t shared = std::min(2 * p.pos + 1, lattice.size());
      r = lattice_forward(matrix, lattice, false, &original, shared);
    } else {
      r = lattice_forward(matrix, lattice);
    }
    result.log_likelihoods.push_back(r.log_likelihood);
    result.cells.push_back(r.cells);
  }
  return result;
}

}  // namespace gop
