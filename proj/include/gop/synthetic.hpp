#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "gop/inventory.hpp"
#include "gop/posterior.hpp"

namespace gop {

struct SynthesisOptions {
  std::size_t frames_per_phoneme = 3;
  std::size_t blank_frames = 1;  // after each phoneme, and once at the start
  double dominant_probability = 0.9;
  std::uint64_t seed = 0;
};

// One-hot-dominated posteriors that spell `spoken`: each frame gives its
// target column `dominant_probability` and spreads the rest randomly over the
// other columns. Rows are normalized.
PosteriorMatrix synthesize_posteriors(std::string utterance_id,
                                      std::span<const PhonemeId> spoken,
                                      const PhonemeInventory& inventory,
                                      const SynthesisOptions& options = {});

// Rows drawn uniformly at random and normalized.
PosteriorMatrix random_posteriors(std::string utterance_id, std::size_t frames,
                                  std::size_t columns, std::size_t blank_index,
                                  std::uint64_t seed);

}  // namespace gop
