#include "gop/synthetic.hpp"

#include <random>
#include <vector>

#include "gop/error.hpp"

namespace gop {

namespace {

// Uniform in (0, 1] from raw engine bits.
double unit(std::mt19937_64& engine) {
  return (static_cast<double>(engine() >> 11) + 1.0) * 0x1.0p-53;
}

void fill_frame(std::vector<double>& probs, std::size_t target,
                double dominant, std::mt19937_64& engine) {
  const std::size_t columns = probs.size();
  double rest = 0.0;
  for (std::size_t c = 0; c < columns; ++c) {
    probs[c] = c == target ? 0.0 : unit(engine);
    rest += probs[c];
  }
  for (std::size_t c = 0; c < columns; ++c)
    probs[c] = c == target ? dominant : (1.0 - dominant) * probs[c] / rest;
}

}  // namespace

PosteriorMatrix synthesize_posteriors(std::string utterance_id,
                                      std::span<const PhonemeId> spoken,
                                      const PhonemeInventory& inventory,
                                      const SynthesisOptions& options) {
  if (options.frames_per_phoneme == 0)
    throw Error(ErrorCode::kInvalidArgument, "frames_per_phoneme must be > 0");
  if (!(options.dominant_probability > 0.0 &&
        options.dominant_probability < 1.0))
    throw Error(ErrorCode::kInvalidArgument,
                "dominant_probability must lie in (0, 1)");
  const std::size_t columns = inventory.column_count();
  const std::size_t blank = inventory.blank_index();
  std::vector<std::size_t> targets(options.blank_frames, blank);
  for (std::size_t i = 0; i < spoken.size(); ++i) {
    if (!inventory.is_phoneme(spoken[i]))
      throw Error(ErrorCode::kInvalidArgument, "spoken id is not a phoneme");
    targets.insert(targets.end(), options.frames_per_phoneme, spoken[i]);
    // Repeated phonemes need a separating blank to remain distinct.
    std::size_t gap = options.blank_frames;
    if (gap == 0 && i + 1 < spoken.size() && spoken[i + 1] == spoken[i])
      gap = 1;
    targets.insert(targets.end(), gap, blank);
  }
  if (targets.empty()) targets.push_back(blank);

  std::mt19937_64 engine(options.seed);
  std::vector<double> values;
  values.reserve(targets.size() * columns);
  std::vector<double> probs(columns);
  for (std::size_t target : targets) {
    fill_frame(probs, target, options.dominant_probability, engine);
    values.insert(values.end(), probs.begin(), probs.end());
  }
  return from_probabilities(std::move(utterance_id), targets.size(), columns,
                            blank, values);
}

PosteriorMatrix random_posteriors(std::string utterance_id, std::size_t frames,
                                  std::size_t columns, std::size_t blank_index,
                                  std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::vector<double> values(frames * columns);
  for (std::size_t t = 0; t < frames; ++t) {
    double sum = 0.0;
    for (std::size_t c = 0; c < columns; ++c) {
      values[t * columns + c] = unit(engine);
      sum += values[t * columns + c];
    }
    for (std::size_t c = 0; c < columns; ++c) values[t * columns + c] /= sum;
  }
  return from_probabilities(std::move(utterance_id), frames, columns,
                            blank_index, values);
}

}  // namespace gop
