#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gop/inventory.hpp"

namespace gop {

// T x (V+1) grid of natural-log posteriors, row-major, one row per frame.
// Columns follow inventory order with the blank at blank_index.
class PosteriorMatrix {
 public:
  PosteriorMatrix() = default;
  // Rejects T == 0, columns < 2, a size mismatch, a blank_index out of range
  // and non-finite entries.
  PosteriorMatrix(std::string utterance_id, std::size_t frames,
                  std::size_t columns, std::size_t blank_index,
                  std::vector<double> log_probs);

  const std::string& utterance_id() const { return utterance_id_; }
  std::size_t frames() const { return frames_; }
  std::size_t columns() const { return columns_; }
  std::size_t blank_index() const { return blank_index_; }

  double operator()(std::size_t frame, std::size_t column) const {
    return log_probs_[frame * columns_ + column];
  }
  std::span<const double> row(std::size_t frame) const {
    return {log_probs_.data() + frame * columns_, columns_};
  }
  const std::vector<double>& values() const { return log_probs_; }

  // Largest |log-sum-exp(row)| over all rows.
  double max_row_deviation() const;
  bool is_normalized(double tolerance = 1e-3) const {
    return max_row_deviation() <= tolerance;
  }

 private:
  std::string utterance_id_;
  std::size_t frames_ = 0;
  std::size_t columns_ = 0;
  std::size_t blank_index_ = 0;
  std::vector<double> log_probs_;
};

// Build from linear probabilities; values below e^-30 are clamped to the log
// floor.
PosteriorMatrix from_probabilities(std::string utterance_id,
                                   std::size_t frames, std::size_t columns,
                                   std::size_t blank_index,
                                   std::span<const double> probabilities);

// Shift every row so its log-sum-exp is 0. Throws kDegenerateRow when a row
// has every entry at or below the log floor.
PosteriorMatrix renormalize(const PosteriorMatrix& matrix);

struct LoadOptions {
  bool renormalize = false;
  // Allowed |log-sum-exp(row)| when not renormalizing.
  double row_tolerance = 1e-3;
};

// Binary layout (little-endian): "GOPP", u32 version = 1, u32 T, u32 V+1,
// u8 flags (bit0 natural-log values, bit1 normalized), 3 pad bytes, then
// T*(V+1) f32 row-major.
inline constexpr std::uint8_t kFlagLog = 0x1;
inline constexpr std::uint8_t kFlagNormalized = 0x2;
inline constexpr std::uint32_t kBinaryVersion = 1;

// Loads either the binary format (detected by magic) or the text format
// {"utterance_id": str, "log": bool, "matrix": [[...], ...]}. The utterance id
// of a binary file is its stem.
PosteriorMatrix load_posteriors(const std::filesystem::path& path,
                                const PhonemeInventory& vocab,
                                const LoadOptions& options = {});

// Values are written as f32, so save/load is bit-exact for matrices whose
// entries are representable in single precision (e.g. anything loaded from
// a binary file).
void save_posteriors_binary(const std::filesystem::path& path,
                            const PosteriorMatrix& matrix);
void save_posteriors_text(const std::filesystem::path& path,
                          const PosteriorMatrix& matrix);

std::vector<std::uint8_t> encode_binary(const PosteriorMatrix& matrix);
PosteriorMatrix decode_binary(std::span<const std::uint8_t> bytes,
                              std::string utterance_id,
                              std::size_t blank_index);

}  // namespace gop
