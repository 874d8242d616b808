#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gop/ctc.hpp"
#include "gop/inventory.hpp"
#include "gop/scoring.hpp"

namespace gop::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

struct RunConfig {
  Method method = Method::kPhonemePerturbed;
  Regime regime = Regime::kUnrestricted;
  std::filesystem::path posteriors;
  std::filesystem::path vocab;
  std::filesystem::path canon;
  std::optional<std::filesystem::path> map;
  std::optional<std::filesystem::path> alignments;
  std::filesystem::path output = "-";
  std::size_t jobs = 1;
  bool renormalize = false;
  bool record_timing = false;
  CacheMode cache = CacheMode::kPrefix;
  std::optional<double> threshold;
  std::uint64_t seed = 0;
};

// Throws gop::Error(kInvalidArgument) when RPS lacks a map.
void validate(const RunConfig& config);

// Entry point shared by the gop executable and the tests. args[0] is the
// program name.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace gop::cli
