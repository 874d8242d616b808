#include "gop/posterior.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "gop/error.hpp"
#include "gop/log_math.hpp"
#include "json.hpp"

namespace gop {

namespace {

constexpr char kMagic[4] = {'G', 'O', 'P', 'P'};
constexpr std::size_t kHeaderSize = 20;

static_assert(std::endian::native == std::endian::little,
              "posterior files are little-endian; add byte swapping");

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

double to_log(double value, bool is_log) {
  double v = is_log ? value : (value > 0.0 ? std::log(value) : kNegInf);
  return std::max(v, kLogFloor);
}

void check_finite(std::span<const double> values, const std::string& where) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw Error(ErrorCode::kNonFinite,
                  where + ": non-finite value at flat index " +
                      std::to_string(i));
  }
}

PosteriorMatrix finish_load(PosteriorMatrix matrix, const PhonemeInventory& vocab,
                            const LoadOptions& options,
                            const std::string& where) {
  if (matrix.columns() != vocab.column_count())
    throw Error(ErrorCode::kDimensionMismatch,
                where + ": file has " + std::to_string(matrix.columns()) +
                    " columns, vocab has " +
                    std::to_string(vocab.column_count()));
  if (options.renormalize) return renormalize(matrix);
  double deviation = matrix.max_row_deviation();
  if (deviation > options.row_tolerance)
    throw Error(ErrorCode::kNotNormalized,
                where + ": row log-sum-exp deviates from 0 by " +
                    std::to_string(deviation) +
                    " (use --renormalize to fix)");
  return matrix;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

PosteriorMatrix::PosteriorMatrix(std::string utterance_id, std::size_t frames,
                                 std::size_t columns, std::size_t blank_index,
                                 std::vector<double> log_probs)
    : utterance_id_(std::move(utterance_id)),
      frames_(frames),
      columns_(columns),
      blank_index_(blank_index),
      log_probs_(std::move(log_probs)) {
  if (frames_ == 0)
    throw Error(ErrorCode::kDimensionMismatch, "posterior matrix has T = 0");
  if (columns_ < 2)
    throw Error(ErrorCode::kDimensionMismatch,
                "posterior matrix needs a blank and a phoneme column");
  if (blank_index_ >= columns_)
    throw Error(ErrorCode::kDimensionMismatch, "blank_index out of range");
  if (log_probs_.size() != frames_ * columns_)
    throw Error(ErrorCode::kDimensionMismatch,
                "expected " + std::to_string(frames_ * columns_) +
                    " values, got " + std::to_string(log_probs_.size()));
  check_finite(log_probs_, utterance_id_);
}

double PosteriorMatrix::max_row_deviation() const {
  double worst = 0.0;
  for (std::size_t t = 0; t < frames_; ++t)
    worst = std::max(worst, std::abs(log_sum_exp(row(t))));
  return worst;
}

PosteriorMatrix from_probabilities(std::string utterance_id,
                                   std::size_t frames, std::size_t columns,
                                   std::size_t blank_index,
                                   std::span<const double> probabilities) {
  check_finite(probabilities, utterance_id);
  std::vector<double> logs(probabilities.size());
  std::transform(probabilities.begin(), probabilities.end(), logs.begin(),
                 [](double p) { return to_log(p, false); });
  return PosteriorMatrix(std::move(utterance_id), frames, columns, blank_index,
                         std::move(logs));
}

PosteriorMatrix renormalize(const PosteriorMatrix& matrix) {
  std::vector<double> out(matrix.values());
  const std::size_t columns = matrix.columns();
  for (std::size_t t = 0; t < matrix.frames(); ++t) {
    auto row = matrix.row(t);
    if (std::all_of(row.begin(), row.end(),
                    [](double v) { return v <= kLogFloor; }))
      throw Error(ErrorCode::kDegenerateRow,
                  matrix.utterance_id() + ": frame " + std::to_string(t) +
                      " has every entry at the log floor");
    double shift = log_sum_exp(row);
    for (std::size_t c = 0; c < columns; ++c) out[t * columns + c] -= shift;
  }
  return PosteriorMatrix(matrix.utterance_id(), matrix.frames(), columns,
                         matrix.blank_index(), std::move(out));
}

std::vector<std::uint8_t> encode_binary(const PosteriorMatrix& matrix) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + matrix.values().size() * sizeof(float));
  out.insert(out.end(), kMagic, kMagic + 4);
  put<std::uint32_t>(out, kBinaryVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(matrix.frames()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(matrix.columns()));
  std::uint8_t flags = kFlagLog;
  if (matrix.is_normalized()) flags |= kFlagNormalized;
  out.push_back(flags);
  out.insert(out.end(), 3, 0);
  for (double v : matrix.values()) put<float>(out, static_cast<float>(v));
  return out;
}

PosteriorMatrix decode_binary(std::span<const std::uint8_t> bytes,
                              std::string utterance_id,
                              std::size_t blank_index) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw Error(ErrorCode::kFormat, utterance_id + ": bad magic");
  auto version = get<std::uint32_t>(bytes, 4);
  if (version != kBinaryVersion)
    throw Error(ErrorCode::kFormat, utterance_id + ": unsupported version " +
                                        std::to_string(version));
  auto frames = get<std::uint32_t>(bytes, 8);
  auto columns = get<std::uint32_t>(bytes, 12);
  auto flags = bytes[16];
  const std::size_t count = std::size_t{frames} * columns;
  if (bytes.size() != kHeaderSize + count * sizeof(float))
    throw Error(ErrorCode::kFormat,
                utterance_id + ": payload size does not match header");
  const bool is_log = flags & kFlagLog;
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    double raw = get<float>(bytes, kHeaderSize + i * sizeof(float));
    if (!std::isfinite(raw))
      throw Error(ErrorCode::kNonFinite,
                  utterance_id + ": non-finite value at flat index " +
                      std::to_string(i));
    values[i] = to_log(raw, is_log);
  }
  return PosteriorMatrix(std::move(utterance_id), frames, columns, blank_index,
                         std::move(values));
}

PosteriorMatrix load_posteriors(const std::filesystem::path& path,
                                const PhonemeInventory& vocab,
                                const LoadOptions& options) {
  auto bytes = read_file(path);
  const std::string where = path.string();
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0) {
    auto matrix = decode_binary(bytes, path.stem().string(), vocab.blank_index());
    return finish_load(std::move(matrix), vocab, options, where);
  }

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error&) {
    throw Error(ErrorCode::kFormat,
                where + ": neither a GOPP binary nor a JSON posterior document");
  }
  try {
    std::string utt = doc.value("utterance_id", path.stem().string());
    bool is_log = doc.at("log").get<bool>();
    const auto& rows = doc.at("matrix");
    if (!rows.is_array() || rows.empty())
      throw Error(ErrorCode::kDimensionMismatch, where + ": empty matrix");
    const std::size_t columns = rows.at(0).size();
    std::vector<double> values;
    values.reserve(rows.size() * columns);
    for (const auto& r : rows) {
      if (r.size() != columns)
        throw Error(ErrorCode::kDimensionMismatch, where + ": ragged matrix");
      for (const auto& v : r) {
        if (!v.is_number())
          throw Error(ErrorCode::kNonFinite, where + ": non-numeric entry");
        double x = v.get<double>();
        if (!std::isfinite(x))
          throw Error(ErrorCode::kNonFinite, where + ": non-finite entry");
        values.push_back(to_log(x, is_log));
      }
    }
    PosteriorMatrix matrix(std::move(utt), rows.size(), columns,
                           vocab.blank_index(), std::move(values));
    return finish_load(std::move(matrix), vocab, options, where);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, where + ": " + e.what());
  }
}

void save_posteriors_binary(const std::filesystem::path& path,
                            const PosteriorMatrix& matrix) {
  auto bytes = encode_binary(matrix);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

void save_posteriors_text(const std::filesystem::path& path,
                          const PosteriorMatrix& matrix) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t t = 0; t < matrix.frames(); ++t) {
    auto r = matrix.row(t);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  nlohmann::json doc = {{"utterance_id", matrix.utterance_id()},
                        {"log", true},
                        {"matrix", std::move(rows)}};
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << doc.dump() << '\n';
}

}  // namespace gop
