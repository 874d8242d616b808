#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gop/ctc.hpp"
#include "gop/eval.hpp"
#include "gop/inventory.hpp"
#include "gop/scoring.hpp"
#include "json.hpp"

namespace gop {

// Canonical transcriptions: "utterance_id<TAB>sym sym sym" per line.
std::vector<CanonicalSequence> read_canon_tsv(std::istream& in,
                                              const PhonemeInventory& inventory);
std::vector<CanonicalSequence> read_canon_tsv(const std::filesystem::path& path,
                                              const PhonemeInventory& inventory);
void write_canon_tsv(std::ostream& out,
                     const std::vector<CanonicalSequence>& sequences,
                     const PhonemeInventory& inventory);

// Alignments: "utterance_id<TAB>phoneme<TAB>start_frame<TAB>end_frame".
void write_alignment_tsv(std::ostream& out, const std::string& utterance_id,
                         const std::vector<AlignmentSegment>& segments,
                         const PhonemeInventory& inventory);
std::map<std::string, std::vector<AlignmentSegment>> read_alignment_tsv(
    const std::filesystem::path& path, const PhonemeInventory& inventory);

// Labels: "utterance_id<TAB>position<TAB>phoneme<TAB>binary_label[<TAB>human]".
// An optional header line starting with "utterance_id" is skipped.
struct LabelRow {
  std::string utterance_id;
  std::size_t pos = 0;
  std::string phoneme;
  bool mispronounced = false;
  std::optional<double> human_score;
};
std::vector<LabelRow> read_labels_tsv(const std::filesystem::path& path);
void write_labels_tsv(std::ostream& out, const std::vector<LabelRow>& rows);

// One JSON object per line; non-finite numbers are written as the strings
// "inf", "-inf" and "nan".
nlohmann::ordered_json report_to_json(const GopReport& report,
                                      const PhonemeInventory& inventory);
void write_report_line(std::ostream& out, const GopReport& report,
                       const PhonemeInventory& inventory);

struct ReportScoreRow {
  std::string utterance_id;
  std::size_t pos = 0;
  std::string phoneme;
  double score = 0.0;
  std::string method;
  std::string regime;
};
std::vector<ReportScoreRow> read_report_lines(const std::filesystem::path& path);

double json_to_double(const nlohmann::json& value);
nlohmann::ordered_json double_to_json(double value);

struct JoinResult {
  std::vector<LabeledScore> joined;
  std::size_t unmatched_reports = 0;
  std::size_t unmatched_labels = 0;
  std::size_t phoneme_mismatches = 0;
};

// Joins report rows with label rows on (utterance_id, position).
JoinResult join_scores(const std::vector<ReportScoreRow>& reports,
                       const std::vector<LabelRow>& labels);

}  // namespace gop
