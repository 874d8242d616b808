#include "gop/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gop/error.hpp"
#include "gop/log_math.hpp"

namespace gop {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return in;
}

std::size_t parse_size(const std::string& field, const std::string& where) {
  std::size_t value = 0;
  auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw Error(ErrorCode::kMalformedDocument,
                where + ": expected a non-negative integer, got '" + field +
                    "'");
  return value;
}

double parse_double(const std::string& field, const std::string& where) {
  try {
    std::size_t used = 0;
    double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kMalformedDocument,
                where + ": expected a number, got '" + field + "'");
  }
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

}  // namespace

std::vector<CanonicalSequence> read_canon_tsv(
    std::istream& in, const PhonemeInventory& inventory) {
  std::vector<CanonicalSequence> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = strip_cr(std::move(line));
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_tabs(line);
    if (fields.size() != 2)
      throw Error(ErrorCode::kMalformedDocument,
                  "canon line " + std::to_string(number) +
                      ": expected 'utterance_id<TAB>phonemes'");
    out.push_back(canonical_from_string(fields[0], fields[1], inventory));
  }
  return out;
}

std::vector<CanonicalSequence> read_canon_tsv(
    const std::filesystem::path& path, const PhonemeInventory& inventory) {
  auto in = open_input(path);
  return read_canon_tsv(in, inventory);
}

void write_canon_tsv(std::ostream& out,
                     const std::vector<CanonicalSequence>& sequences,
                     const PhonemeInventory& inventory) {
  for (const auto& seq : sequences)
    out << seq.utterance_id << '\t'
        << sequence_to_string(seq.phonemes, inventory) << '\n';
}

void write_alignment_tsv(std::ostream& out, const std::string& utterance_id,
                         const std::vector<AlignmentSegment>& segments,
                         const PhonemeInventory& inventory) {
  for (const auto& s : segments)
    out << utterance_id << '\t' << inventory.symbol(s.phoneme) << '\t'
        << s.start_frame << '\t' << s.end_frame << '\n';
}

std::map<std::string, std::vector<AlignmentSegment>> read_alignment_tsv(
    const std::filesystem::path& path, const PhonemeInventory& inventory) {
  auto in = open_input(path);
  std::map<std::string, std::vector<AlignmentSegment>> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = strip_cr(std::move(line));
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_tabs(line);
    const auto loc = where(path, number);
    if (fields.size() != 4)
      throw Error(ErrorCode::kMalformedDocument,
                  loc + ": expected 4 tab-separated fields");
    AlignmentSegment seg;
    seg.phoneme = inventory.id_of(fields[1]);
    seg.start_frame = parse_size(fields[2], loc);
    seg.end_frame = parse_size(fields[3], loc);
    out[fields[0]].push_back(seg);
  }
  return out;
}

std::vector<LabelRow> read_labels_tsv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<LabelRow> rows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = strip_cr(std::move(line));
    if (line.empty() || line[0] == '#') continue;
    if (number == 1 && line.rfind("utterance_id", 0) == 0) continue;
    auto fields = split_tabs(line);
    const auto loc = where(path, number);
    if (fields.size() != 4 && fields.size() != 5)
      throw Error(ErrorCode::kMalformedDocument,
                  loc + ": expected 4 or 5 tab-separated fields");
    LabelRow row;
    row.utterance_id = fields[0];
    row.pos = parse_size(fields[1], loc);
    row.phoneme = fields[2];
    if (fields[3] != "0" && fields[3] != "1")
      throw Error(ErrorCode::kMalformedDocument,
                  loc + ": binary_label must be 0 or 1");
    row.mispronounced = fields[3] == "1";
    if (fields.size() == 5 && !fields[4].empty()) {
      double h = parse_double(fields[4], loc);
      if (h < 0.0 || h > 2.0)
        throw Error(ErrorCode::kMalformedDocument,
                    loc + ": human_score must lie in [0, 2]");
      row.human_score = h;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_labels_tsv(std::ostream& out, const std::vector<LabelRow>& rows) {
  for (const auto& r : rows) {
    out << r.utterance_id << '\t' << r.pos << '\t' << r.phoneme << '\t'
        << (r.mispronounced ? 1 : 0);
    if (r.human_score) out << '\t' << *r.human_score;
    out << '\n';
  }
}

nlohmann::ordered_json double_to_json(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return value;
}

double json_to_double(const nlohmann::json& value) {
  if (value.is_number()) return value.get<double>();
  if (value.is_string()) {
    const auto& s = value.get_ref<const std::string&>();
    if (s == "inf") return kPosInf;
    if (s == "-inf") return kNegInf;
    if (s == "nan") return std::nan("");
  }
  throw Error(ErrorCode::kMalformedDocument,
              "expected a number, got " + value.dump());
}

nlohmann::ordered_json report_to_json(const GopReport& report,
                                      const PhonemeInventory& inventory) {
  nlohmann::ordered_json scores = nlohmann::ordered_json::array();
  for (const auto& s : report.scores) {
    nlohmann::ordered_json row;
    row["pos"] = s.pos;
    row["phoneme"] = inventory.symbol(s.phoneme);
    row["score"] = double_to_json(s.score);
    if (s.best_perturbation)
      row["best_perturbation"] = describe(*s.best_perturbation, inventory);
    else
      row["best_perturbation"] = nullptr;
    row["loss_original"] = double_to_json(s.loss_original);
    row["loss_best"] = double_to_json(s.loss_best);
    row["decision"] = decision_name(s.decision);
    scores.push_back(std::move(row));
  }
  nlohmann::ordered_json doc;
  doc["utterance_id"] = report.utterance_id;
  doc["method"] = method_name(report.method);
  doc["regime"] = report.method == Method::kForcedAlignment
                      ? nlohmann::ordered_json(nullptr)
                      : nlohmann::ordered_json(regime_name(report.regime));
  doc["scores"] = std::move(scores);
  doc["forward_passes"] = report.forward_passes;
  doc["dp_passes"] = report.dp_passes;
  doc["dp_cells"] = report.dp_cells;
  doc["wall_ms"] = report.wall_ms;
  return doc;
}

void write_report_line(std::ostream& out, const GopReport& report,
                       const PhonemeInventory& inventory) {
  out << report_to_json(report, inventory).dump() << '\n';
}

std::vector<ReportScoreRow> read_report_lines(
    const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<ReportScoreRow> rows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (strip_cr(line).empty()) continue;
    try {
      auto doc = nlohmann::json::parse(line);
      const auto utt = doc.at("utterance_id").get<std::string>();
      const auto method = doc.at("method").get<std::string>();
      const auto regime =
          doc.at("regime").is_null() ? "" : doc.at("regime").get<std::string>();
      for (const auto& s : doc.at("scores")) {
        rows.push_back({utt, s.at("pos").get<std::size_t>(),
                        s.at("phoneme").get<std::string>(),
                        json_to_double(s.at("score")), method, regime});
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedDocument,
                  where(path, number) + ": " + e.what());
    }
  }
  return rows;
}

JoinResult join_scores(const std::vector<ReportScoreRow>& reports,
                       const std::vector<LabelRow>& labels) {
  std::map<std::pair<std::string, std::size_t>, const LabelRow*> index;
  for (const auto& l : labels) index[{l.utterance_id, l.pos}] = &l;

  JoinResult result;
  std::size_t matched = 0;
  for (const auto& r : reports) {
    auto it = index.find({r.utterance_id, r.pos});
    if (it == index.end()) {
      ++result.unmatched_reports;
      continue;
    }
    ++matched;
    const LabelRow& l = *it->second;
    if (l.phoneme != r.phoneme) {
      ++result.phoneme_mismatches;
      continue;
    }
    result.joined.push_back(
        {r.utterance_id, r.pos, r.score, l.mispronounced, l.human_score});
  }
  result.unmatched_labels = labels.size() - matched;
  return result;
}

}  // namespace gop
