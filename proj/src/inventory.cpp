#include "gop/inventory.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <utility>

#include "gop/error.hpp"

namespace gop {

namespace {

using nlohmann::json;

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedDocument,
                path.string() + ": " + e.what());
  }
}

struct RuleSeed {
  const char* key;
  std::vector<const char*> substitutes;
};

DefaultMapResult build_seeded_map(const std::vector<RuleSeed>& seeds,
                                  const PhonemeInventory& inventory) {
  DefaultMapResult result;
  std::map<PhonemeId, std::vector<PhonemeId>> entries;
  for (const auto& seed : seeds) {
    auto key = inventory.find(seed.key);
    if (!key) {
      result.skipped.emplace_back(seed.key);
      continue;
    }
    std::vector<PhonemeId> subs;
    for (const char* s : seed.substitutes) {
      auto id = inventory.find(s);
      if (!id) {
        result.skipped.push_back(std::string(seed.key) + "->" + s);
        continue;
      }
      if (*id == *key) continue;
      if (std::find(subs.begin(), subs.end(), *id) == subs.end())
        subs.push_back(*id);
    }
    if (!subs.empty()) entries.emplace(*key, std::move(subs));
  }
  result.map = ConfusionMap(std::move(entries), true, inventory);
  return result;
}

}  // namespace

PhonemeInventory::PhonemeInventory(std::vector<std::string> symbols,
                                   std::size_t blank_index)
    : symbols_(std::move(symbols)), blank_index_(blank_index) {
  if (symbols_.size() < 2)
    throw Error(ErrorCode::kInvalidArgument,
                "inventory needs a blank and at least one phoneme");
  if (blank_index_ >= symbols_.size())
    throw Error(ErrorCode::kInvalidArgument, "blank_index out of range");
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    const auto& s = symbols_[i];
    if (s.empty())
      throw Error(ErrorCode::kInvalidArgument,
                  "empty symbol at index " + std::to_string(i));
    if (!index_.emplace(s, static_cast<PhonemeId>(i)).second)
      throw Error(ErrorCode::kInvalidArgument, "duplicate symbol '" + s + "'");
    if (i != blank_index_) phoneme_ids_.push_back(static_cast<PhonemeId>(i));
  }
}

PhonemeInventory PhonemeInventory::from_json(const nlohmann::json& doc) {
  try {
    auto symbols = doc.at("symbols").get<std::vector<std::string>>();
    auto blank = doc.at("blank_index").get<std::int64_t>();
    if (blank < 0)
      throw Error(ErrorCode::kMalformedDocument, "negative blank_index");
    return PhonemeInventory(std::move(symbols),
                            static_cast<std::size_t>(blank));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument,
                std::string("vocab document: ") + e.what());
  }
}

PhonemeInventory PhonemeInventory::load(const std::filesystem::path& path) {
  return from_json(read_json_file(path));
}

nlohmann::json PhonemeInventory::to_json() const {
  return json{{"symbols", symbols_}, {"blank_index", blank_index_}};
}

const std::string& PhonemeInventory::symbol(std::size_t column) const {
  if (column >= symbols_.size())
    throw Error(ErrorCode::kInvalidArgument,
                "column " + std::to_string(column) + " out of range");
  return symbols_[column];
}

std::optional<PhonemeId> PhonemeInventory::find(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end() || it->second == blank_index_) return std::nullopt;
  return it->second;
}

PhonemeId PhonemeInventory::id_of(std::string_view symbol) const {
  auto id = find(symbol);
  if (!id)
    throw Error(ErrorCode::kUnknownSymbol,
                "unknown symbol '" + std::string(symbol) + "'");
  return *id;
}

PhonemeInventory english_inventory() {
  return PhonemeInventory(
      {"<blank>", "p",  "b",  "t",  "d",  "k",  "g",  "f",  "v",
       "θ",       "ð",  "s",  "z",  "ʃ",  "ʒ",  "h",  "tʃ", "dʒ",
       "m",       "n",  "ŋ",  "l",  "ɹ",  "w",  "j",  "ɾ",  "iː",
       "ɪ",       "e",  "ɛ",  "æ",  "ʌ",  "ɑ",  "ɔ",  "ʊ",  "uː",
       "ə",       "ɜː", "eɪ", "aɪ", "ɔɪ", "əʊ", "aʊ", "eː", "o",
       "oː"},
      0);
}

CanonicalSequence make_canonical(std::string utterance_id,
                                 std::vector<PhonemeId> phonemes,
                                 const PhonemeInventory& inventory) {
  if (phonemes.empty())
    throw Error(ErrorCode::kInvalidArgument,
                "canonical sequence '" + utterance_id + "' is empty");
  for (PhonemeId id : phonemes) {
    if (!inventory.is_phoneme(id))
      throw Error(ErrorCode::kInvalidArgument,
                  "canonical sequence '" + utterance_id +
                      "' has invalid phoneme id " + std::to_string(id));
  }
  return CanonicalSequence{std::move(utterance_id), std::move(phonemes)};
}

CanonicalSequence canonical_from_symbols(std::string utterance_id,
                                         std::span<const std::string> symbols,
                                         const PhonemeInventory& inventory) {
  std::vector<PhonemeId> ids;
  ids.reserve(symbols.size());
  for (const auto& s : symbols) ids.push_back(inventory.id_of(s));
  return make_canonical(std::move(utterance_id), std::move(ids), inventory);
}

CanonicalSequence canonical_from_string(std::string utterance_id,
                                        std::string_view text,
                                        const PhonemeInventory& inventory) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> symbols;
  for (std::string s; in >> s;) symbols.push_back(std::move(s));
  return canonical_from_symbols(std::move(utterance_id), symbols, inventory);
}

std::string sequence_to_string(std::span<const PhonemeId> ids,
                               const PhonemeInventory& inventory) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += inventory.symbol(ids[i]);
  }
  return out;
}

ConfusionMap::ConfusionMap(std::map<PhonemeId, std::vector<PhonemeId>> entries,
                           bool allow_deletion,
                           const PhonemeInventory& inventory)
    : allow_deletion_(allow_deletion) {
  for (auto& [key, subs] : entries) {
    if (!inventory.is_phoneme(key))
      throw Error(ErrorCode::kUnknownSymbol,
                  "confusion map key id " + std::to_string(key) +
                      " is not a phoneme");
    std::vector<PhonemeId> unique;
    for (PhonemeId s : subs) {
      if (s == key)
        throw Error(ErrorCode::kSelfSubstitution,
                    "phoneme '" + inventory.symbol(key) +
                        "' maps to itself");
      if (!inventory.is_phoneme(s))
        throw Error(ErrorCode::kUnknownSymbol,
                    "substitute id " + std::to_string(s) + " of '" +
                        inventory.symbol(key) + "' is not a phoneme");
      if (std::find(unique.begin(), unique.end(), s) == unique.end())
        unique.push_back(s);
    }
    entries_.emplace(key, std::move(unique));
  }
}

ConfusionMap ConfusionMap::from_json(const nlohmann::json& doc,
                                     const PhonemeInventory& inventory) {
  if (!doc.is_object())
    throw Error(ErrorCode::kMalformedDocument,
                "confusion map must be a JSON object");
  if (doc.contains("version")) {
    if (!doc["version"].is_number_integer() || doc["version"].get<int>() != 1)
      throw Error(ErrorCode::kMalformedDocument,
                  "unsupported confusion map version");
  }
  // A bare {symbol: [symbols]} object is accepted as the entries table.
  const json& table = doc.contains("entries") ? doc["entries"] : doc;
  if (!table.is_object())
    throw Error(ErrorCode::kMalformedDocument, "'entries' must be an object");

  bool allow_deletion = true;
  if (doc.contains("allow_deletion")) {
    if (!doc["allow_deletion"].is_boolean())
      throw Error(ErrorCode::kMalformedDocument,
                  "'allow_deletion' must be a boolean");
    allow_deletion = doc["allow_deletion"].get<bool>();
  }

  auto resolve = [&](const std::string& symbol) {
    auto id = inventory.find(symbol);
    if (!id)
      throw Error(ErrorCode::kUnknownSymbol,
                  "unknown symbol '" + symbol + "' in confusion map");
    return *id;
  };

  std::map<PhonemeId, std::vector<PhonemeId>> entries;
  for (const auto& [symbol, subs] : table.items()) {
    if (&table == &doc && (symbol == "version" || symbol == "allow_deletion"))
      continue;
    if (!subs.is_array())
      throw Error(ErrorCode::kMalformedDocument,
                  "substitutes of '" + symbol + "' must be an array");
    PhonemeId key = resolve(symbol);
    std::vector<PhonemeId> ids;
    for (const auto& s : subs) {
      if (!s.is_string())
        throw Error(ErrorCode::kMalformedDocument,
                    "substitutes of '" + symbol + "' must be strings");
      ids.push_back(resolve(s.get<std::string>()));
    }
    auto [it, inserted] = entries.emplace(key, std::move(ids));
    if (!inserted)
      throw Error(ErrorCode::kMalformedDocument,
                  "duplicate key '" + symbol + "'");
  }
  return ConfusionMap(std::move(entries), allow_deletion, inventory);
}

ConfusionMap ConfusionMap::load(const std::filesystem::path& path,
                                const PhonemeInventory& inventory) {
  return from_json(read_json_file(path), inventory);
}

nlohmann::json ConfusionMap::to_json(const PhonemeInventory& inventory) const {
  json entries = json::object();
  for (const auto& [key, subs] : entries_) {
    json list = json::array();
    for (PhonemeId s : subs) list.push_back(inventory.symbol(s));
    entries[inventory.symbol(key)] = std::move(list);
  }
  return json{{"version", 1},
              {"entries", std::move(entries)},
              {"allow_deletion", allow_deletion_}};
}

std::span<const PhonemeId> ConfusionMap::substitutes(PhonemeId phoneme) const {
  auto it = entries_.find(phoneme);
  if (it == entries_.end()) return {};
  return it->second;
}

DefaultMapResult default_english_map(const PhonemeInventory& inventory) {
  static const std::vector<RuleSeed> kSeeds = {
      // Place/manner neighbours among stops, fricatives and nasals.
      {"p", {"b", "m"}},
      {"b", {"p", "m"}},
      {"t", {"d", "ɾ"}},
      {"d", {"t", "ɾ"}},
      {"k", {"g"}},
      {"g", {"k"}},
      {"m", {"n", "b"}},
      {"n", {"m", "ŋ"}},
      {"ŋ", {"n"}},
      {"f", {"v", "θ"}},
      {"v", {"f", "w"}},
      {"s", {"z", "θ", "ʃ"}},
      {"z", {"s", "ð"}},
      {"ʃ", {"s", "tʃ"}},
      {"ʒ", {"ʃ", "dʒ"}},
      {"tʃ", {"ʃ", "dʒ"}},
      {"dʒ", {"tʃ", "ʒ"}},
      // Typical L2 substitutions.
      {"θ", {"ð", "f", "s"}},
      {"ð", {"d", "θ", "z"}},
      {"w", {"v"}},
      {"ɹ", {"l", "w"}},
      {"l", {"ɹ"}},
      // Vowel mergers and neighbours.
      {"æ", {"e", "ɛ"}},
      {"ɛ", {"e", "æ"}},
      {"ʌ", {"ɑ"}},
      {"ɑ", {"ʌ", "ɔ"}},
      {"ɪ", {"iː"}},
      {"iː", {"ɪ"}},
      {"ʊ", {"uː"}},
      {"uː", {"ʊ"}},
      // Diphthong simplification.
      {"eɪ", {"eː", "e"}},
      {"əʊ", {"o", "oː"}},
  };
  return build_seeded_map(kSeeds, inventory);
}

DefaultMapResult artificial_error_rules(const PhonemeInventory& inventory) {
  static const std::vector<RuleSeed> kSeeds = {
      {"ð", {"d"}},  {"θ", {"s"}},   {"æ", {"e"}},
      {"ʌ", {"ɑ"}},  {"eɪ", {"eː"}}, {"əʊ", {"o"}},
  };
  return build_seeded_map(kSeeds, inventory);
}

const char* regime_name(Regime regime) {
  return regime == Regime::kRestricted ? "RPS" : "UPS";
}

SubstitutionPolicy SubstitutionPolicy::unrestricted(
    const PhonemeInventory& inventory) {
  SubstitutionPolicy policy;
  policy.regime_ = Regime::kUnrestricted;
  policy.all_phonemes_ = inventory.phoneme_ids();
  return policy;
}

SubstitutionPolicy SubstitutionPolicy::restricted(ConfusionMap map) {
  SubstitutionPolicy policy;
  policy.regime_ = Regime::kRestricted;
  policy.map_ = std::move(map);
  return policy;
}

bool SubstitutionPolicy::allow_deletion() const {
  return regime_ == Regime::kUnrestricted || map_.allow_deletion();
}

std::vector<PhonemeId> SubstitutionPolicy::substitutes(
    PhonemeId original) const {
  if (regime_ == Regime::kRestricted) {
    auto subs = map_.substitutes(original);
    return {subs.begin(), subs.end()};
  }
  std::vector<PhonemeId> out;
  out.reserve(all_phonemes_.size());
  for (PhonemeId id : all_phonemes_)
    if (id != original) out.push_back(id);
  return out;
}

std::size_t SubstitutionPolicy::substitute_count(PhonemeId original) const {
  if (regime_ == Regime::kRestricted) return map_.substitutes(original).size();
  bool present = std::find(all_phonemes_.begin(), all_phonemes_.end(),
                           original) != all_phonemes_.end();
  return all_phonemes_.size() - (present ? 1 : 0);
}

std::size_t unrestricted_pass_count(std::size_t n, std::size_t phoneme_count) {
  return n * (phoneme_count - 1) + n;
}

std::size_t substitution_pass_count(std::span<const PhonemeId> sequence,
                                    const SubstitutionPolicy& policy) {
  if (policy.regime() == Regime::kUnrestricted)
    return unrestricted_pass_count(sequence.size(), policy.phoneme_count());
  std::size_t total = 0;
  for (PhonemeId id : sequence) total += policy.substitute_count(id);
  if (policy.allow_deletion()) total += sequence.size();
  return total;
}

}  // namespace gop
