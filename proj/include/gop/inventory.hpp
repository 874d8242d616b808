#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace gop {

// Phoneme ids are posterior-matrix column indices; the blank column is never
// a valid phoneme id.
using PhonemeId = std::uint32_t;

class PhonemeInventory {
 public:
  PhonemeInventory(std::vector<std::string> symbols, std::size_t blank_index);

  // {"symbols": [...], "blank_index": int}
  static PhonemeInventory from_json(const nlohmann::json& doc);
  static PhonemeInventory load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  // Number of matrix columns, V + 1.
  std::size_t column_count() const { return symbols_.size(); }
  // Number of scorable phonemes, V.
  std::size_t phoneme_count() const { return symbols_.size() - 1; }
  std::size_t blank_index() const { return blank_index_; }

  const std::string& symbol(std::size_t column) const;
  const std::vector<std::string>& symbols() const { return symbols_; }

  std::optional<PhonemeId> find(std::string_view symbol) const;
  // Throws kUnknownSymbol naming the symbol; rejects the blank symbol.
  PhonemeId id_of(std::string_view symbol) const;
  bool is_phoneme(std::size_t column) const {
    return column < symbols_.size() && column != blank_index_;
  }

  // All non-blank ids in column order.
  const std::vector<PhonemeId>& phoneme_ids() const { return phoneme_ids_; }

 private:
  std::vector<std::string> symbols_;
  std::size_t blank_index_;
  std::unordered_map<std::string, PhonemeId> index_;
  std::vector<PhonemeId> phoneme_ids_;
};

// Built-in English IPA inventory (blank at column 0) covering the symbols the
// default confusion map and the artificial-error rules refer to.
PhonemeInventory english_inventory();

struct CanonicalSequence {
  std::string utterance_id;
  std::vector<PhonemeId> phonemes;

  std::size_t size() const { return phonemes.size(); }
};

// Validates length >= 1, no blank, every id in range.
CanonicalSequence make_canonical(std::string utterance_id,
                                 std::vector<PhonemeId> phonemes,
                                 const PhonemeInventory& inventory);
CanonicalSequence canonical_from_symbols(std::string utterance_id,
                                         std::span<const std::string> symbols,
                                         const PhonemeInventory& inventory);
// Whitespace-separated symbols.
CanonicalSequence canonical_from_string(std::string utterance_id,
                                        std::string_view text,
                                        const PhonemeInventory& inventory);

std::string sequence_to_string(std::span<const PhonemeId> ids,
                               const PhonemeInventory& inventory);

class ConfusionMap {
 public:
  ConfusionMap() = default;
  // Validates against the inventory: no self-substitution, no blank, all ids
  // in range. Duplicate substitutes collapse, keeping first occurrence.
  ConfusionMap(std::map<PhonemeId, std::vector<PhonemeId>> entries,
               bool allow_deletion, const PhonemeInventory& inventory);

  // {"version": 1, "entries": {symbol: [symbols...]}, "allow_deletion": bool}
  static ConfusionMap from_json(const nlohmann::json& doc,
                                const PhonemeInventory& inventory);
  static ConfusionMap load(const std::filesystem::path& path,
                           const PhonemeInventory& inventory);
  nlohmann::json to_json(const PhonemeInventory& inventory) const;

  std::span<const PhonemeId> substitutes(PhonemeId phoneme) const;
  const std::map<PhonemeId, std::vector<PhonemeId>>& entries() const {
    return entries_;
  }
  bool allow_deletion() const { return allow_deletion_; }

  bool operator==(const ConfusionMap&) const = default;

 private:
  std::map<PhonemeId, std::vector<PhonemeId>> entries_;
  bool allow_deletion_ = true;
};

struct DefaultMapResult {
  ConfusionMap map;
  // Symbols (keys or substitutes) the inventory lacks, as "symbol" or
  // "key->symbol".
  std::vector<std::string> skipped;
};

DefaultMapResult default_english_map(const PhonemeInventory& inventory);

// The artificial error rewrites used for injected-error experiments:
// ð→d, θ→s, æ→e, ʌ→ɑ, eɪ→eː, əʊ→o. Missing symbols are skipped.
DefaultMapResult artificial_error_rules(const PhonemeInventory& inventory);

enum class Regime { kRestricted, kUnrestricted };

const char* regime_name(Regime regime);  // "RPS" / "UPS"

// Which substitutions and deletions are scored at each canonical position.
class SubstitutionPolicy {
 public:
  static SubstitutionPolicy unrestricted(const PhonemeInventory& inventory);
  static SubstitutionPolicy restricted(ConfusionMap map);

  Regime regime() const { return regime_; }
  bool allow_deletion() const;
  // Candidates for replacing `original`, in deterministic order. Never
  // contains `original` or the blank.
  std::vector<PhonemeId> substitutes(PhonemeId original) const;
  std::size_t substitute_count(PhonemeId original) const;
  // V for the unrestricted regime, 0 otherwise.
  std::size_t phoneme_count() const { return all_phonemes_.size(); }
  const ConfusionMap& map() const { return map_; }

 private:
  Regime regime_ = Regime::kUnrestricted;
  std::vector<PhonemeId> all_phonemes_;
  ConfusionMap map_;
};

// Number of perturbation evaluations for one utterance:
// unrestricted n(V-1) + n, restricted sum |M(y_i)| + (deletion ? n : 0).
std::size_t substitution_pass_count(std::span<const PhonemeId> sequence,
                                    const SubstitutionPolicy& policy);
std::size_t unrestricted_pass_count(std::size_t n, std::size_t phoneme_count);

}  // namespace gop
