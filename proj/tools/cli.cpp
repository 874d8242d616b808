#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "gop/error.hpp"
#include "gop/eval.hpp"
#include "gop/io.hpp"
#include "gop/log_math.hpp"
#include "gop/posterior.hpp"
#include "gop/synthetic.hpp"
#include "json.hpp"

namespace gop::cli {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr const char* kFormatsHelp = R"(File formats:
  vocab.json     {"symbols": [...], "blank_index": int}
  canon.tsv      utterance_id<TAB>space-separated phoneme symbols
  posteriors     <dir>/<utterance_id>.gopp (binary) or <utterance_id>.json
                 binary: "GOPP", u32 version=1, u32 T, u32 V+1, u8 flags
                 (bit0 natural log, bit1 normalized), 3 pad bytes, then
                 T*(V+1) little-endian f32 row-major
                 text: {"utterance_id": str, "log": bool, "matrix": [[...]]}
  map.json       {"version": 1, "entries": {sym: [sym, ...]},
                  "allow_deletion": bool}
  alignments     utterance_id<TAB>phoneme<TAB>start_frame<TAB>end_frame
                 (half-open frame interval)
  labels.tsv     utterance_id<TAB>position<TAB>phoneme<TAB>0|1[<TAB>human 0-2]
  reports        one JSON object per line: utterance_id, method, regime,
                 scores[{pos, phoneme, score, best_perturbation,
                 loss_original, loss_best, decision}], forward_passes,
                 dp_passes, dp_cells, wall_ms
Exit codes: 0 success, 1 validation failure, 2 runtime failure.
Errors are printed as lines starting with "ERROR<TAB>".)";

int report_error(std::ostream& err, const std::string& context,
                 const Error& e) {
  err << "ERROR\t";
  if (!context.empty()) err << context << '\t';
  err << error_code_name(e.code()) << '\t' << e.what() << '\n';
  return is_validation_error(e.code()) ? kExitValidation : kExitRuntime;
}

// Writes to a file or, for "-", to `out`.
void emit(const fs::path& path, const std::string& text, std::ostream& out) {
  if (path == "-") {
    out << text;
    return;
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream file(tmp, std::ios::binary);
    if (!file) throw Error(ErrorCode::kIo, "cannot write " + path.string());
    file << text;
    if (!file) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  }
  fs::rename(tmp, path);
}

Method parse_method(const std::string& s) {
  if (s == "fa") return Method::kForcedAlignment;
  if (s == "pa-af") return Method::kPhonemeAdaptive;
  if (s == "pp-af") return Method::kPhonemePerturbed;
  throw Error(ErrorCode::kInvalidArgument, "unknown method '" + s + "'");
}

Regime parse_regime(const std::string& s) {
  if (s == "rps") return Regime::kRestricted;
  if (s == "ups") return Regime::kUnrestricted;
  throw Error(ErrorCode::kInvalidArgument, "unknown regime '" + s + "'");
}

fs::path find_posterior_file(const fs::path& dir, const std::string& utt) {
  for (const char* ext : {".gopp", ".json"}) {
    fs::path candidate = dir / (utt + ext);
    if (fs::exists(candidate)) return candidate;
  }
  throw Error(ErrorCode::kIo, "no posterior file for utterance '" + utt +
                                  "' in " + dir.string());
}

std::vector<CanonicalSequence> sorted_canon(const fs::path& path,
                                            const PhonemeInventory& vocab) {
  auto seqs = read_canon_tsv(path, vocab);
  std::sort(seqs.begin(), seqs.end(), [](const auto& a, const auto& b) {
    return a.utterance_id < b.utterance_id;
  });
  for (std::size_t i = 1; i < seqs.size(); ++i) {
    if (seqs[i].utterance_id == seqs[i - 1].utterance_id)
      throw Error(ErrorCode::kInvalidArgument,
                  "duplicate utterance id '" + seqs[i].utterance_id + "'");
  }
  return seqs;
}

// Runs work(i) for i in [0, count) on up to `jobs` threads. Results stay
// indexed, so scheduling never changes output order. Returns the first
// failure by index.
template <typename Work>
std::optional<std::pair<std::size_t, std::exception_ptr>> parallel_for(
    std::size_t count, std::size_t jobs, Work&& work) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        work(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
  std::vector<std::thread> threads;
  for (std::size_t j = 1; j < jobs; ++j) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  for (std::size_t i = 0; i < count; ++i)
    if (errors[i]) return std::make_pair(i, errors[i]);
  return std::nullopt;
}

SubstitutionPolicy make_policy(const RunConfig& config,
                               const PhonemeInventory& vocab) {
  if (config.regime == Regime::kRestricted)
    return SubstitutionPolicy::restricted(ConfusionMap::load(*config.map, vocab));
  return SubstitutionPolicy::unrestricted(vocab);
}

void apply_threshold(GopReport& report, double threshold) {
  for (auto& s : report.scores) {
    if (std::isnan(s.score)) continue;
    s.decision = s.score < threshold ? Decision::kMispronounced
                                     : Decision::kCorrect;
  }
}

// ---- score ---------------------------------------------------------------

int cmd_score(const RunConfig& config, std::ostream& out, std::ostream& err) {
  validate(config);
  const auto start = Clock::now();
  const auto vocab = PhonemeInventory::load(config.vocab);
  const auto seqs = sorted_canon(config.canon, vocab);
  const auto policy = make_policy(config, vocab);
  std::map<std::string, std::vector<AlignmentSegment>> alignments;
  if (config.method == Method::kForcedAlignment && config.alignments)
    alignments = read_alignment_tsv(*config.alignments, vocab);

  LoadOptions load;
  load.renormalize = config.renormalize;
  ScoringOptions scoring;
  scoring.cache = config.cache;

  std::vector<GopReport> reports(seqs.size());
  auto failure = parallel_for(seqs.size(), config.jobs, [&](std::size_t i) {
    const auto& seq = seqs[i];
    const auto matrix = load_posteriors(
        find_posterior_file(config.posteriors, seq.utterance_id), vocab, load);
    GopReport report;
    switch (config.method) {
      case Method::kForcedAlignment:
        if (config.alignments) {
          auto it = alignments.find(seq.utterance_id);
          if (it == alignments.end())
            throw Error(ErrorCode::kInvalidArgument,
                        "no alignment for utterance");
          std::vector<PhonemeId> aligned;
          for (const auto& s : it->second) aligned.push_back(s.phoneme);
          if (aligned != seq.phonemes)
            throw Error(ErrorCode::kInvalidArgument,
                        "aligned phonemes differ from the canonical sequence");
          const auto t0 = Clock::now();
          report.utterance_id = seq.utterance_id;
          report.method = Method::kForcedAlignment;
          report.scores = gop_fa(matrix, it->second);
          report.wall_ms =
              std::chrono::duration<double, std::milli>(Clock::now() - t0)
                  .count();
        } else {
          report = gop_fa_report(matrix, seq);
        }
        break;
      case Method::kPhonemeAdaptive:
        report = gop_pa_af(matrix, seq, policy, scoring);
        break;
      case Method::kPhonemePerturbed:
        report = gop_pp_af(matrix, seq, policy, scoring);
        break;
    }
    if (config.threshold) apply_threshold(report, *config.threshold);
    if (!config.record_timing) report.wall_ms = 0.0;
    reports[i] = std::move(report);
  });
  if (failure) {
    try {
      std::rethrow_exception(failure->second);
    } catch (const Error& e) {
      return report_error(err, seqs[failure->first].utterance_id, e);
    }
  }

  std::ostringstream text;
  std::size_t passes = 0, cells = 0;
  for (const auto& r : reports) {
    write_report_line(text, r, vocab);
    passes += r.forward_passes;
    cells += r.dp_cells;
  }
  emit(config.output, text.str(), out);
  const double ms =
      std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  err << "scored " << reports.size() << " utterances (" << method_name(config.method);
  if (config.method != Method::kForcedAlignment)
    err << ' ' << regime_name(config.regime);
  err << "): " << passes << " forward passes, " << cells << " dp cells, "
      << ms << " ms\n";
  return kExitOk;
}

// ---- align ---------------------------------------------------------------

int cmd_align(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const auto vocab = PhonemeInventory::load(config.vocab);
  const auto seqs = sorted_canon(config.canon, vocab);
  LoadOptions load;
  load.renormalize = config.renormalize;
  std::vector<std::vector<AlignmentSegment>> segments(seqs.size());
  auto failure = parallel_for(seqs.size(), config.jobs, [&](std::size_t i) {
    const auto matrix = load_posteriors(
        find_posterior_file(config.posteriors, seqs[i].utterance_id), vocab,
        load);
    segments[i] = ctc_viterbi_align(matrix, seqs[i].phonemes).segments;
  });
  if (failure) {
    try {
      std::rethrow_exception(failure->second);
    } catch (const Error& e) {
      return report_error(err, seqs[failure->first].utterance_id, e);
    }
  }
  std::ostringstream text;
  for (std::size_t i = 0; i < seqs.size(); ++i)
    write_alignment_tsv(text, seqs[i].utterance_id, segments[i], vocab);
  emit(config.output, text.str(), out);
  return kExitOk;
}

// ---- evaluate ------------------------------------------------------------

struct EvaluateArgs {
  fs::path reports;
  fs::path labels;
  fs::path output = "-";
  bool no_clamp = false;
  bool allow_unmatched = false;
};

int cmd_evaluate(const EvaluateArgs& args, std::ostream& out,
                 std::ostream& err) {
  const auto reports = read_report_lines(args.reports);
  const auto labels = read_labels_tsv(args.labels);
  const auto join = join_scores(reports, labels);
  if (join.phoneme_mismatches > 0 ||
      (!args.allow_unmatched &&
       (join.unmatched_reports > 0 || join.unmatched_labels > 0)) ||
      join.joined.empty()) {
    throw Error(ErrorCode::kJoinMismatch,
                "reports/labels join: " + std::to_string(join.joined.size()) +
                    " matched, " + std::to_string(join.unmatched_reports) +
                    " unmatched report rows, " +
                    std::to_string(join.unmatched_labels) +
                    " unmatched label rows, " +
                    std::to_string(join.phoneme_mismatches) +
                    " phoneme mismatches");
  }
  EvalOptions options;
  options.clamp_predictions = !args.no_clamp;
  const auto summary = evaluate(join.joined, options);
  auto doc = to_json(summary);
  if (!reports.empty()) {
    doc["method"] = reports.front().method;
    doc["regime"] = reports.front().regime;
  }
  doc["unmatched_reports"] = join.unmatched_reports;
  doc["unmatched_labels"] = join.unmatched_labels;
  emit(args.output, doc.dump(2) + "\n", out);
  err << "evaluated " << summary.samples << " phonemes: MCC "
      << summary.classification.metrics.mcc << " at percentile "
      << summary.threshold.percentile << "\n";
  return kExitOk;
}

// ---- bench ---------------------------------------------------------------

struct BenchArgs {
  RunConfig config;
  std::size_t repetitions = 3;
  bool synthetic = false;
  std::size_t synthetic_phonemes = 10;
  std::size_t synthetic_inventory = 39;
  std::size_t synthetic_substitutes = 3;
};

struct BenchInput {
  PhonemeInventory vocab{{"<blank>", "a"}, 0};
  std::vector<CanonicalSequence> seqs;
  std::vector<PosteriorMatrix> matrices;
  std::optional<ConfusionMap> map;
};

BenchInput synthetic_bench_input(const BenchArgs& args) {
  if (args.synthetic_inventory < 1 || args.synthetic_phonemes < 1)
    throw Error(ErrorCode::kInvalidArgument,
                "synthetic inventory and length must be >= 1");
  if (args.synthetic_substitutes >= args.synthetic_inventory)
    throw Error(ErrorCode::kInvalidArgument,
                "synthetic substitutes must be < inventory size");
  std::vector<std::string> symbols{"<blank>"};
  for (std::size_t i = 0; i < args.synthetic_inventory; ++i)
    symbols.push_back("p" + std::to_string(i));
  BenchInput input{PhonemeInventory(symbols, 0), {}, {}, {}};
  const std::size_t V = args.synthetic_inventory;
  std::map<PhonemeId, std::vector<PhonemeId>> entries;
  for (std::size_t i = 0; i < V; ++i) {
    std::vector<PhonemeId> subs;
    for (std::size_t k = 1; k <= args.synthetic_substitutes; ++k)
      subs.push_back(static_cast<PhonemeId>(1 + (i + k) % V));
    entries.emplace(static_cast<PhonemeId>(1 + i), std::move(subs));
  }
  input.map = ConfusionMap(std::move(entries), true, input.vocab);
  std::vector<PhonemeId> ids;
  for (std::size_t i = 0; i < args.synthetic_phonemes; ++i)
    ids.push_back(static_cast<PhonemeId>(1 + (i * 7) % V));
  input.seqs.push_back(make_canonical("synthetic", ids, input.vocab));
  SynthesisOptions synth;
  synth.seed = args.config.seed;
  input.matrices.push_back(
      synthesize_posteriors("synthetic", ids, input.vocab, synth));
  return input;
}

BenchInput file_bench_input(const RunConfig& config) {
  BenchInput input{PhonemeInventory::load(config.vocab), {}, {}, {}};
  input.seqs = sorted_canon(config.canon, input.vocab);
  if (input.seqs.empty())
    throw Error(ErrorCode::kInvalidArgument, "bench needs at least one utterance");
  LoadOptions load;
  load.renormalize = config.renormalize;
  for (const auto& s : input.seqs)
    input.matrices.push_back(load_posteriors(
        find_posterior_file(config.posteriors, s.utterance_id), input.vocab,
        load));
  if (config.map) input.map = ConfusionMap::load(*config.map, input.vocab);
  return input;
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

int cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err) {
  if (args.repetitions == 0)
    throw Error(ErrorCode::kInvalidArgument, "repetitions must be >= 1");
  const BenchInput input =
      args.synthetic ? synthetic_bench_input(args) : file_bench_input(args.config);

  struct Setup {
    Method method;
    std::optional<SubstitutionPolicy> policy;
    CacheMode cache;
    std::string name;
  };
  const auto ups = SubstitutionPolicy::unrestricted(input.vocab);
  std::vector<Setup> setups = {
      {Method::kForcedAlignment, std::nullopt, CacheMode::kNone, "FA"},
      {Method::kPhonemeAdaptive, ups, CacheMode::kPrefix, "PA-AF UPS"},
      {Method::kPhonemePerturbed, ups, CacheMode::kPrefix, "PP-AF UPS"},
      {Method::kPhonemePerturbed, ups, CacheMode::kNone, "PP-AF UPS (no cache)"},
  };
  if (input.map) {
    const auto rps = SubstitutionPolicy::restricted(*input.map);
    setups.push_back({Method::kPhonemeAdaptive, rps, CacheMode::kPrefix, "PA-AF RPS"});
    setups.push_back({Method::kPhonemePerturbed, rps, CacheMode::kPrefix, "PP-AF RPS"});
  }

  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  std::map<std::string, std::vector<GopReport>> last_reports;
  for (const auto& setup : setups) {
    std::vector<double> times;
    std::vector<GopReport> reports;
    for (std::size_t rep = 0; rep < args.repetitions; ++rep) {
      reports.clear();
      const auto t0 = Clock::now();
      for (std::size_t u = 0; u < input.seqs.size(); ++u) {
        ScoringOptions options;
        options.cache = setup.cache;
        switch (setup.method) {
          case Method::kForcedAlignment:
            reports.push_back(gop_fa_report(input.matrices[u], input.seqs[u]));
            break;
          case Method::kPhonemeAdaptive:
            reports.push_back(gop_pa_af(input.matrices[u], input.seqs[u],
                                        *setup.policy, options));
            break;
          case Method::kPhonemePerturbed:
            reports.push_back(gop_pp_af(input.matrices[u], input.seqs[u],
                                        *setup.policy, options));
            break;
        }
      }
      times.push_back(
          std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    }
    std::size_t passes = 0, dp_passes = 0, cells = 0;
    for (const auto& r : reports) {
      passes += r.forward_passes;
      dp_passes += r.dp_passes;
      cells += r.dp_cells;
    }
    nlohmann::ordered_json row;
    row["setup"] = setup.name;
    row["method"] = method_name(setup.method);
    row["regime"] = setup.policy ? regime_name(setup.policy->regime()) : "";
    row["prefix_cache"] = setup.cache == CacheMode::kPrefix;
    row["forward_passes"] = passes;
    row["perturbation_evaluations"] =
        setup.method == Method::kForcedAlignment ? 0 : passes - reports.size();
    row["dp_passes"] = dp_passes;
    row["dp_cells"] = cells;
    row["median_ms"] = median(times);
    rows.push_back(std::move(row));
    last_reports[setup.name] = std::move(reports);
  }

  double max_diff = 0.0;
  const auto& cached = last_reports["PP-AF UPS"];
  const auto& uncached = last_reports["PP-AF UPS (no cache)"];
  for (std::size_t u = 0; u < cached.size(); ++u) {
    for (std::size_t i = 0; i < cached[u].scores.size(); ++i) {
      const double a = cached[u].scores[i].score;
      const double b = uncached[u].scores[i].score;
      if (a == b || (std::isnan(a) && std::isnan(b))) continue;
      max_diff = std::max(max_diff, std::abs(a - b));
    }
  }

  nlohmann::ordered_json doc;
  doc["utterances"] = input.seqs.size();
  doc["repetitions"] = args.repetitions;
  doc["inventory_size"] = input.vocab.phoneme_count();
  doc["setups"] = std::move(rows);
  doc["cache_max_score_diff"] = max_diff;
  doc["cache_scores_identical"] = max_diff <= 1e-9;

  std::size_t ups_evals = 0, rps_evals = 0;
  for (const auto& s : input.seqs) {
    ups_evals += substitution_pass_count(s.phonemes, ups);
    if (input.map)
      rps_evals += substitution_pass_count(
          s.phonemes, SubstitutionPolicy::restricted(*input.map));
  }
  doc["perturbations_ups"] = ups_evals;
  if (input.map && ups_evals > 0) {
    doc["perturbations_rps"] = rps_evals;
    doc["pass_ratio_rps_ups"] =
        static_cast<double>(rps_evals) / static_cast<double>(ups_evals);
    doc["pass_reduction"] =
        1.0 - static_cast<double>(rps_evals) / static_cast<double>(ups_evals);
  } else {
    doc["perturbations_rps"] = nullptr;
    doc["pass_ratio_rps_ups"] = nullptr;
    doc["pass_reduction"] = nullptr;
  }
  emit(args.config.output, doc.dump(2) + "\n", out);
  err << "bench: " << input.seqs.size() << " utterances, " << args.repetitions
      << " repetitions\n";
  return kExitOk;
}

// ---- map / vocab -----------------------------------------------------------

int cmd_map_validate(const fs::path& file, const fs::path& vocab_path,
                     std::ostream& out) {
  const auto vocab = PhonemeInventory::load(vocab_path);
  const auto map = ConfusionMap::load(file, vocab);
  std::size_t substitutes = 0;
  for (const auto& [key, subs] : map.entries()) substitutes += subs.size();
  out << "OK\t" << map.entries().size() << " entries\t" << substitutes
      << " substitutes\tdeletion " << (map.allow_deletion() ? "on" : "off")
      << '\n';
  return kExitOk;
}

int cmd_map_default(const fs::path& vocab_path, const fs::path& output,
                    std::ostream& out, std::ostream& err) {
  const auto vocab = vocab_path.empty() ? english_inventory()
                                        : PhonemeInventory::load(vocab_path);
  const auto result = default_english_map(vocab);
  for (const auto& s : result.skipped)
    err << "warning: skipped '" << s << "' (not in inventory)\n";
  emit(output, result.map.to_json(vocab).dump(2) + "\n", out);
  return kExitOk;
}

// ---- inject-errors / synth-posteriors --------------------------------------

struct InjectArgs {
  fs::path canon;
  fs::path vocab;
  std::optional<fs::path> rules;
  std::uint64_t seed = 0;
  double rate = 0.3;
  fs::path out_spoken;
  fs::path out_labels;
};

int cmd_inject(const InjectArgs& args, std::ostream& out, std::ostream& err) {
  const auto vocab = PhonemeInventory::load(args.vocab);
  const auto seqs = sorted_canon(args.canon, vocab);
  ConfusionMap rules;
  if (args.rules) {
    rules = ConfusionMap::load(*args.rules, vocab);
  } else {
    auto builtin = artificial_error_rules(vocab);
    for (const auto& s : builtin.skipped)
      err << "warning: skipped rule '" << s << "' (not in inventory)\n";
    rules = builtin.map;
  }
  std::vector<CanonicalSequence> spoken;
  std::vector<LabelRow> labels;
  std::size_t rewritten = 0;
  for (std::size_t u = 0; u < seqs.size(); ++u) {
    // Each utterance gets its own stream derived from the run seed.
    const auto result = inject_artificial_errors(
        seqs[u].phonemes, rules, args.seed + 0x9E3779B97F4A7C15ULL * (u + 1),
        args.rate);
    spoken.push_back({seqs[u].utterance_id, result.sequence});
    for (std::size_t i = 0; i < result.sequence.size(); ++i) {
      labels.push_back({seqs[u].utterance_id, i,
                        vocab.symbol(seqs[u].phonemes[i]),
                        result.mispronounced[i], std::nullopt});
      rewritten += result.mispronounced[i] ? 1 : 0;
    }
  }
  std::ostringstream spoken_text, label_text;
  write_canon_tsv(spoken_text, spoken, vocab);
  write_labels_tsv(label_text, labels);
  emit(args.out_spoken, spoken_text.str(), out);
  emit(args.out_labels, label_text.str(), out);
  err << "injected " << rewritten << " errors over " << labels.size()
      << " phonemes\n";
  return kExitOk;
}

struct SynthArgs {
  fs::path canon;
  fs::path vocab;
  fs::path out_dir;
  SynthesisOptions options;
};

int cmd_synth(const SynthArgs& args, std::ostream& err) {
  const auto vocab = PhonemeInventory::load(args.vocab);
  const auto seqs = sorted_canon(args.canon, vocab);
  fs::create_directories(args.out_dir);
  for (std::size_t u = 0; u < seqs.size(); ++u) {
    auto options = args.options;
    options.seed = args.options.seed + u;
    const auto matrix = synthesize_posteriors(seqs[u].utterance_id,
                                              seqs[u].phonemes, vocab, options);
    save_posteriors_binary(args.out_dir / (seqs[u].utterance_id + ".gopp"),
                           matrix);
  }
  err << "wrote " << seqs.size() << " posterior files to " << args.out_dir
      << '\n';
  return kExitOk;
}

void add_common(CLI::App* cmd, RunConfig& config, bool needs_posteriors) {
  auto* p = cmd->add_option("--posteriors", config.posteriors,
                            "Directory of <utterance_id>.gopp/.json files");
  auto* v = cmd->add_option("--vocab", config.vocab, "Vocabulary sidecar (vocab.json)");
  auto* c = cmd->add_option("--canon", config.canon, "Canonical transcriptions TSV");
  if (needs_posteriors) {
    p->required();
    v->required();
    c->required();
  }
  cmd->add_option("-o,--out", config.output, "Output path ('-' = stdout)");
  cmd->add_flag("--renormalize", config.renormalize,
                "Renormalize posterior rows instead of rejecting them");
  cmd->add_option("-j,--jobs", config.jobs, "Parallel workers")
      ->check(CLI::PositiveNumber);
}

}  // namespace

void validate(const RunConfig& config) {
  if (config.method != Method::kForcedAlignment &&
      config.regime == Regime::kRestricted && !config.map)
    throw Error(ErrorCode::kInvalidArgument,
                "--regime rps requires --map <confusion map>");
}

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Goodness-of-pronunciation scoring from phoneme posteriors"};
  app.name(args.empty() ? "gop" : args[0]);
  app.footer(kFormatsHelp);
  app.require_subcommand(1);

  RunConfig config;
  std::string method = "pp-af";
  std::string regime = "ups";
  std::string cache = "prefix";

  auto* score = app.add_subcommand("score", "Score utterances");
  add_common(score, config, true);
  score->add_option("--method", method, "fa | pa-af | pp-af")
      ->check(CLI::IsMember({"fa", "pa-af", "pp-af"}));
  score->add_option("--regime", regime, "ups | rps")
      ->check(CLI::IsMember({"ups", "rps"}));
  score->add_option("--map", config.map, "Confusion map (required for rps)");
  score->add_option("--alignments", config.alignments,
                    "Precomputed alignment TSV for --method fa");
  score->add_option("--threshold", config.threshold,
                    "Mark scores below this value as mispronounced");
  score->add_option("--cache", cache, "prefix | none")
      ->check(CLI::IsMember({"prefix", "none"}));
  score->add_flag("--record-timing", config.record_timing,
                  "Store per-utterance wall_ms (makes output non-reproducible)");
  score->footer(kFormatsHelp);

  auto* align = app.add_subcommand("align", "Viterbi forced alignment as TSV");
  add_common(align, config, true);

  EvaluateArgs eval_args;
  auto* evaluate_cmd =
      app.add_subcommand("evaluate", "Metrics from score reports and labels");
  evaluate_cmd->add_option("--reports", eval_args.reports, "Score report JSONL")
      ->required();
  evaluate_cmd->add_option("--labels", eval_args.labels, "Labels TSV")
      ->required();
  evaluate_cmd->add_option("-o,--out", eval_args.output, "Output path");
  evaluate_cmd->add_flag("--no-clamp", eval_args.no_clamp,
                         "Do not clamp regression predictions to [0, 2]");
  evaluate_cmd->add_flag("--allow-unmatched", eval_args.allow_unmatched,
                         "Evaluate the matched subset when rows do not join");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Pass counts, DP cells and timings");
  add_common(bench, bench_args.config, false);
  bench->add_option("--map", bench_args.config.map, "Confusion map for RPS rows");
  bench->add_option("--repetitions", bench_args.repetitions, "Timing repetitions");
  bench->add_flag("--synthetic", bench_args.synthetic,
                  "Benchmark one synthetic utterance instead of files");
  bench->add_option("--phonemes", bench_args.synthetic_phonemes,
                    "Synthetic utterance length n");
  bench->add_option("--inventory", bench_args.synthetic_inventory,
                    "Synthetic inventory size V");
  bench->add_option("--substitutes", bench_args.synthetic_substitutes,
                    "Synthetic confusion-set size per phoneme");
  bench->add_option("--seed", bench_args.config.seed, "Synthetic posterior seed");

  auto* map_cmd = app.add_subcommand("map", "Confusion-map utilities");
  map_cmd->require_subcommand(1);
  fs::path map_file, map_vocab, map_out = "-";
  auto* map_validate =
      map_cmd->add_subcommand("validate", "Check a confusion map document");
  map_validate->add_option("file", map_file, "Confusion map JSON")->required();
  map_validate->add_option("--vocab", map_vocab, "Vocabulary sidecar")->required();
  auto* map_default =
      map_cmd->add_subcommand("default", "Print the built-in English map");
  map_default->add_option("--vocab", map_vocab,
                          "Vocabulary (default: built-in English IPA)");
  map_default->add_option("-o,--out", map_out, "Output path");

  InjectArgs inject_args;
  auto* inject =
      app.add_subcommand("inject-errors", "Rewrite sequences with artificial errors");
  inject->add_option("--canon", inject_args.canon, "Canonical TSV")->required();
  inject->add_option("--vocab", inject_args.vocab, "Vocabulary")->required();
  inject->add_option("--rules", inject_args.rules,
                     "Rewrite table (confusion-map format); default built-in");
  inject->add_option("--seed", inject_args.seed, "Random seed");
  inject->add_option("--rate", inject_args.rate, "Rewrite probability")
      ->check(CLI::Range(0.0, 1.0));
  inject->add_option("--out-spoken", inject_args.out_spoken,
                     "TSV of rewritten (spoken) sequences")->required();
  inject->add_option("--out-labels", inject_args.out_labels,
                     "Labels TSV over canonical positions")->required();

  SynthArgs synth_args;
  auto* synth = app.add_subcommand(
      "synth-posteriors", "Write one-hot-dominated posteriors for sequences");
  synth->add_option("--canon", synth_args.canon, "Sequences TSV")->required();
  synth->add_option("--vocab", synth_args.vocab, "Vocabulary")->required();
  synth->add_option("--out-dir", synth_args.out_dir, "Output directory")->required();
  synth->add_option("--seed", synth_args.options.seed, "Random seed");
  synth->add_option("--frames-per-phoneme", synth_args.options.frames_per_phoneme);
  synth->add_option("--dominant", synth_args.options.dominant_probability,
                    "Probability of the spelled token per frame");

  fs::path vocab_out = "-";
  auto* vocab_cmd =
      app.add_subcommand("vocab", "Print the built-in English IPA vocabulary");
  vocab_cmd->add_option("-o,--out", vocab_out, "Output path");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "ERROR\tusage\t" << e.what() << '\n';
    return kExitValidation;
  }

  try {
    config.method = parse_method(method);
    config.regime = parse_regime(regime);
    config.cache = cache == "none" ? CacheMode::kNone : CacheMode::kPrefix;
    if (*score) {
      try {
        validate(config);
      } catch (const Error& e) {
        err << "ERROR\tusage\t" << e.what() << '\n';
        return kExitValidation;
      }
      return cmd_score(config, out, err);
    }
    if (*align) return cmd_align(config, out, err);
    if (*evaluate_cmd) return cmd_evaluate(eval_args, out, err);
    if (*bench) return cmd_bench(bench_args, out, err);
    if (*map_validate) return cmd_map_validate(map_file, map_vocab, out);
    if (*map_default) return cmd_map_default(map_vocab, map_out, out, err);
    if (*inject) return cmd_inject(inject_args, out, err);
    if (*synth) return cmd_synth(synth_args, err);
    if (*vocab_cmd) {
      emit(vocab_out, english_inventory().to_json().dump(2) + "\n", out);
      return kExitOk;
    }
  } catch (const Error& e) {
    return report_error(err, "", e);
  } catch (const fs::filesystem_error& e) {
    err << "ERROR\tio\t" << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "ERROR\truntime\t" << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace gop::cli
