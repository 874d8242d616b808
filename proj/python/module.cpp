#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gop/ctc.hpp"
#include "gop/error.hpp"
#include "gop/eval.hpp"
#include "gop/io.hpp"
#include "gop/posterior.hpp"
#include "gop/scoring.hpp"

namespace py = pybind11;
using namespace gop;

namespace {

using LogArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

PosteriorMatrix to_matrix(const LogArray& log_probs, std::size_t blank) {
  if (log_probs.ndim() != 2)
    throw Error(ErrorCode::kDimensionMismatch, "expected a (T, V+1) array");
  const auto T = static_cast<std::size_t>(log_probs.shape(0));
  const auto C = static_cast<std::size_t>(log_probs.shape(1));
  std::vector<double> values(log_probs.data(), log_probs.data() + T * C);
  return PosteriorMatrix("", T, C, blank, std::move(values));
}

py::array_t<double> to_array(const PosteriorMatrix& m) {
  py::array_t<double> out({m.frames(), m.columns()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

std::vector<PhonemeId> to_ids(const std::vector<std::string>& symbols,
                              const PhonemeInventory& inv) {
  std::vector<PhonemeId> ids;
  for (const auto& s : symbols) ids.push_back(inv.id_of(s));
  return ids;
}

SubstitutionPolicy policy_for(const std::string& regime,
                              const PhonemeInventory& inv,
                              const std::optional<std::string>& map_json) {
  if (regime == "ups") return SubstitutionPolicy::unrestricted(inv);
  if (regime != "rps")
    throw Error(ErrorCode::kInvalidArgument, "regime must be 'ups' or 'rps'");
  if (!map_json)
    throw Error(ErrorCode::kInvalidArgument, "rps needs a confusion map");
  return SubstitutionPolicy::restricted(
      ConfusionMap::from_json(nlohmann::json::parse(*map_json), inv));
}

py::list score_rows(const GopReport& report, const PhonemeInventory& inv) {
  py::list rows;
  for (const auto& s : report.scores) {
    py::dict row;
    row["pos"] = s.pos;
    row["phoneme"] = inv.symbol(s.phoneme);
    row["score"] = s.score;
    row["best_perturbation"] =
        s.best_perturbation ? py::object(py::str(describe(*s.best_perturbation, inv)))
                            : py::object(py::none());
    row["loss_original"] = s.loss_original;
    row["loss_best"] = s.loss_best;
    rows.append(row);
  }
  return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Phoneme-level goodness-of-pronunciation scoring";

  static py::exception<Error> validation(m, "ValidationError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string msg =
          std::string(error_code_name(e.code())) + ": " + e.what();
      if (is_validation_error(e.code()))
        PyErr_SetString(validation.ptr(), msg.c_str());
      else
        PyErr_SetString(PyExc_RuntimeError, msg.c_str());
    }
  });

  py::class_<PhonemeInventory>(m, "Inventory")
      .def(py::init<std::vector<std::string>, std::size_t>(), py::arg("symbols"),
           py::arg("blank_index") = 0)
      .def_static("english", &english_inventory)
      .def_static("load", &PhonemeInventory::load, py::arg("path"))
      .def_property_readonly("symbols", &PhonemeInventory::symbols)
      .def_property_readonly("blank_index", &PhonemeInventory::blank_index)
      .def("id_of", &PhonemeInventory::id_of)
      .def("symbol", &PhonemeInventory::symbol)
      .def("__len__", &PhonemeInventory::column_count);

  m.def("default_map_json",
        [](const PhonemeInventory& inv) {
          return default_english_map(inv).map.to_json(inv).dump();
        },
        py::arg("inventory"));

  m.def("load_posteriors",
        [](const std::filesystem::path& path, const PhonemeInventory& vocab,
           bool renormalize) {
          LoadOptions opts;
          opts.renormalize = renormalize;
          return to_array(load_posteriors(path, vocab, opts));
        },
        py::arg("path"), py::arg("vocab"), py::arg("renormalize") = false);

  m.def("ctc_forward",
        [](const LogArray& log_probs, const std::vector<PhonemeId>& labels,
           std::size_t blank) {
          return ctc_forward(to_matrix(log_probs, blank), labels).log_likelihood;
        },
        "CTC log-likelihood of a label-id sequence", py::arg("log_probs"),
        py::arg("labels"), py::arg("blank") = 0);

  m.def("masked_ctc_forward",
        [](const LogArray& log_probs, const std::vector<PhonemeId>& labels,
           std::size_t pos, const std::vector<PhonemeId>& allowed,
           std::size_t blank) {
          return masked_ctc_forward(to_matrix(log_probs, blank), labels, pos,
                                    allowed)
              .log_likelihood;
        },
        py::arg("log_probs"), py::arg("labels"), py::arg("pos"),
        py::arg("allowed"), py::arg("blank") = 0);

  m.def("viterbi_align",
        [](const LogArray& log_probs, const std::vector<PhonemeId>& labels,
           std::size_t blank) {
          const auto a = ctc_viterbi_align(to_matrix(log_probs, blank), labels);
          std::vector<std::tuple<PhonemeId, std::size_t, std::size_t>> segs;
          for (const auto& s : a.segments)
            segs.emplace_back(s.phoneme, s.start_frame, s.end_frame);
          return py::make_tuple(segs, a.path_log_prob);
        },
        py::arg("log_probs"), py::arg("labels"), py::arg("blank") = 0);

  m.def("score",
        [](const LogArray& log_probs, const std::vector<std::string>& canonical,
           const PhonemeInventory& inv, const std::string& method,
           const std::string& regime, std::optional<std::string> map_json) {
          const auto matrix = to_matrix(log_probs, inv.blank_index());
          const auto seq = make_canonical("", to_ids(canonical, inv), inv);
          GopReport report;
          if (method == "fa") {
            report = gop_fa_report(matrix, seq);
          } else {
            const auto policy = policy_for(regime, inv, map_json);
            if (method == "pp-af")
              report = gop_pp_af(matrix, seq, policy);
            else if (method == "pa-af")
              report = gop_pa_af(matrix, seq, policy);
            else
              throw Error(ErrorCode::kInvalidArgument,
                          "method must be 'fa', 'pa-af' or 'pp-af'");
          }
          return score_rows(report, inv);
        },
        py::arg("log_probs"), py::arg("canonical"), py::arg("inventory"),
        py::arg("method") = "pp-af", py::arg("regime") = "ups",
        py::arg("map_json") = py::none());

  m.def("pass_count",
        [](const std::vector<std::string>& canonical, const PhonemeInventory& inv,
           const std::string& regime, std::optional<std::string> map_json) {
          return substitution_pass_count(to_ids(canonical, inv),
                                         policy_for(regime, inv, map_json));
        },
        py::arg("canonical"), py::arg("inventory"), py::arg("regime") = "ups",
        py::arg("map_json") = py::none());

  m.def("evaluate_json",
        [](const std::vector<double>& gop, const std::vector<bool>& mispronounced,
           std::optional<std::vector<double>> human, bool clamp) {
          if (gop.size() != mispronounced.size() ||
              (human && human->size() != gop.size()))
            throw Error(ErrorCode::kLengthMismatch, "input lengths differ");
          std::vector<LabeledScore> scores;
          for (std::size_t i = 0; i < gop.size(); ++i) {
            scores.push_back({"", i, gop[i], mispronounced[i], std::nullopt});
            if (human) scores.back().human_score = (*human)[i];
          }
          EvalOptions opts;
          opts.clamp_predictions = clamp;
          return to_json(evaluate(scores, opts)).dump();
        },
        py::arg("gop"), py::arg("mispronounced"), py::arg("human") = py::none(),
        py::arg("clamp") = true);
}
