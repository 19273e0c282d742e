#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "playcall/core_hmm.hpp"
#include "playcall/covariates.hpp"
#include "playcall/errors.hpp"
#include "playcall/estimation.hpp"
#include "playcall/evaluate.hpp"
#include "playcall/ingest.hpp"
#include "playcall/model_io.hpp"
#include "playcall/pipeline.hpp"
#include "playcall/serve.hpp"
#include "playcall/simulate.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace playcall {
namespace {

HmmParams make_params(const ModelSpec& spec, std::vector<double> delta, std::vector<double> pass_prob,
                      const std::vector<double>& coefficients) {
  HmmParams p;
  p.initial.delta = std::move(delta);
  p.emissions.pass_prob = std::move(pass_prob);
  p.coeffs = TransitionCoefficients(spec.n_states, spec.n_covariates());
  auto values = p.coeffs.values();
  if (coefficients.size() != values.size()) {
    throw DimensionError("expected " + std::to_string(values.size()) + " transition coefficients, got " +
                         std::to_string(coefficients.size()));
  }
  std::copy(coefficients.begin(), coefficients.end(), values.begin());
  p.validate(spec);
  return p;
}

std::vector<double> coefficient_list(const HmmParams& p) {
  const auto v = p.coeffs.values();
  return {v.begin(), v.end()};
}

FitConfig make_config(int n_starts, std::uint64_t seed, int max_iterations, int jobs) {
  FitConfig c;
  c.n_starts = n_starts;
  c.rng_seed = seed;
  c.max_iterations = max_iterations;
  c.jobs = jobs;
  return c;
}

py::object optional_value(const std::optional<double>& v) {
  return v ? py::object(py::float_(*v)) : py::object(py::none());
}

py::dict report_dict(const TeamReport& r) {
  py::dict d;
  d["team"] = r.team;
  d["n_plays"] = r.n_plays;
  d["n_total"] = r.n_total;
  d["accuracy"] = optional_value(r.accuracy);
  d["precision_pass"] = optional_value(r.precision_pass);
  d["recall_pass"] = optional_value(r.recall_pass);
  d["precision_run"] = optional_value(r.precision_run);
  d["recall_run"] = optional_value(r.recall_run);
  d["coverage"] = optional_value(r.coverage);
  return d;
}

// JSON crosses the boundary as text; the Python layer decodes it.
std::pair<int, std::string> response_pair(const ServiceResponse& r) { return {r.status, r.body.dump()}; }

}  // namespace
}  // namespace playcall

PYBIND11_MODULE(_core, m) {
  using namespace playcall;
  m.doc() = "Hidden Markov model play-call forecasting";

  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);
  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<SelectionError>(m, "SelectionError", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  py::class_<ModelSpec>(m, "ModelSpec")
      .def(py::init([](int n_states, std::vector<std::string> names) {
             ModelSpec s{n_states, std::move(names)};
             s.validate();
             return s;
           }),
           py::arg("n_states") = 2, py::arg("covariate_names") = std::vector<std::string>{})
      .def_readonly("n_states", &ModelSpec::n_states)
      .def_readonly("covariate_names", &ModelSpec::covariate_names)
      .def("__repr__", [](const ModelSpec& s) {
        return "ModelSpec(n_states=" + std::to_string(s.n_states) +
               ", n_covariates=" + std::to_string(s.n_covariates()) + ")";
      });

  py::class_<HmmParams>(m, "HmmParams")
      .def(py::init(&make_params), py::arg("spec"), py::arg("delta"), py::arg("pass_prob"),
           py::arg("coefficients"),
           "coefficients: per off-diagonal (i, j) row in row-major order, intercept then one slope per covariate")
      .def_property_readonly("delta", [](const HmmParams& p) { return p.initial.delta; })
      .def_property_readonly("pass_prob", [](const HmmParams& p) { return p.emissions.pass_prob; })
      .def_property_readonly("coefficients", &coefficient_list);

  py::class_<Play>(m, "Play")
      .def(py::init([](int y, std::vector<double> x) { return Play{y, std::move(x)}; }), py::arg("y"),
           py::arg("x") = std::vector<double>{})
      .def_readwrite("y", &Play::y)
      .def_readwrite("x", &Play::x);

  py::class_<PlaySequence>(m, "PlaySequence")
      .def(py::init([](std::vector<Play> plays, std::string match_id, std::string team_id, int season) {
             PlaySequence s;
             s.plays = std::move(plays);
             s.match_id = std::move(match_id);
             s.team_id = std::move(team_id);
             s.season = season;
             return s;
           }),
           py::arg("plays"), py::arg("match_id") = "", py::arg("team_id") = "", py::arg("season") = 0)
      .def_readwrite("plays", &PlaySequence::plays)
      .def_readwrite("match_id", &PlaySequence::match_id)
      .def_readwrite("team_id", &PlaySequence::team_id)
      .def_readwrite("season", &PlaySequence::season)
      .def("__len__", [](const PlaySequence& s) { return s.plays.size(); });

  py::class_<ForecastResult>(m, "ForecastResult")
      .def_readonly("pass_prob", &ForecastResult::pass_prob)
      .def_readonly("filtered_state_probs", &ForecastResult::filtered_state_probs)
      .def_readonly("predicted_call", &ForecastResult::predicted_call)
      .def_readonly("n_history", &ForecastResult::n_history);

  py::class_<FittedModel>(m, "FittedModel")
      .def_readwrite("team", &FittedModel::team)
      .def_readonly("spec", &FittedModel::spec)
      .def_readonly("params", &FittedModel::params)
      .def_readonly("log_likelihood", &FittedModel::log_likelihood)
      .def_readonly("n_params", &FittedModel::n_params)
      .def_readonly("aic", &FittedModel::aic)
      .def_property_readonly("converged", [](const FittedModel& f) { return f.diagnostics.converged; })
      .def_property_readonly("degenerate", [](const FittedModel& f) { return f.diagnostics.degenerate; })
      .def("to_json", [](const FittedModel& f) { return model_to_json(f).dump(); })
      .def_static("from_json", [](const std::string& text) { return model_from_json(json::parse(text)); })
      .def("save", [](const FittedModel& f, const std::filesystem::path& p) { save_model(f, p); })
      .def_static("load", [](const std::filesystem::path& p) { return load_model(p); });

  m.def("base_covariate_names", &base_covariate_names);
  m.def("selection_candidates", &selection_candidates);
  m.def("full_covariate_set", &full_covariate_set);

  m.def("sequence_log_likelihood", &sequence_log_likelihood, py::arg("spec"), py::arg("params"),
        py::arg("sequence"));
  m.def(
      "total_log_likelihood",
      [](const ModelSpec& spec, const HmmParams& params, const std::vector<PlaySequence>& seqs) {
        return total_log_likelihood(spec, params, seqs);
      },
      py::arg("spec"), py::arg("params"), py::arg("sequences"));
  m.def(
      "forecast_next",
      [](const ModelSpec& spec, const HmmParams& params, const PlaySequence& history,
         const std::vector<double>& next_x) { return forecast_next(spec, params, history, next_x); },
      py::arg("spec"), py::arg("params"), py::arg("history"), py::arg("next_x") = std::vector<double>{});
  m.def("forecast_first", &forecast_first, py::arg("spec"), py::arg("params"));
  m.def("filtered_state_probs", &filtered_state_probs, py::arg("spec"), py::arg("params"), py::arg("history"));
  m.def("canonicalize_states", &canonicalize_states, py::arg("params"));
  m.def("n_model_params", &n_model_params, py::arg("spec"));
  m.def("aic", &aic, py::arg("log_likelihood"), py::arg("n_params"));

  m.def(
      "simulate",
      [](const ModelSpec& spec, const HmmParams& params, int n_sequences, int plays_per_sequence,
         std::uint64_t seed) { return simulate_sequences(spec, params, n_sequences, plays_per_sequence, seed); },
      py::arg("spec"), py::arg("params"), py::arg("n_sequences"), py::arg("plays_per_sequence"), py::arg("seed"),
      "Covariates are drawn from the default standard normal sampler.");

  m.def(
      "fit",
      [](const ModelSpec& spec, const std::vector<PlaySequence>& seqs, int n_starts, std::uint64_t seed,
         int max_iterations, int jobs) {
        py::gil_scoped_release release;
        return fit(spec, seqs, make_config(n_starts, seed, max_iterations, jobs));
      },
      py::arg("spec"), py::arg("sequences"), py::arg("n_starts") = 3, py::arg("seed") = 1,
      py::arg("max_iterations") = FitConfig{}.max_iterations, py::arg("jobs") = 1);

  m.def(
      "forward_select",
      [](int n_states, const std::vector<std::string>& candidates, const std::vector<PlaySequence>& seqs,
         int n_starts, std::uint64_t seed, int max_iterations, int jobs) {
        SelectionResult result;
        {
          py::gil_scoped_release release;
          result = forward_select(ModelSpec{n_states, {}}, candidates, seqs,
                                  make_config(n_starts, seed, max_iterations, jobs));
        }
        result.model.selection = result.trace;
        std::vector<std::string> added;
        std::vector<double> aics;
        for (const auto& step : result.trace.steps) {
          added.push_back(step.added);
          aics.push_back(step.aic);
        }
        return py::make_tuple(result.model, added, aics);
      },
      py::arg("n_states"), py::arg("candidates"), py::arg("sequences"), py::arg("n_starts") = 3,
      py::arg("seed") = 1, py::arg("max_iterations") = FitConfig{}.max_iterations, py::arg("jobs") = 1,
      "Returns (model, added, aic) where added[0] is '' for the base model.");

  m.def(
      "ingest",
      [](const std::filesystem::path& csv, const std::filesystem::path& out,
         const std::map<std::string, std::string>& mapping, int train_first, int train_last, int test) {
        ColumnMapping cm;
        for (const auto& [key, column] : mapping) cm.set(key, column);
        const SeasonRange range{train_first, train_last, test};
        const auto summary = ingest_csv(csv, cm, range);
        write_store(out, summary, range);
        py::dict d;
        d["input_rows"] = summary.parse.n_input_rows;
        d["filtered"] = summary.parse.n_filtered;
        d["accepted"] = summary.parse.rows.size();
        d["rejected"] = summary.parse.rejections.size();
        d["train_sequences"] = summary.split.train.size();
        d["test_sequences"] = summary.split.test.size();
        d["warnings"] = summary.split.warnings;
        return d;
      },
      py::arg("csv"), py::arg("out"), py::arg("mapping") = std::map<std::string, std::string>{},
      py::arg("train_first") = 2009, py::arg("train_last") = 2017, py::arg("test") = 2018);

  m.def(
      "read_store",
      [](const std::filesystem::path& dir, const std::string& split) {
        auto s = read_store(dir, split);
        return py::make_tuple(s.covariate_names, s.by_team);
      },
      py::arg("dir"), py::arg("split"), "Returns (covariate_names, {team: [PlaySequence]}).");

  m.def(
      "fit_team",
      [](const std::string& team, const std::vector<PlaySequence>& raw, const std::vector<std::string>& base_names,
         bool select, int n_states, int n_starts, std::uint64_t seed, int max_iterations, int jobs) {
        TeamFitOptions options{n_states, select, make_config(n_starts, seed, max_iterations, jobs)};
        py::gil_scoped_release release;
        return fit_team(team, raw, base_names, options);
      },
      py::arg("team"), py::arg("sequences"), py::arg("base_names"), py::arg("select") = false,
      py::arg("n_states") = 2, py::arg("n_starts") = 3, py::arg("seed") = 1,
      py::arg("max_iterations") = FitConfig{}.max_iterations, py::arg("jobs") = 1);

  m.def(
      "evaluate_team",
      [](const FittedModel& model, const std::vector<std::string>& base_names, const std::vector<PlaySequence>& raw,
         std::optional<double> threshold, bool include_first_play) {
        return report_dict(evaluate_team(model, base_names, raw, EvaluateOptions{threshold, include_first_play}));
      },
      py::arg("model"), py::arg("base_names"), py::arg("sequences"), py::arg("threshold") = py::none(),
      py::arg("include_first_play") = true);

  py::class_<SessionService>(m, "_SessionService")
      .def(py::init([](std::map<std::string, FittedModel> models, double threshold) {
             ServiceConfig config;
             config.threshold = threshold;
             return std::make_unique<SessionService>(std::move(models), config);
           }),
           py::arg("models"), py::arg("threshold") = 0.7)
      .def("health", [](const SessionService& s) { return response_pair(s.health()); })
      .def("create_session",
           [](SessionService& s, const std::string& body) { return response_pair(s.create_session(json::parse(body))); })
      .def("forecast",
           [](const SessionService& s, const std::string& id, const std::string& body) {
             return response_pair(s.forecast(id, json::parse(body)));
           })
      .def("record_play",
           [](SessionService& s, const std::string& id, const std::string& body) {
             return response_pair(s.record_play(id, json::parse(body)));
           })
      .def("get_session", [](const SessionService& s, const std::string& id) { return response_pair(s.get_session(id)); });

  m.def("load_model_directory", &load_model_directory, py::arg("dir"));
}
