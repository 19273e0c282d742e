#include "playcall/model_io.hpp"

#include <fstream>

#include "playcall/errors.hpp"

namespace playcall {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "playcall-hmm-model";

json trace_to_json(const SelectionTrace& trace) {
  json steps = json::array();
  for (const auto& s : trace.steps) {
    steps.push_back({{"added", s.added}, {"aic", s.aic}, {"log_likelihood", s.log_likelihood}, {"n_params", s.n_params}});
  }
  json rounds = json::array();
  for (const auto& round : trace.rounds) {
    json r = json::array();
    for (const auto& c : round) {
      json entry{{"candidate", c.candidate}, {"aic", c.aic ? json(*c.aic) : json(nullptr)}};
      if (!c.warning.empty()) entry["warning"] = c.warning;
      r.push_back(std::move(entry));
    }
    rounds.push_back(std::move(r));
  }
  return {{"steps", steps}, {"rounds", rounds}};
}

SelectionTrace trace_from_json(const json& doc) {
  SelectionTrace trace;
  for (const auto& s : doc.at("steps")) {
    trace.steps.push_back({s.at("added").get<std::string>(), s.at("aic").get<double>(),
                           s.at("log_likelihood").get<double>(), s.at("n_params").get<int>()});
  }
  for (const auto& r : doc.at("rounds")) {
    std::vector<CandidateOutcome> round;
    for (const auto& c : r) {
      CandidateOutcome outcome;
      outcome.candidate = c.at("candidate").get<std::string>();
      if (!c.at("aic").is_null()) outcome.aic = c.at("aic").get<double>();
      outcome.warning = c.value("warning", "");
      round.push_back(std::move(outcome));
    }
    trace.rounds.push_back(std::move(round));
  }
  return trace;
}

}  // namespace

json model_to_json(const FittedModel& model) {
  const auto& spec = model.spec;
  json transitions = json::array();
  for (int i = 0; i < spec.n_states; ++i) {
    for (int j = 0; j < spec.n_states; ++j) {
      if (i == j) continue;
      auto row = model.params.coeffs.row(i, j);
      transitions.push_back({{"from", i}, {"to", j}, {"beta", std::vector<double>(row.begin(), row.end())}});
    }
  }
  json scaling = json::array();
  for (const auto& s : model.covariate_scaling) {
    scaling.push_back({{"name", s.name}, {"mean", s.mean}, {"sd", s.sd}, {"binary", s.binary}});
  }
  const auto& d = model.diagnostics;
  json doc{
      {"format", kFormat},
      {"version", 1},
      {"team", model.team},
      {"spec", {{"n_states", spec.n_states}, {"covariate_names", spec.covariate_names}}},
      {"parameters",
       {{"delta", model.params.initial.delta},
        {"pass_prob", model.params.emissions.pass_prob},
        {"transitions", transitions}}},
      {"covariate_scaling", scaling},
      {"log_likelihood", model.log_likelihood},
      {"n_params", model.n_params},
      {"aic", model.aic},
      {"diagnostics",
       {{"iterations", d.iterations},
        {"converged", d.converged},
        {"degenerate", d.degenerate},
        {"best_start", d.best_start},
        {"n_starts", d.n_starts},
        {"n_starts_converged", d.n_starts_converged},
        {"initial_log_likelihood", d.initial_log_likelihood},
        {"message", d.message}}},
      {"training_data",
       {{"season_min", model.fingerprint.season_min},
        {"season_max", model.fingerprint.season_max},
        {"n_plays", model.fingerprint.n_plays},
        {"n_sequences", model.fingerprint.n_sequences}}},
      {"selection", model.selection ? trace_to_json(*model.selection) : json(nullptr)}};
  return doc;
}

FittedModel model_from_json(const json& doc) {
  if (doc.value("format", "") != kFormat) throw SchemaError("not a playcall model document");
  FittedModel model;
  model.team = doc.at("team").get<std::string>();
  model.spec.n_states = doc.at("spec").at("n_states").get<int>();
  model.spec.covariate_names = doc.at("spec").at("covariate_names").get<std::vector<std::string>>();
  model.spec.validate();

  const auto& p = doc.at("parameters");
  model.params.initial.delta = p.at("delta").get<std::vector<double>>();
  model.params.emissions.pass_prob = p.at("pass_prob").get<std::vector<double>>();
  model.params.coeffs = TransitionCoefficients(model.spec.n_states, model.spec.n_covariates());
  for (const auto& t : p.at("transitions")) {
    const auto beta = t.at("beta").get<std::vector<double>>();
    auto row = model.params.coeffs.row(t.at("from").get<int>(), t.at("to").get<int>());
    if (beta.size() != row.size()) throw SchemaError("transition row has the wrong length");
    std::copy(beta.begin(), beta.end(), row.begin());
  }
  model.params.validate(model.spec);

  for (const auto& s : doc.at("covariate_scaling")) {
    model.covariate_scaling.push_back(
        {s.at("name").get<std::string>(), s.at("mean").get<double>(), s.at("sd").get<double>(), s.at("binary").get<bool>()});
  }
  if (model.covariate_scaling.size() != model.spec.covariate_names.size()) {
    throw SchemaError("covariate scaling does not match the covariate list");
  }
  model.log_likelihood = doc.at("log_likelihood").get<double>();
  model.n_params = doc.at("n_params").get<int>();
  model.aic = doc.at("aic").get<double>();

  const auto& d = doc.at("diagnostics");
  model.diagnostics.iterations = d.at("iterations").get<int>();
  model.diagnostics.converged = d.at("converged").get<bool>();
  model.diagnostics.degenerate = d.at("degenerate").get<bool>();
  model.diagnostics.best_start = d.at("best_start").get<int>();
  model.diagnostics.n_starts = d.at("n_starts").get<int>();
  model.diagnostics.n_starts_converged = d.at("n_starts_converged").get<int>();
  model.diagnostics.initial_log_likelihood = d.at("initial_log_likelihood").get<double>();
  model.diagnostics.message = d.at("message").get<std::string>();

  const auto& t = doc.at("training_data");
  model.fingerprint.season_min = t.at("season_min").get<int>();
  model.fingerprint.season_max = t.at("season_max").get<int>();
  model.fingerprint.n_plays = t.at("n_plays").get<std::int64_t>();
  model.fingerprint.n_sequences = t.at("n_sequences").get<std::int64_t>();

  if (doc.contains("selection") && !doc.at("selection").is_null()) model.selection = trace_from_json(doc.at("selection"));
  return model;
}

void save_model(const FittedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file " + path.string());
  out << model_to_json(model).dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing model file " + path.string());
}

FittedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  return model_from_json(json::parse(in));
}

}  // namespace playcall
