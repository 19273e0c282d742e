#include "playcall/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "playcall/covariates.hpp"
#include "playcall/errors.hpp"

namespace playcall {

namespace {

std::optional<double> ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string fmt_rate(const std::optional<double>& v, bool csv) {
  if (!v) return csv ? "" : "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, csv ? "%.6f" : "%.3f", *v);
  return buf;
}

}  // namespace

std::vector<PlaySequence> prepare_sequences(const FittedModel& model, const std::vector<std::string>& base_names,
                                            std::span<const PlaySequence> raw) {
  const CovariateExpander expander(base_names, model.spec.covariate_names);
  return apply_scaling(expander.expand(raw), model.covariate_scaling);
}

std::vector<double> prepare_covariates(const FittedModel& model, const std::vector<std::string>& base_names,
                                       std::span<const double> raw) {
  const CovariateExpander expander(base_names, model.spec.covariate_names);
  auto x = expander.expand(raw);
  apply_scaling(x, model.covariate_scaling);
  return x;
}

std::vector<ForecastResult> predict_match(const FittedModel& model, const PlaySequence& seq) {
  const auto k = static_cast<std::size_t>(model.spec.n_covariates());
  for (const auto& play : seq.plays) {
    if (play.x.size() != k) {
      throw DimensionError("predict_match: play covariates have length " + std::to_string(play.x.size()) +
                           ", model expects " + std::to_string(k));
    }
  }
  std::vector<ForecastResult> out;
  out.reserve(seq.plays.size());
  if (seq.empty()) return out;
  out.push_back(forecast_first(model.spec, model.params));
  ForwardFilter filter(model.spec, model.params);
  for (std::size_t p = 1; p < seq.plays.size(); ++p) {
    filter.observe(seq.plays[p - 1].y, seq.plays[p - 1].x);
    out.push_back(filter.forecast(seq.plays[p].x));
  }
  return out;
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp_pass += o.tp_pass;
  fp_pass += o.fp_pass;
  fn_pass += o.fn_pass;
  tn_pass += o.tn_pass;
  return *this;
}

ScoreResult score(std::span<const ForecastResult> forecasts, std::span<const int> actuals,
                  std::optional<double> threshold) {
  if (forecasts.size() != actuals.size()) {
    throw std::invalid_argument("score: " + std::to_string(forecasts.size()) + " forecasts vs " +
                                std::to_string(actuals.size()) + " actual calls");
  }
  ScoreResult result;
  result.n_total = static_cast<std::int64_t>(forecasts.size());
  for (std::size_t i = 0; i < forecasts.size(); ++i) {
    const auto& f = forecasts[i];
    if (threshold && std::max(f.pass_prob, 1.0 - f.pass_prob) < *threshold) continue;
    const bool predicted_pass = f.predicted_call == 1;
    const bool actual_pass = actuals[i] == 1;
    auto& c = result.counts;
    if (predicted_pass && actual_pass) ++c.tp_pass;
    else if (predicted_pass) ++c.fp_pass;
    else if (actual_pass) ++c.fn_pass;
    else ++c.tn_pass;
  }
  result.coverage = ratio(result.counts.total(), result.n_total);
  return result;
}

TeamReport make_team_report(const std::string& team, const ScoreResult& s) {
  const auto& c = s.counts;
  TeamReport r;
  r.team = team;
  r.n_plays = c.total();
  r.n_total = s.n_total;
  r.counts = c;
  r.accuracy = ratio(c.tp_pass + c.tn_pass, c.total());
  r.precision_pass = ratio(c.tp_pass, c.tp_pass + c.fp_pass);
  r.recall_pass = ratio(c.tp_pass, c.tp_pass + c.fn_pass);
  r.precision_run = ratio(c.tn_pass, c.tn_pass + c.fn_pass);
  r.recall_run = ratio(c.tn_pass, c.tn_pass + c.fp_pass);
  r.coverage = s.coverage;
  return r;
}

EvaluationReport aggregate(std::vector<TeamReport> per_team) {
  EvaluationReport report;
  ScoreResult pooled;
  double weighted = 0.0;
  std::int64_t weight = 0;
  for (const auto& t : per_team) {
    pooled.counts += t.counts;
    pooled.n_total += t.n_total;
    if (t.accuracy) {
      weighted += static_cast<double>(t.n_plays) * *t.accuracy;
      weight += t.n_plays;
      report.min_accuracy = report.min_accuracy ? std::min(*report.min_accuracy, *t.accuracy) : *t.accuracy;
      report.max_accuracy = report.max_accuracy ? std::max(*report.max_accuracy, *t.accuracy) : *t.accuracy;
    }
  }
  if (weight > 0) report.weighted_accuracy = weighted / static_cast<double>(weight);
  pooled.coverage = ratio(pooled.counts.total(), pooled.n_total);
  report.overall = make_team_report("ALL", pooled);
  report.overall.accuracy = report.weighted_accuracy;
  report.teams = std::move(per_team);
  return report;
}

TeamReport evaluate_team(const FittedModel& model, const std::vector<std::string>& base_names,
                         std::span<const PlaySequence> raw_matches, const EvaluateOptions& options) {
  const auto prepared = prepare_sequences(model, base_names, raw_matches);
  std::vector<ForecastResult> forecasts;
  std::vector<int> actuals;
  for (const auto& seq : prepared) {
    const auto match = predict_match(model, seq);
    for (std::size_t p = options.include_first_play ? 0 : 1; p < match.size(); ++p) {
      forecasts.push_back(match[p]);
      actuals.push_back(seq.plays[p].y);
    }
  }
  return make_team_report(model.team, score(forecasts, actuals, options.threshold));
}

void write_report_text(std::ostream& out, const EvaluationReport& report) {
  char line[256];
  std::snprintf(line, sizeof line, "%-6s %8s %9s %9s %9s %9s %9s %9s\n", "team", "n_plays", "accuracy", "prec_pass",
                "rec_pass", "prec_run", "rec_run", "coverage");
  out << line;
  auto row = [&](const TeamReport& t) {
    std::snprintf(line, sizeof line, "%-6s %8lld %9s %9s %9s %9s %9s %9s\n", t.team.c_str(),
                  static_cast<long long>(t.n_plays), fmt_rate(t.accuracy, false).c_str(),
                  fmt_rate(t.precision_pass, false).c_str(), fmt_rate(t.recall_pass, false).c_str(),
                  fmt_rate(t.precision_run, false).c_str(), fmt_rate(t.recall_run, false).c_str(),
                  fmt_rate(t.coverage, false).c_str());
    out << line;
  };
  for (const auto& t : report.teams) row(t);
  row(report.overall);
  if (report.min_accuracy) {
    out << "accuracy range: " << fmt_rate(report.min_accuracy, false) << " - " << fmt_rate(report.max_accuracy, false)
        << '\n';
  }
}

void write_report_csv(std::ostream& out, const EvaluationReport& report) {
  out << "team,n_plays,accuracy,precision_pass,recall_pass,precision_run,recall_run,coverage\n";
  auto row = [&](const TeamReport& t) {
    out << t.team << ',' << t.n_plays << ',' << fmt_rate(t.accuracy, true) << ',' << fmt_rate(t.precision_pass, true)
        << ',' << fmt_rate(t.recall_pass, true) << ',' << fmt_rate(t.precision_run, true) << ','
        << fmt_rate(t.recall_run, true) << ',' << fmt_rate(t.coverage, true) << '\n';
  };
  for (const auto& t : report.teams) row(t);
  row(report.overall);
}

}  // namespace playcall
