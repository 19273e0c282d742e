#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "playcall/core_hmm.hpp"
#include "playcall/estimation.hpp"

namespace playcall {

// Maps raw base-covariate sequences onto the model's covariates (including
// interactions) and applies the model's training scaling.
std::vector<PlaySequence> prepare_sequences(const FittedModel& model, const std::vector<std::string>& base_names,
                                            std::span<const PlaySequence> raw);
std::vector<double> prepare_covariates(const FittedModel& model, const std::vector<std::string>& base_names,
                                       std::span<const double> raw);

// One-step-ahead forecasts for every play of a prepared sequence. Play 1 is
// forecast from delta; play p >= 2 conditions on y_1..y_{p-1} and the
// covariates of play p only.
std::vector<ForecastResult> predict_match(const FittedModel& model, const PlaySequence& seq);

struct ConfusionCounts {
  std::int64_t tp_pass = 0;
  std::int64_t fp_pass = 0;
  std::int64_t fn_pass = 0;
  std::int64_t tn_pass = 0;

  std::int64_t total() const { return tp_pass + fp_pass + fn_pass + tn_pass; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
};

struct ScoreResult {
  ConfusionCounts counts;
  std::int64_t n_total = 0;
  std::optional<double> coverage;  // scored / total; absent for empty input
};

// Classifies by predicted_call. With a threshold only plays whose larger
// class probability max(p, 1 - p) reaches it are scored.
ScoreResult score(std::span<const ForecastResult> forecasts, std::span<const int> actuals,
                  std::optional<double> threshold = std::nullopt);

struct TeamReport {
  std::string team;
  std::int64_t n_plays = 0;  // scored plays
  std::int64_t n_total = 0;  // forecast plays before gating
  ConfusionCounts counts;
  std::optional<double> accuracy;
  std::optional<double> precision_pass;
  std::optional<double> recall_pass;
  std::optional<double> precision_run;
  std::optional<double> recall_run;
  std::optional<double> coverage;
};

TeamReport make_team_report(const std::string& team, const ScoreResult& score);

struct EvaluationReport {
  std::vector<TeamReport> teams;
  TeamReport overall;  // "ALL" row: pooled counts
  std::optional<double> weighted_accuracy;
  std::optional<double> min_accuracy;
  std::optional<double> max_accuracy;
};

// Play-weighted aggregation: weighted accuracy = sum(n * acc) / sum(n).
EvaluationReport aggregate(std::vector<TeamReport> per_team);

struct EvaluateOptions {
  std::optional<double> threshold;
  bool include_first_play = true;
};

// Forecasts and scores every match of one team.
TeamReport evaluate_team(const FittedModel& model, const std::vector<std::string>& base_names,
                         std::span<const PlaySequence> raw_matches, const EvaluateOptions& options = {});

void write_report_text(std::ostream& out, const EvaluationReport& report);
void write_report_csv(std::ostream& out, const EvaluationReport& report);

}  // namespace playcall
