#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "playcall/core_hmm.hpp"

namespace playcall {

// --- Working (unconstrained) parameterization ------------------------------
//
// Layout: logit(pass_prob_i) for i = 1..N, then log(delta_i / delta_N) for
// i = 1..N-1, then the transition coefficient block in TransitionCoefficients
// storage order.

int n_working_params(int n_states, int n_covariates);
int n_model_params(const ModelSpec& spec);

std::vector<double> pack_params(const ModelSpec& spec, const HmmParams& params);
HmmParams unpack_params(const ModelSpec& spec, std::span<const double> working);

// --- Configuration and results ---------------------------------------------

struct FitConfig {
  int max_iterations = 2000;
  double gradient_step = 1e-5;
  double convergence_tol = 1.5e-8;  // relative objective change, about sqrt(machine epsilon)
  int n_starts = 3;
  std::uint64_t rng_seed = 1;
  int jobs = 1;  // concurrent starts / candidate fits

  void validate() const;
};

struct CovariateScaling {
  std::string name;
  double mean = 0.0;
  double sd = 1.0;
  bool binary = false;
};

struct FitDiagnostics {
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;  // an emission ran into the clamp boundary
  int best_start = -1;
  int n_starts = 0;
  int n_starts_converged = 0;
  double initial_log_likelihood = 0.0;
  std::string message;
};

struct SelectionStep {
  std::string added;  // empty for the intercept-only base model
  double aic = 0.0;
  double log_likelihood = 0.0;
  int n_params = 0;
};

struct CandidateOutcome {
  std::string candidate;
  std::optional<double> aic;  // absent when the fit failed
  std::string warning;
};

struct SelectionTrace {
  std::vector<SelectionStep> steps;  // adopted path; steps[0] is the base model
  std::vector<std::vector<CandidateOutcome>> rounds;
};

struct DataFingerprint {
  int season_min = 0;
  int season_max = 0;
  std::int64_t n_plays = 0;
  std::int64_t n_sequences = 0;
};

struct FittedModel {
  std::string team;
  ModelSpec spec;
  HmmParams params;
  double log_likelihood = 0.0;
  int n_params = 0;
  double aic = 0.0;
  std::vector<CovariateScaling> covariate_scaling;  // aligned with spec.covariate_names
  FitDiagnostics diagnostics;
  std::optional<SelectionTrace> selection;
  DataFingerprint fingerprint;
};

double aic(double log_likelihood, int n_params);

DataFingerprint fingerprint_of(std::span<const PlaySequence> sequences);

// Maximum-likelihood fit. Runs config.n_starts randomized starts (plus the
// optional warm start, which is tried first) and keeps the best. States of the
// returned model are in canonical order. Covariate scaling on the result is
// identity; callers that standardized their data attach the real scaling.
FittedModel fit(const ModelSpec& spec, std::span<const PlaySequence> sequences, const FitConfig& config,
                const HmmParams* warm_start = nullptr);

// Random starting point following the documented initialization rules.
HmmParams initial_params(const ModelSpec& spec, std::uint64_t seed, int start_index);

struct SelectionResult {
  FittedModel model;
  SelectionTrace trace;
};

// Greedy AIC forward selection. Sequence covariate vectors must be aligned
// with `candidates`. A candidate named "a:b" is an interaction and only
// becomes eligible once both "a" and "b" are selected.
SelectionResult forward_select(const ModelSpec& base, const std::vector<std::string>& candidates,
                               std::span<const PlaySequence> sequences, const FitConfig& config);

// Keeps only the named columns, in the given order.
std::vector<PlaySequence> project_covariates(std::span<const PlaySequence> sequences,
                                             const std::vector<std::string>& names,
                                             const std::vector<std::string>& keep);

struct StandardizedData {
  std::vector<PlaySequence> sequences;
  std::vector<CovariateScaling> scaling;
};

// Centers and scales every non-binary column by its mean and population sd
// (sd 1 when the column is constant). Columns whose values are all 0/1 pass
// through with identity scaling.
StandardizedData standardize_covariates(std::span<const PlaySequence> sequences,
                                        const std::vector<std::string>& names);

void apply_scaling(std::span<double> x, std::span<const CovariateScaling> scaling);
std::vector<PlaySequence> apply_scaling(std::span<const PlaySequence> sequences,
                                        std::span<const CovariateScaling> scaling);

}  // namespace playcall
