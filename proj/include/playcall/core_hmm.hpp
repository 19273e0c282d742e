#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace playcall {

// Emission probabilities are clamped to this distance from {0, 1} whenever a
// likelihood or forecast is evaluated.
inline constexpr double kEmissionFloor = 1e-10;

struct ModelSpec {
  int n_states = 2;
  std::vector<std::string> covariate_names;

  int n_covariates() const { return static_cast<int>(covariate_names.size()); }
  // Throws std::invalid_argument on n_states < 2 or duplicate names.
  void validate() const;
};

// Linear predictors for the off-diagonal transition logits. Row (i, j), i != j,
// holds the intercept followed by one slope per covariate. Rows are stored in
// row-major order of (i, j) with the diagonal skipped.
class TransitionCoefficients {
 public:
  TransitionCoefficients() = default;
  TransitionCoefficients(int n_states, int n_covariates);

  int n_states() const { return n_states_; }
  int n_covariates() const { return n_covariates_; }
  int n_rows() const { return n_states_ * (n_states_ - 1); }
  int row_length() const { return n_covariates_ + 1; }

  static int row_index(int n_states, int from, int to);

  double& intercept(int from, int to) { return row(from, to)[0]; }
  double intercept(int from, int to) const { return row(from, to)[0]; }
  double& slope(int from, int to, int l) { return row(from, to)[l + 1]; }
  double slope(int from, int to, int l) const { return row(from, to)[l + 1]; }

  std::span<double> row(int from, int to);
  std::span<const double> row(int from, int to) const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  // Copy with an extra zero slope column appended to every row.
  TransitionCoefficients with_added_covariate() const;

 private:
  int n_states_ = 0;
  int n_covariates_ = 0;
  std::vector<double> values_;
};

struct EmissionParams {
  std::vector<double> pass_prob;  // Pr(pass | state i)
};

struct InitialDistribution {
  std::vector<double> delta;
};

struct HmmParams {
  InitialDistribution initial;
  EmissionParams emissions;
  TransitionCoefficients coeffs;

  // Throws DimensionError if the pieces disagree with the ModelSpec.
  void validate(const ModelSpec& spec) const;
};

struct Play {
  int y = 0;  // 1 = pass, 0 = run
  std::vector<double> x;
};

struct PlaySequence {
  std::string match_id;
  std::string team_id;
  int season = 0;
  std::vector<Play> plays;

  std::size_t size() const { return plays.size(); }
  bool empty() const { return plays.empty(); }
};

class TransitionMatrix {
 public:
  explicit TransitionMatrix(int n_states) : n_(n_states), gamma_(n_states * n_states, 0.0) {}

  int n_states() const { return n_; }
  double operator()(int from, int to) const { return gamma_[from * n_ + to]; }
  double& operator()(int from, int to) { return gamma_[from * n_ + to]; }
  std::span<const double> data() const { return gamma_; }
  std::span<double> data() { return gamma_; }

 private:
  int n_;
  std::vector<double> gamma_;
};

struct ForecastResult {
  double pass_prob = 0.0;
  std::vector<double> filtered_state_probs;
  int predicted_call = 1;
  int n_history = 0;

  double run_prob() const { return 1.0 - pass_prob; }
};

// Multinomial-logit transition matrix for one covariate vector. Each row is a
// softmax over eta with eta_ii = 0, evaluated after subtracting the row max.
TransitionMatrix transition_matrix(const TransitionCoefficients& coeffs, std::span<const double> x);

// Writes the matrix into `out` (size n_states^2, row-major) without allocating.
void fill_transition_matrix(const TransitionCoefficients& coeffs, std::span<const double> x,
                            std::span<double> out);

double sequence_log_likelihood(const ModelSpec& spec, const HmmParams& params, const PlaySequence& seq);

double total_log_likelihood(const ModelSpec& spec, const HmmParams& params,
                            std::span<const PlaySequence> sequences);

ForecastResult forecast_next(const ModelSpec& spec, const HmmParams& params, const PlaySequence& history,
                             std::span<const double> next_x);

// Forecast for the opening play of a match: mixes emissions under delta.
ForecastResult forecast_first(const ModelSpec& spec, const HmmParams& params);

std::vector<double> filtered_state_probs(const ModelSpec& spec, const HmmParams& params,
                                         const PlaySequence& history);

// Scaled forward recursion over one match, advanced a play at a time. The
// stored vector is the normalized forward vector, i.e. the filtered state
// distribution; the log of every normalizing constant is accumulated.
//
// `spec` and `params` must outlive the filter.
class ForwardFilter {
 public:
  ForwardFilter(const ModelSpec& spec, const HmmParams& params);

  void observe(int y, std::span<const double> x);
  ForecastResult forecast(std::span<const double> next_x) const;

  std::span<const double> state_probs() const { return phi_; }
  double log_likelihood() const { return log_likelihood_; }
  int n_observed() const { return n_observed_; }

 private:
  const ModelSpec* spec_;
  const HmmParams* params_;
  std::vector<double> pass_prob_;  // clamped
  std::vector<double> phi_;
  mutable std::vector<double> gamma_;
  std::vector<double> next_;
  double log_likelihood_ = 0.0;
  int n_observed_ = 0;
};

// Reorders states by ascending pass probability, permuting delta and the
// transition coefficient rows/columns consistently.
HmmParams canonicalize_states(const HmmParams& params);

// Applies an explicit state relabelling: new state k is old state perm[k].
HmmParams permute_states(const HmmParams& params, std::span<const int> perm);

}  // namespace playcall
