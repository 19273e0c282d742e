#include "playcall/core_hmm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "playcall/errors.hpp"

namespace playcall {

namespace {

double clamp_emission(double p) { return std::clamp(p, kEmissionFloor, 1.0 - kEmissionFloor); }

double emission(double pass_prob, int y) { return y == 1 ? pass_prob : 1.0 - pass_prob; }

void check_covariates(const TransitionCoefficients& coeffs, std::span<const double> x) {
  if (static_cast<int>(x.size()) != coeffs.n_covariates()) {
    throw DimensionError("covariate vector has length " + std::to_string(x.size()) + ", model expects " +
                         std::to_string(coeffs.n_covariates()));
  }
}

double log_likelihood_unchecked(const ModelSpec& spec, const HmmParams& params, const PlaySequence& seq) {
  if (seq.empty()) throw DomainError("sequence_log_likelihood: empty sequence");
  ForwardFilter filter(spec, params);
  for (const auto& play : seq.plays) filter.observe(play.y, play.x);
  return filter.log_likelihood();
}

}  // namespace

void ModelSpec::validate() const {
  if (n_states < 2) throw std::invalid_argument("ModelSpec: n_states must be >= 2");
  std::set<std::string> seen;
  for (const auto& name : covariate_names) {
    if (!seen.insert(name).second) throw std::invalid_argument("ModelSpec: duplicate covariate '" + name + "'");
  }
}

TransitionCoefficients::TransitionCoefficients(int n_states, int n_covariates)
    : n_states_(n_states),
      n_covariates_(n_covariates),
      values_(static_cast<std::size_t>(n_states * (n_states - 1) * (n_covariates + 1)), 0.0) {
  if (n_states < 2 || n_covariates < 0) throw std::invalid_argument("TransitionCoefficients: bad dimensions");
}

int TransitionCoefficients::row_index(int n_states, int from, int to) {
  // Row-major over (from, to) with the diagonal skipped.
  return from * (n_states - 1) + (to < from ? to : to - 1);
}

std::span<double> TransitionCoefficients::row(int from, int to) {
  const auto offset = static_cast<std::size_t>(row_index(n_states_, from, to) * row_length());
  return std::span<double>(values_).subspan(offset, static_cast<std::size_t>(row_length()));
}

std::span<const double> TransitionCoefficients::row(int from, int to) const {
  const auto offset = static_cast<std::size_t>(row_index(n_states_, from, to) * row_length());
  return std::span<const double>(values_).subspan(offset, static_cast<std::size_t>(row_length()));
}

TransitionCoefficients TransitionCoefficients::with_added_covariate() const {
  TransitionCoefficients out(n_states_, n_covariates_ + 1);
  for (int i = 0; i < n_states_; ++i) {
    for (int j = 0; j < n_states_; ++j) {
      if (i == j) continue;
      auto src = row(i, j);
      std::copy(src.begin(), src.end(), out.row(i, j).begin());
    }
  }
  return out;
}

void HmmParams::validate(const ModelSpec& spec) const {
  const auto n = static_cast<std::size_t>(spec.n_states);
  if (initial.delta.size() != n) throw DimensionError("delta length does not match n_states");
  if (emissions.pass_prob.size() != n) throw DimensionError("pass_prob length does not match n_states");
  if (coeffs.n_states() != spec.n_states || coeffs.n_covariates() != spec.n_covariates()) {
    throw DimensionError("transition coefficients do not match the model spec");
  }
}

void fill_transition_matrix(const TransitionCoefficients& coeffs, std::span<const double> x,
                            std::span<double> out) {
  check_covariates(coeffs, x);
  const int n = coeffs.n_states();
  const int k = coeffs.n_covariates();
  for (int i = 0; i < n; ++i) {
    double* eta = out.data() + static_cast<std::ptrdiff_t>(i * n);
    double row_max = 0.0;  // eta_ii
    for (int j = 0; j < n; ++j) {
      if (j == i) {
        eta[j] = 0.0;
        continue;
      }
      auto beta = coeffs.row(i, j);
      double value = beta[0];
      for (int l = 0; l < k; ++l) value += beta[static_cast<std::size_t>(l) + 1] * x[static_cast<std::size_t>(l)];
      eta[j] = value;
      row_max = std::max(row_max, value);
    }
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
      eta[j] = std::exp(eta[j] - row_max);
      total += eta[j];
    }
    for (int j = 0; j < n; ++j) eta[j] /= total;
  }
}

TransitionMatrix transition_matrix(const TransitionCoefficients& coeffs, std::span<const double> x) {
  TransitionMatrix gamma(coeffs.n_states());
  fill_transition_matrix(coeffs, x, gamma.data());
  return gamma;
}

ForwardFilter::ForwardFilter(const ModelSpec& spec, const HmmParams& params)
    : spec_(&spec),
      params_(&params),
      pass_prob_(params.emissions.pass_prob.size()),
      phi_(static_cast<std::size_t>(spec.n_states), 0.0),
      gamma_(static_cast<std::size_t>(spec.n_states * spec.n_states), 0.0),
      next_(static_cast<std::size_t>(spec.n_states), 0.0) {
  params.validate(spec);
  std::transform(params.emissions.pass_prob.begin(), params.emissions.pass_prob.end(), pass_prob_.begin(),
                 clamp_emission);
}

void ForwardFilter::observe(int y, std::span<const double> x) {
  const auto n = static_cast<std::size_t>(spec_->n_states);
  if (n_observed_ == 0) {
    check_covariates(params_->coeffs, x);
    for (std::size_t i = 0; i < n; ++i) next_[i] = params_->initial.delta[i] * emission(pass_prob_[i], y);
  } else {
    fill_transition_matrix(params_->coeffs, x, gamma_);
    for (std::size_t j = 0; j < n; ++j) {
      double mass = 0.0;
      for (std::size_t i = 0; i < n; ++i) mass += phi_[i] * gamma_[i * n + j];
      next_[j] = mass * emission(pass_prob_[j], y);
    }
  }
  const double scale = std::accumulate(next_.begin(), next_.end(), 0.0);
  log_likelihood_ += std::log(scale);
  for (std::size_t i = 0; i < n; ++i) phi_[i] = next_[i] / scale;
  ++n_observed_;
}

ForecastResult ForwardFilter::forecast(std::span<const double> next_x) const {
  if (n_observed_ == 0) throw DomainError("forecast_next: empty history");
  const auto n = static_cast<std::size_t>(spec_->n_states);
  fill_transition_matrix(params_->coeffs, next_x, gamma_);
  double numerator = 0.0;
  double denominator = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double predicted = 0.0;
    for (std::size_t i = 0; i < n; ++i) predicted += phi_[i] * gamma_[i * n + j];
    numerator += predicted * pass_prob_[j];
    denominator += predicted;
  }
  ForecastResult result;
  result.pass_prob = std::clamp(numerator / denominator, 0.0, 1.0);
  result.filtered_state_probs.assign(phi_.begin(), phi_.end());
  result.predicted_call = result.pass_prob >= 0.5 ? 1 : 0;
  result.n_history = n_observed_;
  return result;
}

double sequence_log_likelihood(const ModelSpec& spec, const HmmParams& params, const PlaySequence& seq) {
  return log_likelihood_unchecked(spec, params, seq);
}

double total_log_likelihood(const ModelSpec& spec, const HmmParams& params,
                            std::span<const PlaySequence> sequences) {
  if (sequences.empty()) throw DomainError("total_log_likelihood: no sequences");
  double total = 0.0;
  for (const auto& seq : sequences) total += log_likelihood_unchecked(spec, params, seq);
  return total;
}

ForecastResult forecast_first(const ModelSpec& spec, const HmmParams& params) {
  params.validate(spec);
  const auto& delta = params.initial.delta;
  double pass = 0.0;
  for (std::size_t i = 0; i < delta.size(); ++i) pass += delta[i] * clamp_emission(params.emissions.pass_prob[i]);
  ForecastResult result;
  result.pass_prob = std::clamp(pass / std::accumulate(delta.begin(), delta.end(), 0.0), 0.0, 1.0);
  result.filtered_state_probs = delta;
  result.predicted_call = result.pass_prob >= 0.5 ? 1 : 0;
  result.n_history = 0;
  return result;
}

ForecastResult forecast_next(const ModelSpec& spec, const HmmParams& params, const PlaySequence& history,
                             std::span<const double> next_x) {
  if (history.empty()) throw DomainError("forecast_next: empty history (use forecast_first)");
  ForwardFilter filter(spec, params);
  for (const auto& play : history.plays) filter.observe(play.y, play.x);
  return filter.forecast(next_x);
}

std::vector<double> filtered_state_probs(const ModelSpec& spec, const HmmParams& params,
                                         const PlaySequence& history) {
  if (history.empty()) throw DomainError("filtered_state_probs: empty history");
  ForwardFilter filter(spec, params);
  for (const auto& play : history.plays) filter.observe(play.y, play.x);
  auto probs = filter.state_probs();
  return {probs.begin(), probs.end()};
}

HmmParams permute_states(const HmmParams& params, std::span<const int> perm) {
  const int n = params.coeffs.n_states();
  if (static_cast<int>(perm.size()) != n) throw DimensionError("permute_states: permutation length mismatch");
  HmmParams out;
  out.initial.delta.resize(static_cast<std::size_t>(n));
  out.emissions.pass_prob.resize(static_cast<std::size_t>(n));
  out.coeffs = TransitionCoefficients(n, params.coeffs.n_covariates());
  for (int k = 0; k < n; ++k) {
    out.initial.delta[static_cast<std::size_t>(k)] = params.initial.delta[static_cast<std::size_t>(perm[k])];
    out.emissions.pass_prob[static_cast<std::size_t>(k)] =
        params.emissions.pass_prob[static_cast<std::size_t>(perm[k])];
  }
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      auto src = params.coeffs.row(perm[a], perm[b]);
      std::copy(src.begin(), src.end(), out.coeffs.row(a, b).begin());
    }
  }
  return out;
}

HmmParams canonicalize_states(const HmmParams& params) {
  std::vector<int> perm(params.emissions.pass_prob.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) {
    return params.emissions.pass_prob[static_cast<std::size_t>(a)] <
           params.emissions.pass_prob[static_cast<std::size_t>(b)];
  });
  return permute_states(params, perm);
}

}  // namespace playcall
