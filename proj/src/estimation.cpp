#include "playcall/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "playcall/parallel.hpp"
#include "playcall/errors.hpp"
#include "playcall/optimizer.hpp"

namespace playcall {

namespace {

// Fitted emissions closer than this to 0 or 1 count as having hit the clamp.
constexpr double kDegenerateEmission = 1e-8;

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

std::int64_t total_plays(std::span<const PlaySequence> sequences) {
  std::int64_t n = 0;
  for (const auto& s : sequences) n += static_cast<std::int64_t>(s.size());
  return n;
}

void check_sequence_dimensions(const ModelSpec& spec, std::span<const PlaySequence> sequences) {
  const auto k = static_cast<std::size_t>(spec.n_covariates());
  for (const auto& seq : sequences) {
    if (seq.empty()) throw DomainError("empty sequence for match '" + seq.match_id + "'");
    for (const auto& play : seq.plays) {
      if (play.x.size() != k) {
        throw DimensionError("match '" + seq.match_id + "' has covariate vectors of length " +
                             std::to_string(play.x.size()) + ", expected " + std::to_string(k));
      }
    }
  }
}

bool is_degenerate(const HmmParams& params) {
  return std::any_of(params.emissions.pass_prob.begin(), params.emissions.pass_prob.end(), [](double p) {
    return !(p > kDegenerateEmission && p < 1.0 - kDegenerateEmission);
  });
}

struct StartOutcome {
  OptimizerResult optimum;
  HmmParams params;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  double initial_log_likelihood = -std::numeric_limits<double>::infinity();
  bool degenerate = false;
  std::string error;
};

std::pair<std::string, std::string> split_interaction(const std::string& name) {
  const auto pos = name.find(':');
  if (pos == std::string::npos) return {};
  return {name.substr(0, pos), name.substr(pos + 1)};
}

}  // namespace

int n_working_params(int n_states, int n_covariates) {
  return n_states + (n_states - 1) + n_states * (n_states - 1) * (n_covariates + 1);
}

int n_model_params(const ModelSpec& spec) { return n_working_params(spec.n_states, spec.n_covariates()); }

std::vector<double> pack_params(const ModelSpec& spec, const HmmParams& params) {
  params.validate(spec);
  const auto n = static_cast<std::size_t>(spec.n_states);
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(n_model_params(spec)));
  for (double p : params.emissions.pass_prob) w.push_back(logit(p));
  const double reference = params.initial.delta[n - 1];
  for (std::size_t i = 0; i + 1 < n; ++i) w.push_back(std::log(params.initial.delta[i] / reference));
  auto coeffs = params.coeffs.values();
  w.insert(w.end(), coeffs.begin(), coeffs.end());
  return w;
}

HmmParams unpack_params(const ModelSpec& spec, std::span<const double> working) {
  const int n = spec.n_states;
  const int k = spec.n_covariates();
  if (static_cast<int>(working.size()) != n_working_params(n, k)) {
    throw DimensionError("working parameter vector has length " + std::to_string(working.size()) +
                         ", expected " + std::to_string(n_working_params(n, k)));
  }
  const auto nn = static_cast<std::size_t>(n);
  HmmParams params;
  params.emissions.pass_prob.resize(nn);
  for (std::size_t i = 0; i < nn; ++i) params.emissions.pass_prob[i] = logistic(working[i]);

  params.initial.delta.resize(nn);
  double max_log = 0.0;  // reference state has log-ratio 0
  for (std::size_t i = 0; i + 1 < nn; ++i) max_log = std::max(max_log, working[nn + i]);
  double total = 0.0;
  for (std::size_t i = 0; i < nn; ++i) {
    const double log_ratio = i + 1 < nn ? working[nn + i] : 0.0;
    params.initial.delta[i] = std::exp(log_ratio - max_log);
    total += params.initial.delta[i];
  }
  for (auto& d : params.initial.delta) d /= total;

  params.coeffs = TransitionCoefficients(n, k);
  auto dest = params.coeffs.values();
  std::copy(working.begin() + static_cast<std::ptrdiff_t>(2 * nn - 1), working.end(), dest.begin());
  return params;
}

void FitConfig::validate() const {
  if (max_iterations <= 0 || !(gradient_step > 0.0) || !(convergence_tol > 0.0) || n_starts < 1 || jobs < 1) {
    throw std::invalid_argument("FitConfig: max_iterations, gradient_step, convergence_tol, jobs must be positive "
                                "and n_starts >= 1");
  }
}

double aic(double log_likelihood, int n_params) { return -2.0 * log_likelihood + 2.0 * n_params; }

DataFingerprint fingerprint_of(std::span<const PlaySequence> sequences) {
  DataFingerprint fp;
  fp.n_sequences = static_cast<std::int64_t>(sequences.size());
  fp.n_plays = total_plays(sequences);
  if (!sequences.empty()) {
    fp.season_min = std::numeric_limits<int>::max();
    fp.season_max = std::numeric_limits<int>::min();
    for (const auto& s : sequences) {
      fp.season_min = std::min(fp.season_min, s.season);
      fp.season_max = std::max(fp.season_max, s.season);
    }
  }
  return fp;
}

HmmParams initial_params(const ModelSpec& spec, std::uint64_t seed, int start_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(start_index)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = spec.n_states;
  const auto nn = static_cast<std::size_t>(n);

  HmmParams params;
  params.emissions.pass_prob.resize(nn);
  for (int i = 0; i < n; ++i) {
    double lo = 0.0;
    double hi = 0.0;
    if (n == 2) {
      lo = i == 0 ? 0.2 : 0.6;
      hi = i == 0 ? 0.5 : 0.9;
    } else {
      const double width = 0.8 / n;
      lo = 0.1 + i * width + 0.02;
      hi = 0.1 + (i + 1) * width - 0.02;
    }
    params.emissions.pass_prob[static_cast<std::size_t>(i)] = lo + (hi - lo) * unit(rng);
  }
  params.initial.delta.assign(nn, 1.0 / n);

  // Off-diagonal homogeneous probabilities in [0.05, 0.3]; intercepts solve
  // the softmax for them with slopes at zero.
  params.coeffs = TransitionCoefficients(n, spec.n_covariates());
  for (int i = 0; i < n; ++i) {
    std::vector<double> off(nn, 0.0);
    double off_total = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      off[static_cast<std::size_t>(j)] = 0.05 + 0.25 * unit(rng);
      off_total += off[static_cast<std::size_t>(j)];
    }
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      params.coeffs.intercept(i, j) = std::log(off[static_cast<std::size_t>(j)] / (1.0 - off_total));
    }
  }
  return params;
}

FittedModel fit(const ModelSpec& spec, std::span<const PlaySequence> sequences, const FitConfig& config,
                const HmmParams* warm_start) {
  spec.validate();
  config.validate();
  if (sequences.empty()) throw PreconditionError("fit: no sequences");
  check_sequence_dimensions(spec, sequences);
  const int n_params = n_model_params(spec);
  const std::int64_t plays = total_plays(sequences);
  if (plays <= n_params) {
    throw PreconditionError("fit: " + std::to_string(plays) + " plays cannot identify " + std::to_string(n_params) +
                            " parameters");
  }

  const double scale = 1.0 / static_cast<double>(plays);
  auto objective = [&](std::span<const double> w) {
    const HmmParams p = unpack_params(spec, w);
    const double ll = total_log_likelihood(spec, p, sequences);
    return std::isfinite(ll) ? -ll * scale : std::numeric_limits<double>::infinity();
  };

  std::vector<std::vector<double>> starts;
  if (warm_start != nullptr) starts.push_back(pack_params(spec, *warm_start));
  for (int s = 0; s < config.n_starts; ++s) starts.push_back(pack_params(spec, initial_params(spec, config.rng_seed, s)));

  OptimizerOptions options;
  options.max_iterations = config.max_iterations;
  options.gradient_step = config.gradient_step;
  options.convergence_tol = config.convergence_tol;

  std::vector<StartOutcome> outcomes(starts.size());
  detail::parallel_for(starts.size(), config.jobs, [&](std::size_t s) {
    auto& out = outcomes[s];
    try {
      out.optimum = minimize_bfgs(objective, starts[s], options);
      out.params = unpack_params(spec, out.optimum.x);
      out.log_likelihood = -out.optimum.value / scale;
      out.initial_log_likelihood = -out.optimum.initial_value / scale;
      out.degenerate = is_degenerate(out.params);
    } catch (const std::exception& e) {
      out.error = e.what();
    }
  });

  auto pick_best = [&](bool allow_degenerate) {
    int best = -1;
    for (std::size_t s = 0; s < outcomes.size(); ++s) {
      const auto& o = outcomes[s];
      if (!o.error.empty() || !o.optimum.converged || !std::isfinite(o.log_likelihood)) continue;
      if (o.degenerate && !allow_degenerate) continue;
      if (best < 0 || o.log_likelihood > outcomes[static_cast<std::size_t>(best)].log_likelihood) {
        best = static_cast<int>(s);
      }
    }
    return best;
  };
  int best = pick_best(false);
  if (best < 0) best = pick_best(true);
  if (best < 0) {
    std::ostringstream msg;
    msg << "fit: none of " << outcomes.size() << " starts converged;";
    for (std::size_t s = 0; s < outcomes.size(); ++s) {
      const auto& o = outcomes[s];
      msg << " [start " << s << ": " << (o.error.empty() ? o.optimum.message : o.error) << ", "
          << o.optimum.iterations << " iterations, loglik " << o.log_likelihood << "]";
    }
    throw FitError(msg.str());
  }

  const auto& chosen = outcomes[static_cast<std::size_t>(best)];
  FittedModel model;
  model.spec = spec;
  model.params = canonicalize_states(chosen.params);
  model.log_likelihood = total_log_likelihood(spec, model.params, sequences);
  model.n_params = n_params;
  model.aic = aic(model.log_likelihood, n_params);
  model.covariate_scaling.reserve(spec.covariate_names.size());
  for (const auto& name : spec.covariate_names) model.covariate_scaling.push_back({name, 0.0, 1.0, false});
  model.fingerprint = fingerprint_of(sequences);

  auto& diag = model.diagnostics;
  diag.iterations = chosen.optimum.iterations;
  diag.degenerate = chosen.degenerate;
  diag.converged = chosen.optimum.converged && !chosen.degenerate;
  diag.best_start = best;
  diag.n_starts = static_cast<int>(outcomes.size());
  diag.n_starts_converged = static_cast<int>(std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) {
    return o.error.empty() && o.optimum.converged;
  }));
  diag.initial_log_likelihood = chosen.initial_log_likelihood;
  diag.message = chosen.optimum.message;
  return model;
}

std::vector<PlaySequence> project_covariates(std::span<const PlaySequence> sequences,
                                             const std::vector<std::string>& names,
                                             const std::vector<std::string>& keep) {
  std::vector<std::size_t> columns;
  columns.reserve(keep.size());
  for (const auto& name : keep) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw DimensionError("unknown covariate '" + name + "'");
    columns.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  std::vector<PlaySequence> out;
  out.reserve(sequences.size());
  for (const auto& seq : sequences) {
    PlaySequence projected{seq.match_id, seq.team_id, seq.season, {}};
    projected.plays.reserve(seq.plays.size());
    for (const auto& play : seq.plays) {
      if (play.x.size() != names.size()) throw DimensionError("covariate vector does not match the name list");
      Play p{play.y, {}};
      p.x.reserve(columns.size());
      for (auto c : columns) p.x.push_back(play.x[c]);
      projected.plays.push_back(std::move(p));
    }
    out.push_back(std::move(projected));
  }
  return out;
}

SelectionResult forward_select(const ModelSpec& base, const std::vector<std::string>& candidates,
                               std::span<const PlaySequence> sequences, const FitConfig& config) {
  if (base.n_covariates() != 0) throw PreconditionError("forward_select: base model must be intercept-only");
  if (candidates.empty()) throw PreconditionError("forward_select: no candidate covariates");
  ModelSpec{base.n_states, candidates}.validate();

  SelectionTrace trace;
  std::vector<std::string> selected;
  const int jobs = config.jobs;
  FitConfig inner = config;

  ModelSpec current_spec{base.n_states, {}};
  auto current_data = project_covariates(sequences, candidates, {});
  FittedModel current = fit(current_spec, current_data, config);
  trace.steps.push_back({"", current.aic, current.log_likelihood, current.n_params});

  while (true) {
    std::vector<std::string> eligible;
    for (const auto& c : candidates) {
      if (std::find(selected.begin(), selected.end(), c) != selected.end()) continue;
      auto [a, b] = split_interaction(c);
      if (!a.empty()) {
        const bool parents_in = std::find(selected.begin(), selected.end(), a) != selected.end() &&
                                std::find(selected.begin(), selected.end(), b) != selected.end();
        if (!parents_in) continue;
      }
      eligible.push_back(c);
    }
    if (eligible.empty()) break;

    // Parallelize across candidates; each candidate fit runs its starts serially.
    inner.jobs = eligible.size() > 1 ? 1 : jobs;
    std::vector<std::optional<FittedModel>> fits(eligible.size());
    std::vector<CandidateOutcome> outcomes(eligible.size());
    const HmmParams warm{current.params.initial, current.params.emissions,
                         current.params.coeffs.with_added_covariate()};
    detail::parallel_for(eligible.size(), eligible.size() > 1 ? jobs : 1, [&](std::size_t c) {
      outcomes[c].candidate = eligible[c];
      try {
        ModelSpec spec{base.n_states, selected};
        spec.covariate_names.push_back(eligible[c]);
        const auto data = project_covariates(sequences, candidates, spec.covariate_names);
        fits[c] = fit(spec, data, inner, &warm);
        outcomes[c].aic = fits[c]->aic;
      } catch (const std::exception& e) {
        outcomes[c].warning = e.what();
      }
    });
    trace.rounds.push_back(outcomes);

    int best = -1;
    for (std::size_t c = 0; c < fits.size(); ++c) {
      if (!fits[c]) continue;
      if (best < 0 || fits[c]->aic < fits[static_cast<std::size_t>(best)]->aic) best = static_cast<int>(c);
    }
    if (best < 0) throw SelectionError("forward_select: every candidate fit failed in round " +
                                       std::to_string(trace.rounds.size()));
    auto& winner = *fits[static_cast<std::size_t>(best)];
    if (!(winner.aic < current.aic)) break;

    selected.push_back(eligible[static_cast<std::size_t>(best)]);
    current = std::move(winner);
    trace.steps.push_back({selected.back(), current.aic, current.log_likelihood, current.n_params});
  }

  current.selection = trace;
  current.fingerprint = fingerprint_of(sequences);
  return {std::move(current), std::move(trace)};
}

StandardizedData standardize_covariates(std::span<const PlaySequence> sequences,
                                        const std::vector<std::string>& names) {
  const std::size_t k = names.size();
  std::vector<double> sum(k, 0.0);
  std::vector<bool> binary(k, true);
  std::size_t count = 0;
  for (const auto& seq : sequences) {
    for (const auto& play : seq.plays) {
      if (play.x.size() != k) throw DimensionError("standardize_covariates: covariate length mismatch");
      for (std::size_t l = 0; l < k; ++l) {
        sum[l] += play.x[l];
        if (play.x[l] != 0.0 && play.x[l] != 1.0) binary[l] = false;
      }
      ++count;
    }
  }
  std::vector<CovariateScaling> scaling(k);
  for (std::size_t l = 0; l < k; ++l) {
    scaling[l].name = names[l];
    scaling[l].binary = binary[l];
    if (!binary[l]) scaling[l].mean = count > 0 ? sum[l] / static_cast<double>(count) : 0.0;
  }
  std::vector<double> sq(k, 0.0);
  for (const auto& seq : sequences) {
    for (const auto& play : seq.plays) {
      for (std::size_t l = 0; l < k; ++l) {
        const double d = play.x[l] - scaling[l].mean;
        sq[l] += d * d;
      }
    }
  }
  for (std::size_t l = 0; l < k; ++l) {
    if (binary[l]) continue;
    const double sd = count > 0 ? std::sqrt(sq[l] / static_cast<double>(count)) : 0.0;
    scaling[l].sd = sd > 0.0 ? sd : 1.0;
  }
  return {apply_scaling(sequences, scaling), scaling};
}

void apply_scaling(std::span<double> x, std::span<const CovariateScaling> scaling) {
  if (x.size() != scaling.size()) throw DimensionError("apply_scaling: covariate length mismatch");
  for (std::size_t l = 0; l < x.size(); ++l) {
    if (scaling[l].binary) continue;
    x[l] = (x[l] - scaling[l].mean) / scaling[l].sd;
  }
}

std::vector<PlaySequence> apply_scaling(std::span<const PlaySequence> sequences,
                                        std::span<const CovariateScaling> scaling) {
  std::vector<PlaySequence> out(sequences.begin(), sequences.end());
  for (auto& seq : out) {
    for (auto& play : seq.plays) apply_scaling(play.x, scaling);
  }
  return out;
}

}  // namespace playcall
