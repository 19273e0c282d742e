#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "playcall/errors.hpp"
#include "playcall/estimation.hpp"
#include "playcall/optimizer.hpp"
#include "playcall/simulate.hpp"
#include "support/oracle.hpp"

namespace playcall::test {

namespace {

HmmParams reference_two_state() {
  HmmParams p;
  p.initial.delta = {0.5, 0.5};
  p.emissions.pass_prob = {0.30, 0.85};
  p.coeffs = TransitionCoefficients(2, 0);
  p.coeffs.intercept(0, 1) = std::log(0.10 / 0.90);
  p.coeffs.intercept(1, 0) = std::log(0.15 / 0.85);
  return p;
}

FitConfig quick_config(std::uint64_t seed = 1) {
  FitConfig c;
  c.rng_seed = seed;
  c.n_starts = 2;
  return c;
}

}  // namespace

TEST(WorkingParams, CountMatchesLayout) {
  EXPECT_EQ(n_working_params(2, 0), 2 + 1 + 2);
  EXPECT_EQ(n_working_params(3, 2), 3 + 2 + 6 * 3);
  EXPECT_EQ(n_model_params(ModelSpec{2, {"a", "b", "c"}}), 2 + 1 + 2 * 4);
}

TEST(WorkingParams, PackUnpackRoundTrip) {
  std::mt19937_64 rng(123);
  for (int draw = 0; draw < 1000; ++draw) {
    const int n = 2 + draw % 3;
    const int k = draw % 4;
    const ModelSpec spec = oracle::spec_with(n, k);
    const auto p = oracle::random_params(rng, n, k, 5.0);
    const auto w = pack_params(spec, p);
    ASSERT_EQ(static_cast<int>(w.size()), n_working_params(n, k));
    const auto q = unpack_params(spec, w);
    for (int i = 0; i < n; ++i) {
      EXPECT_NEAR(q.emissions.pass_prob[i], p.emissions.pass_prob[i], 1e-12);
      EXPECT_NEAR(q.initial.delta[i], p.initial.delta[i], 1e-12);
    }
    for (std::size_t e = 0; e < p.coeffs.values().size(); ++e) {
      EXPECT_EQ(q.coeffs.values()[e], p.coeffs.values()[e]);
    }
  }
}

TEST(WorkingParams, AnyWorkingVectorGivesValidParameters) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> wide(-40.0, 40.0);
  const ModelSpec spec = oracle::spec_with(3, 2);
  for (int draw = 0; draw < 200; ++draw) {
    std::vector<double> w(n_working_params(3, 2));
    for (auto& v : w) v = wide(rng);
    const auto p = unpack_params(spec, w);
    double total = 0.0;
    for (double d : p.initial.delta) {
      EXPECT_GE(d, 0.0);
      total += d;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    for (double q : p.emissions.pass_prob) {
      EXPECT_GE(q, 0.0);
      EXPECT_LE(q, 1.0);
    }
  }
}

TEST(Aic, Examples) {
  EXPECT_DOUBLE_EQ(aic(-100.0, 5), 210.0);
  EXPECT_DOUBLE_EQ(aic(-100.0, 7), 214.0);
  EXPECT_DOUBLE_EQ(aic(-1000.0, 10), 2020.0);
  EXPECT_DOUBLE_EQ(aic(-100.0, 10), 220.0);
  EXPECT_DOUBLE_EQ(aic(0.0, 1), 2.0);
  const int k3 = n_model_params(ModelSpec{2, {"a", "b", "c"}});
  EXPECT_EQ(k3, 11);
  EXPECT_DOUBLE_EQ(aic(-57.25, k3), 114.5 + 22.0);
}

TEST(Objective, NumericGradientIsStableUnderStepHalving) {
  std::mt19937_64 rng(31);
  const ModelSpec spec = oracle::spec_with(2, 1);
  const auto truth = oracle::random_params(rng, 2, 1, 1.0);
  const auto seqs = simulate_sequences(spec, truth, 20, 30, 77);
  const auto objective = [&](std::span<const double> w) {
    return -total_log_likelihood(spec, unpack_params(spec, w), seqs) / 600.0;
  };
  std::normal_distribution<double> jitter(0.0, 0.5);
  const auto centre = pack_params(spec, truth);
  for (int point = 0; point < 50; ++point) {
    auto w = centre;
    for (auto& v : w) v += jitter(rng);
    const auto g1 = numeric_gradient(objective, w, 1e-5);
    const auto g2 = numeric_gradient(objective, w, 5e-6);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(g1[i], g2[i], 1e-4);
  }
}

TEST(Optimizer, MinimizesRosenbrock) {
  const auto rosen = [](std::span<const double> x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  OptimizerOptions opts;
  opts.max_iterations = 2000;
  const auto r = minimize_bfgs(rosen, std::vector<double>{-1.2, 1.0}, opts);
  EXPECT_TRUE(r.converged) << r.message;
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], 1.0, 1e-4);
  EXPECT_LE(r.value, r.initial_value);
}

TEST(Fit, RecoversSimulatedTwoStateModel) {
  const ModelSpec spec{2, {}};
  const auto truth = reference_two_state();
  const auto seqs = simulate_sequences(spec, truth, 150, 60, 2024);
  const auto m = fit(spec, seqs, quick_config());
  EXPECT_TRUE(m.diagnostics.converged) << m.diagnostics.message;
  EXPECT_NEAR(m.params.emissions.pass_prob[0], 0.30, 0.05);
  EXPECT_NEAR(m.params.emissions.pass_prob[1], 0.85, 0.05);
  const auto g = transition_matrix(m.params.coeffs, {});
  EXPECT_NEAR(g(0, 1), 0.10, 0.05);
  EXPECT_NEAR(g(1, 0), 0.15, 0.05);
  EXPECT_GE(m.log_likelihood, total_log_likelihood(spec, truth, seqs));
  EXPECT_DOUBLE_EQ(m.aic, aic(m.log_likelihood, 5));
  EXPECT_EQ(m.n_params, 5);
  EXPECT_EQ(m.fingerprint.n_sequences, 150);
  EXPECT_EQ(m.fingerprint.n_plays, 150 * 60);
}

TEST(Fit, IsDeterministicForFixedSeed) {
  const ModelSpec spec{2, {"x1"}};
  std::mt19937_64 rng(4);
  auto truth = oracle::random_params(rng, 2, 1, 1.0);
  truth.emissions.pass_prob = {0.25, 0.8};
  const auto seqs = simulate_sequences(spec, truth, 40, 40, 5);
  auto config = quick_config(11);
  const auto a = fit(spec, seqs, config);
  config.jobs = 2;
  const auto b = fit(spec, seqs, config);
  EXPECT_EQ(a.log_likelihood, b.log_likelihood);
  EXPECT_EQ(pack_params(spec, a.params), pack_params(spec, b.params));
}

TEST(Fit, AddingCovariateNeverLowersLikelihood) {
  const ModelSpec base{2, {}};
  const ModelSpec bigger{2, {"x1"}};
  std::mt19937_64 rng(12);
  auto truth = oracle::random_params(rng, 2, 1, 1.0);
  truth.emissions.pass_prob = {0.2, 0.75};
  const auto seqs = simulate_sequences(bigger, truth, 40, 40, 99);
  const auto small_fit = fit(base, project_covariates(seqs, bigger.covariate_names, {}), quick_config());
  auto warm = small_fit.params;
  warm.coeffs = warm.coeffs.with_added_covariate();
  const auto big_fit = fit(bigger, seqs, quick_config(), &warm);
  EXPECT_GE(big_fit.log_likelihood, small_fit.log_likelihood - 1e-6);
}

TEST(Fit, NestsIidBernoulli) {
  const ModelSpec spec{2, {}};
  auto truth = reference_two_state();
  truth.emissions.pass_prob = {0.6, 0.6};
  const auto seqs = simulate_sequences(spec, truth, 30, 40, 21);
  double passes = 0.0;
  for (const auto& s : seqs) {
    for (const auto& play : s.plays) passes += play.y;
  }
  const double n = 30.0 * 40.0;
  const double q = passes / n;
  const double bernoulli = passes * std::log(q) + (n - passes) * std::log(1.0 - q);
  const auto m = fit(spec, seqs, quick_config());
  EXPECT_GE(m.log_likelihood, bernoulli - 1e-6);
}

TEST(Fit, Preconditions) {
  const ModelSpec spec{2, {}};
  EXPECT_THROW(fit(spec, std::span<const PlaySequence>{}, quick_config()), PreconditionError);
  std::vector<PlaySequence> tiny{{"m", "T", 2018, {{1, {}}, {0, {}}, {1, {}}}}};
  EXPECT_THROW(fit(spec, tiny, quick_config()), PreconditionError);
  std::vector<PlaySequence> wrong_width(1, {"m", "T", 2018, std::vector<Play>(10, Play{1, {0.5}})});
  EXPECT_THROW(fit(spec, wrong_width, quick_config()), DimensionError);
}

TEST(InitialParams, FollowsInitializationRules) {
  const ModelSpec spec{2, {"a"}};
  for (int start = 0; start < 20; ++start) {
    const auto p = initial_params(spec, 1, start);
    EXPECT_GT(p.emissions.pass_prob[0], 0.2);
    EXPECT_LT(p.emissions.pass_prob[0], 0.5);
    EXPECT_GT(p.emissions.pass_prob[1], 0.6);
    EXPECT_LT(p.emissions.pass_prob[1], 0.9);
    EXPECT_DOUBLE_EQ(p.initial.delta[0], 0.5);
    EXPECT_EQ(p.coeffs.slope(0, 1, 0), 0.0);
    const auto g = transition_matrix(p.coeffs, std::vector<double>{3.0});
    EXPECT_GE(g(0, 1), 0.05);
    EXPECT_LE(g(0, 1), 0.3);
  }
  EXPECT_EQ(pack_params(spec, initial_params(spec, 7, 2)), pack_params(spec, initial_params(spec, 7, 2)));
  EXPECT_NE(pack_params(spec, initial_params(spec, 7, 2)), pack_params(spec, initial_params(spec, 7, 3)));
}

TEST(ForwardSelect, ConstantCandidateIsNeverAdopted) {
  const ModelSpec base{2, {}};
  const auto truth = reference_two_state();
  auto seqs = simulate_sequences(base, truth, 40, 50, 3);
  for (auto& s : seqs) {
    for (auto& play : s.plays) play.x = {0.0};
  }
  const auto r = forward_select(base, {"zero"}, seqs, quick_config());
  ASSERT_EQ(r.trace.steps.size(), 1u);
  EXPECT_TRUE(r.trace.steps[0].added.empty());
  EXPECT_EQ(r.model.spec.covariate_names.size(), 0u);
  ASSERT_EQ(r.trace.rounds.size(), 1u);
  ASSERT_TRUE(r.trace.rounds[0][0].aic.has_value());
  EXPECT_GE(*r.trace.rounds[0][0].aic, r.trace.steps[0].aic);
}

TEST(ForwardSelect, PicksInformativeCovariateAndAicDecreases) {
  const ModelSpec truth_spec{2, {"a", "b"}};
  auto truth = reference_two_state();
  truth.coeffs = TransitionCoefficients(2, 2);
  truth.coeffs.intercept(0, 1) = std::log(0.10 / 0.90);
  truth.coeffs.intercept(1, 0) = std::log(0.15 / 0.85);
  truth.coeffs.slope(0, 1, 0) = 2.0;
  const auto seqs = simulate_sequences(truth_spec, truth, 100, 60, 8);
  const auto r = forward_select(ModelSpec{2, {}}, {"a", "b"}, seqs, quick_config());
  ASSERT_GE(r.trace.steps.size(), 2u);
  EXPECT_EQ(r.trace.steps[1].added, "a");
  for (std::size_t s = 1; s < r.trace.steps.size(); ++s) {
    EXPECT_LT(r.trace.steps[s].aic, r.trace.steps[s - 1].aic);
  }
  EXPECT_EQ(r.model.selection->steps.size(), r.trace.steps.size());
  EXPECT_DOUBLE_EQ(r.model.aic, r.trace.steps.back().aic);
}

TEST(ForwardSelect, InteractionWaitsForParents) {
  const ModelSpec base{2, {}};
  const auto truth = reference_two_state();
  auto seqs = simulate_sequences(base, truth, 30, 40, 13);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  for (auto& s : seqs) {
    for (auto& play : s.plays) play.x = {0.0, normal(rng), 0.0};
  }
  const auto r = forward_select(base, {"a", "b", "a:b"}, seqs, quick_config());
  for (const auto& outcome : r.trace.rounds[0]) EXPECT_NE(outcome.candidate, "a:b");
}

TEST(ForwardSelect, Preconditions) {
  std::vector<PlaySequence> seqs(1, {"m", "T", 2018, std::vector<Play>(10, Play{1, {0.0}})});
  EXPECT_THROW(forward_select(ModelSpec{2, {"a"}}, {"b"}, seqs, quick_config()), PreconditionError);
  EXPECT_THROW(forward_select(ModelSpec{2, {}}, {}, seqs, quick_config()), PreconditionError);
}

TEST(Standardize, ScalesContinuousAndKeepsBinary) {
  std::vector<PlaySequence> seqs{{"m", "T", 2018, {{1, {2.0, 1.0, 5.0}}, {0, {4.0, 0.0, 5.0}}, {1, {6.0, 1.0, 5.0}}}}};
  const auto s = standardize_covariates(seqs, {"c", "bin", "const"});
  ASSERT_EQ(s.scaling.size(), 3u);
  EXPECT_DOUBLE_EQ(s.scaling[0].mean, 4.0);
  EXPECT_NEAR(s.scaling[0].sd, std::sqrt(8.0 / 3.0), 1e-15);
  EXPECT_TRUE(s.scaling[1].binary);
  EXPECT_EQ(s.scaling[2].sd, 1.0);
  EXPECT_DOUBLE_EQ(s.sequences[0].plays[0].x[0], -2.0 / std::sqrt(8.0 / 3.0));
  EXPECT_EQ(s.sequences[0].plays[1].x[1], 0.0);
  EXPECT_EQ(s.sequences[0].plays[2].x[2], 0.0);

  std::vector<double> x{6.0, 1.0, 7.0};
  apply_scaling(x, s.scaling);
  EXPECT_DOUBLE_EQ(x[0], s.sequences[0].plays[2].x[0]);
  EXPECT_EQ(x[1], 1.0);
  EXPECT_EQ(x[2], 2.0);
}

TEST(Standardize, TwoPointColumnUsesPopulationSd) {
  std::vector<PlaySequence> seqs{{"m", "T", 2018, {{1, {1.0}}, {0, {3.0}}}}};
  const auto s = standardize_covariates(seqs, {"c"});
  EXPECT_EQ(s.scaling[0].mean, 2.0);
  EXPECT_EQ(s.scaling[0].sd, 1.0);
  EXPECT_EQ(s.sequences[0].plays[0].x[0], -1.0);
  EXPECT_EQ(s.sequences[0].plays[1].x[0], 1.0);
}

TEST(ProjectCovariates, KeepsNamedColumnsInOrder) {
  std::vector<PlaySequence> seqs{{"m", "T", 2018, {{1, {1.0, 2.0, 3.0}}}}};
  const auto p = project_covariates(seqs, {"a", "b", "c"}, {"c", "a"});
  EXPECT_EQ(p[0].plays[0].x, (std::vector<double>{3.0, 1.0}));
  EXPECT_THROW(project_covariates(seqs, {"a", "b", "c"}, {"d"}), std::invalid_argument);
}

}  // namespace playcall::test
