#include "playcall/simulate.hpp"

#include <string>

namespace playcall {

std::vector<PlaySequence> simulate_sequences(const ModelSpec& spec, const HmmParams& params, int n_sequences,
                                             int plays_per_sequence, std::uint64_t seed,
                                             const CovariateSampler& sampler) {
  params.validate(spec);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<std::size_t>(spec.n_states);
  const auto k = static_cast<std::size_t>(spec.n_covariates());

  auto draw_index = [&](auto&& weight, std::size_t count) {
    const double u = unit(rng);
    double cumulative = 0.0;
    for (std::size_t i = 0; i + 1 < count; ++i) {
      cumulative += weight(i);
      if (u < cumulative) return i;
    }
    return count - 1;
  };

  std::vector<PlaySequence> out;
  out.reserve(static_cast<std::size_t>(n_sequences));
  std::vector<double> gamma(n * n);
  for (int m = 0; m < n_sequences; ++m) {
    PlaySequence seq;
    seq.match_id = "sim" + std::to_string(m);
    seq.team_id = "SIM";
    seq.plays.reserve(static_cast<std::size_t>(plays_per_sequence));
    std::size_t state = 0;
    for (int p = 0; p < plays_per_sequence; ++p) {
      Play play;
      if (sampler) {
        play.x = sampler(rng);
      } else {
        play.x.resize(k);
        for (auto& v : play.x) v = normal(rng);
      }
      if (p == 0) {
        state = draw_index([&](std::size_t i) { return params.initial.delta[i]; }, n);
      } else {
        fill_transition_matrix(params.coeffs, play.x, gamma);
        const std::size_t from = state;
        state = draw_index([&](std::size_t j) { return gamma[from * n + j]; }, n);
      }
      play.y = unit(rng) < params.emissions.pass_prob[state] ? 1 : 0;
      seq.plays.push_back(std::move(play));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace playcall
