#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "playcall/core_hmm.hpp"

namespace playcall {

using CovariateSampler = std::function<std::vector<double>(std::mt19937_64&)>;

// Draws sequences from the model: s_1 ~ delta, s_p ~ Gamma(x_p)[s_{p-1}, .]
// for p >= 2, y_p ~ Bernoulli(pass_prob[s_p]). Without a sampler every
// covariate is i.i.d. standard normal.
std::vector<PlaySequence> simulate_sequences(const ModelSpec& spec, const HmmParams& params, int n_sequences,
                                             int plays_per_sequence, std::uint64_t seed,
                                             const CovariateSampler& sampler = {});

}  // namespace playcall
