#pragma once

#include <span>
#include <string>
#include <vector>

#include "playcall/estimation.hpp"

namespace playcall {

struct TeamFitOptions {
  int n_states = 2;
  bool select = false;  // forward selection over selection_candidates()
  FitConfig config;
};

// Fits one team's model from sequences carrying base covariates: expands to
// the candidate (or full) covariate set, standardizes with the training
// statistics, fits or selects, and attaches team, scaling and fingerprint.
FittedModel fit_team(const std::string& team, std::span<const PlaySequence> raw,
                     const std::vector<std::string>& base_names, const TeamFitOptions& options);

}  // namespace playcall
