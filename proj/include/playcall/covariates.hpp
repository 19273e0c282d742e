#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "playcall/core_hmm.hpp"

namespace playcall {

// Per-play covariates derived from one play-by-play row.
struct CovariateRow {
  int pass = 0;
  int home = 0;
  double ydstogo = 0.0;
  int down1 = 0;
  int down2 = 0;
  int down3 = 0;
  int down4 = 0;
  int shotgun = 0;
  int no_huddle = 0;
  double scorediff = 0.0;
  int goaltogo = 0;
  int yardline90 = 0;

  // Values in base_covariate_names() order (the response is not included).
  std::vector<double> values() const;
};

// Game situation before a snap; the inputs from which a CovariateRow is derived.
struct Situation {
  bool home = false;
  int down = 1;
  double ydstogo = 10.0;
  bool shotgun = false;
  bool no_huddle = false;
  double own_score = 0.0;
  double opponent_score = 0.0;
  bool goal_to_go = false;
  double yardline_100 = 75.0;
};

CovariateRow derive_covariates(const Situation& situation, int pass);

// Warnings for values outside the ranges observed in 2009-2018 data
// (ydstogo in [1, 50], scorediff in [-59, 59]). The row is still usable.
std::vector<std::string> range_violations(const CovariateRow& row);

const std::vector<std::string>& base_covariate_names();
const std::vector<std::string>& interaction_names();

// Base covariates plus interactions, the pool for forward selection.
std::vector<std::string> selection_candidates();

// Covariates used when fitting without selection: down1 is the reference
// level of the down dummies (all four sum to one) and is left out together
// with its interaction.
std::vector<std::string> full_covariate_set();

// Maps base covariate vectors onto a target list of names, where a target is
// either a base name or an interaction "a:b" evaluated as the product.
class CovariateExpander {
 public:
  CovariateExpander(const std::vector<std::string>& base_names, const std::vector<std::string>& targets);

  std::size_t size() const { return plan_.size(); }
  std::vector<double> expand(std::span<const double> base) const;
  std::vector<PlaySequence> expand(std::span<const PlaySequence> sequences) const;

 private:
  std::size_t base_size_;
  std::vector<std::pair<int, int>> plan_;  // second == -1 for a main effect
};

}  // namespace playcall
