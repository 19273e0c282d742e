#include "playcall/pipeline.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "playcall/covariates.hpp"
#include "playcall/errors.hpp"

namespace playcall {

FittedModel fit_team(const std::string& team, std::span<const PlaySequence> raw,
                     const std::vector<std::string>& base_names, const TeamFitOptions& options) {
  if (raw.empty()) throw PreconditionError("team " + team + " has no training sequences");
  const auto names = options.select ? selection_candidates() : full_covariate_set();
  const auto expanded = CovariateExpander(base_names, names).expand(raw);
  const auto standardized = standardize_covariates(expanded, names);

  FittedModel model;
  if (options.select) {
    spdlog::info("{}: forward selection over {} candidates", team, names.size());
    auto result = forward_select(ModelSpec{options.n_states, {}}, names, standardized.sequences, options.config);
    model = std::move(result.model);
    model.selection = std::move(result.trace);
  } else {
    spdlog::info("{}: fitting {} covariates", team, names.size());
    model = fit(ModelSpec{options.n_states, names}, standardized.sequences, options.config);
  }

  model.team = team;
  model.covariate_scaling.clear();
  for (const auto& name : model.spec.covariate_names) {
    const auto it = std::find(names.begin(), names.end(), name);
    model.covariate_scaling.push_back(standardized.scaling[static_cast<std::size_t>(it - names.begin())]);
  }
  return model;
}

}  // namespace playcall
