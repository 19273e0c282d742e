#include "playcall/covariates.hpp"

#include <algorithm>

#include "playcall/errors.hpp"

namespace playcall {

std::vector<double> CovariateRow::values() const {
  return {static_cast<double>(home),    ydstogo,
          static_cast<double>(down1),   static_cast<double>(down2),
          static_cast<double>(down3),   static_cast<double>(down4),
          static_cast<double>(shotgun), static_cast<double>(no_huddle),
          scorediff,                    static_cast<double>(goaltogo),
          static_cast<double>(yardline90)};
}

CovariateRow derive_covariates(const Situation& s, int pass) {
  CovariateRow row;
  row.pass = pass;
  row.home = s.home ? 1 : 0;
  row.ydstogo = s.ydstogo;
  row.down1 = s.down == 1;
  row.down2 = s.down == 2;
  row.down3 = s.down == 3;
  row.down4 = s.down == 4;
  row.shotgun = s.shotgun ? 1 : 0;
  row.no_huddle = s.no_huddle ? 1 : 0;
  row.scorediff = s.own_score - s.opponent_score;
  row.goaltogo = s.goal_to_go ? 1 : 0;
  // yardline_100 counts yards to the opponent's end zone, so being within ten
  // yards of the own end zone means yardline_100 >= 90.
  row.yardline90 = s.yardline_100 >= 90.0 ? 1 : 0;
  return row;
}

std::vector<std::string> range_violations(const CovariateRow& row) {
  std::vector<std::string> out;
  if (row.ydstogo < 1.0 || row.ydstogo > 50.0) out.push_back("ydstogo " + std::to_string(row.ydstogo) + " outside [1, 50]");
  if (row.scorediff < -59.0 || row.scorediff > 59.0) {
    out.push_back("scorediff " + std::to_string(row.scorediff) + " outside [-59, 59]");
  }
  return out;
}

const std::vector<std::string>& base_covariate_names() {
  static const std::vector<std::string> names{"home",    "ydstogo",   "down1",     "down2",    "down3",     "down4",
                                              "shotgun", "no_huddle", "scorediff", "goaltogo", "yardline90"};
  return names;
}

const std::vector<std::string>& interaction_names() {
  static const std::vector<std::string> names{
      "ydstogo:scorediff", "down1:ydstogo",       "down2:ydstogo",    "down3:ydstogo",
      "down4:ydstogo",     "shotgun:ydstogo",     "no_huddle:scorediff", "no_huddle:shotgun"};
  return names;
}

std::vector<std::string> selection_candidates() {
  auto out = base_covariate_names();
  const auto& inter = interaction_names();
  out.insert(out.end(), inter.begin(), inter.end());
  return out;
}

std::vector<std::string> full_covariate_set() {
  auto out = selection_candidates();
  std::erase_if(out, [](const std::string& n) { return n == "down1" || n == "down1:ydstogo"; });
  return out;
}

CovariateExpander::CovariateExpander(const std::vector<std::string>& base_names,
                                     const std::vector<std::string>& targets)
    : base_size_(base_names.size()) {
  auto index_of = [&](const std::string& name) {
    auto it = std::find(base_names.begin(), base_names.end(), name);
    if (it == base_names.end()) throw DimensionError("unknown covariate '" + name + "'");
    return static_cast<int>(it - base_names.begin());
  };
  plan_.reserve(targets.size());
  for (const auto& target : targets) {
    const auto colon = target.find(':');
    if (colon == std::string::npos) {
      plan_.emplace_back(index_of(target), -1);
    } else {
      plan_.emplace_back(index_of(target.substr(0, colon)), index_of(target.substr(colon + 1)));
    }
  }
}

std::vector<double> CovariateExpander::expand(std::span<const double> base) const {
  if (base.size() != base_size_) throw DimensionError("base covariate vector has the wrong length");
  std::vector<double> out;
  out.reserve(plan_.size());
  for (auto [a, b] : plan_) {
    const double v = base[static_cast<std::size_t>(a)];
    out.push_back(b < 0 ? v : v * base[static_cast<std::size_t>(b)]);
  }
  return out;
}

std::vector<PlaySequence> CovariateExpander::expand(std::span<const PlaySequence> sequences) const {
  std::vector<PlaySequence> out;
  out.reserve(sequences.size());
  for (const auto& seq : sequences) {
    PlaySequence expanded{seq.match_id, seq.team_id, seq.season, {}};
    expanded.plays.reserve(seq.plays.size());
    for (const auto& play : seq.plays) expanded.plays.push_back({play.y, expand(play.x)});
    out.push_back(std::move(expanded));
  }
  return out;
}

}  // namespace playcall
