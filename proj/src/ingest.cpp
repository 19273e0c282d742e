#include "playcall/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "playcall/errors.hpp"

namespace playcall {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool is_missing(const std::string& v) { return v.empty() || v == "NA" || v == "NaN" || v == "nan" || v == "null"; }

std::optional<double> parse_number(const std::string& raw) {
  const std::string v = trim(raw);
  if (is_missing(v)) return std::nullopt;
  double out = 0.0;
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) return std::nullopt;
  return out;
}

// Either a parsed value or the rejection reason.
struct Field {
  std::optional<double> value;
  std::string reason;
};

Field numeric_field(const std::string& raw, const std::string& name) {
  if (is_missing(trim(raw))) return {std::nullopt, "missing " + name};
  auto v = parse_number(raw);
  if (!v) return {std::nullopt, "invalid " + name + " '" + raw + "'"};
  return {v, {}};
}

Field flag_field(const std::string& raw, const std::string& name) {
  auto f = numeric_field(raw, name);
  if (f.value && *f.value != 0.0 && *f.value != 1.0) return {std::nullopt, "invalid " + name + " '" + raw + "'"};
  return f;
}

std::string score_category(double diff) {
  if (diff < -7) return "trailing >7";
  if (diff < 0) return "trailing 1-7";
  if (diff == 0) return "tied";
  if (diff <= 7) return "leading 1-7";
  return "leading >7";
}

json sequence_record(const PlaySequence& seq) {
  json plays = json::array();
  for (const auto& p : seq.plays) plays.push_back({{"y", p.y}, {"x", p.x}});
  return {{"match_id", seq.match_id}, {"season", seq.season}, {"plays", std::move(plays)}};
}

json split_counts(const std::vector<PlaySequence>& seqs) {
  std::set<std::string> matches;
  std::int64_t plays = 0;
  for (const auto& s : seqs) {
    matches.insert(s.match_id);
    plays += static_cast<std::int64_t>(s.size());
  }
  return {{"matches", matches.size()}, {"sequences", seqs.size()}, {"plays", plays}};
}

}  // namespace

bool CsvReader::next(std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  record_line_ = line_;
  std::istream& in = *in_;
  for (int c = in.get(); c != std::char_traits<char>::eof(); c = in.get()) {
    any = true;
    const char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line_;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      in_quotes = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\r') {
      if (in.peek() == '\n') in.get();
      ++line_;
      fields.push_back(std::move(field));
      return true;
    } else if (ch == '\n') {
      ++line_;
      fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(ch);
    }
  }
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

void ColumnMapping::set(const std::string& key, const std::string& column) {
  static const std::map<std::string, std::string ColumnMapping::*> fields{
      {"play_type", &ColumnMapping::play_type},       {"offense_team", &ColumnMapping::offense_team},
      {"home_team", &ColumnMapping::home_team},       {"down", &ColumnMapping::down},
      {"ydstogo", &ColumnMapping::ydstogo},           {"shotgun", &ColumnMapping::shotgun},
      {"no_huddle", &ColumnMapping::no_huddle},       {"offense_score", &ColumnMapping::offense_score},
      {"defense_score", &ColumnMapping::defense_score}, {"goal_to_go", &ColumnMapping::goal_to_go},
      {"yardline_100", &ColumnMapping::yardline_100}, {"match_id", &ColumnMapping::match_id},
      {"match_date", &ColumnMapping::match_date}};
  auto it = fields.find(key);
  if (it == fields.end()) throw std::invalid_argument("unknown column mapping key '" + key + "'");
  this->*(it->second) = column;
}

std::vector<std::pair<std::string, std::string>> ColumnMapping::entries() const {
  return {{"play_type", play_type},         {"offense_team", offense_team}, {"home_team", home_team},
          {"down", down},                   {"ydstogo", ydstogo},           {"shotgun", shotgun},
          {"no_huddle", no_huddle},         {"offense_score", offense_score}, {"defense_score", defense_score},
          {"goal_to_go", goal_to_go},       {"yardline_100", yardline_100}, {"match_id", match_id},
          {"match_date", match_date}};
}

ColumnMapping ColumnMapping::load(const std::filesystem::path& path) { return load(path, ColumnMapping{}); }

ColumnMapping ColumnMapping::load(const std::filesystem::path& path, ColumnMapping base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open column mapping file " + path.string());
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(number) + ": expected key=value");
    }
    base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

std::optional<int> season_of(const std::string& match_date, const std::string& match_id) {
  auto from_parts = [](int year, int month) -> std::optional<int> {
    if (year < 1900 || month < 1 || month > 12) return std::nullopt;
    return month <= 2 ? year - 1 : year;
  };
  const std::string date = trim(match_date);
  if (date.size() >= 7 && date[4] == '-') {
    int year = 0;
    int month = 0;
    auto r1 = std::from_chars(date.data(), date.data() + 4, year);
    auto r2 = std::from_chars(date.data() + 5, date.data() + 7, month);
    if (r1.ec == std::errc() && r2.ec == std::errc()) {
      if (auto s = from_parts(year, month)) return s;
    }
  }
  const std::string id = trim(match_id);
  if (id.size() >= 8 && std::all_of(id.begin(), id.begin() + 8, [](char c) { return c >= '0' && c <= '9'; })) {
    return from_parts(std::stoi(id.substr(0, 4)), std::stoi(id.substr(4, 2)));
  }
  return std::nullopt;
}

ParseResult parse_plays(std::istream& in, const ColumnMapping& mapping) {
  ParseResult result;
  CsvReader reader(in);
  std::vector<std::string> header;
  if (!reader.next(header)) throw SchemaError("CSV input is empty (a header row is required)");
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);

  std::map<std::string, std::size_t> column_of;
  for (const auto& [key, column] : mapping.entries()) {
    auto it = std::find_if(header.begin(), header.end(), [&](const std::string& h) { return trim(h) == column; });
    if (it == header.end()) throw SchemaError("CSV header lacks column '" + column + "' (mapped from '" + key + "')");
    column_of[key] = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<std::string> fields;
  while (reader.next(fields)) {
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;  // blank line
    ++result.n_input_rows;
    const std::int64_t line = reader.record_line();
    auto get = [&](const char* key) -> std::string {
      const auto idx = column_of.at(key);
      return idx < fields.size() ? fields[idx] : std::string{};
    };

    const std::string play_type = trim(get("play_type"));
    if (play_type != "run" && play_type != "pass") {
      ++result.n_filtered;
      continue;
    }

    RawPlayRow row;
    row.line = line;
    row.play_type = play_type;
    row.match_id = trim(get("match_id"));
    row.match_date = trim(get("match_date"));
    row.offense_team = trim(get("offense_team"));
    row.home_team = trim(get("home_team"));

    std::string reason;
    if (row.match_id.empty()) reason = "missing match_id";
    else if (row.offense_team.empty()) reason = "missing offense_team";
    else if (row.home_team.empty()) reason = "missing home_team";

    auto take = [&](const Field& f, auto& target) {
      if (!reason.empty()) return;
      if (!f.value) {
        reason = f.reason;
        return;
      }
      target = static_cast<std::remove_reference_t<decltype(target)>>(*f.value);
    };
    Field down = numeric_field(get("down"), "down");
    if (down.value && (*down.value != std::floor(*down.value) || *down.value < 1 || *down.value > 4)) {
      down = {std::nullopt, "invalid down '" + get("down") + "'"};
    }
    take(down, row.down);
    take(numeric_field(get("ydstogo"), "ydstogo"), row.ydstogo);
    take(flag_field(get("shotgun"), "shotgun"), row.shotgun);
    take(flag_field(get("no_huddle"), "no_huddle"), row.no_huddle);
    take(numeric_field(get("offense_score"), "offense_score"), row.offense_score);
    take(numeric_field(get("defense_score"), "defense_score"), row.defense_score);
    take(flag_field(get("goal_to_go"), "goal_to_go"), row.goal_to_go);
    take(numeric_field(get("yardline_100"), "yardline_100"), row.yardline_100);
    if (reason.empty()) {
      if (auto season = season_of(row.match_date, row.match_id)) {
        row.season = *season;
      } else {
        reason = "cannot derive season";
      }
    }
    if (!reason.empty()) {
      result.rejections.push_back({line, reason});
      continue;
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

ParseResult parse_plays(const std::filesystem::path& path, const ColumnMapping& mapping) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open CSV file " + path.string());
  return parse_plays(in, mapping);
}

CovariateRow derive_covariates(const RawPlayRow& row) {
  Situation s;
  s.home = row.offense_team == row.home_team;
  s.down = row.down;
  s.ydstogo = row.ydstogo;
  s.shotgun = row.shotgun == 1;
  s.no_huddle = row.no_huddle == 1;
  s.own_score = row.offense_score;
  s.opponent_score = row.defense_score;
  s.goal_to_go = row.goal_to_go == 1;
  s.yardline_100 = row.yardline_100;
  return derive_covariates(s, row.play_type == "pass" ? 1 : 0);
}

std::vector<PlaySequence> build_sequences(const std::vector<RawPlayRow>& rows) {
  std::vector<PlaySequence> out;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& row : rows) {
    const std::string key = row.match_id + '\x1f' + row.offense_team;
    auto [it, inserted] = index.try_emplace(key, out.size());
    if (inserted) out.push_back({row.match_id, row.offense_team, row.season, {}});
    const CovariateRow cov = derive_covariates(row);
    out[it->second].plays.push_back({cov.pass, cov.values()});
  }
  return out;
}

DatasetSplit split_by_season(std::vector<PlaySequence> sequences, const SeasonRange& range) {
  DatasetSplit split;
  std::map<int, std::int64_t> excluded;
  for (auto& seq : sequences) {
    if (seq.season >= range.train_first && seq.season <= range.train_last) {
      split.train_by_team[seq.team_id].push_back(split.train.size());
      split.train.push_back(std::move(seq));
    } else if (seq.season == range.test) {
      split.test_by_team[seq.team_id].push_back(split.test.size());
      split.test.push_back(std::move(seq));
    } else {
      ++excluded[seq.season];
      ++split.n_excluded;
    }
  }
  for (auto [season, count] : excluded) {
    split.warnings.push_back("excluded " + std::to_string(count) + " sequences from season " + std::to_string(season) +
                             " (outside " + std::to_string(range.train_first) + "-" + std::to_string(range.test) +
                             ")");
  }
  if (split.train.empty()) split.warnings.push_back("training split is empty; fitting is not possible");
  if (split.test.empty()) split.warnings.push_back("test split is empty; evaluation is disabled");
  for (const auto& w : split.warnings) spdlog::warn("{}", w);
  return split;
}

std::vector<DescriptiveStat> describe(const std::vector<const PlaySequence*>& sequences) {
  std::vector<std::string> names{"pass"};
  const auto& base = base_covariate_names();
  names.insert(names.end(), base.begin(), base.end());
  const std::size_t k = names.size();

  std::vector<DescriptiveStat> stats(k);
  std::vector<double> sum(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    stats[c].name = names[c];
    stats[c].min = std::numeric_limits<double>::infinity();
    stats[c].max = -std::numeric_limits<double>::infinity();
  }
  auto value = [](const Play& p, std::size_t c) { return c == 0 ? static_cast<double>(p.y) : p.x[c - 1]; };
  std::int64_t n = 0;
  for (const auto* seq : sequences) {
    for (const auto& p : seq->plays) {
      ++n;
      for (std::size_t c = 0; c < k; ++c) {
        const double v = value(p, c);
        sum[c] += v;
        stats[c].min = std::min(stats[c].min, v);
        stats[c].max = std::max(stats[c].max, v);
      }
    }
  }
  std::vector<double> sq(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) stats[c].mean = n > 0 ? sum[c] / static_cast<double>(n) : 0.0;
  for (const auto* seq : sequences) {
    for (const auto& p : seq->plays) {
      for (std::size_t c = 0; c < k; ++c) {
        const double d = value(p, c) - stats[c].mean;
        sq[c] += d * d;
      }
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    stats[c].n = n;
    stats[c].sd = n > 1 ? std::sqrt(sq[c] / static_cast<double>(n - 1)) : 0.0;
    if (n == 0) stats[c].min = stats[c].max = 0.0;
  }
  return stats;
}

std::vector<ProportionCell> pass_share_by_down_shotgun(const std::vector<const PlaySequence*>& sequences) {
  std::map<std::pair<int, int>, std::pair<std::int64_t, std::int64_t>> cells;  // (down, shotgun) -> (n, passes)
  for (const auto* seq : sequences) {
    for (const auto& p : seq->plays) {
      int down = 1;
      for (int d = 0; d < 4; ++d) {
        if (p.x[2 + static_cast<std::size_t>(d)] == 1.0) down = d + 1;
      }
      auto& cell = cells[{down, static_cast<int>(p.x[6])}];
      ++cell.first;
      cell.second += p.y;
    }
  }
  std::vector<ProportionCell> out;
  for (const auto& [key, counts] : cells) {
    out.push_back({"down" + std::to_string(key.first), key.second ? "shotgun" : "no shotgun", counts.first,
                   static_cast<double>(counts.second) / static_cast<double>(counts.first)});
  }
  return out;
}

std::vector<ProportionCell> pass_share_by_ydstogo_score(const std::vector<const PlaySequence*>& sequences) {
  std::map<std::pair<int, std::string>, std::pair<std::int64_t, std::int64_t>> cells;
  for (const auto* seq : sequences) {
    for (const auto& p : seq->plays) {
      const int yards = static_cast<int>(std::lround(p.x[1]));
      if (yards > 25) continue;
      auto& cell = cells[{yards, score_category(p.x[8])}];
      ++cell.first;
      cell.second += p.y;
    }
  }
  std::vector<ProportionCell> out;
  for (const auto& [key, counts] : cells) {
    out.push_back({std::to_string(key.first), key.second, counts.first,
                   static_cast<double>(counts.second) / static_cast<double>(counts.first)});
  }
  return out;
}

IngestSummary ingest_csv(const std::filesystem::path& csv, const ColumnMapping& mapping, const SeasonRange& range) {
  IngestSummary summary;
  summary.parse = parse_plays(csv, mapping);
  for (const auto& row : summary.parse.rows) {
    for (const auto& v : range_violations(derive_covariates(row))) {
      ++summary.n_range_violations;
      spdlog::debug("line {}: {}", row.line, v);
    }
  }
  if (summary.n_range_violations > 0) {
    spdlog::warn("{} covariate values outside the documented ranges (rows kept)", summary.n_range_violations);
  }
  if (!summary.parse.rejections.empty()) spdlog::warn("{} rows rejected", summary.parse.rejections.size());
  summary.split = split_by_season(build_sequences(summary.parse.rows), range);
  return summary;
}

std::vector<std::filesystem::path> write_store(const std::filesystem::path& dir, const IngestSummary& summary,
                                               const SeasonRange& range) {
  namespace fs = std::filesystem;
  std::vector<fs::path> written;
  const auto& split = summary.split;

  auto write_split = [&](const std::string& name, const std::vector<PlaySequence>& seqs,
                         const std::map<std::string, std::vector<std::size_t>>& by_team) {
    const fs::path sub = dir / name;
    fs::create_directories(sub);
    for (const auto& entry : fs::directory_iterator(sub)) {
      if (entry.path().extension() == ".jsonl") fs::remove(entry.path());
    }
    for (const auto& [team, indices] : by_team) {
      const fs::path file = sub / (team + ".jsonl");
      std::ofstream out(file, std::ios::binary);
      for (auto i : indices) out << sequence_record(seqs[i]).dump() << '\n';
      if (!out) throw std::runtime_error("failed writing " + file.string());
      written.push_back(file);
    }
  };
  write_split("train", split.train, split.train_by_team);
  write_split("test", split.test, split.test_by_team);

  std::vector<const PlaySequence*> all;
  for (const auto& s : split.train) all.push_back(&s);
  for (const auto& s : split.test) all.push_back(&s);

  json descriptives = json::array();
  for (const auto& d : describe(all)) {
    descriptives.push_back({{"name", d.name}, {"n", d.n}, {"mean", d.mean}, {"sd", d.sd}, {"min", d.min}, {"max", d.max}});
  }
  auto cells_json = [](const std::vector<ProportionCell>& cells) {
    json arr = json::array();
    for (const auto& c : cells) arr.push_back({{"row", c.row}, {"column", c.column}, {"n", c.n}, {"pass_share", c.pass_share}});
    return arr;
  };
  std::map<std::string, std::int64_t> reasons;
  for (const auto& r : summary.parse.rejections) {
    const auto space = r.reason.find(" '");
    ++reasons[space == std::string::npos ? r.reason : r.reason.substr(0, space)];
  }
  json rejection_lines = json::array();
  for (std::size_t i = 0; i < summary.parse.rejections.size() && i < 100; ++i) {
    rejection_lines.push_back({{"line", summary.parse.rejections[i].line}, {"reason", summary.parse.rejections[i].reason}});
  }
  std::set<std::string> all_matches;
  for (const auto* s : all) all_matches.insert(s->match_id);
  std::int64_t all_plays = 0;
  for (const auto* s : all) all_plays += static_cast<std::int64_t>(s->size());

  json teams_train = json::array();
  for (const auto& [team, _] : split.train_by_team) teams_train.push_back(team);
  json teams_test = json::array();
  for (const auto& [team, _] : split.test_by_team) teams_test.push_back(team);

  json manifest{
      {"format", "playcall-sequence-store"},
      {"version", 1},
      {"covariate_names", base_covariate_names()},
      {"seasons", {{"train_first", range.train_first}, {"train_last", range.train_last}, {"test", range.test}}},
      {"counts",
       {{"input_rows", summary.parse.n_input_rows},
        {"filtered_rows", summary.parse.n_filtered},
        {"accepted_rows", summary.parse.rows.size()},
        {"rejected_rows", summary.parse.rejections.size()},
        {"range_violations", summary.n_range_violations},
        {"excluded_sequences", split.n_excluded},
        {"matches", all_matches.size()},
        {"sequences", all.size()},
        {"plays", all_plays},
        {"train", split_counts(split.train)},
        {"test", split_counts(split.test)}}},
      {"teams", {{"train", teams_train}, {"test", teams_test}}},
      {"descriptives", descriptives},
      {"pass_share_by_down_shotgun", cells_json(pass_share_by_down_shotgun(all))},
      {"pass_share_by_ydstogo_score", cells_json(pass_share_by_ydstogo_score(all))},
      {"rejection_reasons", reasons},
      {"rejections", rejection_lines},
      {"warnings", split.warnings}};
  const fs::path manifest_path = dir / "manifest.json";
  std::ofstream out(manifest_path, std::ios::binary);
  out << manifest.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + manifest_path.string());
  written.push_back(manifest_path);
  return written;
}

StoreSplit read_store(const std::filesystem::path& dir, const std::string& split) {
  namespace fs = std::filesystem;
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream manifest_in(manifest_path);
  if (!manifest_in) throw SchemaError("sequence store " + dir.string() + " has no manifest.json");
  const json manifest = json::parse(manifest_in);

  StoreSplit out;
  out.covariate_names = manifest.at("covariate_names").get<std::vector<std::string>>();
  const fs::path sub = dir / split;
  if (!fs::is_directory(sub)) return out;

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(sub)) {
    if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    const std::string team = file.stem().string();
    std::ifstream in(file);
    std::string line;
    auto& seqs = out.by_team[team];
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      const json rec = json::parse(line);
      PlaySequence seq;
      seq.match_id = rec.at("match_id").get<std::string>();
      seq.season = rec.at("season").get<int>();
      seq.team_id = team;
      for (const auto& p : rec.at("plays")) {
        Play play{p.at("y").get<int>(), p.at("x").get<std::vector<double>>()};
        if (play.x.size() != out.covariate_names.size()) {
          throw SchemaError(file.string() + ": covariate vector length does not match the manifest");
        }
        seq.plays.push_back(std::move(play));
      }
      seqs.push_back(std::move(seq));
    }
  }
  return out;
}

}  // namespace playcall
