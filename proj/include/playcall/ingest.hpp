#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "playcall/core_hmm.hpp"
#include "playcall/covariates.hpp"

namespace playcall {

// Minimal RFC 4180 reader: quoted fields, doubled quotes, embedded newlines,
// CRLF or LF line endings.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(&in) {}

  // Reads the next record. Returns false at end of input.
  bool next(std::vector<std::string>& fields);
  // Physical line on which the last record started (1-based).
  std::int64_t record_line() const { return record_line_; }

 private:
  std::istream* in_;
  std::int64_t line_ = 1;
  std::int64_t record_line_ = 0;
};

// Logical field -> CSV column. Defaults follow the Kaggle nflscrapR
// play-by-play schema.
struct ColumnMapping {
  std::string play_type = "play_type";
  std::string offense_team = "posteam";
  std::string home_team = "home_team";
  std::string down = "down";
  std::string ydstogo = "ydstogo";
  std::string shotgun = "shotgun";
  std::string no_huddle = "no_huddle";
  std::string offense_score = "posteam_score";
  std::string defense_score = "defteam_score";
  std::string goal_to_go = "goal_to_go";
  std::string yardline_100 = "yardline_100";
  std::string match_id = "game_id";
  std::string match_date = "game_date";

  // Throws std::invalid_argument on an unknown key.
  void set(const std::string& key, const std::string& column);
  std::vector<std::pair<std::string, std::string>> entries() const;

  // key=value lines; '#' starts a comment; blank lines ignored.
  static ColumnMapping load(const std::filesystem::path& path);
  static ColumnMapping load(const std::filesystem::path& path, ColumnMapping base);
};

struct RawPlayRow {
  std::int64_t line = 0;
  std::string match_id;
  std::string match_date;
  int season = 0;
  std::string play_type;
  std::string offense_team;
  std::string home_team;
  int down = 0;
  double ydstogo = 0.0;
  int shotgun = 0;
  int no_huddle = 0;
  double offense_score = 0.0;
  double defense_score = 0.0;
  int goal_to_go = 0;
  double yardline_100 = 0.0;
};

struct Rejection {
  std::int64_t line = 0;
  std::string reason;
};

struct ParseResult {
  std::vector<RawPlayRow> rows;
  std::vector<Rejection> rejections;
  std::int64_t n_input_rows = 0;
  std::int64_t n_filtered = 0;  // play type other than run/pass
};

// Reads run/pass plays in file order. Rows of any other play type are
// counted in n_filtered; run/pass rows that fail coercion are rejected with a
// reason. Throws SchemaError when a mapped column is missing from the header.
ParseResult parse_plays(std::istream& in, const ColumnMapping& mapping = {});
ParseResult parse_plays(const std::filesystem::path& path, const ColumnMapping& mapping = {});

// NFL season of a match: January/February games belong to the previous
// year's season. Uses the date (YYYY-MM-DD) when present, else the leading
// YYYYMMDD of the match id. Returns nullopt when neither parses.
std::optional<int> season_of(const std::string& match_date, const std::string& match_id);

CovariateRow derive_covariates(const RawPlayRow& row);

// One sequence per (match, offense team), plays in file order. Sequences are
// ordered by first appearance. Covariates follow base_covariate_names().
std::vector<PlaySequence> build_sequences(const std::vector<RawPlayRow>& rows);

struct SeasonRange {
  int train_first = 2009;
  int train_last = 2017;
  int test = 2018;
};

struct DatasetSplit {
  std::vector<PlaySequence> train;
  std::vector<PlaySequence> test;
  std::map<std::string, std::vector<std::size_t>> train_by_team;
  std::map<std::string, std::vector<std::size_t>> test_by_team;
  std::int64_t n_excluded = 0;
  std::vector<std::string> warnings;
};

DatasetSplit split_by_season(std::vector<PlaySequence> sequences, const SeasonRange& range = {});

struct DescriptiveStat {
  std::string name;
  std::int64_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation
  double min = 0.0;
  double max = 0.0;
};

// Response ("pass") followed by every base covariate.
std::vector<DescriptiveStat> describe(const std::vector<const PlaySequence*>& sequences);

struct ProportionCell {
  std::string row;
  std::string column;
  std::int64_t n = 0;
  double pass_share = 0.0;
};

// Empirical pass shares by down x shotgun and by yards-to-go (<= 25) x
// score-difference category.
std::vector<ProportionCell> pass_share_by_down_shotgun(const std::vector<const PlaySequence*>& sequences);
std::vector<ProportionCell> pass_share_by_ydstogo_score(const std::vector<const PlaySequence*>& sequences);

// --- Sequence store ---------------------------------------------------------
//
// <dir>/train/<TEAM>.jsonl and <dir>/test/<TEAM>.jsonl, one JSON record per
// match: {"match_id", "season", "plays": [{"y", "x": [...]}]}, plus
// <dir>/manifest.json.

struct IngestSummary {
  ParseResult parse;
  DatasetSplit split;
  std::int64_t n_range_violations = 0;
};

IngestSummary ingest_csv(const std::filesystem::path& csv, const ColumnMapping& mapping = {},
                         const SeasonRange& range = {});

// Writes the store; returns the paths written (manifest last).
std::vector<std::filesystem::path> write_store(const std::filesystem::path& dir, const IngestSummary& summary,
                                               const SeasonRange& range = {});

struct StoreSplit {
  std::vector<std::string> covariate_names;
  std::map<std::string, std::vector<PlaySequence>> by_team;
};

// split is "train" or "test". Missing split directory yields an empty map.
StoreSplit read_store(const std::filesystem::path& dir, const std::string& split);

}  // namespace playcall
