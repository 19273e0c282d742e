#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <pthread.h>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "playcall/covariates.hpp"
#include "playcall/errors.hpp"
#include "playcall/evaluate.hpp"
#include "playcall/ingest.hpp"
#include "playcall/log.hpp"
#include "playcall/model_io.hpp"
#include "playcall/parallel.hpp"
#include "playcall/pipeline.hpp"
#include "playcall/serve.hpp"
#include "run_manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace playcall::cli {

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kUsage = 2;

// --- ingest -----------------------------------------------------------------

struct IngestArgs {
  std::string input;
  std::string mapping;
  std::vector<std::string> map;
  std::string out;
  SeasonRange seasons;
};

int run_ingest(const IngestArgs& args) {
  RunManifest manifest("ingest");
  ColumnMapping mapping;
  if (!args.mapping.empty()) {
    mapping = ColumnMapping::load(args.mapping);
    manifest.add_input(args.mapping);
  }
  for (const auto& kv : args.map) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--map", "expected KEY=COLUMN, got '" + kv + "'");
    mapping.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  json mapping_json = json::object();
  for (const auto& [key, column] : mapping.entries()) mapping_json[key] = column;
  manifest.config() = {{"input", args.input},
                       {"mapping_file", args.mapping},
                       {"column_mapping", mapping_json},
                       {"out", args.out},
                       {"train_seasons", {args.seasons.train_first, args.seasons.train_last}},
                       {"test_season", args.seasons.test}};
  manifest.add_input(args.input);

  const auto summary = ingest_csv(args.input, mapping, args.seasons);
  for (const auto& path : write_store(args.out, summary, args.seasons)) manifest.add_output(path);

  std::int64_t train_plays = 0;
  std::int64_t test_plays = 0;
  for (const auto& s : summary.split.train) train_plays += static_cast<std::int64_t>(s.plays.size());
  for (const auto& s : summary.split.test) test_plays += static_cast<std::int64_t>(s.plays.size());
  std::printf("rows: %lld input, %lld filtered, %zu accepted, %zu rejected\n",
              static_cast<long long>(summary.parse.n_input_rows), static_cast<long long>(summary.parse.n_filtered),
              summary.parse.rows.size(), summary.parse.rejections.size());
  std::printf("train: %zu sequences, %lld plays; test: %zu sequences, %lld plays; excluded: %lld\n",
              summary.split.train.size(), static_cast<long long>(train_plays), summary.split.test.size(),
              static_cast<long long>(test_plays), static_cast<long long>(summary.split.n_excluded));
  std::printf("store: %s\n", args.out.c_str());

  manifest.notes() = {{"warnings", summary.split.warnings}};
  manifest.write(fs::path(args.out) / "run_manifest.json", kOk);
  return kOk;
}

// --- fit --------------------------------------------------------------------

struct FitArgs {
  std::string data;
  std::string team = "all";
  bool select = false;
  std::uint64_t seed = 1;
  int starts = 3;
  int jobs = 1;
  int states = 2;
  int max_iterations = 2000;
  std::string out;
};

int run_fit(const FitArgs& args) {
  RunManifest manifest("fit");
  manifest.config() = {{"data", args.data},     {"team", args.team},   {"select", args.select},
                       {"seed", args.seed},     {"starts", args.starts}, {"jobs", args.jobs},
                       {"states", args.states}, {"max_iterations", args.max_iterations}, {"out", args.out}};
  manifest.set_seed(args.seed);
  manifest.add_input(args.data);

  const auto store = read_store(args.data, "train");
  std::vector<std::string> all_teams;
  for (const auto& [team, _] : store.by_team) all_teams.push_back(team);
  if (all_teams.empty()) throw PreconditionError("training split in " + args.data + " is empty; nothing to fit");

  std::vector<std::size_t> selected;
  if (args.team == "all") {
    for (std::size_t i = 0; i < all_teams.size(); ++i) selected.push_back(i);
  } else {
    const auto it = std::find(all_teams.begin(), all_teams.end(), args.team);
    if (it == all_teams.end()) {
      std::string known;
      for (const auto& t : all_teams) known += (known.empty() ? "" : " ") + t;
      throw PreconditionError("team '" + args.team + "' has no training data; teams in store: " + known);
    }
    selected.push_back(static_cast<std::size_t>(it - all_teams.begin()));
  }

  fs::create_directories(args.out);
  std::vector<std::optional<FittedModel>> models(selected.size());
  std::vector<std::string> errors(selected.size());
  detail::parallel_for(selected.size(), args.jobs, [&](std::size_t k) {
    const std::size_t team_index = selected[k];
    const auto& team = all_teams[team_index];
    TeamFitOptions options;
    options.n_states = args.states;
    options.select = args.select;
    options.config.rng_seed = args.seed + team_index;
    options.config.n_starts = args.starts;
    options.config.max_iterations = args.max_iterations;
    try {
      models[k] = fit_team(team, store.by_team.at(team), store.covariate_names, options);
    } catch (const std::exception& e) {
      errors[k] = e.what();
      spdlog::error("{}: fit failed: {}", team, e.what());
    }
  });

  json failures = json::object();
  for (std::size_t k = 0; k < selected.size(); ++k) {
    const auto& team = all_teams[selected[k]];
    if (!models[k]) {
      failures[team] = errors[k];
      std::printf("%-4s FAILED  %s\n", team.c_str(), errors[k].c_str());
      continue;
    }
    const auto& m = *models[k];
    const auto path = fs::path(args.out) / (team + ".json");
    save_model(m, path);
    manifest.add_output(path);
    std::string covariates;
    for (const auto& c : m.spec.covariate_names) covariates += (covariates.empty() ? "" : ",") + c;
    std::printf("%-4s plays=%lld loglik=%.4f aic=%.4f converged=%s covariates=[%s]\n", team.c_str(),
                static_cast<long long>(m.fingerprint.n_plays), m.log_likelihood, m.aic,
                m.diagnostics.converged ? "yes" : "no", covariates.c_str());
  }
  const int code = failures.empty() ? kOk : kRuntimeFailure;
  manifest.notes() = {{"failures", failures}, {"team_seeds", "seed + index of team in sorted store order"}};
  manifest.write(fs::path(args.out) / "run_manifest.json", code);
  return code;
}

// --- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::string models;
  std::string data;
  std::optional<double> threshold;
  bool exclude_first_play = false;
  std::string out;
};

int run_evaluate(const EvaluateArgs& args) {
  RunManifest manifest("evaluate");
  manifest.config() = {{"models", args.models},
                       {"data", args.data},
                       {"threshold", args.threshold ? json(*args.threshold) : json(nullptr)},
                       {"exclude_first_play", args.exclude_first_play},
                       {"out", args.out}};
  manifest.add_input(args.models);
  manifest.add_input(args.data);

  const auto models = load_model_directory(args.models);
  const auto test = read_store(args.data, "test");
  EvaluateOptions options;
  options.threshold = args.threshold;
  options.include_first_play = !args.exclude_first_play;

  std::vector<TeamReport> reports;
  json skipped = json::array();
  for (const auto& [team, matches] : test.by_team) {
    const auto it = models.find(team);
    if (it == models.end()) {
      spdlog::warn("no model for test team {}; skipped", team);
      skipped.push_back(team);
      continue;
    }
    reports.push_back(evaluate_team(it->second, test.covariate_names, matches, options));
  }
  fs::create_directories(args.out);
  manifest.notes() = {{"skipped_teams", skipped}};
  if (reports.empty()) {
    spdlog::warn("no test sequences with a matching model; evaluation disabled");
    manifest.notes()["evaluation"] = "disabled: no test data with matching models";
    manifest.write(fs::path(args.out) / "run_manifest.json", kOk);
    return kOk;
  }

  const auto report = aggregate(std::move(reports));
  const auto text_path = fs::path(args.out) / "report.txt";
  const auto csv_path = fs::path(args.out) / "report.csv";
  {
    std::ofstream text(text_path, std::ios::binary);
    text << "one-step-ahead forecasts; threshold: "
         << (args.threshold ? std::to_string(*args.threshold) : std::string("none"))
         << "; first plays: " << (options.include_first_play ? "included" : "excluded") << '\n'
         << "covariates standardized with training mean/sd before fitting\n\n";
    write_report_text(text, report);
    std::ofstream csv(csv_path, std::ios::binary);
    write_report_csv(csv, report);
    if (!text || !csv) throw std::runtime_error("failed writing reports under " + args.out);
  }
  write_report_text(std::cout, report);
  manifest.add_output(text_path);
  manifest.add_output(csv_path);
  manifest.write(fs::path(args.out) / "run_manifest.json", kOk);
  return kOk;
}

// --- serve ------------------------------------------------------------------

struct ServeArgs {
  std::string models;
  std::string host = "127.0.0.1";
  int port = 8080;
  double threshold = 0.7;
  std::string journal;
};

int run_serve(const ServeArgs& args) {
  // Block termination signals before any thread starts so only the waiter
  // below receives them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  ServiceConfig config;
  config.threshold = args.threshold;
  if (!args.journal.empty()) config.journal = args.journal;
  SessionService service(load_model_directory(args.models), config);
  HttpServer server(service);
  const int port = server.bind(args.host, args.port);
  if (port < 0) {
    spdlog::error("cannot bind {}:{} (port busy or not permitted)", args.host, args.port);
    std::fprintf(stderr, "error: cannot bind %s:%d (port busy or not permitted)\n", args.host.c_str(), args.port);
    return kRuntimeFailure;
  }
  std::printf("listening on http://%s:%d/v1 with %zu models\n", args.host.c_str(), port,
              service.health().body["models"].size());
  std::fflush(stdout);

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("signal {}; shutting down", sig);
    server.stop();
  });
  const bool ok = server.listen();
  // listen() can return on its own (socket error); wake the waiter.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return ok ? kOk : kRuntimeFailure;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging_from_env();

  CLI::App app{"Hidden Markov play-call forecasting: ingest, fit, evaluate, serve", "playcall"};
  app.set_version_flag("--version", PLAYCALL_VERSION);
  app.set_config("--config", "", "INI/TOML file of option defaults (command-line flags take precedence)");
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Parse a play-by-play CSV into the sequence store");
  ingest_cmd->add_option("--input", ingest.input, "Play-by-play CSV")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--mapping", ingest.mapping, "key=column mapping file")->check(CLI::ExistingFile);
  ingest_cmd->add_option("--map", ingest.map, "Override one mapping entry, KEY=COLUMN (repeatable)");
  ingest_cmd->add_option("--out", ingest.out, "Output store directory")->required();
  ingest_cmd->add_option("--train-first", ingest.seasons.train_first, "First training season")->capture_default_str();
  ingest_cmd->add_option("--train-last", ingest.seasons.train_last, "Last training season")->capture_default_str();
  ingest_cmd->add_option("--test-season", ingest.seasons.test, "Test season")->capture_default_str();

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit one model per team from the training split");
  fit_cmd->add_option("--data", fit.data, "Sequence store directory")->required()->check(CLI::ExistingDirectory);
  fit_cmd->add_option("--team", fit.team, "Team code, or 'all'")->capture_default_str();
  fit_cmd->add_flag("--select", fit.select, "AIC forward selection instead of the full covariate set");
  fit_cmd->add_option("--seed", fit.seed, "Base RNG seed; each team uses seed + its store index")
      ->capture_default_str();
  fit_cmd->add_option("--starts", fit.starts, "Random starts per fit")->capture_default_str()->check(CLI::PositiveNumber);
  fit_cmd->add_option("--jobs", fit.jobs, "Teams fitted concurrently")->capture_default_str()->check(CLI::PositiveNumber);
  fit_cmd->add_option("--states", fit.states, "Hidden states")->capture_default_str()->check(CLI::Range(2, 6));
  fit_cmd->add_option("--max-iterations", fit.max_iterations, "Optimizer iteration cap")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--out", fit.out, "Output model directory")->required();

  EvaluateArgs evaluate;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score one-step-ahead forecasts on the test split");
  eval_cmd->add_option("--models", evaluate.models, "Model directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--data", evaluate.data, "Sequence store directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--threshold", evaluate.threshold, "Score only plays with max(p, 1-p) >= threshold")
      ->check(CLI::Range(0.5, 1.0));
  eval_cmd->add_flag("--exclude-first-play", evaluate.exclude_first_play, "Leave each match's first play unscored");
  eval_cmd->add_option("--out", evaluate.out, "Report directory")->required();

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the live forecasting HTTP service");
  serve_cmd->add_option("--models", serve.models, "Model directory")->required();
  serve_cmd->add_option("--port", serve.port, "TCP port (0 picks a free one)")
      ->capture_default_str()
      ->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", serve.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--threshold", serve.threshold, "Confidence threshold for advice")
      ->capture_default_str()
      ->check(CLI::Range(0.5, 1.0));
  serve_cmd->add_option("--journal", serve.journal, "Append-only session journal (replayed on start)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*ingest_cmd) return run_ingest(ingest);
    if (*fit_cmd) return run_fit(fit);
    if (*eval_cmd) return run_evaluate(evaluate);
    if (*serve_cmd) return run_serve(serve);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeFailure;
  }
  return kUsage;
}

}  // namespace playcall::cli

int main(int argc, char** argv) { return playcall::cli::main(argc, argv); }
