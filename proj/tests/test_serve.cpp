#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include <httplib.h>

#include "playcall/evaluate.hpp"
#include "playcall/model_io.hpp"
#include "playcall/serve.hpp"
#include "support/oracle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace playcall::test {

namespace {

// Homogeneous model: Gamma = [[0.75, 0.25], [0.25, 0.75]], pass_prob (0.2, 0.8).
FittedModel homogeneous_model(const std::string& team) {
  FittedModel m;
  m.team = team;
  m.spec = ModelSpec{2, {}};
  m.params.initial.delta = {0.5, 0.5};
  m.params.emissions.pass_prob = {0.2, 0.8};
  m.params.coeffs = TransitionCoefficients(2, 0);
  m.params.coeffs.intercept(0, 1) = std::log(1.0 / 3.0);
  m.params.coeffs.intercept(1, 0) = std::log(1.0 / 3.0);
  m.n_params = 5;
  return m;
}

FittedModel covariate_model(const std::string& team, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FittedModel m;
  m.team = team;
  m.spec = ModelSpec{2, {"ydstogo", "down3", "shotgun", "scorediff", "shotgun:ydstogo"}};
  m.params = oracle::random_params(rng, 2, 5, 0.8);
  m.params.emissions.pass_prob = {0.3, 0.85};
  m.covariate_scaling = {{"ydstogo", 8.6, 4.0, false},
                         {"down3", 0, 1, true},
                         {"shotgun", 0, 1, true},
                         {"scorediff", -1.5, 10.0, false},
                         {"shotgun:ydstogo", 4.5, 5.0, false}};
  m.n_params = n_model_params(m.spec);
  return m;
}

json situation(int down, int togo, bool shotgun = false, int own = 0, int opp = 0) {
  return {{"down", down},         {"ydstogo", togo},    {"shotgun", shotgun},        {"no_huddle", false},
          {"own_score", own},     {"opponent_score", opp}, {"goal_to_go", false},     {"yardline_100", 60}};
}

json play(const json& sit, const std::string& call) {
  json body = sit;
  body["actual_call"] = call;
  return body;
}

std::string create(SessionService& svc, const std::string& team, bool home = true) {
  const auto r = svc.create_session({{"team", team}, {"home", home}});
  EXPECT_EQ(r.status, 201);
  return r.body.at("session_id").get<std::string>();
}

}  // namespace

TEST(ParseSituation, AcceptsValidAndListsViolations) {
  auto ok = parse_situation(situation(3, 8, true, 7, 10), false);
  ASSERT_TRUE(ok.situation.has_value());
  EXPECT_EQ(ok.situation->down, 3);
  EXPECT_TRUE(ok.situation->shotgun);
  EXPECT_EQ(ok.situation->opponent_score, 10);

  auto nested = parse_situation(json{{"situation", situation(1, 10)}}, true);
  ASSERT_TRUE(nested.situation.has_value());
  EXPECT_TRUE(nested.situation->home);

  json bad = situation(5, 0);
  bad["shotgun"] = "yes";
  bad.erase("yardline_100");
  const auto r = parse_situation(bad, false);
  EXPECT_FALSE(r.situation.has_value());
  std::set<std::string> fields;
  for (const auto& v : r.violations) fields.insert(v.field);
  EXPECT_EQ(fields, (std::set<std::string>{"down", "ydstogo", "shotgun", "yardline_100"}));
}

TEST(SessionService, CreateValidatesTeam) {
  SessionService svc({{"KC", homogeneous_model("KC")}});
  const auto a = create(svc, "KC");
  const auto b = create(svc, "KC", false);
  EXPECT_NE(a, b);
  EXPECT_GE(a.size(), 32u);
  const auto unknown = svc.create_session({{"team", "XX"}, {"home", true}});
  EXPECT_EQ(unknown.status, 404);
  EXPECT_EQ(unknown.body["available_teams"], json::array({"KC"}));
  EXPECT_EQ(svc.create_session({{"home", true}}).status, 422);
  EXPECT_EQ(svc.create_session(json::array()).status, 422);
  EXPECT_EQ(svc.n_sessions(), 2u);
}

TEST(SessionService, ForecastExamplesAndPurity) {
  SessionService svc({{"KC", homogeneous_model("KC")}});
  const auto id = create(svc, "KC");
  const auto sit = situation(1, 10);

  const auto first = svc.forecast(id, sit);
  ASSERT_EQ(first.status, 200);
  EXPECT_DOUBLE_EQ(first.body["pass_prob"].get<double>(), 0.5);
  EXPECT_EQ(first.body["predicted_call"], "pass");
  EXPECT_EQ(first.body["threshold_advice"], "low_confidence");
  EXPECT_EQ(first.body["n_history"], 0);
  EXPECT_EQ(svc.forecast(id, sit).body, first.body);

  const auto recorded = svc.record_play(id, play(sit, "pass"));
  ASSERT_EQ(recorded.status, 200);
  EXPECT_EQ(recorded.body["n_history"], 1);

  const auto second = svc.forecast(id, sit);
  EXPECT_NEAR(second.body["pass_prob"].get<double>(), 0.59, 1e-12);
  EXPECT_NE(second.body["pass_prob"], first.body["pass_prob"]);
  EXPECT_NEAR(second.body["filtered_state_probs"][0].get<double>(), 0.2, 1e-15);
  EXPECT_NEAR(second.body["run_prob"].get<double>(), 0.41, 1e-12);
  EXPECT_EQ(svc.get_session(id).body["n_history"], 1);
}

TEST(SessionService, ThresholdAdvice) {
  SessionService svc({{"KC", homogeneous_model("KC")}}, ServiceConfig{0.55, std::nullopt});
  const auto id = create(svc, "KC");
  svc.record_play(id, play(situation(1, 10), "pass"));
  EXPECT_EQ(svc.forecast(id, situation(2, 5)).body["threshold_advice"], "consult");
}

TEST(SessionService, ErrorsForUnknownSessionsAndBadBodies) {
  SessionService svc({{"KC", homogeneous_model("KC")}});
  const auto id = create(svc, "KC");
  EXPECT_EQ(svc.forecast("deadbeef", situation(1, 10)).status, 404);
  EXPECT_EQ(svc.record_play("deadbeef", play(situation(1, 10), "run")).status, 404);
  EXPECT_EQ(svc.get_session("deadbeef").status, 404);
  EXPECT_EQ(svc.forecast(id, situation(9, 10)).status, 422);
  EXPECT_EQ(svc.record_play(id, play(situation(1, 10), "punt")).status, 422);
  EXPECT_EQ(svc.record_play(id, situation(1, 10)).status, 422);
  const auto fresh = svc.get_session(id);
  EXPECT_EQ(fresh.status, 200);
  EXPECT_EQ(fresh.body["n_history"], 0);
  EXPECT_EQ(fresh.body["team"], "KC");
}

TEST(SessionService, MatchesLibraryForecastBitForBit) {
  const auto model = covariate_model("NE", 3);
  SessionService svc({{"NE", model}});
  const auto id = create(svc, "NE", false);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> down(1, 4), togo(1, 20), score(0, 35);
  std::bernoulli_distribution coin(0.5);
  PlaySequence history{"live", "NE", 0, {}};
  for (int p = 0; p < 80; ++p) {
    const auto sit_json = situation(down(rng), togo(rng), coin(rng), score(rng), score(rng));
    const auto sit = *parse_situation(sit_json, false).situation;
    const auto x = prepare_covariates(model, base_covariate_names(), derive_covariates(sit, 0).values());
    const auto expected = history.plays.empty() ? forecast_first(model.spec, model.params)
                                                : forecast_next(model.spec, model.params, history, x);
    const auto got = svc.forecast(id, sit_json);
    ASSERT_EQ(got.body["pass_prob"].get<double>(), expected.pass_prob) << p;

    const bool pass = coin(rng);
    svc.record_play(id, play(sit_json, pass ? "pass" : "run"));
    history.plays.push_back({pass ? 1 : 0, x});

    const auto snap = svc.snapshot(id);
    ASSERT_TRUE(snap.has_value());
    const auto scratch = filtered_state_probs(model.spec, model.params, snap->history);
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(snap->filtered_state_probs[i], scratch[i], 1e-12);
  }
}

TEST(SessionService, ForecastsBetweenAppendsDoNotChangeState) {
  const auto model = covariate_model("NE", 4);
  SessionService svc({{"NE", model}});
  const auto quiet = create(svc, "NE");
  const auto chatty = create(svc, "NE");
  for (int p = 0; p < 20; ++p) {
    const auto sit = situation(1 + p % 4, 1 + p % 13, p % 2 == 0);
    for (int k = 0; k < p % 3; ++k) svc.forecast(chatty, situation(2, 3 + k));
    svc.record_play(quiet, play(sit, p % 3 ? "pass" : "run"));
    svc.record_play(chatty, play(sit, p % 3 ? "pass" : "run"));
  }
  EXPECT_EQ(svc.snapshot(quiet)->filtered_state_probs, svc.snapshot(chatty)->filtered_state_probs);
}

TEST(SessionService, ConcurrentAppendsAreSerialized) {
  SessionService svc({{"NE", covariate_model("NE", 6)}});
  const auto id = create(svc, "NE");
  std::vector<std::thread> workers;
  for (int t = 0; t < 4; ++t) {
    workers.emplace_back([&, t] {
      for (int p = 0; p < 50; ++p) {
        svc.record_play(id, play(situation(1 + (p + t) % 4, 5), p % 2 ? "pass" : "run"));
        svc.forecast(id, situation(1, 10));
      }
    });
  }
  for (auto& w : workers) w.join();
  EXPECT_EQ(svc.get_session(id).body["n_history"], 200);
  const auto snap = svc.snapshot(id);
  const auto scratch = filtered_state_probs(covariate_model("NE", 6).spec, covariate_model("NE", 6).params,
                                            snap->history);
  EXPECT_NEAR(snap->filtered_state_probs[0], scratch[0], 1e-12);
}

TEST(SessionService, JournalReplayRestoresSessions) {
  const auto dir = fs::temp_directory_path() / "playcall_journal_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto journal = dir / "sessions.jsonl";
  std::string id;
  json before;
  {
    SessionService svc({{"NE", covariate_model("NE", 7)}}, ServiceConfig{0.7, journal});
    id = create(svc, "NE");
    for (int p = 0; p < 5; ++p) svc.record_play(id, play(situation(1 + p % 4, 7), "pass"));
    svc.record_play(id, play(situation(7, 7), "pass"));  // rejected, not journaled
    before = svc.forecast(id, situation(3, 2)).body;
  }
  SessionService restored({{"NE", covariate_model("NE", 7)}}, ServiceConfig{0.7, journal});
  EXPECT_EQ(restored.get_session(id).body["n_history"], 5);
  EXPECT_EQ(restored.forecast(id, situation(3, 2)).body, before);
  fs::remove_all(dir);
}

TEST(LoadModelDirectory, LoadsModelsAndRejectsBadDirectories) {
  const auto dir = fs::temp_directory_path() / "playcall_models_test";
  fs::remove_all(dir);
  EXPECT_ANY_THROW(load_model_directory(dir));
  fs::create_directories(dir);
  EXPECT_ANY_THROW(load_model_directory(dir));
  save_model(homogeneous_model("KC"), dir / "KC.json");
  save_model(covariate_model("NE", 1), dir / "NE.json");
  std::ofstream(dir / "run_manifest.json") << R"({"command": "fit"})";
  const auto models = load_model_directory(dir);
  EXPECT_EQ(models.size(), 2u);
  EXPECT_TRUE(models.count("NE"));
  fs::remove_all(dir);
}

TEST(HttpServer, ServesVersionedApi) {
  SessionService svc({{"KC", homogeneous_model("KC")}});
  HttpServer server(svc);
  const int port = server.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread loop([&] { server.listen(); });
  httplib::Client client("127.0.0.1", port);

  auto health = client.Get("/v1/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(json::parse(health->body)["models"][0]["team"], "KC");
  EXPECT_EQ(health->get_header_value("Access-Control-Allow-Origin"), "*");

  auto created = client.Post("/v1/sessions", R"({"team": "KC", "home": true})", "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  const auto id = json::parse(created->body)["session_id"].get<std::string>();

  auto forecast = client.Post("/v1/sessions/" + id + "/forecast", situation(1, 10).dump(), "application/json");
  EXPECT_EQ(forecast->status, 200);
  EXPECT_DOUBLE_EQ(json::parse(forecast->body)["pass_prob"].get<double>(), 0.5);

  auto recorded =
      client.Post("/v1/sessions/" + id + "/plays", play(situation(1, 10), "pass").dump(), "application/json");
  EXPECT_EQ(recorded->status, 200);
  forecast = client.Post("/v1/sessions/" + id + "/forecast", situation(1, 10).dump(), "application/json");
  EXPECT_NEAR(json::parse(forecast->body)["pass_prob"].get<double>(), 0.59, 1e-12);

  auto summary = client.Get("/v1/sessions/" + id);
  EXPECT_EQ(summary->status, 200);
  EXPECT_EQ(json::parse(summary->body)["n_history"], 1);

  EXPECT_EQ(client.Post("/v1/sessions", R"({"team": "XX", "home": true})", "application/json")->status, 404);
  EXPECT_EQ(client.Post("/v1/sessions", "{not json", "application/json")->status, 400);
  auto invalid = client.Post("/v1/sessions/" + id + "/forecast", R"({"down": 0})", "application/json");
  EXPECT_EQ(invalid->status, 422);
  EXPECT_FALSE(json::parse(invalid->body)["violations"].empty());
  EXPECT_EQ(client.Get("/v1/sessions/abc123")->status, 404);
  EXPECT_EQ(client.Get("/v1/nothing")->status, 404);
  EXPECT_EQ(client.Options("/v1/sessions")->status, 204);

  server.stop();
  loop.join();
}

TEST(HttpServer, BusyPortFailsToBind) {
  SessionService svc({{"KC", homogeneous_model("KC")}});
  HttpServer first(svc);
  const int port = first.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  HttpServer second(svc);
  EXPECT_EQ(second.bind("127.0.0.1", port), -1);
}

}  // namespace playcall::test
