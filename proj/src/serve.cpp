#include "playcall/serve.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "playcall/errors.hpp"
#include "playcall/evaluate.hpp"
#include "playcall/model_io.hpp"

namespace playcall {

using nlohmann::json;

namespace {

std::string iso_time(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string new_session_id() {
  static thread_local std::random_device device;
  std::ostringstream id;
  id << std::hex;
  for (int i = 0; i < 4; ++i) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(device()));
    id << buf;
  }
  return id.str();
}

std::optional<double> number_field(const json& body, const char* name, std::vector<FieldViolation>& violations) {
  if (!body.contains(name)) {
    violations.push_back({name, "required"});
    return std::nullopt;
  }
  const auto& v = body.at(name);
  if (!v.is_number() || !std::isfinite(v.get<double>())) {
    violations.push_back({name, "must be a finite number"});
    return std::nullopt;
  }
  return v.get<double>();
}

std::optional<bool> flag_field(const json& body, const char* name, std::vector<FieldViolation>& violations) {
  if (!body.contains(name)) {
    violations.push_back({name, "required"});
    return std::nullopt;
  }
  const auto& v = body.at(name);
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number() && (v.get<double>() == 0.0 || v.get<double>() == 1.0)) return v.get<double>() == 1.0;
  violations.push_back({name, "must be true/false or 0/1"});
  return std::nullopt;
}

const json& situation_part(const json& body) {
  return body.contains("situation") && body.at("situation").is_object() ? body.at("situation") : body;
}

}  // namespace

json error_body(const std::string& code, const std::string& message, const std::vector<FieldViolation>& violations) {
  json v = json::array();
  for (const auto& f : violations) v.push_back({{"field", f.field}, {"message", f.message}});
  return {{"code", code}, {"message", message}, {"violations", v}};
}

SituationParse parse_situation(const json& request, bool home) {
  const json& body = situation_part(request);
  SituationParse out;
  auto& violations = out.violations;
  if (!body.is_object()) {
    violations.push_back({"", "body must be a JSON object"});
    return out;
  }
  Situation s;
  s.home = home;
  if (auto down = number_field(body, "down", violations)) {
    if (*down != std::floor(*down) || *down < 1 || *down > 4) violations.push_back({"down", "must be an integer 1-4"});
    else s.down = static_cast<int>(*down);
  }
  if (auto v = number_field(body, "ydstogo", violations)) {
    if (*v < 1 || *v > 99) violations.push_back({"ydstogo", "must be between 1 and 99"});
    else s.ydstogo = *v;
  }
  if (auto v = flag_field(body, "shotgun", violations)) s.shotgun = *v;
  if (auto v = flag_field(body, "no_huddle", violations)) s.no_huddle = *v;
  if (auto v = number_field(body, "own_score", violations)) {
    if (*v < 0) violations.push_back({"own_score", "must be >= 0"});
    else s.own_score = *v;
  }
  if (auto v = number_field(body, "opponent_score", violations)) {
    if (*v < 0) violations.push_back({"opponent_score", "must be >= 0"});
    else s.opponent_score = *v;
  }
  if (auto v = flag_field(body, "goal_to_go", violations)) s.goal_to_go = *v;
  if (auto v = number_field(body, "yardline_100", violations)) {
    if (*v < 0 || *v > 100) violations.push_back({"yardline_100", "must be between 0 and 100"});
    else s.yardline_100 = *v;
  }
  if (violations.empty()) out.situation = s;
  return out;
}

std::map<std::string, FittedModel> load_model_directory(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error("model directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, FittedModel> models;
  for (const auto& file : files) {
    std::ifstream in(file);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception&) {
      spdlog::warn("skipping {}: not valid JSON", file.string());
      continue;
    }
    if (!doc.is_object() || doc.value("format", "") != "playcall-hmm-model") continue;
    auto model = model_from_json(doc);
    models.emplace(model.team, std::move(model));
  }
  if (models.empty()) throw std::runtime_error("no model files found in " + dir.string());
  return models;
}

struct SessionService::Model {
  FittedModel fitted;
  CovariateExpander expander;

  explicit Model(FittedModel m)
      : fitted(std::move(m)), expander(base_covariate_names(), fitted.spec.covariate_names) {}

  std::vector<double> covariates(const Situation& s) const {
    auto x = expander.expand(derive_covariates(s, 0).values());
    apply_scaling(x, fitted.covariate_scaling);
    return x;
  }
};

struct SessionService::Session {
  std::string id;
  std::string team;
  bool home = false;
  std::shared_ptr<const Model> model;
  PlaySequence history;
  std::unique_ptr<ForwardFilter> filter;
  std::chrono::system_clock::time_point created;
  std::chrono::system_clock::time_point updated;
  mutable std::shared_mutex mutex;
};

SessionService::SessionService(std::map<std::string, FittedModel> models, ServiceConfig config)
    : config_(std::move(config)) {
  if (!(config_.threshold >= 0.5 && config_.threshold <= 1.0)) {
    throw std::invalid_argument("threshold must lie in [0.5, 1]");
  }
  for (auto& [team, model] : models) models_.emplace(team, std::make_shared<const Model>(std::move(model)));
  if (config_.journal) replay_journal();
}

SessionService::~SessionService() = default;

std::size_t SessionService::n_sessions() const {
  std::shared_lock lock(sessions_mutex_);
  return sessions_.size();
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::shared_ptr<SessionService::Session> SessionService::open_session(const std::string& id, const std::string& team,
                                                                      bool home) {
  auto session = std::make_shared<Session>();
  session->id = id;
  session->team = team;
  session->home = home;
  session->model = models_.at(team);
  session->history = {id, team, 0, {}};
  session->filter = std::make_unique<ForwardFilter>(session->model->fitted.spec, session->model->fitted.params);
  session->created = session->updated = std::chrono::system_clock::now();
  std::unique_lock lock(sessions_mutex_);
  sessions_[id] = session;
  return session;
}

ServiceResponse SessionService::health() const {
  json inventory = json::array();
  for (const auto& [team, m] : models_) {
    inventory.push_back({{"team", team},
                         {"n_states", m->fitted.spec.n_states},
                         {"covariates", m->fitted.spec.covariate_names},
                         {"aic", m->fitted.aic}});
  }
  return {200, {{"status", "ok"}, {"models", inventory}, {"threshold", config_.threshold}, {"n_sessions", n_sessions()}}};
}

ServiceResponse SessionService::create_session(const json& body) {
  std::vector<FieldViolation> violations;
  if (!body.is_object()) return {422, error_body("invalid_request", "body must be a JSON object")};
  if (!body.contains("team") || !body.at("team").is_string()) violations.push_back({"team", "required string"});
  auto home = flag_field(body, "home", violations);
  if (!violations.empty()) return {422, error_body("invalid_request", "invalid session request", violations)};

  const auto team = body.at("team").get<std::string>();
  if (!models_.contains(team)) {
    json err = error_body("unknown_team", "no model loaded for team '" + team + "'");
    json teams = json::array();
    for (const auto& [t, _] : models_) teams.push_back(t);
    err["available_teams"] = teams;
    return {404, err};
  }
  auto session = open_session(new_session_id(), team, *home);
  journal_event({{"event", "create"}, {"session_id", session->id}, {"team", team}, {"home", *home}});
  return {201, {{"session_id", session->id}, {"team", team}, {"home", *home}, {"n_history", 0}}};
}

ServiceResponse SessionService::forecast(const std::string& session_id, const json& body) const {
  auto session = find(session_id);
  if (!session) return {404, error_body("not_found", "unknown session '" + session_id + "'")};
  auto parsed = parse_situation(body, session->home);
  if (!parsed.situation) return {422, error_body("invalid_situation", "invalid situation", parsed.violations)};
  const auto x = session->model->covariates(*parsed.situation);

  ForecastResult result;
  {
    std::shared_lock lock(session->mutex);
    result = session->filter->n_observed() == 0 ? forecast_first(session->model->fitted.spec, session->model->fitted.params)
                                                : session->filter->forecast(x);
  }
  const double confidence = std::max(result.pass_prob, 1.0 - result.pass_prob);
  return {200,
          {{"pass_prob", result.pass_prob},
           {"run_prob", result.run_prob()},
           {"predicted_call", result.predicted_call == 1 ? "pass" : "run"},
           {"filtered_state_probs", result.filtered_state_probs},
           {"n_history", result.n_history},
           {"threshold", config_.threshold},
           {"threshold_advice", confidence >= config_.threshold ? "consult" : "low_confidence"}}};
}

ServiceResponse SessionService::append_play(Session& session, const json& body, bool journal) {
  auto parsed = parse_situation(body, session.home);
  std::optional<int> y;
  if (body.is_object() && body.contains("actual_call") && body.at("actual_call").is_string()) {
    const auto call = body.at("actual_call").get<std::string>();
    if (call == "pass") y = 1;
    else if (call == "run") y = 0;
  }
  if (!y) parsed.violations.push_back({"actual_call", "must be \"run\" or \"pass\""});
  if (!parsed.violations.empty()) return {422, error_body("invalid_play", "invalid play record", parsed.violations)};

  const auto x = session.model->covariates(*parsed.situation);
  int n_history = 0;
  {
    std::unique_lock lock(session.mutex);
    session.filter->observe(*y, x);
    session.history.plays.push_back({*y, x});
    session.updated = std::chrono::system_clock::now();
    n_history = static_cast<int>(session.history.size());
    // Journal under the session lock so replay order matches append order.
    if (journal) journal_event({{"event", "play"}, {"session_id", session.id}, {"body", body}});
  }
  return {200, {{"session_id", session.id}, {"n_history", n_history}}};
}

ServiceResponse SessionService::record_play(const std::string& session_id, const json& body) {
  auto session = find(session_id);
  if (!session) return {404, error_body("not_found", "unknown session '" + session_id + "'")};
  return append_play(*session, body, true);
}

ServiceResponse SessionService::get_session(const std::string& session_id) const {
  auto session = find(session_id);
  if (!session) return {404, error_body("not_found", "unknown session '" + session_id + "'")};
  std::shared_lock lock(session->mutex);
  const auto probs = session->filter->n_observed() == 0
                         ? session->model->fitted.params.initial.delta
                         : std::vector<double>(session->filter->state_probs().begin(), session->filter->state_probs().end());
  return {200,
          {{"session_id", session->id},
           {"team", session->team},
           {"home", session->home},
           {"model_id", session->team},
           {"n_history", session->history.size()},
           {"filtered_state_probs", probs},
           {"created", iso_time(session->created)},
           {"updated", iso_time(session->updated)}}};
}

std::optional<SessionService::Snapshot> SessionService::snapshot(const std::string& session_id) const {
  auto session = find(session_id);
  if (!session) return std::nullopt;
  std::shared_lock lock(session->mutex);
  auto probs = session->filter->state_probs();
  return Snapshot{session->team, session->history, {probs.begin(), probs.end()}};
}

void SessionService::journal_event(const json& event) {
  if (!config_.journal) return;
  std::lock_guard lock(journal_mutex_);
  std::ofstream out(*config_.journal, std::ios::app | std::ios::binary);
  out << event.dump() << '\n';
  if (!out) spdlog::error("failed writing journal {}", config_.journal->string());
}

void SessionService::replay_journal() {
  std::ifstream in(*config_.journal);
  if (!in) return;
  std::string line;
  int replayed = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json event;
    try {
      event = json::parse(line);
    } catch (const json::exception&) {
      spdlog::warn("journal: skipping unreadable line");
      continue;
    }
    const auto kind = event.value("event", "");
    const auto id = event.value("session_id", "");
    if (kind == "create") {
      const auto team = event.value("team", "");
      if (!models_.contains(team)) {
        spdlog::warn("journal: session {} references unknown team {}", id, team);
        continue;
      }
      open_session(id, team, event.value("home", false));
    } else if (kind == "play") {
      if (auto session = find(id)) append_play(*session, event.at("body"), false);
    }
    ++replayed;
  }
  spdlog::info("journal: replayed {} events", replayed);
}

HttpServer::HttpServer(SessionService& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto& srv = *server_;
  // The library default adds SO_REUSEPORT, which would let a second
  // instance share a busy port instead of failing.
  srv.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
  });
  auto reply = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto parse_body = [](const httplib::Request& req, httplib::Response& res) -> std::optional<json> {
    try {
      return req.body.empty() ? json::object() : json::parse(req.body);
    } catch (const json::exception& e) {
      res.status = 400;
      res.set_content(error_body("malformed_json", e.what()).dump(), "application/json");
      return std::nullopt;
    }
  };

  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  srv.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  srv.Get("/v1/health", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, service_.health()); });
  srv.Post("/v1/sessions", [this, reply, parse_body](const httplib::Request& req, httplib::Response& res) {
    if (auto body = parse_body(req, res)) reply(res, service_.create_session(*body));
  });
  srv.Get(R"(/v1/sessions/([0-9a-f]+))", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service_.get_session(req.matches[1]));
  });
  srv.Post(R"(/v1/sessions/([0-9a-f]+)/forecast)",
           [this, reply, parse_body](const httplib::Request& req, httplib::Response& res) {
             if (auto body = parse_body(req, res)) reply(res, service_.forecast(req.matches[1], *body));
           });
  srv.Post(R"(/v1/sessions/([0-9a-f]+)/plays)",
           [this, reply, parse_body](const httplib::Request& req, httplib::Response& res) {
             if (auto body = parse_body(req, res)) reply(res, service_.record_play(req.matches[1], *body));
           });

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(error_body("internal", message).dump(), "application/json");
  });
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) res.set_content(error_body("not_found", "no such route").dump(), "application/json");
  });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return server_->listen_after_bind(); }

void HttpServer::stop() { server_->stop(); }

}  // namespace playcall
