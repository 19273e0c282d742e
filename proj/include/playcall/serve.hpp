#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "playcall/core_hmm.hpp"
#include "playcall/covariates.hpp"
#include "playcall/estimation.hpp"

namespace httplib {
class Server;
}

namespace playcall {

struct FieldViolation {
  std::string field;
  std::string message;
};

// Parses the pre-snap situation fields of a request body. `home` is taken
// from the session, not the body. Returns the violations when any field is
// missing or outside its domain.
struct SituationParse {
  std::optional<Situation> situation;
  std::vector<FieldViolation> violations;
};
SituationParse parse_situation(const nlohmann::json& body, bool home);

// Loads every model document in `dir`, keyed by team. Throws when the
// directory does not exist or holds no models.
std::map<std::string, FittedModel> load_model_directory(const std::filesystem::path& dir);

struct ServiceConfig {
  double threshold = 0.7;
  std::optional<std::filesystem::path> journal;  // append-only event log, replayed on startup
};

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
};

// Match-session logic behind the HTTP routes. Thread-safe: sessions are
// created and looked up under a map lock; each session serializes its own
// appends and allows concurrent forecasts.
class SessionService {
 public:
  SessionService(std::map<std::string, FittedModel> models, ServiceConfig config = {});
  ~SessionService();

  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  ServiceResponse health() const;
  ServiceResponse create_session(const nlohmann::json& body);
  ServiceResponse forecast(const std::string& session_id, const nlohmann::json& body) const;
  ServiceResponse record_play(const std::string& session_id, const nlohmann::json& body);
  ServiceResponse get_session(const std::string& session_id) const;

  double threshold() const { return config_.threshold; }
  std::size_t n_sessions() const;

  // Model-scale history and incrementally maintained filtered state, for
  // equivalence checks against from-scratch recomputation.
  struct Snapshot {
    std::string team;
    PlaySequence history;
    std::vector<double> filtered_state_probs;
  };
  std::optional<Snapshot> snapshot(const std::string& session_id) const;

 private:
  struct Model;
  struct Session;

  std::shared_ptr<Session> find(const std::string& id) const;
  std::shared_ptr<Session> open_session(const std::string& id, const std::string& team, bool home);
  ServiceResponse append_play(Session& session, const nlohmann::json& body, bool journal);
  void journal_event(const nlohmann::json& event);
  void replay_journal();

  std::map<std::string, std::shared_ptr<const Model>> models_;
  ServiceConfig config_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex journal_mutex_;
};

nlohmann::json error_body(const std::string& code, const std::string& message,
                          const std::vector<FieldViolation>& violations = {});

// HTTP/JSON front end. Routes live under /v1.
class HttpServer {
 public:
  explicit HttpServer(SessionService& service);
  ~HttpServer();

  // Binds to host:port (port 0 picks a free port). Returns the bound port,
  // or -1 if binding failed.
  int bind(const std::string& host, int port);
  // Blocks serving requests until stop() is called.
  bool listen();
  void stop();

 private:
  SessionService& service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace playcall
