#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "partnr/config.hpp"
#include "partnr/error.hpp"
#include "partnr/loop.hpp"

namespace httplib {
class Server;
}

namespace partnr {

// Raised inside the loop thread when the service shuts a session down.
class SessionStopped : public Error {
 public:
  using Error::Error;
};

// Teacher whose answers arrive over HTTP. query() and observe_correction()
// run on the loop thread and block; answer() and correct() run on handler
// threads. A query has at most one accepted answer.
class HumanTeacher : public Teacher {
 public:
  struct Pending {
    std::int64_t id = 0;
    Role role = Role::kPick;
    bool correction = false;  // correction window rather than a query
  };

  HumanTeacher(double query_timeout_s, double correction_window_s);

  Pixel query(const DecisionContext& ctx) override;
  std::optional<Pixel> observe_correction(const DecisionContext& ctx, Pixel executed) override;

  // Opens the next query or correction window under this id before the loop
  // blocks on it, so an answer may arrive as soon as the event is visible.
  void announce(std::int64_t id, Role role, bool correction, int width, int height);

  // Throws Conflict when no matching query is pending or it was already
  // answered, InvalidInput for out-of-bounds pixels.
  void answer(Role role, std::optional<std::int64_t> id, Pixel pixel);
  void correct(Role role, std::optional<std::int64_t> id, std::optional<Pixel> pixel);

  std::optional<Pending> pending() const;
  void stop();

 private:
  std::optional<Pixel> wait(Role role, bool correction, double timeout_s, const SceneState& scene);

  double query_timeout_s_;
  double correction_window_s_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::optional<Pending> pending_;
  std::optional<std::optional<Pixel>> reply_;
  int width_ = 0;
  int height_ = 0;
  std::int64_t next_id_ = 0;
  bool announced_ = false;
  bool stopped_ = false;
};

struct ServiceOptions {
  std::string static_dir;   // served at / when set
  std::string output_dir;   // run outputs land in <output_dir>/<session id>
};

// One live session: a loop thread running the full experiment with a human
// teacher, plus the versioned event log and snapshot the handlers read.
class LiveSession {
 public:
  LiveSession(std::string id, ExperimentConfig cfg, std::string output_dir);
  ~LiveSession();

  const std::string& id() const { return id_; }
  HumanTeacher& teacher() { return teacher_; }

  nlohmann::json snapshot() const;
  // Blocks until the version exceeds `after` or the timeout passes.
  nlohmann::json wait_snapshot(std::int64_t after, double timeout_s) const;

  struct Event {
    std::int64_t version;
    std::string type;
    nlohmann::json payload;
  };
  // Events with version > after; waits up to timeout_s when there are none.
  std::vector<Event> events_after(std::int64_t after, double timeout_s) const;

  bool finished() const;
  std::optional<nlohmann::json> metrics() const;
  void stop();
  void join();

 private:
  void run();
  void publish(const std::string& type, nlohmann::json payload);

  std::string id_;
  ExperimentConfig cfg_;
  std::string output_dir_;
  HumanTeacher teacher_;

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::int64_t version_ = 0;
  std::vector<Event> events_;
  nlohmann::json snapshot_;
  nlohmann::json last_gate_ = nlohmann::json::object();
  std::optional<nlohmann::json> metrics_;
  std::string phase_ = "starting";
  bool finished_ = false;
  std::thread worker_;
};

// HTTP front end:
//   POST /session                   create from a config object (partial allowed)
//   GET  /session/{id}/state        snapshot; ?after=V long-polls for a newer one
//   POST /session/{id}/demonstration {"role","pixel":[u,v],"query_id"}
//   POST /session/{id}/correction    {"role","pixel":[u,v] or null,"query_id"}
//   GET  /session/{id}/events        server-sent events; ?since=V or Last-Event-ID
//   GET  /                          UI assets
// Errors: 400 validation, 404 unknown session, 409 conflict.
class SessionService {
 public:
  SessionService(ExperimentConfig defaults, ServiceOptions options);
  ~SessionService();

  // Creates a session directly (what POST /session does). Throws Conflict
  // while another session is still running. Outputs go to `dir`, by default
  // <output_dir>/<id>.
  std::string create_session(const nlohmann::json& overrides, std::optional<std::string> dir = std::nullopt);
  std::shared_ptr<LiveSession> session(const std::string& id) const;

  bool listen(const std::string& host, int port);
  // Binds to any free port; returns it, or -1.
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();

 private:
  void install_routes();

  ExperimentConfig defaults_;
  ServiceOptions options_;
  std::unique_ptr<httplib::Server> server_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions_;
  int next_session_ = 1;
};

// `run --teacher human`: serves one session created from cfg, waits for it
// to finish and returns its metrics. Outputs go to `dir`.
nlohmann::json run_with_human_teacher(const ExperimentConfig& cfg, const std::string& dir, const std::string& host,
                                      int port, std::ostream& log);

}  // namespace partnr
