#include <chrono>
#include <optional>
#include <set>
#include <sstream>
#include <filesystem>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "partnr/run_files.hpp"
#include "partnr/service.hpp"
#include "partnr/simulator.hpp"

using namespace partnr;
namespace fs = std::filesystem;

namespace {

nlohmann::json small_overrides() {
  return {{"seeds", {1}},
          {"demo_budget", 16},
          {"split", {{"offline", 0.5}, {"interactive", 0.5}}},
          {"n_eval_episodes", 3},
          {"n_recovery_scenes", 2},
          {"train", {{"epochs", 3}}},
          {"correction_window_s", 30.0},
          {"query_timeout_s", 30.0}};
}

ExperimentConfig small_config() { return config_from_json(small_overrides()); }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("partnr_service_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Server {
  SessionService service;
  int port;
  std::thread thread;

  explicit Server(const fs::path& out) : service(small_config(), {"", out.string()}) {
    port = service.bind_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { service.listen_after_bind(); });
  }
  ~Server() {
    service.stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(60, 0);
    return c;
  }
};

nlohmann::json post(httplib::Client& c, const std::string& path, const nlohmann::json& body, int* status = nullptr) {
  auto res = c.Post(path, body.dump(), "application/json");
  REQUIRE(res);
  if (status) *status = res->status;
  return nlohmann::json::parse(res->body);
}

nlohmann::json get(httplib::Client& c, const std::string& path, int* status = nullptr) {
  auto res = c.Get(path);
  REQUIRE(res);
  if (status) *status = res->status;
  return nlohmann::json::parse(res->body);
}

struct Prompt {
  std::string kind;  // "demonstration" or "correction"
  std::int64_t id;
  std::string role;
};

// Long-polls the state and hands every new query or correction window to
// `respond`, which returns the request body, or nothing when it already
// answered itself. Runs until the session ends.
template <class F>
nlohmann::json drive(httplib::Client& c, const std::string& id, F&& respond) {
  std::int64_t version = -1;
  std::set<std::int64_t> handled;
  for (;;) {
    const auto s = get(c, "/session/" + id + "/state?after=" + std::to_string(version) + "&wait=10");
    version = s["version"].get<std::int64_t>();
    const std::string phase = s["phase"];
    if (phase == "done" || phase == "failed" || phase == "stopped") return s;
    for (const char* key : {"pending_query", "correction_window"}) {
      if (s[key].is_null()) continue;
      const Prompt p{key == std::string("pending_query") ? "demonstration" : "correction", s[key]["id"],
                     s[key]["role"]};
      if (!handled.insert(p.id).second) continue;
      std::optional<nlohmann::json> reply = respond(s, p);
      if (!reply) continue;
      nlohmann::json body = *reply;
      body["role"] = p.role;
      body["query_id"] = p.id;
      int status = 0;
      post(c, "/session/" + id + "/" + p.kind, body, &status);
      CHECK(status == 200);
    }
  }
}

// The scripted teacher's answer computed from what the client can see.
nlohmann::json oracle_answer(const nlohmann::json& s, const Prompt& p) {
  const SceneState scene = scene_from_json(s["scene"]);
  const Command cmd = parse_command(s["command"].get<std::string>());
  const Role role = parse_role(p.role);
  Rng rng(0);
  if (p.kind == "demonstration") {
    const Pixel px = scripted_expert_pixel(scene, cmd, role, 0.0, rng);
    return {{"pixel", {px.u, px.v}}};
  }
  const auto& w = s["correction_window"]["pixel"];
  const auto fix = correction_oracle(scene, cmd, {w[0].get<int>(), w[1].get<int>()}, role, 0.0, rng);
  if (!fix) return {{"pixel", nullptr}};
  return {{"pixel", {fix->u, fix->v}}};
}

// Reads server-sent events until the stream ends or an event of type
// `stop_at` arrives.
std::vector<std::pair<std::int64_t, std::string>> read_events(httplib::Client& c, const std::string& path,
                                                               const httplib::Headers& headers = {},
                                                               const std::string& stop_at = "") {
  std::string buffer;
  std::vector<std::pair<std::int64_t, std::string>> out;
  std::int64_t id = -1;
  bool stop = false;
  auto res = c.Get(path, headers, [&](const char* data, std::size_t n) {
    buffer.append(data, n);
    for (std::size_t eol; (eol = buffer.find('\n')) != std::string::npos;) {
      const std::string line = buffer.substr(0, eol);
      buffer.erase(0, eol + 1);
      if (line.rfind("id: ", 0) == 0) id = std::stoll(line.substr(4));
      if (line.rfind("event: ", 0) == 0) {
        out.push_back({id, line.substr(7)});
        stop = stop || (!stop_at.empty() && out.back().second == stop_at);
      }
    }
    return !stop;
  });
  if (!stop) {
    REQUIRE(res);
    CHECK(res->status == 200);
  }
  return out;
}

}  // namespace

TEST_CASE("routes, validation errors and the single-session rule") {
  const auto dir = scratch("routes");
  Server server(dir);
  auto c = server.client();

  auto root = c.Get("/");
  REQUIRE(root);
  CHECK(root->status == 200);
  CHECK(root->body.find("/session/{id}/state") != std::string::npos);

  int status = 0;
  get(c, "/session/nope/state", &status);
  CHECK(status == 404);
  post(c, "/session/nope/demonstration", {{"role", "pick"}, {"pixel", {1, 1}}}, &status);
  CHECK(status == 404);
  post(c, "/session", {{"no_such_key", 1}}, &status);
  CHECK(status == 400);
  auto bad = c.Post("/session", "not json", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);

  const auto created = post(c, "/session", small_overrides(), &status);
  CHECK(status == 201);
  const std::string id = created["id"];
  post(c, "/session", small_overrides(), &status);
  CHECK(status == 409);

  // Nothing to answer before a prompt exists.
  const auto s = get(c, "/session/" + id + "/state");
  CHECK(s["session"] == id);
  CHECK(s.contains("telemetry"));

  bool tested_errors = false;
  const auto final_state = drive(c, id, [&](const nlohmann::json& st, const Prompt& p) {
    if (!tested_errors && p.kind == "demonstration") {
      tested_errors = true;
      const std::string url = "/session/" + id + "/demonstration";
      int code = 0;
      post(c, url, {{"role", p.role}, {"pixel", {64, 0}}, {"query_id", p.id}}, &code);
      CHECK(code == 400);
      post(c, url, {{"role", p.role}, {"pixel", {-1, 3}}, {"query_id", p.id}}, &code);
      CHECK(code == 400);
      post(c, url, {{"role", p.role}, {"pixel", "center"}, {"query_id", p.id}}, &code);
      CHECK(code == 400);
      post(c, url, {{"role", p.role == "pick" ? "place" : "pick"}, {"pixel", {1, 1}}, {"query_id", p.id}}, &code);
      CHECK(code == 409);
      post(c, url, {{"role", p.role}, {"pixel", {1, 1}}, {"query_id", p.id + 1000}}, &code);
      CHECK(code == 409);
      post(c, "/session/" + id + "/correction", {{"role", p.role}, {"pixel", nullptr}, {"query_id", p.id}}, &code);
      CHECK(code == 409);
      post(c, url, {{"role", "elbow"}, {"pixel", {1, 1}}}, &code);
      CHECK(code == 400);
      // The rejected attempts left the query open; answer it and try again.
      auto body = oracle_answer(st, p);
      body["role"] = p.role;
      body["query_id"] = p.id;
      post(c, url, body, &code);
      CHECK(code == 200);
      post(c, url, body, &code);
      CHECK(code == 409);
      return std::optional<nlohmann::json>{};
    }
    return std::optional<nlohmann::json>(oracle_answer(st, p));
  });
  CHECK(final_state["phase"] == "done");
  CHECK(tested_errors);
}

TEST_CASE("an HTTP client answering like the scripted teacher reproduces the in-process run") {
  const auto dir = scratch("equivalence");
  const auto reference_dir = (dir / "reference").string();
  ExperimentConfig cfg = small_config();
  cfg.teacher = TeacherKind::kScripted;
  run_to_directory(cfg, reference_dir);

  std::vector<nlohmann::json> recorded;
  std::string live_dir;
  {
    Server server(dir);
    auto c = server.client();
    const std::string id = post(c, "/session", small_overrides())["id"];
    const auto done = drive(c, id, [&](const nlohmann::json& st, const Prompt& p) {
      auto body = oracle_answer(st, p);
      recorded.push_back(body);
      return std::optional<nlohmann::json>(body);
    });
    REQUIRE(done["phase"] == "done");
    CHECK(done["metrics"]["format"] == "partnr-metrics");
    live_dir = (dir / id).string();

    // SSE replay of the whole log: consecutive versions, ends with the phase change.
    const auto events = read_events(c, "/session/" + id + "/events?since=0");
    REQUIRE(events.size() >= 3);
    for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].first == std::int64_t(i + 1));
    CHECK(events.front().second == "phase");
    CHECK(events.back().second == "phase");
    const auto it = std::find_if(events.begin(), events.end(), [](auto& e) { return e.second == "query_pending"; });
    CHECK(it != events.end());
    const auto resumed = read_events(c, "/session/" + id + "/events", {{"Last-Event-ID", "5"}});
    REQUIRE_FALSE(resumed.empty());
    CHECK(resumed.front().first == 6);
    CHECK(resumed.size() == events.size() - 5);
  }
  CHECK(read_file(live_dir + "/telemetry.csv") == read_file(reference_dir + "/telemetry.csv"));
  CHECK(read_file(live_dir + "/model_seed1.json") == read_file(reference_dir + "/model_seed1.json"));
  CHECK(audit_run_directory(live_dir).empty());

  // Replaying the recorded answers in order reproduces the same run.
  std::string replay_dir;
  {
    Server server(dir / "replay");
    auto c = server.client();
    const std::string id = post(c, "/session", small_overrides())["id"];
    std::size_t next = 0;
    drive(c, id, [&](const nlohmann::json&, const Prompt&) {
      REQUIRE(next < recorded.size());
      return std::optional<nlohmann::json>(recorded[next++]);
    });
    CHECK(next == recorded.size());
    replay_dir = (dir / "replay" / id).string();
  }
  CHECK(read_file(replay_dir + "/telemetry.csv") == read_file(reference_dir + "/telemetry.csv"));
}

TEST_CASE("an unanswered query times out, the step is aborted and offered again") {
  const auto dir = scratch("timeout");
  Server server(dir);
  auto c = server.client();
  auto o = small_overrides();
  o["query_timeout_s"] = 0.3;
  o["correction_window_s"] = 0.02;
  const std::string id = post(c, "/session", o)["id"];

  // Wait for the first query and let it lapse.
  std::int64_t version = -1, first_query = -1;
  while (first_query < 0) {
    const auto s = get(c, "/session/" + id + "/state?after=" + std::to_string(version) + "&wait=10");
    version = s["version"];
    REQUIRE(s["phase"] == "running");
    if (!s["pending_query"].is_null()) first_query = s["pending_query"]["id"];
  }
  std::this_thread::sleep_for(std::chrono::milliseconds(600));
  int status = 0;
  post(c, "/session/" + id + "/demonstration", {{"role", "pick"}, {"pixel", {1, 1}}, {"query_id", first_query}}, &status);
  CHECK(status == 409);

  const auto events = read_events(c, "/session/" + id + "/events?since=0", {}, "step_aborted");
  const bool saw_abort = !events.empty() && events.back().second == "step_aborted";
  CHECK(saw_abort);
  // The same step comes back with a fresh query.
  const auto again = read_events(c, "/session/" + id + "/events?since=" + std::to_string(events.back().first), {},
                                 "query_pending");
  REQUIRE_FALSE(again.empty());
  CHECK(again.front().second == "step_started");
  CHECK(again.back().first > first_query);
  server.service.session(id)->stop();
  server.service.session(id)->join();
  CHECK(get(c, "/session/" + id + "/state")["phase"] == "stopped");

  // A stopped session frees the server for a new one.
  post(c, "/session", small_overrides(), &status);
  CHECK(status == 201);
}

TEST_CASE("human teacher bookkeeping without HTTP") {
  HumanTeacher t(5.0, 0.05);
  CHECK_THROWS_AS(t.answer(Role::kPick, std::nullopt, {1, 1}), Conflict);
  t.announce(7, Role::kPick, false, 64, 64);
  REQUIRE(t.pending().has_value());
  CHECK(t.pending()->id == 7);
  CHECK_THROWS_AS(t.answer(Role::kPick, 7, {64, 1}), InvalidInput);
  t.answer(Role::kPick, 7, {3, 4});
  CHECK_THROWS_AS(t.answer(Role::kPick, 7, {3, 4}), Conflict);

  SceneState scene;
  const DecisionContext ctx{0, Role::kPick, &scene, nullptr, nullptr, {0, 0}, std::nullopt};
  CHECK(t.query(ctx) == Pixel{3, 4});
  // An unanswered correction window closes as "no correction".
  CHECK_FALSE(t.observe_correction(ctx, {0, 0}).has_value());
  t.stop();
  CHECK_THROWS_AS(t.query(ctx), SessionStopped);
}
