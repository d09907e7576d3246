#include "partnr/service.hpp"

#include <chrono>
#include <filesystem>
#include <ostream>

#include "httplib.h"
#include "partnr/run_files.hpp"

namespace partnr {

namespace {

using Clock = std::chrono::steady_clock;

std::chrono::duration<double> seconds(double s) { return std::chrono::duration<double>(s); }

}  // namespace

// --- HumanTeacher ---------------------------------------------------------

HumanTeacher::HumanTeacher(double query_timeout_s, double correction_window_s)
    : query_timeout_s_(query_timeout_s), correction_window_s_(correction_window_s) {}

void HumanTeacher::announce(std::int64_t id, Role role, bool correction, int width, int height) {
  std::lock_guard lock(mu_);
  next_id_ = id;
  pending_ = Pending{id, role, correction};
  reply_.reset();
  width_ = width;
  height_ = height;
  announced_ = true;
}

std::optional<Pixel> HumanTeacher::wait(Role role, bool correction, double timeout_s, const SceneState& scene) {
  std::unique_lock lock(mu_);
  if (stopped_) throw SessionStopped("session stopped");
  if (!announced_) {
    pending_ = Pending{++next_id_, role, correction};
    reply_.reset();
    width_ = scene.width;
    height_ = scene.height;
  }
  announced_ = false;
  const bool answered =
      cv_.wait_for(lock, seconds(timeout_s), [&] { return reply_.has_value() || stopped_; });
  pending_.reset();
  if (stopped_) throw SessionStopped("session stopped");
  if (!answered) {
    if (correction) return std::nullopt;
    throw TeacherTimeout("no demonstration within " + std::to_string(timeout_s) + " s");
  }
  const std::optional<Pixel> out = *reply_;
  reply_.reset();
  return out;
}

Pixel HumanTeacher::query(const DecisionContext& ctx) {
  return *wait(ctx.role, false, query_timeout_s_, *ctx.scene);
}

std::optional<Pixel> HumanTeacher::observe_correction(const DecisionContext& ctx, Pixel) {
  return wait(ctx.role, true, correction_window_s_, *ctx.scene);
}

void HumanTeacher::answer(Role role, std::optional<std::int64_t> id, Pixel pixel) {
  if (pixel.u < 0 || pixel.v < 0) throw InvalidInput("pixel is outside the image");
  std::lock_guard lock(mu_);
  if (!pending_ || pending_->correction || pending_->role != role) {
    throw Conflict("no pending " + std::string(to_string(role)) + " query");
  }
  if (id && *id != pending_->id) throw Conflict("query " + std::to_string(*id) + " is not the pending one");
  if (pixel.u >= width_ || pixel.v >= height_) throw InvalidInput("pixel is outside the image");
  reply_ = std::optional<Pixel>(pixel);
  pending_.reset();
  cv_.notify_all();
}

void HumanTeacher::correct(Role role, std::optional<std::int64_t> id, std::optional<Pixel> pixel) {
  if (pixel && (pixel->u < 0 || pixel->v < 0)) throw InvalidInput("pixel is outside the image");
  std::lock_guard lock(mu_);
  if (!pending_ || !pending_->correction || pending_->role != role) {
    throw Conflict("no open " + std::string(to_string(role)) + " correction window");
  }
  if (id && *id != pending_->id) throw Conflict("window " + std::to_string(*id) + " is not the open one");
  if (pixel && (pixel->u >= width_ || pixel->v >= height_)) throw InvalidInput("pixel is outside the image");
  reply_ = pixel;
  pending_.reset();
  cv_.notify_all();
}

std::optional<HumanTeacher::Pending> HumanTeacher::pending() const {
  std::lock_guard lock(mu_);
  return pending_;
}

void HumanTeacher::stop() {
  std::lock_guard lock(mu_);
  stopped_ = true;
  cv_.notify_all();
}

// --- LiveSession ----------------------------------------------------------

LiveSession::LiveSession(std::string id, ExperimentConfig cfg, std::string output_dir)
    : id_(std::move(id)),
      cfg_(std::move(cfg)),
      output_dir_(std::move(output_dir)),
      teacher_(cfg_.query_timeout_s, cfg_.correction_window_s) {
  snapshot_ = {{"session", id_},
               {"version", 0},
               {"phase", phase_},
               {"t", 0},
               {"pending_query", nullptr},
               {"correction_window", nullptr},
               {"last_action", nullptr},
               {"roles", nlohmann::json::object()},
               {"telemetry",
                {{"flags",
                  {{"pick", {{"TP", 0}, {"TN", 0}, {"FP", 0}, {"FN", 0}}},
                   {"place", {{"TP", 0}, {"TN", 0}, {"FP", 0}, {"FN", 0}}}}},
                 {"threshold", {{"pick", cfg_.thresholds[0].p0}, {"place", cfg_.thresholds[1].p0}}},
                 {"sensitivity_est", {{"pick", nullptr}, {"place", nullptr}}},
                 {"specificity_est", {{"pick", nullptr}, {"place", nullptr}}},
                 {"interactive_demos", 0},
                 {"dataset_size", 0},
                 {"successes", 0},
                 {"commands_run", 0},
                 {"success_rate", nullptr}}}};
  worker_ = std::thread([this] { run(); });
}

LiveSession::~LiveSession() {
  stop();
  join();
}

void LiveSession::stop() { teacher_.stop(); }

void LiveSession::join() {
  if (worker_.joinable()) worker_.join();
}

void LiveSession::publish(const std::string& type, nlohmann::json payload) {
  std::lock_guard lock(mu_);
  const std::int64_t v = ++version_;
  auto& s = snapshot_;
  auto& tel = s["telemetry"];
  if (type == "step_started") {
    s["t"] = payload["t"];
    s["episode"] = payload["episode"];
    s["command_index"] = payload["command_index"];
    s["command"] = payload["command"];
    s["state"] = payload["state"];
    s["scene"] = payload["scene"];
    s["image_png"] = payload["image_png"];
    s["roles"] = nlohmann::json::object();
    s["pending_query"] = nullptr;
    s["correction_window"] = nullptr;
  } else if (type == "query_pending") {
    teacher_.announce(v, parse_role(payload["role"].get<std::string>()), false, cfg_.image_size, cfg_.image_size);
    s["roles"][payload["role"].get<std::string>()] = payload;
    s["pending_query"] = {{"id", v},
                          {"t", payload["t"]},
                          {"role", payload["role"]},
                          {"candidates", payload["candidates"]},
                          {"executed_pick", payload.value("executed_pick", nlohmann::json())}};
    s["correction_window"] = nullptr;
  } else if (type == "action_executed") {
    if (payload.contains("heatmap")) s["roles"][payload["role"].get<std::string>()] = payload;
    s["last_action"] = {{"t", payload["t"]}, {"role", payload["role"]}, {"pixel", payload["pixel"]},
                        {"queried", payload["queried"]}};
    s["pending_query"] = nullptr;
  } else if (type == "correction_window_open") {
    teacher_.announce(v, parse_role(payload["role"].get<std::string>()), true, cfg_.image_size, cfg_.image_size);
    s["correction_window"] = {{"id", v},
                              {"t", payload["t"]},
                              {"role", payload["role"]},
                              {"pixel", payload["pixel"]},
                              {"window_s", cfg_.correction_window_s}};
    s["pending_query"] = nullptr;
  } else if (type == "decision_recorded") {
    const auto role = payload["role"].get<std::string>();
    auto& flags = tel["flags"][role][payload["flag"].get<std::string>()];
    flags = flags.get<int>() + 1;
    tel["threshold"][role] = payload["threshold_after"];
    tel["sensitivity_est"][role] = payload["sensitivity_est"];
    tel["specificity_est"][role] = payload["specificity_est"];
    tel["dataset_size"] = payload["dataset_size"];
    if (payload["aggregated"].get<bool>()) tel["interactive_demos"] = tel["interactive_demos"].get<int>() + 1;
    s["pending_query"] = nullptr;
    s["correction_window"] = nullptr;
  } else if (type == "step_done") {
    tel["successes"] = payload["successes"];
    tel["commands_run"] = payload["commands_run"];
    const int n = payload["commands_run"].get<int>();
    tel["success_rate"] = n ? 100.0 * payload["successes"].get<int>() / n : 0.0;
  } else if (type == "step_aborted") {
    s["pending_query"] = nullptr;
    s["correction_window"] = nullptr;
  } else if (type == "phase") {
    phase_ = payload["phase"].get<std::string>();
    s["phase"] = phase_;
  }
  s["version"] = v;
  events_.push_back({v, type, std::move(payload)});
  cv_.notify_all();
}

void LiveSession::run() {
  try {
    publish("phase", {{"phase", "running"}});
    const EventSink sink = [this](const LoopEvent& e) { publish(e.type, e.payload); };
    auto metrics = run_to_directory(cfg_, output_dir_, &teacher_, sink);
    {
      std::lock_guard lock(mu_);
      metrics_ = metrics;
      snapshot_["metrics"] = metrics;
    }
    publish("phase", {{"phase", "done"}, {"mean_success_rate", metrics["mean_success_rate"]}});
  } catch (const std::exception& e) {
    {
      std::lock_guard lock(mu_);
      snapshot_["error"] = e.what();
    }
    publish("phase", {{"phase", dynamic_cast<const SessionStopped*>(&e) ? "stopped" : "failed"}, {"error", e.what()}});
  }
  std::lock_guard lock(mu_);
  finished_ = true;
  cv_.notify_all();
}

nlohmann::json LiveSession::snapshot() const {
  std::lock_guard lock(mu_);
  return snapshot_;
}

nlohmann::json LiveSession::wait_snapshot(std::int64_t after, double timeout_s) const {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, seconds(timeout_s), [&] { return version_ > after || finished_; });
  return snapshot_;
}

std::vector<LiveSession::Event> LiveSession::events_after(std::int64_t after, double timeout_s) const {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, seconds(timeout_s), [&] { return version_ > after || finished_; });
  std::vector<Event> out;
  for (const auto& e : events_) {
    if (e.version > after) out.push_back(e);
  }
  return out;
}

bool LiveSession::finished() const {
  std::lock_guard lock(mu_);
  return finished_;
}

std::optional<nlohmann::json> LiveSession::metrics() const {
  std::lock_guard lock(mu_);
  return metrics_;
}

// --- SessionService -------------------------------------------------------

namespace {

const char* kPlaceholderPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>partnr session service</title></head>
<body>
<h1>partnr session service</h1>
<p>No UI assets configured (start with <code>--static DIR</code>).</p>
<ul>
<li>POST /session</li>
<li>GET /session/{id}/state</li>
<li>POST /session/{id}/demonstration</li>
<li>POST /session/{id}/correction</li>
<li>GET /session/{id}/events</li>
</ul>
</body></html>
)";

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <class F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const NotFound& e) {
    send_json(res, 404, {{"error", e.what()}});
  } catch (const Conflict& e) {
    send_json(res, 409, {{"error", e.what()}});
  } catch (const InvalidInput& e) {
    send_json(res, 400, {{"error", e.what()}});
  } catch (const ConfigError& e) {
    send_json(res, 400, {{"error", e.what()}});
  } catch (const UnknownToken& e) {
    send_json(res, 400, {{"error", e.what()}});
  } catch (const nlohmann::json::exception& e) {
    send_json(res, 400, {{"error", std::string("bad request body: ") + e.what()}});
  } catch (const std::exception& e) {
    send_json(res, 500, {{"error", e.what()}});
  }
}

Pixel parse_pixel(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw InvalidInput("pixel must be [u, v] with integer coordinates");
  }
  return {j[0].get<int>(), j[1].get<int>()};
}

std::optional<std::int64_t> parse_query_id(const nlohmann::json& body) {
  if (!body.contains("query_id") || body["query_id"].is_null()) return std::nullopt;
  return body["query_id"].get<std::int64_t>();
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  auto j = nlohmann::json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw InvalidInput("request body must be a JSON object");
  return j;
}

}  // namespace

SessionService::SessionService(ExperimentConfig defaults, ServiceOptions options)
    : defaults_(std::move(defaults)), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  defaults_.teacher = TeacherKind::kHuman;
  install_routes();
}

SessionService::~SessionService() {
  stop();
  std::map<std::string, std::shared_ptr<LiveSession>> sessions;
  {
    std::lock_guard lock(mu_);
    sessions.swap(sessions_);
  }
  for (auto& [id, s] : sessions) s->stop();
}

std::string SessionService::create_session(const nlohmann::json& overrides, std::optional<std::string> dir) {
  nlohmann::json doc = to_json(defaults_);
  if (!overrides.is_object()) throw InvalidInput("session config must be a JSON object");
  for (const auto& [key, value] : overrides.items()) {
    if (doc.contains(key) && doc[key].is_object() && value.is_object()) {
      doc[key].merge_patch(value);
    } else {
      doc[key] = value;
    }
  }
  ExperimentConfig cfg = config_from_json(doc);
  cfg.teacher = TeacherKind::kHuman;

  std::lock_guard lock(mu_);
  for (const auto& [id, s] : sessions_) {
    if (!s->finished()) throw Conflict("session " + id + " is still running; one live session per server");
  }
  const std::string id = "s" + std::to_string(next_session_++);
  if (!dir) dir = (std::filesystem::path(options_.output_dir.empty() ? "runs/live" : options_.output_dir) / id).string();
  sessions_[id] = std::make_shared<LiveSession>(id, std::move(cfg), *dir);
  return id;
}

std::shared_ptr<LiveSession> SessionService::session(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFound("unknown session '" + id + "'");
  return it->second;
}

void SessionService::install_routes() {
  auto& srv = *server_;

  if (!options_.static_dir.empty()) {
    srv.set_mount_point("/", options_.static_dir);
  } else {
    srv.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kPlaceholderPage, "text/html; charset=utf-8");
    });
  }

  srv.Post("/session", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = create_session(parse_body(req));
      send_json(res, 201, {{"id", id}, {"state", "/session/" + id + "/state"}, {"events", "/session/" + id + "/events"}});
    });
  });

  srv.Get(R"(/session/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto s = session(req.matches[1]);
      if (req.has_param("after")) {
        const double wait = req.has_param("wait") ? std::stod(req.get_param_value("wait")) : 30.0;
        send_json(res, 200, s->wait_snapshot(std::stoll(req.get_param_value("after")), wait));
      } else {
        send_json(res, 200, s->snapshot());
      }
    });
  });

  srv.Post(R"(/session/([^/]+)/demonstration)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto s = session(req.matches[1]);
      const auto body = parse_body(req);
      if (!body.contains("role") || !body.contains("pixel")) throw InvalidInput("need role and pixel");
      const Role role = parse_role(body["role"].get<std::string>());
      s->teacher().answer(role, parse_query_id(body), parse_pixel(body["pixel"]));
      send_json(res, 200, {{"accepted", true}});
    });
  });

  srv.Post(R"(/session/([^/]+)/correction)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto s = session(req.matches[1]);
      const auto body = parse_body(req);
      if (!body.contains("role")) throw InvalidInput("need role");
      const Role role = parse_role(body["role"].get<std::string>());
      std::optional<Pixel> pixel;
      if (body.contains("pixel") && !body["pixel"].is_null()) pixel = parse_pixel(body["pixel"]);
      s->teacher().correct(role, parse_query_id(body), pixel);
      send_json(res, 200, {{"accepted", true}, {"corrected", pixel.has_value()}});
    });
  });

  srv.Get(R"(/session/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    std::shared_ptr<LiveSession> s;
    guarded(res, [&] { s = session(req.matches[1]); });
    if (!s) return;
    std::int64_t since = 0;
    if (req.has_param("since")) {
      since = std::stoll(req.get_param_value("since"));
    } else if (req.has_header("Last-Event-ID")) {
      since = std::stoll(req.get_header_value("Last-Event-ID"));
    }
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [s, since](std::size_t, httplib::DataSink& sink) mutable {
      const auto events = s->events_after(since, 1.0);
      for (const auto& e : events) {
        const std::string chunk = "id: " + std::to_string(e.version) + "\nevent: " + e.type +
                                  "\ndata: " + e.payload.dump() + "\n\n";
        if (!sink.write(chunk.data(), chunk.size())) return false;
        since = e.version;
      }
      if (events.empty() && s->finished()) sink.done();
      return true;
    });
  });
}

bool SessionService::listen(const std::string& host, int port) { return server_->listen(host, port); }

int SessionService::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool SessionService::listen_after_bind() { return server_->listen_after_bind(); }

void SessionService::stop() {
  if (server_) server_->stop();
}

nlohmann::json run_with_human_teacher(const ExperimentConfig& cfg, const std::string& dir, const std::string& host,
                                      int port, std::ostream& log) {
  SessionService service(cfg, {});
  const std::string id = service.create_session(nlohmann::json::object(), dir);
  std::thread server([&] { service.listen(host, port); });
  log << "session " << id << " waiting for a teacher at http://" << host << ":" << port << "/ (state: /session/"
      << id << "/state)\n"
      << std::flush;
  auto s = service.session(id);
  s->join();
  service.stop();
  server.join();
  const auto metrics = s->metrics();
  if (!metrics) throw Error("live session ended without metrics: " + s->snapshot().value("error", std::string()));
  return *metrics;
}

}  // namespace partnr
