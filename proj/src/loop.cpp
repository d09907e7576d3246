#include "partnr/loop.hpp"

#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "partnr/error.hpp"

namespace partnr {

namespace {

std::size_t role_index(Role role) { return role == Role::kPick ? 0 : 1; }

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

nlohmann::json pixel_json(Pixel p) { return {p.u, p.v}; }

}  // namespace

ScriptedTeacher::ScriptedTeacher(double noise_sigma, std::uint64_t seed)
    : noise_sigma_(noise_sigma), rng_(make_rng(seed, "teacher-noise")) {}

Pixel ScriptedTeacher::query(const DecisionContext& ctx) {
  return scripted_expert_pixel(*ctx.scene, ctx.observation->command, ctx.role, noise_sigma_, rng_);
}

std::optional<Pixel> ScriptedTeacher::observe_correction(const DecisionContext& ctx, Pixel executed) {
  return correction_oracle(*ctx.scene, ctx.observation->command, executed, ctx.role, noise_sigma_, rng_);
}

nlohmann::json to_json(const DecisionRecord& r) {
  nlohmann::json j = {{"t", r.t},
                      {"episode", r.episode},
                      {"command", r.command_index},
                      {"role", std::string(to_string(r.role))},
                      {"state", std::string(to_string(r.state))},
                      {"maxima", maxima_to_json(r.maxima)},
                      {"p_hat", r.p_hat},
                      {"threshold", r.threshold_before},
                      {"threshold_after", r.threshold_after},
                      {"verdict", std::string(to_string(r.verdict))},
                      {"a_max", pixel_json(r.a_max)},
                      {"action", pixel_json(r.action)},
                      {"correction", r.correction ? pixel_json(*r.correction) : nlohmann::json()},
                      {"flag", std::string(to_string(r.flag))},
                      {"necessary", r.necessary},
                      {"aggregated", r.aggregated},
                      {"retrained", r.retrained},
                      {"updates", r.updates},
                      {"success", r.success},
                      {"sensitivity_est", r.sensitivity_est},
                      {"specificity_est", r.specificity_est ? nlohmann::json(*r.specificity_est) : nlohmann::json()},
                      {"dataset_size", r.dataset_size}};
  return j;
}

std::string telemetry_csv_header() {
  return "t,episode,command,role,state,p_hat,threshold,threshold_after,verdict,flag,necessary,"
         "a_max_u,a_max_v,action_u,action_v,aggregated,retrained,updates,success,"
         "sensitivity_est,specificity_est,n_maxima,dataset_size";
}

std::string telemetry_csv_row(const DecisionRecord& r) {
  std::ostringstream out;
  out << r.t << ',' << r.episode << ',' << r.command_index << ',' << to_string(r.role) << ','
      << to_string(r.state) << ',' << fmt(r.p_hat) << ',' << fmt(r.threshold_before) << ','
      << fmt(r.threshold_after) << ',' << to_string(r.verdict) << ',' << to_string(r.flag) << ','
      << int(r.necessary) << ',' << r.a_max.u << ',' << r.a_max.v << ',' << r.action.u << ',' << r.action.v << ','
      << int(r.aggregated) << ',' << int(r.retrained) << ',' << r.updates << ',' << int(r.success) << ','
      << fmt(r.sensitivity_est) << ',' << (r.specificity_est ? fmt(*r.specificity_est) : std::string("NA")) << ','
      << r.maxima.size() << ',' << r.dataset_size;
  return out.str();
}

std::string telemetry_csv(const std::vector<DecisionRecord>& records) {
  std::string out = telemetry_csv_header() + "\n";
  for (const auto& r : records) out += telemetry_csv_row(r) + "\n";
  return out;
}

LoopSettings LoopSettings::from(const ExperimentConfig& cfg) {
  LoopSettings s;
  s.thresholds = cfg.thresholds;
  s.persistence_min_rel = cfg.persistence_min_rel;
  s.candidate_floor = cfg.candidate_floor;
  s.fp_equality = cfg.fp_equality;
  s.train = cfg.train;
  s.mode = cfg.mode;
  s.scenario_mix = cfg.scenario_mix;
  s.sim = cfg.sim();
  return s;
}

RoleAnalysis analyze(const Heatmap& heatmap, double threshold, double persistence_min_rel, double candidate_floor) {
  RoleAnalysis a{heatmap, {}, {}};
  a.maxima = persistent_maxima(heatmap, default_persistence_min(heatmap, persistence_min_rel));
  a.gate = decide(a.maxima, threshold, candidate_floor);
  return a;
}

bool same_choice(const SceneState& scene, Role role, Pixel a, Pixel b, FpEquality eq) {
  if (a == b) return true;
  if (eq == FpEquality::kPixel) return false;
  if (role == Role::kPick) {
    const auto ba = scene.box_at(a);
    return ba && ba == scene.box_at(b);
  }
  const auto ba = scene.bowl_at(a);
  return ba && ba == scene.bowl_at(b);
}

struct Session::Checkpoint {
  ValueModel model;
  std::size_t dataset_size;
  std::array<ThresholdController, 2> controllers;
  Rng episode_rng;
  Rng train_rng;
  SceneState scene;
  Command command;
  bool in_episode;
  std::int64_t t;
  int episode, command_index, interactive_demos, failure_state_demos, updates, aggregated, successes, commands_run;
  std::size_t telemetry_size;
};

Session::Session(LoopSettings settings, ValueModel model, Dataset dataset, Teacher& teacher, std::uint64_t seed)
    : settings_(std::move(settings)),
      model_(std::move(model)),
      dataset_(std::move(dataset)),
      teacher_(teacher),
      seed_(seed),
      controllers_{ThresholdController(settings_.thresholds[0]), ThresholdController(settings_.thresholds[1])},
      episode_rng_(make_rng(seed, "interactive-commands")),
      train_rng_(make_rng(seed, "interactive-train")) {}

void Session::emit(const std::string& type, nlohmann::json payload) const {
  if (sink_) sink_({type, std::move(payload)});
}

void Session::start_episode() {
  ++episode_;
  const Scenario scenario = settings_.scenario_mix.sample(episode_rng_);
  auto [scene, command] = reset(derive_seed(seed_, "interactive-episode-" + std::to_string(episode_)), settings_.mode,
                                scenario, settings_.sim);
  scene_ = std::move(scene);
  command_ = command;
  command_index_ = 0;
  in_episode_ = true;
}

void Session::aggregate(const Observation& obs, Role role, Pixel pixel, std::optional<Pixel> executed_pick) {
  DatasetEntry e;
  e.observation = obs;
  e.phase = Phase::kInteractive;
  if (role == Role::kPick) {
    e.roles = RoleMask::kPickOnly;
    e.action = {pixel, pixel};
  } else {
    e.roles = RoleMask::kPlaceOnly;
    e.action = {executed_pick.value_or(pixel), pixel};
  }
  dataset_.append(std::move(e));
  ++interactive_demos_;
  ++aggregated_;
  if (classify_state(scene_, command_) != StateKind::kNormal) ++failure_state_demos_;
}

int Session::retrain() {
  if (settings_.demo_budget <= 0 || settings_.update_budget <= 0) return 0;
  const long long k = std::min(aggregated_, settings_.demo_budget);
  const int earned = static_cast<int>(k * settings_.update_budget / settings_.demo_budget);
  const int n = earned - updates_;
  if (n <= 0) return 0;
  model_ = train_steps(std::move(model_), dataset_, n, settings_.train, train_rng_);
  updates_ += n;
  return n;
}

int Session::flush_updates() {
  const int n = settings_.update_budget - updates_;
  if (n <= 0 || dataset_.examples().empty()) return 0;
  model_ = train_steps(std::move(model_), dataset_, n, settings_.train, train_rng_);
  updates_ += n;
  return n;
}

DecisionRecord Session::decide(Role role, const Observation& obs, std::optional<Pixel> executed_pick,
                               Pixel& executed) {
  auto& controller = controllers_[role_index(role)];
  const int color = role == Role::kPick ? command_.pick_color : command_.place_color;
  const Heatmap heatmap = predict_heatmap(model_, obs, role, color, executed_pick);
  const RoleAnalysis analysis =
      analyze(heatmap, controller.threshold(), settings_.persistence_min_rel, settings_.candidate_floor);

  DecisionRecord r;
  r.t = t_;
  r.episode = episode_;
  r.command_index = command_index_;
  r.role = role;
  r.state = classify_state(scene_, command_);
  r.maxima = analysis.maxima;
  r.p_hat = analysis.gate.p_hat;
  r.threshold_before = controller.threshold();
  r.verdict = analysis.gate.verdict;
  r.a_max = analysis.maxima.front().pixel;
  r.necessary = necessity_oracle(scene_, command_, r.a_max, role);

  const DecisionContext ctx{t_, role, &scene_, &obs, &analysis.gate, r.a_max, executed_pick};
  auto gate_payload = [&] {
    nlohmann::json j = to_json(analysis.gate);
    j["t"] = t_;
    j["role"] = std::string(to_string(role));
    j["a_max"] = pixel_json(r.a_max);
    j["maxima"] = maxima_to_json(analysis.maxima);
    j["heatmap"] = heatmap.normalized();
    if (executed_pick) j["executed_pick"] = pixel_json(*executed_pick);
    return j;
  };

  if (r.verdict == Verdict::kAmbiguous) {
    if (sink_) emit("query_pending", gate_payload());
    const Pixel answer = teacher_.query(ctx);
    if (!scene_.contains(answer)) throw InvalidInput("teacher pixel is outside the image");
    r.flag = same_choice(scene_, role, answer, r.a_max, settings_.fp_equality) ? Flag::kFP : Flag::kTP;
    executed = answer;
    aggregate(obs, role, answer, executed_pick);
    r.aggregated = true;
    if (sink_) emit("action_executed", {{"t", t_}, {"role", std::string(to_string(role))}, {"pixel", pixel_json(answer)}, {"queried", true}});
  } else {
    executed = r.a_max;
    if (sink_) {
      auto payload = gate_payload();
      payload["pixel"] = pixel_json(executed);
      payload["queried"] = false;
      emit("action_executed", std::move(payload));
      emit("correction_window_open", {{"t", t_}, {"role", std::string(to_string(role))}, {"pixel", pixel_json(executed)}});
    }
    r.correction = teacher_.observe_correction(ctx, executed);
    if (r.correction) {
      if (!scene_.contains(*r.correction)) throw InvalidInput("correction pixel is outside the image");
      r.flag = Flag::kFN;
      aggregate(obs, role, *r.correction, executed_pick);
      r.aggregated = true;
    } else {
      r.flag = Flag::kTN;
    }
  }
  r.action = executed;

  r.threshold_after = controller.observe(t_, r.flag);
  r.sensitivity_est = controller.sensitivity();
  r.specificity_est = controller.specificity();
  if (r.aggregated) {
    r.updates = retrain();
    r.retrained = r.updates > 0;
    if (r.retrained && sink_) emit("retrained", {{"t", t_}, {"role", std::string(to_string(role))}, {"updates", r.updates}, {"dataset_size", dataset_.size()}});
  }
  r.dataset_size = dataset_.size();
  if (sink_) emit("decision_recorded", to_json(r));
  return r;
}

std::vector<DecisionRecord> Session::run_step() {
  if (!in_episode_) start_episode();
  const Checkpoint cp{model_,       dataset_.size(),     controllers_,     episode_rng_,     train_rng_,
                      scene_,       command_,            in_episode_,      t_,               episode_,
                      command_index_, interactive_demos_, failure_state_demos_, updates_, aggregated_,
                      successes_,   commands_run_,       telemetry_.size()};
  try {
    std::vector<DecisionRecord> out;
    if (sink_) {
      emit("step_started", {{"t", t_},
                            {"episode", episode_},
                            {"command_index", command_index_},
                            {"command", command_.text()},
                            {"state", std::string(to_string(classify_state(scene_, command_)))},
                            {"scene", to_json(scene_)},
                            {"image_png", base64_encode(encode_png(render(scene_)))}});
    }
    const Observation obs{render(scene_), command_};
    auto budget_reached = [&] { return demo_target_ > 0 && interactive_demos_ >= demo_target_; };

    Pixel pick{}, place{};
    out.push_back(decide(Role::kPick, obs, std::nullopt, pick));
    out[0].success = !necessity_oracle(scene_, command_, pick, Role::kPick);
    telemetry_.push_back(out.back());
    if (budget_reached()) {
      ++t_;
      return out;
    }
    out.push_back(decide(Role::kPlace, obs, pick, place));

    auto [next, result] = partnr::step(scene_, command_, Action{pick, place});
    out[1].success = result.place_success;
    telemetry_.push_back(out.back());
    scene_ = std::move(next);
    ++commands_run_;
    if (result.place_success) ++successes_;
    ++command_index_;
    if (sink_) {
      emit("step_done", {{"t", t_},
                         {"success", result.place_success},
                         {"successes", successes_},
                         {"commands_run", commands_run_},
                         {"interactive_demos", interactive_demos_},
                         {"dataset_size", dataset_.size()}});
    }
    if (command_index_ >= 3) {
      in_episode_ = false;
      if (sink_) emit("episode_done", {{"episode", episode_}, {"successes", successes_}, {"commands_run", commands_run_}});
    } else {
      command_ = next_command(scene_, std::make_pair(command_, result.place_success), episode_rng_);
    }
    ++t_;
    return out;
  } catch (...) {
    model_ = cp.model;
    dataset_.truncate(cp.dataset_size);
    controllers_ = cp.controllers;
    episode_rng_ = cp.episode_rng;
    train_rng_ = cp.train_rng;
    scene_ = cp.scene;
    command_ = cp.command;
    in_episode_ = cp.in_episode;
    t_ = cp.t;
    episode_ = cp.episode;
    command_index_ = cp.command_index;
    interactive_demos_ = cp.interactive_demos;
    failure_state_demos_ = cp.failure_state_demos;
    updates_ = cp.updates;
    aggregated_ = cp.aggregated;
    successes_ = cp.successes;
    commands_run_ = cp.commands_run;
    telemetry_.resize(cp.telemetry_size);
    throw;
  }
}

void Session::run(int demos, int max_steps) {
  demo_target_ = demos;
  try {
    for (int s = 0; s < max_steps && interactive_demos_ < demos;) {
      try {
        run_step();
        ++s;
      } catch (const TeacherTimeout& e) {
        // run_step already rolled back; the same step is offered again.
        emit("step_aborted", {{"t", t_}, {"reason", e.what()}});
      }
    }
  } catch (...) {
    demo_target_ = 0;
    throw;
  }
  demo_target_ = 0;
}

nlohmann::json Session::status() const {
  nlohmann::json roles = nlohmann::json::object();
  for (Role role : kRoles) {
    const auto& c = controller(role);
    const auto& tot = c.ledger().totals();
    roles[std::string(to_string(role))] = {
        {"threshold", c.threshold()},
        {"sensitivity_est", c.sensitivity()},
        {"specificity_est", c.specificity() ? nlohmann::json(*c.specificity()) : nlohmann::json()},
        {"flags", {{"TP", tot.tp}, {"TN", tot.tn}, {"FP", tot.fp}, {"FN", tot.fn}}}};
  }
  nlohmann::json j = {{"t", t_},
                      {"episode", episode_},
                      {"command_index", command_index_},
                      {"in_episode", in_episode_},
                      {"dataset_size", dataset_.size()},
                      {"interactive_demos", interactive_demos_},
                      {"updates", updates_},
                      {"successes", successes_},
                      {"commands_run", commands_run_},
                      {"success_rate", commands_run_ ? 100.0 * successes_ / commands_run_ : 0.0},
                      {"roles", roles}};
  if (in_episode_) {
    j["command"] = command_.text();
    j["scene"] = to_json(scene_);
  }
  return j;
}

namespace {

struct AuditRow {
  std::int64_t t;
  std::string role;
  std::string verdict;
  std::string flag;
  bool aggregated;
};

std::vector<std::string> audit_rows(const std::vector<AuditRow>& rows, std::optional<int> interactive_demos) {
  std::vector<std::string> problems;
  std::set<std::pair<std::int64_t, std::string>> seen;
  int demos = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string where = "row " + std::to_string(i + 1) + " (t=" + std::to_string(r.t) + ", " + r.role + ")";
    if (!seen.insert({r.t, r.role}).second) problems.push_back(where + ": duplicate decision");
    if (r.flag != "TP" && r.flag != "TN" && r.flag != "FP" && r.flag != "FN") {
      problems.push_back(where + ": flag '" + r.flag + "' is not one of TP/TN/FP/FN");
      continue;
    }
    const bool queried = r.flag == "TP" || r.flag == "FP";
    if (queried != (r.verdict == "ambiguous")) problems.push_back(where + ": queried does not match the verdict");
    const bool counts = r.flag != "TN";
    if (counts != r.aggregated) problems.push_back(where + ": aggregation does not match the flag");
    if (counts) ++demos;
  }
  if (interactive_demos && *interactive_demos != demos) {
    problems.push_back("interactive demos " + std::to_string(*interactive_demos) + " != TP + FP + FN = " +
                       std::to_string(demos));
  }
  return problems;
}

}  // namespace

std::vector<std::string> audit_telemetry(const std::vector<DecisionRecord>& records, int interactive_demos) {
  std::vector<AuditRow> rows;
  for (const auto& r : records) {
    rows.push_back({r.t, std::string(to_string(r.role)), std::string(to_string(r.verdict)),
                    std::string(to_string(r.flag)), r.aggregated});
  }
  return audit_rows(rows, interactive_demos);
}

std::vector<std::string> audit_telemetry_csv(const std::string& csv, std::optional<int> interactive_demos) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) return {"telemetry is empty"};
  std::map<std::string, std::size_t> col;
  {
    std::istringstream hs(line);
    std::string name;
    for (std::size_t i = 0; std::getline(hs, name, ','); ++i) col[name] = i;
  }
  for (const char* need : {"t", "role", "verdict", "flag", "aggregated"}) {
    if (!col.count(need)) return {std::string("telemetry header lacks column '") + need + "'"};
  }
  std::vector<AuditRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() < col.size()) return {"malformed telemetry row: " + line};
    rows.push_back({std::stoll(cells[col["t"]]), cells[col["role"]], cells[col["verdict"]], cells[col["flag"]],
                    cells[col["aggregated"]] == "1"});
  }
  return audit_rows(rows, interactive_demos);
}

}  // namespace partnr
