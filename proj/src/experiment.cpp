#include "partnr/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "partnr/error.hpp"

namespace partnr {

void ModelPolicy::log_gate(std::array<double, 2> thresholds, double persistence_min_rel, double candidate_floor) {
  thresholds_ = thresholds;
  persistence_min_rel_ = persistence_min_rel;
  candidate_floor_ = candidate_floor;
}

Action ModelPolicy::act(const SceneState& scene, const Observation& obs) {
  const FeatureMap features = compute_features(obs.image);
  Action a;
  for (Role role : kRoles) {
    const int color = role == Role::kPick ? obs.command.pick_color : obs.command.place_color;
    const std::optional<Pixel> cond = role == Role::kPlace ? std::optional<Pixel>(a.pick) : std::nullopt;
    const Heatmap h = predict_heatmap(model_, features, obs.image, role, color, cond);
    const Pixel chosen = argmax_pixel(h);
    (role == Role::kPick ? a.pick : a.place) = chosen;
    if (!thresholds_) continue;
    const double thr = (*thresholds_)[role == Role::kPick ? 0 : 1];
    const RoleAnalysis analysis = analyze(h, thr, persistence_min_rel_, candidate_floor_);
    DecisionRecord r;
    r.t = t_;
    r.role = role;
    r.state = classify_state(scene, obs.command);
    r.maxima = analysis.maxima;
    r.p_hat = analysis.gate.p_hat;
    r.threshold_before = r.threshold_after = thr;
    r.verdict = analysis.gate.verdict;
    r.a_max = r.action = chosen;
    r.necessary = necessity_oracle(scene, obs.command, chosen, role);
    const bool ambiguous = r.verdict == Verdict::kAmbiguous;
    r.flag = ambiguous ? (r.necessary ? Flag::kTP : Flag::kFP) : (r.necessary ? Flag::kFN : Flag::kTN);
    r.success = !r.necessary;
    log_.push_back(std::move(r));
  }
  ++t_;
  return a;
}

Action ExpertPolicy::act(const SceneState& scene, const Observation& obs) {
  return scripted_expert(scene, obs.command, 0.0, rng_);
}

EvalResult evaluate(Policy& policy, int n_episodes, ColorMode mode, std::uint64_t seed, const SimConfig& sim) {
  EvalResult out;
  for (int e = 0; e < n_episodes; ++e) {
    const std::string tag = std::to_string(e);
    auto [scene, command] = reset(derive_seed(seed, "eval-episode-" + tag), mode, Scenario::kNormal, sim);
    Rng commands = make_rng(seed, "eval-commands-" + tag);
    for (int c = 0; c < 3; ++c) {
      const Observation obs{render(scene), command};
      const Action a = policy.act(scene, obs);
      auto [next, result] = step(scene, command, a);
      ++out.commands;
      if (result.place_success) ++out.successes;
      scene = std::move(next);
      if (c + 1 < 3) command = next_command(scene, std::make_pair(command, result.place_success), commands);
    }
  }
  return out;
}

double evaluate(const ValueModel& model, int n_episodes, ColorMode mode, std::uint64_t seed, const SimConfig& sim) {
  ModelPolicy policy(model);
  return evaluate(policy, n_episodes, mode, seed, sim).success_rate();
}

EvalResult evaluate_recovery(Policy& policy, int n_scenes, ColorMode mode, std::uint64_t seed,
                             const SimConfig& sim) {
  EvalResult out;
  for (int i = 0; i < n_scenes; ++i) {
    const Scenario scenario = i % 2 == 0 ? Scenario::kFailureA : Scenario::kFailureB;
    auto [scene, command] = reset(derive_seed(seed, "recovery-scene-" + std::to_string(i)), mode, scenario, sim);
    const Observation obs{render(scene), command};
    auto [next, result] = step(scene, command, policy.act(scene, obs));
    ++out.commands;
    if (result.place_success) ++out.successes;
  }
  return out;
}

Dataset generate_demos(int n, ColorMode mode, const ScenarioMix& mix, double noise_sigma, std::uint64_t seed,
                       const SimConfig& sim) {
  if (n < 0) throw InvalidInput("demo count must be >= 0");
  Dataset d;
  Rng noise = make_rng(seed, "expert-noise");
  Rng commands = make_rng(seed, "demo-commands");
  Rng scenarios = make_rng(seed, "demo-scenarios");
  for (int e = 0; d.size() < std::size_t(n); ++e) {
    auto [scene, command] =
        reset(derive_seed(seed, "demo-episode-" + std::to_string(e)), mode, mix.sample(scenarios), sim);
    for (int c = 0; c < 3 && d.size() < std::size_t(n); ++c) {
      const Observation obs{render(scene), command};
      const Action a = scripted_expert(scene, command, noise_sigma, noise);
      d.append({obs, a, Phase::kOffline, RoleMask::kBoth});
      auto [next, result] = step(scene, command, a);
      scene = std::move(next);
      if (c + 1 < 3) command = next_command(scene, std::make_pair(command, result.place_success), commands);
    }
  }
  return d;
}

int update_budget(const ExperimentConfig& cfg) {
  return cfg.train.epochs * updates_per_epoch(2 * std::size_t(cfg.demo_budget), cfg.train);
}

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, Teacher* teacher, const EventSink& sink) {
  cfg.validate();
  SeedResult r;
  r.seed = seed;
  const SimConfig sim = cfg.sim();
  // Offline demonstrations always come from the seen split and from normal
  // scenes; the scenario mix only shapes interactive episodes.
  Dataset offline = generate_demos(cfg.offline_demos(), ColorMode::kSeen, ScenarioMix{}, cfg.noise_sigma,
                                   derive_seed(seed, "offline"), sim);
  r.offline_demos = static_cast<int>(offline.size());
  const int budget = update_budget(cfg);
  Rng train_rng = make_rng(seed, "offline-train");
  ValueModel model = train(ValueModel{}, offline, cfg.train.epochs, cfg.train, train_rng);
  r.updates_offline = cfg.train.epochs * updates_per_epoch(offline.examples().size(), cfg.train);

  if (cfg.interactive()) {
    LoopSettings settings = LoopSettings::from(cfg);
    settings.update_budget = std::max(0, budget - r.updates_offline);
    settings.demo_budget = cfg.interactive_demos();
    ScriptedTeacher scripted(cfg.noise_sigma, seed);
    Session session(settings, std::move(model), std::move(offline), teacher ? *teacher : scripted, seed);
    if (sink) session.set_event_sink(sink);
    session.run(cfg.interactive_demos(), cfg.max_interactive_steps);
    session.flush_updates();
    r.interactive_demos = session.interactive_demos();
    r.failure_state_demos = session.failure_state_demos();
    r.interactive_steps = static_cast<int>(session.step());
    r.updates_interactive = session.updates();
    for (Role role : kRoles) {
      const std::size_t i = role == Role::kPick ? 0 : 1;
      r.flags[i] = session.controller(role).ledger().totals();
      r.final_threshold[i] = session.controller(role).threshold();
    }
    r.telemetry = session.telemetry();
    model = session.model();
    r.dataset = session.dataset();
  } else {
    const int leftover = budget - r.updates_offline;
    if (leftover > 0) {
      model = train_steps(std::move(model), offline, leftover, cfg.train, train_rng);
      r.updates_offline += leftover;
    }
    r.final_threshold = {cfg.thresholds[0].p0, cfg.thresholds[1].p0};
    r.dataset = std::move(offline);
  }

  ModelPolicy policy(model);
  if (cfg.eval_gated) policy.log_gate(r.final_threshold, cfg.persistence_min_rel, cfg.candidate_floor);
  r.success_rate = evaluate(policy, cfg.n_eval_episodes, cfg.mode, derive_seed(seed, "eval"), sim).success_rate();
  r.eval_telemetry = policy.gate_log();
  ModelPolicy recovery_policy(model);
  r.recovery_success_rate =
      evaluate_recovery(recovery_policy, cfg.n_recovery_scenes, cfg.mode, derive_seed(seed, "recovery"), sim)
          .success_rate();
  r.model = std::move(model);
  return r;
}

namespace {

nlohmann::json flags_json(const FlagCounts& f) { return {{"TP", f.tp}, {"TN", f.tn}, {"FP", f.fp}, {"FN", f.fn}}; }

double mean_of(const std::vector<SeedResult>& rs, double SeedResult::*field) {
  double s = 0.0;
  for (const auto& r : rs) s += r.*field;
  return rs.empty() ? 0.0 : s / double(rs.size());
}

double std_of(const std::vector<SeedResult>& rs, double SeedResult::*field) {
  if (rs.size() < 2) return 0.0;
  const double m = mean_of(rs, field);
  double s = 0.0;
  for (const auto& r : rs) s += (r.*field - m) * (r.*field - m);
  return std::sqrt(s / double(rs.size() - 1));
}

}  // namespace

nlohmann::json seed_metrics(const SeedResult& r) {
  return {{"seed", r.seed},
          {"success_rate", r.success_rate},
          {"recovery_success_rate", r.recovery_success_rate},
          {"offline_demos", r.offline_demos},
          {"interactive_demos", r.interactive_demos},
          {"failure_state_demos", r.failure_state_demos},
          {"interactive_steps", r.interactive_steps},
          {"updates", {{"offline", r.updates_offline}, {"interactive", r.updates_interactive}}},
          {"flags", {{"pick", flags_json(r.flags[0])}, {"place", flags_json(r.flags[1])}}},
          {"final_threshold", {{"pick", r.final_threshold[0]}, {"place", r.final_threshold[1]}}}};
}

nlohmann::json metrics_json(const ExperimentConfig& cfg, const std::vector<SeedResult>& results) {
  nlohmann::json per_seed = nlohmann::json::array();
  for (const auto& r : results) per_seed.push_back(seed_metrics(r));
  return {{"format", "partnr-metrics"},
          {"version", 1},
          {"algorithm", cfg.algorithm()},
          {"split", cfg.split_label()},
          {"mode", std::string(to_string(cfg.mode))},
          {"demo_budget", cfg.demo_budget},
          {"noise_sigma", cfg.noise_sigma},
          {"update_budget", update_budget(cfg)},
          {"mean_success_rate", mean_of(results, &SeedResult::success_rate)},
          {"std_success_rate", std_of(results, &SeedResult::success_rate)},
          {"mean_recovery_success_rate", mean_of(results, &SeedResult::recovery_success_rate)},
          {"per_seed", per_seed},
          {"config", to_json(cfg)}};
}

std::string report_table(const std::vector<nlohmann::json>& metrics) {
  if (metrics.empty()) throw InvalidInput("report needs at least one metrics file");
  struct Column {
    std::string mode;
    int budget;
    double noise;
    bool operator<(const Column& o) const {
      return std::tie(mode, noise, budget) < std::tie(o.mode, o.noise, o.budget);
    }
  };
  std::vector<std::pair<std::string, std::string>> rows;
  std::set<Column> columns;
  std::map<std::pair<std::string, std::string>, std::map<Column, double>> cells;
  for (const auto& m : metrics) {
    if (!m.is_object() || m.value("format", std::string()) != "partnr-metrics") {
      throw InvalidInput("not a metrics file (missing format \"partnr-metrics\")");
    }
    try {
      const std::pair row{m.at("algorithm").get<std::string>(), m.at("split").get<std::string>()};
      const Column col{m.at("mode").get<std::string>(), m.at("demo_budget").get<int>(),
                       m.at("noise_sigma").get<double>()};
      if (std::find(rows.begin(), rows.end(), row) == rows.end()) rows.push_back(row);
      columns.insert(col);
      cells[row][col] = m.at("mean_success_rate").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInput(std::string("metrics schema mismatch: ") + e.what());
    }
  }
  std::string out = "| algorithm | split |";
  std::string rule = "|---|---|";
  for (const auto& c : columns) {
    char buf[96];
    if (c.noise > 0.0) {
      std::snprintf(buf, sizeof buf, " %s %d noisy (sigma %g) |", c.mode.c_str(), c.budget, c.noise);
    } else {
      std::snprintf(buf, sizeof buf, " %s %d |", c.mode.c_str(), c.budget);
    }
    out += buf;
    rule += "---|";
  }
  out += "\n" + rule + "\n";
  for (const auto& row : rows) {
    out += "| " + row.first + " | " + row.second + " |";
    for (const auto& c : columns) {
      const auto& r = cells[row];
      if (auto it = r.find(c); it != r.end()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, " %.1f |", it->second);
        out += buf;
      } else {
        out += " — |";
      }
    }
    out += "\n";
  }
  return out;
}

}  // namespace partnr
