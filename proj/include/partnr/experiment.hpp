#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "partnr/config.hpp"
#include "partnr/loop.hpp"

namespace partnr {

class Policy {
 public:
  virtual ~Policy() = default;
  virtual Action act(const SceneState& scene, const Observation& obs) = 0;
};

// Argmax of the pick heatmap, then argmax of the place heatmap conditioned
// on that pick. Optionally logs what the gate would have said.
class ModelPolicy : public Policy {
 public:
  explicit ModelPolicy(const ValueModel& model) : model_(model) {}

  // Records one DecisionRecord per role, flagged by the oracles as if a
  // teacher had been available. Thresholds stay fixed.
  void log_gate(std::array<double, 2> thresholds, double persistence_min_rel, double candidate_floor);
  const std::vector<DecisionRecord>& gate_log() const { return log_; }

  Action act(const SceneState& scene, const Observation& obs) override;

 private:
  const ValueModel& model_;
  std::optional<std::array<double, 2>> thresholds_;
  double persistence_min_rel_ = 0.05;
  double candidate_floor_ = 0.01;
  std::vector<DecisionRecord> log_;
  std::int64_t t_ = 0;
};

// The noise-free scripted expert.
class ExpertPolicy : public Policy {
 public:
  Action act(const SceneState& scene, const Observation& obs) override;

 private:
  Rng rng_{0};
};

struct EvalResult {
  int commands = 0;
  int successes = 0;
  double success_rate() const { return commands ? 100.0 * successes / commands : 0.0; }
};

// n_episodes episodes of three commands on normal scenes; a failed command
// is issued again on the resulting scene.
EvalResult evaluate(Policy& policy, int n_episodes, ColorMode mode, std::uint64_t seed, const SimConfig& sim = {});
double evaluate(const ValueModel& model, int n_episodes, ColorMode mode, std::uint64_t seed,
                const SimConfig& sim = {});

// One command on each of n_scenes failure scenes, alternating failure_a and
// failure_b.
EvalResult evaluate_recovery(Policy& policy, int n_scenes, ColorMode mode, std::uint64_t seed,
                             const SimConfig& sim = {});

// Expert demonstrations collected over episodes of three commands.
Dataset generate_demos(int n, ColorMode mode, const ScenarioMix& mix, double noise_sigma, std::uint64_t seed,
                       const SimConfig& sim = {});

// Total training updates of a run: what `epochs` passes over the whole
// demonstration budget would cost. Every algorithm gets exactly this many.
int update_budget(const ExperimentConfig& cfg);

struct SeedResult {
  std::uint64_t seed = 0;
  double success_rate = 0.0;
  double recovery_success_rate = 0.0;
  int offline_demos = 0;
  int interactive_demos = 0;
  int failure_state_demos = 0;
  int interactive_steps = 0;
  int updates_offline = 0;
  int updates_interactive = 0;
  std::array<FlagCounts, 2> flags;
  std::array<double, 2> final_threshold{0.5, 0.5};
  std::vector<DecisionRecord> telemetry;
  std::vector<DecisionRecord> eval_telemetry;
  ValueModel model;
  Dataset dataset;
};

// Offline phase (scripted expert, seen colors), interactive phase when the
// split asks for one, then frozen evaluation. A null teacher means the
// scripted one.
SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, Teacher* teacher = nullptr,
                    const EventSink& sink = {});

nlohmann::json seed_metrics(const SeedResult& r);
nlohmann::json metrics_json(const ExperimentConfig& cfg, const std::vector<SeedResult>& results);

// Markdown table: rows (algorithm, split), columns (mode, budget[, noise]);
// missing cells are "—". Throws InvalidInput on files that are not metrics.
std::string report_table(const std::vector<nlohmann::json>& metrics);

}  // namespace partnr
