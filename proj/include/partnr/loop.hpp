#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "partnr/ambiguity.hpp"
#include "partnr/config.hpp"
#include "partnr/dataset.hpp"
#include "partnr/model.hpp"
#include "partnr/simulator.hpp"
#include "partnr/threshold.hpp"

namespace partnr {

// Everything a teacher may look at when asked about one decision. A scripted
// teacher reads the scene; a human only sees what the service shows.
struct DecisionContext {
  std::int64_t t = 0;
  Role role = Role::kPick;
  const SceneState* scene = nullptr;
  const Observation* observation = nullptr;
  const GateDecision* gate = nullptr;
  Pixel a_max;
  // The pick actually executed; set for place decisions.
  std::optional<Pixel> executed_pick;
};

class Teacher {
 public:
  virtual ~Teacher() = default;
  // The teacher's pixel for an ambiguous decision.
  virtual Pixel query(const DecisionContext& ctx) = 0;
  // After an autonomous act: the corrected pixel, or nothing.
  virtual std::optional<Pixel> observe_correction(const DecisionContext& ctx, Pixel executed) = 0;
};

// Scripted expert for queries, correction oracle for corrections. Noise
// draws come from its own stream.
class ScriptedTeacher : public Teacher {
 public:
  ScriptedTeacher(double noise_sigma, std::uint64_t seed);

  Pixel query(const DecisionContext& ctx) override;
  std::optional<Pixel> observe_correction(const DecisionContext& ctx, Pixel executed) override;

  const Rng& rng() const { return rng_; }
  void set_rng(const Rng& rng) { rng_ = rng; }

 private:
  double noise_sigma_;
  Rng rng_;
};

// One (step, role) decision.
struct DecisionRecord {
  std::int64_t t = 0;
  int episode = 0;
  int command_index = 0;
  Role role = Role::kPick;
  StateKind state = StateKind::kNormal;
  std::vector<LocalMaximum> maxima;
  double p_hat = 1.0;
  double threshold_before = 0.5;
  double threshold_after = 0.5;
  Verdict verdict = Verdict::kConfident;
  Pixel a_max;
  Pixel action;  // executed pixel
  std::optional<Pixel> correction;
  Flag flag = Flag::kTN;
  bool necessary = false;  // oracle judgement of a_max
  bool aggregated = false;
  bool retrained = false;
  int updates = 0;
  bool success = false;  // pick: commanded box picked; place: command succeeded
  double sensitivity_est = 0.0;
  std::optional<double> specificity_est;
  std::size_t dataset_size = 0;
};

nlohmann::json to_json(const DecisionRecord& record);

// CSV header and rows shared by every telemetry writer.
std::string telemetry_csv_header();
std::string telemetry_csv_row(const DecisionRecord& record);
std::string telemetry_csv(const std::vector<DecisionRecord>& records);

struct LoopEvent {
  std::string type;  // step_started, query_pending, action_executed, ...
  nlohmann::json payload;
};
using EventSink = std::function<void(const LoopEvent&)>;

struct LoopSettings {
  std::array<ThresholdConfig, 2> thresholds;
  double persistence_min_rel = 0.05;
  double candidate_floor = 0.01;
  FpEquality fp_equality = FpEquality::kFootprint;
  TrainConfig train;
  ColorMode mode = ColorMode::kSeen;
  ScenarioMix scenario_mix;
  SimConfig sim;
  // Interactive training: `update_budget` updates spread over
  // `demo_budget` aggregated demonstrations (the k-th demonstration has
  // earned floor(k * update_budget / demo_budget) updates in total).
  int update_budget = 0;
  int demo_budget = 0;

  static LoopSettings from(const ExperimentConfig& cfg);
};

// Gate for one role on one heatmap.
struct RoleAnalysis {
  Heatmap heatmap;
  std::vector<LocalMaximum> maxima;
  GateDecision gate;
};

RoleAnalysis analyze(const Heatmap& heatmap, double threshold, double persistence_min_rel, double candidate_floor);

// Whether a teacher pixel counts as agreeing with a_max.
bool same_choice(const SceneState& scene, Role role, Pixel a, Pixel b, FpEquality eq);

// The sequential interactive loop: episodes of three commands; each command
// is one step deciding pick, then place conditioned on the executed pick.
class Session {
 public:
  Session(LoopSettings settings, ValueModel model, Dataset dataset, Teacher& teacher, std::uint64_t seed);

  // Runs one command. When the teacher throws, every piece of session state
  // is rolled back to before the step and the exception propagates.
  std::vector<DecisionRecord> run_step();

  // Steps until `demos` interactive demonstrations were aggregated or
  // `max_steps` steps ran. Stops right after the decision that exhausts the
  // budget. A step whose teacher timed out is rolled back and run again.
  void run(int demos, int max_steps);

  // Spends leftover update credit on the aggregated dataset.
  int flush_updates();

  const ValueModel& model() const { return model_; }
  const Dataset& dataset() const { return dataset_; }
  const ThresholdController& controller(Role role) const { return controllers_[role == Role::kPick ? 0 : 1]; }
  const std::vector<DecisionRecord>& telemetry() const { return telemetry_; }
  const SceneState& scene() const { return scene_; }
  const Command& command() const { return command_; }
  std::int64_t step() const { return t_; }
  int episode() const { return episode_; }
  int command_index() const { return command_index_; }
  int interactive_demos() const { return interactive_demos_; }
  int failure_state_demos() const { return failure_state_demos_; }
  int updates() const { return updates_; }
  int successes() const { return successes_; }
  int commands_run() const { return commands_run_; }
  const LoopSettings& settings() const { return settings_; }

  void set_event_sink(EventSink sink) { sink_ = std::move(sink); }

  // Scene, command and per-role gate of the upcoming decision, as shown to a
  // human teacher.
  nlohmann::json status() const;

 private:
  struct Checkpoint;

  void start_episode();
  void emit(const std::string& type, nlohmann::json payload) const;
  DecisionRecord decide(Role role, const Observation& obs, std::optional<Pixel> executed_pick, Pixel& executed);
  void aggregate(const Observation& obs, Role role, Pixel pixel, std::optional<Pixel> executed_pick);
  int retrain();

  LoopSettings settings_;
  ValueModel model_;
  Dataset dataset_;
  Teacher& teacher_;
  std::uint64_t seed_;
  std::array<ThresholdController, 2> controllers_;
  Rng episode_rng_;
  Rng train_rng_;
  SceneState scene_;
  Command command_;
  bool in_episode_ = false;
  std::int64_t t_ = 0;
  int episode_ = -1;
  int command_index_ = 0;
  int interactive_demos_ = 0;
  int failure_state_demos_ = 0;
  int updates_ = 0;
  int aggregated_ = 0;
  int successes_ = 0;
  int commands_run_ = 0;
  // Budget of the current run(); a step stops early once it is reached.
  int demo_target_ = 0;
  std::vector<DecisionRecord> telemetry_;
  EventSink sink_;
};

// Telemetry audit: exactly one flag per (t, role), queried iff Ambiguous,
// aggregated iff TP/FP/FN, interactive demos = TP + FP + FN. Returns the
// violations found (empty when clean).
std::vector<std::string> audit_telemetry(const std::vector<DecisionRecord>& records, int interactive_demos);
// Same checks on a telemetry CSV written by telemetry_csv.
std::vector<std::string> audit_telemetry_csv(const std::string& csv, std::optional<int> interactive_demos);

}  // namespace partnr
