#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "partnr/colors.hpp"
#include "partnr/model.hpp"
#include "partnr/simulator.hpp"
#include "partnr/threshold.hpp"

namespace partnr {

enum class FpEquality { kFootprint, kPixel };
enum class TeacherKind { kScripted, kHuman };

struct Split {
  double offline = 1.0;
  double interactive = 0.0;
};

// Relative weights of the scenarios episodes start from.
struct ScenarioMix {
  double normal = 1.0;
  double failure_a = 0.0;
  double failure_b = 0.0;

  Scenario sample(Rng& rng) const;
};

struct ExperimentConfig {
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int image_size = 64;
  ColorMode mode = ColorMode::kSeen;
  ScenarioMix scenario_mix;
  int demo_budget = 500;
  Split split;
  double noise_sigma = 0.0;
  std::array<ThresholdConfig, 2> thresholds;  // indexed by role
  double persistence_min_rel = 0.05;
  double candidate_floor = 0.01;
  FpEquality fp_equality = FpEquality::kFootprint;
  TrainConfig train;
  int n_eval_episodes = 100;
  int n_recovery_scenes = 30;
  bool eval_gated = false;
  // Hard cap on interactive steps so a policy that stops asking still ends.
  int max_interactive_steps = 5000;
  TeacherKind teacher = TeacherKind::kScripted;
  // Human mode only: how long an autonomous act stays open for correction,
  // and how long a query may wait for an answer.
  double correction_window_s = 5.0;
  double query_timeout_s = 600.0;

  int offline_demos() const;
  int interactive_demos() const;
  bool interactive() const { return interactive_demos() > 0; }
  // "baseline" or "partnr"
  std::string algorithm() const;
  // "100% off", "50% off + 50% int", ...
  std::string split_label() const;

  const ThresholdConfig& threshold(Role role) const { return thresholds[role == Role::kPick ? 0 : 1]; }
  SimConfig sim() const { return {image_size, image_size}; }

  // Throws ConfigError naming the offending key.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
// Unknown keys and type mismatches raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// Applies "a.b.c=value" to a config document. The value is parsed as JSON
// when possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, std::string_view assignment);

struct ConfigKey {
  std::string key;
  std::string default_value;
  std::string description;
};

// Every accepted key with its default, for --help.
std::vector<ConfigKey> config_keys();

std::string_view to_string(FpEquality eq);
std::string_view to_string(TeacherKind kind);

}  // namespace partnr
