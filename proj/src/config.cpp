#include "partnr/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "partnr/error.hpp"

namespace partnr {

Scenario ScenarioMix::sample(Rng& rng) const {
  const double total = normal + failure_a + failure_b;
  const double x = std::uniform_real_distribution<double>(0.0, total)(rng);
  if (x < normal) return Scenario::kNormal;
  if (x < normal + failure_a) return Scenario::kFailureA;
  return Scenario::kFailureB;
}

int ExperimentConfig::offline_demos() const { return static_cast<int>(std::lround(split.offline * demo_budget)); }

int ExperimentConfig::interactive_demos() const {
  return static_cast<int>(std::lround(split.interactive * demo_budget));
}

std::string ExperimentConfig::algorithm() const { return interactive() ? "partnr" : "baseline"; }

std::string ExperimentConfig::split_label() const {
  auto pct = [](double x) { return std::to_string(static_cast<int>(std::lround(100.0 * x))) + "%"; };
  std::string label = pct(split.offline) + " off";
  if (split.interactive > 0.0) label += " + " + pct(split.interactive) + " int";
  return label;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (image_size < 16 || image_size > 512) throw ConfigError("image_size: must be in [16, 512]");
  for (double w : {scenario_mix.normal, scenario_mix.failure_a, scenario_mix.failure_b}) {
    if (!(w >= 0.0)) throw ConfigError("scenario_mix: weights must be >= 0");
  }
  if (!(scenario_mix.normal + scenario_mix.failure_a + scenario_mix.failure_b > 0.0)) {
    throw ConfigError("scenario_mix: at least one weight must be positive");
  }
  if (demo_budget <= 0) throw ConfigError("demo_budget: must be positive");
  if (!(split.offline >= 0.0 && split.offline <= 1.0) || !(split.interactive >= 0.0 && split.interactive <= 1.0)) {
    throw ConfigError("split: offline and interactive shares must lie in [0, 1]");
  }
  if (split.offline + split.interactive > 1.0 + 1e-9) {
    throw ConfigError("split: offline + interactive must not exceed 1 (got " +
                      std::to_string(split.offline + split.interactive) + ")");
  }
  if (offline_demos() <= 0) throw ConfigError("split.offline: the offline share must yield at least one demo");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma: must be >= 0");
  for (const auto& t : thresholds) t.validate();
  if (!(persistence_min_rel >= 0.0 && persistence_min_rel < 1.0)) {
    throw ConfigError("persistence_min_rel: must be in [0, 1)");
  }
  if (!(candidate_floor >= 0.0 && candidate_floor < 1.0)) throw ConfigError("candidate_floor: must be in [0, 1)");
  train.validate();
  if (n_eval_episodes < 0) throw ConfigError("n_eval_episodes: must be >= 0");
  if (n_recovery_scenes < 0) throw ConfigError("n_recovery_scenes: must be >= 0");
  if (max_interactive_steps < 0) throw ConfigError("max_interactive_steps: must be >= 0");
  if (!(correction_window_s >= 0.0)) throw ConfigError("correction_window_s: must be >= 0");
  if (!(query_timeout_s > 0.0)) throw ConfigError("query_timeout_s: must be positive");
}

std::string_view to_string(FpEquality eq) { return eq == FpEquality::kFootprint ? "footprint" : "pixel"; }
std::string_view to_string(TeacherKind kind) { return kind == TeacherKind::kScripted ? "scripted" : "human"; }

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json pick, place, train;
  to_json(pick, cfg.thresholds[0]);
  to_json(place, cfg.thresholds[1]);
  to_json(train, cfg.train);
  return {{"seeds", cfg.seeds},
          {"image_size", cfg.image_size},
          {"mode", std::string(to_string(cfg.mode))},
          {"scenario_mix",
           {{"normal", cfg.scenario_mix.normal},
            {"failure_a", cfg.scenario_mix.failure_a},
            {"failure_b", cfg.scenario_mix.failure_b}}},
          {"demo_budget", cfg.demo_budget},
          {"split", {{"offline", cfg.split.offline}, {"interactive", cfg.split.interactive}}},
          {"noise_sigma", cfg.noise_sigma},
          {"threshold", {{"pick", pick}, {"place", place}}},
          {"persistence_min_rel", cfg.persistence_min_rel},
          {"candidate_floor", cfg.candidate_floor},
          {"fp_equality", std::string(to_string(cfg.fp_equality))},
          {"train", train},
          {"n_eval_episodes", cfg.n_eval_episodes},
          {"n_recovery_scenes", cfg.n_recovery_scenes},
          {"eval_gated", cfg.eval_gated},
          {"max_interactive_steps", cfg.max_interactive_steps},
          {"teacher", std::string(to_string(cfg.teacher))},
          {"correction_window_s", cfg.correction_window_s},
          {"query_timeout_s", cfg.query_timeout_s}};
}

namespace {

// Copies `patch` onto `base`, refusing keys `base` does not define.
void merge_strict(nlohmann::json& base, const nlohmann::json& patch, const std::string& prefix) {
  for (const auto& [key, value] : patch.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "' (see --help for the key list)");
    auto& slot = base[key];
    if (slot.is_object()) {
      if (!value.is_object()) throw ConfigError(path + ": expected an object");
      merge_strict(slot, value, path);
    } else {
      slot = value;
    }
  }
}

template <class T>
T get_key(const nlohmann::json& doc, const std::string& dotted) {
  const nlohmann::json* node = &doc;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) node = &node->at(part);
  try {
    return node->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(dotted + ": wrong type (got " + node->dump() + ")");
  }
}

ThresholdConfig threshold_from(const nlohmann::json& doc, const std::string& role) {
  const std::string p = "threshold." + role + ".";
  ThresholdConfig t;
  t.p0 = get_key<double>(doc, p + "p0");
  t.s_des = get_key<double>(doc, p + "s_des");
  t.window = get_key<int>(doc, p + "window");
  t.rate = get_key<double>(doc, p + "rate");
  t.p_min = get_key<double>(doc, p + "p_min");
  t.p_max = get_key<double>(doc, p + "p_max");
  t.paper_literal_update = get_key<bool>(doc, p + "paper_literal_update");
  return t;
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& input) {
  if (!input.is_object()) throw ConfigError("config must be a JSON object");
  nlohmann::json patch = input;
  if (patch.contains("seed")) {
    if (patch.contains("seeds")) throw ConfigError("give either 'seed' or 'seeds', not both");
    patch["seeds"] = nlohmann::json::array({patch["seed"]});
    patch.erase("seed");
  }
  if (patch.contains("persistence_min")) {
    patch["persistence_min_rel"] = patch["persistence_min"];
    patch.erase("persistence_min");
  }
  nlohmann::json doc = to_json(ExperimentConfig{});
  merge_strict(doc, patch, "");

  ExperimentConfig cfg;
  cfg.seeds = get_key<std::vector<std::uint64_t>>(doc, "seeds");
  cfg.image_size = get_key<int>(doc, "image_size");
  cfg.mode = parse_color_mode(get_key<std::string>(doc, "mode"));
  cfg.scenario_mix.normal = get_key<double>(doc, "scenario_mix.normal");
  cfg.scenario_mix.failure_a = get_key<double>(doc, "scenario_mix.failure_a");
  cfg.scenario_mix.failure_b = get_key<double>(doc, "scenario_mix.failure_b");
  cfg.demo_budget = get_key<int>(doc, "demo_budget");
  cfg.split.offline = get_key<double>(doc, "split.offline");
  cfg.split.interactive = get_key<double>(doc, "split.interactive");
  cfg.noise_sigma = get_key<double>(doc, "noise_sigma");
  cfg.thresholds[0] = threshold_from(doc, "pick");
  cfg.thresholds[1] = threshold_from(doc, "place");
  cfg.persistence_min_rel = get_key<double>(doc, "persistence_min_rel");
  cfg.candidate_floor = get_key<double>(doc, "candidate_floor");
  const auto eq = get_key<std::string>(doc, "fp_equality");
  if (eq == "footprint") {
    cfg.fp_equality = FpEquality::kFootprint;
  } else if (eq == "pixel") {
    cfg.fp_equality = FpEquality::kPixel;
  } else {
    throw ConfigError("fp_equality: expected 'footprint' or 'pixel', got '" + eq + "'");
  }
  cfg.train.learning_rate = get_key<double>(doc, "train.learning_rate");
  cfg.train.l2 = get_key<double>(doc, "train.l2");
  cfg.train.epochs = get_key<int>(doc, "train.epochs");
  cfg.train.batch_size = get_key<int>(doc, "train.batch_size");
  cfg.n_eval_episodes = get_key<int>(doc, "n_eval_episodes");
  cfg.n_recovery_scenes = get_key<int>(doc, "n_recovery_scenes");
  cfg.eval_gated = get_key<bool>(doc, "eval_gated");
  cfg.max_interactive_steps = get_key<int>(doc, "max_interactive_steps");
  const auto teacher = get_key<std::string>(doc, "teacher");
  if (teacher == "scripted") {
    cfg.teacher = TeacherKind::kScripted;
  } else if (teacher == "human") {
    cfg.teacher = TeacherKind::kHuman;
  } else {
    throw ConfigError("teacher: expected 'scripted' or 'human', got '" + teacher + "'");
  }
  cfg.correction_window_s = get_key<double>(doc, "correction_window_s");
  cfg.query_timeout_s = get_key<double>(doc, "query_timeout_s");
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void apply_override(nlohmann::json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  nlohmann::json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    auto& next = (*node)[parts[i]];
    if (next.is_null()) next = nlohmann::json::object();
    if (!next.is_object()) throw ConfigError(key + ": '" + parts[i] + "' is not an object");
    node = &next;
  }
  (*node)[parts.back()] = value;
}

std::vector<ConfigKey> config_keys() {
  static const std::map<std::string, std::string> kDescriptions{
      {"seeds", "run seeds; every random stream derives from these (alias: seed)"},
      {"image_size", "scene width and height in pixels"},
      {"mode", "color split: seen | unseen"},
      {"scenario_mix.normal", "weight of normal starting scenes (interactive episodes only)"},
      {"scenario_mix.failure_a", "weight of scenes with the commanded box in a wrong bowl"},
      {"scenario_mix.failure_b", "weight of scenes with another box in the target bowl"},
      {"demo_budget", "total demonstration budget"},
      {"split.offline", "share of the budget collected offline from the scripted expert"},
      {"split.interactive", "share of the budget collected interactively"},
      {"noise_sigma", "std-dev in pixels of demonstration noise"},
      {"persistence_min_rel", "persistence floor as a fraction of the heatmap range (alias: persistence_min)"},
      {"candidate_floor", "normalized value below which maxima are not offered as candidates"},
      {"fp_equality", "teacher/argmax agreement test: footprint | pixel"},
      {"train.learning_rate", "gradient step size"},
      {"train.l2", "weight decay"},
      {"train.epochs", "epochs of the offline training call"},
      {"train.batch_size", "examples per update, 0 for full batch"},
      {"n_eval_episodes", "evaluation episodes of three commands"},
      {"n_recovery_scenes", "failure scenes in the recovery evaluation"},
      {"eval_gated", "log gate verdicts during evaluation"},
      {"max_interactive_steps", "cap on interactive steps"},
      {"teacher", "scripted | human"},
      {"correction_window_s", "human mode: seconds an autonomous act stays open for correction"},
      {"query_timeout_s", "human mode: seconds a query waits before the step is rolled back"},
  };
  static const std::map<std::string, std::string> kThresholdDescriptions{
      {"p0", "initial threshold"},
      {"s_des", "desired sensitivity"},
      {"window", "ledger window length"},
      {"rate", "adaptation rate"},
      {"p_min", "lower clamp"},
      {"p_max", "upper clamp"},
      {"paper_literal_update", "use p = p0 - rate * (s_des - s) instead of the integrating update"},
  };
  std::vector<ConfigKey> keys;
  auto walk = [&](auto& self, const nlohmann::json& node, const std::string& prefix) -> void {
    for (const auto& [key, value] : node.items()) {
      const std::string path = prefix.empty() ? key : prefix + "." + key;
      if (value.is_object()) {
        self(self, value, path);
        continue;
      }
      std::string description;
      if (auto it = kDescriptions.find(path); it != kDescriptions.end()) {
        description = it->second;
      } else if (auto jt = kThresholdDescriptions.find(key); jt != kThresholdDescriptions.end()) {
        description = jt->second;
      }
      keys.push_back({path, value.dump(), description});
    }
  };
  walk(walk, to_json(ExperimentConfig{}), "");
  return keys;
}

}  // namespace partnr
