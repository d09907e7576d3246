#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "partnr/config.hpp"
#include "partnr/dataset.hpp"
#include "partnr/error.hpp"
#include "partnr/experiment.hpp"
#include "partnr/run_files.hpp"
#include "partnr/simulator.hpp"

using namespace partnr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("partnr_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Runs the CLI with output captured; returns the exit code.
int cli(const std::string& args, std::string* out = nullptr, const std::string& env = "") {
  const fs::path log = fs::temp_directory_path() / "partnr_cli_stdout.txt";
  const std::string cmd = env + " " + PARTNR_CLI + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (out) *out = read_file(log.string());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kTiny = "--set seeds=[1] demo_budget=12 n_eval_episodes=4 n_recovery_scenes=2 train.epochs=3";

}  // namespace

TEST_CASE("defaults") {
  const ExperimentConfig cfg;
  CHECK(cfg.threshold(Role::kPick).p0 == 0.5);
  CHECK(cfg.threshold(Role::kPlace).s_des == 0.9);
  CHECK(cfg.n_eval_episodes == 100);
  CHECK(cfg.image_size == 64);
  CHECK(cfg.algorithm() == "baseline");
  CHECK(cfg.split_label() == "100% off");
  CHECK(config_from_json(nlohmann::json::object()).demo_budget == cfg.demo_budget);
  CHECK(to_json(config_from_json(to_json(cfg))) == to_json(cfg));
}

TEST_CASE("split arithmetic") {
  ExperimentConfig cfg;
  cfg.demo_budget = 500;
  cfg.split = {0.5, 0.5};
  CHECK(cfg.offline_demos() == 250);
  CHECK(cfg.interactive_demos() == 250);
  CHECK(cfg.algorithm() == "partnr");
  CHECK(cfg.split_label() == "50% off + 50% int");
  CHECK(update_budget(cfg) == 50 * 32);
  cfg.split = {0.7, 0.5};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.split = {0.0, 1.0};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("unknown keys and bad types are config errors") {
  CHECK_THROWS_AS(config_from_json({{"no_such_key", 1}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"train", {{"epoch", 3}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"demo_budget", "many"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"mode", "sideways"}}), Error);
  CHECK_THROWS_AS(config_from_json({{"seed", 1}, {"seeds", {1}}}), ConfigError);
  CHECK(config_from_json({{"seed", 7}}).seeds == std::vector<std::uint64_t>{7});
}

TEST_CASE("dotted overrides") {
  nlohmann::json doc = nlohmann::json::object();
  apply_override(doc, "split.interactive=0.5");
  apply_override(doc, "split.offline=0.5");
  apply_override(doc, "mode=unseen");
  apply_override(doc, "threshold.pick.s_des=0.8");
  const auto cfg = config_from_json(doc);
  CHECK(cfg.split.interactive == 0.5);
  CHECK(cfg.mode == ColorMode::kUnseen);
  CHECK(cfg.threshold(Role::kPick).s_des == 0.8);
  CHECK(cfg.threshold(Role::kPlace).s_des == 0.9);
  CHECK_THROWS_AS(apply_override(doc, "no equals sign"), ConfigError);
}

TEST_CASE("key listing covers the controller defaults") {
  const auto keys = config_keys();
  auto find = [&](const std::string& k) {
    for (const auto& c : keys)
      if (c.key == k) return c.default_value;
    return std::string("missing");
  };
  CHECK(find("threshold.pick.p0") == "0.5");
  CHECK(find("threshold.place.s_des") == "0.9");
  CHECK(find("threshold.pick.window") == "50");
  CHECK(find("threshold.pick.rate") == "0.005");
  CHECK(find("demo_budget") == "500");
}

TEST_CASE("report table") {
  auto metrics = [](std::string alg, std::string split, std::string mode, int budget, double rate) {
    return nlohmann::json{{"format", "partnr-metrics"}, {"algorithm", alg}, {"split", split}, {"mode", mode},
                          {"demo_budget", budget}, {"noise_sigma", 0.0}, {"mean_success_rate", rate}};
  };
  const auto table = report_table({metrics("baseline", "100% off", "seen", 500, 28.25),
                                   metrics("partnr", "50% off + 50% int", "seen", 500, 30.3),
                                   metrics("partnr", "50% off + 50% int", "unseen", 1000, 53.0)});
  std::istringstream in(table);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "| algorithm | split | seen 500 | unseen 1000 |");
  CHECK(lines[2] == "| baseline | 100% off | 28.2 | — |");
  CHECK(lines[3] == "| partnr | 50% off + 50% int | 30.3 | 53.0 |");
  CHECK_THROWS_AS(report_table({}), InvalidInput);
  CHECK_THROWS_AS(report_table({{{"format", "other"}}}), InvalidInput);
  CHECK_THROWS_AS(report_table({{{"format", "partnr-metrics"}}}), InvalidInput);
}

TEST_CASE("cli: help lists every config key with its default") {
  std::string out;
  CHECK(cli("--help", &out) == 0);
  for (const auto& k : config_keys()) CHECK(out.find(k.key + " = " + k.default_value) != std::string::npos);
}

TEST_CASE("cli: config errors exit with 2") {
  CHECK(cli("run --set no_such_key=1") == 2);
  CHECK(cli("run --set split.offline=0.8 split.interactive=0.8") == 2);
  CHECK(cli("run --config /nonexistent/config.json") == 2);
  CHECK(cli("frobnicate") == 2);
  CHECK(cli("report") == 2);
}

TEST_CASE("cli: runtime failures exit with 3") {
  CHECK(cli("train --demos /nonexistent/demos.ndjson") == 3);
  const auto dir = scratch("bad_report");
  write_file((dir / "m.json").string(), "{\"format\": \"other\"}");
  CHECK(cli("report " + (dir / "m.json").string()) == 3);
}

TEST_CASE("cli: generate-demos is reproducible and expert-successful") {
  const auto dir = scratch("gen");
  const auto a = (dir / "a.ndjson").string(), b = (dir / "b.ndjson").string();
  REQUIRE(cli("generate-demos -n 60 --seed 1 -o " + a) == 0);
  REQUIRE(cli("generate-demos -n 60 --seed 1 -o " + b) == 0);
  CHECK(read_file(a) == read_file(b));
  const Dataset d = load_dataset(a);
  CHECK(d.size() == 60);
  // Every entry's action solves its own command on the recorded scene: the
  // pick lands on a box of the commanded color and the place on the bowl.
  for (const auto& e : d.entries()) {
    const Image& img = e.observation.image;
    CHECK(img.at(e.action.pick) == color_rgb(e.observation.command.pick_color));
  }
}

TEST_CASE("cli: noisy demos have a per-axis spread of about 3 pixels") {
  const auto dir = scratch("noisy");
  const auto clean = (dir / "clean.ndjson").string(), noisy = (dir / "noisy.ndjson").string();
  REQUIRE(cli("generate-demos -n 1000 --seed 1 -o " + clean) == 0);
  REQUIRE(cli("generate-demos -n 1000 --seed 1 --set noise_sigma=3 -o " + noisy) == 0);
  const Dataset c = load_dataset(clean), n = load_dataset(noisy);
  REQUIRE(c.size() == n.size());
  std::vector<double> dev;
  // First commands of each episode share scene and command; later ones
  // depend on whether the noisy action succeeded.
  for (std::size_t i = 0; i < c.size(); i += 3) {
    REQUIRE(c[i].observation.command == n[i].observation.command);
    for (const auto& [x, y] : {std::pair{c[i].action.pick, n[i].action.pick}, {c[i].action.place, n[i].action.place}}) {
      if (y.u > 0 && y.u < 63) dev.push_back(y.u - x.u);
      if (y.v > 0 && y.v < 63) dev.push_back(y.v - x.v);
    }
  }
  double m = 0, s = 0;
  for (double d : dev) m += d;
  m /= double(dev.size());
  for (double d : dev) s += (d - m) * (d - m);
  const double sd = std::sqrt(s / double(dev.size() - 1));
  CAPTURE(sd);
  CHECK(std::abs(sd - 3.0) <= 0.5);
}

TEST_CASE("cli: train, evaluate and report") {
  const auto dir = scratch("train");
  const auto demos = (dir / "d.ndjson").string(), model = (dir / "m.json").string();
  REQUIRE(cli("generate-demos -n 20 --seed 2 -o " + demos) == 0);
  REQUIRE(cli("train --set train.epochs=5 --demos " + demos + " -o " + model) == 0);
  std::string out;
  REQUIRE(cli("evaluate --model " + model + " --episodes 3 --recovery 2", &out) == 0);
  const auto j = nlohmann::json::parse(out);
  CHECK(j["commands"] == 9);
  CHECK(j.contains("recovery_success_rate"));
}

TEST_CASE("cli: run writes a manifest that reproduces itself") {
  const auto dir = scratch("run");
  const auto first = (dir / "first").string(), second = (dir / "second").string();
  REQUIRE(cli(std::string("run ") + kTiny + " split.offline=0.5 split.interactive=0.5 --out " + first) == 0);
  for (const char* f : {"metrics.json", "telemetry.csv", "table.md", "manifest.json", "model_seed1.json"}) {
    CHECK(fs::exists(fs::path(first) / f));
  }
  REQUIRE(cli("run --manifest " + first + "/manifest.json --out " + second) == 0);
  CHECK(read_file(first + "/metrics.json") == read_file(second + "/metrics.json"));
  CHECK(read_file(first + "/telemetry.csv") == read_file(second + "/telemetry.csv"));
  std::string out;
  CHECK(cli("audit " + first, &out) == 0);
  CHECK(out.find("audit passed") != std::string::npos);

  // A tampered telemetry file fails the audit.
  auto csv = read_file(first + "/telemetry.csv");
  auto pos = csv.find(",TN,");
  if (pos == std::string::npos) pos = csv.find(",FN,");
  REQUIRE(pos != std::string::npos);
  csv.replace(pos, 4, csv.compare(pos, 4, ",TN,") == 0 ? ",FN," : ",TN,");
  write_file(first + "/telemetry.csv", csv);
  CHECK(cli("audit " + first) == 3);

  std::string table;
  REQUIRE(cli("report " + second, &table) == 0);
  CHECK(table.find("| partnr | 50% off + 50% int |") != std::string::npos);
}

TEST_CASE("cli: output directory precedence") {
  const auto dir = scratch("env");
  const auto env_dir = (dir / "from_env").string(), flag_dir = (dir / "from_flag").string();
  REQUIRE(cli("generate-demos -n 2", nullptr, "PARTNR_OUTPUT_DIR=" + env_dir) == 0);
  CHECK(fs::exists(fs::path(env_dir) / "demos.ndjson"));
  REQUIRE(cli(std::string("run ") + kTiny + " --out " + flag_dir, nullptr, "PARTNR_OUTPUT_DIR=" + env_dir) == 0);
  CHECK(fs::exists(fs::path(flag_dir) / "metrics.json"));
  CHECK_FALSE(fs::exists(fs::path(env_dir) / "metrics.json"));
}
