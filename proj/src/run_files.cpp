#include "partnr/run_files.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "partnr/error.hpp"

#ifndef PARTNR_BUILD_ID
#define PARTNR_BUILD_ID "unknown"
#endif

namespace partnr {

namespace fs = std::filesystem;

std::string build_id() { return PARTNR_BUILD_ID; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << contents;
  if (!out) throw Error("failed writing " + path);
}

std::string seeded_telemetry_csv(const std::vector<SeedResult>& results, bool eval) {
  std::string out = "seed," + telemetry_csv_header() + "\n";
  for (const auto& r : results) {
    for (const auto& rec : eval ? r.eval_telemetry : r.telemetry) {
      out += std::to_string(r.seed) + "," + telemetry_csv_row(rec) + "\n";
    }
  }
  return out;
}

nlohmann::json run_to_directory(const ExperimentConfig& cfg, const std::string& dir, Teacher* teacher,
                                const EventSink& sink) {
  cfg.validate();
  fs::create_directories(dir);
  std::vector<SeedResult> results;
  for (auto seed : cfg.seeds) results.push_back(run_seed(cfg, seed, teacher, sink));

  const nlohmann::json metrics = metrics_json(cfg, results);
  nlohmann::json outputs = {{"metrics", "metrics.json"}, {"telemetry", "telemetry.csv"}, {"table", "table.md"}};
  write_file((fs::path(dir) / "metrics.json").string(), metrics.dump(2) + "\n");
  write_file((fs::path(dir) / "telemetry.csv").string(), seeded_telemetry_csv(results, false));
  if (cfg.eval_gated) {
    write_file((fs::path(dir) / "eval_telemetry.csv").string(), seeded_telemetry_csv(results, true));
    outputs["eval_telemetry"] = "eval_telemetry.csv";
  }
  write_file((fs::path(dir) / "table.md").string(), report_table({metrics}));
  nlohmann::json models = nlohmann::json::array();
  for (const auto& r : results) {
    const std::string name = "model_seed" + std::to_string(r.seed) + ".json";
    save_model(r.model, (fs::path(dir) / name).string());
    models.push_back(name);
  }
  outputs["models"] = models;
  const nlohmann::json manifest = {{"format", "partnr-manifest"},
                                   {"version", 1},
                                   {"build", build_id()},
                                   {"seeds", cfg.seeds},
                                   {"config", to_json(cfg)},
                                   {"outputs", outputs}};
  write_file((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  return metrics;
}

ExperimentConfig config_from_manifest(const nlohmann::json& manifest) {
  if (!manifest.is_object() || manifest.value("format", std::string()) != "partnr-manifest") {
    throw ConfigError("not a run manifest (missing format \"partnr-manifest\")");
  }
  return config_from_json(manifest.at("config"));
}

std::vector<std::string> audit_run_directory(const std::string& dir) {
  const auto metrics = nlohmann::json::parse(read_file((fs::path(dir) / "metrics.json").string()));
  const std::string csv = read_file((fs::path(dir) / "telemetry.csv").string());

  // Split the combined file per seed and audit each stream on its own.
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  if (header.rfind("seed,", 0) != 0) return {"telemetry.csv lacks the seed column"};
  const std::string inner_header = header.substr(5);
  std::map<std::string, std::string> per_seed;
  std::string line;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) return {"malformed telemetry row: " + line};
    auto& body = per_seed[line.substr(0, comma)];
    if (body.empty()) body = inner_header + "\n";
    body += line.substr(comma + 1) + "\n";
  }
  std::vector<std::string> problems;
  for (const auto& s : metrics.at("per_seed")) {
    const std::string seed = std::to_string(s.at("seed").get<std::uint64_t>());
    const int demos = s.at("interactive_demos").get<int>();
    const auto it = per_seed.find(seed);
    if (it == per_seed.end()) {
      if (demos != 0) problems.push_back("seed " + seed + ": no telemetry but " + std::to_string(demos) + " demos");
      continue;
    }
    for (auto& p : audit_telemetry_csv(it->second, demos)) problems.push_back("seed " + seed + ": " + p);
  }
  return problems;
}

}  // namespace partnr
