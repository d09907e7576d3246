#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "partnr/experiment.hpp"

namespace partnr {

// Build identifier baked in at configure time ("unknown" outside git).
std::string build_id();

// Telemetry of several seeds in one CSV, seed as the first column.
std::string seeded_telemetry_csv(const std::vector<SeedResult>& results, bool eval);

// Runs every seed of cfg and writes metrics.json, telemetry.csv,
// manifest.json and table.md (plus eval_telemetry.csv when evaluation is
// gated) into `dir`, which is created if needed. Returns the metrics.
nlohmann::json run_to_directory(const ExperimentConfig& cfg, const std::string& dir, Teacher* teacher = nullptr,
                                const EventSink& sink = {});

// Config stored in a manifest.json.
ExperimentConfig config_from_manifest(const nlohmann::json& manifest);

// Audit of telemetry.csv against the per-seed demo counts in metrics.json.
std::vector<std::string> audit_run_directory(const std::string& dir);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace partnr
