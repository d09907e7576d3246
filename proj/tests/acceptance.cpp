// Acceptance run: one PASS/FAIL line per criterion A1-A10. Exit status 1 if
// any criterion fails.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "partnr/ambiguity.hpp"
#include "partnr/config.hpp"
#include "partnr/experiment.hpp"
#include "partnr/run_files.hpp"
#include "partnr/threshold.hpp"
#include "partnr/topology.hpp"
#include "streams.hpp"

using namespace partnr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// --- algorithmic core ----------------------------------------------------

Outcome a1() {
  Rng rng(20240601);
  int mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    const auto h = oracle::distinct_heatmap(32, 32, rng);
    std::set<std::pair<int, int>> got, want;
    for (const auto& m : persistent_maxima(h, 0.0)) got.insert({m.pixel.u, m.pixel.v});
    for (const auto& p : oracle::strict_local_maxima(h)) want.insert({p.u, p.v});
    mismatches += got != want;
  }
  return {mismatches == 0, fmt("200 heatmaps 32x32, %d set mismatches", mismatches)};
}

std::vector<LocalMaximum> as_maxima(const std::vector<double>& values) {
  std::vector<LocalMaximum> out;
  for (std::size_t i = 0; i < values.size(); ++i) out.push_back({{int(i), 0}, values[i], 1.0});
  return out;
}

Outcome a2() {
  const bool single = ambiguity_measure(as_maxima({0.731})) == 1.0;
  double worst_equal = 0.0;
  for (int m = 1; m <= 20; ++m) {
    worst_equal = std::max(worst_equal, std::abs(ambiguity_measure(as_maxima(std::vector<double>(m, 2.5))) - 1.0 / m));
  }
  Rng rng(7);
  std::uniform_real_distribution<double> val(-10, 10), shift(-100, 100);
  std::uniform_int_distribution<int> size(1, 12);
  double worst_shift = 0.0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> x(size(rng));
    for (double& v : x) v = val(rng);
    const double c = shift(rng);
    std::vector<double> y = x;
    for (double& v : y) v += c;
    worst_shift = std::max(worst_shift, std::abs(ambiguity_measure(as_maxima(x)) - ambiguity_measure(as_maxima(y))));
  }
  return {single && worst_equal <= 1e-12 && worst_shift <= 1e-9,
          fmt("single=%s, max |p-1/m|=%.2e, max shift diff=%.2e over 1000 sets", single ? "1" : "!=1", worst_equal,
              worst_shift)};
}

Outcome a3() {
  const ThresholdConfig d;
  const bool defaults = d.p0 == 0.5 && d.s_des == 0.9 && d.window == 50 && d.rate == 0.005;
  // Single-step updates against the rule written out here.
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_step = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double p = 0.05 + 0.9 * u(rng), s = u(rng);
    const double expect = std::min(0.95, std::max(0.05, p + 0.005 * (0.9 - s)));
    worst_step = std::max(worst_step, std::abs(update_threshold(p, s, d) - expect));
  }
  std::string settle;
  bool all = true;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto trace = stream::run(stream::WeylStream(seed), d, 800);
    const int t0 = stream::settle_step(trace, 0.9, 0.05, 500, 200);
    all = all && t0 >= 0;
    settle += (settle.empty() ? "" : ",") + std::to_string(t0);
  }
  return {defaults && worst_step <= 1e-12 && all,
          fmt("defaults %s, max step error %.1e, settled at t=%s", defaults ? "ok" : "WRONG", worst_step,
              settle.c_str())};
}

Outcome a4() {
  const auto r = gradcheck::run(20, 1234);
  return {r.worst_relative_error <= 1e-4, fmt("20 pairs 8x8, worst relative error %.2e", r.worst_relative_error)};
}

// --- comparative runs ----------------------------------------------------

struct Run {
  std::string dir;
  nlohmann::json metrics;
  double seconds = 0.0;
  bool ok = false;
  std::string error;
};

ExperimentConfig comparative(ColorMode mode, int budget, double noise, bool interactive) {
  ExperimentConfig cfg;
  cfg.mode = mode;
  cfg.demo_budget = budget;
  cfg.noise_sigma = noise;
  if (interactive) cfg.split = {0.5, 0.5};
  return cfg;
}

class Runs {
 public:
  explicit Runs(fs::path root) : root_(std::move(root)) {}

  const Run& get(const std::string& name, const ExperimentConfig& cfg) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    Run r;
    r.dir = (root_ / name).string();
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fs::remove_all(r.dir);
      r.metrics = run_to_directory(cfg, r.dir);
      r.ok = true;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return cache_.emplace(name, std::move(r)).first->second;
  }

  std::vector<const Run*> interactive() const {
    std::vector<const Run*> out;
    for (const auto& [name, r] : cache_)
      if (r.ok && r.metrics["algorithm"] == "partnr") out.push_back(&r);
    return out;
  }

 private:
  fs::path root_;
  std::map<std::string, Run> cache_;
};

double mean_of(const nlohmann::json& metrics, const char* key) {
  double s = 0.0;
  for (const auto& p : metrics["per_seed"]) s += p[key].get<double>();
  return s / double(metrics["per_seed"].size());
}

std::string per_seed(const nlohmann::json& metrics, const char* key) {
  std::string out;
  for (const auto& p : metrics["per_seed"]) out += (out.empty() ? "" : "/") + fmt("%.1f", p[key].get<double>());
  return out;
}

Outcome directional(const Run& base, const Run& partnr, double margin, double limit_s, bool strict_margin) {
  if (!base.ok || !partnr.ok) return {false, "run failed: " + base.error + partnr.error};
  const double b = base.metrics["mean_success_rate"], p = partnr.metrics["mean_success_rate"];
  const double secs = base.seconds + partnr.seconds;
  const bool better = strict_margin ? p - b >= margin : p >= b;
  return {better && secs < limit_s,
          fmt("partnr %.1f%% (%s) vs baseline %.1f%% (%s), %.0f s", p, per_seed(partnr.metrics, "success_rate").c_str(),
              b, per_seed(base.metrics, "success_rate").c_str(), secs)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria A1-A10"};
  std::string work = "acceptance_runs";
  std::string cli = PARTNR_CLI;
  std::vector<std::string> only;
  app.add_option("--work", work, "directory for run outputs");
  app.add_option("--cli", cli, "partnr executable used for the manifest re-run");
  app.add_option("--only", only, "criteria to run, e.g. --only A1 A3");
  CLI11_PARSE(app, argc, argv);

  Runs runs(work);
  auto seen_base = [&] { return runs.get("seen500_baseline", comparative(ColorMode::kSeen, 500, 0, false)); };
  auto seen_partnr = [&] { return runs.get("seen500_partnr", comparative(ColorMode::kSeen, 500, 0, true)); };

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"A1", a1},
      {"A2", a2},
      {"A3", a3},
      {"A4", a4},
      {"A5", [&] { return directional(seen_base(), seen_partnr(), 0.0, 600, false); }},
      {"A6",
       [&] {
         const auto& b = runs.get("unseen1000_baseline", comparative(ColorMode::kUnseen, 1000, 0, false));
         const auto& p = runs.get("unseen1000_partnr", comparative(ColorMode::kUnseen, 1000, 0, true));
         return directional(b, p, 10.0, 900, true);
       }},
      {"A7",
       [&] {
         // Interactive episodes start from failure scenes half of the time;
         // offline demonstrations never do. The baseline is the offline
         // seen-500 run evaluated on the same recovery scenes.
         auto cfg = comparative(ColorMode::kSeen, 500, 0, true);
         cfg.scenario_mix = {0.5, 0.25, 0.25};
         const auto& b = seen_base();
         const auto& p = runs.get("recovery500_partnr", cfg);
         if (!b.ok || !p.ok) return Outcome{false, "run failed: " + b.error + p.error};
         int fewest = INT32_MAX;
         for (const auto& s : p.metrics["per_seed"]) fewest = std::min(fewest, s["failure_state_demos"].get<int>());
         const double pr = mean_of(p.metrics, "recovery_success_rate"), br = mean_of(b.metrics, "recovery_success_rate");
         return Outcome{fewest >= 10 && pr > br,
                        fmt("failure-state demos >= %d per seed, recovery partnr %.1f%% (%s) vs baseline %.1f%% (%s)",
                            fewest, pr, per_seed(p.metrics, "recovery_success_rate").c_str(), br,
                            per_seed(b.metrics, "recovery_success_rate").c_str())};
       }},
      {"A8",
       [&] {
         const auto& b = runs.get("noisy1000_baseline", comparative(ColorMode::kSeen, 1000, 3.0, false));
         const auto& p = runs.get("noisy1000_partnr", comparative(ColorMode::kSeen, 1000, 3.0, true));
         return directional(b, p, 0.0, 1e9, false);
       }},
      {"A9",
       [&] {
         const auto& first = seen_partnr();
         if (!first.ok) return Outcome{false, "run failed: " + first.error};
         const std::string again = (fs::path(work) / "seen500_partnr_rerun").string();
         fs::remove_all(again);
         const std::string cmd = cli + " run --manifest " + first.dir + "/manifest.json --out " + again + " > /dev/null";
         const int rc = std::system(cmd.c_str());
         if (rc != 0) return Outcome{false, "manifest re-run exited with " + std::to_string(rc)};
         bool same = true;
         for (const char* f : {"metrics.json", "telemetry.csv", "model_seed1.json"}) {
           same = same && read_file(first.dir + "/" + f) == read_file(again + "/" + f);
         }
         return Outcome{same, same ? "metrics.json, telemetry.csv, model_seed1.json byte-identical"
                                   : "outputs differ between runs"};
       }},
      {"A10",
       [&] {
         const auto dirs = runs.interactive();
         if (dirs.empty()) return Outcome{false, "no interactive run to audit"};
         std::size_t problems = 0, rows = 0;
         std::string first;
         for (const auto* r : dirs) {
           const auto p = audit_run_directory(r->dir);
           problems += p.size();
           if (!p.empty() && first.empty()) first = r->dir + ": " + p.front();
           const auto csv = read_file(r->dir + "/telemetry.csv");
           rows += std::count(csv.begin(), csv.end(), '\n') - 1;
         }
         return Outcome{problems == 0, fmt("%zu runs, %zu decisions audited, %zu violations%s%s", dirs.size(), rows,
                                           problems, first.empty() ? "" : "; ", first.c_str())};
       }},
  };

  int failed = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("%s %s  %s  [%.1f s]\n", name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str(), s);
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
