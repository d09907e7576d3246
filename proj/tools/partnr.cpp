// partnr command-line entry point. Exit codes: 0 success, 2 config or usage
// error, 3 runtime failure.
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "partnr/config.hpp"
#include "partnr/error.hpp"
#include "partnr/experiment.hpp"
#include "partnr/run_files.hpp"
#include "partnr/service.hpp"

namespace fs = std::filesystem;
using namespace partnr;

namespace {

constexpr int kConfigExit = 2;
constexpr int kRuntimeExit = 3;

struct ConfigOptions {
  std::string path;
  std::vector<std::string> overrides;
};

void add_config_options(CLI::App* cmd, ConfigOptions& opts) {
  cmd->add_option("-c,--config", opts.path, "experiment config (JSON)");
  cmd->add_option("--set", opts.overrides, "override a config key, e.g. --set split.interactive=0.5")
      ->take_all();
}

ExperimentConfig resolve_config(const ConfigOptions& opts) {
  nlohmann::json doc = nlohmann::json::object();
  if (!opts.path.empty()) {
    try {
      doc = nlohmann::json::parse(read_file(opts.path));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(opts.path + ": " + e.what());
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  for (const auto& o : opts.overrides) apply_override(doc, o);
  return config_from_json(doc);
}

// --out, then PARTNR_OUTPUT_DIR, then the fallback.
std::string output_dir(const std::string& flag, const std::string& fallback) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("PARTNR_OUTPUT_DIR"); env && *env) return env;
  return fallback;
}

std::string config_footer() {
  std::ostringstream out;
  out << "\nConfig keys (JSON file via --config, or --set key=value):\n";
  for (const auto& k : config_keys()) {
    out << "  " << k.key << " = " << k.default_value;
    if (!k.description.empty()) out << "    " << k.description;
    out << "\n";
  }
  out << "\nEnvironment: PARTNR_OUTPUT_DIR overrides the default output directory.\n"
      << "Exit codes: 0 success, 2 config error, 3 runtime failure.\n";
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive imitation learning workbench: ambiguity-gated teacher queries on a table-top simulator"};
  app.require_subcommand(1);
  app.footer(config_footer());

  // generate-demos
  ConfigOptions gen_cfg;
  int gen_n = -1;
  std::string gen_out;
  std::uint64_t gen_seed = 0;
  bool gen_seed_set = false;
  auto* gen = app.add_subcommand("generate-demos", "write scripted expert demonstrations as NDJSON");
  add_config_options(gen, gen_cfg);
  gen->add_option("-n,--count", gen_n, "number of demonstrations (default: demo_budget)");
  gen->add_option("--seed", gen_seed, "seed (default: first config seed)")->each([&](const std::string&) {
    gen_seed_set = true;
  });
  gen->add_option("-o,--out", gen_out, "output file (default: <output dir>/demos.ndjson)");

  // train
  std::string train_demos, train_out, train_init;
  ConfigOptions train_cfg;
  int train_epochs = -1;
  std::uint64_t train_seed = 1;
  auto* trn = app.add_subcommand("train", "train a value model on a demonstration file");
  add_config_options(trn, train_cfg);
  trn->add_option("-d,--demos", train_demos, "NDJSON demonstrations")->required();
  trn->add_option("--init", train_init, "start from this checkpoint instead of zero weights");
  trn->add_option("--epochs", train_epochs, "epochs (default: train.epochs)");
  trn->add_option("--seed", train_seed, "shuffle seed");
  trn->add_option("-o,--out", train_out, "checkpoint path (default: <output dir>/model.json)");

  // run
  ConfigOptions run_cfg;
  std::string run_out, run_manifest;
  int run_port = 8080;
  std::string run_teacher;
  auto* run = app.add_subcommand("run", "offline phase, interactive phase and evaluation for every seed");
  add_config_options(run, run_cfg);
  run->add_option("--manifest", run_manifest, "re-run the config stored in a manifest.json");
  run->add_option("--teacher", run_teacher, "scripted | human (overrides the config)");
  run->add_option("--port", run_port, "port of the session service in human mode");
  run->add_option("-o,--out", run_out, "output directory");

  // evaluate
  std::string eval_model;
  int eval_episodes = 100, eval_recovery = 0;
  std::string eval_mode = "seen";
  std::uint64_t eval_seed = 1;
  auto* ev = app.add_subcommand("evaluate", "success rate of a checkpoint with gating off");
  ev->add_option("-m,--model", eval_model, "checkpoint")->required();
  ev->add_option("--episodes", eval_episodes, "episodes of three commands");
  ev->add_option("--recovery", eval_recovery, "also evaluate this many failure scenes");
  ev->add_option("--mode", eval_mode, "seen | unseen");
  ev->add_option("--seed", eval_seed, "evaluation seed");

  // report
  std::vector<std::string> report_inputs;
  std::string report_out;
  auto* rep = app.add_subcommand("report", "Markdown comparison table from metrics files");
  rep->add_option("metrics", report_inputs, "metrics.json files or run directories");
  rep->add_option("-o,--out", report_out, "write the table here instead of stdout");

  // serve
  ConfigOptions serve_cfg;
  int serve_port = 8080;
  std::string serve_host = "127.0.0.1", serve_static;
  auto* srv = app.add_subcommand("serve", "HTTP session service for a human teacher");
  add_config_options(srv, serve_cfg);
  srv->add_option("--host", serve_host, "bind address");
  srv->add_option("--port", serve_port, "port");
  srv->add_option("--static", serve_static, "directory with UI assets served at /");

  // audit
  std::string audit_dir;
  auto* aud = app.add_subcommand("audit", "check flag bookkeeping of a run directory");
  aud->add_option("dir", audit_dir, "run directory with metrics.json and telemetry.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigExit;
  }

  try {
    if (*gen) {
      const auto cfg = resolve_config(gen_cfg);
      const int n = gen_n >= 0 ? gen_n : cfg.demo_budget;
      const std::uint64_t seed = gen_seed_set ? gen_seed : cfg.seeds.front();
      const auto path = gen_out.empty() ? (fs::path(output_dir("", "out")) / "demos.ndjson").string() : gen_out;
      if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
      const Dataset d = generate_demos(n, cfg.mode, cfg.scenario_mix, cfg.noise_sigma, seed, cfg.sim());
      save_dataset(d, path);
      std::cout << "wrote " << d.size() << " demonstrations to " << path << "\n";
    } else if (*trn) {
      const auto cfg = resolve_config(train_cfg);
      const Dataset d = load_dataset(train_demos);
      const ValueModel init = train_init.empty() ? ValueModel{} : load_model(train_init);
      Rng rng = make_rng(train_seed, "offline-train");
      const ValueModel m = train(init, d, train_epochs >= 0 ? train_epochs : cfg.train.epochs, cfg.train, rng);
      const auto path = train_out.empty() ? (fs::path(output_dir("", "out")) / "model.json").string() : train_out;
      if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
      save_model(m, path);
      std::cout << "trained on " << d.examples().size() << " examples, loss "
                << dataset_loss(m, d, cfg.train.l2) << ", wrote " << path << "\n";
    } else if (*run) {
      ExperimentConfig cfg;
      if (!run_manifest.empty()) {
        cfg = config_from_manifest(nlohmann::json::parse(read_file(run_manifest)));
      } else {
        cfg = resolve_config(run_cfg);
      }
      if (run_teacher == "human") {
        cfg.teacher = TeacherKind::kHuman;
      } else if (run_teacher == "scripted") {
        cfg.teacher = TeacherKind::kScripted;
      } else if (!run_teacher.empty()) {
        throw ConfigError("--teacher: expected scripted or human");
      }
      const auto dir = output_dir(run_out, "runs/" + cfg.algorithm());
      nlohmann::json metrics;
      if (cfg.teacher == TeacherKind::kHuman) {
        metrics = run_with_human_teacher(cfg, dir, "127.0.0.1", run_port, std::cout);
      } else {
        metrics = run_to_directory(cfg, dir);
      }
      std::cout << cfg.algorithm() << " (" << cfg.split_label() << ", " << to_string(cfg.mode) << ", "
                << cfg.demo_budget << " demos): mean success " << metrics["mean_success_rate"].get<double>()
                << "%\n";
      for (const auto& s : metrics["per_seed"]) {
        std::cout << "  seed " << s["seed"] << ": " << s["success_rate"].get<double>() << "%\n";
      }
      std::cout << "outputs in " << dir << "\n";
    } else if (*ev) {
      const ValueModel m = load_model(eval_model);
      ModelPolicy policy(m);
      const auto mode = parse_color_mode(eval_mode);
      const auto r = evaluate(policy, eval_episodes, mode, eval_seed);
      nlohmann::json out = {{"success_rate", r.success_rate()}, {"commands", r.commands}, {"successes", r.successes}};
      if (eval_recovery > 0) {
        ModelPolicy rp(m);
        out["recovery_success_rate"] = evaluate_recovery(rp, eval_recovery, mode, eval_seed).success_rate();
      }
      std::cout << out.dump(2) << "\n";
    } else if (*rep) {
      if (report_inputs.empty()) {
        std::cerr << "report: at least one metrics file is required\n" << rep->help();
        return kConfigExit;
      }
      std::vector<nlohmann::json> metrics;
      for (const auto& in : report_inputs) {
        const auto path = fs::is_directory(in) ? (fs::path(in) / "metrics.json").string() : in;
        try {
          metrics.push_back(nlohmann::json::parse(read_file(path)));
        } catch (const nlohmann::json::parse_error& e) {
          throw InvalidInput(path + ": " + e.what());
        }
      }
      const auto table = report_table(metrics);
      if (report_out.empty()) {
        std::cout << table;
      } else {
        write_file(report_out, table);
      }
    } else if (*srv) {
      const auto cfg = resolve_config(serve_cfg);
      ServiceOptions opts;
      opts.static_dir = serve_static;
      opts.output_dir = output_dir("", "runs/live");
      SessionService service(cfg, opts);
      std::cout << "serving on http://" << serve_host << ":" << serve_port << "\n" << std::flush;
      if (!service.listen(serve_host, serve_port)) throw Error("cannot bind " + serve_host);
    } else if (*aud) {
      const auto problems = audit_run_directory(audit_dir);
      for (const auto& p : problems) std::cout << p << "\n";
      std::cout << (problems.empty() ? "audit passed" : "audit FAILED") << "\n";
      return problems.empty() ? 0 : kRuntimeExit;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeExit;
  }
  return 0;
}
