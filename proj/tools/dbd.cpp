// dbd demo|sweep|certify --config <path> [--paper-scene] [--seed S] [--out DIR] [--replay TRIAL_ID]
#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "dbd/experiments.hpp"

namespace {

void print_side(const char* name, const dbd::SideResult& side) {
  std::printf("%s: %zu peak(s)%s\n", name, side.peaks.size(), side.match ? (side.success ? ", success" : ", failure") : "");
  for (const dbd::Peak& pk : side.peaks)
    std::printf("  tau %.6f  nu %.6f  |f| %.6f%s%s\n", pk.tau, pk.nu, pk.norm, pk.ridge ? "  ridge" : "",
                pk.merged ? "  merged" : "");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-blind deconvolution of overlaid radar and communication signals"};
  app.require_subcommand(1);
  std::string config_path;
  bool paper_scene = false;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string replay;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_flag("--paper-scene", paper_scene, "use the fixed reference delays and Dopplers");
    sub->add_option("--seed", seed, "scene seed (base seed for sweeps)");
    sub->add_option("--out", out_dir, "output directory");
  };
  CLI::App* demo = app.add_subcommand("demo", "solve, localize and certify one scene");
  CLI::App* sweep = app.add_subcommand("sweep", "Monte Carlo success rates over (L, J)");
  CLI::App* certify = app.add_subcommand("certify", "solve one scene and check the dual certificate");
  for (CLI::App* sub : {demo, sweep, certify}) add_common(sub);
  sweep->add_option("--replay", replay, "re-run a single trial, e.g. L3-J3-t2");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? dbd::kExitOk : dbd::kExitConfigError;
  }

  dbd::ExperimentConfig cfg;
  try {
    cfg = dbd::load_config(config_path);
  } catch (const dbd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return dbd::kExitConfigError;
  }
  CLI::App* chosen = app.get_subcommands().front();
  cfg.mode = chosen == demo ? dbd::Mode::Demo : chosen == sweep ? dbd::Mode::Sweep : dbd::Mode::Certify;
  if (paper_scene) cfg.paper_scene = true;
  if (chosen->count("--seed") > 0) cfg.scene.seed = seed;
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return dbd::kExitConfigError;
  }

  try {
    switch (cfg.mode) {
      case dbd::Mode::Demo: {
        const dbd::DemoArtifacts art = dbd::run_demo(cfg);
        const auto& o = art.outcome;
        std::printf("solver %s after %d iterations, objective %.9f (sum |alpha| = %.6f)\n",
                    dbd::to_string(o.solution.report.status).c_str(), o.solution.report.iterations,
                    o.solution.objective, o.expected_objective);
        print_side("radar", o.localization.radar);
        print_side("comm", o.localization.comm);
        std::printf("artifacts in %s\n", cfg.output_dir.string().c_str());
        return art.exit_code;
      }
      case dbd::Mode::Certify: {
        const dbd::DemoArtifacts art = dbd::run_certify(cfg);
        const auto& c = *art.outcome.certificate;
        std::printf("solver %s, certificate %s (radar %s, comm %s)\n",
                    dbd::to_string(art.outcome.solution.report.status).c_str(), c.passed() ? "PASS" : "FAIL",
                    c.radar.passed() ? "pass" : "fail", c.comm.passed() ? "pass" : "fail");
        return art.exit_code;
      }
      case dbd::Mode::Sweep: {
        if (!replay.empty()) {
          const dbd::TrialRecord r = dbd::replay_trial(cfg, replay);
          std::cout << dbd::to_json(r).dump(2) << '\n';
          return r.status == "Optimal" ? dbd::kExitOk : dbd::kExitSolverFailure;
        }
        const dbd::SweepResult res = dbd::run_sweep(cfg);
        std::printf("%4s %4s %10s %10s %7s\n", "L", "J", "p_radar", "p_comm", "trials");
        for (const auto& cell : res.cells)
          std::printf("%4d %4d %10.3f %10.3f %7d\n", cell.L, cell.J, cell.p_success_radar, cell.p_success_comm,
                      cell.trials);
        return dbd::kExitOk;
      }
    }
  } catch (const dbd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return dbd::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return dbd::kExitSolverFailure;
  }
  return dbd::kExitOk;
}
