#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cfl/dataset_io.hpp"
#include "cfl/experiments.hpp"

namespace {

void print(const nlohmann::ordered_json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local-average potential learning: simulate, reconstruct, plan, validate, calibrate"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cfl::software_version());

  std::string config, dataset, report, plot, out;

  auto* sim = app.add_subcommand("simulate", "Run the measurement protocol and write an omega dataset");
  sim->add_option("-c,--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("--dataset", dataset, "Override the dataset output path");

  auto* rec = app.add_subcommand("reconstruct", "Reconstruct the potential from a dataset");
  rec->add_option("-c,--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  rec->add_option("--dataset", dataset, "Dataset CSV (default: the config's output path)");
  rec->add_option("--report", report, "Override the report path");
  rec->add_option("--plot", plot, "Override the plot CSV path");

  cfl::PlanRequest preq;
  double L = 1.0;
  int m = 1, d = 1;
  std::string mode = "sequential";
  std::optional<double> eps_p;
  auto* plan = app.add_subcommand("plan", "Print the sampling plan");
  plan->add_option("-c,--config", config, "Take the plan parameters from a config")->check(CLI::ExistingFile);
  plan->add_option("--epsilon", preq.epsilon, "Target precision of the local averages");
  plan->add_option("--delta", preq.delta, "Failure probability");
  plan->add_option("--triples", preq.n_triples, "Number of measured triples");
  plan->add_option("--L", L, "Domain side length");
  plan->add_option("--m", m, "Boxes per axis");
  plan->add_option("--d", d, "Dimension");
  plan->add_option("--mode", mode, "sequential or parallel");
  plan->add_option("--kappa", preq.kappa, "Derivative constant");
  plan->add_option("--c-t", preq.c_t, "Prefactor of the evolution time");
  plan->add_option("--epsilon-p", eps_p, "Probability-level precision (overrides kappa t epsilon / 3)");

  cfl::ValidationOptions vopt;
  auto* val = app.add_subcommand("validate", "Run the cross-backend, shell-theorem, kappa and involution checks");
  val->add_option("--report", report, "Write the validation report here");
  val->add_option("--seed", vopt.seed, "Seed for the random settings");
  val->add_option("--backend-settings", vopt.backend_settings, "Random backend settings");
  val->add_option("--shell-configs", vopt.shell_configs, "Random shell-theorem configurations");
  val->add_option("--calibration-points", vopt.calibration_points_per_box, "Grid points per box for calibration");

  cfl::SimulatorOptions copt;
  copt.points_per_box = 128;
  double cal_L = 3.0;
  int cal_m = 3, cal_d = 1;
  auto* cal = app.add_subcommand("calibrate", "Fit the derivative constant on the dense backend");
  cal->add_option("-c,--config", config, "Take grid and simulator settings from a config")->check(CLI::ExistingFile);
  cal->add_option("--L", cal_L, "Domain side length");
  cal->add_option("--m", cal_m, "Boxes per axis");
  cal->add_option("--d", cal_d, "Dimension");
  cal->add_option("--points-per-box", copt.points_per_box, "Grid points per box");
  cal->add_option("--out", out, "Calibration JSON path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      auto cfg = cfl::load_config(config);
      if (!dataset.empty()) cfg.output.dataset = dataset;
      print(cfl::cmd_simulate(cfg));
    } else if (rec->parsed()) {
      auto cfg = cfl::load_config(config);
      if (!report.empty()) cfg.output.report = report;
      if (!plot.empty()) cfg.output.plot = plot;
      print(cfl::cmd_reconstruct(cfg, dataset));
    } else if (plan->parsed()) {
      if (!config.empty()) {
        const auto cfg = cfl::load_config(config);
        int rem = 0;
        preq.grid = cfg.grid;
        preq.epsilon = cfg.protocol.epsilon;
        preq.delta = cfg.protocol.delta;
        preq.mode = cfg.protocol.mode;
        preq.kappa = cfl::resolve_kappa(cfg);
        preq.c_t = cfg.protocol.c_t;
        preq.n_triples = static_cast<int>(cfl::measurement_triples(cfg.grid, rem).size());
      } else {
        preq.grid = cfl::build_grid(L, m, d);
        preq.mode = cfl::parse_mode(mode);
      }
      preq.epsilon_p = eps_p;
      print(cfl::cmd_plan(preq));
    } else if (val->parsed()) {
      const auto checks = cfl::run_validation(vopt);
      const auto rep = cfl::validation_report(checks);
      if (!report.empty()) cfl::write_text(report, rep.dump(2) + "\n");
      print(rep);
      for (const auto& c : checks)
        if (!c.passed) throw cfl::ValidationFailure("check '" + c.name + "' failed: deviation " +
                                                    std::to_string(c.deviation) + " > " +
                                                    std::to_string(c.tolerance));
    } else if (cal->parsed()) {
      cfl::BoxGrid grid = cfl::build_grid(cal_L, cal_m, cal_d);
      if (!config.empty()) {
        const auto cfg = cfl::load_config(config);
        grid = cfg.grid;
        copt = cfg.simulator;
        if (out.empty()) out = cfg.output.calibration;
      }
      if (out.empty()) out = "calibration.json";
      print(cfl::cmd_calibrate(grid, copt, out));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cfl::exit_code_for(e);
  }
  return 0;
}
