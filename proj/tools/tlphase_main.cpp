// tlphase: asymptotic predictions, phase diagrams and Monte Carlo validation
// for the source / hard-transfer / soft-transfer learning formulations.
//
// Subcommands:
//   predict   solve the scalar saddle problems over a parameter grid
//   phase     map the negative-to-positive transfer boundary
//   simulate  compare predictions against finite-size trials
//   plotdata  split a result table into per-curve (x, y) files
//
// Sweeps are file-driven (--config sweep.json); quick experiments can
// override single fields from the command line (--rho 0.8 wins over the
// config file).

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tlphase/sweep.hpp"

namespace {

struct Overrides {
  std::optional<double> rho, alpha_s, alpha_t, lambda, delta, beta_t;
  std::optional<std::string> out, format;
  std::optional<int> jobs, p, trials;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--rho", ov.rho, "override base.rho");
  cmd->add_option("--alpha-s", ov.alpha_s, "override base.alpha_s");
  cmd->add_option("--alpha-t", ov.alpha_t, "override base.alpha_t");
  cmd->add_option("--lambda", ov.lambda, "override base.lambda");
  cmd->add_option("--delta", ov.delta, "override the hard transfer rate");
  cmd->add_option("--beta-t", ov.beta_t, "override the soft spectrum scale");
  cmd->add_option("--out", ov.out, "output file path");
  cmd->add_option("--format", ov.format, "csv or json");
  cmd->add_option("--jobs", ov.jobs, "worker pool size (0 = all cores)");
  cmd->add_option("--seed", ov.seed, "master seed for simulate");
  cmd->add_option("--p", ov.p, "simulation dimension");
  cmd->add_option("--trials", ov.trials, "Monte Carlo trials per grid point");
  cmd->add_flag("--deterministic", ov.deterministic,
                "suppress timestamps for golden-file comparisons");
}

tlphase::SweepConfig resolve(const std::string& config_path, const Overrides& ov) {
  tlphase::SweepConfig config = tlphase::load_sweep_config(config_path);
  if (ov.rho) config.base.rho = *ov.rho;
  if (ov.alpha_s) config.base.alpha_s = *ov.alpha_s;
  if (ov.alpha_t) config.base.alpha_t = *ov.alpha_t;
  if (ov.lambda) config.base.lambda = *ov.lambda;
  if (ov.delta) {
    if (config.base.transfer.mode != tlphase::TransferMode::Hard)
      config.base.transfer = tlphase::TransferConfig::hard(*ov.delta);
    else
      config.base.transfer.delta = *ov.delta;
  }
  if (ov.beta_t) {
    if (config.base.transfer.mode != tlphase::TransferMode::Soft)
      throw std::invalid_argument("--beta-t needs a soft-transfer base spec");
    auto& d = config.base.transfer.spectrum;
    if (d.kind == tlphase::SpectralDist::Kind::PointMass) d.mu0 = *ov.beta_t;
    else d.beta_t = *ov.beta_t;
  }
  if (ov.out) config.out_path = *ov.out;
  if (ov.format) config.format = *ov.format;
  if (ov.jobs) config.jobs = *ov.jobs;
  if (ov.p || ov.trials || ov.seed) {
    tlphase::SimConfig sim = config.sim.value_or(tlphase::SimConfig{});
    if (ov.p) sim.p = *ov.p;
    if (ov.trials) sim.n_trials = *ov.trials;
    if (ov.seed) sim.master_seed = *ov.seed;
    config.sim = sim;
  }
  config.deterministic = ov.deterministic;
  return config;
}

int emit(const tlphase::Table& table, const tlphase::SweepConfig& config) {
  if (config.out_path.empty()) {
    std::fputs(tlphase::table_to_csv(table, config.deterministic).c_str(), stdout);
  } else {
    tlphase::write_table(table, config.out_path, config.format, config.deterministic);
  }
  return table.all_ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transfer-learning phase-transition toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;

  CLI::App* predict = app.add_subcommand("predict", "asymptotic predictions on a grid");
  predict->add_option("--config", config_path, "sweep config JSON")->required();
  add_override_flags(predict, ov);

  CLI::App* phase = app.add_subcommand("phase", "phase-diagram table");
  phase->add_option("--config", config_path, "sweep config JSON")->required();
  add_override_flags(phase, ov);

  CLI::App* simulate = app.add_subcommand("simulate", "theory vs Monte Carlo table");
  simulate->add_option("--config", config_path, "sweep config JSON")->required();
  add_override_flags(simulate, ov);

  CLI::App* plotdata = app.add_subcommand("plotdata", "per-curve plot files");
  std::string in_path, x_col, y_col = "e_test_pred", group_col, out_dir = ".",
              stem = "curve";
  plotdata->add_option("--in", in_path, "result table (.csv or .json)")->required();
  plotdata->add_option("--x", x_col, "x column name")->required();
  plotdata->add_option("--y", y_col, "y column name");
  plotdata->add_option("--group", group_col, "split column (one curve per value)");
  plotdata->add_option("--out-dir", out_dir, "output directory");
  plotdata->add_option("--stem", stem, "file name stem");

  CLI11_PARSE(app, argc, argv);

  try {
    if (predict->parsed()) {
      const tlphase::SweepConfig config = resolve(config_path, ov);
      return emit(tlphase::cmd_predict(config), config);
    }
    if (phase->parsed()) {
      const tlphase::SweepConfig config = resolve(config_path, ov);
      return emit(tlphase::cmd_phase(config), config);
    }
    if (simulate->parsed()) {
      const tlphase::SweepConfig config = resolve(config_path, ov);
      return emit(tlphase::cmd_simulate(config), config);
    }
    if (plotdata->parsed()) {
      const tlphase::Table table = tlphase::read_table(in_path);
      const auto curves = tlphase::cmd_plotdata(table, x_col, y_col, group_col, out_dir, stem);
      std::printf("%zu curve file(s) under %s\n", curves.size(), out_dir.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
