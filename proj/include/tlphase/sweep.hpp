#pragma once

// Sweep configuration and the command implementations behind the tlphase CLI:
// prediction tables, phase-diagram tables, theory-vs-simulation comparisons
// and plot-ready data extraction. Tables serialize to CSV and JSON with
// identical numeric content.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tlphase/model.hpp"

namespace tlphase {

enum class SweepAxis { AlphaT, Rho, Delta, Lambda, BetaT };

std::string to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(const std::string& s);

struct GridSpec {
  double start = 0.0;
  double stop = 0.0;
  int count = 1;

  std::vector<double> points() const;
};

struct SimConfig {
  int p = 200;
  int n_trials = 10;
  std::uint64_t master_seed = 1;
};

struct SweepConfig {
  TaskSpec base;
  SweepAxis axis = SweepAxis::Rho;
  GridSpec grid;
  bool out_predict = false;
  bool out_simulate = false;
  bool out_phase = false;
  std::optional<SimConfig> sim;
  std::string out_path;
  std::string format = "csv";  // csv | json
  // Optional coupling alpha_s = ratio * alpha_t, applied per grid point.
  std::optional<double> alpha_s_ratio;
  // Phase sweeps: alpha_t values for the boundary table (default: base).
  std::vector<double> alpha_t_grid;
  int delta_grid = 201;
  int jobs = 0;  // 0 = available parallelism
  bool deterministic = false;
};

SweepConfig sweep_config_from_json(const nlohmann::json& j);
SweepConfig load_sweep_config(const std::string& path);

// One tabular cell: absent, numeric, or text.
using Cell = std::variant<std::monostate, double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  nlohmann::json config_echo;  // resolved configuration, echoed into JSON output

  int column_index(const std::string& name) const;  // -1 when missing
  bool all_ok() const;  // no row has a non-empty "error" cell
};

Table cmd_predict(const SweepConfig& config);
Table cmd_phase(const SweepConfig& config);
Table cmd_simulate(const SweepConfig& config);

// Serialization. Numbers are printed with 17 significant digits in both
// formats; --deterministic suppresses the timestamp/host comment line.
std::string table_to_csv(const Table& table, bool deterministic);
std::string table_to_json(const Table& table, bool deterministic);
void write_table(const Table& table, const std::string& path, const std::string& format,
                 bool deterministic);

Table read_table(const std::string& path);  // accepts .csv or .json output files

struct PlotCurve {
  std::string label;
  std::string path;
  std::size_t points = 0;
};

// Splits a result table into one two-column (x, y) file per curve plus a
// manifest listing the curve labels. Unknown column names are rejected.
std::vector<PlotCurve> cmd_plotdata(const Table& table, const std::string& x_column,
                                    const std::string& y_column,
                                    const std::string& group_column,
                                    const std::string& out_dir,
                                    const std::string& stem);

}  // namespace tlphase
