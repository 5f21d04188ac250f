#include "tlphase/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "tlphase/parallel.hpp"
#include "tlphase/phase.hpp"
#include "tlphase/simulate.hpp"

namespace tlphase {

namespace {

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string cell_to_string(const Cell& cell) {
  if (std::holds_alternative<std::monostate>(cell)) return "";
  if (const double* d = std::get_if<double>(&cell)) return format_double(*d);
  return std::get<std::string>(cell);
}

nlohmann::json cell_to_json(const Cell& cell) {
  if (std::holds_alternative<std::monostate>(cell)) return nullptr;
  if (const double* d = std::get_if<double>(&cell)) {
    if (std::isnan(*d)) return nullptr;
    return *d;
  }
  return std::get<std::string>(cell);
}

// Columns every command shares: the resolved task spec of the row.
const std::vector<std::string> kSpecColumns = {
    "alpha_s", "alpha_t", "rho",     "lambda",        "loss",
    "form",    "phi",     "phi_hat", "upsilon",       "transfer_mode",
    "delta",   "spectrum", "beta_t", "mu0"};

void append_spec_cells(std::vector<Cell>& row, const TaskSpec& spec) {
  row.emplace_back(spec.alpha_s);
  row.emplace_back(spec.alpha_t);
  row.emplace_back(spec.rho);
  row.emplace_back(spec.lambda);
  row.emplace_back(to_string(spec.loss.kind));
  row.emplace_back(to_string(spec.loss.form));
  row.emplace_back(to_string(spec.phi));
  row.emplace_back(to_string(spec.phi_hat));
  row.emplace_back(static_cast<double>(spec.upsilon));
  switch (spec.transfer.mode) {
    case TransferMode::None:
      row.emplace_back(std::string("none"));
      row.emplace_back(std::monostate{});
      row.emplace_back(std::monostate{});
      row.emplace_back(std::monostate{});
      row.emplace_back(std::monostate{});
      break;
    case TransferMode::Hard:
      row.emplace_back(std::string("hard"));
      row.emplace_back(spec.transfer.delta);
      row.emplace_back(std::monostate{});
      row.emplace_back(std::monostate{});
      row.emplace_back(std::monostate{});
      break;
    case TransferMode::Soft: {
      const SpectralDist& d = spec.transfer.spectrum;
      row.emplace_back(std::string("soft"));
      row.emplace_back(std::monostate{});
      switch (d.kind) {
        case SpectralDist::Kind::PointMass:
          row.emplace_back(std::string("point_mass"));
          row.emplace_back(std::monostate{});
          row.emplace_back(d.mu0);
          break;
        case SpectralDist::Kind::ScaledSquaredUniform:
          row.emplace_back(std::string("squared_uniform"));
          row.emplace_back(d.beta_t);
          row.emplace_back(std::monostate{});
          break;
        case SpectralDist::Kind::ScaledSquaredBeta:
          row.emplace_back(std::string("squared_beta"));
          row.emplace_back(d.beta_t);
          row.emplace_back(std::monostate{});
          break;
        case SpectralDist::Kind::Empirical:
          row.emplace_back(std::string("empirical"));
          row.emplace_back(std::monostate{});
          row.emplace_back(std::monostate{});
          break;
      }
      break;
    }
  }
}

// The spec resolved for one grid point.
TaskSpec spec_at(const SweepConfig& config, double x) {
  TaskSpec spec = config.base;
  switch (config.axis) {
    case SweepAxis::AlphaT:
      spec.alpha_t = x;
      break;
    case SweepAxis::Rho:
      spec.rho = x;
      break;
    case SweepAxis::Delta:
      if (spec.transfer.mode != TransferMode::Hard)
        throw std::invalid_argument("delta sweep requires hard transfer");
      spec.transfer.delta = x;
      break;
    case SweepAxis::Lambda:
      spec.lambda = x;
      break;
    case SweepAxis::BetaT: {
      if (spec.transfer.mode != TransferMode::Soft)
        throw std::invalid_argument("beta_t sweep requires soft transfer");
      SpectralDist d = spec.transfer.spectrum;
      if (d.kind == SpectralDist::Kind::PointMass)
        d.mu0 = x;
      else
        d.beta_t = x;
      spec.transfer.spectrum = d;
      break;
    }
  }
  if (config.alpha_s_ratio) spec.alpha_s = *config.alpha_s_ratio * spec.alpha_t;
  return validate(spec);
}

struct PredictOutcome {
  SaddleSolution source;
  SaddleSolution target;
  double e_train = 0.0;
  double e_test = 0.0;
  bool has_source = false;
};

PredictOutcome predict_point(const TaskSpec& spec) {
  PredictOutcome out;
  if (spec.transfer.mode == TransferMode::None) {
    out.target = solve_no_transfer(spec);
  } else {
    out.source = solve_source(spec);
    out.has_source = true;
    out.target = spec.transfer.mode == TransferMode::Hard
                     ? solve_hard(spec, out.source)
                     : solve_soft(spec, out.source);
  }
  out.e_train = predict_train_error(spec, out.target);
  out.e_test = predict_gen_error(spec, out.target.q, out.target.r);
  return out;
}

void append_prediction_cells(std::vector<Cell>& row, const PredictOutcome& out) {
  if (out.has_source) {
    row.emplace_back(out.source.q);
    row.emplace_back(out.source.r);
  } else {
    row.emplace_back(std::monostate{});
    row.emplace_back(std::monostate{});
  }
  row.emplace_back(out.target.q);
  row.emplace_back(out.target.r);
  if (std::isfinite(out.target.sigma))
    row.emplace_back(out.target.sigma);
  else
    row.emplace_back(std::string("inf"));
  row.emplace_back(out.e_train);
  row.emplace_back(out.e_test);
}

nlohmann::json config_echo_json(const SweepConfig& config, const char* command) {
  nlohmann::json j;
  j["command"] = command;
  j["base"] = to_json(config.base);
  j["sweep_axis"] = to_string(config.axis);
  j["grid"] = {{"start", config.grid.start},
               {"stop", config.grid.stop},
               {"count", config.grid.count}};
  if (config.alpha_s_ratio) j["alpha_s_ratio"] = *config.alpha_s_ratio;
  if (config.sim)
    j["sim"] = {{"p", config.sim->p},
                {"n_trials", config.sim->n_trials},
                {"master_seed", config.sim->master_seed}};
  return j;
}

}  // namespace

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::AlphaT: return "alpha_t";
    case SweepAxis::Rho: return "rho";
    case SweepAxis::Delta: return "delta";
    case SweepAxis::Lambda: return "lambda";
    case SweepAxis::BetaT: return "beta_t";
  }
  throw std::logic_error("unknown sweep axis");
}

SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "alpha_t") return SweepAxis::AlphaT;
  if (s == "rho") return SweepAxis::Rho;
  if (s == "delta") return SweepAxis::Delta;
  if (s == "lambda") return SweepAxis::Lambda;
  if (s == "beta_t") return SweepAxis::BetaT;
  throw std::invalid_argument("unknown sweep axis: " + s);
}

std::vector<double> GridSpec::points() const {
  if (count < 1) throw std::invalid_argument("grid count must be >= 1");
  if (stop < start) throw std::invalid_argument("grid start must not exceed stop");
  std::vector<double> pts;
  pts.reserve(count);
  if (count == 1) {
    pts.push_back(start);
    return pts;
  }
  for (int i = 0; i < count; ++i)
    pts.push_back(start + (stop - start) * i / (count - 1));
  return pts;
}

SweepConfig sweep_config_from_json(const nlohmann::json& j) {
  SweepConfig config;
  config.base = task_spec_from_json(j.at("base"));
  config.axis = sweep_axis_from_string(j.value("sweep_axis", std::string("rho")));
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    config.grid.start = g.at("start").get<double>();
    config.grid.stop = g.at("stop").get<double>();
    config.grid.count = g.at("count").get<int>();
  }
  if (j.contains("outputs")) {
    for (const auto& o : j.at("outputs")) {
      const std::string s = o.get<std::string>();
      if (s == "predict") config.out_predict = true;
      else if (s == "simulate") config.out_simulate = true;
      else if (s == "phase") config.out_phase = true;
      else throw std::invalid_argument("unknown output kind: " + s);
    }
  }
  if (j.contains("sim")) {
    SimConfig sim;
    sim.p = j.at("sim").at("p").get<int>();
    sim.n_trials = j.at("sim").at("n_trials").get<int>();
    sim.master_seed = j.at("sim").value("master_seed", 1ull);
    config.sim = sim;
  }
  config.out_path = j.value("out_path", std::string());
  config.format = j.value("format", std::string("csv"));
  if (config.format != "csv" && config.format != "json")
    throw std::invalid_argument("format must be csv or json");
  if (j.contains("alpha_s_ratio")) config.alpha_s_ratio = j.at("alpha_s_ratio").get<double>();
  // An explicitly empty alpha_t_grid means an empty phase sweep (header-only
  // output); an absent key defaults to the base ratio.
  if (j.contains("alpha_t_grid"))
    config.alpha_t_grid = j.at("alpha_t_grid").get<std::vector<double>>();
  else
    config.alpha_t_grid = {config.base.alpha_t};
  config.delta_grid = j.value("delta_grid", 201);
  config.jobs = j.value("jobs", 0);
  return config;
}

SweepConfig load_sweep_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  in >> j;
  return sweep_config_from_json(j);
}

int Table::column_index(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

bool Table::all_ok() const {
  const int err = column_index("error");
  if (err < 0) return true;
  for (const auto& row : rows) {
    if (const std::string* s = std::get_if<std::string>(&row[err]); s && !s->empty())
      return false;
  }
  return true;
}

Table cmd_predict(const SweepConfig& config) {
  Table table;
  table.config_echo = config_echo_json(config, "predict");
  table.columns = {"row", "curve", to_string(config.axis) + "_value"};
  table.columns.insert(table.columns.end(), kSpecColumns.begin(), kSpecColumns.end());
  for (const char* c : {"q_s", "r_s", "q_t", "r_t", "sigma", "e_train_pred",
                        "e_test_pred", "error"})
    table.columns.push_back(c);

  const std::vector<double> grid = config.grid.points();
  // Hard-transfer sweeps also report the no-transfer and full-transfer
  // baseline curves.
  std::vector<std::pair<std::string, std::optional<TransferConfig>>> curves;
  curves.emplace_back("main", std::nullopt);
  if (config.base.transfer.mode == TransferMode::Hard &&
      config.axis != SweepAxis::Delta) {
    curves.emplace_back("no_transfer", TransferConfig::none());
    curves.emplace_back("full_transfer", TransferConfig::hard(1.0));
  }

  struct RowResult {
    TaskSpec spec;
    std::string curve;
    double x;
    PredictOutcome outcome;
    std::string error;
  };
  std::vector<RowResult> results(grid.size() * curves.size());
  parallel_for(results.size(), config.jobs, [&](std::size_t idx) {
    const std::size_t gi = idx / curves.size();
    const std::size_t ci = idx % curves.size();
    RowResult& rr = results[idx];
    rr.curve = curves[ci].first;
    rr.x = grid[gi];
    try {
      TaskSpec spec = spec_at(config, grid[gi]);
      if (curves[ci].second) spec.transfer = *curves[ci].second;
      rr.spec = validate(spec);
      rr.outcome = predict_point(rr.spec);
    } catch (const std::exception& e) {
      rr.error = e.what();
    }
  });

  for (std::size_t idx = 0; idx < results.size(); ++idx) {
    const RowResult& rr = results[idx];
    std::vector<Cell> row;
    row.emplace_back(static_cast<double>(idx));
    row.emplace_back(rr.curve);
    row.emplace_back(rr.x);
    append_spec_cells(row, rr.spec);
    if (rr.error.empty()) {
      append_prediction_cells(row, rr.outcome);
      row.emplace_back(std::string());
    } else {
      for (int k = 0; k < 7; ++k) row.emplace_back(std::monostate{});
      row.emplace_back(rr.error);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

Table cmd_phase(const SweepConfig& config) {
  Table table;
  table.config_echo = config_echo_json(config, "phase");
  table.columns = {"row"};
  table.columns.insert(table.columns.end(), kSpecColumns.begin(), kSpecColumns.end());
  for (const char* c : {"delta_star", "e_test_star", "e_test_none", "e_test_full",
                        "rho_c", "g_threshold", "sufficiency_gap", "error"})
    table.columns.push_back(c);

  if (config.axis != SweepAxis::Rho)
    throw std::invalid_argument("phase sweeps run over the rho axis");
  const std::vector<double> rho_grid = config.grid.points();
  const std::vector<double>& alpha_grid = config.alpha_t_grid;

  struct RowResult {
    TaskSpec spec;
    PhaseRow phase;
    std::string error;
  };
  std::vector<RowResult> results(rho_grid.size() * alpha_grid.size());
  parallel_for(results.size(), config.jobs, [&](std::size_t idx) {
    const std::size_t ai = idx / rho_grid.size();
    const std::size_t ri = idx % rho_grid.size();
    RowResult& rr = results[idx];
    try {
      TaskSpec spec = config.base;
      spec.alpha_t = alpha_grid[ai];
      if (config.alpha_s_ratio) spec.alpha_s = *config.alpha_s_ratio * spec.alpha_t;
      spec.rho = rho_grid[ri];
      if (spec.transfer.mode != TransferMode::Hard)
        spec.transfer = TransferConfig::hard(0.5);
      rr.spec = validate(spec);
      const auto rows = boundary_sweep(rr.spec, {rho_grid[ri]}, {spec.alpha_t},
                                       config.delta_grid);
      rr.phase = rows.front();
    } catch (const std::exception& e) {
      rr.error = e.what();
    }
  });

  for (std::size_t idx = 0; idx < results.size(); ++idx) {
    const RowResult& rr = results[idx];
    std::vector<Cell> row;
    row.emplace_back(static_cast<double>(idx));
    append_spec_cells(row, rr.spec);
    if (rr.error.empty()) {
      row.emplace_back(rr.phase.delta_star);
      row.emplace_back(rr.phase.e_test_star);
      row.emplace_back(rr.phase.e_test_none);
      row.emplace_back(rr.phase.e_test_full);
      if (std::isnan(rr.phase.rho_c)) row.emplace_back(std::monostate{});
      else row.emplace_back(rr.phase.rho_c);
      if (std::isnan(rr.phase.g_threshold)) row.emplace_back(std::monostate{});
      else row.emplace_back(rr.phase.g_threshold);
      row.emplace_back(std::string(rr.phase.sufficiency_gap ? "yes" : "no"));
      row.emplace_back(std::string());
    } else {
      for (int k = 0; k < 7; ++k) row.emplace_back(std::monostate{});
      row.emplace_back(rr.error);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

Table cmd_simulate(const SweepConfig& config) {
  if (!config.sim) throw std::invalid_argument("simulate requires a sim block");
  Table table;
  table.config_echo = config_echo_json(config, "simulate");
  table.columns = {"row", to_string(config.axis) + "_value"};
  table.columns.insert(table.columns.end(), kSpecColumns.begin(), kSpecColumns.end());
  for (const char* c :
       {"p", "n_trials", "master_seed", "q_s", "r_s", "q_t", "r_t", "sigma",
        "e_train_pred", "e_test_pred", "q_hat_mean", "q_hat_se", "r_hat_mean",
        "r_hat_se", "e_train_emp", "e_train_se", "e_test_emp", "e_test_se", "z_q",
        "z_r", "z_train", "z_test", "error"})
    table.columns.push_back(c);

  const std::vector<double> grid = config.grid.points();
  struct RowResult {
    TaskSpec spec;
    double x = 0.0;
    PredictOutcome outcome;
    TrialSummary summary;
    std::string error;
  };
  std::vector<RowResult> results(grid.size());
  // Trials parallelize inside each grid point.
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    RowResult& rr = results[gi];
    rr.x = grid[gi];
    try {
      rr.spec = spec_at(config, grid[gi]);
      rr.outcome = predict_point(rr.spec);
      rr.summary = run_trials(rr.spec, config.sim->p, config.sim->n_trials,
                              config.sim->master_seed, config.jobs);
    } catch (const std::exception& e) {
      rr.error = e.what();
    }
  }

  const auto z_score = [](double emp, double pred, double se) -> Cell {
    if (!std::isfinite(se) || se == 0.0) return std::monostate{};
    return (emp - pred) / se;
  };

  for (std::size_t gi = 0; gi < results.size(); ++gi) {
    const RowResult& rr = results[gi];
    std::vector<Cell> row;
    row.emplace_back(static_cast<double>(gi));
    row.emplace_back(rr.x);
    append_spec_cells(row, rr.spec);
    if (rr.error.empty()) {
      row.emplace_back(static_cast<double>(config.sim->p));
      row.emplace_back(static_cast<double>(config.sim->n_trials));
      row.emplace_back(static_cast<double>(config.sim->master_seed));
      append_prediction_cells(row, rr.outcome);
      const TrialSummary& s = rr.summary;
      row.emplace_back(s.q_hat.mean);
      row.emplace_back(s.has_std_error ? Cell(s.q_hat.std_error) : Cell(std::monostate{}));
      row.emplace_back(s.r_hat.mean);
      row.emplace_back(s.has_std_error ? Cell(s.r_hat.std_error) : Cell(std::monostate{}));
      row.emplace_back(s.train_error.mean);
      row.emplace_back(s.has_std_error ? Cell(s.train_error.std_error)
                                       : Cell(std::monostate{}));
      row.emplace_back(s.gen_error.mean);
      row.emplace_back(s.has_std_error ? Cell(s.gen_error.std_error)
                                       : Cell(std::monostate{}));
      row.emplace_back(z_score(s.q_hat.mean, rr.outcome.target.q, s.q_hat.std_error));
      row.emplace_back(z_score(s.r_hat.mean, rr.outcome.target.r, s.r_hat.std_error));
      row.emplace_back(
          z_score(s.train_error.mean, rr.outcome.e_train, s.train_error.std_error));
      row.emplace_back(
          z_score(s.gen_error.mean, rr.outcome.e_test, s.gen_error.std_error));
      row.emplace_back(std::string());
    } else {
      for (int k = 0; k < 22; ++k) row.emplace_back(std::monostate{});
      row.emplace_back(rr.error);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string table_to_csv(const Table& table, bool deterministic) {
  std::ostringstream os;
  if (!deterministic) {
    char host[256] = "unknown";
    std::time_t now = std::time(nullptr);
    char ts[64];
    std::strftime(ts, sizeof(ts), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    if (const char* h = std::getenv("HOSTNAME")) std::snprintf(host, sizeof(host), "%s", h);
    os << "# generated " << ts << " on " << host << "\n";
  }
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) os << ',';
    os << table.columns[c];
  }
  os << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << ',';
      os << cell_to_string(row[c]);
    }
    os << '\n';
  }
  return os.str();
}

std::string table_to_json(const Table& table, bool deterministic) {
  nlohmann::json j;
  j["config"] = table.config_echo;
  if (!deterministic) {
    std::time_t now = std::time(nullptr);
    char ts[64];
    std::strftime(ts, sizeof(ts), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j["meta"] = {{"generated", ts}};
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table.rows) {
    nlohmann::json jr;
    for (std::size_t c = 0; c < row.size(); ++c)
      jr[table.columns[c]] = cell_to_json(row[c]);
    rows.push_back(std::move(jr));
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

void write_table(const Table& table, const std::string& path, const std::string& format,
                 bool deterministic) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << (format == "json" ? table_to_json(table, deterministic)
                           : table_to_csv(table, deterministic));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  parts.push_back(cur);
  return parts;
}

Cell parse_cell(const std::string& s) {
  if (s.empty()) return std::monostate{};
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (end && *end == '\0') return d;
  return s;
}

}  // namespace

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open result file: " + path);
  Table table;
  if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
    nlohmann::json j;
    in >> j;
    table.config_echo = j.value("config", nlohmann::json());
    const auto& rows = j.at("rows");
    if (!rows.empty()) {
      for (auto it = rows.front().begin(); it != rows.front().end(); ++it)
        table.columns.push_back(it.key());
    }
    for (const auto& jr : rows) {
      std::vector<Cell> row;
      for (const auto& col : table.columns) {
        const auto& v = jr.at(col);
        if (v.is_null()) row.emplace_back(std::monostate{});
        else if (v.is_number()) row.emplace_back(v.get<double>());
        else row.emplace_back(v.get<std::string>());
      }
      table.rows.push_back(std::move(row));
    }
    return table;
  }
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!have_header) {
      table.columns = split_csv_line(line);
      have_header = true;
      continue;
    }
    const auto parts = split_csv_line(line);
    std::vector<Cell> row;
    row.reserve(parts.size());
    for (const auto& s : parts) row.push_back(parse_cell(s));
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::vector<PlotCurve> cmd_plotdata(const Table& table, const std::string& x_column,
                                    const std::string& y_column,
                                    const std::string& group_column,
                                    const std::string& out_dir,
                                    const std::string& stem) {
  const int xi = table.column_index(x_column);
  const int yi = table.column_index(y_column);
  if (xi < 0) throw std::invalid_argument("unknown column: " + x_column);
  if (yi < 0) throw std::invalid_argument("unknown column: " + y_column);
  int gi = -1;
  if (!group_column.empty()) {
    gi = table.column_index(group_column);
    if (gi < 0) throw std::invalid_argument("unknown column: " + group_column);
  }

  std::vector<std::string> labels;
  std::vector<std::vector<std::pair<double, double>>> curves;
  for (const auto& row : table.rows) {
    std::string label = "all";
    if (gi >= 0) label = cell_to_string(row[gi]);
    const double* x = std::get_if<double>(&row[xi]);
    const double* y = std::get_if<double>(&row[yi]);
    if (!x || !y) continue;
    auto it = std::find(labels.begin(), labels.end(), label);
    std::size_t idx;
    if (it == labels.end()) {
      labels.push_back(label);
      curves.emplace_back();
      idx = labels.size() - 1;
    } else {
      idx = static_cast<std::size_t>(it - labels.begin());
    }
    curves[idx].emplace_back(*x, *y);
  }

  std::filesystem::create_directories(out_dir);
  std::vector<PlotCurve> out;
  nlohmann::json manifest;
  manifest["x"] = x_column;
  manifest["y"] = y_column;
  manifest["curves"] = nlohmann::json::array();
  for (std::size_t k = 0; k < labels.size(); ++k) {
    PlotCurve pc;
    pc.label = labels[k];
    pc.path = out_dir + "/" + stem + "_" + labels[k] + ".dat";
    pc.points = curves[k].size();
    std::ofstream f(pc.path);
    if (!f) throw std::runtime_error("cannot open plot file: " + pc.path);
    for (const auto& [x, y] : curves[k])
      f << format_double(x) << ' ' << format_double(y) << '\n';
    manifest["curves"].push_back(
        {{"label", pc.label}, {"path", pc.path}, {"points", pc.points}});
    out.push_back(std::move(pc));
  }
  std::ofstream mf(out_dir + "/" + stem + "_manifest.json");
  mf << manifest.dump(2) << "\n";
  return out;
}

}  // namespace tlphase
