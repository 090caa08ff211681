#include <Eigen/Core>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "hjb/config.hpp"
#include "hjb/grid.hpp"
#include "hjb/problems.hpp"
#include "hjb/run_io.hpp"
#include "hjb/transcription.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitOracle = 4;

void emit_error(const std::string& type, const std::string& message,
                const std::string& field = "") {
  json record{{"error", {{"type", type}, {"message", message}}}};
  if (!field.empty()) record["error"]["field"] = field;
  std::cerr << record.dump() << "\n";
}

// ---------------------------------------------------------------------------
// Shared option plumbing

struct CommonConfig {
  std::string problem;
  std::string config_file;
  std::vector<std::string> overrides;  // key=value
  bool desk_scale = false;
  bool paper_scale = false;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

void add_config_options(CLI::App* cmd, CommonConfig& common, bool with_problem = true) {
  if (with_problem)
    cmd->add_option("--problem", common.problem, "catalog problem id")->required();
  cmd->add_option("--config", common.config_file, "flat key=value config file");
  cmd->add_option("--set", common.overrides, "override, e.g. --set scheme.h=0.05");
  cmd->add_flag("--desk-scale", common.desk_scale, "laptop-sized preset");
  cmd->add_flag("--paper-scale", common.paper_scale, "published scheme parameters");
  cmd->add_option("--seed", common.seed, "sets net.seed and train.seed");
  cmd->add_option("--out", common.out_dir, "output directory");
}

hjb::ConfigMap build_config(const CommonConfig& common) {
  hjb::ConfigMap map;
  map.set("problem.id", common.problem);
  hjb::apply_paper_scale(map, common.problem);
  if (common.desk_scale) hjb::apply_desk_scale(map, common.problem);
  if (!common.config_file.empty()) {
    const hjb::ConfigMap file = hjb::ConfigMap::parse_file(common.config_file);
    for (const auto& [key, value] : file.entries()) map.set(key, value);
  }
  for (const auto& kv : common.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw hjb::ConfigError(kv, "override must look like key=value");
    map.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (common.seed) {
    map.set("net.seed", std::to_string(*common.seed));
    map.set("train.seed", std::to_string(*common.seed));
  }
  if (!common.out_dir.empty()) map.set("run.out_dir", common.out_dir);
  return map;
}

// ---------------------------------------------------------------------------
// Terminal-cost specifications: "a + b*|x|^2", "b*|x|^2", a constant, the
// vehicle variants "norm"/"norm2", or "@file" with raw sensor values.

struct TerminalSpec {
  hjb::ScalarFieldFn evaluator;       // null for raw sensor vectors
  hjb::FieldGradientFn gradient;
  std::optional<VectorXd> sensor_values;
  std::string text;
};

TerminalSpec parse_terminal_spec(const std::string& raw) {
  TerminalSpec spec;
  spec.text = raw;
  std::string s;
  for (char c : raw)
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  if (s.empty()) throw hjb::ConfigError("g", "empty terminal spec");

  if (s[0] == '@') {
    std::ifstream in(s.substr(1));
    if (!in) throw hjb::ConfigError("g", "cannot open sensor file " + s.substr(1));
    std::vector<double> values;
    double v;
    while (in >> v) values.push_back(v);
    if (values.empty()) throw hjb::ConfigError("g", "sensor file has no values");
    spec.sensor_values = Eigen::Map<VectorXd>(values.data(), values.size());
    return spec;
  }
  if (s == "norm") {
    spec.evaluator = hjb::norm_terminal_fn();
    spec.gradient = hjb::norm_terminal_gradient();
    return spec;
  }
  if (s == "norm2") {
    spec.evaluator = hjb::quadratic_terminal_fn({0.0, 1.0});
    spec.gradient = hjb::quadratic_terminal_gradient({0.0, 1.0});
    return spec;
  }

  // "a+b*|x|^2" in any of its degenerate forms.
  double offset = 0.0, scale = 0.0;
  std::string rest = s;
  const auto quad_pos = rest.find("*|x|^2");
  if (quad_pos == std::string::npos) {
    try {
      std::size_t used = 0;
      offset = std::stod(rest, &used);
      if (used != rest.size()) throw std::invalid_argument(rest);
    } catch (const std::exception&) {
      throw hjb::ConfigError("g", "cannot parse terminal spec '" + raw + "'");
    }
  } else {
    if (quad_pos + 6 != rest.size())
      throw hjb::ConfigError("g", "terminal spec must end with *|x|^2");
    std::string head = rest.substr(0, quad_pos);
    // Split an optional leading "a+" (the scale may itself carry a sign).
    std::size_t split = std::string::npos;
    for (std::size_t i = 1; i < head.size(); ++i)
      if (head[i] == '+' && head[i - 1] != 'e' && head[i - 1] != 'E') split = i;
    try {
      if (split != std::string::npos) {
        std::size_t used = 0;
        offset = std::stod(head.substr(0, split), &used);
        if (used != split) throw std::invalid_argument(head);
        head = head.substr(split + 1);
      }
      std::size_t used = 0;
      scale = std::stod(head, &used);
      if (used != head.size()) throw std::invalid_argument(head);
    } catch (const std::exception&) {
      throw hjb::ConfigError("g", "cannot parse terminal spec '" + raw + "'");
    }
  }
  spec.evaluator = hjb::quadratic_terminal_fn({offset, scale});
  spec.gradient = hjb::quadratic_terminal_gradient({offset, scale});
  return spec;
}

hjb::TerminalCondition condition_from_spec(const TerminalSpec& spec,
                                           const MatrixXd& sensors) {
  if (spec.sensor_values) {
    if (spec.sensor_values->size() != sensors.cols())
      throw hjb::SensorMismatch("sensor file has " +
                                std::to_string(spec.sensor_values->size()) +
                                " values, the operator expects " +
                                std::to_string(sensors.cols()));
    hjb::TerminalCondition g;
    g.evaluator = [](const VectorXd&) -> double {
      throw hjb::Error("terminal cost given only through sensor values");
    };
    g.sensor_points = sensors;
    g.sensor_values = *spec.sensor_values;
    return g;
  }
  return hjb::make_terminal_condition(spec.evaluator, sensors, spec.gradient);
}

// ---------------------------------------------------------------------------
// Probe points: either a CSV file with columns t,x1..xd or seeded uniform
// draws over a box at t = 0.

std::vector<std::pair<double, VectorXd>> read_points_csv(const std::string& path, int d) {
  std::ifstream in(path);
  if (!in) throw hjb::ConfigError("points", "cannot open " + path);
  std::vector<std::pair<double, VectorXd>> points;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (first) {
      first = false;
      try {
        (void)std::stod(cells.at(0));
      } catch (const std::exception&) {
        continue;  // header row
      }
    }
    if (static_cast<int>(cells.size()) != d + 1)
      throw hjb::ConfigError("points", "expected t plus " + std::to_string(d) +
                                           " coordinates per row");
    VectorXd x(d);
    double t;
    try {
      t = std::stod(cells[0]);
      for (int i = 0; i < d; ++i) x(i) = std::stod(cells[i + 1]);
    } catch (const std::exception&) {
      throw hjb::ConfigError("points", "non-numeric cell in " + path);
    }
    points.emplace_back(t, x);
  }
  return points;
}

std::vector<std::pair<double, VectorXd>> sample_probes(const hjb::WorkingBox& box, int n,
                                                       std::uint64_t seed,
                                                       double shrink = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<double, VectorXd>> points;
  const VectorXd center = 0.5 * (box.lo + box.hi);
  for (int i = 0; i < n; ++i) {
    VectorXd x(box.dim());
    for (int dim = 0; dim < box.dim(); ++dim) {
      const double half = 0.5 * (box.hi(dim) - box.lo(dim)) * shrink;
      x(dim) = center(dim) - half + 2.0 * half * unit(rng);
    }
    points.emplace_back(0.0, x);
  }
  return points;
}

std::string vec_to_string(const VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out += (i ? "," : "") + hjb::format_double(v(i));
  return out;
}

VectorXd parse_vector(const std::string& raw, int expected, const std::string& field) {
  std::string s;
  for (char c : raw)
    if (!std::isspace(static_cast<unsigned char>(c)) && c != '(' && c != ')') s += c;
  std::stringstream in(s);
  std::string cell;
  std::vector<double> values;
  while (std::getline(in, cell, ',')) {
    try {
      values.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw hjb::ConfigError(field, "non-numeric component '" + cell + "'");
    }
  }
  if (expected >= 0 && static_cast<int>(values.size()) != expected)
    throw hjb::ConfigError(field, "expected " + std::to_string(expected) + " components");
  return Eigen::Map<VectorXd>(values.data(), values.size());
}

// ---------------------------------------------------------------------------
// Subcommand implementations

int cmd_train(const CommonConfig& common) {
  const hjb::ConfigMap map = build_config(common);
  hjb::RunConfig config = hjb::RunConfig::from_map(map);
  if (config.out_dir.empty())
    config.out_dir = "runs/" + config.problem_id + "-seed" +
                     std::to_string(config.iteration.seed);
  const hjb::CatalogEntry entry = config.resolve_problem();
  const auto costs = config.resolve_terminal_costs(entry);

  const hjb::RunPaths paths{hjb::resolve_out_dir(config.out_dir)};
  hjb::create_run_dir(paths.dir);

  const auto ledger = hjb::run_policy_iteration(entry.problem, costs, config.iteration);
  hjb::export_ledger(paths, config, ledger);

  std::printf("run directory: %s\n", paths.dir.c_str());
  for (const auto& iterate : ledger.iterates)
    std::printf("round %d: L1=%.3e L2=%.3e eps1=%.3e eps2=%.3e\n", iterate.index,
                iterate.report.final_loss1, iterate.report.final_loss2, iterate.eps1,
                iterate.eps2);
  return 0;
}

int cmd_infer(const std::string& run_dir, const std::string& g_spec,
              const std::string& points_file, const std::string& out_csv) {
  const hjb::LoadedRun run = hjb::load_run(run_dir);
  const int d = static_cast<int>(run.final_network.sensor_points.rows());
  const auto g = condition_from_spec(parse_terminal_spec(g_spec),
                                     run.final_network.sensor_points);
  const auto points = read_points_csv(points_file, d);

  const std::uint64_t steps_before = hjb::adam_total_steps();
  std::vector<std::string> columns{"t"};
  for (int i = 0; i < d; ++i) columns.push_back("x" + std::to_string(i + 1));
  columns.push_back("value");
  hjb::CsvFile csv(out_csv, columns);
  for (const auto& [t, x] : points) {
    const double value = hjb::operator_eval(run.final_network, g, t, x);
    std::vector<double> row{t};
    for (int i = 0; i < d; ++i) row.push_back(x(i));
    row.push_back(value);
    csv.row(row);
  }
  if (hjb::adam_total_steps() != steps_before)
    throw hjb::Error("optimizer stepped during inference");
  csv.finish(run.config.to_map().hash());
  std::printf("wrote %zu values to %s (optimizer steps during inference: 0)\n",
              points.size(), out_csv.c_str());
  return 0;
}

int cmd_synthesize(const std::string& run_dir, const std::string& g_spec,
                   const std::string& x0_raw, double dt, const std::string& out_dir) {
  const hjb::LoadedRun run = hjb::load_run(run_dir);
  hjb::RunConfig config = run.config;
  const hjb::CatalogEntry entry = config.resolve_problem();
  const int d = entry.problem.state_dim;
  const VectorXd x0 = parse_vector(x0_raw, d, "x0");
  const auto spec = parse_terminal_spec(g_spec);
  if (!spec.evaluator)
    throw hjb::ConfigError("g", "rollouts need an analytic terminal cost");
  const auto g = condition_from_spec(spec, run.final_network.sensor_points);

  hjb::IterationLedger ledger;
  ledger.final_network = std::make_shared<hjb::OperatorNetwork>(run.final_network);
  ledger.config = config.iteration;
  ledger.problem = entry.problem;

  const double step = dt > 0.0 ? dt : (config.rollout_dt > 0.0 ? config.rollout_dt
                                                               : entry.problem.horizon / 100.0);
  const auto trajectory = hjb::synthesize_trajectory(ledger, g, x0, step);

  hjb::create_run_dir(hjb::resolve_out_dir(out_dir));
  const std::string base = hjb::resolve_out_dir(out_dir);
  std::vector<std::string> columns{"k", "t"};
  for (int i = 0; i < d; ++i) columns.push_back("x" + std::to_string(i + 1));
  for (int i = 0; i < entry.problem.control_dim; ++i)
    columns.push_back("u" + std::to_string(i + 1));
  columns.push_back("stage_cost");
  hjb::CsvFile csv(base + "/trajectory.csv", columns);
  const int steps = static_cast<int>(trajectory.controls.cols());
  for (int k = 0; k <= steps; ++k) {
    std::vector<double> row{static_cast<double>(k), trajectory.times(k)};
    for (int i = 0; i < d; ++i) row.push_back(trajectory.states(i, k));
    for (int i = 0; i < entry.problem.control_dim; ++i)
      row.push_back(k < steps ? trajectory.controls(i, k)
                              : std::numeric_limits<double>::quiet_NaN());
    row.push_back(k < steps ? entry.problem.running_cost(trajectory.times(k),
                                                         trajectory.states.col(k),
                                                         trajectory.controls.col(k)) *
                                  (trajectory.times(1) - trajectory.times(0))
                            : trajectory.terminal_cost);
    csv.row(row);
  }
  if (trajectory.escaped_domain) csv.comment("warning=TrajectoryEscapedDomain");
  csv.comment("objective=" + hjb::format_double(trajectory.objective));
  csv.finish(config.to_map().hash());

  std::vector<VectorXd> state_series, control_series;
  std::vector<std::string> state_labels, control_labels;
  for (int i = 0; i < d; ++i) {
    state_series.push_back(trajectory.states.row(i).transpose());
    state_labels.push_back("x" + std::to_string(i + 1));
  }
  const VectorXd control_times = trajectory.times.head(steps);
  for (int i = 0; i < entry.problem.control_dim; ++i) {
    control_series.push_back(trajectory.controls.row(i).transpose());
    control_labels.push_back("u" + std::to_string(i + 1));
  }
  hjb::write_svg_series(base + "/states.svg", "state trajectory", trajectory.times,
                        state_series, state_labels);
  hjb::write_svg_series(base + "/controls.svg", "control trajectory", control_times,
                        control_series, control_labels);

  std::printf("objective=%.6f running=%.6f terminal=%.6f%s\n", trajectory.objective,
              trajectory.running_cost, trajectory.terminal_cost,
              trajectory.escaped_domain ? " (escaped working box)" : "");
  return 0;
}

int cmd_compare(const std::string& run_dir, const std::string& oracle,
                const std::string& g_spec, int probes, std::uint64_t seed,
                const std::string& points_file, const std::string& out_csv,
                double grid_h, int transcription_steps) {
  const hjb::ConfigMap manifest = hjb::ConfigMap::parse_file(run_dir + "/manifest.txt");
  const bool grid_run = manifest.get_string("run.kind", "train") == "grid-solve";

  hjb::ConfigMap config_only;
  for (const auto& [key, value] : manifest.entries())
    if (key.rfind("run.kind", 0) != 0 && key.rfind("code.", 0) != 0 &&
        key.rfind("config.", 0) != 0 && key.rfind("rounds.", 0) != 0 &&
        key.rfind("grid.", 0) != 0)
      config_only.set(key, value);
  hjb::RunConfig config = hjb::RunConfig::from_map(config_only);
  const hjb::CatalogEntry entry = config.resolve_problem();
  const int d = entry.problem.state_dim;

  // The estimate under test: a trained operator, or the stored grid field
  // for grid-solve runs (whose self-comparison should be near zero).
  std::function<double(const hjb::TerminalCondition&, const Eigen::VectorXd&)> estimate_fn;
  MatrixXd sensors;
  if (grid_run) {
    std::ifstream slab(run_dir + "/field_final.slab", std::ios::binary);
    if (!slab) throw hjb::Error("missing grid slab in " + run_dir);
    auto field = std::make_shared<hjb::GridField>(hjb::read_grid_slab(slab));
    estimate_fn = [field](const hjb::TerminalCondition&, const Eigen::VectorXd& x) {
      return field->value(0.0, x);
    };
    sensors = MatrixXd::Zero(d, 1);
  } else {
    const hjb::LoadedRun run = hjb::load_run(run_dir);
    auto net = std::make_shared<hjb::OperatorNetwork>(run.final_network);
    estimate_fn = [net](const hjb::TerminalCondition& g, const Eigen::VectorXd& x) {
      return hjb::operator_eval(*net, g, 0.0, x);
    };
    sensors = net->sensor_points;
  }

  const auto spec = parse_terminal_spec(g_spec);
  if (!spec.evaluator)
    throw hjb::ConfigError("g", "oracle comparison needs an analytic terminal cost");
  const auto g = condition_from_spec(spec, sensors);

  auto points = points_file.empty()
                    ? sample_probes(entry.problem.working_box, probes, seed, 0.75)
                    : read_points_csv(points_file, d);

  // Oracle value at (0, x).
  std::function<double(const VectorXd&)> oracle_value;
  if (oracle == "hopflax") {
    if (config.problem_id != "vehicle2d")
      throw hjb::OracleInapplicable("the reachability formula covers only vehicle2d");
    const double horizon = entry.problem.horizon;
    oracle_value = [horizon](const VectorXd& x) {
      return hjb::hopf_lax_vehicle(0.0, x, horizon);
    };
  } else if (oracle == "grid") {
    if (d > 2) throw hjb::OracleInapplicable("dense grids cover only d <= 2");
    const double oracle_h = grid_run ? config.iteration.h : grid_h;
    hjb::GhostMode ghosts = hjb::GhostMode::Constant;
    if (manifest.get_string("grid.ghosts", "constant") == "linear")
      ghosts = hjb::GhostMode::Linear;
    const auto spec_grid =
        hjb::GridSpec::make(entry.problem.working_box, oracle_h, entry.problem.horizon,
                            entry.problem.f_sup_norm, config.iteration.viscosity_factor,
                            0.9, ghosts);
    const auto fields = hjb::grid_policy_iteration(
        entry.problem, g, spec_grid, config.iteration.viscosity_factor,
        std::max(1, config.iteration.rounds), config.iteration.argmin);
    auto field = std::make_shared<hjb::GridField>(fields.back());
    oracle_value = [field](const VectorXd& x) { return field->value(0.0, x); };
  } else if (oracle == "transcription") {
    oracle_value = [&entry, &spec, transcription_steps, seed](const VectorXd& x) {
      hjb::TranscriptionProblem tp{
          entry.problem,
          hjb::make_terminal_condition(spec.evaluator,
                                       MatrixXd::Zero(entry.problem.state_dim, 1),
                                       spec.gradient),
          x, transcription_steps};
      hjb::PgdConfig pgd;
      pgd.seed = seed;
      return hjb::transcribe_and_solve(tp, pgd).objective;
    };
  } else {
    throw hjb::ConfigError("oracle", "expected grid, transcription, or hopflax");
  }

  std::vector<std::string> columns{"row", "t"};
  for (int i = 0; i < d; ++i) columns.push_back("x" + std::to_string(i + 1));
  columns.push_back("estimate");
  columns.push_back("oracle");
  columns.push_back("abs_error");
  hjb::CsvFile csv(out_csv, columns);
  double max_err = 0.0, mean_err = 0.0;
  int row_index = 0;
  for (const auto& [t, x] : points) {
    const double estimate = estimate_fn(g, x);
    const double reference = oracle_value(x);
    const double err = std::abs(estimate - reference);
    max_err = std::max(max_err, err);
    mean_err += err / points.size();
    std::vector<std::string> row{std::to_string(row_index++), hjb::format_double(t)};
    for (int i = 0; i < d; ++i) row.push_back(hjb::format_double(x(i)));
    row.push_back(hjb::format_double(estimate));
    row.push_back(hjb::format_double(reference));
    row.push_back(hjb::format_double(err));
    csv.row_mixed(row);
  }
  std::vector<std::string> summary{"summary", "0"};
  for (int i = 0; i < d; ++i) summary.push_back("0");
  summary.push_back(hjb::format_double(max_err));   // estimate column: max error
  summary.push_back(hjb::format_double(mean_err));  // oracle column: mean error
  summary.push_back(hjb::format_double(max_err));
  csv.row_mixed(summary);
  csv.comment("summary: estimate=max_abs_error oracle=mean_abs_error");
  csv.finish(config.to_map().hash());
  std::printf("%zu probes vs %s oracle: max|err|=%.6f mean|err|=%.6f -> %s\n",
              points.size(), oracle.c_str(), max_err, mean_err, out_csv.c_str());
  return 0;
}

int cmd_grid_solve(const CommonConfig& common, const std::string& g_spec,
                   const std::string& ghost_mode, bool dump_csv) {
  const hjb::ConfigMap map = build_config(common);
  hjb::RunConfig config = hjb::RunConfig::from_map(map);
  const hjb::CatalogEntry entry = config.resolve_problem();
  if (entry.problem.state_dim > 2)
    throw hjb::OracleInapplicable("dense grids cover only d <= 2");
  if (config.out_dir.empty()) config.out_dir = "runs/grid-" + config.problem_id;

  hjb::GhostMode ghosts;
  if (ghost_mode == "constant") ghosts = hjb::GhostMode::Constant;
  else if (ghost_mode == "linear") ghosts = hjb::GhostMode::Linear;
  else throw hjb::ConfigError("ghosts", "expected constant or linear");

  const auto spec = parse_terminal_spec(g_spec.empty() ? std::string("norm") : g_spec);
  hjb::ScalarFieldFn evaluator = spec.evaluator;
  if (!evaluator) throw hjb::ConfigError("g", "grid solves need an analytic terminal cost");
  if (g_spec.empty()) evaluator = entry.default_terminal;
  const auto g = hjb::make_terminal_condition(
      evaluator, MatrixXd::Zero(entry.problem.state_dim, 1));

  const auto grid_spec =
      hjb::GridSpec::make(entry.problem.working_box, config.iteration.h,
                          entry.problem.horizon, entry.problem.f_sup_norm,
                          config.iteration.viscosity_factor, 0.9, ghosts);
  const auto fields =
      hjb::grid_policy_iteration(entry.problem, g, grid_spec,
                                 config.iteration.viscosity_factor,
                                 std::max(1, config.iteration.rounds),
                                 config.iteration.argmin);

  const std::string dir = hjb::resolve_out_dir(config.out_dir);
  hjb::create_run_dir(dir);
  {
    std::ofstream manifest(dir + "/manifest.txt");
    manifest << "# run manifest\nrun.kind = grid-solve\n";
    manifest << "code.version = " << hjb::kCodeVersion << "\n";
    manifest << "grid.ghosts = " << ghost_mode << "\n";
    manifest << "grid.steps = " << grid_spec.steps << "\n";
    manifest << config.to_map().canonical_text();
  }
  {
    std::ofstream slab(dir + "/field_final.slab", std::ios::binary);
    hjb::write_grid_slab(slab, fields.back());
  }
  if (dump_csv) {
    std::ofstream csv(dir + "/field_final.csv");
    hjb::write_grid_csv(csv, fields.back());
    char line[64];
    std::snprintf(line, sizeof(line), "# config_hash=%016llx\n",
                  static_cast<unsigned long long>(config.to_map().hash()));
    csv << line;
  }
  // Nodewise gap between consecutive iterates, for quick monotonicity reads.
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n + 1 < fields.size(); ++n)
    worst = std::max(worst, (fields[n + 1].values - fields[n].values).maxCoeff());
  std::printf("grid run: %s (nodes=%d steps=%d rounds=%zu max_iterate_increase=%.3e)\n",
              dir.c_str(), grid_spec.node_count, grid_spec.steps, fields.size(),
              fields.size() > 1 ? worst : 0.0);
  return 0;
}

int cmd_oracle(const std::string& problem_id, const std::string& which,
               const std::string& g_spec, int probes, std::uint64_t seed,
               const std::string& points_file, const std::string& out_csv, int steps) {
  const hjb::CatalogEntry entry = hjb::build_problem(problem_id);
  const int d = entry.problem.state_dim;
  const auto spec = parse_terminal_spec(g_spec.empty() ? std::string("norm") : g_spec);
  hjb::ScalarFieldFn evaluator = g_spec.empty() ? entry.default_terminal : spec.evaluator;
  hjb::FieldGradientFn gradient =
      g_spec.empty() ? entry.default_terminal_gradient : spec.gradient;
  if (!evaluator) throw hjb::ConfigError("g", "oracles need an analytic terminal cost");

  auto points = points_file.empty()
                    ? sample_probes(entry.problem.working_box, probes, seed, 0.75)
                    : read_points_csv(points_file, d);

  std::function<double(const VectorXd&)> value;
  if (which == "hopflax") {
    if (problem_id != "vehicle2d")
      throw hjb::OracleInapplicable("the reachability formula covers only vehicle2d");
    const double horizon = entry.problem.horizon;
    value = [horizon](const VectorXd& x) { return hjb::hopf_lax_vehicle(0.0, x, horizon); };
  } else if (which == "transcription") {
    value = [&](const VectorXd& x) {
      hjb::TranscriptionProblem tp{
          entry.problem,
          hjb::make_terminal_condition(evaluator, MatrixXd::Zero(d, 1), gradient), x,
          steps};
      hjb::PgdConfig pgd;
      pgd.seed = seed;
      return hjb::transcribe_and_solve(tp, pgd).objective;
    };
  } else {
    throw hjb::ConfigError("which", "expected hopflax or transcription");
  }

  std::vector<std::string> columns{"t"};
  for (int i = 0; i < d; ++i) columns.push_back("x" + std::to_string(i + 1));
  columns.push_back("value");
  hjb::CsvFile csv(out_csv, columns);
  for (const auto& [t, x] : points) {
    std::vector<double> row{t};
    for (int i = 0; i < d; ++i) row.push_back(x(i));
    row.push_back(value(x));
    csv.row(row);
  }
  hjb::ConfigMap echo;
  echo.set("problem.id", problem_id);
  echo.set("oracle.which", which);
  echo.set("oracle.g", g_spec.empty() ? "default" : g_spec);
  csv.finish(echo.hash());
  std::printf("wrote %zu oracle values to %s\n", points.size(), out_csv.c_str());
  return 0;
}

int cmd_catalog() {
  for (const auto& id : hjb::catalog_ids()) {
    const auto entry = hjb::build_problem(id);
    std::printf("%-10s d=%-3d m=%-2d T=%-4g h=%g N=%g M=%d |f|<=%.4f\n", id.c_str(),
                entry.problem.state_dim, entry.problem.control_dim,
                entry.problem.horizon, entry.defaults.h,
                entry.defaults.viscosity_factor, entry.defaults.rounds,
                entry.problem.f_sup_norm);
    if (!entry.training_family.empty()) {
      std::printf("           training terminals:");
      for (const auto& q : entry.training_family)
        std::printf(" %g+%g|x|^2", q.offset, q.scale);
      std::printf("\n");
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hamilton-Jacobi-Bellman solvers: operator-learning policy iteration "
               "with grid and trajectory-optimization oracles"};
  app.require_subcommand(1);

  CommonConfig train_common;
  auto* train = app.add_subcommand("train", "run operator-learning policy iteration");
  add_config_options(train, train_common);

  std::string infer_dir, infer_g, infer_points, infer_out = "infer.csv";
  auto* infer = app.add_subcommand("infer", "evaluate a trained operator on a new terminal cost");
  infer->add_option("run_dir", infer_dir)->required();
  infer->add_option("--g", infer_g, "terminal spec, e.g. '0.57*|x|^2' or @sensors.txt")->required();
  infer->add_option("--points", infer_points, "CSV of query points (t,x1..xd)")->required();
  infer->add_option("--out", infer_out, "output CSV");

  std::string synth_dir, synth_g, synth_x0, synth_out = "trajectory";
  double synth_dt = 0.0;
  auto* synth = app.add_subcommand("synthesize", "roll out the induced control");
  synth->add_option("run_dir", synth_dir)->required();
  synth->add_option("--g", synth_g)->required();
  synth->add_option("--x0", synth_x0, "initial state, e.g. '-1.5,-0.5'")->required();
  synth->add_option("--dt", synth_dt, "rollout step (default horizon/100)");
  synth->add_option("--out", synth_out, "output directory");

  std::string cmp_dir, cmp_oracle, cmp_g, cmp_points, cmp_out = "compare.csv";
  int cmp_probes = 200;
  std::uint64_t cmp_seed = 0;
  double cmp_grid_h = 0.05;
  int cmp_steps = 50;
  auto* compare = app.add_subcommand("compare", "compare a trained operator against an oracle");
  compare->add_option("run_dir", cmp_dir)->required();
  compare->add_option("--oracle", cmp_oracle, "grid | transcription | hopflax")->required();
  compare->add_option("--g", cmp_g)->required();
  compare->add_option("--probes", cmp_probes);
  compare->add_option("--seed", cmp_seed);
  compare->add_option("--points", cmp_points, "CSV of probe points");
  compare->add_option("--out", cmp_out);
  compare->add_option("--grid-h", cmp_grid_h, "spacing of the grid oracle");
  compare->add_option("--steps", cmp_steps, "transcription time steps");

  CommonConfig grid_common;
  std::string grid_g, grid_ghosts = "constant";
  bool grid_csv = false;
  auto* grid = app.add_subcommand("grid-solve", "dense-grid policy iteration (d <= 2)");
  add_config_options(grid, grid_common);
  grid->add_option("--g", grid_g, "terminal spec (default: problem terminal)");
  grid->add_option("--ghosts", grid_ghosts, "constant | linear boundary extrapolation");
  grid->add_flag("--csv", grid_csv, "also dump the final field as CSV");

  std::string oracle_problem, oracle_which, oracle_g, oracle_points,
      oracle_out = "oracle.csv";
  int oracle_probes = 20, oracle_steps = 50;
  std::uint64_t oracle_seed = 0;
  auto* oracle = app.add_subcommand("oracle", "standalone reference values");
  oracle->add_option("--problem", oracle_problem)->required();
  oracle->add_option("--which", oracle_which, "hopflax | transcription")->required();
  oracle->add_option("--g", oracle_g);
  oracle->add_option("--probes", oracle_probes);
  oracle->add_option("--seed", oracle_seed);
  oracle->add_option("--points", oracle_points);
  oracle->add_option("--out", oracle_out);
  oracle->add_option("--steps", oracle_steps);

  app.add_subcommand("catalog", "list built-in problems");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    emit_error("cli", e.what());
    return kExitConfig;
  }

  try {
    if (app.got_subcommand("train")) return cmd_train(train_common);
    if (app.got_subcommand("infer"))
      return cmd_infer(infer_dir, infer_g, infer_points, infer_out);
    if (app.got_subcommand("synthesize"))
      return cmd_synthesize(synth_dir, synth_g, synth_x0, synth_dt, synth_out);
    if (app.got_subcommand("compare"))
      return cmd_compare(cmp_dir, cmp_oracle, cmp_g, cmp_probes, cmp_seed, cmp_points,
                         cmp_out, cmp_grid_h, cmp_steps);
    if (app.got_subcommand("grid-solve"))
      return cmd_grid_solve(grid_common, grid_g, grid_ghosts, grid_csv);
    if (app.got_subcommand("oracle"))
      return cmd_oracle(oracle_problem, oracle_which, oracle_g, oracle_probes,
                        oracle_seed, oracle_points, oracle_out, oracle_steps);
    if (app.got_subcommand("catalog")) return cmd_catalog();
    emit_error("cli", "no subcommand given");
    return kExitConfig;
  } catch (const hjb::ConfigError& e) {
    emit_error("config", e.what(), e.field);
    return kExitConfig;
  } catch (const hjb::UnknownProblem& e) {
    emit_error("config", e.what(), "problem.id");
    return kExitConfig;
  } catch (const hjb::OracleInapplicable& e) {
    emit_error("oracle", e.what());
    return kExitOracle;
  } catch (const hjb::SensorMismatch& e) {
    emit_error("sensor", e.what());
    return kExitConfig;
  } catch (const hjb::Error& e) {
    emit_error("numerical", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    emit_error("internal", e.what());
    return kExitNumerical;
  }
}
