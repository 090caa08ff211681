#include "hjb/grid.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>

#include "hjb/errors.hpp"
#include "hjb/stencil.hpp"

namespace hjb {
namespace {

template <class T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error("truncated grid slab");
  return value;
}

constexpr char kSlabMagic[8] = {'H', 'J', 'B', 'G', 'R', 'D', '0', '\n'};
constexpr std::uint32_t kSlabVersion = 1;

bool increment(std::vector<int>& idx, const std::vector<int>& shape) {
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (++idx[i] < shape[i]) return true;
    idx[i] = 0;
  }
  return false;
}

// Stencil neighbor value in dimension i at a node, honoring the ghost rule
// when the probe leaves the grid.
double neighbor_value(const Eigen::MatrixXd& values, int slice, int flat, int i, int dir,
                      const std::vector<int>& idx, const GridSpec& spec) {
  const int pos = idx[i] + dir;
  if (pos >= 0 && pos < spec.shape[i]) return values(flat + dir * spec.strides[i], slice);
  const double center = values(flat, slice);
  if (spec.ghosts == GhostMode::Constant) return center;
  const double inner = values(flat - dir * spec.strides[i], slice);
  return 2.0 * center - inner;  // linear extrapolation through the edge
}

// Queries issued by the solver always land exactly on nodes and slices;
// answering them from the stored arrays (with the solver's own ghost rule)
// keeps the induced policy consistent with the scheme and avoids the
// interpolation path entirely.
bool locate_aligned(const GridSpec& spec, double t, const Eigen::VectorXd& x, int& slice,
                    std::vector<int>& idx, int& flat) {
  const double k = t / spec.dt;
  slice = static_cast<int>(std::llround(k));
  if (slice < 0 || slice > spec.steps || std::abs(k - slice) > 1e-9) return false;
  flat = 0;
  for (int i = 0; i < spec.dim(); ++i) {
    const double rel = (x(i) - spec.lo(i)) / spec.h;
    const int node = static_cast<int>(std::llround(rel));
    if (node < 0 || node >= spec.shape[i] || std::abs(rel - node) > 1e-9) return false;
    idx[i] = node;
    flat += node * spec.strides[i];
  }
  return true;
}

}  // namespace

GridSpec GridSpec::make(const WorkingBox& box, double h, double horizon, double f_sup_norm,
                        double viscosity_factor, double safety, GhostMode ghosts) {
  if (!(h > 0.0 && h < 1.0)) throw Error("grid spacing must lie in (0, 1)");
  if (horizon <= 0.0) throw Error("grid horizon must be positive");
  GridSpec spec;
  spec.lo = box.lo;
  spec.hi = box.hi;
  spec.h = h;
  spec.horizon = horizon;
  spec.ghosts = ghosts;
  const int d = box.dim();
  spec.shape.resize(d);
  spec.strides.resize(d);
  spec.node_count = 1;
  for (int i = 0; i < d; ++i) {
    const double span = (box.hi(i) - box.lo(i)) / h;
    const double rounded = std::round(span);
    if (std::abs(span - rounded) > 1e-9 * std::max(1.0, span))
      throw Error("grid spacing must divide the box extent exactly");
    spec.shape[i] = static_cast<int>(rounded) + 1;
    spec.strides[i] = spec.node_count;
    spec.node_count *= spec.shape[i];
  }
  const double dt_bound = safety * h / (d * f_sup_norm + 2.0 * viscosity_factor * d);
  spec.steps = static_cast<int>(std::ceil(horizon / dt_bound));
  spec.dt = horizon / spec.steps;
  spec.validate_stability(f_sup_norm, viscosity_factor);
  return spec;
}

void GridSpec::validate_stability(double f_sup_norm, double viscosity_factor) const {
  const int d = dim();
  const double bound = h / (d * f_sup_norm + 2.0 * viscosity_factor * d);
  if (dt > bound * (1.0 + 1e-12))
    throw UnstableSpec("time step " + std::to_string(dt) +
                       " exceeds the monotonicity bound " + std::to_string(bound));
}

Eigen::VectorXd GridSpec::node(const std::vector<int>& idx) const {
  Eigen::VectorXd x(dim());
  for (int i = 0; i < dim(); ++i) x(i) = lo(i) + idx[i] * h;
  return x;
}

double GridField::value(double t, const Eigen::VectorXd& x) const {
  const GridSpec& s = spec;
  const int d = s.dim();
  if (x.size() != d) throw ShapeMismatch("grid value query has wrong dimension");

  const double tau = std::min(std::max(t, 0.0), s.horizon) / s.dt;
  const int k = std::max(0, std::min(static_cast<int>(tau), s.steps - 1));
  const double theta = tau - k;

  // Base cell and interpolation weights per dimension.
  std::vector<int> base(d);
  std::vector<double> w(d);
  for (int i = 0; i < d; ++i) {
    const double rel = (std::min(std::max(x(i), s.lo(i)), s.hi(i)) - s.lo(i)) / s.h;
    int b = std::min(static_cast<int>(rel), s.shape[i] - 2);
    b = std::max(b, 0);
    base[i] = b;
    w[i] = std::min(std::max(rel - b, 0.0), 1.0);
  }

  double acc0 = 0.0, acc1 = 0.0;
  const int corners = 1 << d;
  for (int c = 0; c < corners; ++c) {
    double weight = 1.0;
    int flat = 0;
    for (int i = 0; i < d; ++i) {
      const int offset = (c >> i) & 1;
      weight *= offset ? w[i] : 1.0 - w[i];
      flat += (base[i] + offset) * s.strides[i];
    }
    if (weight == 0.0) continue;
    acc0 += weight * values(flat, k);
    acc1 += weight * values(flat, std::min(k + 1, s.steps));
  }
  return (1.0 - theta) * acc0 + theta * acc1;
}

std::function<double(double, const Eigen::VectorXd&)> grid_interpolant(
    std::shared_ptr<const GridField> field) {
  return [field](double t, const Eigen::VectorXd& x) { return field->value(t, x); };
}

GridField solve_linear_pde(const ControlProblem& problem, const GridPolicyFn& policy,
                           const TerminalCondition& g, const GridSpec& spec,
                           double viscosity_factor) {
  const int d = spec.dim();
  if (problem.state_dim != d) throw ShapeMismatch("problem and grid dimension differ");
  GridField field;
  field.spec = spec;
  field.values.resize(spec.node_count, spec.steps + 1);

  // Terminal slice equals g on the nodes exactly.
  {
    std::vector<int> idx(d, 0);
    int flat = 0;
    do {
      field.values(flat, spec.steps) = g.evaluator(spec.node(idx));
      ++flat;
    } while (increment(idx, spec.shape));
  }

  const double inv_2h = 1.0 / (2.0 * spec.h);
  const double visc_over_h = viscosity_factor / spec.h;  // (N h) / h^2
  Eigen::VectorXd x(d);
  for (int k = spec.steps; k >= 1; --k) {
    const double t = spec.slice_time(k);
    std::vector<int> idx(d, 0);
    int flat = 0;
    do {
      for (int i = 0; i < d; ++i) x(i) = spec.lo(i) + idx[i] * spec.h;
      const Eigen::VectorXd u = policy(t, x);
      const Eigen::VectorXd f = problem.dynamics(t, x, u);
      const double cost = problem.running_cost(t, x, u);
      const double center = field.values(flat, k);
      double advection = 0.0, diffusion = 0.0;
      for (int i = 0; i < d; ++i) {
        const double up = neighbor_value(field.values, k, flat, i, +1, idx, spec);
        const double down = neighbor_value(field.values, k, flat, i, -1, idx, spec);
        advection += f(i) * (up - down) * inv_2h;
        diffusion += (up - 2.0 * center + down) * visc_over_h;
      }
      field.values(flat, k - 1) = center + spec.dt * (cost + advection + diffusion);
      ++flat;
    } while (increment(idx, spec.shape));
    if (!field.values.col(k - 1).allFinite())
      throw NonFiniteValue("grid solve produced non-finite values at slice " +
                           std::to_string(k - 1));
  }
  return field;
}

std::vector<GridField> grid_policy_iteration(const ControlProblem& problem,
                                             const TerminalCondition& g,
                                             const GridSpec& spec,
                                             double viscosity_factor, int rounds,
                                             const ArgminConfig& argmin) {
  std::vector<GridField> fields;
  const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(problem.control_dim);
  GridPolicyFn policy = [u0](double, const Eigen::VectorXd&) { return u0; };
  const StencilConfig stencil(spec.h, spec.dim());
  for (int n = 0; n < rounds; ++n) {
    fields.push_back(solve_linear_pde(problem, policy, g, spec, viscosity_factor));
    auto snapshot = std::make_shared<const GridField>(fields.back());
    policy = [snapshot, &problem, stencil, argmin](double t, const Eigen::VectorXd& x) {
      const GridSpec& s = snapshot->spec;
      int slice = 0, flat = 0;
      std::vector<int> idx(s.dim());
      Eigen::VectorXd grad(s.dim());
      if (locate_aligned(s, t, x, slice, idx, flat)) {
        for (int i = 0; i < s.dim(); ++i)
          grad(i) = (neighbor_value(snapshot->values, slice, flat, i, +1, idx, s) -
                     neighbor_value(snapshot->values, slice, flat, i, -1, idx, s)) /
                    (2.0 * s.h);
      } else {
        const auto field = [&](const Eigen::VectorXd& q) { return snapshot->value(t, q); };
        grad = nabla_h(field, x, stencil);
      }
      return argmin_control(problem, t, x, grad, argmin);
    };
  }
  return fields;
}

double hopf_lax_vehicle(double t, const Eigen::VectorXd& x, double horizon) {
  return std::max(x.norm() - (horizon - t), 0.0);
}

ConvergenceStudy sqrt_h_convergence_study(const ControlProblem& problem,
                                          const TerminalCondition& g,
                                          const std::vector<double>& h_list,
                                          double viscosity_factor, int rounds,
                                          const Eigen::MatrixXd& probes,
                                          const ScalarFieldFn& reference,
                                          const ArgminConfig& argmin) {
  ConvergenceStudy study;
  for (double h : h_list) {
    const GridSpec spec = GridSpec::make(problem.working_box, h, problem.horizon,
                                         problem.f_sup_norm, viscosity_factor);
    const auto fields =
        grid_policy_iteration(problem, g, spec, viscosity_factor, rounds, argmin);
    double err = 0.0;
    for (int j = 0; j < probes.cols(); ++j)
      err = std::max(err, std::abs(fields.back().value(0.0, probes.col(j)) -
                                   reference(probes.col(j))));
    study.rows.push_back({h, err});
  }
  // Least-squares slope of log(error) against log(h).
  const int n = static_cast<int>(study.rows.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& row : study.rows) {
    const double lx = std::log(row.h), ly = std::log(std::max(row.max_error, 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  study.fitted_exponent = n >= 2 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : 0.0;
  return study;
}

void write_grid_csv(std::ostream& out, const GridField& field) {
  const GridSpec& s = field.spec;
  for (int i = 0; i < s.dim(); ++i) out << "x" << i + 1 << ",";
  out << "t,value\n";
  char buffer[64];
  for (int k = 0; k <= s.steps; ++k) {
    std::vector<int> idx(s.dim(), 0);
    int flat = 0;
    do {
      for (int i = 0; i < s.dim(); ++i) {
        std::snprintf(buffer, sizeof(buffer), "%.17g", s.lo(i) + idx[i] * s.h);
        out << buffer << ",";
      }
      std::snprintf(buffer, sizeof(buffer), "%.17g", s.slice_time(k));
      out << buffer << ",";
      std::snprintf(buffer, sizeof(buffer), "%.17g", field.values(flat, k));
      out << buffer << "\n";
      ++flat;
    } while (increment(idx, s.shape));
  }
}

void write_grid_slab(std::ostream& out, const GridField& field) {
  const GridSpec& s = field.spec;
  out.write(kSlabMagic, sizeof(kSlabMagic));
  write_pod(out, kSlabVersion);
  write_pod(out, static_cast<std::uint32_t>(s.dim()));
  for (int i = 0; i < s.dim(); ++i) write_pod(out, s.lo(i));
  for (int i = 0; i < s.dim(); ++i) write_pod(out, s.hi(i));
  write_pod(out, s.h);
  write_pod(out, s.dt);
  write_pod(out, s.horizon);
  write_pod(out, static_cast<std::uint32_t>(s.ghosts));
  write_pod(out, static_cast<std::uint32_t>(s.steps));
  for (int k = 0; k <= s.steps; ++k)
    for (int i = 0; i < s.node_count; ++i) write_pod(out, field.values(i, k));
  if (!out) throw Error("failed writing grid slab");
}

GridField read_grid_slab(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kSlabMagic, sizeof(magic)) != 0)
    throw Error("bad grid slab magic");
  if (read_pod<std::uint32_t>(in) != kSlabVersion) throw Error("unsupported slab version");
  const int d = static_cast<int>(read_pod<std::uint32_t>(in));
  if (d < 1 || d > 8) throw Error("implausible slab dimension");
  Eigen::VectorXd lo(d), hi(d);
  for (int i = 0; i < d; ++i) lo(i) = read_pod<double>(in);
  for (int i = 0; i < d; ++i) hi(i) = read_pod<double>(in);

  GridSpec spec;
  spec.lo = lo;
  spec.hi = hi;
  spec.h = read_pod<double>(in);
  spec.dt = read_pod<double>(in);
  spec.horizon = read_pod<double>(in);
  spec.ghosts = static_cast<GhostMode>(read_pod<std::uint32_t>(in));
  spec.steps = static_cast<int>(read_pod<std::uint32_t>(in));
  spec.shape.resize(d);
  spec.strides.resize(d);
  spec.node_count = 1;
  for (int i = 0; i < d; ++i) {
    spec.shape[i] = static_cast<int>(std::round((hi(i) - lo(i)) / spec.h)) + 1;
    spec.strides[i] = spec.node_count;
    spec.node_count *= spec.shape[i];
  }
  GridField field;
  field.spec = spec;
  field.values.resize(spec.node_count, spec.steps + 1);
  for (int k = 0; k <= spec.steps; ++k)
    for (int i = 0; i < spec.node_count; ++i) field.values(i, k) = read_pod<double>(in);
  return field;
}

}  // namespace hjb
