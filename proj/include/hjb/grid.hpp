#pragma once

#include <Eigen/Core>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "hjb/argmin.hpp"
#include "hjb/problem.hpp"

namespace hjb {

/// Treatment of stencil probes that leave the box. Constant extrapolation
/// keeps every update a monotone combination of slice values; linear
/// extrapolation is second-order at the boundary but not monotone there.
enum class GhostMode { Constant, Linear };

/// Regular space-time grid. Nodes include the box corners exactly; the time
/// step divides the horizon exactly.
struct GridSpec {
  Eigen::VectorXd lo, hi;
  double h = 0.0;
  double dt = 0.0;
  double horizon = 0.0;
  GhostMode ghosts = GhostMode::Constant;

  std::vector<int> shape;    // nodes per dimension
  std::vector<int> strides;  // flat-index strides, dimension 0 fastest
  int node_count = 0;
  int steps = 0;  // time slices = steps + 1

  /// Chooses dt = safety * h / (d ||f|| + 2 N d), rounded down to divide the
  /// horizon exactly.
  static GridSpec make(const WorkingBox& box, double h, double horizon,
                       double f_sup_norm, double viscosity_factor, double safety = 0.9,
                       GhostMode ghosts = GhostMode::Constant);

  /// Throws UnstableSpec when dt exceeds h / (d ||f|| + 2 N d).
  void validate_stability(double f_sup_norm, double viscosity_factor) const;

  int dim() const { return static_cast<int>(lo.size()); }
  double slice_time(int k) const { return k * dt; }
  Eigen::VectorXd node(const std::vector<int>& idx) const;
};

/// Dense values on a grid, one column per time slice (terminal slice last).
struct GridField {
  GridSpec spec;
  Eigen::MatrixXd values;  // node_count x (steps + 1)

  /// Multilinear in space, linear in time; coordinates are clamped into the
  /// box, which matches constant-extrapolation ghosts.
  double value(double t, const Eigen::VectorXd& x) const;
};

/// Interpolating closure over a shared field.
std::function<double(double, const Eigen::VectorXd&)> grid_interpolant(
    std::shared_ptr<const GridField> field);

using GridPolicyFn = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

/// Backward explicit Euler for the policy-frozen linear equation:
///   V(t - dt) = V(t) + dt [ L + grad_h V . f + N h lap_h V ],
/// with V(T) = g on the nodes exactly.
GridField solve_linear_pde(const ControlProblem& problem, const GridPolicyFn& policy,
                           const TerminalCondition& g, const GridSpec& spec,
                           double viscosity_factor);

/// Alternates the linear solve with the pointwise argmin policy update,
/// starting from the zero control. Returns all `rounds` fields.
std::vector<GridField> grid_policy_iteration(const ControlProblem& problem,
                                             const TerminalCondition& g,
                                             const GridSpec& spec,
                                             double viscosity_factor, int rounds,
                                             const ArgminConfig& argmin = {});

/// Exact value of the unit-speed reach-the-origin problem:
/// max(||x|| - (T - t), 0).
double hopf_lax_vehicle(double t, const Eigen::VectorXd& x, double horizon);

struct ConvergenceRow {
  double h;
  double max_error;
};
struct ConvergenceStudy {
  std::vector<ConvergenceRow> rows;
  double fitted_exponent;  // log-log least-squares slope of error vs h
};

/// Runs grid policy iteration per spacing and compares V(0, probe) against a
/// reference value function.
ConvergenceStudy sqrt_h_convergence_study(const ControlProblem& problem,
                                          const TerminalCondition& g,
                                          const std::vector<double>& h_list,
                                          double viscosity_factor, int rounds,
                                          const Eigen::MatrixXd& probes,
                                          const ScalarFieldFn& reference,
                                          const ArgminConfig& argmin = {});

void write_grid_csv(std::ostream& out, const GridField& field);
void write_grid_slab(std::ostream& out, const GridField& field);
GridField read_grid_slab(std::istream& in);

}  // namespace hjb
