#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <variant>

#include "hjb/control_set.hpp"

namespace hjb {

using DynamicsFn =
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&, const Eigen::VectorXd&)>;
using RunningCostFn =
    std::function<double(double, const Eigen::VectorXd&, const Eigen::VectorXd&)>;
using ScalarFieldFn = std::function<double(const Eigen::VectorXd&)>;
using FieldGradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn =
    std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&, const Eigen::VectorXd&)>;
using CostGradientFn =
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&, const Eigen::VectorXd&)>;

/// Axis-aligned effective state domain used for sampling, collocation and
/// trajectory checks.
struct WorkingBox {
  Eigen::VectorXd lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const;
  WorkingBox inflated(double margin) const;

  static WorkingBox centered(int dim, double half_width);
};

/// Tags problems whose pointwise control minimizer has a closed form.
struct VehicleAngleForm {};  // f = (cos u, sin u), L == 0, scalar angle control
struct LqrDiagonalForm {     // f = Ax + Bu, L = x'Qx + u'Ru with diagonal R
  Eigen::MatrixXd input_matrix;  // B
  Eigen::VectorXd r_diag;
};
using ArgminForm = std::variant<std::monostate, VehicleAngleForm, LqrDiagonalForm>;

/// A finite-horizon control problem: minimize the integral of the running
/// cost plus a terminal cost, over controls in a compact set.
struct ControlProblem {
  int state_dim = 0;
  int control_dim = 0;
  double horizon = 0.0;
  DynamicsFn dynamics;
  RunningCostFn running_cost;
  ControlSet control_set;
  WorkingBox working_box;
  double f_sup_norm = 0.0;  // bound on sup ||dynamics||_2 over box x U
  ArgminForm argmin_form;

  // Optional analytic derivatives, used by the transcription adjoint.
  JacobianFn dynamics_jac_x;  // d x d
  JacobianFn dynamics_jac_u;  // d x m
  CostGradientFn running_cost_grad_x;
  CostGradientFn running_cost_grad_u;
};

/// Sup of ||dynamics||_2 estimated from low-discrepancy samples over
/// box x U, inflated by a safety factor.
double estimate_f_sup_norm(const DynamicsFn& dynamics, const WorkingBox& box,
                           const ControlSet& controls, int samples = 100000,
                           double safety = 1.1);

/// Spot-checks the stored bound against random samples; throws on violation.
void validate_f_sup_norm(const ControlProblem& problem, int samples = 1024,
                         std::uint64_t seed = 0);

/// Terminal cost g together with its samples at fixed sensor points.
struct TerminalCondition {
  ScalarFieldFn evaluator;
  Eigen::MatrixXd sensor_points;  // state_dim x k
  Eigen::VectorXd sensor_values;  // k
  FieldGradientFn gradient;       // optional, for the transcription adjoint
};

/// Samples the evaluator at the sensor points and re-checks consistency.
TerminalCondition make_terminal_condition(ScalarFieldFn evaluator,
                                          const Eigen::MatrixXd& sensor_points,
                                          FieldGradientFn gradient = nullptr);

}  // namespace hjb
