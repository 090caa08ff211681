#pragma once

#include <string>
#include <vector>

#include "hjb/problem.hpp"

namespace hjb {

/// Published scheme parameters for a catalog problem.
struct ProblemDefaults {
  double h = 0.005;
  int rounds = 5;                 // M
  double viscosity_factor = 1.0;  // N
  double horizon = 1.0;           // T
};

/// g(x) = offset + scale * ||x||^2.
struct QuadraticTerminal {
  double offset = 0.0;
  double scale = 1.0;
};

ScalarFieldFn quadratic_terminal_fn(const QuadraticTerminal& q);
FieldGradientFn quadratic_terminal_gradient(const QuadraticTerminal& q);

/// ||x||_2 with the subgradient 0 at the origin.
ScalarFieldFn norm_terminal_fn();
FieldGradientFn norm_terminal_gradient();

struct CatalogEntry {
  std::string id;
  ControlProblem problem;
  ProblemDefaults defaults;
  /// Terminal costs used for operator training. The vehicle uses its single
  /// canonical cost; the LQR problems use the published quadratic family.
  std::vector<QuadraticTerminal> training_family;  // empty for the vehicle
  ScalarFieldFn default_terminal;
  FieldGradientFn default_terminal_gradient;
};

/// ids: "vehicle2d", "lqr5x3", "lqr10x5". Throws UnknownProblem otherwise.
CatalogEntry build_problem(const std::string& id);
ProblemDefaults paper_defaults(const std::string& id);
std::vector<std::string> catalog_ids();

/// System matrices of the LQR instances, embedded digit for digit.
const Eigen::MatrixXd& lqr_dynamics_matrix(const std::string& id);  // A
const Eigen::MatrixXd& lqr_input_matrix(const std::string& id);     // B

}  // namespace hjb
