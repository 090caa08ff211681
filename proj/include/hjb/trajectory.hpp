#pragma once

#include <Eigen/Core>

namespace hjb {

/// A discrete trajectory with its cost breakdown. Shared by the trajectory
/// optimizer and the value-function rollout.
struct TrajectorySolution {
  Eigen::VectorXd times;     // steps + 1
  Eigen::MatrixXd states;    // d x (steps + 1)
  Eigen::MatrixXd controls;  // m x steps
  double objective = 0.0;    // running + terminal
  double running_cost = 0.0;
  double terminal_cost = 0.0;
  bool converged = true;
  int iterations = 0;
  bool escaped_domain = false;
};

}  // namespace hjb
