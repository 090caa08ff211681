#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "hjb/problem.hpp"
#include "hjb/trajectory.hpp"

namespace hjb {

/// Projected gradient descent with Armijo backtracking and random restarts.
struct PgdConfig {
  int max_iterations = 5000;
  double tolerance = 1e-8;  // on the projected-gradient norm
  int starts = 8;
  std::uint64_t seed = 0;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  double initial_step = 1.0;
  int max_backtracks = 60;
};

/// Finite-dimensional restatement of a control problem: controls on a
/// uniform time mesh are the only decision variables, states are eliminated
/// by the forward Euler recursion.
struct TranscriptionProblem {
  ControlProblem problem;
  TerminalCondition g;
  Eigen::VectorXd x0;
  int steps = 50;

  double dt() const { return problem.horizon / steps; }
};

/// Forward Euler states for a control sequence (one control per column).
Eigen::MatrixXd simulate(const TranscriptionProblem& tp, const Eigen::MatrixXd& controls);

/// sum_k L(t_k, x_k, u_k) dt + g(x_end).
double transcription_objective(const TranscriptionProblem& tp,
                               const Eigen::MatrixXd& controls);

/// Exact gradient of the transcribed objective w.r.t. every control, by the
/// backward (adjoint) recursion. Requires the problem's analytic Jacobians.
Eigen::MatrixXd adjoint_gradient(const TranscriptionProblem& tp,
                                 const Eigen::MatrixXd& controls);

/// Multi-start projected gradient descent; returns the best run. The
/// `converged` flag reports whether the best run hit the tolerance.
TrajectorySolution transcribe_and_solve(const TranscriptionProblem& tp,
                                        const PgdConfig& config = {});

}  // namespace hjb
