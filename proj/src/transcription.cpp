#include "hjb/transcription.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "hjb/errors.hpp"

namespace hjb {
namespace {

struct PgdRun {
  Eigen::MatrixXd controls;
  double objective = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
};

Eigen::MatrixXd project_controls(const ControlSet& set, const Eigen::MatrixXd& u) {
  Eigen::MatrixXd out(u.rows(), u.cols());
  for (Eigen::Index j = 0; j < u.cols(); ++j) out.col(j) = set.project(u.col(j));
  return out;
}

PgdRun run_single_start(const TranscriptionProblem& tp, const PgdConfig& config,
                        Eigen::MatrixXd controls) {
  // On the periodic angle set projection is the identity up to wrapping, so
  // plain gradient steps apply; boxes use the projected-gradient map.
  const bool periodic = tp.problem.control_set.periodic();
  PgdRun run;
  double objective = transcription_objective(tp, controls);
  double step = config.initial_step;
  for (int iteration = 0; iteration < config.max_iterations; ++iteration) {
    run.iterations = iteration + 1;
    const Eigen::MatrixXd gradient = adjoint_gradient(tp, controls);

    const Eigen::MatrixXd pg_point =
        periodic ? Eigen::MatrixXd(controls - gradient)
                 : project_controls(tp.problem.control_set, controls - gradient);
    const double pg_norm = (controls - pg_point).norm();
    if (pg_norm < config.tolerance) {
      run.converged = true;
      break;
    }

    // Armijo backtracking on the projected step.
    bool accepted = false;
    for (int bt = 0; bt < config.max_backtracks; ++bt) {
      const Eigen::MatrixXd candidate =
          periodic ? Eigen::MatrixXd(controls - step * gradient)
                   : project_controls(tp.problem.control_set, controls - step * gradient);
      const double displacement = (candidate - controls).squaredNorm();
      const double candidate_objective = transcription_objective(tp, candidate);
      if (candidate_objective <= objective - config.armijo_c / step * displacement) {
        if (candidate_objective > objective)
          throw Error("projected-gradient step increased the objective");
        controls = candidate;
        objective = candidate_objective;
        accepted = true;
        // Gentle step growth keeps later iterations from over-backtracking.
        step = std::min(step * 2.0, config.initial_step);
        break;
      }
      step *= config.backtrack;
    }
    if (!accepted) break;  // stalled below floating-point resolution
  }
  if (periodic) controls = project_controls(tp.problem.control_set, controls);
  run.controls = controls;
  run.objective = transcription_objective(tp, controls);
  return run;
}

}  // namespace

Eigen::MatrixXd simulate(const TranscriptionProblem& tp, const Eigen::MatrixXd& controls) {
  if (controls.rows() != tp.problem.control_dim || controls.cols() != tp.steps)
    throw ShapeMismatch("controls must be m x steps");
  const double dt = tp.dt();
  Eigen::MatrixXd states(tp.problem.state_dim, tp.steps + 1);
  states.col(0) = tp.x0;
  for (int k = 0; k < tp.steps; ++k)
    states.col(k + 1) =
        states.col(k) + dt * tp.problem.dynamics(k * dt, states.col(k), controls.col(k));
  return states;
}

double transcription_objective(const TranscriptionProblem& tp,
                               const Eigen::MatrixXd& controls) {
  const Eigen::MatrixXd states = simulate(tp, controls);
  const double dt = tp.dt();
  double running = 0.0;
  for (int k = 0; k < tp.steps; ++k)
    running += tp.problem.running_cost(k * dt, states.col(k), controls.col(k)) * dt;
  return running + tp.g.evaluator(states.col(tp.steps));
}

Eigen::MatrixXd adjoint_gradient(const TranscriptionProblem& tp,
                                 const Eigen::MatrixXd& controls) {
  const ControlProblem& p = tp.problem;
  if (!p.dynamics_jac_x || !p.dynamics_jac_u || !p.running_cost_grad_x ||
      !p.running_cost_grad_u)
    throw Error("adjoint gradient requires analytic dynamics and cost derivatives");
  if (!tp.g.gradient) throw Error("adjoint gradient requires a terminal-cost gradient");

  const double dt = tp.dt();
  const Eigen::MatrixXd states = simulate(tp, controls);
  Eigen::MatrixXd grad(p.control_dim, tp.steps);
  Eigen::VectorXd lambda = tp.g.gradient(states.col(tp.steps));
  for (int k = tp.steps - 1; k >= 0; --k) {
    const double t = k * dt;
    const Eigen::VectorXd x = states.col(k);
    const Eigen::VectorXd u = controls.col(k);
    grad.col(k) = dt * p.running_cost_grad_u(t, x, u) +
                  dt * p.dynamics_jac_u(t, x, u).transpose() * lambda;
    lambda = dt * p.running_cost_grad_x(t, x, u) + lambda +
             dt * p.dynamics_jac_x(t, x, u).transpose() * lambda;
  }
  return grad;
}

TrajectorySolution transcribe_and_solve(const TranscriptionProblem& tp,
                                        const PgdConfig& config) {
  if (tp.steps < 1) throw Error("transcription needs at least one time step");
  const ControlSet& set = tp.problem.control_set;
  const int m = tp.problem.control_dim;

  PgdRun best;
  for (int start = 0; start < config.starts; ++start) {
    std::mt19937_64 rng(config.seed + static_cast<std::uint64_t>(start));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::MatrixXd u0(m, tp.steps);
    for (int k = 0; k < tp.steps; ++k)
      for (int i = 0; i < m; ++i)
        u0(i, k) = set.lower()(i) + unit(rng) * (set.upper()(i) - set.lower()(i));
    PgdRun run = run_single_start(tp, config, std::move(u0));
    if (run.objective < best.objective) best = std::move(run);
  }

  TrajectorySolution solution;
  const double dt = tp.dt();
  solution.controls = best.controls;
  solution.states = simulate(tp, best.controls);
  solution.times.resize(tp.steps + 1);
  for (int k = 0; k <= tp.steps; ++k) solution.times(k) = k * dt;
  solution.running_cost = 0.0;
  for (int k = 0; k < tp.steps; ++k)
    solution.running_cost +=
        tp.problem.running_cost(k * dt, solution.states.col(k), best.controls.col(k)) * dt;
  solution.terminal_cost = tp.g.evaluator(solution.states.col(tp.steps));
  solution.objective = solution.running_cost + solution.terminal_cost;
  solution.converged = best.converged;
  solution.iterations = best.iterations;
  return solution;
}

}  // namespace hjb
