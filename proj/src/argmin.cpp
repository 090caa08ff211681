#include "hjb/argmin.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "hjb/errors.hpp"

namespace hjb {
namespace {

double objective(const ControlProblem& problem, double t, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& p, const Eigen::VectorXd& u) {
  return p.dot(problem.dynamics(t, x, u)) + problem.running_cost(t, x, u);
}

// Exhaustive scan over a uniform lattice of the control box, visiting points
// in lexicographic order so the first strict minimum is also the
// lexicographically smallest among ties.
Eigen::VectorXd grid_scan_argmin(const ControlProblem& problem, double t,
                                 const Eigen::VectorXd& x, const Eigen::VectorXd& p,
                                 const ArgminConfig& config) {
  const ControlSet& set = problem.control_set;
  const int m = set.dim();
  const int res = m <= 2 ? config.scan_points_low_dim : config.scan_points_high_dim;

  std::vector<int> idx(m, 0);
  Eigen::VectorXd u(m), best_u(m);
  double best = std::numeric_limits<double>::infinity();
  bool done = false;
  while (!done) {
    for (int i = 0; i < m; ++i) {
      const double frac = res == 1 ? 0.0 : static_cast<double>(idx[i]) / (res - 1);
      u(i) = set.lower()(i) + frac * (set.upper()(i) - set.lower()(i));
    }
    const double value = objective(problem, t, x, p, u);
    if (value < best) {
      best = value;
      best_u = u;
    }
    int k = m - 1;
    while (k >= 0 && ++idx[k] == res) idx[k--] = 0;
    done = k < 0;
  }
  return best_u;
}

}  // namespace

double vehicle_steering_law(const Eigen::Vector2d& grad, double tol_grad, double fallback) {
  // Degenerate gradient: any angle is near-optimal; return the fallback.
  if (grad.norm() < tol_grad) return fallback;
  return std::atan2(-grad(1), -grad(0));
}

Eigen::VectorXd lqr_closed_form_argmin(const Eigen::MatrixXd& B,
                                       const Eigen::VectorXd& r_diag,
                                       const Eigen::VectorXd& p, const ControlSet& box) {
  if (box.kind() == ControlSet::Kind::Angle)
    throw NoMinimizer("lqr closed form requires a box control set");
  if ((r_diag.array() <= 0.0).any())
    throw NoMinimizer("lqr closed form requires strictly positive R diagonal");
  if (B.rows() != p.size() || B.cols() != box.dim())
    throw ShapeMismatch("lqr closed form: incompatible B, p, or control set shapes");
  const Eigen::VectorXd unconstrained = -(B.transpose() * p).cwiseQuotient(2.0 * r_diag);
  return box.project(unconstrained);
}

Eigen::VectorXd lqr_closed_form_argmin(const Eigen::MatrixXd& B, const Eigen::MatrixXd& R,
                                       const Eigen::VectorXd& p, const ControlSet& box) {
  if (R.rows() != R.cols()) throw NonDiagonalR("R must be square");
  if (!R.isDiagonal(0.0)) throw NonDiagonalR("closed-form argmin requires diagonal R");
  return lqr_closed_form_argmin(B, Eigen::VectorXd(R.diagonal()), p, box);
}

Eigen::VectorXd argmin_control(const ControlProblem& problem, double t,
                               const Eigen::VectorXd& x, const Eigen::VectorXd& p,
                               const ArgminConfig& config) {
  const bool want_closed = config.method != ArgminConfig::Method::GridScan;
  if (want_closed) {
    if (const auto* vehicle = std::get_if<VehicleAngleForm>(&problem.argmin_form)) {
      (void)vehicle;
      if (p.size() != 2) throw ShapeMismatch("vehicle steering law needs a 2-d costate");
      Eigen::VectorXd u(1);
      u << vehicle_steering_law(p.head<2>(), config.tol_grad, config.fallback_angle);
      return u;
    }
    if (const auto* lqr = std::get_if<LqrDiagonalForm>(&problem.argmin_form))
      return lqr_closed_form_argmin(lqr->input_matrix, lqr->r_diag, p, problem.control_set);
    if (config.method == ArgminConfig::Method::ClosedForm)
      throw NoMinimizer("problem has no closed-form control minimizer");
  }
  return grid_scan_argmin(problem, t, x, p, config);
}

double hamiltonian(const ControlProblem& problem, double t, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& p, const ArgminConfig& config) {
  const Eigen::VectorXd u = argmin_control(problem, t, x, p, config);
  return objective(problem, t, x, p, u);
}

}  // namespace hjb
