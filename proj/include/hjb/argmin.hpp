#pragma once

#include <Eigen/Core>

#include "hjb/problem.hpp"

namespace hjb {

/// How the pointwise control minimizer is computed.
struct ArgminConfig {
  enum class Method { Auto, ClosedForm, GridScan };
  Method method = Method::Auto;
  int scan_points_low_dim = 512;  // per-dimension resolution for m <= 2
  int scan_points_high_dim = 64;  // per-dimension resolution for m >= 3
  double tol_grad = 1e-10;        // degenerate-gradient threshold (steering law)
  double fallback_angle = 0.0;    // returned below tol_grad
};

/// Steering angle minimizing grad . (cos u, sin u): the angle opposite to
/// grad. Returns the fallback angle when ||grad|| < tol_grad.
double vehicle_steering_law(const Eigen::Vector2d& grad, double tol_grad = 1e-10,
                            double fallback = 0.0);

/// Componentwise minimizer of p . (B u) + u' diag(r) u over a box:
/// clamp(-(B'p)_i / (2 r_i)).
Eigen::VectorXd lqr_closed_form_argmin(const Eigen::MatrixXd& B,
                                       const Eigen::VectorXd& r_diag,
                                       const Eigen::VectorXd& p, const ControlSet& box);

/// Overload taking a full R; throws NonDiagonalR unless R is diagonal.
Eigen::VectorXd lqr_closed_form_argmin(const Eigen::MatrixXd& B, const Eigen::MatrixXd& R,
                                       const Eigen::VectorXd& p, const ControlSet& box);

/// Pointwise minimizer of p . f(t,x,u) + L(t,x,u) over the control set.
/// Ties break toward the lexicographically smallest control.
Eigen::VectorXd argmin_control(const ControlProblem& problem, double t,
                               const Eigen::VectorXd& x, const Eigen::VectorXd& p,
                               const ArgminConfig& config = {});

/// inf over controls of p . f(t,x,u) + L(t,x,u), at the argmin above.
double hamiltonian(const ControlProblem& problem, double t, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& p, const ArgminConfig& config = {});

}  // namespace hjb
