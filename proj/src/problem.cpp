#include "hjb/problem.hpp"

#include <cmath>
#include <random>

#include "hjb/errors.hpp"
#include "hjb/sobol.hpp"

namespace hjb {

bool WorkingBox::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != lo.size()) return false;
  for (int i = 0; i < x.size(); ++i)
    if (x(i) < lo(i) - tol || x(i) > hi(i) + tol) return false;
  return true;
}

Eigen::VectorXd WorkingBox::clamp(const Eigen::VectorXd& x) const {
  return x.cwiseMax(lo).cwiseMin(hi);
}

WorkingBox WorkingBox::inflated(double margin) const {
  return WorkingBox{lo.array() - margin, hi.array() + margin};
}

WorkingBox WorkingBox::centered(int dim, double half_width) {
  return WorkingBox{Eigen::VectorXd::Constant(dim, -half_width),
                    Eigen::VectorXd::Constant(dim, half_width)};
}

double estimate_f_sup_norm(const DynamicsFn& dynamics, const WorkingBox& box,
                           const ControlSet& controls, int samples, double safety) {
  const int d = box.dim();
  const int m = controls.dim();
  Eigen::VectorXd lo(d + m + 1), hi(d + m + 1);
  lo << 0.0, box.lo, controls.lower();
  hi << 1.0, box.hi, controls.upper();
  SobolSequence seq(d + m + 1);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd p = seq.next();
    const double t = p(0);
    Eigen::VectorXd x = box.lo + p.segment(1, d).cwiseProduct(box.hi - box.lo);
    Eigen::VectorXd u =
        controls.lower() + p.tail(m).cwiseProduct(controls.upper() - controls.lower());
    worst = std::max(worst, dynamics(t, x, u).norm());
  }
  return safety * worst;
}

void validate_f_sup_norm(const ControlProblem& problem, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto& box = problem.working_box;
  const auto& set = problem.control_set;
  for (int s = 0; s < samples; ++s) {
    const double t = unit(rng) * problem.horizon;
    Eigen::VectorXd x(problem.state_dim), u(problem.control_dim);
    for (int i = 0; i < problem.state_dim; ++i)
      x(i) = box.lo(i) + unit(rng) * (box.hi(i) - box.lo(i));
    for (int i = 0; i < problem.control_dim; ++i)
      u(i) = set.lower()(i) + unit(rng) * (set.upper()(i) - set.lower()(i));
    const double speed = problem.dynamics(t, x, u).norm();
    if (speed > problem.f_sup_norm)
      throw Error("f_sup_norm bound violated by sampled dynamics: " + std::to_string(speed) +
                  " > " + std::to_string(problem.f_sup_norm));
  }
}

TerminalCondition make_terminal_condition(ScalarFieldFn evaluator,
                                          const Eigen::MatrixXd& sensor_points,
                                          FieldGradientFn gradient) {
  TerminalCondition g;
  g.evaluator = std::move(evaluator);
  g.sensor_points = sensor_points;
  g.sensor_values.resize(sensor_points.cols());
  for (int j = 0; j < sensor_points.cols(); ++j)
    g.sensor_values(j) = g.evaluator(sensor_points.col(j));
  for (int j = 0; j < sensor_points.cols(); ++j)
    if (g.sensor_values(j) != g.evaluator(sensor_points.col(j)))
      throw Error("terminal condition evaluator is not deterministic at sensor points");
  g.gradient = std::move(gradient);
  return g;
}

}  // namespace hjb
