#include "hjb/control_set.hpp"

#include <cmath>

namespace hjb {

double wrap_angle(double a) {
  if (a >= -M_PI && a <= M_PI) return a;
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

ControlSet::ControlSet(Kind kind, Eigen::VectorXd lo, Eigen::VectorXd hi)
    : kind_(kind), lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() != hi_.size() || lo_.size() == 0)
    throw Error("control set bounds must be nonempty and of equal size");
  for (int i = 0; i < lo_.size(); ++i)
    if (!(lo_(i) <= hi_(i))) throw Error("control set requires lo <= hi componentwise");
}

ControlSet ControlSet::box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
  return ControlSet(Kind::Box, std::move(lo), std::move(hi));
}

ControlSet ControlSet::interval(double lo, double hi) {
  Eigen::VectorXd l(1), h(1);
  l << lo;
  h << hi;
  return ControlSet(Kind::Interval, std::move(l), std::move(h));
}

ControlSet ControlSet::angle() {
  Eigen::VectorXd l(1), h(1);
  l << -M_PI;
  h << M_PI;
  return ControlSet(Kind::Angle, std::move(l), std::move(h));
}

bool ControlSet::contains(const Eigen::VectorXd& u, double tol) const {
  if (u.size() != lo_.size()) return false;
  for (int i = 0; i < u.size(); ++i)
    if (u(i) < lo_(i) - tol || u(i) > hi_(i) + tol) return false;
  return true;
}

Eigen::VectorXd ControlSet::project(const Eigen::VectorXd& u) const {
  Eigen::VectorXd out(u.size());
  if (kind_ == Kind::Angle) {
    for (int i = 0; i < u.size(); ++i) out(i) = wrap_angle(u(i));
    return out;
  }
  for (int i = 0; i < u.size(); ++i) out(i) = std::min(std::max(u(i), lo_(i)), hi_(i));
  return out;
}

}  // namespace hjb
