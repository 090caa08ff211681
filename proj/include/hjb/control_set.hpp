#pragma once

#include <Eigen/Core>

#include "hjb/errors.hpp"

namespace hjb {

/// Wraps an angle into [-pi, pi].
double wrap_angle(double a);

/// Compact control sets: axis-aligned boxes, scalar intervals, and the
/// periodic steering-angle set [-pi, pi].
class ControlSet {
 public:
  enum class Kind { Box, Interval, Angle };

  static ControlSet box(Eigen::VectorXd lo, Eigen::VectorXd hi);
  static ControlSet interval(double lo, double hi);
  static ControlSet angle();

  /// Degenerate placeholder set {0}; real problems always replace it.
  ControlSet() : ControlSet(Kind::Interval, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)) {}

  Kind kind() const { return kind_; }
  int dim() const { return static_cast<int>(lo_.size()); }
  const Eigen::VectorXd& lower() const { return lo_; }
  const Eigen::VectorXd& upper() const { return hi_; }
  bool periodic() const { return kind_ == Kind::Angle; }

  bool contains(const Eigen::VectorXd& u, double tol = 0.0) const;

  /// Componentwise clamp into the set; the angle set wraps instead of
  /// clamping since its objective is periodic.
  Eigen::VectorXd project(const Eigen::VectorXd& u) const;

 private:
  ControlSet(Kind kind, Eigen::VectorXd lo, Eigen::VectorXd hi);

  Kind kind_;
  Eigen::VectorXd lo_, hi_;
};

}  // namespace hjb
