#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "hjb/errors.hpp"

namespace hjb {

/// Central-difference stencil parameters. Spacing is restricted to (0, 1).
struct StencilConfig {
  double h;
  int dim;

  StencilConfig(double h_, int dim_) : h(h_), dim(dim_) {
    if (!(h > 0.0 && h < 1.0)) throw Error("stencil spacing must lie in (0, 1)");
    if (dim < 1) throw Error("stencil dimension must be positive");
  }
};

/// Central-difference gradient: component i is
/// (field(x + h e_i) - field(x - h e_i)) / (2h). Exactly 2*dim evaluations.
template <class Field>
Eigen::VectorXd nabla_h(Field&& field, const Eigen::VectorXd& x, const StencilConfig& cfg) {
  Eigen::VectorXd grad(cfg.dim);
  Eigen::VectorXd probe = x;
  for (int i = 0; i < cfg.dim; ++i) {
    probe(i) = x(i) + cfg.h;
    const double up = field(probe);
    probe(i) = x(i) - cfg.h;
    const double down = field(probe);
    probe(i) = x(i);
    grad(i) = (up - down) / (2.0 * cfg.h);
  }
  return grad;
}

/// Discrete Laplacian: sum over i of
/// (field(x + h e_i) - 2 field(x) + field(x - h e_i)) / h^2.
/// Exactly 2*dim + 1 evaluations.
template <class Field>
double laplace_h(Field&& field, const Eigen::VectorXd& x, const StencilConfig& cfg) {
  const double center = field(x);
  double acc = 0.0;
  Eigen::VectorXd probe = x;
  for (int i = 0; i < cfg.dim; ++i) {
    probe(i) = x(i) + cfg.h;
    const double up = field(probe);
    probe(i) = x(i) - cfg.h;
    const double down = field(probe);
    probe(i) = x(i);
    acc += up - 2.0 * center + down;
  }
  return acc / (cfg.h * cfg.h);
}

/// All stencil probes for a batch of points, one probe per column, ordered
/// per point, per dimension, +h before -h.
inline Eigen::MatrixXd gradient_stencil_points(const std::vector<Eigen::VectorXd>& points,
                                               const StencilConfig& cfg) {
  Eigen::MatrixXd probes(cfg.dim, 2 * cfg.dim * static_cast<int>(points.size()));
  int col = 0;
  for (const auto& x : points) {
    for (int i = 0; i < cfg.dim; ++i) {
      probes.col(col) = x;
      probes(i, col++) += cfg.h;
      probes.col(col) = x;
      probes(i, col++) -= cfg.h;
    }
  }
  return probes;
}

/// Batched gradient: one evaluator call on all 2*dim*|points| probes.
/// Componentwise identical to nabla_h applied point by point.
template <class BatchField>
std::vector<Eigen::VectorXd> nabla_h_batch(BatchField&& field,
                                           const std::vector<Eigen::VectorXd>& points,
                                           const StencilConfig& cfg) {
  const Eigen::MatrixXd probes = gradient_stencil_points(points, cfg);
  const Eigen::VectorXd values = field(probes);
  if (values.size() != probes.cols())
    throw ShapeMismatch("batched field returned wrong number of values");
  std::vector<Eigen::VectorXd> grads(points.size(), Eigen::VectorXd(cfg.dim));
  int col = 0;
  for (auto& grad : grads)
    for (int i = 0; i < cfg.dim; ++i, col += 2)
      grad(i) = (values(col) - values(col + 1)) / (2.0 * cfg.h);
  return grads;
}

}  // namespace hjb
