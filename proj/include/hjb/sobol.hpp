#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

#include "hjb/errors.hpp"

namespace hjb {

/// Gray-code Sobol sequence in [0,1)^dim, dim <= 16. Deterministic; the
/// all-zero index-0 point is skipped.
class SobolSequence {
 public:
  explicit SobolSequence(int dim);

  int dim() const { return dim_; }
  Eigen::VectorXd next();

  /// dim x n matrix, one point per column.
  Eigen::MatrixXd sample(int n);

  /// Points mapped into an axis-aligned box, one per column.
  static Eigen::MatrixXd sample_box(int n, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

  static constexpr int kMaxDim = 16;

 private:
  int dim_;
  std::uint64_t index_ = 0;
  std::vector<std::array<std::uint32_t, 32>> directions_;
  std::vector<std::uint32_t> state_;
};

}  // namespace hjb
