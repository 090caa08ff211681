#include "hjb/sobol.hpp"

#include <bit>

namespace hjb {
namespace {

// Primitive-polynomial parameters (degree, encoded coefficients, initial
// m-values) for dimensions 2..16; dimension 1 is the van der Corput radical
// inverse.
struct DirectionSeed {
  int degree;
  std::uint32_t poly;
  std::array<std::uint32_t, 6> m;
};

constexpr DirectionSeed kSeeds[15] = {
    {1, 0, {1, 0, 0, 0, 0, 0}},        //
    {2, 1, {1, 3, 0, 0, 0, 0}},        //
    {3, 1, {1, 3, 1, 0, 0, 0}},        //
    {3, 2, {1, 1, 1, 0, 0, 0}},        //
    {4, 1, {1, 1, 3, 3, 0, 0}},        //
    {4, 4, {1, 3, 5, 13, 0, 0}},       //
    {5, 2, {1, 1, 5, 5, 17, 0}},       //
    {5, 4, {1, 1, 5, 5, 5, 0}},        //
    {5, 7, {1, 1, 7, 11, 19, 0}},      //
    {5, 11, {1, 1, 5, 1, 1, 0}},       //
    {5, 13, {1, 1, 1, 3, 11, 0}},      //
    {5, 14, {1, 3, 5, 5, 31, 0}},      //
    {6, 1, {1, 3, 3, 9, 7, 49}},       //
    {6, 13, {1, 1, 1, 15, 21, 21}},    //
    {6, 16, {1, 3, 1, 13, 27, 49}},    //
};

std::array<std::uint32_t, 32> build_directions(const DirectionSeed& seed) {
  std::array<std::uint32_t, 32> v{};
  const int s = seed.degree;
  std::array<std::uint32_t, 32> m{};
  for (int i = 0; i < s; ++i) m[i] = seed.m[i];
  for (int i = s; i < 32; ++i) {
    std::uint32_t mi = m[i - s] ^ (m[i - s] << s);
    for (int k = 1; k < s; ++k)
      if ((seed.poly >> (s - 1 - k)) & 1u) mi ^= m[i - k] << k;
    m[i] = mi;
  }
  for (int i = 0; i < 32; ++i) v[i] = m[i] << (31 - i);
  return v;
}

std::array<std::uint32_t, 32> van_der_corput_directions() {
  std::array<std::uint32_t, 32> v{};
  for (int i = 0; i < 32; ++i) v[i] = 1u << (31 - i);
  return v;
}

}  // namespace

SobolSequence::SobolSequence(int dim) : dim_(dim) {
  if (dim < 1 || dim > kMaxDim) throw Error("sobol dimension must be in [1, 16]");
  directions_.reserve(dim);
  directions_.push_back(van_der_corput_directions());
  for (int d = 1; d < dim; ++d) directions_.push_back(build_directions(kSeeds[d - 1]));
  state_.assign(dim, 0u);
}

Eigen::VectorXd SobolSequence::next() {
  // Gray-code update: flip the direction of the lowest zero bit of the index.
  const int bit = std::countr_one(index_);
  ++index_;
  Eigen::VectorXd p(dim_);
  for (int d = 0; d < dim_; ++d) {
    state_[d] ^= directions_[d][bit];
    p(d) = static_cast<double>(state_[d]) * 0x1p-32;
  }
  return p;
}

Eigen::MatrixXd SobolSequence::sample(int n) {
  Eigen::MatrixXd out(dim_, n);
  for (int j = 0; j < n; ++j) out.col(j) = next();
  return out;
}

Eigen::MatrixXd SobolSequence::sample_box(int n, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  SobolSequence seq(static_cast<int>(lo.size()));
  Eigen::MatrixXd unit = seq.sample(n);
  Eigen::MatrixXd out(lo.size(), n);
  for (int j = 0; j < n; ++j) out.col(j) = lo + unit.col(j).cwiseProduct(hi - lo);
  return out;
}

}  // namespace hjb
