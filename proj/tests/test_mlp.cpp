#include <Eigen/Core>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "hjb/mlp.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd random_vector(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> unif(-scale, scale);
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = unif(rng);
  return v;
}

// Central finite difference of a scalar function of one parameter entry.
template <class Eval>
double fd_of_param(double& param, const Eval& eval, double delta = 1e-6) {
  const double saved = param;
  param = saved + delta;
  const double up = eval();
  param = saved - delta;
  const double down = eval();
  param = saved;
  return (up - down) / (2.0 * delta);
}

void check_close(double got, double want, double rel_tol, double abs_floor) {
  const double tol = std::max(abs_floor, rel_tol * std::abs(want));
  CHECK(std::abs(got - want) <= tol);
}

}  // namespace

TEST_CASE("forward matches simple closed forms") {
  hjb::Mlp net = hjb::init_params({1, 1}, hjb::Activation::Tanh, 0);
  net.weights[0](0, 0) = 2.0;
  net.biases[0](0) = 1.0;
  VectorXd in(1);
  in << 3.0;
  CHECK(hjb::forward(net, in)(0) == 7.0);

  hjb::Mlp zero = hjb::init_params({3, 4, 2}, hjb::Activation::Tanh, 0);
  for (auto& w : zero.weights) w.setZero();
  const VectorXd out = hjb::forward(zero, VectorXd::Ones(3));
  CHECK(out.norm() == 0.0);
}

TEST_CASE("forward matches a straight-line scalar recomputation") {
  const hjb::Mlp net = hjb::init_params({2, 3, 1}, hjb::Activation::Tanh, 42);
  VectorXd in(2);
  in << 0.4, -1.1;

  // Independent recomputation with plain loops and std::tanh.
  double hidden[3];
  for (int i = 0; i < 3; ++i) {
    double z = net.biases[0](i);
    for (int j = 0; j < 2; ++j) z += net.weights[0](i, j) * in(j);
    hidden[i] = std::tanh(z);
  }
  double out = net.biases[1](0);
  for (int i = 0; i < 3; ++i) out += net.weights[1](0, i) * hidden[i];

  // The engine computes tanh through exp, so agreement with std::tanh is at
  // roundoff level rather than bitwise.
  CHECK(hjb::forward(net, in)(0) == doctest::Approx(out).epsilon(1e-13));
}

TEST_CASE("forward rejects mismatched input width") {
  const hjb::Mlp net = hjb::init_params({2, 3, 1}, hjb::Activation::Tanh, 0);
  CHECK_THROWS_AS(hjb::forward(net, VectorXd::Zero(3)), hjb::ShapeMismatch);
}

TEST_CASE("batched forward equals stacked single evaluations bitwise") {
  const hjb::Mlp net = hjb::init_params({3, 16, 16, 4}, hjb::Activation::Tanh, 5);
  std::mt19937_64 rng(9);
  MatrixXd inputs(3, 64);
  for (int j = 0; j < inputs.cols(); ++j) inputs.col(j) = random_vector(3, rng, 2.0);
  const MatrixXd batch = hjb::forward_batch(net, inputs);
  for (int j = 0; j < inputs.cols(); ++j) {
    const VectorXd single = hjb::forward(net, inputs.col(j));
    for (int i = 0; i < 4; ++i) CHECK(batch(i, j) == single(i));
  }
}

TEST_CASE("reverse mode matches finite differences on random nets") {
  std::mt19937_64 rng(1234);
  const std::vector<std::vector<int>> shapes = {
      {2, 5, 1}, {3, 8, 7, 2}, {1, 4, 4, 1}, {4, 6, 3}, {2, 3, 3, 3, 1}};
  int net_index = 0;
  for (const auto& widths : shapes) {
    // Relu is excluded: central differences are meaningless within delta of
    // its kink, so the oracle itself breaks down there.
    for (auto activation : {hjb::Activation::Tanh, hjb::Activation::Sin}) {
      hjb::Mlp net = hjb::init_params(widths, activation, 100 + net_index++);
      const VectorXd input = random_vector(widths.front(), rng);
      const VectorXd upstream = random_vector(widths.back(), rng);
      const hjb::ParamGrad grad = hjb::backward_params(net, input, upstream);
      const auto eval = [&]() { return upstream.dot(hjb::forward(net, input)); };
      for (std::size_t l = 0; l < net.weights.size(); ++l) {
        for (int i = 0; i < net.weights[l].rows(); ++i)
          for (int j = 0; j < net.weights[l].cols(); ++j)
            check_close(grad.d_weights[l](i, j), fd_of_param(net.weights[l](i, j), eval),
                        1e-5, 1e-8);
        for (int i = 0; i < net.biases[l].size(); ++i)
          check_close(grad.d_biases[l](i), fd_of_param(net.biases[l](i), eval), 1e-5,
                      1e-8);
      }
    }
  }
}

TEST_CASE("relu gradients are exact away from the kink") {
  // Fixed signs keep every pre-activation well away from zero, where the
  // subgradient choice is irrelevant and the chain rule is exact.
  hjb::Mlp net = hjb::init_params({2, 2, 1}, hjb::Activation::Relu, 0);
  net.weights[0] << 1.0, 0.5, -1.0, 0.25;
  net.biases[0] << 0.1, -0.2;
  net.weights[1] << 2.0, 3.0;
  net.biases[1] << 0.0;
  VectorXd input(2);
  input << 1.0, 1.0;  // pre-activations: 1.6 (active), -0.95 (inactive)
  VectorXd upstream(1);
  upstream << 1.0;
  const hjb::ParamGrad grad = hjb::backward_params(net, input, upstream);
  // Output = 2 * relu(1.6) + 3 * relu(-0.95) = 3.2.
  CHECK(hjb::forward(net, input)(0) == doctest::Approx(3.2).epsilon(1e-15));
  CHECK(grad.d_weights[1](0, 0) == 1.6);  // d out / d W2[0,0] = relu(1.6)
  CHECK(grad.d_weights[1](0, 1) == 0.0);  // inactive unit
  CHECK(grad.d_weights[0](0, 0) == 2.0);  // 2 * input(0) through the active unit
  CHECK(grad.d_weights[0](1, 0) == 0.0);  // gradient blocked by the dead unit
  CHECK(grad.d_biases[0](0) == 2.0);
  CHECK(grad.d_biases[0](1) == 0.0);
}

TEST_CASE("reverse mode is linear and vanishes at zero upstream") {
  std::mt19937_64 rng(77);
  const hjb::Mlp net = hjb::init_params({3, 6, 2}, hjb::Activation::Tanh, 7);
  const VectorXd input = random_vector(3, rng);
  const VectorXd u1 = random_vector(2, rng);
  const VectorXd u2 = random_vector(2, rng);

  const hjb::ParamGrad zero = hjb::backward_params(net, input, VectorXd::Zero(2));
  for (const auto& w : zero.d_weights) CHECK(w.norm() == 0.0);

  const hjb::ParamGrad g1 = hjb::backward_params(net, input, u1);
  const hjb::ParamGrad g2 = hjb::backward_params(net, input, u2);
  const hjb::ParamGrad gsum = hjb::backward_params(net, input, 2.0 * u1 + u2);
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const MatrixXd want = 2.0 * g1.d_weights[l] + g2.d_weights[l];
    CHECK((gsum.d_weights[l] - want).norm() < 1e-12 * (1.0 + want.norm()));
  }
}

TEST_CASE("linear-layer gradients have their textbook closed form") {
  hjb::Mlp net = hjb::init_params({3, 1}, hjb::Activation::Tanh, 0);
  net.weights[0] << 0.5, -1.0, 2.0;
  net.biases[0](0) = 0.25;
  VectorXd input(3);
  input << 1.0, 2.0, -3.0;
  VectorXd upstream(1);
  upstream << 1.0;
  const hjb::ParamGrad grad = hjb::backward_params(net, input, upstream);
  CHECK((grad.d_weights[0].transpose() - input).norm() == 0.0);
  CHECK(grad.d_biases[0](0) == 1.0);
}

TEST_CASE("time-dual forward returns the exact column of a linear layer") {
  hjb::Mlp net = hjb::init_params({3, 2}, hjb::Activation::Tanh, 1);
  const auto [value, tangent] = hjb::forward_dual_t(net, VectorXd::Ones(3), 1);
  CHECK((tangent - net.weights[0].col(1)).norm() == 0.0);
  CHECK((value - hjb::forward(net, VectorXd::Ones(3))).norm() == 0.0);
}

TEST_CASE("time-dual derivative matches finite differences") {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 5; ++trial) {
    const hjb::Mlp net =
        hjb::init_params({3, 10, 10, 2}, hjb::Activation::Tanh, 900 + trial);
    VectorXd input = random_vector(3, rng);
    const auto [value, tangent] = hjb::forward_dual_t(net, input, 0);
    CHECK((value - hjb::forward(net, input)).norm() == 0.0);

    const double delta = 1e-6;
    VectorXd up = input, down = input;
    up(0) += delta;
    down(0) -= delta;
    const VectorXd fd = (hjb::forward(net, up) - hjb::forward(net, down)) / (2.0 * delta);
    for (int i = 0; i < 2; ++i) check_close(tangent(i), fd(i), 1e-6, 1e-9);
  }
}

TEST_CASE("time-dual derivative is zero when the net ignores that input") {
  hjb::Mlp net = hjb::init_params({3, 5, 1}, hjb::Activation::Tanh, 3);
  net.weights[0].col(0).setZero();
  std::mt19937_64 rng(4);
  const auto [value, tangent] = hjb::forward_dual_t(net, random_vector(3, rng), 0);
  (void)value;
  CHECK(tangent.norm() == 0.0);
}

TEST_CASE("reverse mode through the dual pass matches finite differences") {
  std::mt19937_64 rng(321);
  for (auto activation : {hjb::Activation::Tanh, hjb::Activation::Sin}) {
    hjb::Mlp net = hjb::init_params({3, 7, 6, 2}, activation, 31);
    MatrixXd inputs(3, 4);
    for (int j = 0; j < 4; ++j) inputs.col(j) = random_vector(3, rng);
    MatrixXd uv(2, 4), ut(2, 4);
    for (int j = 0; j < 4; ++j) {
      uv.col(j) = random_vector(2, rng);
      ut.col(j) = random_vector(2, rng);
    }
    const auto objective = [&]() {
      auto [value, tangent] = hjb::forward_dual_batch(net, inputs, 0, nullptr);
      return (uv.cwiseProduct(value) + ut.cwiseProduct(tangent)).sum();
    };
    hjb::DualTrace trace;
    hjb::forward_dual_batch(net, inputs, 0, &trace);
    hjb::ParamGrad grad = hjb::ParamGrad::zeros_like(net);
    hjb::backward_dual_batch(net, trace, uv, ut, grad);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      for (int i = 0; i < net.weights[l].rows(); ++i)
        for (int j = 0; j < net.weights[l].cols(); ++j)
          check_close(grad.d_weights[l](i, j),
                      fd_of_param(net.weights[l](i, j), objective), 2e-5, 1e-7);
      for (int i = 0; i < net.biases[l].size(); ++i)
        check_close(grad.d_biases[l](i), fd_of_param(net.biases[l](i), objective), 2e-5,
                    1e-7);
    }
  }
}

TEST_CASE("adam first step moves by about -lr * sign(gradient)") {
  hjb::Mlp net = hjb::init_params({1, 1}, hjb::Activation::Tanh, 0);
  net.weights[0](0, 0) = 0.5;
  hjb::AdamState state = hjb::AdamState::zeros_like(net, 0.1);
  hjb::ParamGrad grad = hjb::ParamGrad::zeros_like(net);
  grad.d_weights[0](0, 0) = 3.0;
  hjb::adam_step(state, net, grad);
  CHECK(net.weights[0](0, 0) == doctest::Approx(0.5 - 0.1).epsilon(1e-6));
  CHECK(state.step == 1);
}

TEST_CASE("adam leaves parameters unchanged on a zero gradient") {
  hjb::Mlp net = hjb::init_params({2, 3, 1}, hjb::Activation::Tanh, 8);
  const hjb::Mlp before = net;
  hjb::AdamState state = hjb::AdamState::zeros_like(net);
  const hjb::ParamGrad grad = hjb::ParamGrad::zeros_like(net);
  hjb::adam_step(state, net, grad);
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    CHECK((net.weights[l] - before.weights[l]).norm() == 0.0);
    CHECK(state.m_weights[l].norm() == 0.0);
    CHECK(state.v_weights[l].norm() == 0.0);
  }
}

TEST_CASE("adam reproduces the scalar recurrence over two steps") {
  hjb::Mlp net = hjb::init_params({1, 1}, hjb::Activation::Tanh, 0);
  net.weights[0](0, 0) = 1.0;
  hjb::AdamState state = hjb::AdamState::zeros_like(net, 0.1);
  hjb::ParamGrad grad = hjb::ParamGrad::zeros_like(net);
  const double g = -0.7;
  grad.d_weights[0](0, 0) = g;

  // Hand recurrence with lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8.
  double theta = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mhat = m / (1.0 - std::pow(0.9, t));
    const double vhat = v / (1.0 - std::pow(0.999, t));
    theta -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
    hjb::adam_step(state, net, grad);
  }
  CHECK(net.weights[0](0, 0) == doctest::Approx(theta).epsilon(1e-15));
  CHECK(state.step == 2);
}

TEST_CASE("adam is deterministic for identical inputs") {
  const hjb::Mlp base = hjb::init_params({2, 4, 1}, hjb::Activation::Tanh, 12);
  std::mt19937_64 rng(13);
  hjb::ParamGrad grad = hjb::ParamGrad::zeros_like(base);
  for (auto& w : grad.d_weights)
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) w(i, j) = random_vector(1, rng)(0);

  hjb::Mlp a = base, b = base;
  hjb::AdamState sa = hjb::AdamState::zeros_like(base);
  hjb::AdamState sb = hjb::AdamState::zeros_like(base);
  hjb::adam_step(sa, a, grad);
  hjb::adam_step(sb, b, grad);
  for (std::size_t l = 0; l < a.weights.size(); ++l)
    CHECK((a.weights[l] - b.weights[l]).norm() == 0.0);
}

TEST_CASE("glorot initialization is seeded and bounded") {
  const auto a = hjb::init_params({10, 20, 5}, hjb::Activation::Tanh, 99);
  const auto b = hjb::init_params({10, 20, 5}, hjb::Activation::Tanh, 99);
  const auto c = hjb::init_params({10, 20, 5}, hjb::Activation::Tanh, 100);
  bool identical = true, differs = false;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    identical = identical && (a.weights[l] - b.weights[l]).norm() == 0.0;
    differs = differs || (a.weights[l] - c.weights[l]).norm() > 0.0;
    const double bound = std::sqrt(6.0 / (a.widths[l] + a.widths[l + 1]));
    CHECK(a.weights[l].cwiseAbs().maxCoeff() <= bound);
    CHECK(a.biases[l].norm() == 0.0);
  }
  CHECK(identical);
  CHECK(differs);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  const auto net = hjb::init_params({4, 9, 3}, hjb::Activation::Sin, 2024);
  std::stringstream stream;
  hjb::save_mlp(stream, net);
  const hjb::Mlp loaded = hjb::load_mlp(stream);
  CHECK(loaded.widths == net.widths);
  CHECK(loaded.activation == net.activation);
  CHECK(loaded.seed == net.seed);
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    CHECK(loaded.weights[l] == net.weights[l]);
    CHECK(loaded.biases[l] == net.biases[l]);
  }
  std::stringstream garbage("not a checkpoint");
  CHECK_THROWS_AS(hjb::load_mlp(garbage), hjb::Error);
}

TEST_CASE("the process-wide optimizer step counter is monotone") {
  const auto before = hjb::adam_total_steps();
  hjb::Mlp net = hjb::init_params({1, 1}, hjb::Activation::Tanh, 0);
  hjb::AdamState state = hjb::AdamState::zeros_like(net);
  hjb::adam_step(state, net, hjb::ParamGrad::zeros_like(net));
  CHECK(hjb::adam_total_steps() == before + 1);
}
