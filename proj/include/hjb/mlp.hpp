#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "hjb/errors.hpp"

namespace hjb {

enum class Activation { Tanh, Relu, Sin };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation activation);

/// Dense multilayer perceptron. Hidden layers apply the activation; the last
/// layer is affine. All arithmetic is in double precision.
struct Mlp {
  std::vector<int> widths;               // layer widths, input first
  std::vector<Eigen::MatrixXd> weights;  // weights[l]: widths[l+1] x widths[l]
  std::vector<Eigen::VectorXd> biases;   // biases[l]: widths[l+1]
  Activation activation = Activation::Tanh;
  std::uint64_t seed = 0;

  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
  int layer_count() const { return static_cast<int>(weights.size()); }
  std::size_t param_count() const;
};

/// Glorot-uniform weights, zero biases; fully determined by the seed.
Mlp init_params(const std::vector<int>& widths, Activation activation, std::uint64_t seed);

/// Parameter-shaped gradient accumulator.
struct ParamGrad {
  std::vector<Eigen::MatrixXd> d_weights;
  std::vector<Eigen::VectorXd> d_biases;
  long accumulated = 0;

  static ParamGrad zeros_like(const Mlp& net);
  void reset();
};

/// Per-layer states of a batched forward pass; columns are samples.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> activations;      // layer_count()+1 entries, [0] = input
  std::vector<Eigen::MatrixXd> pre_activations;  // layer_count() entries
};

/// Forward trace plus the tangent channel of a dual forward pass.
struct DualTrace {
  ForwardTrace primal;
  std::vector<Eigen::MatrixXd> activation_tangents;
  std::vector<Eigen::MatrixXd> pre_activation_tangents;
};

Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& input);
Eigen::MatrixXd forward_batch(const Mlp& net, const Eigen::MatrixXd& inputs,
                              ForwardTrace* trace = nullptr);

/// Exact reverse-mode gradient of upstream . output w.r.t. every parameter.
ParamGrad backward_params(const Mlp& net, const Eigen::VectorXd& input,
                          const Eigen::VectorXd& upstream);

/// Batched reverse mode over a recorded forward trace; accumulates into
/// `into` with one fixed-order reduction per layer.
void backward_batch(const Mlp& net, const ForwardTrace& trace,
                    const Eigen::MatrixXd& upstream, ParamGrad& into);

/// Forward pass carrying d(output)/d(input[t_index]) as a tangent channel.
/// The value channel is bitwise identical to forward().
std::pair<Eigen::VectorXd, Eigen::VectorXd> forward_dual_t(const Mlp& net,
                                                           const Eigen::VectorXd& input,
                                                           int t_index);
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> forward_dual_batch(const Mlp& net,
                                                               const Eigen::MatrixXd& inputs,
                                                               int t_index,
                                                               DualTrace* trace = nullptr);

/// Reverse mode through the dual forward pass: gradient w.r.t. parameters of
///   sum_j upstream_value_j . output_j + upstream_tangent_j . d(output_j)/dt.
/// The tangent channel participates in the reverse sweep, so no nested
/// differentiation is needed.
void backward_dual_batch(const Mlp& net, const DualTrace& trace,
                         const Eigen::MatrixXd& upstream_value,
                         const Eigen::MatrixXd& upstream_tangent, ParamGrad& into);

/// Adam with bias correction. Moments start at zero; the step counter
/// increments by exactly one per call.
struct AdamState {
  std::vector<Eigen::MatrixXd> m_weights, v_weights;
  std::vector<Eigen::VectorXd> m_biases, v_biases;
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState zeros_like(const Mlp& net, double lr = 1e-3);
};

void adam_step(AdamState& state, Mlp& net, const ParamGrad& grad);

/// Process-wide count of adam_step calls; lets callers audit that inference
/// paths perform zero optimizer steps.
std::uint64_t adam_total_steps();

/// Versioned binary checkpoint: widths, activation tag, seed, parameters in
/// row-major layer order. Round-trips bit-exactly.
void save_mlp(std::ostream& out, const Mlp& net);
Mlp load_mlp(std::istream& in);
void save_mlp_file(const std::string& path, const Mlp& net);
Mlp load_mlp_file(const std::string& path);

}  // namespace hjb
