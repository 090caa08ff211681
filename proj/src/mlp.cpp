#include "hjb/mlp.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace hjb {
namespace {

std::atomic<std::uint64_t> g_adam_steps{0};

// One affine layer, evaluated column by column so that batched results are
// bitwise identical to single-sample evaluation (the GEMM kernel rounds
// differently from the per-column GEMV path on narrow layers). The _into
// variants reuse the destination's storage; the training loop calls them
// every epoch with identical shapes.
void product_columns_into(Eigen::MatrixXd& z, const Eigen::MatrixXd& w,
                          const Eigen::MatrixXd& a) {
  z.resize(w.rows(), a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) z.col(j).noalias() = w * a.col(j);
}

void affine_columns_into(Eigen::MatrixXd& z, const Eigen::MatrixXd& w,
                         const Eigen::VectorXd& b, const Eigen::MatrixXd& a) {
  product_columns_into(z, w, a);
  z.colwise() += b;
}

Eigen::MatrixXd affine_columns(const Eigen::MatrixXd& w, const Eigen::VectorXd& b,
                               const Eigen::MatrixXd& a) {
  Eigen::MatrixXd z;
  affine_columns_into(z, w, b, a);
  return z;
}

Eigen::MatrixXd product_columns(const Eigen::MatrixXd& w, const Eigen::MatrixXd& a) {
  Eigen::MatrixXd z;
  product_columns_into(z, w, a);
  return z;
}

void check_layer_shapes(const Mlp& net) {
  if (net.widths.size() < 2) throw ShapeMismatch("mlp needs at least input and output widths");
  if (net.weights.size() + 1 != net.widths.size() || net.biases.size() != net.weights.size())
    throw ShapeMismatch("mlp parameter count does not match widths");
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    if (net.weights[l].rows() != net.widths[l + 1] || net.weights[l].cols() != net.widths[l])
      throw ShapeMismatch("mlp weight shape mismatch at layer " + std::to_string(l));
    if (net.biases[l].size() != net.widths[l + 1])
      throw ShapeMismatch("mlp bias shape mismatch at layer " + std::to_string(l));
  }
}

// tanh through the vectorized exponential: the scalar std::tanh fallback for
// doubles costs more than the layer products. Computed column by column so
// packet/tail grouping (and hence rounding) matches single-sample calls.
void fast_tanh_into(Eigen::MatrixXd& out, const Eigen::MatrixXd& z) {
  out.resize(z.rows(), z.cols());
  thread_local Eigen::ArrayXd t;
  t.resize(z.rows());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    t = (2.0 * z.col(j).array().min(20.0).max(-20.0)).exp();
    out.col(j) = ((t - 1.0) / (t + 1.0)).matrix();
  }
}

Eigen::MatrixXd fast_tanh(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd out;
  fast_tanh_into(out, z);
  return out;
}

void activate_into(Eigen::MatrixXd& out, const Eigen::MatrixXd& z, Activation activation) {
  switch (activation) {
    case Activation::Tanh:
      fast_tanh_into(out, z);
      return;
    case Activation::Relu:
      out = z.array().max(0.0).matrix();
      return;
    case Activation::Sin:
      out = z.array().sin().matrix();
      return;
  }
  throw Error("unknown activation");
}

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation activation) {
  Eigen::MatrixXd out;
  activate_into(out, z, activation);
  return out;
}

// First derivative, expressed through pre-activation z and activation a.
Eigen::MatrixXd activate_d1(const Eigen::MatrixXd& z, const Eigen::MatrixXd& a,
                            Activation activation) {
  switch (activation) {
    case Activation::Tanh:
      return (1.0 - a.array().square()).matrix();
    case Activation::Relu:
      return (z.array() > 0.0).cast<double>().matrix();
    case Activation::Sin:
      return z.array().cos().matrix();
  }
  throw Error("unknown activation");
}

// Second derivative; needed when the tangent channel joins the reverse sweep.
Eigen::MatrixXd activate_d2(const Eigen::MatrixXd& z, const Eigen::MatrixXd& a,
                            Activation activation) {
  switch (activation) {
    case Activation::Tanh:
      return (-2.0 * a.array() * (1.0 - a.array().square())).matrix();
    case Activation::Relu:
      return Eigen::MatrixXd::Zero(z.rows(), z.cols());
    case Activation::Sin:
      return (-a.array()).matrix();
  }
  throw Error("unknown activation");
}

template <class T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error("truncated checkpoint stream");
  return value;
}

constexpr char kMlpMagic[8] = {'H', 'J', 'B', 'M', 'L', 'P', '0', '\n'};
constexpr std::uint32_t kMlpVersion = 1;

}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "sin") return Activation::Sin;
  throw Error("unknown activation: " + name);
}

std::string to_string(Activation activation) {
  switch (activation) {
    case Activation::Tanh:
      return "tanh";
    case Activation::Relu:
      return "relu";
    case Activation::Sin:
      return "sin";
  }
  throw Error("unknown activation");
}

std::size_t Mlp::param_count() const {
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
    count += static_cast<std::size_t>(widths[l]) * widths[l + 1] + widths[l + 1];
  return count;
}

Mlp init_params(const std::vector<int>& widths, Activation activation, std::uint64_t seed) {
  if (widths.size() < 2) throw ShapeMismatch("mlp needs at least input and output widths");
  for (int w : widths)
    if (w < 1) throw ShapeMismatch("mlp widths must be positive");
  Mlp net;
  net.widths = widths;
  net.activation = activation;
  net.seed = seed;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i)
      for (int j = 0; j < fan_in; ++j) w(i, j) = uniform(rng);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return net;
}

ParamGrad ParamGrad::zeros_like(const Mlp& net) {
  ParamGrad grad;
  for (const auto& w : net.weights)
    grad.d_weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& b : net.biases) grad.d_biases.push_back(Eigen::VectorXd::Zero(b.size()));
  return grad;
}

void ParamGrad::reset() {
  for (auto& w : d_weights) w.setZero();
  for (auto& b : d_biases) b.setZero();
  accumulated = 0;
}

Eigen::MatrixXd forward_batch(const Mlp& net, const Eigen::MatrixXd& inputs,
                              ForwardTrace* trace) {
  check_layer_shapes(net);
  if (inputs.rows() != net.input_dim())
    throw ShapeMismatch("forward: input rows != network input width");
  const int layers = net.layer_count();
  if (!trace) {
    Eigen::MatrixXd a = inputs;
    for (int l = 0; l < layers; ++l) {
      Eigen::MatrixXd z = affine_columns(net.weights[l], net.biases[l], a);
      a = (l + 1 == layers) ? std::move(z) : activate(z, net.activation);
    }
    return a;
  }
  // The trace owns every intermediate and its storage is reused on repeated
  // calls with the same shapes (every epoch of a training loop).
  trace->activations.resize(layers + 1);
  trace->pre_activations.resize(layers);
  trace->activations[0] = inputs;
  for (int l = 0; l < layers; ++l) {
    affine_columns_into(trace->pre_activations[l], net.weights[l], net.biases[l],
                        trace->activations[l]);
    if (l + 1 == layers)
      trace->activations[l + 1] = trace->pre_activations[l];
    else
      activate_into(trace->activations[l + 1], trace->pre_activations[l], net.activation);
  }
  return trace->activations.back();
}

Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& input) {
  return forward_batch(net, input);
}

void backward_batch(const Mlp& net, const ForwardTrace& trace,
                    const Eigen::MatrixXd& upstream, ParamGrad& into) {
  const int layers = net.layer_count();
  if (static_cast<int>(trace.activations.size()) != layers + 1)
    throw ShapeMismatch("backward: trace does not match network depth");
  if (upstream.rows() != net.output_dim() ||
      upstream.cols() != trace.activations.back().cols())
    throw ShapeMismatch("backward: upstream shape mismatch");
  thread_local Eigen::MatrixXd grad_a, lambda;
  grad_a = upstream;
  for (int l = layers - 1; l >= 0; --l) {
    if (l + 1 == layers) {
      lambda = grad_a;
    } else {
      lambda = activate_d1(trace.pre_activations[l], trace.activations[l + 1], net.activation)
                   .cwiseProduct(grad_a);
    }
    into.d_weights[l].noalias() += lambda * trace.activations[l].transpose();
    into.d_biases[l] += lambda.rowwise().sum();
    if (l > 0) {
      grad_a.resize(net.weights[l].cols(), lambda.cols());
      grad_a.noalias() = net.weights[l].transpose() * lambda;
    }
  }
  into.accumulated += static_cast<long>(upstream.cols());
}

ParamGrad backward_params(const Mlp& net, const Eigen::VectorXd& input,
                          const Eigen::VectorXd& upstream) {
  ForwardTrace trace;
  forward_batch(net, input, &trace);
  ParamGrad grad = ParamGrad::zeros_like(net);
  backward_batch(net, trace, upstream, grad);
  return grad;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> forward_dual_batch(const Mlp& net,
                                                               const Eigen::MatrixXd& inputs,
                                                               int t_index, DualTrace* trace) {
  check_layer_shapes(net);
  if (inputs.rows() != net.input_dim())
    throw ShapeMismatch("forward_dual: input rows != network input width");
  if (t_index < 0 || t_index >= net.input_dim())
    throw ShapeMismatch("forward_dual: t_index out of range");
  const int layers = net.layer_count();
  Eigen::MatrixXd seed_tangent = Eigen::MatrixXd::Zero(inputs.rows(), inputs.cols());
  seed_tangent.row(t_index).setOnes();
  if (!trace) {
    Eigen::MatrixXd a = inputs;
    Eigen::MatrixXd da = std::move(seed_tangent);
    for (int l = 0; l < layers; ++l) {
      Eigen::MatrixXd z = affine_columns(net.weights[l], net.biases[l], a);
      Eigen::MatrixXd dz = product_columns(net.weights[l], da);
      if (l + 1 == layers) {
        a = std::move(z);
        da = std::move(dz);
      } else {
        a = activate(z, net.activation);
        da = activate_d1(z, a, net.activation).cwiseProduct(dz);
      }
    }
    return {a, da};
  }
  trace->primal.activations.resize(layers + 1);
  trace->primal.pre_activations.resize(layers);
  trace->activation_tangents.resize(layers + 1);
  trace->pre_activation_tangents.resize(layers);
  trace->primal.activations[0] = inputs;
  trace->activation_tangents[0] = std::move(seed_tangent);
  for (int l = 0; l < layers; ++l) {
    affine_columns_into(trace->primal.pre_activations[l], net.weights[l], net.biases[l],
                        trace->primal.activations[l]);
    product_columns_into(trace->pre_activation_tangents[l], net.weights[l],
                         trace->activation_tangents[l]);
    const Eigen::MatrixXd& z = trace->primal.pre_activations[l];
    const Eigen::MatrixXd& dz = trace->pre_activation_tangents[l];
    if (l + 1 == layers) {
      trace->primal.activations[l + 1] = z;
      trace->activation_tangents[l + 1] = dz;
    } else {
      activate_into(trace->primal.activations[l + 1], z, net.activation);
      trace->activation_tangents[l + 1] =
          activate_d1(z, trace->primal.activations[l + 1], net.activation)
              .cwiseProduct(dz);
    }
  }
  return {trace->primal.activations.back(), trace->activation_tangents.back()};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> forward_dual_t(const Mlp& net,
                                                           const Eigen::VectorXd& input,
                                                           int t_index) {
  auto [value, tangent] = forward_dual_batch(net, input, t_index);
  return {Eigen::VectorXd(value.col(0)), Eigen::VectorXd(tangent.col(0))};
}

void backward_dual_batch(const Mlp& net, const DualTrace& trace,
                         const Eigen::MatrixXd& upstream_value,
                         const Eigen::MatrixXd& upstream_tangent, ParamGrad& into) {
  const int layers = net.layer_count();
  const auto& acts = trace.primal.activations;
  if (static_cast<int>(acts.size()) != layers + 1)
    throw ShapeMismatch("backward_dual: trace does not match network depth");
  if (upstream_value.rows() != net.output_dim() ||
      upstream_tangent.rows() != net.output_dim() ||
      upstream_value.cols() != acts.back().cols() ||
      upstream_tangent.cols() != acts.back().cols())
    throw ShapeMismatch("backward_dual: upstream shape mismatch");

  thread_local Eigen::MatrixXd grad_a, grad_da, lambda_z, lambda_dz, d1;
  grad_a = upstream_value;    // adjoint of the value channel
  grad_da = upstream_tangent; // adjoint of the tangent channel
  for (int l = layers - 1; l >= 0; --l) {
    if (l + 1 == layers) {
      lambda_z = grad_a;
      lambda_dz = grad_da;
    } else {
      const auto& z = trace.primal.pre_activations[l];
      const auto& a = acts[l + 1];
      d1 = activate_d1(z, a, net.activation);
      // The tangent update da' = act'(z) .* dz feeds the curvature of the
      // activation back into the value-channel adjoint.
      lambda_z = d1.cwiseProduct(grad_a) +
                 activate_d2(z, a, net.activation)
                     .cwiseProduct(trace.pre_activation_tangents[l])
                     .cwiseProduct(grad_da);
      lambda_dz = d1.cwiseProduct(grad_da);
    }
    into.d_weights[l].noalias() += lambda_z * acts[l].transpose();
    into.d_weights[l].noalias() += lambda_dz * trace.activation_tangents[l].transpose();
    into.d_biases[l] += lambda_z.rowwise().sum();
    if (l > 0) {
      grad_a.resize(net.weights[l].cols(), lambda_z.cols());
      grad_a.noalias() = net.weights[l].transpose() * lambda_z;
      grad_da.resize(net.weights[l].cols(), lambda_dz.cols());
      grad_da.noalias() = net.weights[l].transpose() * lambda_dz;
    }
  }
  into.accumulated += static_cast<long>(upstream_value.cols());
}

AdamState AdamState::zeros_like(const Mlp& net, double lr) {
  AdamState state;
  state.lr = lr;
  for (const auto& w : net.weights) {
    state.m_weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    state.v_weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  }
  for (const auto& b : net.biases) {
    state.m_biases.push_back(Eigen::VectorXd::Zero(b.size()));
    state.v_biases.push_back(Eigen::VectorXd::Zero(b.size()));
  }
  return state;
}

void adam_step(AdamState& state, Mlp& net, const ParamGrad& grad) {
  if (state.m_weights.size() != net.weights.size() ||
      grad.d_weights.size() != net.weights.size())
    throw ShapeMismatch("adam: state/grad/net layer counts differ");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const auto update = [&](auto& m, auto& v, auto& theta, const auto& g) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v.array() = state.beta2 * v.array() + (1.0 - state.beta2) * g.array().square();
    theta.array() -= state.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.eps);
  };
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    if (grad.d_weights[l].rows() != net.weights[l].rows() ||
        grad.d_weights[l].cols() != net.weights[l].cols() ||
        grad.d_biases[l].size() != net.biases[l].size())
      throw ShapeMismatch("adam: gradient shape mismatch at layer " + std::to_string(l));
    update(state.m_weights[l], state.v_weights[l], net.weights[l], grad.d_weights[l]);
    update(state.m_biases[l], state.v_biases[l], net.biases[l], grad.d_biases[l]);
  }
  g_adam_steps.fetch_add(1, std::memory_order_relaxed);
}

std::uint64_t adam_total_steps() { return g_adam_steps.load(std::memory_order_relaxed); }

void save_mlp(std::ostream& out, const Mlp& net) {
  check_layer_shapes(net);
  out.write(kMlpMagic, sizeof(kMlpMagic));
  write_pod(out, kMlpVersion);
  write_pod(out, static_cast<std::uint32_t>(net.widths.size()));
  for (int w : net.widths) write_pod(out, static_cast<std::uint32_t>(w));
  write_pod(out, static_cast<std::uint32_t>(net.activation));
  write_pod(out, net.seed);
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const auto& w = net.weights[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) write_pod(out, w(i, j));
    for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) write_pod(out, net.biases[l](i));
  }
  if (!out) throw Error("failed writing mlp checkpoint");
}

Mlp load_mlp(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMlpMagic, sizeof(magic)) != 0)
    throw Error("bad mlp checkpoint magic");
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kMlpVersion)
    throw Error("unsupported mlp checkpoint version " + std::to_string(version));
  const auto width_count = read_pod<std::uint32_t>(in);
  if (width_count < 2 || width_count > 64) throw Error("implausible mlp width count");
  Mlp net;
  net.widths.resize(width_count);
  for (auto& w : net.widths) w = static_cast<int>(read_pod<std::uint32_t>(in));
  net.activation = static_cast<Activation>(read_pod<std::uint32_t>(in));
  net.seed = read_pod<std::uint64_t>(in);
  for (std::size_t l = 0; l + 1 < net.widths.size(); ++l) {
    Eigen::MatrixXd w(net.widths[l + 1], net.widths[l]);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = read_pod<double>(in);
    Eigen::VectorXd b(net.widths[l + 1]);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = read_pod<double>(in);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

void save_mlp_file(const std::string& path, const Mlp& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  save_mlp(out, net);
}

Mlp load_mlp_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return load_mlp(in);
}

}  // namespace hjb
