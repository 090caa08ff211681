#include "hjb/deeponet.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "hjb/stencil.hpp"

namespace hjb {
namespace {

template <class T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error("truncated operator checkpoint");
  return value;
}

constexpr char kOperatorMagic[8] = {'H', 'J', 'B', 'O', 'P', 'R', '0', '\n'};
constexpr std::uint32_t kOperatorVersion = 1;

Eigen::MatrixXd stack_sensor_values(const OperatorNetwork& net,
                                    const std::vector<TerminalCondition>& g_set) {
  Eigen::MatrixXd inputs(net.sensor_points.cols(), static_cast<Eigen::Index>(g_set.size()));
  for (std::size_t k = 0; k < g_set.size(); ++k) {
    check_sensors(net, g_set[k]);
    inputs.col(static_cast<Eigen::Index>(k)) = g_set[k].sensor_values;
  }
  return inputs;
}

// Residuals, terminal mismatch, and (optionally) parameter gradients of the
// weighted loss on one collocation set. This single code path backs the
// public loss/gradient entry points, the training loop, and the sup
// estimates.
struct AssembledLosses {
  double loss1 = 0.0;
  double loss2 = 0.0;
  double max_abs_residual = 0.0;
  double max_abs_mismatch = 0.0;
};

AssembledLosses assemble_losses(const OperatorNetwork& net,
                                const std::vector<TerminalCondition>& g_set,
                                const TrainPolicy& policy, const CollocationSet& colloc,
                                double h, double viscosity_factor,
                                const ControlProblem& problem, double alpha1,
                                double alpha2, ParamGrad* branch_grad,
                                ParamGrad* trunk_grad) {
  const int d = problem.state_dim;
  const int K = static_cast<int>(g_set.size());
  const int nt = static_cast<int>(colloc.interior_times.size());
  const int n0 = static_cast<int>(colloc.terminal_states.cols());
  if (K == 0) throw EmptyCollocation("terminal-condition batch is empty");
  if (nt == 0 || n0 == 0) throw EmptyCollocation("collocation set is empty");
  if (colloc.interior_states.rows() != d || colloc.terminal_states.rows() != d)
    throw ShapeMismatch("collocation dimension does not match the problem");
  const bool with_grads = branch_grad != nullptr && trunk_grad != nullptr;

  const Eigen::MatrixXd sensor_inputs = stack_sensor_values(net, g_set);

  ForwardTrace branch_trace;
  const Eigen::MatrixXd branch_out =
      forward_batch(net.branch, sensor_inputs, with_grads ? &branch_trace : nullptr);

  // Trunk inputs: the collocation centers, one shifted copy per stencil leg,
  // and the terminal slice.
  Eigen::MatrixXd centers(1 + d, nt);
  centers.row(0) = colloc.interior_times.transpose();
  centers.bottomRows(d) = colloc.interior_states;

  std::vector<Eigen::MatrixXd> leg_inputs(2 * d);
  for (int i = 0; i < d; ++i) {
    leg_inputs[2 * i] = centers;
    leg_inputs[2 * i].row(1 + i).array() += h;
    leg_inputs[2 * i + 1] = centers;
    leg_inputs[2 * i + 1].row(1 + i).array() -= h;
  }

  Eigen::MatrixXd terminal_inputs(1 + d, n0);
  terminal_inputs.row(0).setConstant(problem.horizon);
  terminal_inputs.bottomRows(d) = colloc.terminal_states;

  DualTrace center_trace;
  auto [center_values, center_tangents] =
      forward_dual_batch(net.trunk, centers, 0, with_grads ? &center_trace : nullptr);

  std::vector<Eigen::MatrixXd> leg_values(2 * d);
  std::vector<ForwardTrace> leg_traces(with_grads ? 2 * d : 0);
  for (int s = 0; s < 2 * d; ++s)
    leg_values[s] =
        forward_batch(net.trunk, leg_inputs[s], with_grads ? &leg_traces[s] : nullptr);

  ForwardTrace terminal_trace;
  const Eigen::MatrixXd terminal_values =
      forward_batch(net.trunk, terminal_inputs, with_grads ? &terminal_trace : nullptr);

  // Controls, dynamics, and running costs per point and terminal condition.
  std::vector<Eigen::MatrixXd> dynamics_values(K, Eigen::MatrixXd(d, nt));
  Eigen::MatrixXd running_costs(nt, K);
  if (policy.is_constant()) {
    const Eigen::VectorXd& u0 = policy.constant_control();
    for (int i = 0; i < nt; ++i) {
      const double t = colloc.interior_times(i);
      const Eigen::VectorXd x = colloc.interior_states.col(i);
      const Eigen::VectorXd f = problem.dynamics(t, x, u0);
      const double cost = problem.running_cost(t, x, u0);
      for (int k = 0; k < K; ++k) {
        dynamics_values[k].col(i) = f;
        running_costs(i, k) = cost;
      }
    }
  } else {
    const OperatorNetwork& prev = policy.previous();
    const Eigen::MatrixXd prev_branch =
        forward_batch(prev.branch, stack_sensor_values(prev, g_set));
    // The previous iterate's gradient combines its trunk stencil legs with
    // its branch coefficients; legs are shared across terminal conditions.
    std::vector<Eigen::MatrixXd> prev_leg(2 * d);
    for (int s = 0; s < 2 * d; ++s)
      prev_leg[s] = forward_batch(prev.trunk, leg_inputs[s]).transpose() * prev_branch;
    Eigen::VectorXd grad(d);
    for (int i = 0; i < nt; ++i) {
      const double t = colloc.interior_times(i);
      const Eigen::VectorXd x = colloc.interior_states.col(i);
      for (int k = 0; k < K; ++k) {
        for (int dim = 0; dim < d; ++dim)
          grad(dim) = (prev_leg[2 * dim](i, k) - prev_leg[2 * dim + 1](i, k)) / (2.0 * h);
        const Eigen::VectorXd u = argmin_control(problem, t, x, grad, policy.argmin());
        dynamics_values[k].col(i) = problem.dynamics(t, x, u);
        running_costs(i, k) = problem.running_cost(t, x, u);
      }
    }
  }

  // Inner products with the branch coefficients.
  const Eigen::MatrixXd center_dot = center_values.transpose() * branch_out;    // nt x K
  const Eigen::MatrixXd tangent_dot = center_tangents.transpose() * branch_out; // nt x K
  std::vector<Eigen::MatrixXd> leg_dot(2 * d);
  for (int s = 0; s < 2 * d; ++s) leg_dot[s] = leg_values[s].transpose() * branch_out;
  const Eigen::MatrixXd terminal_dot = terminal_values.transpose() * branch_out; // n0 x K

  const double inv_2h = 1.0 / (2.0 * h);
  const double visc_over_h = viscosity_factor / h;  // (N h) / h^2

  Eigen::MatrixXd residuals(nt, K);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < nt; ++i) {
      double advection = 0.0, lap_sum = 0.0;
      for (int dim = 0; dim < d; ++dim) {
        const double up = leg_dot[2 * dim](i, k);
        const double down = leg_dot[2 * dim + 1](i, k);
        advection += dynamics_values[k](dim, i) * (up - down) * inv_2h;
        lap_sum += up + down;
      }
      const double diffusion = (lap_sum - 2.0 * d * center_dot(i, k)) * visc_over_h;
      residuals(i, k) = tangent_dot(i, k) + running_costs(i, k) + advection + diffusion;
    }

  Eigen::MatrixXd mismatch(n0, K);
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < n0; ++j)
      mismatch(j, k) =
          terminal_dot(j, k) - g_set[k].evaluator(colloc.terminal_states.col(j));

  AssembledLosses out;
  out.loss1 = residuals.squaredNorm() / (static_cast<double>(nt) * K);
  out.loss2 = mismatch.squaredNorm() / (static_cast<double>(n0) * K);
  out.max_abs_residual = residuals.cwiseAbs().maxCoeff();
  out.max_abs_mismatch = mismatch.cwiseAbs().maxCoeff();
  if (!with_grads) return out;

  const double res_scale = 2.0 * alpha1 / (static_cast<double>(nt) * K);
  const double mis_scale = 2.0 * alpha2 / (static_cast<double>(n0) * K);
  const Eigen::MatrixXd res_bar = res_scale * residuals;   // nt x K
  const Eigen::MatrixXd mis_bar = mis_scale * mismatch;    // n0 x K
  const Eigen::MatrixXd center_w = (-2.0 * d * visc_over_h) * res_bar;

  // Branch upstream: every term of the residual and terminal mismatch is
  // bilinear in (branch, trunk), so the branch sees trunk-value-weighted
  // residual sums.
  Eigen::MatrixXd branch_upstream = center_tangents * res_bar + center_values * center_w +
                                    terminal_values * mis_bar;  // p x K

  for (int dim = 0; dim < d; ++dim) {
    for (int sign = 0; sign < 2; ++sign) {
      const int s = 2 * dim + sign;
      const double dir = sign == 0 ? 1.0 : -1.0;
      Eigen::MatrixXd leg_w(nt, K);
      for (int k = 0; k < K; ++k)
        for (int i = 0; i < nt; ++i)
          leg_w(i, k) =
              res_bar(i, k) * (dir * dynamics_values[k](dim, i) * inv_2h + visc_over_h);
      branch_upstream.noalias() += leg_values[s] * leg_w;
      const Eigen::MatrixXd leg_upstream = branch_out * leg_w.transpose();  // p x nt
      backward_batch(net.trunk, leg_traces[s], leg_upstream, *trunk_grad);
    }
  }

  const Eigen::MatrixXd center_value_upstream = branch_out * center_w.transpose();
  const Eigen::MatrixXd center_tangent_upstream = branch_out * res_bar.transpose();
  backward_dual_batch(net.trunk, center_trace, center_value_upstream,
                      center_tangent_upstream, *trunk_grad);

  const Eigen::MatrixXd terminal_upstream = branch_out * mis_bar.transpose();
  backward_batch(net.trunk, terminal_trace, terminal_upstream, *trunk_grad);

  backward_batch(net.branch, branch_trace, branch_upstream, *branch_grad);
  return out;
}

}  // namespace

OperatorNetwork make_operator_network(const Eigen::MatrixXd& sensor_points,
                                      const std::vector<int>& branch_hidden,
                                      const std::vector<int>& trunk_hidden, int latent_dim,
                                      Activation activation, std::uint64_t seed) {
  if (sensor_points.cols() < 1) throw Error("operator network needs sensor points");
  if (latent_dim < 1) throw Error("latent width must be positive");
  OperatorNetwork net;
  net.sensor_points = sensor_points;
  net.latent_dim = latent_dim;
  std::vector<int> branch_widths{static_cast<int>(sensor_points.cols())};
  branch_widths.insert(branch_widths.end(), branch_hidden.begin(), branch_hidden.end());
  branch_widths.push_back(latent_dim);
  std::vector<int> trunk_widths{static_cast<int>(sensor_points.rows()) + 1};
  trunk_widths.insert(trunk_widths.end(), trunk_hidden.begin(), trunk_hidden.end());
  trunk_widths.push_back(latent_dim);
  net.branch = init_params(branch_widths, activation, seed);
  net.trunk = init_params(trunk_widths, activation, seed + 1);
  return net;
}

void check_sensors(const OperatorNetwork& net, const TerminalCondition& g) {
  if (g.sensor_points.rows() != net.sensor_points.rows() ||
      g.sensor_points.cols() != net.sensor_points.cols())
    throw SensorMismatch("terminal condition sensor layout differs from the network");
  if (g.sensor_points != net.sensor_points)
    throw SensorMismatch("terminal condition was sampled at different sensor points");
  if (g.sensor_values.size() != net.sensor_points.cols())
    throw SensorMismatch("sensor value count differs from the sensor layout");
}

double operator_eval(const OperatorNetwork& net, const TerminalCondition& g, double t,
                     const Eigen::VectorXd& x) {
  check_sensors(net, g);
  if (x.size() != net.sensor_points.rows())
    throw ShapeMismatch("query state dimension differs from the sensors");
  Eigen::VectorXd query(1 + x.size());
  query << t, x;
  return forward(net.branch, g.sensor_values).dot(forward(net.trunk, query));
}

std::pair<double, double> operator_eval_dt(const OperatorNetwork& net,
                                           const TerminalCondition& g, double t,
                                           const Eigen::VectorXd& x) {
  check_sensors(net, g);
  Eigen::VectorXd query(1 + x.size());
  query << t, x;
  const Eigen::VectorXd coeff = forward(net.branch, g.sensor_values);
  const auto [value, tangent] = forward_dual_t(net.trunk, query, 0);
  return {coeff.dot(value), coeff.dot(tangent)};
}

void save_operator(std::ostream& out, const OperatorNetwork& net) {
  out.write(kOperatorMagic, sizeof(kOperatorMagic));
  write_pod(out, kOperatorVersion);
  write_pod(out, static_cast<std::uint32_t>(net.latent_dim));
  write_pod(out, static_cast<std::uint32_t>(net.sensor_points.rows()));
  write_pod(out, static_cast<std::uint32_t>(net.sensor_points.cols()));
  for (Eigen::Index j = 0; j < net.sensor_points.cols(); ++j)
    for (Eigen::Index i = 0; i < net.sensor_points.rows(); ++i)
      write_pod(out, net.sensor_points(i, j));
  save_mlp(out, net.branch);
  save_mlp(out, net.trunk);
}

OperatorNetwork load_operator(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kOperatorMagic, sizeof(magic)) != 0)
    throw Error("bad operator checkpoint magic");
  if (read_pod<std::uint32_t>(in) != kOperatorVersion)
    throw Error("unsupported operator checkpoint version");
  OperatorNetwork net;
  net.latent_dim = static_cast<int>(read_pod<std::uint32_t>(in));
  const int d = static_cast<int>(read_pod<std::uint32_t>(in));
  const int k = static_cast<int>(read_pod<std::uint32_t>(in));
  if (d < 1 || d > 64 || k < 1 || k > 100000) throw Error("implausible sensor layout");
  net.sensor_points.resize(d, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < d; ++i) net.sensor_points(i, j) = read_pod<double>(in);
  net.branch = load_mlp(in);
  net.trunk = load_mlp(in);
  return net;
}

void save_operator_file(const std::string& path, const OperatorNetwork& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  save_operator(out, net);
}

OperatorNetwork load_operator_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return load_operator(in);
}

CollocationSet sample_collocation(const WorkingBox& box, double horizon, int n_interior,
                                  int n_terminal, std::mt19937_64& rng) {
  const int d = box.dim();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  CollocationSet colloc;
  colloc.interior_times.resize(n_interior);
  colloc.interior_states.resize(d, n_interior);
  for (int i = 0; i < n_interior; ++i) {
    colloc.interior_times(i) = unit(rng) * horizon;
    for (int dim = 0; dim < d; ++dim)
      colloc.interior_states(dim, i) =
          box.lo(dim) + unit(rng) * (box.hi(dim) - box.lo(dim));
  }
  colloc.terminal_states.resize(d, n_terminal);
  for (int j = 0; j < n_terminal; ++j)
    for (int dim = 0; dim < d; ++dim)
      colloc.terminal_states(dim, j) =
          box.lo(dim) + unit(rng) * (box.hi(dim) - box.lo(dim));
  return colloc;
}

double pde_residual(const OperatorNetwork& net, const TerminalCondition& g,
                    const PolicyFn& policy, double t, const Eigen::VectorXd& x, double h,
                    double viscosity_factor, const ControlProblem& problem) {
  check_sensors(net, g);
  const int d = problem.state_dim;
  const Eigen::VectorXd coeff = forward(net.branch, g.sensor_values);
  const auto field = [&](const Eigen::VectorXd& q) {
    Eigen::VectorXd query(1 + d);
    query << t, q;
    return coeff.dot(forward(net.trunk, query));
  };
  Eigen::VectorXd query(1 + d);
  query << t, x;
  const auto [value, tangent] = forward_dual_t(net.trunk, query, 0);
  (void)value;
  const double dv_dt = coeff.dot(tangent);

  const StencilConfig stencil(h, d);
  const Eigen::VectorXd grad = nabla_h(field, x, stencil);
  const double lap = laplace_h(field, x, stencil);

  const Eigen::VectorXd u = policy(t, x);
  return dv_dt + problem.running_cost(t, x, u) + grad.dot(problem.dynamics(t, x, u)) +
         viscosity_factor * h * lap;
}

std::pair<double, double> loss_terms(const OperatorNetwork& net,
                                     const std::vector<TerminalCondition>& g_batch,
                                     const std::vector<PolicyFn>& policies,
                                     const CollocationSet& colloc, double h,
                                     double viscosity_factor,
                                     const ControlProblem& problem) {
  const int K = static_cast<int>(g_batch.size());
  const int nt = static_cast<int>(colloc.interior_times.size());
  const int n0 = static_cast<int>(colloc.terminal_states.cols());
  if (K == 0 || nt == 0 || n0 == 0) throw EmptyCollocation("collocation set is empty");
  if (policies.size() != g_batch.size())
    throw ShapeMismatch("one policy per terminal condition is required");

  double loss1 = 0.0, loss2 = 0.0;
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < nt; ++i) {
      const double r =
          pde_residual(net, g_batch[k], policies[k], colloc.interior_times(i),
                       colloc.interior_states.col(i), h, viscosity_factor, problem);
      loss1 += r * r;
    }
    for (int j = 0; j < n0; ++j) {
      const Eigen::VectorXd xj = colloc.terminal_states.col(j);
      const double m =
          operator_eval(net, g_batch[k], problem.horizon, xj) - g_batch[k].evaluator(xj);
      loss2 += m * m;
    }
  }
  return {loss1 / (static_cast<double>(nt) * K), loss2 / (static_cast<double>(n0) * K)};
}

TrainPolicy TrainPolicy::constant(Eigen::VectorXd u0) {
  TrainPolicy policy;
  policy.u0_ = std::move(u0);
  return policy;
}

TrainPolicy TrainPolicy::induced(std::shared_ptr<const OperatorNetwork> previous,
                                 ArgminConfig argmin) {
  if (!previous) throw Error("induced policy needs a previous operator");
  TrainPolicy policy;
  policy.previous_ = std::move(previous);
  policy.argmin_ = argmin;
  return policy;
}

std::pair<double, double> loss_and_param_gradients(
    const OperatorNetwork& net, const std::vector<TerminalCondition>& g_set,
    const TrainPolicy& policy, const CollocationSet& colloc, double h,
    double viscosity_factor, const ControlProblem& problem, double alpha1, double alpha2,
    ParamGrad* branch_grad, ParamGrad* trunk_grad) {
  const AssembledLosses losses =
      assemble_losses(net, g_set, policy, colloc, h, viscosity_factor, problem, alpha1,
                      alpha2, branch_grad, trunk_grad);
  return {losses.loss1, losses.loss2};
}

std::pair<double, double> estimate_residual_sups(
    const OperatorNetwork& net, const std::vector<TerminalCondition>& g_set,
    const TrainPolicy& policy, double h, double viscosity_factor,
    const ControlProblem& problem, int probe_points, std::mt19937_64& rng) {
  const CollocationSet probes = sample_collocation(problem.working_box, problem.horizon,
                                                   probe_points, probe_points, rng);
  const AssembledLosses losses = assemble_losses(
      net, g_set, policy, probes, h, viscosity_factor, problem, 1.0, 1.0, nullptr, nullptr);
  return {losses.max_abs_residual, losses.max_abs_mismatch};
}

TrainingReport train_operator(OperatorNetwork& net,
                              const std::vector<TerminalCondition>& g_set,
                              const TrainPolicy& policy, double h,
                              double viscosity_factor, const ControlProblem& problem,
                              const TrainConfig& config) {
  if (config.epochs < 0) throw Error("epoch count must be nonnegative");
  TrainingReport report;
  std::mt19937_64 rng(config.seed);
  std::mt19937_64 probe_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  AdamState branch_state = AdamState::zeros_like(net.branch, config.lr);
  AdamState trunk_state = AdamState::zeros_like(net.trunk, config.lr);
  branch_state.beta1 = trunk_state.beta1 = config.adam_beta1;
  branch_state.beta2 = trunk_state.beta2 = config.adam_beta2;
  branch_state.eps = trunk_state.eps = config.adam_eps;

  ParamGrad branch_grad = ParamGrad::zeros_like(net.branch);
  ParamGrad trunk_grad = ParamGrad::zeros_like(net.trunk);

  const auto record = [&](int epoch, double l1, double l2, double wall_ms) {
    const auto sups = estimate_residual_sups(net, g_set, policy, h, viscosity_factor,
                                             problem, config.sup_probe_points, probe_rng);
    report.history.push_back({epoch, l1, l2, sups.first, sups.second,
                              config.deterministic ? 0.0 : wall_ms});
    return sups;
  };

  if (config.epochs == 0) {
    const CollocationSet colloc =
        sample_collocation(problem.working_box, problem.horizon, config.interior_points,
                           config.terminal_points, rng);
    const AssembledLosses losses =
        assemble_losses(net, g_set, policy, colloc, h, viscosity_factor, problem,
                        config.alpha1, config.alpha2, nullptr, nullptr);
    const auto sups = record(0, losses.loss1, losses.loss2, 0.0);
    report.final_loss1 = losses.loss1;
    report.final_loss2 = losses.loss2;
    report.eps1_hat = sups.first;
    report.eps2_hat = sups.second;
    return report;
  }

  double last_l1 = 0.0, last_l2 = 0.0;
  const auto start_time = std::chrono::steady_clock::now();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const CollocationSet colloc =
        sample_collocation(problem.working_box, problem.horizon, config.interior_points,
                           config.terminal_points, rng);
    branch_grad.reset();
    trunk_grad.reset();
    const AssembledLosses losses =
        assemble_losses(net, g_set, policy, colloc, h, viscosity_factor, problem,
                        config.alpha1, config.alpha2, &branch_grad, &trunk_grad);
    const double total = config.alpha1 * losses.loss1 + config.alpha2 * losses.loss2;
    if (!std::isfinite(total) || total > config.divergence_threshold)
      throw DivergenceDetected("training loss " + std::to_string(total) + " at epoch " +
                               std::to_string(epoch));
    adam_step(branch_state, net.branch, branch_grad);
    adam_step(trunk_state, net.trunk, trunk_grad);
    report.adam_steps += 2;
    branch_state.lr *= config.lr_decay;
    trunk_state.lr *= config.lr_decay;
    last_l1 = losses.loss1;
    last_l2 = losses.loss2;

    if (config.record_every > 0 &&
        (epoch % config.record_every == 0 || epoch + 1 == config.epochs)) {
      const double wall_ms = std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - start_time)
                                 .count();
      const auto sups = record(epoch, losses.loss1, losses.loss2, wall_ms);
      if (epoch + 1 == config.epochs) {
        report.eps1_hat = sups.first;
        report.eps2_hat = sups.second;
      }
    }
  }
  if (report.history.empty() || report.history.back().epoch != config.epochs - 1) {
    const auto sups = record(config.epochs - 1, last_l1, last_l2, 0.0);
    report.eps1_hat = sups.first;
    report.eps2_hat = sups.second;
  }
  report.final_loss1 = last_l1;
  report.final_loss2 = last_l2;
  return report;
}

}  // namespace hjb
