#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <utility>
#include <vector>

#include "hjb/argmin.hpp"
#include "hjb/mlp.hpp"
#include "hjb/problem.hpp"

namespace hjb {

/// Branch/trunk operator approximator:
///   value(g; t, x) = branch(g at sensors) . trunk([t, x]).
struct OperatorNetwork {
  Mlp branch;                     // k sensors -> p
  Mlp trunk;                      // 1 + d -> p
  Eigen::MatrixXd sensor_points;  // d x k
  int latent_dim = 0;
};

/// Branch widths become {k, hidden..., p} and trunk {1+d, hidden..., p}.
OperatorNetwork make_operator_network(const Eigen::MatrixXd& sensor_points,
                                      const std::vector<int>& branch_hidden,
                                      const std::vector<int>& trunk_hidden, int latent_dim,
                                      Activation activation, std::uint64_t seed);

/// Throws SensorMismatch unless g was sampled at exactly the network sensors.
void check_sensors(const OperatorNetwork& net, const TerminalCondition& g);

double operator_eval(const OperatorNetwork& net, const TerminalCondition& g, double t,
                     const Eigen::VectorXd& x);

/// Value and its exact time derivative (branch . trunk-tangent).
std::pair<double, double> operator_eval_dt(const OperatorNetwork& net,
                                           const TerminalCondition& g, double t,
                                           const Eigen::VectorXd& x);

void save_operator(std::ostream& out, const OperatorNetwork& net);
OperatorNetwork load_operator(std::istream& in);
void save_operator_file(const std::string& path, const OperatorNetwork& net);
OperatorNetwork load_operator_file(const std::string& path);

/// Random interior space-time points plus terminal-slice points.
struct CollocationSet {
  Eigen::VectorXd interior_times;   // N_t
  Eigen::MatrixXd interior_states;  // d x N_t
  Eigen::MatrixXd terminal_states;  // d x N_0
};

CollocationSet sample_collocation(const WorkingBox& box, double horizon, int n_interior,
                                  int n_terminal, std::mt19937_64& rng);

using PolicyFn = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

/// Pointwise residual of the policy-frozen equation at (t, x):
///   dV/dt + L(t,x,u) + grad_h V . f(t,x,u) + N h lap_h V,
/// where V = branch(g) . trunk and the spatial derivatives are the
/// finite-difference stencils (never network autodiff).
double pde_residual(const OperatorNetwork& net, const TerminalCondition& g,
                    const PolicyFn& policy, double t, const Eigen::VectorXd& x, double h,
                    double viscosity_factor, const ControlProblem& problem);

/// Mean squared residual over interior points and mean squared terminal
/// mismatch, averaged over the terminal-condition batch.
std::pair<double, double> loss_terms(const OperatorNetwork& net,
                                     const std::vector<TerminalCondition>& g_batch,
                                     const std::vector<PolicyFn>& policies,
                                     const CollocationSet& colloc, double h,
                                     double viscosity_factor,
                                     const ControlProblem& problem);

/// Control source for a training round: a fixed control field, or the
/// previous operator iterate whose finite-difference gradient induces the
/// control pointwise (per terminal condition).
class TrainPolicy {
 public:
  static TrainPolicy constant(Eigen::VectorXd u0);
  static TrainPolicy induced(std::shared_ptr<const OperatorNetwork> previous,
                             ArgminConfig argmin = {});

  bool is_constant() const { return !previous_; }
  const Eigen::VectorXd& constant_control() const { return u0_; }
  const OperatorNetwork& previous() const { return *previous_; }
  std::shared_ptr<const OperatorNetwork> previous_ptr() const { return previous_; }
  const ArgminConfig& argmin() const { return argmin_; }

 private:
  Eigen::VectorXd u0_;
  std::shared_ptr<const OperatorNetwork> previous_;
  ArgminConfig argmin_;
};

struct TrainConfig {
  int epochs = 2000;
  double lr = 1e-3;
  double lr_decay = 1.0;  // multiplicative, applied each epoch
  double alpha1 = 1.0;    // residual-loss weight
  double alpha2 = 10.0;   // terminal-loss weight
  int interior_points = 2000;
  int terminal_points = 500;
  int sup_probe_points = 10000;  // residual-sup estimation set
  std::uint64_t seed = 0;
  bool deterministic = true;  // fixed sampling and reduction order; zero wall_ms
  double divergence_threshold = 1e6;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int record_every = 50;
};

struct EpochRecord {
  int epoch;
  double loss1;
  double loss2;
  double eps1;
  double eps2;
  double wall_ms;
};

struct TrainingReport {
  std::vector<EpochRecord> history;
  double final_loss1 = 0.0;
  double final_loss2 = 0.0;
  double eps1_hat = 0.0;  // estimated sup |residual| on the probe set
  double eps2_hat = 0.0;  // estimated sup |V(T,.) - g| on the probe set
  long adam_steps = 0;
};

/// One training round of the weighted loss alpha1 L1 + alpha2 L2 with Adam,
/// resampling collocation every epoch. Mutates `net` in place (warm start
/// across rounds); throws DivergenceDetected on non-finite or exploding loss.
TrainingReport train_operator(OperatorNetwork& net,
                              const std::vector<TerminalCondition>& g_set,
                              const TrainPolicy& policy, double h,
                              double viscosity_factor, const ControlProblem& problem,
                              const TrainConfig& config);

/// Weighted loss and its parameter gradients through the batched path; the
/// training loop uses exactly this computation. Exposed so tests can check
/// the gradient against finite differences of loss_terms.
std::pair<double, double> loss_and_param_gradients(
    const OperatorNetwork& net, const std::vector<TerminalCondition>& g_set,
    const TrainPolicy& policy, const CollocationSet& colloc, double h,
    double viscosity_factor, const ControlProblem& problem, double alpha1, double alpha2,
    ParamGrad* branch_grad, ParamGrad* trunk_grad);

/// Max |residual| and max |V(T,.) - g| over a fresh uniform probe set.
std::pair<double, double> estimate_residual_sups(
    const OperatorNetwork& net, const std::vector<TerminalCondition>& g_set,
    const TrainPolicy& policy, double h, double viscosity_factor,
    const ControlProblem& problem, int probe_points, std::mt19937_64& rng);

}  // namespace hjb
