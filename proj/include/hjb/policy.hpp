#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "hjb/argmin.hpp"
#include "hjb/deeponet.hpp"
#include "hjb/problem.hpp"
#include "hjb/trajectory.hpp"

namespace hjb {

using ValueFieldFn = std::function<double(double, const Eigen::VectorXd&)>;

/// A control field: either a fixed control or the pointwise argmin against
/// the finite-difference gradient of a value field. Evaluation is lazy;
/// nothing is precomputed.
class PolicyHandle {
 public:
  static PolicyHandle constant(Eigen::VectorXd u0);
  static PolicyHandle induced(ValueFieldFn value, ControlProblem problem, double h,
                              ArgminConfig argmin = {});

  Eigen::VectorXd operator()(double t, const Eigen::VectorXd& x) const;
  bool is_constant() const { return !value_; }

  /// Finite-difference gradient of the underlying value field.
  Eigen::VectorXd gradient(double t, const Eigen::VectorXd& x) const;

 private:
  Eigen::VectorXd u0_;
  ValueFieldFn value_;
  std::shared_ptr<const ControlProblem> problem_;
  double h_ = 0.0;
  ArgminConfig argmin_;
};

/// The argmin update: controls induced by grad_h of a value iterate.
PolicyHandle policy_update(ValueFieldFn value, const ControlProblem& problem, double h,
                           const ArgminConfig& argmin = {});

/// One completed training round.
struct PolicyIterate {
  int index = 0;
  std::shared_ptr<const OperatorNetwork> network;  // snapshot after the round
  double eps1 = 0.0;  // estimated sup of the interior residual
  double eps2 = 0.0;  // estimated sup of the terminal mismatch
  TrainingReport report;
};

struct IterationConfig {
  double h = 0.05;
  double viscosity_factor = 1.0;  // N
  int rounds = 5;                 // M
  bool strict_viscosity_bound = true;

  int sensor_count = 100;
  int latent_dim = 64;
  std::vector<int> branch_hidden{64, 64};
  std::vector<int> trunk_hidden{64, 64};
  Activation activation = Activation::Tanh;
  std::uint64_t seed = 1;

  ArgminConfig argmin;
  TrainConfig train;
};

struct IterationLedger {
  std::vector<PolicyIterate> iterates;
  std::shared_ptr<const OperatorNetwork> final_network;
  std::vector<TerminalCondition> training_terminals;
  IterationConfig config;
  ControlProblem problem;
};

/// Runs `rounds` alternations of operator training (warm-started, fresh Adam
/// state) and the argmin policy update, starting from the zero control.
/// Throws ViscosityBoundViolation when N < max(1, ||f||/2) in strict mode.
IterationLedger run_policy_iteration(const ControlProblem& problem,
                                     const std::vector<ScalarFieldFn>& terminal_costs,
                                     const IterationConfig& config);

/// Samples a terminal cost at the ledger's sensors.
TerminalCondition sample_at_sensors(const IterationLedger& ledger, ScalarFieldFn g,
                                    FieldGradientFn gradient = nullptr);

/// Evaluates the trained operator on an unseen terminal condition. Pure
/// inference: no optimizer step is ever taken.
double infer_value(const IterationLedger& ledger, const TerminalCondition& g_new, double t,
                   const Eigen::VectorXd& x);

/// Forward-Euler rollout under the control induced by the inferred value
/// field. States that leave the inflated working box set `escaped_domain`
/// and are clamped for value-stencil queries only.
TrajectorySolution synthesize_trajectory(const IterationLedger& ledger,
                                         const TerminalCondition& g_new,
                                         const Eigen::VectorXd& x0, double dt);

/// Partial-sum evaluation of the cumulative training-error diagnostic
///   (T - t) (e1[0] + 2 sum_m e1[m] + e1[last]) + (same in e2),
/// at the final available index. The default inner range m in [2, last-2]
/// reproduces the published arithmetic; include_m1 widens it to
/// [1, last-1], the telescoping-consistent variant.
double epsilon_bound(const std::vector<double>& eps1, const std::vector<double>& eps2,
                     double t, double horizon, bool include_m1 = false);

struct MonotonicityPair {
  int index;                 // n of the (n, n+1) pair
  double max_violation;      // max over probes of v_{n+1} - v_n
  double violation_fraction; // fraction violating v_n + slack >= v_{n+1}
  double slack;
};

struct MonotonicityReport {
  std::vector<MonotonicityPair> pairs;
  double worst_fraction = 0.0;
  double worst_violation = 0.0;
};

/// Checks v_n >= v_{n+1} on probe points, with the residual-based slack
/// 2 (eps2_n + eps2_{n+1}) + 2 T (eps1_n + eps1_{n+1}) per pair.
MonotonicityReport monotonicity_check(const IterationLedger& ledger,
                                      const Eigen::VectorXd& probe_times,
                                      const Eigen::MatrixXd& probe_states);

}  // namespace hjb
