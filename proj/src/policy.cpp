#include "hjb/policy.hpp"

#include <cmath>
#include <cstdio>

#include "hjb/sobol.hpp"
#include "hjb/stencil.hpp"

namespace hjb {

PolicyHandle PolicyHandle::constant(Eigen::VectorXd u0) {
  PolicyHandle handle;
  handle.u0_ = std::move(u0);
  return handle;
}

PolicyHandle PolicyHandle::induced(ValueFieldFn value, ControlProblem problem, double h,
                                   ArgminConfig argmin) {
  PolicyHandle handle;
  handle.value_ = std::move(value);
  handle.problem_ = std::make_shared<const ControlProblem>(std::move(problem));
  handle.h_ = h;
  handle.argmin_ = argmin;
  return handle;
}

Eigen::VectorXd PolicyHandle::gradient(double t, const Eigen::VectorXd& x) const {
  if (!value_) return Eigen::VectorXd::Zero(x.size());
  const StencilConfig stencil(h_, static_cast<int>(x.size()));
  const auto slice = [&](const Eigen::VectorXd& q) { return value_(t, q); };
  return nabla_h(slice, x, stencil);
}

Eigen::VectorXd PolicyHandle::operator()(double t, const Eigen::VectorXd& x) const {
  if (!value_) return u0_;
  return argmin_control(*problem_, t, x, gradient(t, x), argmin_);
}

PolicyHandle policy_update(ValueFieldFn value, const ControlProblem& problem, double h,
                           const ArgminConfig& argmin) {
  return PolicyHandle::induced(std::move(value), problem, h, argmin);
}

IterationLedger run_policy_iteration(const ControlProblem& problem,
                                     const std::vector<ScalarFieldFn>& terminal_costs,
                                     const IterationConfig& config) {
  if (terminal_costs.empty()) throw Error("at least one terminal cost is required");
  const double required = std::max(1.0, problem.f_sup_norm / 2.0);
  if (config.viscosity_factor < required) {
    if (config.strict_viscosity_bound)
      throw ViscosityBoundViolation(
          "viscosity factor " + std::to_string(config.viscosity_factor) +
          " violates the monotonicity requirement N >= " + std::to_string(required));
    std::fprintf(stderr,
                 "warning: viscosity factor %.6g below the monotonicity bound %.6g; "
                 "proceeding as requested\n",
                 config.viscosity_factor, required);
  }
  if (!(config.h > 0.0 && config.h < 1.0)) throw Error("h must lie in (0, 1)");

  IterationLedger ledger;
  ledger.config = config;
  ledger.problem = problem;

  const Eigen::MatrixXd sensors = SobolSequence::sample_box(
      config.sensor_count, problem.working_box.lo, problem.working_box.hi);
  for (const auto& g : terminal_costs)
    ledger.training_terminals.push_back(make_terminal_condition(g, sensors));

  OperatorNetwork net =
      make_operator_network(sensors, config.branch_hidden, config.trunk_hidden,
                            config.latent_dim, config.activation, config.seed);
  ledger.final_network = std::make_shared<const OperatorNetwork>(net);

  TrainPolicy policy = TrainPolicy::constant(Eigen::VectorXd::Zero(problem.control_dim));
  for (int round = 0; round < config.rounds; ++round) {
    TrainConfig train = config.train;
    train.seed = config.train.seed + static_cast<std::uint64_t>(round);
    TrainingReport report = train_operator(net, ledger.training_terminals, policy,
                                           config.h, config.viscosity_factor, problem,
                                           train);
    auto snapshot = std::make_shared<const OperatorNetwork>(net);
    ledger.iterates.push_back(
        {round, snapshot, report.eps1_hat, report.eps2_hat, std::move(report)});
    ledger.final_network = snapshot;
    policy = TrainPolicy::induced(snapshot, config.argmin);
  }
  return ledger;
}

TerminalCondition sample_at_sensors(const IterationLedger& ledger, ScalarFieldFn g,
                                    FieldGradientFn gradient) {
  if (!ledger.final_network) throw Error("ledger has no trained operator");
  return make_terminal_condition(std::move(g), ledger.final_network->sensor_points,
                                 std::move(gradient));
}

double infer_value(const IterationLedger& ledger, const TerminalCondition& g_new, double t,
                   const Eigen::VectorXd& x) {
  if (!ledger.final_network) throw Error("ledger has no trained operator");
  return operator_eval(*ledger.final_network, g_new, t, x);
}

TrajectorySolution synthesize_trajectory(const IterationLedger& ledger,
                                         const TerminalCondition& g_new,
                                         const Eigen::VectorXd& x0, double dt) {
  if (!ledger.final_network) throw Error("ledger has no trained operator");
  if (!(dt > 0.0)) throw Error("rollout step must be positive");
  const ControlProblem& problem = ledger.problem;
  const double horizon = problem.horizon;
  const int steps = std::max(1, static_cast<int>(std::llround(horizon / dt)));
  const double step = horizon / steps;

  // Evaluation points are clamped into a margin-inflated box; the physical
  // state itself is never altered.
  const double margin =
      0.1 * (problem.working_box.hi - problem.working_box.lo).maxCoeff() + 2.0 * ledger.config.h;
  const WorkingBox eval_box = problem.working_box.inflated(margin);

  const OperatorNetwork& net = *ledger.final_network;
  check_sensors(net, g_new);
  const Eigen::VectorXd coeff = forward(net.branch, g_new.sensor_values);
  const StencilConfig stencil(ledger.config.h, problem.state_dim);

  TrajectorySolution out;
  out.times.resize(steps + 1);
  out.states.resize(problem.state_dim, steps + 1);
  out.controls.resize(problem.control_dim, steps);
  out.states.col(0) = x0;

  Eigen::VectorXd x = x0;
  double running = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double t = k * step;
    out.times(k) = t;
    Eigen::VectorXd eval_point = x;
    if (!eval_box.contains(x)) {
      out.escaped_domain = true;
      eval_point = eval_box.clamp(x);
    }
    const auto field = [&](const Eigen::VectorXd& q) {
      Eigen::VectorXd query(1 + problem.state_dim);
      query << t, q;
      return coeff.dot(forward(net.trunk, query));
    };
    const Eigen::VectorXd grad = nabla_h(field, eval_point, stencil);
    const Eigen::VectorXd u = argmin_control(problem, t, x, grad, ledger.config.argmin);
    out.controls.col(k) = u;
    running += problem.running_cost(t, x, u) * step;
    x += step * problem.dynamics(t, x, u);
    out.states.col(k + 1) = x;
  }
  out.times(steps) = horizon;
  out.running_cost = running;
  out.terminal_cost = g_new.evaluator(x);
  out.objective = running + out.terminal_cost;
  if (out.escaped_domain)
    std::fprintf(stderr, "warning: rollout left the inflated working box; "
                         "value queries were clamped\n");
  return out;
}

double epsilon_bound(const std::vector<double>& eps1, const std::vector<double>& eps2,
                     double t, double horizon, bool include_m1) {
  if (eps1.empty() || eps2.empty()) throw EmptySequence("residual sequences are empty");
  if (eps1.size() != eps2.size())
    throw ShapeMismatch("residual sequences must have equal length");
  for (std::size_t i = 0; i < eps1.size(); ++i)
    if (eps1[i] < 0.0 || eps2[i] < 0.0)
      throw Error("residual sups must be nonnegative");
  if (t < 0.0 || t > horizon) throw Error("t must lie in [0, horizon]");

  const std::size_t last = eps1.size() - 1;
  const auto bracket = [&](const std::vector<double>& eps) {
    if (last == 0) return eps[0];
    // Default inner range [2, last-2]; the flag widens it to [1, last-1].
    const std::size_t begin = include_m1 ? 1 : 2;
    const std::size_t end_excl = include_m1 ? last : last - 1;
    double inner = 0.0;
    for (std::size_t m = begin; m < end_excl; ++m) inner += eps[m];
    return eps[0] + 2.0 * inner + eps[last];
  };
  return (horizon - t) * bracket(eps1) + bracket(eps2);
}

MonotonicityReport monotonicity_check(const IterationLedger& ledger,
                                      const Eigen::VectorXd& probe_times,
                                      const Eigen::MatrixXd& probe_states) {
  if (ledger.iterates.size() < 2)
    throw Error("monotonicity check needs at least two iterates");
  if (probe_times.size() != probe_states.cols())
    throw ShapeMismatch("one probe time per probe state is required");

  MonotonicityReport report;
  const double horizon = ledger.problem.horizon;
  for (std::size_t n = 0; n + 1 < ledger.iterates.size(); ++n) {
    const auto& lo = ledger.iterates[n];
    const auto& hi = ledger.iterates[n + 1];
    const double slack = 2.0 * (lo.eps2 + hi.eps2) + 2.0 * horizon * (lo.eps1 + hi.eps1);
    double max_violation = -std::numeric_limits<double>::infinity();
    long violations = 0;
    long total = 0;
    for (const auto& g : ledger.training_terminals) {
      for (Eigen::Index j = 0; j < probe_times.size(); ++j) {
        const double t = probe_times(j);
        const Eigen::VectorXd x = probe_states.col(j);
        const double before = operator_eval(*lo.network, g, t, x);
        const double after = operator_eval(*hi.network, g, t, x);
        max_violation = std::max(max_violation, after - before);
        if (after > before + slack) ++violations;
        ++total;
      }
    }
    report.pairs.push_back({static_cast<int>(n), max_violation,
                            static_cast<double>(violations) / static_cast<double>(total),
                            slack});
    report.worst_fraction = std::max(report.worst_fraction, report.pairs.back().violation_fraction);
    report.worst_violation = std::max(report.worst_violation, max_violation);
  }
  return report;
}

}  // namespace hjb
