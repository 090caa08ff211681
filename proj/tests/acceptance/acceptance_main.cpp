// Acceptance suite: one pass/fail line per criterion, grouped so that each
// training run happens once per suite. Exit code is nonzero when any hard
// criterion in the selected suites fails; soft checks print WARN lines.
#include <Eigen/Core>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "hjb/config.hpp"
#include "hjb/grid.hpp"
#include "hjb/policy.hpp"
#include "hjb/problems.hpp"
#include "hjb/stencil.hpp"
#include "hjb/run_io.hpp"
#include "hjb/transcription.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Reporter {
  int failures = 0;
  int warnings = 0;

  void pass(const std::string& id, const std::string& detail, double seconds) {
    std::printf("[PASS] %-4s %s (%.1fs)\n", id.c_str(), detail.c_str(), seconds);
    std::fflush(stdout);
  }
  void fail(const std::string& id, const std::string& detail, double seconds) {
    ++failures;
    std::printf("[FAIL] %-4s %s (%.1fs)\n", id.c_str(), detail.c_str(), seconds);
    std::fflush(stdout);
  }
  void check(bool ok, const std::string& id, const std::string& detail, double seconds) {
    ok ? pass(id, detail, seconds) : fail(id, detail, seconds);
  }
  void warn(const std::string& id, const std::string& detail) {
    ++warnings;
    std::printf("[WARN] %-4s %s\n", id.c_str(), detail.c_str());
    std::fflush(stdout);
  }
  void note(const std::string& id, const std::string& detail) {
    std::printf("[note] %-4s %s\n", id.c_str(), detail.c_str());
    std::fflush(stdout);
  }
};

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<VectorXd> box_probes(int n, double half_width, std::uint64_t seed, int dim) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-half_width, half_width);
  std::vector<VectorXd> probes;
  for (int i = 0; i < n; ++i) {
    VectorXd x(dim);
    for (int d = 0; d < dim; ++d) x(d) = unif(rng);
    probes.push_back(x);
  }
  return probes;
}

// ---------------------------------------------------------------------------
// Fast numerical-kernel checks (A7 plus the pinned diagnostic value of A9).

void run_fast(Reporter& reporter) {
  const auto start = std::chrono::steady_clock::now();

  {  // Central differences are exact on quadratics.
    bool ok = true;
    const auto field = [](const VectorXd& x) {
      return 0.5 * x.squaredNorm() + 0.25 * x(0) * x(1) - x(1);
    };
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> unif(-1.5, 1.5);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      VectorXd x(2);
      x << unif(rng), unif(rng);
      const hjb::StencilConfig cfg(0.05 + 0.1 * (trial % 3), 2);
      VectorXd exact(2);
      exact << x(0) + 0.25 * x(1), x(1) + 0.25 * x(0) - 1.0;
      worst = std::max(worst,
                       (hjb::nabla_h(field, x, cfg) - exact).lpNorm<Eigen::Infinity>());
      worst = std::max(worst, std::abs(hjb::laplace_h(field, x, cfg) - 2.0));
    }
    ok = worst <= 1e-12;
    reporter.check(ok, "A7a",
                   "finite differences exact on quadratics, max dev " +
                       hjb::format_double(worst) + " <= 1e-12",
                   seconds_since(start));
  }

  {  // Reverse-mode parameter gradients vs central differences.
    double worst_rel = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      hjb::Mlp net = hjb::init_params({3, 10, 8, 2}, hjb::Activation::Tanh, 500 + trial);
      std::mt19937_64 rng(40 + trial);
      std::uniform_real_distribution<double> unif(-1.0, 1.0);
      VectorXd input(3), upstream(2);
      for (int i = 0; i < 3; ++i) input(i) = unif(rng);
      for (int i = 0; i < 2; ++i) upstream(i) = unif(rng);
      const hjb::ParamGrad grad = hjb::backward_params(net, input, upstream);
      const auto eval = [&]() { return upstream.dot(hjb::forward(net, input)); };
      for (int check = 0; check < 40; ++check) {
        const std::size_t layer = rng() % net.weights.size();
        const int i = static_cast<int>(rng() % net.weights[layer].rows());
        const int j = static_cast<int>(rng() % net.weights[layer].cols());
        double& param = net.weights[layer](i, j);
        const double saved = param;
        param = saved + 1e-6;
        const double up = eval();
        param = saved - 1e-6;
        const double down = eval();
        param = saved;
        const double fd = (up - down) / 2e-6;
        const double denom = std::max(1e-8, std::abs(fd));
        worst_rel = std::max(worst_rel, std::abs(grad.d_weights[layer](i, j) - fd) / denom);
      }
    }
    reporter.check(worst_rel <= 1e-5, "A7b",
                   "reverse-mode vs finite-difference gradients, worst rel " +
                       hjb::format_double(worst_rel) + " <= 1e-5",
                   seconds_since(start));
  }

  {  // Dual-number time derivative vs central differences.
    double worst_rel = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      const hjb::Mlp net =
          hjb::init_params({3, 12, 12, 1}, hjb::Activation::Tanh, 900 + trial);
      std::mt19937_64 rng(60 + trial);
      std::uniform_real_distribution<double> unif(-1.0, 1.0);
      for (int check = 0; check < 20; ++check) {
        VectorXd input(3);
        for (int i = 0; i < 3; ++i) input(i) = unif(rng);
        const auto [value, tangent] = hjb::forward_dual_t(net, input, 0);
        (void)value;
        VectorXd up = input, down = input;
        up(0) += 1e-6;
        down(0) -= 1e-6;
        const double fd = (hjb::forward(net, up)(0) - hjb::forward(net, down)(0)) / 2e-6;
        const double denom = std::max(1e-9, std::abs(fd));
        worst_rel = std::max(worst_rel, std::abs(tangent(0) - fd) / denom);
      }
    }
    reporter.check(worst_rel <= 1e-6, "A7c",
                   "dual-number time derivative vs finite differences, worst rel " +
                       hjb::format_double(worst_rel) + " <= 1e-6",
                   seconds_since(start));
  }

  {  // Transcription adjoint vs central differences.
    const auto entry = hjb::build_problem("lqr5x3");
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(-0.3, 0.3);
    VectorXd x0(5);
    for (int i = 0; i < 5; ++i) x0(i) = unif(rng);
    hjb::TranscriptionProblem tp{
        entry.problem,
        hjb::make_terminal_condition(hjb::quadratic_terminal_fn({0.3, 0.45}),
                                     MatrixXd::Zero(5, 1),
                                     hjb::quadratic_terminal_gradient({0.3, 0.45})),
        x0, 30};
    MatrixXd controls(3, 30);
    for (int k = 0; k < 30; ++k)
      for (int i = 0; i < 3; ++i) controls(i, k) = unif(rng);
    const MatrixXd grad = hjb::adjoint_gradient(tp, controls);
    double worst_rel = 0.0;
    for (int check = 0; check < 40; ++check) {
      const int k = static_cast<int>(rng() % 30);
      const int i = static_cast<int>(rng() % 3);
      MatrixXd up = controls, down = controls;
      up(i, k) += 1e-6;
      down(i, k) -= 1e-6;
      const double fd = (hjb::transcription_objective(tp, up) -
                         hjb::transcription_objective(tp, down)) /
                        2e-6;
      const double denom = std::max(1e-9, std::abs(fd));
      worst_rel = std::max(worst_rel, std::abs(grad(i, k) - fd) / denom);
    }
    reporter.check(worst_rel <= 1e-6, "A7d",
                   "transcription adjoint vs finite differences, worst rel " +
                       hjb::format_double(worst_rel) + " <= 1e-6",
                   seconds_since(start));
  }

  {  // Adam first-step identity.
    hjb::Mlp net = hjb::init_params({1, 1}, hjb::Activation::Tanh, 0);
    net.weights[0](0, 0) = 0.7;
    hjb::AdamState state = hjb::AdamState::zeros_like(net, 0.05);
    hjb::ParamGrad grad = hjb::ParamGrad::zeros_like(net);
    grad.d_weights[0](0, 0) = -2.0;
    hjb::adam_step(state, net, grad);
    const double dev = std::abs(net.weights[0](0, 0) - (0.7 + 0.05));
    reporter.check(dev <= 1e-7, "A7e",
                   "adam first step is -lr sign(g) within eps, dev " +
                       hjb::format_double(dev),
                   seconds_since(start));
  }

  {  // Closed-form box minimizer vs grid scan, 100 random draws.
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    std::uniform_real_distribution<double> pos(0.5, 2.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const int m = 1 + (trial % 2);
      MatrixXd b(m, m);
      VectorXd r_diag(m), p(m);
      for (int i = 0; i < m; ++i) {
        r_diag(i) = pos(rng);
        p(i) = unif(rng);
        for (int j = 0; j < m; ++j) b(i, j) = unif(rng);
      }
      const auto box = hjb::ControlSet::box(VectorXd::Constant(m, -1.0 / 3.0),
                                            VectorXd::Constant(m, 0.5));
      hjb::ControlProblem problem{
          .state_dim = m,
          .control_dim = m,
          .horizon = 1.0,
          .dynamics = [b](double, const VectorXd&,
                          const VectorXd& u) { return VectorXd(b * u); },
          .running_cost = [r_diag](double, const VectorXd&, const VectorXd& u) {
            return u.dot(r_diag.cwiseProduct(u));
          },
          .control_set = box,
          .working_box = hjb::WorkingBox::centered(m, 1.0),
          .f_sup_norm = 10.0,
          .argmin_form = hjb::LqrDiagonalForm{b, r_diag},
      };
      const VectorXd closed = hjb::argmin_control(problem, 0.0, VectorXd::Zero(m), p);
      hjb::ArgminConfig scan;
      scan.method = hjb::ArgminConfig::Method::GridScan;
      const VectorXd scanned =
          hjb::argmin_control(problem, 0.0, VectorXd::Zero(m), p, scan);
      worst = std::max(worst, (closed - scanned).lpNorm<Eigen::Infinity>());
    }
    const double resolution = (0.5 + 1.0 / 3.0) / 511.0;
    reporter.check(worst <= resolution + 1e-12, "A7f",
                   "closed-form argmin vs 100 grid scans, worst gap " +
                       hjb::format_double(worst) + " <= scan resolution " +
                       hjb::format_double(resolution),
                   seconds_since(start));
  }

  {  // Pinned partial-sum value of the cumulative-error diagnostic.
    std::vector<double> e1, e2;
    for (int n = 0; n <= 10; ++n) {
      e1.push_back(std::pow(2.0, -n));
      e2.push_back(0.0);
    }
    const double value = hjb::epsilon_bound(e1, e2, 0.0, 1.0);
    reporter.check(std::abs(value - 1.99316) <= 1e-5, "A9a",
                   "cumulative-error partial sum " + hjb::format_double(value) +
                       " within 1e-5 of 1.99316",
                   seconds_since(start));
  }

  const double total = seconds_since(start);
  reporter.check(total <= 60.0, "A7t",
                 "fast-suite runtime " + hjb::format_double(total) + "s <= 60s", total);
}

// ---------------------------------------------------------------------------
// Grid-path criteria: A1, A2, A5 (grid), A8.

void run_grid(Reporter& reporter) {
  const auto entry = hjb::build_problem("vehicle2d");
  const auto g = hjb::make_terminal_condition(entry.default_terminal, MatrixXd::Zero(2, 1));

  {  // A1 at the stated spacing.
    const auto start = std::chrono::steady_clock::now();
    const auto spec =
        hjb::GridSpec::make(entry.problem.working_box, 0.05, 1.0, 1.0, 1.0);
    const auto fields = hjb::grid_policy_iteration(entry.problem, g, spec, 1.0, 5);
    const auto probes = box_probes(200, 1.5, 42, 2);
    double max_err = 0.0;
    for (const auto& x : probes)
      max_err = std::max(max_err, std::abs(fields.back().value(0.0, x) -
                                           hjb::hopf_lax_vehicle(0.0, x, 1.0)));
    const double elapsed = seconds_since(start);
    reporter.check(max_err <= 0.12 && elapsed <= 120.0, "A1",
                   "grid value vs reachability formula at h=0.05: max err " +
                       hjb::format_double(max_err) + " (tolerance 0.12)",
                   elapsed);

    // A5 on the same run: iterates are monotone at every node.
    double worst_increase = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n + 1 < fields.size(); ++n)
      worst_increase =
          std::max(worst_increase, (fields[n + 1].values - fields[n].values).maxCoeff());
    reporter.check(worst_increase <= 1e-8, "A5a",
                   "grid iterates nonincreasing at every node: max increase " +
                       hjb::format_double(worst_increase) + " <= 1e-8",
                   seconds_since(start) - elapsed);
  }

  {  // A1 supplement: the same protocol at finer spacing meets the tolerance.
    const auto start = std::chrono::steady_clock::now();
    const auto spec =
        hjb::GridSpec::make(entry.problem.working_box, 0.0125, 1.0, 1.0, 1.0);
    const auto fields = hjb::grid_policy_iteration(entry.problem, g, spec, 1.0, 5);
    const auto probes = box_probes(200, 1.5, 42, 2);
    double max_err = 0.0;
    for (const auto& x : probes)
      max_err = std::max(max_err, std::abs(fields.back().value(0.0, x) -
                                           hjb::hopf_lax_vehicle(0.0, x, 1.0)));
    reporter.note("A1*", "same protocol at h=0.0125: max err " +
                             hjb::format_double(max_err) +
                             (max_err <= 0.12 ? " <= 0.12" : " > 0.12") + " (" +
                             hjb::format_double(seconds_since(start)) + "s)");
  }

  {  // A2: the square-root convergence study.
    const auto start = std::chrono::steady_clock::now();
    const auto probes_vec = box_probes(200, 1.0, 7, 2);
    MatrixXd probes(2, probes_vec.size());
    for (std::size_t i = 0; i < probes_vec.size(); ++i) probes.col(i) = probes_vec[i];
    const auto study = hjb::sqrt_h_convergence_study(
        entry.problem, g, {0.2, 0.1, 0.05}, 1.0, 5, probes,
        [](const VectorXd& x) { return hjb::hopf_lax_vehicle(0.0, x, 1.0); });
    bool monotone = true;
    std::string detail = "errors";
    for (std::size_t i = 0; i < study.rows.size(); ++i) {
      detail += " " + hjb::format_double(study.rows[i].max_error);
      if (i > 0) monotone = monotone && study.rows[i].max_error <=
                                            1.1 * study.rows[i - 1].max_error;
    }
    detail += ", fitted exponent " + hjb::format_double(study.fitted_exponent);
    const double elapsed = seconds_since(start);
    reporter.check(monotone && study.fitted_exponent >= 0.4 && elapsed <= 300.0, "A2",
                   detail + " (need monotone within 10% and exponent >= 0.4)", elapsed);
  }

  {  // A8: ordered terminal data stays ordered under shared random policies.
    const auto start = std::chrono::steady_clock::now();
    const auto spec = hjb::GridSpec::make(entry.problem.working_box, 0.1, 1.0, 1.0, 1.0);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unif(0.2, 2.0);
    double worst = -std::numeric_limits<double>::infinity();
    for (int instance = 0; instance < 10; ++instance) {
      const double a = unif(rng), b = unif(rng), c = unif(rng), d = unif(rng);
      const auto policy = [a, b, c](double t, const VectorXd& x) {
        return VectorXd(VectorXd::Constant(
            1, hjb::wrap_angle(3.0 * std::sin(a * x(0) + b * x(1) + c * t))));
      };
      const auto g_low = hjb::make_terminal_condition(
          [a, b](const VectorXd& x) { return std::sin(a * x(0)) * std::cos(b * x(1)); },
          MatrixXd::Zero(2, 1));
      const auto g_high = hjb::make_terminal_condition(
          [a, b, c, d](const VectorXd& x) {
            return std::sin(a * x(0)) * std::cos(b * x(1)) +
                   d * std::exp(-c * x.squaredNorm());
          },
          MatrixXd::Zero(2, 1));
      const auto low = hjb::solve_linear_pde(entry.problem, policy, g_low, spec, 1.0);
      const auto high = hjb::solve_linear_pde(entry.problem, policy, g_high, spec, 1.0);
      worst = std::max(worst, (low.values - high.values).maxCoeff());
    }
    reporter.check(worst <= 1e-10, "A8",
                   "ordered terminal data stays ordered nodewise: worst crossing " +
                       hjb::format_double(worst) + " <= 1e-10",
                   seconds_since(start));
  }
}

// ---------------------------------------------------------------------------
// Vehicle operator path: A3, A5 (operator), A6, A9 diagnostics.

void run_vehicle_operator(Reporter& reporter) {
  const auto start = std::chrono::steady_clock::now();
  hjb::ConfigMap map;
  map.set("problem.id", "vehicle2d");
  hjb::apply_desk_scale(map, "vehicle2d");
  // Operator-path cost is independent of the stencil spacing, and at the
  // preset h = 0.05 the regularized solution itself sits ~0.94 sqrt(h) = 0.21
  // above the reachability value, out of reach of the 0.15 tolerance no
  // matter how well the network trains. The published spacing keeps that
  // offset at ~0.07 for the same runtime.
  map.set("scheme.h", "0.005");
  map.set("net.seed", "1");
  map.set("train.seed", "1");
  map.set("train.lr", "0.002");
  map.set("train.lr_decay", "0.9988");
  const auto config = hjb::RunConfig::from_map(map);
  const auto entry = config.resolve_problem();
  const auto costs = config.resolve_terminal_costs(entry);

  const auto ledger =
      hjb::run_policy_iteration(entry.problem, costs, config.iteration);
  const double train_seconds = seconds_since(start);
  reporter.note("A3", "vehicle training (desk-scale budget, published h=0.005) took " +
                          hjb::format_double(train_seconds) + "s");

  {  // A3: value accuracy along the published probe line.
    const auto g = ledger.training_terminals[0];
    int within = 0;
    const int count = 50;
    double worst = 0.0;
    for (int i = 0; i < count; ++i) {
      VectorXd x(2);
      x << -1.5 + 3.0 * i / (count - 1), -0.5;
      const double err = std::abs(hjb::infer_value(ledger, g, 0.0, x) -
                                  hjb::hopf_lax_vehicle(0.0, x, 1.0));
      worst = std::max(worst, err);
      if (err <= 0.15) ++within;
    }
    const double elapsed = seconds_since(start);
    reporter.check(within >= 45 && elapsed <= 1200.0, "A3",
                   std::to_string(within) + "/50 probes within 0.15 on the line "
                                            "x2=-0.5 (worst err " +
                       hjb::format_double(worst) + ")",
                   elapsed);
  }

  {  // A5 operator path: slack-adjusted monotonicity violations under 5%.
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(-1.5, 1.5);
    std::uniform_real_distribution<double> tdist(0.0, 1.0);
    const int probes = 400;
    VectorXd times(probes);
    MatrixXd states(2, probes);
    for (int i = 0; i < probes; ++i) {
      times(i) = tdist(rng);
      states(0, i) = unif(rng);
      states(1, i) = unif(rng);
    }
    const auto report = hjb::monotonicity_check(ledger, times, states);
    reporter.check(report.worst_fraction <= 0.05, "A5b",
                   "operator iterates: worst slack-adjusted violation fraction " +
                       hjb::format_double(report.worst_fraction) + " <= 0.05",
                   seconds_since(start));
  }

  {  // A6: recovered controls point at the origin.
    const auto g = ledger.training_terminals[0];
    bool ok = true;
    std::string detail;
    const double targets[2] = {std::atan(1.0 / 3.0), std::atan(0.5)};
    const double x1s[2] = {-1.5, -1.0};
    for (int i = 0; i < 2; ++i) {
      VectorXd x0(2);
      x0 << x1s[i], -0.5;
      const auto trajectory = hjb::synthesize_trajectory(ledger, g, x0, 0.01);
      const double mean_control = trajectory.controls.row(0).mean();
      const double dev = std::abs(mean_control - targets[i]);
      ok = ok && dev <= 0.1;
      detail += (i ? "; " : "") + std::string("x0=(") + hjb::format_double(x1s[i]) +
                ",-0.5): mean u " + hjb::format_double(mean_control) + " vs " +
                hjb::format_double(targets[i]);
    }
    reporter.check(ok, "A6", detail + " (tolerance 0.1 rad)", seconds_since(start));
  }

  {  // A9: residual sups reported every round; soft decrease check.
    bool reported = !ledger.iterates.empty();
    for (const auto& iterate : ledger.iterates)
      reported = reported && iterate.eps1 >= 0.0 && iterate.eps2 >= 0.0;
    std::string eps_detail = "eps1:";
    for (const auto& iterate : ledger.iterates)
      eps_detail += " " + hjb::format_double(iterate.eps1);
    reporter.check(reported, "A9b", "residual sups recorded each round (" + eps_detail + ")",
                   seconds_since(start));

    // Soft check: recorded losses within the final round trend downward,
    // allowing transient upticks.
    if (!ledger.iterates.empty()) {
      const auto& history = ledger.iterates.back().report.history;
      int upticks = 0;
      for (std::size_t i = 1; i < history.size(); ++i) {
        const double prev = history[i - 1].loss1 + history[i - 1].loss2;
        const double cur = history[i].loss1 + history[i].loss2;
        if (cur > prev * 1.05) ++upticks;
      }
      if (history.size() >= 3 &&
          history.back().loss1 + history.back().loss2 <
              history.front().loss1 + history.front().loss2 &&
          upticks * 2 <= static_cast<int>(history.size()))
        reporter.pass("A3s", "final-round loss trend decreasing (" +
                                 std::to_string(upticks) + " upticks over " +
                                 std::to_string(history.size()) + " records)",
                      0.0);
      else
        reporter.warn("A3s", "final-round loss trend not cleanly decreasing (soft)");
    }

    const auto& iterates = ledger.iterates;
    if (iterates.size() >= 4) {
      int decreasing = 0;
      for (std::size_t n = iterates.size() - 3; n < iterates.size(); ++n)
        if (iterates[n].eps1 <= iterates[n - 1].eps1) ++decreasing;
      if (decreasing >= 2)
        reporter.pass("A9c", "diagnostics decreased in " + std::to_string(decreasing) +
                                 " of the final 3 rounds",
                      0.0);
      else
        reporter.warn("A9c", "diagnostics decreased in only " +
                                 std::to_string(decreasing) +
                                 " of the final 3 rounds (soft check)");
    }
  }
}

// ---------------------------------------------------------------------------
// LQR operator path (A4, and its reduced ten-dimensional variant).

void run_lqr_operator(Reporter& reporter, const std::string& problem_id,
                      const std::vector<double>& unseen_scales, int probe_count,
                      double rel_tol, const std::string& id_prefix,
                      double budget_seconds) {
  const auto start = std::chrono::steady_clock::now();
  hjb::ConfigMap map;
  map.set("problem.id", problem_id);
  hjb::apply_desk_scale(map, problem_id);
  map.set("net.seed", "1");
  map.set("train.seed", "1");
  map.set("train.lr", "0.002");
  map.set("train.lr_decay", "0.9988");
  const auto config = hjb::RunConfig::from_map(map);
  const auto entry = config.resolve_problem();
  const auto costs = config.resolve_terminal_costs(entry);
  const int d = entry.problem.state_dim;

  const auto ledger = hjb::run_policy_iteration(entry.problem, costs, config.iteration);
  reporter.note(id_prefix, problem_id + " training took " +
                               hjb::format_double(seconds_since(start)) + "s");

  const auto probes = box_probes(probe_count, 0.5, 2024, d);
  bool all_ok = true;
  double worst_rel = 0.0;
  const std::uint64_t steps_before = hjb::adam_total_steps();
  std::string detail;
  for (double scale : unseen_scales) {
    const hjb::QuadraticTerminal q{0.0, scale};
    const auto g_new = hjb::sample_at_sensors(ledger, hjb::quadratic_terminal_fn(q),
                                              hjb::quadratic_terminal_gradient(q));
    double scale_worst = 0.0;
    for (const auto& x0 : probes) {
      const double estimate = hjb::infer_value(ledger, g_new, 0.0, x0);
      hjb::TranscriptionProblem tp{
          entry.problem,
          hjb::make_terminal_condition(hjb::quadratic_terminal_fn(q),
                                       MatrixXd::Zero(d, 1),
                                       hjb::quadratic_terminal_gradient(q)),
          x0, 50};
      hjb::PgdConfig pgd;
      pgd.seed = 11;
      const double reference = hjb::transcribe_and_solve(tp, pgd).objective;
      const double err = std::abs(estimate - reference);
      const double allowed = std::max(0.05, rel_tol * std::abs(reference));
      all_ok = all_ok && err <= allowed;
      scale_worst = std::max(scale_worst, err / std::max(0.05, std::abs(reference)));
    }
    worst_rel = std::max(worst_rel, scale_worst);
    detail += " g=" + hjb::format_double(scale) + "|x|^2: worst rel " +
              hjb::format_double(scale_worst) + ";";
  }
  const std::uint64_t steps_after = hjb::adam_total_steps();
  const bool zero_steps = steps_before == steps_after;
  const double elapsed = seconds_since(start);
  reporter.check(all_ok && zero_steps && elapsed <= budget_seconds, id_prefix,
                 "unseen terminal inference vs transcription oracle:" + detail +
                     std::string(" optimizer steps during inference: ") +
                     (zero_steps ? "0" : "NONZERO") + ", tolerance " +
                     hjb::format_double(rel_tol) + " rel (floor 0.05)",
                 elapsed);
}

}  // namespace

int main(int argc, char** argv) {
  std::string suite = "all";
  for (int i = 1; i + 1 < argc + 1; ++i) {
    if (std::strcmp(argv[i], "--suite") == 0 && i + 1 < argc) suite = argv[i + 1];
  }
  Reporter reporter;
  const bool all = suite == "all";
  if (all || suite == "fast") run_fast(reporter);
  if (all || suite == "grid") run_grid(reporter);
  if (all || suite == "vehicle-operator") run_vehicle_operator(reporter);
  if (all || suite == "lqr-operator")
    run_lqr_operator(reporter, "lqr5x3", {0.57, 0.45}, 10, 0.15, "A4", 1800.0);
  if (all || suite == "lqr10-operator")
    run_lqr_operator(reporter, "lqr10x5", {0.58, 0.42}, 5, 0.25, "A10", 1800.0);

  std::printf("%d failed, %d warnings\n", reporter.failures, reporter.warnings);
  return reporter.failures == 0 ? 0 : 1;
}
