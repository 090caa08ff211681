#include "hjb/problems.hpp"

#include <cmath>

#include "hjb/errors.hpp"

namespace hjb {
namespace {

Eigen::MatrixXd lqr5_A() {
  Eigen::MatrixXd a(5, 5);
  a << 0.08, 0.01, 0.01, 0.15, 0.05,  //
      0.16, 0.16, 0.15, 0.18, 0.16,   //
      0.14, 0.17, 0.07, 0.08, 0.12,   //
      0.12, 0.15, 0.11, 0.18, 0.02,   //
      0.12, 0.08, 0.13, 0.10, 0.09;
  return a;
}

Eigen::MatrixXd lqr5_B() {
  Eigen::MatrixXd b(5, 3);
  b << 0.00, 0.05, 0.06,  //
      0.07, 0.01, 0.04,   //
      0.02, 0.00, 0.10,   //
      0.09, 0.08, 0.08,   //
      0.01, 0.07, 0.05;
  return b;
}

Eigen::MatrixXd lqr10_A() {
  Eigen::MatrixXd a(10, 10);
  a << 0.00, 0.15, 0.01, 0.11, 0.03, 0.19, 0.06, 0.07, 0.14, 0.07,  //
      0.06, 0.10, 0.14, 0.09, 0.16, 0.01, 0.15, 0.17, 0.09, 0.11,   //
      0.11, 0.02, 0.10, 0.19, 0.04, 0.14, 0.18, 0.01, 0.10, 0.16,   //
      0.15, 0.13, 0.01, 0.17, 0.04, 0.06, 0.16, 0.03, 0.08, 0.15,   //
      0.02, 0.19, 0.19, 0.17, 0.13, 0.15, 0.00, 0.17, 0.08, 0.17,   //
      0.07, 0.00, 0.02, 0.14, 0.10, 0.08, 0.13, 0.07, 0.03, 0.05,   //
      0.00, 0.15, 0.16, 0.12, 0.17, 0.06, 0.05, 0.14, 0.18, 0.10,   //
      0.02, 0.10, 0.14, 0.12, 0.17, 0.01, 0.15, 0.08, 0.10, 0.17,   //
      0.04, 0.03, 0.07, 0.02, 0.13, 0.10, 0.01, 0.13, 0.15, 0.09,   //
      0.00, 0.12, 0.07, 0.01, 0.09, 0.15, 0.06, 0.05, 0.08, 0.05;
  return a;
}

Eigen::MatrixXd lqr10_B() {
  Eigen::MatrixXd b(10, 5);
  b << 0.02, 0.05, 0.09, 0.08, 0.06,  //
      0.05, 0.06, 0.10, 0.10, 0.01,   //
      0.06, 0.01, 0.05, 0.04, 0.05,   //
      0.02, 0.09, 0.00, 0.03, 0.07,   //
      0.07, 0.09, 0.02, 0.05, 0.05,   //
      0.00, 0.02, 0.03, 0.05, 0.03,   //
      0.04, 0.07, 0.03, 0.01, 0.03,   //
      0.10, 0.05, 0.02, 0.05, 0.03,   //
      0.08, 0.06, 0.08, 0.06, 0.09,   //
      0.00, 0.00, 0.06, 0.04, 0.05;
  return b;
}

// Exact sup of ||A x + B u||_2 over the box-and-control-set product: the
// norm is convex in (x, u), so the maximum sits at a vertex.
double affine_sup_norm(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       const WorkingBox& box, const ControlSet& controls) {
  const int d = static_cast<int>(a.cols());
  const int m = static_cast<int>(b.cols());
  double worst = 0.0;
  Eigen::VectorXd x(d), u(m);
  for (long mask = 0; mask < (1L << (d + m)); ++mask) {
    for (int i = 0; i < d; ++i) x(i) = ((mask >> i) & 1) ? box.hi(i) : box.lo(i);
    for (int i = 0; i < m; ++i)
      u(i) = ((mask >> (d + i)) & 1) ? controls.upper()(i) : controls.lower()(i);
    worst = std::max(worst, (a * x + b * u).norm());
  }
  return worst;
}

CatalogEntry build_vehicle() {
  CatalogEntry entry;
  entry.id = "vehicle2d";
  entry.defaults = {0.005, 5, 1.0, 1.0};
  ControlProblem p{
      .state_dim = 2,
      .control_dim = 1,
      .horizon = 1.0,
      .dynamics =
          [](double, const Eigen::VectorXd&, const Eigen::VectorXd& u) {
            Eigen::VectorXd f(2);
            f << std::cos(u(0)), std::sin(u(0));
            return f;
          },
      .running_cost = [](double, const Eigen::VectorXd&,
                         const Eigen::VectorXd&) { return 0.0; },
      .control_set = ControlSet::angle(),
      .working_box = WorkingBox::centered(2, 2.0),
      .f_sup_norm = 1.0,  // unit-speed dynamics, exactly
      .argmin_form = VehicleAngleForm{},
      .dynamics_jac_x =
          [](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
            return Eigen::MatrixXd(Eigen::MatrixXd::Zero(2, 2));
          },
      .dynamics_jac_u =
          [](double, const Eigen::VectorXd&, const Eigen::VectorXd& u) {
            Eigen::MatrixXd j(2, 1);
            j << -std::sin(u(0)), std::cos(u(0));
            return j;
          },
      .running_cost_grad_x =
          [](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
            return Eigen::VectorXd(Eigen::VectorXd::Zero(2));
          },
      .running_cost_grad_u =
          [](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
            return Eigen::VectorXd(Eigen::VectorXd::Zero(1));
          },
  };
  entry.problem = std::move(p);
  entry.default_terminal = norm_terminal_fn();
  entry.default_terminal_gradient = norm_terminal_gradient();
  return entry;
}

CatalogEntry build_lqr(const std::string& id, const Eigen::MatrixXd& a,
                       const Eigen::MatrixXd& b) {
  const int d = static_cast<int>(a.rows());
  const int m = static_cast<int>(b.cols());
  CatalogEntry entry;
  entry.id = id;
  entry.defaults = {0.005, 3, 1.0, 0.5};
  const ControlSet controls = ControlSet::box(Eigen::VectorXd::Constant(m, -1.0 / 3.0),
                                              Eigen::VectorXd::Constant(m, 0.5));
  const WorkingBox box = WorkingBox::centered(d, 1.0);
  // Q = R = I: running cost x'x + u'u.
  ControlProblem p{
      .state_dim = d,
      .control_dim = m,
      .horizon = 0.5,
      .dynamics = [a, b](double, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u) { return Eigen::VectorXd(a * x + b * u); },
      .running_cost = [](double, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u) { return x.squaredNorm() + u.squaredNorm(); },
      .control_set = controls,
      .working_box = box,
      .f_sup_norm = affine_sup_norm(a, b, box, controls),
      .argmin_form = LqrDiagonalForm{b, Eigen::VectorXd::Ones(m)},
      .dynamics_jac_x = [a](double, const Eigen::VectorXd&,
                            const Eigen::VectorXd&) { return a; },
      .dynamics_jac_u = [b](double, const Eigen::VectorXd&,
                            const Eigen::VectorXd&) { return b; },
      .running_cost_grad_x =
          [](double, const Eigen::VectorXd& x, const Eigen::VectorXd&) {
            return Eigen::VectorXd(2.0 * x);
          },
      .running_cost_grad_u =
          [](double, const Eigen::VectorXd&, const Eigen::VectorXd& u) {
            return Eigen::VectorXd(2.0 * u);
          },
  };
  entry.problem = std::move(p);
  // g_k(x) = 0.3 + 0.1 k ||x||^2 for k = 1, 2, 3.
  for (int k = 1; k <= 3; ++k)
    entry.training_family.push_back({0.3, 0.1 * k});
  entry.default_terminal = quadratic_terminal_fn(entry.training_family[1]);
  entry.default_terminal_gradient = quadratic_terminal_gradient(entry.training_family[1]);
  return entry;
}

}  // namespace

ScalarFieldFn quadratic_terminal_fn(const QuadraticTerminal& q) {
  return [q](const Eigen::VectorXd& x) { return q.offset + q.scale * x.squaredNorm(); };
}

FieldGradientFn quadratic_terminal_gradient(const QuadraticTerminal& q) {
  return [q](const Eigen::VectorXd& x) { return Eigen::VectorXd(2.0 * q.scale * x); };
}

ScalarFieldFn norm_terminal_fn() {
  return [](const Eigen::VectorXd& x) { return x.norm(); };
}

FieldGradientFn norm_terminal_gradient() {
  return [](const Eigen::VectorXd& x) {
    const double n = x.norm();
    if (n < 1e-12) return Eigen::VectorXd(Eigen::VectorXd::Zero(x.size()));
    return Eigen::VectorXd(x / n);
  };
}

CatalogEntry build_problem(const std::string& id) {
  CatalogEntry entry = [&] {
    if (id == "vehicle2d") return build_vehicle();
    if (id == "lqr5x3") return build_lqr(id, lqr5_A(), lqr5_B());
    if (id == "lqr10x5") return build_lqr(id, lqr10_A(), lqr10_B());
    throw UnknownProblem("unknown problem id: " + id);
  }();
  validate_f_sup_norm(entry.problem, 512, 0);
  return entry;
}

ProblemDefaults paper_defaults(const std::string& id) { return build_problem(id).defaults; }

std::vector<std::string> catalog_ids() { return {"vehicle2d", "lqr5x3", "lqr10x5"}; }

const Eigen::MatrixXd& lqr_dynamics_matrix(const std::string& id) {
  static const Eigen::MatrixXd a5 = lqr5_A();
  static const Eigen::MatrixXd a10 = lqr10_A();
  if (id == "lqr5x3") return a5;
  if (id == "lqr10x5") return a10;
  throw UnknownProblem("no dynamics matrix for problem id: " + id);
}

const Eigen::MatrixXd& lqr_input_matrix(const std::string& id) {
  static const Eigen::MatrixXd b5 = lqr5_B();
  static const Eigen::MatrixXd b10 = lqr10_B();
  if (id == "lqr5x3") return b5;
  if (id == "lqr10x5") return b10;
  throw UnknownProblem("no input matrix for problem id: " + id);
}

}  // namespace hjb
