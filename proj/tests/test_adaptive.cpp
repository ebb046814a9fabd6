#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "adaptgd/adaptive.hpp"
#include "adaptgd/baselines.hpp"
#include "adaptgd/diagnostics.hpp"
#include "adaptgd/problems.hpp"

using namespace adaptgd;

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

// State with lambda_prev/theta_prev and a 1-D pair giving ||dx|| = dx, ||dg|| = dg.
StepsizeState state_1d(double lambda_prev, double theta_prev, double dx, double dg,
                       Vector& x, Vector& grad) {
  StepsizeState s;
  s.lambda_prev = lambda_prev;
  s.theta_prev = theta_prev;
  s.x_prev = scalar(0.0);
  s.grad_prev = scalar(0.0);
  x = scalar(dx);
  grad = scalar(dg);
  return s;
}

FunctionObjective half_square() {
  return FunctionObjective(
      1, [](const Vector& x) { return x; }, [](const Vector& x) { return 0.5 * x.squaredNorm(); });
}

RunTrace run_adgd(AdaptiveConfig cfg, const Objective& f, const Vector& x0, int max_iter,
                  double grad_tol = 1e-8) {
  AdaptiveGradientDescent m(cfg);
  TerminationRule term;
  term.max_iter = max_iter;
  term.grad_tol = grad_tol;
  RunOptions opts;
  opts.record_iterates = true;
  return run(m, f, x0, term, opts);
}

}  // namespace

TEST_CASE("standard rule takes the smaller candidate") {
  Vector x, g;
  const auto s = state_1d(1.0, 3.0, 1.0, 1.0, x, g);
  CHECK(adgd_stepsize(s, x, g) == 0.5);
}

TEST_CASE("zero gradient difference leaves only the growth candidate") {
  StepsizeState s;
  s.lambda_prev = 0.3;
  s.theta_prev = 1.0;
  s.x_prev = scalar(0.0);
  s.grad_prev = scalar(2.0);
  CHECK(adgd_stepsize(s, scalar(1.0), scalar(2.0)) == doctest::Approx(std::sqrt(2.0) * 0.3).epsilon(1e-15));
}

TEST_CASE("both candidates infinite reuses the previous step") {
  StepsizeState s;
  s.lambda_prev = 0.25;
  s.theta_prev = kInf;
  s.x_prev = scalar(0.0);
  s.grad_prev = scalar(2.0);
  CHECK(adgd_stepsize(s, scalar(1.0), scalar(2.0)) == 0.25);
}

TEST_CASE("hand trace on half square") {
  const auto f = half_square();
  const AdaptiveStep s1 = adgd_bootstrap(0.1, scalar(1.0), scalar(1.0));
  CHECK(s1.x_next[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(std::isinf(s1.state.theta_prev));
  const Vector x1 = s1.x_next;
  const AdaptiveStep s2 = adgd_step(s1.state, x1, f.gradient(x1));
  CHECK(s2.lambda == 0.5);
  CHECK(s2.x_next[0] == doctest::Approx(0.45).epsilon(1e-15));
  CHECK(s2.theta == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(s2.state.lambda_prev == 0.5);

  const RunTrace t = run_adgd({.lambda0 = 0.1}, f, scalar(1.0), 3);
  CHECK(t.rows[1].lambda == 0.5);
  CHECK(t.rows[2].x[0] == doctest::Approx(0.45).epsilon(1e-15));
}

TEST_CASE("zero gradient is a fixed point") {
  StepsizeState s;
  s.lambda_prev = 1.0;
  s.theta_prev = 1.0;
  s.x_prev = scalar(1.0);
  s.grad_prev = scalar(1.0);
  const AdaptiveStep out = adgd_step(s, scalar(0.0), scalar(0.0));
  CHECK(out.x_next[0] == 0.0);
}

TEST_CASE("zero displacement with different gradients is an error") {
  StepsizeState s;
  s.lambda_prev = 1.0;
  s.theta_prev = 1.0;
  s.x_prev = scalar(1.0);
  s.grad_prev = scalar(1.0);
  CHECK_THROWS_AS(adgd_stepsize(s, scalar(1.0), scalar(2.0)), ZeroDisplacement);
}

TEST_CASE("plus rule candidates") {
  // g_k = g_{k-1}: bracket clamps to zero, growth candidate wins.
  StepsizeState s;
  s.lambda_prev = 1.0;
  s.theta_prev = 3.0;
  s.x_prev = scalar(0.0);
  s.grad_prev = scalar(1.0);
  CHECK(adgd_plus_stepsize(s, scalar(1.0), scalar(1.0)) == 2.0);

  // <g_k, g_{k-1}> = 0, ||g_k|| = 1, ||dx|| = sqrt(3): candidate 1.
  StepsizeState p;
  p.lambda_prev = 10.0;
  p.theta_prev = 3.0;
  p.x_prev = Vector::Zero(2);
  p.grad_prev = Vector::Unit(2, 1);
  Vector x(2);
  x << std::sqrt(3.0), 0.0;
  CHECK(adgd_plus_stepsize(p, x, Vector::Unit(2, 0)) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("plus candidate dominates the standard candidate along a trajectory") {
  const QuadraticProblem q = make_random_quadratic(5, 0.1, 1.0, 7);
  const RunTrace t = run_adgd({}, q, Vector::Zero(5), 200);
  for (std::size_t k = 1; k + 1 < t.rows.size(); ++k) {
    const Vector dx = t.rows[k].x - t.rows[k - 1].x;
    const Vector gk = q.gradient(t.rows[k].x);
    const Vector gp = q.gradient(t.rows[k - 1].x);
    if ((gk - gp).norm() == 0.0) continue;
    const double standard = dx.norm() / (2.0 * (gk - gp).norm());
    const double bracket = std::max(0.0, 3.0 * gk.squaredNorm() - 4.0 * gk.dot(gp));
    const double plus = bracket > 0.0 ? dx.norm() / std::sqrt(bracket) : kInf;
    CHECK(plus >= standard * (1.0 - 1e-12));
  }
}

TEST_CASE("strongly convex growth factor") {
  Vector x, g;
  const auto s = state_1d(1.0, 2.0, 20.0, 1.0, x, g);
  CHECK(adgd_sc_stepsize(s, x, g) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("strongly convex variant stays below 1/(2 mu) on the delta quadratic") {
  const double delta = 0.01;
  const QuadraticProblem q = make_delta_quadratic(delta);
  const RunTrace t = run_adgd({.rule = AdaptiveRule::StronglyConvex}, q, Vector::Constant(2, 1.0), 5000);
  CHECK(t.status == RunStatus::Converged);
  for (std::size_t k = 1; k < t.rows.size(); ++k)
    if (std::isfinite(t.rows[k].lambda)) CHECK(t.rows[k].lambda <= 1.0 / (2.0 * delta) * (1.0 + 1e-12));
}

TEST_CASE("general update config") {
  CHECK(GeneralUpdateConfig(0.5).beta() == 1.0);
  CHECK(GeneralUpdateConfig(0.9).beta() == doctest::Approx(5.0).epsilon(1e-14));
  CHECK_THROWS_AS(GeneralUpdateConfig{0.0}, ConfigError);
  CHECK_THROWS_AS(GeneralUpdateConfig{1.0}, ConfigError);
  CHECK_THROWS_AS(GeneralUpdateConfig{kNaN}, ConfigError);

  Vector x, g;
  const auto s = state_1d(1.0, 0.8, 1.0, 1.0, x, g);
  CHECK(adgd_general_stepsize(GeneralUpdateConfig(0.9), s, x, g) == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("general update with alpha one half is bit-identical to the standard rule") {
  const LogisticProblem p = make_synthetic_logistic(80, 8, 2);
  const RunTrace a = run_adgd({}, p, Vector::Zero(8), 300);
  const RunTrace b = run_adgd({.rule = AdaptiveRule::General, .alpha = 0.5}, p, Vector::Zero(8), 300);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t k = 0; k < a.rows.size(); ++k) CHECK(a.rows[k].x == b.rows[k].x);
}

TEST_CASE("general family converges and respects its floor") {
  const QuadraticProblem q = make_random_quadratic(10, 0.05, 2.0, 4);
  const double L = *q.meta().L_global;
  for (double alpha : {0.3, 0.5, 0.7, 0.9}) {
    CAPTURE(alpha);
    const RunTrace t = run_adgd({.rule = AdaptiveRule::General, .alpha = alpha}, q, Vector::Zero(10), 20000);
    CHECK(t.status == RunStatus::Converged);
    for (std::size_t k = 1; k < t.rows.size(); ++k)
      if (std::isfinite(t.rows[k].lambda))
        CHECK(t.rows[k].lambda >= std::min(alpha, 2.0 * alpha * (1.0 - alpha)) / L - 1e-10);
    CHECK(stepsize_floor(AdaptiveRule::General, alpha, L) == std::min(alpha, 2.0 * alpha * (1.0 - alpha)) / L);
  }
}

TEST_CASE("known L candidate") {
  const double L = 4.0;
  const KnownLConfig cfg(L);
  CHECK(cfg.lambda0() == 1.0 / L);
  CHECK_THROWS_AS(KnownLConfig{0.0}, ConfigError);
  Vector x, g;
  // ||dx||/||dg|| = 1/L.
  const auto s = state_1d(1.0 / L, kInf, 1.0, L, x, g);
  CHECK(adgd_knownL_stepsize(cfg, s, x, g) == doctest::Approx(1.5 / L).epsilon(1e-15));
}

TEST_CASE("known L on a scaled square keeps every step above 1/(2L)") {
  const double L = 3.0;
  FunctionObjective f(
      1, [L](const Vector& x) { return (L * x).eval(); }, [L](const Vector& x) { return 0.5 * L * x.squaredNorm(); });
  const RunTrace t = run_adgd({.rule = AdaptiveRule::KnownL, .L = L}, f, scalar(5.0), 1000);
  CHECK(t.status == RunStatus::Converged);
  for (std::size_t k = 1; k < t.rows.size(); ++k)
    if (std::isfinite(t.rows[k].lambda)) CHECK(t.rows[k].lambda >= 1.0 / (2.0 * L));
  const ConstructionCheck c = check_construction(t, {.rule = AdaptiveRule::KnownL, .L = L});
  CHECK(c.ledger_violations == 0);
  CHECK(c.curvature_violations == 0);
}

TEST_CASE("known L lipschitz cross-check warns on a too-small L") {
  const QuadraticProblem q = make_random_quadratic(6, 0.1, 1.0, 3);
  AdaptiveGradientDescent honest({.rule = AdaptiveRule::KnownL, .L = 1.0, .check_lipschitz = true});
  AdaptiveGradientDescent lying({.rule = AdaptiveRule::KnownL, .L = 0.2, .check_lipschitz = true});
  TerminationRule term;
  term.max_iter = 50;
  run(honest, q, Vector::Zero(6), term);
  run(lying, q, Vector::Zero(6), term);
  CHECK(honest.lipschitz_warnings() == 0);
  CHECK(lying.lipschitz_warnings() > 0);
}

TEST_CASE("adaptive method beats untuned gd on the anisotropic quadratic") {
  const double delta = 0.01;
  const QuadraticProblem q = make_delta_quadratic(delta);
  const RunTrace t = run_adgd({}, q, Vector::Constant(2, 1.0), 100000);
  CHECK(t.status == RunStatus::Converged);
  CHECK(t.x_final.norm() <= 1e-8 / delta);
  // GD with lambda = 1 needs ceil(log(eps)/log(1 - delta)) steps to reach grad norm eps.
  const int gd_steps = static_cast<int>(std::ceil(std::log(1e-8 / delta) / std::log(1.0 - delta)));
  CHECK(t.iterations() < gd_steps);
}

TEST_CASE("construction invariants hold for every rule") {
  const LogisticProblem p = make_synthetic_logistic(100, 10, 6);
  const double L = *p.meta().L_global;
  for (auto rule : {AdaptiveRule::Standard, AdaptiveRule::StronglyConvex, AdaptiveRule::General,
                    AdaptiveRule::KnownL, AdaptiveRule::Plus}) {
    CAPTURE(to_string(rule));
    const RunTrace t = run_adgd({.rule = rule, .alpha = 0.7, .L = L}, p, Vector::Zero(10), 500);
    const ConstructionCheck c = check_construction(t, {.rule = rule, .alpha = 0.7, .L = L});
    CHECK(c.steps_checked > 0);
    CHECK(c.growth_violations == 0);
    CHECK(c.curvature_violations == 0);
    CHECK(c.ledger_violations == 0);
  }
}

TEST_CASE("method reset restarts from the bootstrap") {
  const QuadraticProblem q = make_random_quadratic(4, 0.1, 1.0, 8);
  AdaptiveGradientDescent m;
  TerminationRule term;
  term.max_iter = 30;
  const RunTrace a = run(m, q, Vector::Zero(4), term);
  const RunTrace b = run(m, q, Vector::Zero(4), term);
  CHECK(a.x_final == b.x_final);
}
