#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "adaptgd/accel.hpp"
#include "adaptgd/adaptive.hpp"
#include "adaptgd/baselines.hpp"
#include "adaptgd/datasets.hpp"
#include "adaptgd/diagnostics.hpp"
#include "adaptgd/experiment.hpp"
#include "adaptgd/problems.hpp"
#include "adaptgd/sgd.hpp"

namespace adaptgd {

namespace {

using Outcome = InvariantResult::Outcome;

struct Check {
  std::string name;
  std::function<InvariantResult()> body;
};

InvariantResult pass(std::string detail = {}) { return {"", Outcome::Pass, std::move(detail)}; }
InvariantResult fail(std::string detail) { return {"", Outcome::Fail, std::move(detail)}; }
InvariantResult skip(std::string detail) { return {"", Outcome::Skip, std::move(detail)}; }

InvariantResult expect_zero(int violations, const std::string& what) {
  std::ostringstream s;
  s << violations << ' ' << what;
  return violations == 0 ? pass(s.str()) : fail(s.str());
}

Vector seeded_point(int d, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  Vector x(d);
  for (int i = 0; i < d; ++i) x(i) = u(rng);
  return x;
}

bool same_bits(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

RunOptions with_iterates() {
  RunOptions o;
  o.record_iterates = true;
  return o;
}

int gradient_mismatches(const Objective& f, int points, double scale) {
  int bad = 0;
  for (int s = 0; s < points; ++s) {
    const Vector x = seeded_point(f.dim(), 1000 + s, scale);
    const Vector g = f.gradient(x);
    const Vector fd = finite_diff_gradient(f, x, 1e-6 * (1.0 + x.norm()));
    if ((g - fd).norm() > 1e-5 * (1.0 + g.norm())) ++bad;
  }
  return bad;
}

/// Algorithm 1 with the growth factor replaced by 2: must trip the growth check.
class DoublingGrowth final : public Method {
 public:
  std::string name() const override { return "mutant"; }
  void reset() override { started_ = false; }
  StepReport step(const Objective&, const Vector& x, const Vector& grad, Vector& x_next) override {
    StepReport r;
    double lambda = 1e-10;
    if (started_) {
      const double dx = (x - x_prev_).norm();
      const double dg = (grad - g_prev_).norm();
      r.dx_norm = dx;
      r.dg_norm = dg;
      lambda = std::min(2.0 * lambda_prev_, dg > 0.0 ? dx / (2.0 * dg) : kInf);
      if (std::isinf(lambda)) lambda = lambda_prev_;
      r.theta = lambda / lambda_prev_;
    } else {
      r.theta = kInf;
    }
    r.lambda = lambda;
    x_prev_ = x;
    g_prev_ = grad;
    lambda_prev_ = lambda;
    started_ = true;
    x_next = x - lambda * grad;
    return r;
  }

 private:
  bool started_ = false;
  double lambda_prev_ = 0.0;
  Vector x_prev_, g_prev_;
};

std::vector<Check> checks() {
  std::vector<Check> c;

  // core
  c.push_back({"core.finite_difference_gradients", [] {
                 int bad = gradient_mismatches(make_random_quadratic(8, 0.1, 4.0, 3), 20, 3.0);
                 bad += gradient_mismatches(make_synthetic_logistic(60, 8, 3), 20, 3.0);
                 const MatrixFactorizationProblem mf(make_low_rank_matrix(6, 5, 2, 3), 3);
                 bad += gradient_mismatches(mf, 20, 1.0);
                 bad += gradient_mismatches(make_cubic_synthetic(8, 10.0, 3), 20, 3.0);
                 bad += gradient_mismatches(make_quartic(), 20, 3.0);
                 bad += gradient_mismatches(make_stochastic_quadratics(10, 4, 0.1, 1.0, 3), 20, 3.0);
                 return expect_zero(bad, "mismatching points");
               }});
  c.push_back({"core.run_determinism", [] {
                 const auto f = make_synthetic_logistic(80, 6, 5);
                 AdaptiveGradientDescent a, b;
                 const auto t1 = run(a, f, Vector::Zero(6), {}, with_iterates());
                 const auto t2 = run(b, f, Vector::Zero(6), {}, with_iterates());
                 bool same = t1.rows.size() == t2.rows.size();
                 for (std::size_t i = 0; same && i < t1.rows.size(); ++i)
                   same = t1.rows[i].x == t2.rows[i].x && same_bits(t1.rows[i].lambda, t2.rows[i].lambda);
                 return same ? pass() : fail("traces differ");
               }});
  c.push_back({"core.stochastic_average", [] {
                 const auto f = make_synthetic_logistic(50, 5, 9);
                 const AveragedObjective avg(f);
                 const Vector x = seeded_point(5, 4);
                 const double err = (avg.gradient(x) - f.gradient(x)).norm() / f.gradient(x).norm();
                 return err <= 1e-12 ? pass() : fail("relative error " + std::to_string(err));
               }});

  // adgd
  c.push_back({"adgd.construction", [] {
                 int bad = 0;
                 const auto q = make_random_quadratic(10, 0.01, 1.0, 1);
                 const auto lg = make_synthetic_logistic(100, 10, 1);
                 for (auto rule : {AdaptiveRule::Standard, AdaptiveRule::StronglyConvex,
                                   AdaptiveRule::General, AdaptiveRule::KnownL}) {
                   AdaptiveConfig cfg;
                   cfg.rule = rule;
                   cfg.alpha = 0.7;
                   cfg.L = 1.0;
                   AdaptiveGradientDescent m(cfg);
                   const auto tr = run(m, q, Vector::Zero(10), {});
                   const auto cc = check_construction(tr, {rule, 0.7, 1.0});
                   bad += cc.growth_violations + cc.curvature_violations + cc.ledger_violations;
                 }
                 AdaptiveGradientDescent m;
                 const auto cc = check_construction(run(m, lg, Vector::Zero(10), {}), {});
                 bad += cc.growth_violations + cc.curvature_violations;
                 return expect_zero(bad, "violations");
               }});
  c.push_back({"adgd.stepsize_floor", [] {
                 int bad = 0;
                 for (std::uint64_t s = 0; s < 5; ++s) {
                   const auto q = make_random_quadratic(10, 0.01, 2.0, s);
                   AdaptiveGradientDescent m;
                   bad += count_stepsize_floor_violations(run(m, q, Vector::Zero(10), {}), 0.25);
                 }
                 return expect_zero(bad, "steps below 1/(2L)");
               }});
  c.push_back({"adgd.energy_and_certificate", [] {
                 int bad = 0;
                 TerminationRule t;
                 t.max_iter = 300;
                 const auto q = make_delta_quadratic(0.01);
                 AdaptiveGradientDescent m;
                 Vector x0(2);
                 x0 << 1.0, 1.0;
                 auto tr = run(m, q, x0, t, with_iterates());
                 auto cert = certify_convex_trace(tr, q, q.meta());
                 bad += cert.lemma_violations + cert.monotonicity_violations +
                        cert.certificate_violations + cert.negative_weights;
                 const auto lg = make_synthetic_logistic(100, 10, 2);
                 const ProblemMeta ref = reference_meta(lg, Vector::Zero(10));
                 auto tr2 = run(m, lg, Vector::Zero(10), t, with_iterates());
                 cert = certify_convex_trace(tr2, lg, ref);
                 bad += cert.lemma_violations + cert.monotonicity_violations +
                        cert.certificate_violations + cert.negative_weights;
                 return expect_zero(bad, "violations");
               }});
  c.push_back({"adgd.local_smoothness", [] {
                 TerminationRule t;
                 t.max_iter = 10000;
                 int failures = 0;
                 for (std::uint64_t s = 0; s < 3; ++s) {
                   AdaptiveGradientDescent m;
                   if (run(m, make_quartic(), seeded_point(1, s, 10.0), t).status !=
                       RunStatus::Converged)
                     ++failures;
                   if (run(m, make_cubic_synthetic(10, 10.0, s), seeded_point(10, s, 10.0), t).status !=
                       RunStatus::Converged)
                     ++failures;
                 }
                 return expect_zero(failures, "runs not converged");
               }});
  c.push_back({"adgd.general_alpha_half_reduction", [] {
                 const auto lg = make_synthetic_logistic(60, 6, 4);
                 AdaptiveConfig cfg;
                 cfg.rule = AdaptiveRule::General;
                 cfg.alpha = 0.5;
                 AdaptiveGradientDescent a, b(cfg);
                 const auto t1 = run(a, lg, Vector::Zero(6), {}, with_iterates());
                 const auto t2 = run(b, lg, Vector::Zero(6), {}, with_iterates());
                 bool same = t1.rows.size() == t2.rows.size();
                 for (std::size_t i = 0; same && i < t1.rows.size(); ++i) same = t1.rows[i].x == t2.rows[i].x;
                 return same ? pass() : fail("trajectories differ");
               }});
  c.push_back({"adgd.mutation_growth_factor_2_detected", [] {
                 DoublingGrowth mutant;
                 TerminationRule t;
                 t.max_iter = 200;
                 const auto tr = run(mutant, make_quartic(), Vector::Constant(1, 10.0), t);
                 const auto cc = check_construction(tr, {});
                 return cc.growth_violations > 0
                            ? pass(std::to_string(cc.growth_violations) + " violations flagged")
                            : fail("mutant not detected");
               }});

  // accel
  c.push_back({"accel.momentum_range_and_construction", [] {
                 const auto q = make_random_quadratic(10, 1e-3, 1.0, 6);
                 Vector x = seeded_point(10, 6);
                 AccelStep s = accel_bootstrap(1e-10, 0.0, x, q.gradient(x));
                 int bad = 0;
                 for (int k = 1; k < 500; ++k) {
                   const AccelState prev = s.state;
                   x = s.x_next;
                   const Vector g = q.gradient(x);
                   if (g.norm() < 1e-10) break;
                   s = accel_step(prev, x, g);
                   if (!(s.beta >= 0.0 && s.beta < 1.0)) ++bad;
                   if (std::isfinite(prev.Theta_prev) &&
                       s.Lambda > std::sqrt(1.0 + prev.Theta_prev / 2.0) * prev.Lambda_prev * (1 + 1e-15))
                     ++bad;
                   if (s.dx_norm > 0.0) {
                     const double cand = s.dg_norm / (2.0 * s.dx_norm);
                     if (cand < 0.5e-3 * (1 - 1e-9) || cand > 0.5 * (1 + 1e-9)) ++bad;
                     if (2.0 * s.Lambda * s.dx_norm > s.dg_norm * (1 + 1e-12)) ++bad;
                   }
                 }
                 return expect_zero(bad, "violations");
               }});

  // sgd
  c.push_back({"sgd.stepsize_sandwich", [] {
                 const auto fam = make_stochastic_quadratics(50, 5, 0.1, 1.0, 8);
                 int bad = 0;
                 for (auto option : {SgdOption::BiasedSameSample, SgdOption::UnbiasedFreshSample})
                   for (std::uint64_t s = 0; s < 5; ++s) {
                     SgdConfig cfg;
                     cfg.option = option;
                     cfg.seed = s;
                     TerminationRule t;
                     t.max_iter = 300;
                     const auto tr = run_sgd(cfg, fam, Vector::Zero(5), t);
                     for (std::size_t k = 1; k < tr.rows.size(); ++k) {
                       const double l = tr.rows[k].lambda;
                       if (std::isnan(l)) continue;
                       if (l < 0.5 * (1 - 1e-10) || l > 5.0 * (1 + 1e-10)) ++bad;
                     }
                   }
                 return expect_zero(bad, "steps outside [alpha/L, alpha/mu]");
               }});
  c.push_back({"sgd.seeded_determinism", [] {
                 const auto fam = make_interpolating_ls(20, 4, 0.1, 1.0, 2);
                 SgdConfig cfg;
                 cfg.seed = 11;
                 const auto t1 = run_sgd(cfg, fam, Vector::Zero(4), {});
                 const auto t2 = run_sgd(cfg, fam, Vector::Zero(4), {});
                 return t1.x_final == t2.x_final ? pass() : fail("trajectories differ");
               }});

  // baselines
  c.push_back({"baselines.gd_rate_bound", [] {
                 int bad = 0;
                 for (std::uint64_t s = 0; s < 3; ++s) {
                   const auto q = make_random_quadratic(10, 0.0, 2.0, s);
                   FixedStepGD gd(0.5);
                   TerminationRule t;
                   t.max_iter = 300;
                   const Vector x0 = Vector::Zero(10);
                   const auto tr = run(gd, q, x0, t);
                   const double r0 = (x0 - *q.meta().x_star).squaredNorm();
                   for (const auto& row : tr.rows)
                     if (row.f_value - *q.meta().f_star > 2.0 * r0 / (2.0 * (2 * row.k + 1)) * (1 + 1e-9))
                       ++bad;
                 }
                 return expect_zero(bad, "violations");
               }});
  c.push_back({"baselines.armijo_postcondition", [] {
                 const auto lg = make_synthetic_logistic(80, 6, 1);
                 LineSearchParams ls;
                 Vector x = seeded_point(6, 2, 3.0);
                 int bad = 0;
                 double step = ls.init_step;
                 for (int k = 0; k < 50; ++k) {
                   const Vector g = lg.gradient(x);
                   const double fx = lg.value(x);
                   const ArmijoResult r = armijo_search(lg, x, g, fx, step, ls);
                   if (!(r.f_next <= fx - ls.sufficient_decrease * r.step * g.squaredNorm())) ++bad;
                   x = r.x_next;
                   step = 2.0 * r.step;
                 }
                 return expect_zero(bad, "violations");
               }});
  c.push_back({"baselines.polyak_monotone_distance", [] {
                 const auto q = make_random_quadratic(8, 0.01, 1.0, 4, true);
                 PolyakMethod m(0.0);
                 TerminationRule t;
                 t.max_iter = 300;
                 const auto tr = run(m, q, Vector::Ones(8), t, with_iterates());
                 int bad = 0;
                 for (std::size_t k = 1; k < tr.rows.size(); ++k)
                   if (tr.rows[k].x.norm() > tr.rows[k - 1].x.norm() * (1 + 1e-12)) ++bad;
                 return expect_zero(bad, "increases");
               }});
  c.push_back({"baselines.bb_spd_quadratics", [] {
                 int failures = 0;
                 for (auto v : {BBVariant::BB1, BBVariant::BB2})
                   for (std::uint64_t s = 0; s < 3; ++s) {
                     const auto q = make_random_quadratic(10, 0.01, 1.0, s);
                     BarzilaiBorwein bb(v);
                     TerminationRule t;
                     t.max_iter = 10 * 10 * 100;
                     if (run(bb, q, Vector::Zero(10), t).status != RunStatus::Converged) ++failures;
                   }
                 return expect_zero(failures, "runs not converged");
               }});

  // problems
  c.push_back({"problems.logistic_L_certificate", [] {
                 const auto lg = make_synthetic_logistic(100, 10, 3);
                 const double L = *lg.meta().L_global;
                 int bad = 0;
                 for (int s = 0; s < 100; ++s) {
                   const Vector x = seeded_point(10, 2 * s, 5.0);
                   const Vector y = seeded_point(10, 2 * s + 1, 5.0);
                   if ((lg.gradient(x) - lg.gradient(y)).norm() > L * (x - y).norm()) ++bad;
                 }
                 return expect_zero(bad, "pairs above L");
               }});
  c.push_back({"problems.cubic_growth", [] {
                 const auto cr = make_cubic_synthetic(10, 20.0, 1);
                 const Vector u = seeded_point(10, 5).normalized();
                 int bad = 0;
                 for (double r : {10.0, 100.0}) {
                   const double ratio = cr.gradient(r * u).norm() / (0.5 * cr.M() * r * r);
                   if (std::abs(ratio - 1.0) > 0.1) ++bad;
                 }
                 return expect_zero(bad, "radii off by more than 10%");
               }});
  c.push_back({"problems.factorization_value_at_zero", [] {
                 const MatrixFactorizationProblem mf(make_low_rank_matrix(7, 5, 2, 1), 3);
                 const double f0 = mf.value(Vector::Zero(mf.dim()));
                 return f0 == 0.5 * mf.A().squaredNorm() ? pass() : fail("value mismatch");
               }});
  c.push_back({"problems.interpolation", [] {
                 const auto fam = make_interpolating_ls(10, 5, 0.1, 1.0, 1);
                 double worst = 0.0;
                 for (std::size_t i = 0; i < fam.num_samples(); ++i)
                   worst = std::max(worst, fam.sample_gradient(i, *fam.meta().x_star).norm());
                 return worst <= 1e-14 ? pass() : fail("max sample gradient " + std::to_string(worst));
               }});

  // diagnostics
  c.push_back({"diagnostics.sc_contraction", [] {
                 int bad = 0;
                 for (double kappa : {10.0, 100.0}) {
                   const auto q = make_random_quadratic(8, 1.0 / kappa, 1.0, 2, true);
                   AdaptiveConfig cfg;
                   cfg.rule = AdaptiveRule::StronglyConvex;
                   AdaptiveGradientDescent m(cfg);
                   TerminationRule t;
                   t.max_iter = 20000;
                   const auto tr = run(m, q, Vector::Ones(8), t, with_iterates());
                   const auto se = sc_energy(tr, q.meta());
                   for (std::size_t i = 0; i < se.k.size(); ++i)
                     if (se.k[i] > 2 && se.ratio[i] > 1.0 - 1.0 / (4.0 * kappa) + 1e-9) ++bad;
                 }
                 return expect_zero(bad, "ratios above 1 - 1/(4 kappa)");
               }});
  c.push_back({"diagnostics.known_l_ledger", [] {
                 int bad = 0;
                 for (std::uint64_t s = 0; s < 3; ++s) {
                   const auto q = make_random_quadratic(8, 0.01, 1.0, s);
                   AdaptiveConfig cfg;
                   cfg.rule = AdaptiveRule::KnownL;
                   cfg.L = 1.0;
                   AdaptiveGradientDescent m(cfg);
                   bad += check_construction(run(m, q, Vector::Zero(8), {}),
                                             {AdaptiveRule::KnownL, 0.5, 1.0})
                              .ledger_violations;
                 }
                 return expect_zero(bad, "violations");
               }});

  // cli
  c.push_back({"cli.config_round_trip", [] {
                 const Json j = Json::parse(R"({"problem":{"kind":"logistic_synthetic","params":{"n":50}},
                   "methods":[{"type":"adgd"},{"type":"gd"},{"type":"sgd","params":{"option":"unbiased"}}],
                   "seeds":[1,2]})");
                 const auto a = ExperimentConfig::from_json(j);
                 const auto b = ExperimentConfig::from_json(a.to_json());
                 return a.to_json() == b.to_json() ? pass() : fail("round trip changed the config");
               }});
  c.push_back({"datasets.mushrooms", [] {
                 const char* root = std::getenv(kDataEnv);
                 if (root == nullptr) return skip(std::string(kDataEnv) + " not set");
                 const auto path = std::filesystem::path(root) / "mushrooms";
                 if (!std::filesystem::exists(path)) return skip("mushrooms not found");
                 const LabeledData d = load_libsvm(path.string());
                 const bool binary = ((d.A.array() == 0.0) || (d.A.array() == 1.0)).all();
                 if (d.A.rows() != 8124 || d.A.cols() != 112 || !binary)
                   return fail("unexpected shape or values");
                 const LogisticProblem lg(d.A, d.b, 1.0 / 8124);
                 AdaptiveGradientDescent m;
                 TerminationRule t;
                 t.max_iter = 2000;
                 const auto tr = run(m, lg, Vector::Zero(112), t);
                 double lo = kInf, hi = 0.0;
                 for (const auto& r : tr.rows)
                   if (r.k >= 1 && std::isfinite(r.lambda)) lo = std::min(lo, r.lambda), hi = std::max(hi, r.lambda);
                 return hi > 10.0 * lo ? pass() : fail("stepsize range below 10x");
               }});
  return c;
}

}  // namespace

std::vector<InvariantResult> run_invariant_suite() {
  std::vector<InvariantResult> out;
  for (const auto& check : checks()) {
    InvariantResult r;
    try {
      r = check.body();
    } catch (const std::exception& e) {
      r = fail(std::string("exception: ") + e.what());
    }
    r.name = check.name;
    out.push_back(std::move(r));
  }
  return out;
}

int cmd_verify(std::ostream& out) {
  int failures = 0;
  for (const auto& r : run_invariant_suite()) {
    const char* tag = r.outcome == Outcome::Pass ? "[PASS]" : r.outcome == Outcome::Fail ? "[FAIL]" : "[SKIP]";
    if (r.outcome == Outcome::Fail) ++failures;
    out << tag << ' ' << r.name;
    if (!r.detail.empty()) out << " (" << r.detail << ')';
    out << '\n';
  }
  out << (failures == 0 ? "all invariants hold\n" : std::to_string(failures) + " invariant(s) failed\n");
  return failures == 0 ? kExitOk : kExitViolation;
}

}  // namespace adaptgd
