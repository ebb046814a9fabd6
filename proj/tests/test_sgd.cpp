#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

#include "adaptgd/adaptive.hpp"
#include "adaptgd/problems.hpp"
#include "adaptgd/sgd.hpp"

using namespace adaptgd;

namespace {

// Records every sample gradient request of an inner oracle.
class Recorder final : public StochasticObjective {
 public:
  explicit Recorder(const StochasticObjective& inner) : inner_(inner) {}
  int dim() const override { return inner_.dim(); }
  std::size_t num_samples() const override { return inner_.num_samples(); }
  Vector sample_gradient(std::size_t i, const Vector& x) const override {
    calls.emplace_back(i, x);
    return inner_.sample_gradient(i, x);
  }
  mutable std::vector<std::pair<std::size_t, Vector>> calls;

 private:
  const StochasticObjective& inner_;
};

StochasticQuadraticFamily two_point_family() {
  std::vector<Matrix> H{Matrix::Identity(1, 1), Matrix::Identity(1, 1)};
  std::vector<Vector> c{Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
  return StochasticQuadraticFamily(H, c, 1.0, 1.0);
}

}  // namespace

TEST_CASE("single sample with alpha one half reproduces the deterministic method") {
  const StochasticQuadraticFamily fam = make_interpolating_ls(1, 6, 0.1, 1.0, 4);
  SgdConfig cfg;
  cfg.alpha = 0.5;
  TerminationRule term;
  term.max_iter = 200;
  RunOptions opts;
  opts.record_iterates = true;
  const RunTrace s = run_sgd(cfg, fam, Vector::Zero(6), term, opts);
  AdaptiveGradientDescent m;
  const RunTrace d = run(m, fam, Vector::Zero(6), term, opts);
  REQUIRE(s.rows.size() == d.rows.size());
  for (std::size_t k = 0; k < s.rows.size(); ++k) CHECK(s.rows[k].x == d.rows[k].x);
}

TEST_CASE("perfectly conditioned samples pin the step to alpha") {
  std::vector<Matrix> H;
  std::vector<Vector> c;
  for (int i = 0; i < 5; ++i) {
    H.push_back(Matrix::Identity(1, 1));
    c.push_back(Vector::Constant(1, static_cast<double>(i) - 2.0));
  }
  const StochasticQuadraticFamily fam(H, c, 1.0, 1.0);
  for (auto option : {SgdOption::BiasedSameSample, SgdOption::UnbiasedFreshSample}) {
    SgdConfig cfg;
    cfg.alpha = 0.3;
    cfg.option = option;
    cfg.seed = 17;
    TerminationRule term;
    term.max_iter = 300;
    term.grad_tol = 1e-300;
    const RunTrace t = run_sgd(cfg, fam, Vector::Constant(1, 10.0), term);
    for (std::size_t k = 1; k < t.rows.size(); ++k)
      if (std::isfinite(t.rows[k].lambda)) {
        CHECK(t.rows[k].lambda >= 0.3 * (1.0 - 1e-10));
        CHECK(t.rows[k].lambda <= 0.3 * (1.0 + 1e-10));
      }
  }
}

TEST_CASE("sample gradient statistics") {
  const StochasticQuadraticFamily interp = make_interpolating_ls(10, 5, 0.1, 1.0, 1);
  CHECK(sgd_variance_stats(interp, *interp.meta().x_star).second_moment <= 1e-28);

  const StochasticQuadraticFamily fam = two_point_family();
  const SampleGradientStats s = sgd_variance_stats(fam, Vector::Zero(1));
  CHECK(s.second_moment == 1.0);
  CHECK(s.mean_gradient.norm() == 0.0);
  CHECK(s.variance == 1.0);
}

TEST_CASE("variance bound at random points") {
  const StochasticQuadraticFamily fam = make_stochastic_quadratics(8, 4, 0.2, 1.5, 3);
  const Vector& xs = *fam.meta().x_star;
  const double fs = *fam.meta().f_star;
  const double sigma2 = sgd_variance_stats(fam, xs).second_moment;
  const double L = fam.sample_L();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    Vector x(4);
    for (auto& e : x) e = 3.0 * n01(rng);
    const double lhs = sgd_variance_stats(fam, x).second_moment;
    CHECK(lhs <= 4.0 * L * (fam.value(x) - fs) + 2.0 * sigma2 + 1e-12);
  }
}

TEST_CASE("unbiased option measures curvature on a sample drawn before the step sample") {
  const StochasticQuadraticFamily fam = make_stochastic_quadratics(20, 3, 0.1, 1.0, 9);
  Recorder rec(fam);
  SgdConfig cfg;
  cfg.option = SgdOption::UnbiasedFreshSample;
  cfg.alpha = 0.4;
  cfg.seed = 123;
  cfg.lambda0 = 0.1;
  const SgdStep boot = sgd_bootstrap(cfg, rec, Vector::Constant(3, 1.0));
  rec.calls.clear();
  const Vector x1 = boot.x_next;
  const SgdStep s = sgd_step(cfg, boot.state, rec, x1);
  REQUIRE(rec.calls.size() == 3);
  const std::size_t zeta = rec.calls[0].first;
  const std::size_t xi = rec.calls[2].first;
  CHECK(rec.calls[1].first == zeta);
  const bool pair_order = rec.calls[0].second == x1 && rec.calls[1].second == boot.state.x_prev;
  const bool swapped = rec.calls[1].second == x1 && rec.calls[0].second == boot.state.x_prev;
  CHECK((pair_order || swapped));
  CHECK(rec.calls[2].second == x1);

  // Replay the generator to confirm the draw order (zeta first, then xi).
  std::mt19937_64 replay = boot.state.rng;
  CHECK(draw_batch(replay, 20, 1).front() == zeta);
  CHECK(draw_batch(replay, 20, 1).front() == xi);

  const Vector dg = fam.sample_gradient(zeta, x1) - fam.sample_gradient(zeta, boot.state.x_prev);
  const double dx = (x1 - boot.state.x_prev).norm();
  const double expected = std::min(std::sqrt(1.0 + boot.state.theta_prev) * boot.state.lambda_prev,
                                   0.4 * dx / dg.norm());
  CHECK(s.lambda == doctest::Approx(expected).epsilon(1e-14));
  CHECK(s.x_next.isApprox(x1 - s.lambda * fam.sample_gradient(xi, x1), 1e-14));
}

TEST_CASE("biased option reuses the step sample") {
  const StochasticQuadraticFamily fam = make_stochastic_quadratics(20, 3, 0.1, 1.0, 9);
  Recorder rec(fam);
  SgdConfig cfg;
  cfg.seed = 7;
  cfg.lambda0 = 0.1;
  const SgdStep boot = sgd_bootstrap(cfg, rec, Vector::Constant(3, 1.0));
  rec.calls.clear();
  sgd_step(cfg, boot.state, rec, boot.x_next);
  REQUIRE(rec.calls.size() == 2);
  CHECK(rec.calls[0].first == rec.calls[1].first);
}

TEST_CASE("stochastic runs are reproducible from the seed") {
  const StochasticQuadraticFamily fam = make_stochastic_quadratics(30, 5, 0.1, 1.0, 2);
  SgdConfig cfg;
  cfg.seed = 99;
  cfg.batch_size = 4;
  TerminationRule term;
  term.max_iter = 200;
  const RunTrace a = run_sgd(cfg, fam, Vector::Zero(5), term);
  const RunTrace b = run_sgd(cfg, fam, Vector::Zero(5), term);
  CHECK(a.x_final == b.x_final);
  cfg.seed = 100;
  const RunTrace c = run_sgd(cfg, fam, Vector::Zero(5), term);
  CHECK(a.x_final != c.x_final);
}

TEST_CASE("config validation") {
  SgdConfig cfg;
  cfg.batch_size = 11;
  CHECK_THROWS_AS(cfg.validate(10), ConfigError);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(10), ConfigError);
  cfg.batch_size = 1;
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(10), ConfigError);
  cfg.alpha = 0.5;
  cfg.lambda0 = -1.0;
  CHECK_THROWS_AS(cfg.validate(10), ConfigError);
}

TEST_CASE("overparameterized problem converges linearly in mean") {
  const int d = 10;
  const double mu = 0.1;
  const double L = 1.0;
  const StochasticQuadraticFamily fam = make_interpolating_ls(50, d, mu, L, 31);
  const Vector& xs = *fam.meta().x_star;
  const int seeds = 10;
  const int iters = 1500;
  std::vector<double> mean(iters + 1, 0.0);
  for (int s = 0; s < seeds; ++s) {
    SgdConfig cfg;
    cfg.alpha = mu / L;
    cfg.seed = static_cast<std::uint64_t>(s);
    TerminationRule term;
    term.max_iter = iters;
    term.grad_tol = 1e-300;
    RunOptions opts;
    opts.record_iterates = true;
    opts.record_values = false;
    const RunTrace t = run_sgd(cfg, fam, Vector::Zero(d), term, opts);
    for (int k = 0; k <= iters; ++k) {
      const auto& row = t.rows[std::min<std::size_t>(static_cast<std::size_t>(k), t.rows.size() - 1)];
      mean[static_cast<std::size_t>(k)] += (row.x - xs).squaredNorm() / seeds;
    }
  }
  const double C0 = 2.0 * (1.0 + 1e-20 * L * L) * xs.squaredNorm();
  for (int k = 0; k <= iters; ++k)
    CHECK(mean[static_cast<std::size_t>(k)] <= std::exp(-k * (mu / L) * mu / L) * C0);
  CHECK(mean.back() < 1e-10);
}
