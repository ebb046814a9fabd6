#include <cmath>
#include <random>

#include "doctest.h"

#include "adaptgd/problems.hpp"

using namespace adaptgd;

namespace {

Vector gaussian(int d, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n01;
  Vector x(d);
  for (auto& e : x) e = scale * n01(rng);
  return x;
}

void check_fd(const Objective& f, std::uint64_t seed, int points = 20, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  for (int i = 0; i < points; ++i) {
    const Vector x = gaussian(f.dim(), rng, scale);
    const Vector g = f.gradient(x);
    const Vector fd = finite_diff_gradient(f, x, 1e-6);
    CHECK((fd - g).norm() <= 1e-5 * std::max(1.0, g.norm()));
  }
}

}  // namespace

TEST_CASE("delta quadratic") {
  const QuadraticProblem id = make_delta_quadratic(1.0);
  CHECK(id.H().isApprox(Matrix::Identity(2, 2)));
  CHECK(id.meta().condition_number() == 1.0);

  const QuadraticProblem q = make_delta_quadratic(0.01);
  CHECK(q.meta().condition_number() == doctest::Approx(100.0));
  CHECK(*q.meta().L_global == 1.0);
  CHECK(*q.meta().mu_global == 0.01);
  CHECK(q.meta().x_star->isZero(0.0));
  CHECK(*q.meta().f_star == 0.0);
  CHECK_THROWS_AS(make_delta_quadratic(0.0), ConfigError);
  CHECK_THROWS_AS(make_delta_quadratic(1.5), ConfigError);
}

TEST_CASE("quadratic meta and validation") {
  Matrix H(2, 2);
  H << 2.0, 1.0, 1.0, 3.0;
  Vector b(2);
  b << 1.0, -1.0;
  const QuadraticProblem q(H, b);
  const Eigen::SelfAdjointEigenSolver<Matrix> es(H);
  CHECK(*q.meta().L_global == doctest::Approx(es.eigenvalues().maxCoeff()).epsilon(1e-14));
  CHECK(*q.meta().mu_global == doctest::Approx(es.eigenvalues().minCoeff()).epsilon(1e-14));
  CHECK((H * *q.meta().x_star - b).norm() < 1e-14);
  CHECK(q.gradient(*q.meta().x_star).norm() < 1e-14);
  CHECK(*q.meta().f_star == doctest::Approx(-0.5 * b.dot(H.ldlt().solve(b))).epsilon(1e-14));
  check_fd(q, 1);

  Matrix bad(2, 2);
  bad << 1.0, 2.0, 0.0, 1.0;
  CHECK_THROWS_AS(QuadraticProblem(bad, b), ConfigError);
  Matrix indefinite(2, 2);
  indefinite << 1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(QuadraticProblem(indefinite, b), ConfigError);

  Matrix singular = Matrix::Zero(2, 2);
  singular(0, 0) = 1.0;
  const QuadraticProblem s(singular, Vector::Unit(2, 0));
  CHECK(*s.meta().mu_global == 0.0);
  REQUIRE(s.meta().x_star);
  CHECK(s.gradient(*s.meta().x_star).norm() < 1e-14);
}

TEST_CASE("centered quadratic matches the expanded form up to a constant") {
  const QuadraticProblem c = make_random_quadratic(6, 0.1, 2.0, 3);
  const QuadraticProblem e(c.H(), c.H() * *c.meta().x_star);
  std::mt19937_64 rng(4);
  const Vector x = gaussian(6, rng);
  CHECK((c.gradient(x) - e.gradient(x)).norm() < 1e-12);
  CHECK(c.value(x) - *c.meta().f_star == doctest::Approx(e.value(x) - *e.meta().f_star).epsilon(1e-10));
}

TEST_CASE("random quadratic spectrum and rotation") {
  const QuadraticProblem q = make_random_quadratic(12, 0.05, 3.0, 9);
  const Eigen::SelfAdjointEigenSolver<Matrix> es(q.H());
  CHECK(es.eigenvalues().minCoeff() == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(es.eigenvalues().maxCoeff() == doctest::Approx(3.0).epsilon(1e-12));
  const Matrix Q = random_orthogonal(7, 1);
  CHECK((Q.transpose() * Q - Matrix::Identity(7, 7)).norm() < 1e-13);
  CHECK(random_orthogonal(7, 1) == Q);
  CHECK(make_random_quadratic(5, 0.1, 1.0, 0, true).meta().x_star->isZero(0.0));
}

TEST_CASE("spectral norm matches the top singular value") {
  std::mt19937_64 rng(2);
  Matrix A(30, 8);
  std::normal_distribution<double> n01;
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = n01(rng);
  const double exact = Eigen::JacobiSVD<Matrix>(A).singularValues()[0];
  CHECK(spectral_norm_squared(A) == doctest::Approx(exact * exact).epsilon(1e-10));
}

TEST_CASE("logistic problem") {
  const LogisticProblem p = make_synthetic_logistic(200, 20, 0);
  CHECK(p.gamma() == doctest::Approx(1.0 / 200.0));
  const double sigma = Eigen::JacobiSVD<Matrix>(p.A()).singularValues()[0];
  CHECK(*p.meta().L_global == doctest::Approx(sigma * sigma / 800.0 + 1.0 / 200.0).epsilon(1e-8));
  CHECK(*p.meta().mu_global == p.gamma());
  check_fd(p, 5);

  // Certified L: ||grad(x) - grad(y)|| <= L ||x - y|| on 100 random pairs.
  std::mt19937_64 rng(8);
  const double L = *p.meta().L_global;
  for (int i = 0; i < 100; ++i) {
    const Vector x = gaussian(20, rng, 2.0);
    const Vector y = gaussian(20, rng, 2.0);
    CHECK((p.gradient(x) - p.gradient(y)).norm() <= L * (x - y).norm() * (1.0 + 1e-12));
  }
  // The Hessian's largest eigenvalue never exceeds L.
  const Eigen::SelfAdjointEigenSolver<Matrix> es(p.hessian(Vector::Zero(20)));
  CHECK(es.eigenvalues().maxCoeff() <= L * (1.0 + 1e-12));

  // Extreme margins stay finite.
  const Vector big = Vector::Constant(20, 1e3);
  CHECK(std::isfinite(p.value(big)));
  CHECK(all_finite(p.gradient(big)));

  for (std::size_t i = 0; i < 3; ++i) {
    const Vector x = gaussian(20, rng);
    double sum = 0.0;
    for (std::size_t j = 0; j < p.num_samples(); ++j) sum += p.sample_value(j, x);
    CHECK(sum / 200.0 == doctest::Approx(p.value(x)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(LogisticProblem(p.A(), Vector::Zero(200), 0.1), ConfigError);
}

TEST_CASE("matrix factorization") {
  const Matrix A = make_low_rank_matrix(12, 9, 2, 4);
  MatrixFactorizationProblem mf(A, 3);
  CHECK(mf.dim() == (12 + 9) * 3);
  CHECK(mf.value(Vector::Zero(mf.dim())) == 0.5 * A.squaredNorm());
  check_fd(mf, 6, 5, 0.5);

  std::mt19937_64 rng(3);
  const Vector x = gaussian(mf.dim(), rng);
  CHECK(mf.pack(mf.U(x), mf.V(x)) == x);
  CHECK(mf.U(x)(0, 1) == x[1]);
  CHECK(mf.V(x)(0, 0) == x[12 * 3]);

  const Matrix R = mf.U(x) * mf.V(x).transpose() - A;
  const Vector g = mf.gradient(x);
  CHECK((mf.U(g) - R * mf.V(x)).norm() < 1e-12 * std::max(1.0, R.norm()));
  CHECK((mf.V(g) - R.transpose() * mf.U(x)).norm() < 1e-12 * std::max(1.0, R.norm()));
  CHECK_FALSE(mf.meta().f_star);
  mf.set_exact_low_rank();
  CHECK(*mf.meta().f_star == 0.0);

  const Vector x0 = mf_initial_point(12, 9, 3, 1);
  CHECK(x0.size() == mf.dim());
  CHECK(x0 == mf_initial_point(12, 9, 3, 1));
}

TEST_CASE("cubic regularization grows quadratically in gradient norm") {
  const CubicRegProblem c = make_cubic_synthetic(50, 10.0, 0);
  check_fd(c, 2);
  std::mt19937_64 rng(1);
  Vector u = gaussian(50, rng);
  u.normalize();
  for (double r : {10.0, 100.0}) {
    const double ratio = c.gradient(r * u).norm() / (0.5 * c.M() * r * r);
    CHECK(ratio == doctest::Approx(1.0).epsilon(0.1));
  }
  CHECK_THROWS_AS(CubicRegProblem(c.g(), c.H(), 0.0), ConfigError);
}

TEST_CASE("quartic") {
  const FunctionObjective q = make_quartic();
  CHECK(q.value(Vector::Constant(1, 2.0)) == 16.0);
  CHECK(q.gradient(Vector::Constant(1, 2.0))[0] == 32.0);
}

TEST_CASE("interpolating least squares") {
  const StochasticQuadraticFamily fam = make_interpolating_ls(10, 5, 0.1, 1.0, 7);
  CHECK(fam.interpolating());
  const Vector& xs = *fam.meta().x_star;
  double worst = 0.0;
  for (std::size_t i = 0; i < fam.num_samples(); ++i) {
    worst = std::max(worst, fam.sample_gradient(i, xs).norm());
    const Eigen::SelfAdjointEigenSolver<Matrix> es(fam.sample_hessian(i));
    CHECK(es.eigenvalues().minCoeff() >= 0.1 - 1e-12);
    CHECK(es.eigenvalues().maxCoeff() <= 1.0 + 1e-12);
  }
  CHECK(worst <= 1e-14);
  CHECK(*fam.meta().f_star == 0.0);
  check_fd(fam, 3);

  // All H_i = I: the family is the deterministic quadratic 1/2||x - c||^2.
  std::vector<Matrix> H(4, Matrix::Identity(3, 3));
  std::vector<Vector> c(4, Vector::Constant(3, 2.0));
  const StochasticQuadraticFamily same(H, c, 1.0, 1.0);
  const Vector x = Vector::Constant(3, 5.0);
  for (std::size_t i = 0; i < 4; ++i) CHECK(same.sample_gradient(i, x) == same.gradient(x));
  CHECK(same.gradient(x) == x - c[0]);
}

TEST_CASE("stochastic quadratics without interpolation") {
  const StochasticQuadraticFamily fam = make_stochastic_quadratics(10, 4, 0.1, 1.0, 2);
  CHECK_FALSE(fam.interpolating());
  CHECK(fam.gradient(*fam.meta().x_star).norm() < 1e-13);
  double sum = 0.0;
  const Vector x = Vector::Constant(4, 0.7);
  for (std::size_t i = 0; i < 10; ++i) sum += fam.sample_value(i, x);
  CHECK(sum / 10.0 == doctest::Approx(fam.value(x)).epsilon(1e-12));
  check_fd(fam, 4);
}
