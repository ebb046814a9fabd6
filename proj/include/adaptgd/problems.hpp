#pragma once

#include <cstdint>
#include <vector>

#include "adaptgd/core.hpp"

namespace adaptgd {

/// f(x) = 1/2 x^T H x - b^T x with H symmetric positive semidefinite.
///
/// meta carries L = lambda_max(H), mu = lambda_min(H) and, when Hx = b is
/// solvable, x* and f*. centered() builds the same quadratic as
/// 1/2 (x - c)^T H (x - c), which differs only by a constant and avoids the
/// cancellation in f(x) - f* near the solution.
class QuadraticProblem final : public Objective {
 public:
  QuadraticProblem(Matrix H, Vector b);
  static QuadraticProblem centered(Matrix H, Vector center);

  int dim() const override { return static_cast<int>(H_.rows()); }
  Vector gradient(const Vector& x) const override;
  bool has_value() const override { return true; }
  double value(const Vector& x) const override;

  const Matrix& H() const { return H_; }
  const Vector& b() const { return b_; }
  const ProblemMeta& meta() const { return meta_; }

 private:
  QuadraticProblem(Matrix H, Vector b, std::optional<Vector> center);

  Matrix H_;
  Vector b_;
  std::optional<Vector> center_;
  std::optional<Vector> diagonal_;  // set when H is diagonal
  ProblemMeta meta_;
};

/// H = diag(1, delta), b = 0: L = 1, mu = delta, x* = 0, f* = 0.
QuadraticProblem make_delta_quadratic(double delta);

/// Random rotation of a spectrum spread over [mu, L] (both endpoints present),
/// centered at a standard-normal x* (or at zero when zero_solution is set).
QuadraticProblem make_random_quadratic(int d, double mu, double L, std::uint64_t seed,
                                       bool zero_solution = false);

/// Orthogonal matrix from the QR factorization of a Gaussian matrix.
Matrix random_orthogonal(int d, std::uint64_t seed);

/// ||A||_2^2 as the top eigenvalue of the smaller Gram matrix. Power
/// iteration approaches it from below, which would understate L.
double spectral_norm_squared(const Matrix& A);

/// (1/n) sum_i log(1 + exp(-b_i a_i^T x)) + (gamma/2)||x||^2.
///
/// Also a finite-sum oracle with f_i(x) = log(1 + exp(-b_i a_i^T x)) +
/// (gamma/2)||x||^2. meta.L_global = ||A||^2/(4n) + gamma, mu_global = gamma;
/// x* and f* are not known in closed form.
class LogisticProblem final : public Objective, public StochasticObjective {
 public:
  LogisticProblem(Matrix A, Vector b, double gamma);

  int dim() const override { return static_cast<int>(A_.cols()); }
  Vector gradient(const Vector& x) const override;
  bool has_value() const override { return true; }
  double value(const Vector& x) const override;

  std::size_t num_samples() const override { return static_cast<std::size_t>(A_.rows()); }
  Vector sample_gradient(std::size_t i, const Vector& x) const override;
  bool has_sample_value() const override { return true; }
  double sample_value(std::size_t i, const Vector& x) const override;

  Matrix hessian(const Vector& x) const;

  const Matrix& A() const { return A_; }
  const Vector& b() const { return b_; }
  double gamma() const { return gamma_; }
  const ProblemMeta& meta() const { return meta_; }

 private:
  Matrix A_;
  Vector b_;
  double gamma_;
  ProblemMeta meta_;
};

/// Gaussian features; labels drawn from a logistic model around a random
/// planted vector. gamma <= 0 selects the default 1/n.
LogisticProblem make_synthetic_logistic(int n, int d, std::uint64_t seed, double gamma = 0.0);

/// f(U, V) = 1/2 ||U V^T - A||_F^2 over the flat point (U row-major, then V
/// row-major), of dimension (m + n) r. No mask: missing entries are zeros.
class MatrixFactorizationProblem final : public Objective {
 public:
  MatrixFactorizationProblem(Matrix A, int rank);

  int dim() const override { return static_cast<int>((A_.rows() + A_.cols()) * rank_); }
  Vector gradient(const Vector& x) const override;
  bool has_value() const override { return true; }
  double value(const Vector& x) const override;

  Matrix U(const Vector& x) const;
  Matrix V(const Vector& x) const;
  Vector pack(const Matrix& U, const Matrix& V) const;

  const Matrix& A() const { return A_; }
  int rank() const { return rank_; }
  /// f* = 0 is recorded when A is known to have rank <= r.
  const ProblemMeta& meta() const { return meta_; }
  void set_exact_low_rank() { meta_.f_star = 0.0; }

 private:
  Matrix A_;
  int rank_;
  ProblemMeta meta_;
};

/// P Q^T with standard normal P (m x rank) and Q (n x rank).
Matrix make_low_rank_matrix(int m, int n, int rank, std::uint64_t seed);

/// Seeded standard normal (U, V) scaled by 1/sqrt(r).
Vector mf_initial_point(int m, int n, int r, std::uint64_t seed);

/// g^T x + 1/2 x^T H x + (M/6)||x||^3.
class CubicRegProblem final : public Objective {
 public:
  CubicRegProblem(Vector g, Matrix H, double M);

  int dim() const override { return static_cast<int>(g_.size()); }
  Vector gradient(const Vector& x) const override;
  bool has_value() const override { return true; }
  double value(const Vector& x) const override;

  const Vector& g() const { return g_; }
  const Matrix& H() const { return H_; }
  double M() const { return M_; }

 private:
  Vector g_;
  Matrix H_;
  double M_;
};

/// (g, H) taken as the gradient and Hessian at 0 of a synthetic logistic
/// problem with n = 10 d samples.
CubicRegProblem make_cubic_synthetic(int d, double M, std::uint64_t seed);

/// f(x) = x^4 in one dimension.
FunctionObjective make_quartic();

/// (1/n) sum_i 1/2 (x - c_i)^T H_i (x - c_i), each H_i with spectrum in [mu, L].
///
/// With the interpolation flag all c_i coincide with x*, so every sample
/// gradient vanishes there.
class StochasticQuadraticFamily final : public Objective, public StochasticObjective {
 public:
  StochasticQuadraticFamily(std::vector<Matrix> H, std::vector<Vector> c, double mu, double L);

  int dim() const override { return static_cast<int>(H_bar_.rows()); }
  Vector gradient(const Vector& x) const override;
  bool has_value() const override { return true; }
  double value(const Vector& x) const override;

  std::size_t num_samples() const override { return H_.size(); }
  Vector sample_gradient(std::size_t i, const Vector& x) const override;
  bool has_sample_value() const override { return true; }
  double sample_value(std::size_t i, const Vector& x) const override;

  const Matrix& sample_hessian(std::size_t i) const { return H_[i]; }
  const Vector& sample_center(std::size_t i) const { return c_[i]; }
  double sample_mu() const { return mu_; }
  double sample_L() const { return L_; }
  bool interpolating() const { return interpolating_; }
  const ProblemMeta& meta() const { return meta_; }

 private:
  std::vector<Matrix> H_;
  std::vector<Vector> c_;
  double mu_;
  double L_;
  bool interpolating_ = false;
  Matrix H_bar_;  // mean H_i
  Vector r_bar_;  // mean H_i c_i
  double s_bar_ = 0.0;  // mean c_i^T H_i c_i
  ProblemMeta meta_;
};

/// Interpolating family: a shared standard-normal x* and per-sample rotated
/// spectra in [mu, L] (both endpoints present in every sample).
StochasticQuadraticFamily make_interpolating_ls(int n, int d, double mu, double L,
                                                std::uint64_t seed);

/// Same spectra, independent standard-normal centers: no interpolation.
StochasticQuadraticFamily make_stochastic_quadratics(int n, int d, double mu, double L,
                                                     std::uint64_t seed);

}  // namespace adaptgd
