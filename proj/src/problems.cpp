#include "adaptgd/problems.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace adaptgd {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal;
  Matrix M(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) M(i, j) = normal(rng);
  return M;
}

Vector gaussian_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

Matrix orthogonal_from(std::mt19937_64& rng, int d) {
  const Matrix G = gaussian_matrix(rng, d, d);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ();
  // Fix column signs so Q is Haar-distributed and independent of QR conventions.
  const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j)
    if (R(j, j) < 0.0) Q.col(j) *= -1.0;
  return Q;
}

// Endpoints mu and L, interior values geometrically spaced (linear if mu = 0).
Vector spread_spectrum(int d, double mu, double L) {
  Vector s(d);
  if (d == 1) {
    s(0) = L;
    return s;
  }
  for (int i = 0; i < d; ++i) {
    const double t = static_cast<double>(i) / (d - 1);
    s(i) = mu > 0.0 ? mu * std::pow(L / mu, t) : t * L;
  }
  s(0) = mu;
  s(d - 1) = L;
  return s;
}

Matrix with_spectrum(const Matrix& Q, const Vector& spectrum) {
  Matrix H = Q * spectrum.asDiagonal() * Q.transpose();
  return 0.5 * (H + H.transpose());
}

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

void check_spectrum_bounds(double mu, double L) {
  if (!(mu >= 0.0) || !(L > 0.0) || mu > L) throw ConfigError("need 0 <= mu <= L and L > 0");
}

}  // namespace

// Quadratic ------------------------------------------------------------------

QuadraticProblem::QuadraticProblem(Matrix H, Vector b)
    : QuadraticProblem(std::move(H), std::move(b), std::nullopt) {}

QuadraticProblem QuadraticProblem::centered(Matrix H, Vector center) {
  Vector b = H * center;
  return QuadraticProblem(std::move(H), std::move(b), std::move(center));
}

QuadraticProblem::QuadraticProblem(Matrix H, Vector b, std::optional<Vector> center)
    : H_(std::move(H)), b_(std::move(b)), center_(std::move(center)) {
  const Eigen::Index d = H_.rows();
  if (d < 1 || H_.cols() != d) throw ConfigError("quadratic needs a square, nonempty H");
  if (b_.size() != d) throw ConfigError("quadratic b has the wrong dimension");
  if ((H_ - H_.transpose()).norm() > 1e-12 * std::max(1.0, H_.norm()))
    throw ConfigError("quadratic H must be symmetric");

  Vector eig;
  const Matrix off = H_ - Matrix(H_.diagonal().asDiagonal());
  if (off.isZero(0.0)) {
    diagonal_ = H_.diagonal();
    eig = *diagonal_;
  } else {
    eig = Eigen::SelfAdjointEigenSolver<Matrix>(H_, Eigen::EigenvaluesOnly).eigenvalues();
  }
  const double mu = std::max(0.0, eig.minCoeff());
  const double L = eig.maxCoeff();
  if (eig.minCoeff() < -1e-12 * std::max(1.0, std::abs(L)))
    throw ConfigError("quadratic H must be positive semidefinite");
  meta_.L_global = L;
  meta_.mu_global = mu;

  if (center_) {
    meta_.x_star = *center_;
  } else if (mu > 0.0) {
    meta_.x_star = diagonal_ ? Vector(b_.cwiseQuotient(*diagonal_)) : Vector(H_.ldlt().solve(b_));
  } else {
    Vector x = H_.completeOrthogonalDecomposition().solve(b_);
    if ((H_ * x - b_).norm() <= 1e-10 * (1.0 + b_.norm())) meta_.x_star = std::move(x);
  }
  if (meta_.x_star) meta_.f_star = value(*meta_.x_star);
}

Vector QuadraticProblem::gradient(const Vector& x) const {
  if (center_) {
    const Vector d = x - *center_;
    return diagonal_ ? Vector(diagonal_->cwiseProduct(d)) : Vector(H_ * d);
  }
  return diagonal_ ? Vector(diagonal_->cwiseProduct(x) - b_) : Vector(H_ * x - b_);
}

double QuadraticProblem::value(const Vector& x) const {
  if (center_) {
    const Vector d = x - *center_;
    return 0.5 * (diagonal_ ? d.dot(diagonal_->cwiseProduct(d)) : d.dot(H_ * d));
  }
  const double quad = diagonal_ ? x.dot(diagonal_->cwiseProduct(x)) : x.dot(H_ * x);
  return 0.5 * quad - b_.dot(x);
}

QuadraticProblem make_delta_quadratic(double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in (0, 1]");
  Matrix H = Matrix::Zero(2, 2);
  H(0, 0) = 1.0;
  H(1, 1) = delta;
  return QuadraticProblem(std::move(H), Vector::Zero(2));
}

Matrix random_orthogonal(int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return orthogonal_from(rng, d);
}

QuadraticProblem make_random_quadratic(int d, double mu, double L, std::uint64_t seed,
                                       bool zero_solution) {
  if (d < 1) throw ConfigError("dimension must be positive");
  check_spectrum_bounds(mu, L);
  std::mt19937_64 rng(seed);
  const Matrix Q = orthogonal_from(rng, d);
  Matrix H = with_spectrum(Q, spread_spectrum(d, mu, L));
  Vector center = zero_solution ? Vector(Vector::Zero(d)) : gaussian_vector(rng, d);
  return QuadraticProblem::centered(std::move(H), std::move(center));
}

double spectral_norm_squared(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  const Matrix gram = A.rows() < A.cols() ? Matrix(A * A.transpose()) : Matrix(A.transpose() * A);
  const Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues().maxCoeff());
}

// Logistic -------------------------------------------------------------------

LogisticProblem::LogisticProblem(Matrix A, Vector b, double gamma)
    : A_(std::move(A)), b_(std::move(b)), gamma_(gamma) {
  if (A_.rows() < 1 || A_.cols() < 1) throw ConfigError("logistic data must be nonempty");
  if (b_.size() != A_.rows()) throw ConfigError("logistic labels do not match the data");
  for (Eigen::Index i = 0; i < b_.size(); ++i)
    if (b_(i) != 1.0 && b_(i) != -1.0) throw ConfigError("logistic labels must be -1 or +1");
  if (!(gamma_ > 0.0)) throw ConfigError("logistic gamma must be positive");
  const double n = static_cast<double>(A_.rows());
  meta_.L_global = spectral_norm_squared(A_) / (4.0 * n) + gamma_;
  meta_.mu_global = gamma_;
}

double LogisticProblem::value(const Vector& x) const {
  const Vector z = b_.cwiseProduct(A_ * x);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) sum += softplus(-z(i));
  return sum / static_cast<double>(A_.rows()) + 0.5 * gamma_ * x.squaredNorm();
}

Vector LogisticProblem::gradient(const Vector& x) const {
  const Vector z = b_.cwiseProduct(A_ * x);
  Vector coef(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) coef(i) = -b_(i) * sigmoid(-z(i));
  return A_.transpose() * coef / static_cast<double>(A_.rows()) + gamma_ * x;
}

double LogisticProblem::sample_value(std::size_t i, const Vector& x) const {
  const auto r = static_cast<Eigen::Index>(i);
  return softplus(-b_(r) * A_.row(r).dot(x)) + 0.5 * gamma_ * x.squaredNorm();
}

Vector LogisticProblem::sample_gradient(std::size_t i, const Vector& x) const {
  const auto r = static_cast<Eigen::Index>(i);
  const double z = b_(r) * A_.row(r).dot(x);
  return -b_(r) * sigmoid(-z) * A_.row(r).transpose() + gamma_ * x;
}

Matrix LogisticProblem::hessian(const Vector& x) const {
  const Vector z = b_.cwiseProduct(A_ * x);
  Vector w(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double s = sigmoid(z(i));
    w(i) = s * (1.0 - s);
  }
  Matrix H = A_.transpose() * w.asDiagonal() * A_ / static_cast<double>(A_.rows());
  H.diagonal().array() += gamma_;
  return H;
}

LogisticProblem make_synthetic_logistic(int n, int d, std::uint64_t seed, double gamma) {
  if (n < 1 || d < 1) throw ConfigError("logistic sizes must be positive");
  std::mt19937_64 rng(seed);
  Matrix A = gaussian_matrix(rng, n, d);
  const Vector planted = gaussian_vector(rng, d) / std::sqrt(static_cast<double>(d));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector b(n);
  for (int i = 0; i < n; ++i) b(i) = unif(rng) < sigmoid(A.row(i).dot(planted)) ? 1.0 : -1.0;
  if (gamma <= 0.0) gamma = 1.0 / n;
  return LogisticProblem(std::move(A), std::move(b), gamma);
}

// Matrix factorization -------------------------------------------------------

MatrixFactorizationProblem::MatrixFactorizationProblem(Matrix A, int rank)
    : A_(std::move(A)), rank_(rank) {
  if (A_.rows() < 1 || A_.cols() < 1) throw ConfigError("factorization target must be nonempty");
  if (rank_ < 1) throw ConfigError("factorization rank must be positive");
}

Matrix MatrixFactorizationProblem::U(const Vector& x) const {
  if (x.size() != dim()) throw ConfigError("factorization point has the wrong dimension");
  return Eigen::Map<const RowMajor>(x.data(), A_.rows(), rank_);
}

Matrix MatrixFactorizationProblem::V(const Vector& x) const {
  if (x.size() != dim()) throw ConfigError("factorization point has the wrong dimension");
  return Eigen::Map<const RowMajor>(x.data() + A_.rows() * rank_, A_.cols(), rank_);
}

Vector MatrixFactorizationProblem::pack(const Matrix& U, const Matrix& V) const {
  if (U.rows() != A_.rows() || V.rows() != A_.cols() || U.cols() != rank_ || V.cols() != rank_)
    throw ConfigError("factor shapes do not match the problem");
  Vector x(dim());
  Eigen::Map<RowMajor>(x.data(), U.rows(), rank_) = U;
  Eigen::Map<RowMajor>(x.data() + U.size(), V.rows(), rank_) = V;
  return x;
}

double MatrixFactorizationProblem::value(const Vector& x) const {
  const Matrix U_ = U(x);
  const Matrix V_ = V(x);
  return 0.5 * (U_ * V_.transpose() - A_).squaredNorm();
}

Vector MatrixFactorizationProblem::gradient(const Vector& x) const {
  const Matrix U_ = U(x);
  const Matrix V_ = V(x);
  const Matrix R = U_ * V_.transpose() - A_;
  return pack(R * V_, R.transpose() * U_);
}

Matrix make_low_rank_matrix(int m, int n, int rank, std::uint64_t seed) {
  if (m < 1 || n < 1 || rank < 1) throw ConfigError("low-rank sizes must be positive");
  std::mt19937_64 rng(seed);
  const Matrix P = gaussian_matrix(rng, m, rank);
  const Matrix Q = gaussian_matrix(rng, n, rank);
  return P * Q.transpose();
}

Vector mf_initial_point(int m, int n, int r, std::uint64_t seed) {
  if (m < 1 || n < 1 || r < 1) throw ConfigError("factorization sizes must be positive");
  std::mt19937_64 rng(seed);
  return gaussian_vector(rng, static_cast<Eigen::Index>(m + n) * r) /
         std::sqrt(static_cast<double>(r));
}

// Cubic regularization -------------------------------------------------------

CubicRegProblem::CubicRegProblem(Vector g, Matrix H, double M)
    : g_(std::move(g)), H_(std::move(H)), M_(M) {
  if (g_.size() < 1 || H_.rows() != g_.size() || H_.cols() != g_.size())
    throw ConfigError("cubic problem shapes do not match");
  if (!(M_ > 0.0)) throw ConfigError("cubic M must be positive");
}

double CubicRegProblem::value(const Vector& x) const {
  const double r = x.norm();
  return g_.dot(x) + 0.5 * x.dot(H_ * x) + M_ / 6.0 * r * r * r;
}

Vector CubicRegProblem::gradient(const Vector& x) const {
  return g_ + H_ * x + 0.5 * M_ * x.norm() * x;
}

CubicRegProblem make_cubic_synthetic(int d, double M, std::uint64_t seed) {
  const LogisticProblem logistic = make_synthetic_logistic(10 * d, d, seed);
  const Vector zero = Vector::Zero(d);
  return CubicRegProblem(logistic.gradient(zero), logistic.hessian(zero), M);
}

FunctionObjective make_quartic() {
  return FunctionObjective(
      1, [](const Vector& x) { return Vector::Constant(1, 4.0 * x(0) * x(0) * x(0)); },
      [](const Vector& x) { return std::pow(x(0), 4); });
}

// Stochastic quadratics ------------------------------------------------------

StochasticQuadraticFamily::StochasticQuadraticFamily(std::vector<Matrix> H, std::vector<Vector> c,
                                                     double mu, double L)
    : H_(std::move(H)), c_(std::move(c)), mu_(mu), L_(L) {
  if (H_.empty() || H_.size() != c_.size()) throw ConfigError("need one center per sample Hessian");
  check_spectrum_bounds(mu_, L_);
  const Eigen::Index d = H_.front().rows();
  H_bar_ = Matrix::Zero(d, d);
  r_bar_ = Vector::Zero(d);
  interpolating_ = true;
  for (std::size_t i = 0; i < H_.size(); ++i) {
    if (H_[i].rows() != d || H_[i].cols() != d || c_[i].size() != d)
      throw ConfigError("sample shapes do not match");
    H_bar_ += H_[i];
    r_bar_ += H_[i] * c_[i];
    s_bar_ += c_[i].dot(H_[i] * c_[i]);
    if (c_[i] != c_.front()) interpolating_ = false;
  }
  const double n = static_cast<double>(H_.size());
  H_bar_ /= n;
  r_bar_ /= n;
  s_bar_ /= n;

  meta_.L_global = L_;
  meta_.mu_global = mu_;
  if (interpolating_) {
    meta_.x_star = c_.front();
    meta_.f_star = 0.0;
  } else if (mu_ > 0.0) {
    meta_.x_star = H_bar_.ldlt().solve(r_bar_);
    meta_.f_star = value(*meta_.x_star);
  }
}

Vector StochasticQuadraticFamily::gradient(const Vector& x) const {
  if (interpolating_) return H_bar_ * (x - c_.front());
  return H_bar_ * x - r_bar_;
}

double StochasticQuadraticFamily::value(const Vector& x) const {
  if (interpolating_) {
    const Vector d = x - c_.front();
    return 0.5 * d.dot(H_bar_ * d);
  }
  return 0.5 * x.dot(H_bar_ * x) - x.dot(r_bar_) + 0.5 * s_bar_;
}

Vector StochasticQuadraticFamily::sample_gradient(std::size_t i, const Vector& x) const {
  return H_[i] * (x - c_[i]);
}

double StochasticQuadraticFamily::sample_value(std::size_t i, const Vector& x) const {
  const Vector d = x - c_[i];
  return 0.5 * d.dot(H_[i] * d);
}

namespace {

StochasticQuadraticFamily build_family(int n, int d, double mu, double L, std::uint64_t seed,
                                       bool interpolate) {
  if (n < 1 || d < 1) throw ConfigError("family sizes must be positive");
  check_spectrum_bounds(mu, L);
  std::mt19937_64 rng(seed);
  const Vector x_star = gaussian_vector(rng, d);
  const Vector spectrum = spread_spectrum(d, mu, L);
  std::vector<Matrix> H;
  std::vector<Vector> c;
  H.reserve(n);
  c.reserve(n);
  for (int i = 0; i < n; ++i) {
    H.push_back(with_spectrum(orthogonal_from(rng, d), spectrum));
    c.push_back(interpolate ? x_star : gaussian_vector(rng, d));
  }
  return StochasticQuadraticFamily(std::move(H), std::move(c), mu, L);
}

}  // namespace

StochasticQuadraticFamily make_interpolating_ls(int n, int d, double mu, double L,
                                                std::uint64_t seed) {
  return build_family(n, d, mu, L, seed, true);
}

StochasticQuadraticFamily make_stochastic_quadratics(int n, int d, double mu, double L,
                                                     std::uint64_t seed) {
  return build_family(n, d, mu, L, seed, false);
}

}  // namespace adaptgd
