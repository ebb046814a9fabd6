#pragma once

#include <span>
#include <vector>

#include "adaptgd/adaptive.hpp"
#include "adaptgd/core.hpp"

namespace adaptgd {

/// A certificate needed ground truth (x*, f*, L or mu) the problem lacks.
class MissingMeta : public Error {
 public:
  using Error::Error;
};

class DegenerateWindow : public Error {
 public:
  using Error::Error;
};

/// Coefficients of the convex energy. Algorithm 1 uses 1/2 on the last
/// displacement and beta = 1; the alpha family uses alpha*beta and beta.
struct EnergyWeights {
  double displacement = 0.5;
  double beta = 1.0;

  static EnergyWeights general(double alpha);
};

/// Both sides of the one-step energy inequality at step k:
///   lhs = ||x^{k+1}-x*||^2 + w||x^{k+1}-x^k||^2 + 2 lambda_k (1 + beta theta_k)(f(x^k) - f*)
///   rhs = ||x^k-x*||^2 + w||x^k-x^{k-1}||^2 + 2 lambda_k beta theta_k (f(x^{k-1}) - f*)
/// lhs is the energy Psi_{k+1}.
struct EnergyPair {
  double lhs = 0.0;
  double rhs = 0.0;
};

EnergyPair lyapunov_energy(const ProblemMeta& meta, const Vector& x_next, const Vector& x,
                           const Vector& x_prev, double lambda, double theta, double f_x,
                           double f_x_prev, EnergyWeights weights = {});

/// Incremental numerator and S_k of the weighted ergodic average x_hat^k.
///
/// Feed (x^k, lambda_k, theta_k) for k = 1, 2, ... in order.
class ErgodicTracker {
 public:
  explicit ErgodicTracker(double beta = 1.0) : beta_(beta) {}

  void update(const Vector& x_k, double lambda, double theta);

  int count() const { return count_; }
  double S() const { return S_; }
  const Vector& numerator() const { return numerator_; }
  Vector average() const;

 private:
  double beta_;
  int count_ = 0;
  double S_ = 0.0;
  Vector numerator_;
  Vector x_last_;
};

/// D = ||x^1-x*||^2 + w||x^1-x^0||^2 + 2 lambda_1 beta theta_1 (f(x^0) - f*).
double certificate_constant(const ProblemMeta& meta, const Vector& x1, const Vector& x0,
                            double lambda1, double theta1, double f_x0, EnergyWeights weights = {});

struct CertificateGap {
  double gap = 0.0;    // f(x_hat^k) - f*
  double bound = 0.0;  // D / (2 S_k)
};

CertificateGap certificate_gap(const ErgodicTracker& tracker, const Objective& f,
                               const ProblemMeta& meta, double D);

/// Strongly convex energy
///   Psi^{k+1} = ||x^{k+1}-x*||^2 + 1/2 (1 + 2 mu/L)||x^{k+1}-x^k||^2
///               + 2 lambda_k (1 + theta_k)(f(x^k) - f*)
/// for each step k >= 1 of a trace with recorded iterates and values.
struct ScEnergySeries {
  std::vector<int> k;        // step index; psi[i] is Psi^{k[i]+1}
  std::vector<double> psi;
  std::vector<double> ratio;  // psi[i] / psi[i-1]; NaN for i = 0
};

ScEnergySeries sc_energy(const RunTrace& trace, const ProblemMeta& meta);

/// Least-squares slope of log(residual) against the index over [begin, end).
double fit_linear_rate(std::span<const double> residuals, std::size_t begin, std::size_t end);

/// ||x^k - x*||^2 along a trace with recorded iterates.
std::vector<double> distance_residuals(const RunTrace& trace, const Vector& x_star);

/// Violation counts of the convex certificates along a trace.
struct ConvexCertificate {
  int steps_checked = 0;
  int lemma_violations = 0;         // lhs_k > rhs_k + 1e-9 Psi_1
  int monotonicity_violations = 0;  // Psi_{k+1} > Psi_k + 1e-9 Psi_1
  int certificate_violations = 0;   // gap > D/(2 S_k)(1 + 1e-9)
  int rate_violations = 0;          // gap > D L / k (1 + 1e-9), only with L known
  int negative_weights = 0;         // w_i < -1e-12 lambda_i
  double D = kNaN;
};

/// Checks the energy inequality, energy monotonicity, the ergodic certificate
/// and weight nonnegativity, and fills the energy and ergodic_gap columns.
/// Needs record_iterates and a value map; the trace's step k uses row k.
ConvexCertificate certify_convex_trace(RunTrace& trace, const Objective& f,
                                       const ProblemMeta& meta, EnergyWeights weights = {});

/// Exact construction checks of the adaptive rules on a trace.
struct ConstructionCheck {
  int steps_checked = 0;
  int growth_violations = 0;     // lambda_k above the growth candidate
  int curvature_violations = 0;  // lambda_k above the curvature candidate
  int ledger_violations = 0;     // known-L inequality
};

struct ConstructionSpec {
  AdaptiveRule rule = AdaptiveRule::Standard;
  double alpha = 0.5;  // General
  double L = 0.0;      // KnownL
};

ConstructionCheck check_construction(const RunTrace& trace, const ConstructionSpec& spec);

/// Guaranteed lower bound on lambda_k given a global L: 1/(2L) for the
/// standard, strongly convex and known-L rules; alpha/L for alpha <= 1/2 and
/// 2 alpha (1 - alpha)/L above that for the alpha family. Zero for Plus.
double stepsize_floor(AdaptiveRule rule, double alpha, double L);
/// Rows k >= 1 whose lambda_k falls below floor (1 - 1e-10).
int count_stepsize_floor_violations(const RunTrace& trace, double floor);

/// Ground truth from a long adaptive run: x* := the final iterate, f* := f(x*).
/// The energy inequality holds for any reference point, so certificates stay
/// valid even when the run stops short of the exact minimizer.
ProblemMeta reference_meta(const Objective& f, const Vector& x0, double grad_tol = 1e-12,
                           int max_iter = 200000);

}  // namespace adaptgd
