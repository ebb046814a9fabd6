#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace adaptgd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Errors -------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid run or method configuration (bad tolerances, max_iter < 1, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The oracle has no value map but a caller needed f(x).
class MissingValue : public Error {
 public:
  MissingValue() : Error("objective has no value map") {}
  using Error::Error;
};

/// x^k == x^{k-1} while the gradients differ: the oracle is not a function.
class ZeroDisplacement : public Error {
 public:
  ZeroDisplacement() : Error("zero displacement with differing gradients (inconsistent oracle)") {}
};

// Oracles ------------------------------------------------------------------

/// Deterministic first-order oracle for min f(x).
///
/// Implementations must be safe to call concurrently from independent runs;
/// problem data is read-only after construction.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual int dim() const = 0;
  virtual Vector gradient(const Vector& x) const = 0;

  virtual bool has_value() const { return false; }
  /// Throws MissingValue unless has_value().
  virtual double value(const Vector& x) const;
};

/// Objective assembled from callables; handy for one-off functions.
class FunctionObjective final : public Objective {
 public:
  using GradientFn = std::function<Vector(const Vector&)>;
  using ValueFn = std::function<double(const Vector&)>;

  FunctionObjective(int dim, GradientFn gradient, ValueFn value = {});

  int dim() const override { return dim_; }
  Vector gradient(const Vector& x) const override { return gradient_(x); }
  bool has_value() const override { return static_cast<bool>(value_); }
  double value(const Vector& x) const override;

 private:
  int dim_;
  GradientFn gradient_;
  ValueFn value_;
};

/// Finite-sum oracle for min (1/n) sum_i f_i(x).
class StochasticObjective {
 public:
  virtual ~StochasticObjective() = default;

  virtual int dim() const = 0;
  virtual std::size_t num_samples() const = 0;
  virtual Vector sample_gradient(std::size_t i, const Vector& x) const = 0;

  virtual bool has_sample_value() const { return false; }
  virtual double sample_value(std::size_t i, const Vector& x) const;
};

/// The full objective (1/n) sum_i f_i induced by a finite-sum oracle, evaluated
/// by enumerating every sample.
class AveragedObjective final : public Objective {
 public:
  explicit AveragedObjective(const StochasticObjective& samples) : samples_(samples) {}

  int dim() const override { return samples_.dim(); }
  Vector gradient(const Vector& x) const override;
  bool has_value() const override { return samples_.has_sample_value(); }
  double value(const Vector& x) const override;

 private:
  const StochasticObjective& samples_;
};

/// Optional ground truth attached to a problem instance.
struct ProblemMeta {
  std::optional<Vector> x_star;
  std::optional<double> f_star;
  std::optional<double> L_global;
  std::optional<double> mu_global;

  bool has_solution() const { return x_star.has_value() && f_star.has_value(); }
  /// L / mu; infinite when mu is zero or unknown.
  double condition_number() const;
};

/// Central differences (value(x + h e_i) - value(x - h e_i)) / 2h.
Vector finite_diff_gradient(const Objective& f, const Vector& x, double h);

bool all_finite(const Vector& v);

// Traces -------------------------------------------------------------------

enum class RunStatus { Converged, MaxIter, Diverged };

const char* to_string(RunStatus status);

/// One accepted iterate x^k and the step taken from it.
///
/// lambda/theta describe the step x^k -> x^{k+1}; they are NaN on the final
/// row, where no step is taken. dx_norm/dg_norm are the displacement norms
/// ||x^k - x^{k-1}|| and ||g^k - g^{k-1}|| the method used to pick lambda.
struct TraceRow {
  int k = 0;
  double f_value = kNaN;
  double grad_norm = kNaN;
  double lambda = kNaN;
  double theta = kNaN;
  double dx_norm = kNaN;
  double dg_norm = kNaN;
  double momentum = kNaN;  // beta_k for momentum methods
  int backtracks = 0;
  double energy = kNaN;
  double ergodic_gap = kNaN;
  std::size_t oracle_calls = 0;
  Vector x;  // empty unless RunOptions::record_iterates
};

struct RunTrace {
  std::string method;
  std::vector<TraceRow> rows;
  RunStatus status = RunStatus::MaxIter;
  Vector x_final;

  int iterations() const { return rows.empty() ? 0 : rows.back().k; }
  std::size_t oracle_calls() const { return rows.empty() ? 0 : rows.back().oracle_calls; }
};

struct TerminationRule {
  double grad_tol = 1e-8;
  int max_iter = 1000;
  double divergence_cap = 1e30;  // on ||x||

  void validate() const;
};

struct RunOptions {
  bool record_iterates = false;
  bool record_values = true;  // only when the oracle has a value map
};

// Methods ------------------------------------------------------------------

struct StepReport {
  double lambda = kNaN;
  double theta = kNaN;
  double dx_norm = kNaN;
  double dg_norm = kNaN;
  double momentum = kNaN;
  int backtracks = 0;
};

/// A first-order method as a step function over its own state.
///
/// step() receives x^k and g^k = grad f(x^k) (already evaluated by the driver)
/// and writes x^{k+1}. The first call after reset() is the bootstrap step.
class Method {
 public:
  virtual ~Method() = default;

  virtual std::string name() const = 0;
  virtual void reset() = 0;
  virtual StepReport step(const Objective& f, const Vector& x, const Vector& grad,
                          Vector& x_next) = 0;
};

/// Counts gradient and value evaluations made through it. One per run.
class CountingObjective final : public Objective {
 public:
  explicit CountingObjective(const Objective& inner) : inner_(inner) {}

  int dim() const override { return inner_.dim(); }
  Vector gradient(const Vector& x) const override;
  bool has_value() const override { return inner_.has_value(); }
  double value(const Vector& x) const override;

  std::size_t gradient_calls() const { return gradient_calls_; }
  std::size_t value_calls() const { return value_calls_; }
  std::size_t calls() const { return gradient_calls_ + value_calls_; }

 private:
  const Objective& inner_;
  mutable std::size_t gradient_calls_ = 0;
  mutable std::size_t value_calls_ = 0;
};

/// Generic driver shared by every deterministic method.
RunTrace run(Method& method, const Objective& f, const Vector& x0, const TerminationRule& term,
             const RunOptions& options = {});

}  // namespace adaptgd
