#pragma once

#include <memory>
#include <optional>
#include <string>

#include "adaptgd/core.hpp"

namespace adaptgd {

/// Backtracking exhausted its halving budget without sufficient decrease.
class LineSearchStall : public Error {
 public:
  LineSearchStall() : Error("line search stalled after the maximum number of halvings") {}
};

struct LineSearchParams {
  double init_step = 1.0;
  double backtrack = 0.5;
  double sufficient_decrease = 1e-4;
  int max_halvings = 60;

  void validate() const;
};

// Free step functions -------------------------------------------------------

/// x - lambda * grad.
Vector gd_step(double lambda, const Vector& x, const Vector& grad);

struct PolyakStep {
  Vector x_next;
  double lambda = 0.0;
  bool converged = false;     // grad == 0: no step taken
  bool negative_gap = false;  // f(x) < f_star, the supplied optimum is too high
};

/// lambda = (f(x) - f_star) / ||grad||^2.
PolyakStep polyak_step(double f_star, double f_x, const Vector& x, const Vector& grad);

enum class BBVariant {
  BB1,  // ||dx||^2 / <dx, dg>
  BB2,  // <dx, dg> / ||dg||^2
};

/// No safeguards: zero, negative or huge values are returned as computed.
double bb_stepsize(BBVariant variant, const Vector& dx, const Vector& dg);

struct ArmijoResult {
  Vector x_next;
  double step = 0.0;
  double f_next = 0.0;
  int backtracks = 0;
  int value_calls = 0;
};

/// Halves from initial_step until f(x - t g) <= f_x - c t ||g||^2.
/// Throws LineSearchStall after params.max_halvings halvings.
ArmijoResult armijo_search(const Objective& f, const Vector& x, const Vector& grad, double f_x,
                           double initial_step, const LineSearchParams& params);

// Methods -------------------------------------------------------------------

class FixedStepGD final : public Method {
 public:
  explicit FixedStepGD(double lambda);

  std::string name() const override { return "gd"; }
  void reset() override {}
  StepReport step(const Objective& f, const Vector& x, const Vector& grad,
                  Vector& x_next) override;

 private:
  double lambda_;
};

/// Nesterov's accelerated gradient method.
///
/// Convex form: y^{k+1} = x^k - lambda grad f(x^k), x^{k+1} = y^{k+1} +
/// ((t_k - 1)/t_{k+1})(y^{k+1} - y^k) with t_{k+1} = (1 + sqrt(1 + 4 t_k^2))/2.
/// A fixed momentum replaces the t-sequence in the strongly convex form.
/// With backtracking the step starts from the last accepted one (init_step at
/// first) and shrinks until f(y) <= f(x) - (t/2)||grad||^2, so steps never
/// grow; letting them grow breaks the t-sequence and can diverge.
class Nesterov final : public Method {
 public:
  static Nesterov convex(double lambda);
  static Nesterov strongly_convex(double L, double mu);
  static Nesterov with_momentum(double lambda, double beta);
  static Nesterov backtracking(LineSearchParams params = {});

  std::string name() const override;
  void reset() override;
  StepReport step(const Objective& f, const Vector& x, const Vector& grad,
                  Vector& x_next) override;

 private:
  Nesterov() = default;

  double lambda_ = 0.0;
  std::optional<double> fixed_beta_;
  std::optional<LineSearchParams> search_;

  Vector y_prev_;
  double t_ = 1.0;
  double last_step_ = 0.0;
  bool started_ = false;
};

class PolyakMethod final : public Method {
 public:
  explicit PolyakMethod(double f_star) : f_star_(f_star) {}

  std::string name() const override { return "polyak"; }
  void reset() override { negative_gaps_ = 0; }
  StepReport step(const Objective& f, const Vector& x, const Vector& grad,
                  Vector& x_next) override;

  int negative_gap_warnings() const { return negative_gaps_; }

 private:
  double f_star_;
  int negative_gaps_ = 0;
};

class BarzilaiBorwein final : public Method {
 public:
  explicit BarzilaiBorwein(BBVariant variant, double lambda0 = 1e-10);

  std::string name() const override { return variant_ == BBVariant::BB1 ? "bb1" : "bb2"; }
  void reset() override { started_ = false; }
  StepReport step(const Objective& f, const Vector& x, const Vector& grad,
                  Vector& x_next) override;

 private:
  BBVariant variant_;
  double lambda0_;
  bool started_ = false;
  Vector x_prev_;
  Vector grad_prev_;
};

class ArmijoGD final : public Method {
 public:
  explicit ArmijoGD(LineSearchParams params = {});

  std::string name() const override { return "armijo"; }
  void reset() override { last_step_.reset(); }
  StepReport step(const Objective& f, const Vector& x, const Vector& grad,
                  Vector& x_next) override;

 private:
  LineSearchParams params_;
  std::optional<double> last_step_;
};

enum class BaselineVariant { GD, Nesterov, NesterovLS, Polyak, BB1, BB2, ArmijoGD };

struct BaselineConfig {
  BaselineVariant variant = BaselineVariant::GD;
  std::optional<double> lambda;  // GD, Nesterov
  std::optional<double> beta;    // Nesterov with fixed momentum
  std::optional<double> f_star;  // Polyak
  double lambda0 = 1e-10;        // BB bootstrap step
  LineSearchParams ls_params;    // ArmijoGD, NesterovLS

  void validate() const;
};

std::unique_ptr<Method> make_baseline(const BaselineConfig& config);

}  // namespace adaptgd
