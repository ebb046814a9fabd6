#pragma once

#include <string>

#include "adaptgd/core.hpp"

namespace adaptgd {

/// State of the adaptive accelerated method: inverse-smoothness estimate
/// lambda and strong-convexity estimate Lambda, their ratios, and the
/// previous points x^{k-1}, grad f(x^{k-1}), y^k.
struct AccelState {
  double lambda_prev = 0.0;
  double Lambda_prev = 0.0;
  double theta_prev = kInf;
  double Theta_prev = kInf;
  Vector x_prev;
  Vector grad_prev;
  Vector y_prev;
};

struct AccelStep {
  Vector x_next;
  Vector y_next;
  AccelState state;
  double lambda = kNaN;
  double Lambda = kNaN;
  double beta = kNaN;
  double dx_norm = kNaN;
  double dg_norm = kNaN;
};

/// (sqrt(1/lambda) - sqrt(Lambda)) / (sqrt(1/lambda) + sqrt(Lambda)), clamped
/// to 0 when lambda * Lambda > 1.
double accel_momentum(double lambda, double Lambda);

/// y^1 = x^1 = x^0 - lambda_0 grad f(x^0); Lambda_0 defaults to 1/lambda_0 so
/// the first momentum is zero.
AccelStep accel_bootstrap(double lambda0, double Lambda0, const Vector& x0, const Vector& grad0);

/// One step: both curvature estimates, momentum beta_k, y^{k+1} and x^{k+1}.
///
/// A zero gradient difference gives a Lambda curvature candidate of 0, which
/// is excluded from the min (the growth candidate is taken instead).
AccelStep accel_step(const AccelState& state, const Vector& x, const Vector& grad);

struct AccelConfig {
  double lambda0 = 1e-10;
  double Lambda0 = 0.0;  // <= 0 means 1/lambda0
};

class AdaptiveAccelerated final : public Method {
 public:
  explicit AdaptiveAccelerated(AccelConfig config = {});

  std::string name() const override { return "adgd_accel"; }
  void reset() override { state_.reset(); }
  StepReport step(const Objective& f, const Vector& x, const Vector& grad,
                  Vector& x_next) override;

 private:
  AccelConfig config_;
  std::optional<AccelState> state_;
};

}  // namespace adaptgd
