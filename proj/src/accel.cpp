#include "adaptgd/accel.hpp"

#include <algorithm>
#include <cmath>

#include "adaptgd/adaptive.hpp"

namespace adaptgd {

double accel_momentum(double lambda, double Lambda) {
  if (!(lambda > 0.0) || !(Lambda > 0.0)) throw ConfigError("momentum needs positive estimates");
  if (lambda * Lambda > 1.0) return 0.0;
  const double a = std::sqrt(1.0 / lambda);
  const double b = std::sqrt(Lambda);
  return (a - b) / (a + b);
}

AccelStep accel_bootstrap(double lambda0, double Lambda0, const Vector& x0, const Vector& grad0) {
  if (!(lambda0 > 0.0) || std::isinf(lambda0)) throw ConfigError("lambda0 must be positive");
  if (Lambda0 <= 0.0) Lambda0 = 1.0 / lambda0;
  AccelStep out;
  out.x_next = x0 - lambda0 * grad0;
  out.y_next = out.x_next;
  out.lambda = lambda0;
  out.Lambda = Lambda0;
  out.beta = 0.0;
  out.state.lambda_prev = lambda0;
  out.state.Lambda_prev = Lambda0;
  out.state.theta_prev = kInf;
  out.state.Theta_prev = kInf;
  out.state.x_prev = x0;
  out.state.grad_prev = grad0;
  out.state.y_prev = out.y_next;
  return out;
}

AccelStep accel_step(const AccelState& state, const Vector& x, const Vector& grad) {
  if (!(state.lambda_prev > 0.0) || !(state.Lambda_prev > 0.0))
    throw ConfigError("accelerated state needs positive estimates");
  if (state.x_prev.size() != x.size()) throw ConfigError("accelerated state is not initialized");

  const Displacement d = measure_displacement(x, state.x_prev, grad, state.grad_prev);

  const double lambda_growth = std::sqrt(1.0 + state.theta_prev / 2.0) * state.lambda_prev;
  const double lambda_curv = d.dg == 0.0 ? kInf : d.dx / (2.0 * d.dg);
  double lambda = std::min(lambda_growth, lambda_curv);
  if (std::isinf(lambda)) lambda = state.lambda_prev;

  const double Lambda_growth = std::sqrt(1.0 + state.Theta_prev / 2.0) * state.Lambda_prev;
  // dx == 0 only reaches here with dg == 0 as well; both carry no information.
  const double Lambda_curv = d.dx == 0.0 ? 0.0 : d.dg / (2.0 * d.dx);
  double Lambda = Lambda_curv > 0.0 ? std::min(Lambda_growth, Lambda_curv) : Lambda_growth;
  if (std::isinf(Lambda)) Lambda = state.Lambda_prev;

  const double beta = accel_momentum(lambda, Lambda);

  AccelStep out;
  out.y_next = x - lambda * grad;
  out.x_next = out.y_next + beta * (out.y_next - state.y_prev);
  out.lambda = lambda;
  out.Lambda = Lambda;
  out.beta = beta;
  out.dx_norm = d.dx;
  out.dg_norm = d.dg;
  out.state.lambda_prev = lambda;
  out.state.Lambda_prev = Lambda;
  out.state.theta_prev = lambda / state.lambda_prev;
  out.state.Theta_prev = Lambda / state.Lambda_prev;
  out.state.x_prev = x;
  out.state.grad_prev = grad;
  out.state.y_prev = out.y_next;
  return out;
}

AdaptiveAccelerated::AdaptiveAccelerated(AccelConfig config) : config_(config) {
  if (!(config_.lambda0 > 0.0) || std::isinf(config_.lambda0))
    throw ConfigError("lambda0 must be positive");
}

StepReport AdaptiveAccelerated::step(const Objective&, const Vector& x, const Vector& grad,
                                     Vector& x_next) {
  AccelStep s = state_ ? accel_step(*state_, x, grad)
                       : accel_bootstrap(config_.lambda0, config_.Lambda0, x, grad);
  StepReport report;
  report.lambda = s.lambda;
  report.theta = state_ ? s.state.theta_prev : kInf;
  report.dx_norm = s.dx_norm;
  report.dg_norm = s.dg_norm;
  report.momentum = s.beta;
  x_next = std::move(s.x_next);
  state_ = std::move(s.state);
  return report;
}

}  // namespace adaptgd
