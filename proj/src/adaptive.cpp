#include "adaptgd/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace adaptgd {

namespace {

// min over candidates with the +inf convention; both infinite -> fallback.
double pick(double growth, double curvature, double fallback) {
  const double lambda = std::min(growth, curvature);
  return std::isinf(lambda) ? fallback : lambda;
}

AdaptiveStep finish(double lambda, const StepsizeState& state, const Vector& x,
                    const Vector& grad, const Displacement& d) {
  AdaptiveStep out;
  out.x_next = x - lambda * grad;
  out.lambda = lambda;
  out.theta = lambda / state.lambda_prev;
  out.dx_norm = d.dx;
  out.dg_norm = d.dg;
  out.state.lambda_prev = lambda;
  out.state.theta_prev = out.theta;
  out.state.x_prev = x;
  out.state.grad_prev = grad;
  return out;
}

void require_state(const StepsizeState& state, const Vector& x) {
  if (!(state.lambda_prev > 0.0)) throw ConfigError("stepsize state needs lambda_prev > 0");
  if (state.x_prev.size() != x.size() || state.grad_prev.size() != x.size())
    throw ConfigError("stepsize state is not initialized for this dimension");
}

double standard_curvature(const Displacement& d) {
  return d.dg == 0.0 ? kInf : d.dx / (2.0 * d.dg);
}

double plus_curvature(const Displacement& d, const Vector& grad, const Vector& grad_prev) {
  const double bracket = std::max(0.0, 3.0 * grad.squaredNorm() - 4.0 * grad.dot(grad_prev));
  return bracket == 0.0 ? kInf : d.dx / std::sqrt(bracket);
}

double general_curvature(const GeneralUpdateConfig& cfg, const Displacement& d) {
  return d.dg == 0.0 ? kInf : cfg.alpha() * d.dx / d.dg;
}

double known_curvature(const KnownLConfig& cfg, const StepsizeState& state,
                       const Displacement& d) {
  if (d.dg == 0.0) return kInf;
  // 1/(2 L_k) with L_k = ||dg|| / ||dx||
  return 1.0 / (state.lambda_prev * cfg.L() * cfg.L()) + d.dx / (2.0 * d.dg);
}

double growth(const StepsizeState& state) {
  return std::sqrt(1.0 + state.theta_prev) * state.lambda_prev;
}

double sc_growth(const StepsizeState& state) {
  return std::sqrt(1.0 + state.theta_prev / 2.0) * state.lambda_prev;
}

double general_growth(const GeneralUpdateConfig& cfg, const StepsizeState& state) {
  return std::sqrt(1.0 / cfg.beta() + state.theta_prev) * state.lambda_prev;
}

}  // namespace

GeneralUpdateConfig::GeneralUpdateConfig(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  beta_ = 1.0 / (2.0 * (1.0 - alpha));
}

KnownLConfig::KnownLConfig(double L) : L_(L) {
  if (!(L > 0.0) || std::isinf(L)) throw ConfigError("L must be positive and finite");
  lambda0_ = 1.0 / L;
}

Displacement measure_displacement(const Vector& x, const Vector& x_prev, const Vector& grad,
                                  const Vector& grad_prev) {
  Displacement d;
  d.dx = (x - x_prev).norm();
  d.dg = (grad - grad_prev).norm();
  if (d.dx == 0.0 && d.dg != 0.0) throw ZeroDisplacement();
  return d;
}

double adgd_stepsize(const StepsizeState& state, const Vector& x, const Vector& grad) {
  require_state(state, x);
  const Displacement d = measure_displacement(x, state.x_prev, grad, state.grad_prev);
  return pick(growth(state), standard_curvature(d), state.lambda_prev);
}

double adgd_plus_stepsize(const StepsizeState& state, const Vector& x, const Vector& grad) {
  require_state(state, x);
  const Displacement d = measure_displacement(x, state.x_prev, grad, state.grad_prev);
  return pick(growth(state), plus_curvature(d, grad, state.grad_prev), state.lambda_prev);
}

double adgd_sc_stepsize(const StepsizeState& state, const Vector& x, const Vector& grad) {
  require_state(state, x);
  const Displacement d = measure_displacement(x, state.x_prev, grad, state.grad_prev);
  return pick(sc_growth(state), standard_curvature(d), state.lambda_prev);
}

double adgd_general_stepsize(const GeneralUpdateConfig& cfg, const StepsizeState& state,
                             const Vector& x, const Vector& grad) {
  require_state(state, x);
  const Displacement d = measure_displacement(x, state.x_prev, grad, state.grad_prev);
  return pick(general_growth(cfg, state), general_curvature(cfg, d), state.lambda_prev);
}

double adgd_knownL_stepsize(const KnownLConfig& cfg, const StepsizeState& state,
                            const Vector& x, const Vector& grad) {
  require_state(state, x);
  const Displacement d = measure_displacement(x, state.x_prev, grad, state.grad_prev);
  return pick(growth(state), known_curvature(cfg, state, d), state.lambda_prev);
}

AdaptiveStep adgd_bootstrap(double lambda0, const Vector& x0, const Vector& grad0) {
  if (!(lambda0 > 0.0) || std::isinf(lambda0)) throw ConfigError("lambda0 must be positive");
  AdaptiveStep out;
  out.x_next = x0 - lambda0 * grad0;
  out.lambda = lambda0;
  out.theta = kInf;
  out.state.lambda_prev = lambda0;
  out.state.theta_prev = kInf;
  out.state.x_prev = x0;
  out.state.grad_prev = grad0;
  return out;
}

AdaptiveStep adgd_step(const StepsizeState& state, const Vector& x, const Vector& grad) {
  require_state(state, x);
  const Displacement d = measure_displacement(x, state.x_prev, grad, state.grad_prev);
  return finish(pick(growth(state), standard_curvature(d), state.lambda_prev), state, x, grad,
                d);
}

AdaptiveStep adgd_plus_step(const StepsizeState& state, const Vector& x, const Vector& grad) {
  require_state(state, x);
  const Displacement d = measure_displacement(x, state.x_prev, grad, state.grad_prev);
  return finish(pick(growth(state), plus_curvature(d, grad, state.grad_prev), state.lambda_prev),
                state, x, grad, d);
}

AdaptiveStep adgd_sc_step(const StepsizeState& state, const Vector& x, const Vector& grad) {
  require_state(state, x);
  const Displacement d = measure_displacement(x, state.x_prev, grad, state.grad_prev);
  return finish(pick(sc_growth(state), standard_curvature(d), state.lambda_prev), state, x,
                grad, d);
}

AdaptiveStep adgd_general_step(const GeneralUpdateConfig& cfg, const StepsizeState& state,
                               const Vector& x, const Vector& grad) {
  require_state(state, x);
  const Displacement d = measure_displacement(x, state.x_prev, grad, state.grad_prev);
  return finish(pick(general_growth(cfg, state), general_curvature(cfg, d), state.lambda_prev),
                state, x, grad, d);
}

AdaptiveStep adgd_knownL_step(const KnownLConfig& cfg, const StepsizeState& state,
                              const Vector& x, const Vector& grad) {
  require_state(state, x);
  const Displacement d = measure_displacement(x, state.x_prev, grad, state.grad_prev);
  return finish(pick(growth(state), known_curvature(cfg, state, d), state.lambda_prev), state,
                x, grad, d);
}

const char* to_string(AdaptiveRule rule) {
  switch (rule) {
    case AdaptiveRule::Standard:
      return "adgd";
    case AdaptiveRule::Plus:
      return "adgd_plus";
    case AdaptiveRule::StronglyConvex:
      return "adgd_sc";
    case AdaptiveRule::General:
      return "adgd_general";
    case AdaptiveRule::KnownL:
      return "adgd_known_l";
  }
  return "adgd";
}

AdaptiveGradientDescent::AdaptiveGradientDescent(AdaptiveConfig config) : config_(config) {
  switch (config_.rule) {
    case AdaptiveRule::General:
      general_.emplace(config_.alpha);
      break;
    case AdaptiveRule::KnownL:
      known_.emplace(config_.L);
      config_.lambda0 = known_->lambda0();
      break;
    default:
      break;
  }
  if (!(config_.lambda0 > 0.0) || std::isinf(config_.lambda0))
    throw ConfigError("lambda0 must be positive");
}

std::string AdaptiveGradientDescent::name() const { return to_string(config_.rule); }

void AdaptiveGradientDescent::reset() {
  state_.reset();
  lipschitz_warnings_ = 0;
}

AdaptiveStep AdaptiveGradientDescent::advance(const Vector& x, const Vector& grad) const {
  switch (config_.rule) {
    case AdaptiveRule::Standard:
      return adgd_step(*state_, x, grad);
    case AdaptiveRule::Plus:
      return adgd_plus_step(*state_, x, grad);
    case AdaptiveRule::StronglyConvex:
      return adgd_sc_step(*state_, x, grad);
    case AdaptiveRule::General:
      return adgd_general_step(*general_, *state_, x, grad);
    case AdaptiveRule::KnownL:
      return adgd_knownL_step(*known_, *state_, x, grad);
  }
  return adgd_step(*state_, x, grad);
}

StepReport AdaptiveGradientDescent::step(const Objective&, const Vector& x, const Vector& grad,
                                         Vector& x_next) {
  AdaptiveStep s = state_ ? advance(x, grad) : adgd_bootstrap(config_.lambda0, x, grad);

  if (known_ && config_.check_lipschitz && s.dx_norm > 0.0 &&
      s.dg_norm > known_->L() * s.dx_norm * (1.0 + 1e-12)) {
    if (lipschitz_warnings_ == 0)
      std::clog << "warning: observed local Lipschitz estimate " << s.dg_norm / s.dx_norm
                << " exceeds the supplied L = " << known_->L() << '\n';
    ++lipschitz_warnings_;
  }

  x_next = std::move(s.x_next);
  state_ = std::move(s.state);
  StepReport report;
  report.lambda = s.lambda;
  report.theta = s.theta;
  report.dx_norm = s.dx_norm;
  report.dg_norm = s.dg_norm;
  return report;
}

}  // namespace adaptgd
