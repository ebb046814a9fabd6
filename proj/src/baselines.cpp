#include "adaptgd/baselines.hpp"

#include <cmath>
#include <iostream>

namespace adaptgd {

void LineSearchParams::validate() const {
  if (!(init_step > 0.0)) throw ConfigError("line search init_step must be positive");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw ConfigError("backtrack factor must lie in (0,1)");
  if (!(sufficient_decrease > 0.0 && sufficient_decrease < 1.0))
    throw ConfigError("sufficient-decrease constant must lie in (0,1)");
  if (max_halvings < 1) throw ConfigError("max_halvings must be at least 1");
}

Vector gd_step(double lambda, const Vector& x, const Vector& grad) { return x - lambda * grad; }

PolyakStep polyak_step(double f_star, double f_x, const Vector& x, const Vector& grad) {
  PolyakStep out;
  const double g2 = grad.squaredNorm();
  if (g2 == 0.0) {
    out.x_next = x;
    out.converged = true;
    return out;
  }
  out.negative_gap = f_x < f_star;
  out.lambda = (f_x - f_star) / g2;
  out.x_next = x - out.lambda * grad;
  return out;
}

double bb_stepsize(BBVariant variant, const Vector& dx, const Vector& dg) {
  const double inner = dx.dot(dg);
  return variant == BBVariant::BB1 ? dx.squaredNorm() / inner : inner / dg.squaredNorm();
}

ArmijoResult armijo_search(const Objective& f, const Vector& x, const Vector& grad, double f_x,
                           double initial_step, const LineSearchParams& params) {
  const double g2 = grad.squaredNorm();
  ArmijoResult out;
  double t = initial_step;
  for (int halvings = 0;; ++halvings) {
    Vector trial = x - t * grad;
    const double f_trial = f.value(trial);
    ++out.value_calls;
    if (f_trial <= f_x - params.sufficient_decrease * t * g2) {
      out.x_next = std::move(trial);
      out.step = t;
      out.f_next = f_trial;
      out.backtracks = halvings;
      return out;
    }
    if (halvings == params.max_halvings) throw LineSearchStall();
    t *= params.backtrack;
  }
}

// FixedStepGD ----------------------------------------------------------------

FixedStepGD::FixedStepGD(double lambda) : lambda_(lambda) {
  if (!(lambda > 0.0) || std::isinf(lambda)) throw ConfigError("gd stepsize must be positive");
}

StepReport FixedStepGD::step(const Objective&, const Vector& x, const Vector& grad,
                             Vector& x_next) {
  x_next = gd_step(lambda_, x, grad);
  StepReport r;
  r.lambda = lambda_;
  return r;
}

// Nesterov -------------------------------------------------------------------

Nesterov Nesterov::convex(double lambda) {
  if (!(lambda > 0.0) || std::isinf(lambda)) throw ConfigError("nesterov stepsize must be positive");
  Nesterov n;
  n.lambda_ = lambda;
  return n;
}

Nesterov Nesterov::strongly_convex(double L, double mu) {
  if (!(L > 0.0) || !(mu > 0.0) || mu > L) throw ConfigError("nesterov needs 0 < mu <= L");
  return with_momentum(1.0 / L, (std::sqrt(L) - std::sqrt(mu)) / (std::sqrt(L) + std::sqrt(mu)));
}

Nesterov Nesterov::with_momentum(double lambda, double beta) {
  Nesterov n = convex(lambda);
  if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("nesterov momentum must lie in [0,1)");
  n.fixed_beta_ = beta;
  return n;
}

Nesterov Nesterov::backtracking(LineSearchParams params) {
  params.validate();
  Nesterov n;
  n.lambda_ = params.init_step;
  n.search_ = params;
  return n;
}

std::string Nesterov::name() const {
  if (search_) return "nesterov_ls";
  return fixed_beta_ ? "nesterov_sc" : "nesterov";
}

void Nesterov::reset() {
  started_ = false;
  t_ = 1.0;
  last_step_ = 0.0;
  y_prev_.resize(0);
}

StepReport Nesterov::step(const Objective& f, const Vector& x, const Vector& grad,
                          Vector& x_next) {
  if (!started_) {
    y_prev_ = x;  // y^0 = x^0
    started_ = true;
  }

  StepReport r;
  Vector y_next;
  double step = lambda_;
  if (search_) {
    if (!f.has_value()) throw MissingValue("nesterov backtracking needs function values");
    const double f_x = f.value(x);
    const double g2 = grad.squaredNorm();
    step = last_step_ > 0.0 ? last_step_ : search_->init_step;
    for (int halvings = 0;; ++halvings) {
      y_next = x - step * grad;
      if (f.value(y_next) <= f_x - 0.5 * step * g2) {
        r.backtracks = halvings;
        break;
      }
      if (halvings == search_->max_halvings) throw LineSearchStall();
      step *= search_->backtrack;
    }
    last_step_ = step;
  } else {
    y_next = x - step * grad;
  }

  double beta;
  if (fixed_beta_) {
    beta = *fixed_beta_;
  } else {
    const double t_next = (1.0 + std::sqrt(1.0 + 4.0 * t_ * t_)) / 2.0;
    beta = (t_ - 1.0) / t_next;
    t_ = t_next;
  }

  x_next = y_next + beta * (y_next - y_prev_);
  y_prev_ = std::move(y_next);
  r.lambda = step;
  r.momentum = beta;
  return r;
}

// Polyak ---------------------------------------------------------------------

StepReport PolyakMethod::step(const Objective& f, const Vector& x, const Vector& grad,
                              Vector& x_next) {
  if (!f.has_value()) throw MissingValue("polyak stepsize needs function values");
  PolyakStep s = polyak_step(f_star_, f.value(x), x, grad);
  if (s.negative_gap) {
    if (negative_gaps_ == 0)
      std::clog << "warning: f(x) < f_star in polyak stepsize; the supplied optimum is too high\n";
    ++negative_gaps_;
  }
  x_next = std::move(s.x_next);
  StepReport r;
  r.lambda = s.lambda;
  return r;
}

// Barzilai-Borwein -------------------------------------------------------------

BarzilaiBorwein::BarzilaiBorwein(BBVariant variant, double lambda0)
    : variant_(variant), lambda0_(lambda0) {
  if (!(lambda0 > 0.0) || std::isinf(lambda0)) throw ConfigError("bb bootstrap step must be positive");
}

StepReport BarzilaiBorwein::step(const Objective&, const Vector& x, const Vector& grad,
                                 Vector& x_next) {
  StepReport r;
  double lambda = lambda0_;
  if (started_) {
    const Vector dx = x - x_prev_;
    const Vector dg = grad - grad_prev_;
    lambda = bb_stepsize(variant_, dx, dg);
    r.dx_norm = dx.norm();
    r.dg_norm = dg.norm();
  }
  x_prev_ = x;
  grad_prev_ = grad;
  started_ = true;
  x_next = x - lambda * grad;
  r.lambda = lambda;
  return r;
}

// Armijo ---------------------------------------------------------------------

ArmijoGD::ArmijoGD(LineSearchParams params) : params_(params) { params_.validate(); }

StepReport ArmijoGD::step(const Objective& f, const Vector& x, const Vector& grad,
                          Vector& x_next) {
  if (!f.has_value()) throw MissingValue("armijo line search needs function values");
  const double f_x = f.value(x);
  const double start = last_step_ ? 2.0 * *last_step_ : params_.init_step;
  ArmijoResult res = armijo_search(f, x, grad, f_x, start, params_);
  last_step_ = res.step;
  x_next = std::move(res.x_next);
  StepReport r;
  r.lambda = res.step;
  r.backtracks = res.backtracks;
  return r;
}

// Factory --------------------------------------------------------------------

void BaselineConfig::validate() const {
  switch (variant) {
    case BaselineVariant::GD:
    case BaselineVariant::Nesterov:
      if (!lambda) throw ConfigError("gd/nesterov need a stepsize");
      break;
    case BaselineVariant::Polyak:
      if (!f_star) throw ConfigError("polyak needs f_star");
      break;
    case BaselineVariant::NesterovLS:
    case BaselineVariant::ArmijoGD:
      ls_params.validate();
      break;
    case BaselineVariant::BB1:
    case BaselineVariant::BB2:
      break;
  }
}

std::unique_ptr<Method> make_baseline(const BaselineConfig& config) {
  config.validate();
  switch (config.variant) {
    case BaselineVariant::GD:
      return std::make_unique<FixedStepGD>(*config.lambda);
    case BaselineVariant::Nesterov:
      return std::make_unique<Nesterov>(config.beta
                                            ? Nesterov::with_momentum(*config.lambda, *config.beta)
                                            : Nesterov::convex(*config.lambda));
    case BaselineVariant::NesterovLS:
      return std::make_unique<Nesterov>(Nesterov::backtracking(config.ls_params));
    case BaselineVariant::Polyak:
      return std::make_unique<PolyakMethod>(*config.f_star);
    case BaselineVariant::BB1:
      return std::make_unique<BarzilaiBorwein>(BBVariant::BB1, config.lambda0);
    case BaselineVariant::BB2:
      return std::make_unique<BarzilaiBorwein>(BBVariant::BB2, config.lambda0);
    case BaselineVariant::ArmijoGD:
      return std::make_unique<ArmijoGD>(config.ls_params);
  }
  throw ConfigError("unknown baseline variant");
}

}  // namespace adaptgd
