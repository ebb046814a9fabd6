#include "adaptgd/sgd.hpp"

#include <algorithm>
#include <cmath>

#include "adaptgd/adaptive.hpp"

namespace adaptgd {

const char* to_string(SgdOption option) {
  return option == SgdOption::BiasedSameSample ? "biased" : "unbiased";
}

void SgdConfig::validate(std::size_t num_samples) const {
  if (!(alpha > 0.0)) throw ConfigError("sgd alpha must be positive");
  if (batch_size < 1) throw ConfigError("sgd batch_size must be at least 1");
  if (static_cast<std::size_t>(batch_size) > num_samples)
    throw ConfigError("sgd batch_size exceeds the number of samples");
  if (!(lambda0 > 0.0) || std::isinf(lambda0)) throw ConfigError("lambda0 must be positive");
}

std::vector<std::size_t> draw_batch(std::mt19937_64& rng, std::size_t num_samples,
                                    int batch_size) {
  std::uniform_int_distribution<std::size_t> pick(0, num_samples - 1);
  std::vector<std::size_t> batch(static_cast<std::size_t>(batch_size));
  for (auto& i : batch) i = pick(rng);
  return batch;
}

Vector batch_gradient(const StochasticObjective& f, const std::vector<std::size_t>& batch,
                      const Vector& x) {
  if (batch.size() == 1) return f.sample_gradient(batch.front(), x);
  Vector sum = Vector::Zero(f.dim());
  for (std::size_t i : batch) sum += f.sample_gradient(i, x);
  return sum / static_cast<double>(batch.size());
}

SgdStep sgd_bootstrap(const SgdConfig& cfg, const StochasticObjective& f, const Vector& x0) {
  cfg.validate(f.num_samples());
  SgdStep out;
  out.state.rng.seed(cfg.seed);
  const auto batch = draw_batch(out.state.rng, f.num_samples(), cfg.batch_size);
  const Vector g = batch_gradient(f, batch, x0);
  out.x_next = x0 - cfg.lambda0 * g;
  out.lambda = cfg.lambda0;
  out.theta = kInf;
  out.grad_norm = g.norm();
  out.sample_gradients = batch.size();
  out.state.lambda_prev = cfg.lambda0;
  out.state.theta_prev = kInf;
  out.state.x_prev = x0;
  return out;
}

SgdStep sgd_step(const SgdConfig& cfg, const SgdState& state, const StochasticObjective& f,
                 const Vector& x) {
  if (!(state.lambda_prev > 0.0) || state.x_prev.size() != x.size())
    throw ConfigError("sgd state is not initialized");

  SgdStep out;
  out.state.rng = state.rng;
  auto& rng = out.state.rng;
  const std::size_t n = f.num_samples();
  const std::size_t b = static_cast<std::size_t>(cfg.batch_size);

  Vector step_grad;
  Displacement d;
  if (cfg.option == SgdOption::UnbiasedFreshSample) {
    // lambda_k is fixed before xi^k is drawn.
    const auto zeta = draw_batch(rng, n, cfg.batch_size);
    d = measure_displacement(x, state.x_prev, batch_gradient(f, zeta, x),
                             batch_gradient(f, zeta, state.x_prev));
    const auto xi = draw_batch(rng, n, cfg.batch_size);
    step_grad = batch_gradient(f, xi, x);
    out.sample_gradients = 3 * b;
  } else {
    const auto xi = draw_batch(rng, n, cfg.batch_size);
    step_grad = batch_gradient(f, xi, x);
    d = measure_displacement(x, state.x_prev, step_grad, batch_gradient(f, xi, state.x_prev));
    out.sample_gradients = 2 * b;
  }

  const double growth = std::sqrt(1.0 + state.theta_prev) * state.lambda_prev;
  const double curvature = d.dg == 0.0 ? kInf : cfg.alpha * d.dx / d.dg;
  double lambda = std::min(growth, curvature);
  if (std::isinf(lambda)) lambda = state.lambda_prev;

  out.x_next = x - lambda * step_grad;
  out.lambda = lambda;
  out.theta = lambda / state.lambda_prev;
  out.dx_norm = d.dx;
  out.dg_norm = d.dg;
  out.grad_norm = step_grad.norm();
  out.state.lambda_prev = lambda;
  out.state.theta_prev = out.theta;
  out.state.x_prev = x;
  return out;
}

SampleGradientStats sgd_variance_stats(const StochasticObjective& f, const Vector& x) {
  const std::size_t n = f.num_samples();
  std::vector<Vector> grads;
  grads.reserve(n);
  SampleGradientStats stats;
  stats.mean_gradient = Vector::Zero(f.dim());
  for (std::size_t i = 0; i < n; ++i) {
    grads.push_back(f.sample_gradient(i, x));
    stats.mean_gradient += grads.back();
    stats.second_moment += grads.back().squaredNorm();
  }
  stats.mean_gradient /= static_cast<double>(n);
  stats.second_moment /= static_cast<double>(n);
  for (const auto& g : grads) stats.variance += (g - stats.mean_gradient).squaredNorm();
  stats.variance /= static_cast<double>(n);
  return stats;
}

RunTrace run_sgd(const SgdConfig& cfg, const StochasticObjective& f, const Vector& x0,
                 const TerminationRule& term, const RunOptions& options) {
  term.validate();
  cfg.validate(f.num_samples());
  if (x0.size() != f.dim()) throw ConfigError("x0 dimension does not match the objective");

  const bool with_values = options.record_values && f.has_sample_value();
  const AveragedObjective full(f);

  RunTrace trace;
  trace.method = std::string("sgd_") + to_string(cfg.option);
  std::optional<SgdState> state;
  std::size_t calls = 0;
  Vector x = x0;

  for (int k = 0;; ++k) {
    TraceRow row;
    row.k = k;
    if (with_values) row.f_value = full.value(x);
    if (options.record_iterates) row.x = x;

    if (k == term.max_iter) {
      row.oracle_calls = calls;
      trace.rows.push_back(std::move(row));
      trace.status = RunStatus::MaxIter;
      break;
    }

    SgdStep s = state ? sgd_step(cfg, *state, f, x) : sgd_bootstrap(cfg, f, x);
    calls += s.sample_gradients;
    row.grad_norm = s.grad_norm;
    row.oracle_calls = calls;

    if (!std::isfinite(s.grad_norm)) {
      trace.rows.push_back(std::move(row));
      trace.status = RunStatus::Diverged;
      break;
    }
    if (s.grad_norm <= term.grad_tol) {
      trace.rows.push_back(std::move(row));
      trace.status = RunStatus::Converged;
      break;
    }

    row.lambda = s.lambda;
    row.theta = s.theta;
    row.dx_norm = s.dx_norm;
    row.dg_norm = s.dg_norm;
    trace.rows.push_back(std::move(row));

    if (!all_finite(s.x_next) || s.x_next.norm() > term.divergence_cap) {
      trace.status = RunStatus::Diverged;
      break;
    }
    x = std::move(s.x_next);
    state = std::move(s.state);
  }

  trace.x_final = std::move(x);
  return trace;
}

}  // namespace adaptgd
