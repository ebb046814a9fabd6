#include "adaptgd/core.hpp"

#include <utility>

namespace adaptgd {

double Objective::value(const Vector&) const { throw MissingValue(); }

FunctionObjective::FunctionObjective(int dim, GradientFn gradient, ValueFn value)
    : dim_(dim), gradient_(std::move(gradient)), value_(std::move(value)) {
  if (dim_ < 1) throw ConfigError("objective dimension must be positive");
  if (!gradient_) throw ConfigError("objective needs a gradient map");
}

double FunctionObjective::value(const Vector& x) const {
  if (!value_) throw MissingValue();
  return value_(x);
}

double StochasticObjective::sample_value(std::size_t, const Vector&) const {
  throw MissingValue("stochastic objective has no sample value map");
}

Vector AveragedObjective::gradient(const Vector& x) const {
  Vector sum = Vector::Zero(samples_.dim());
  const std::size_t n = samples_.num_samples();
  for (std::size_t i = 0; i < n; ++i) sum += samples_.sample_gradient(i, x);
  return sum / static_cast<double>(n);
}

double AveragedObjective::value(const Vector& x) const {
  double sum = 0.0;
  const std::size_t n = samples_.num_samples();
  for (std::size_t i = 0; i < n; ++i) sum += samples_.sample_value(i, x);
  return sum / static_cast<double>(n);
}

double ProblemMeta::condition_number() const {
  if (!L_global || !mu_global || *mu_global <= 0.0) return kInf;
  return *L_global / *mu_global;
}

Vector finite_diff_gradient(const Objective& f, const Vector& x, double h) {
  if (!f.has_value()) throw MissingValue();
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be positive");
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f.value(probe);
    probe[i] = x[i] - h;
    const double down = f.value(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

bool all_finite(const Vector& v) { return v.allFinite(); }

const char* to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Converged:
      return "converged";
    case RunStatus::MaxIter:
      return "max_iter";
    case RunStatus::Diverged:
      return "diverged";
  }
  return "unknown";
}

void TerminationRule::validate() const {
  if (!(grad_tol > 0.0)) throw ConfigError("grad_tol must be positive");
  if (max_iter < 1) throw ConfigError("max_iter must be at least 1");
  if (!(divergence_cap > 0.0)) throw ConfigError("divergence_cap must be positive");
}

Vector CountingObjective::gradient(const Vector& x) const {
  ++gradient_calls_;
  return inner_.gradient(x);
}

double CountingObjective::value(const Vector& x) const {
  ++value_calls_;
  return inner_.value(x);
}

RunTrace run(Method& method, const Objective& f, const Vector& x0, const TerminationRule& term,
             const RunOptions& options) {
  term.validate();
  if (x0.size() != f.dim()) throw ConfigError("x0 dimension does not match the objective");

  method.reset();
  CountingObjective counted(f);
  const bool with_values = options.record_values && f.has_value();

  RunTrace trace;
  trace.method = method.name();
  Vector x = x0;

  for (int k = 0;; ++k) {
    const Vector g = counted.gradient(x);

    TraceRow row;
    row.k = k;
    row.grad_norm = g.norm();
    // Instrumentation values bypass the counter so oracle_calls reflects method cost.
    if (with_values) row.f_value = f.value(x);
    if (options.record_iterates) row.x = x;

    if (!all_finite(g)) {
      row.oracle_calls = counted.calls();
      trace.rows.push_back(std::move(row));
      trace.status = RunStatus::Diverged;
      break;
    }
    if (row.grad_norm <= term.grad_tol || k == term.max_iter) {
      trace.status = row.grad_norm <= term.grad_tol ? RunStatus::Converged : RunStatus::MaxIter;
      row.oracle_calls = counted.calls();
      trace.rows.push_back(std::move(row));
      break;
    }

    Vector x_next;
    const StepReport report = method.step(counted, x, g, x_next);
    row.lambda = report.lambda;
    row.theta = report.theta;
    row.dx_norm = report.dx_norm;
    row.dg_norm = report.dg_norm;
    row.momentum = report.momentum;
    row.backtracks = report.backtracks;
    row.oracle_calls = counted.calls();
    trace.rows.push_back(std::move(row));

    if (!all_finite(x_next) || x_next.norm() > term.divergence_cap) {
      trace.status = RunStatus::Diverged;
      break;
    }
    x = std::move(x_next);
  }

  trace.x_final = std::move(x);
  return trace;
}

}  // namespace adaptgd
