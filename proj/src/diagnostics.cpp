#include "adaptgd/diagnostics.hpp"

#include <algorithm>
#include <cmath>

namespace adaptgd {

namespace {

void require_solution(const ProblemMeta& meta) {
  if (!meta.has_solution()) throw MissingMeta("certificate needs x* and f*");
}

const Vector& iterate(const TraceRow& row) {
  if (row.x.size() == 0) throw ConfigError("certificate needs recorded iterates");
  return row.x;
}

double value_of(const TraceRow& row) {
  if (std::isnan(row.f_value)) throw MissingValue("certificate needs recorded function values");
  return row.f_value;
}

bool has_step(const TraceRow& row) { return std::isfinite(row.lambda); }

}  // namespace

EnergyWeights EnergyWeights::general(double alpha) {
  const GeneralUpdateConfig cfg(alpha);
  return {alpha * cfg.beta(), cfg.beta()};
}

EnergyPair lyapunov_energy(const ProblemMeta& meta, const Vector& x_next, const Vector& x,
                           const Vector& x_prev, double lambda, double theta, double f_x,
                           double f_x_prev, EnergyWeights w) {
  require_solution(meta);
  const Vector& xs = *meta.x_star;
  const double fs = *meta.f_star;
  EnergyPair e;
  e.lhs = (x_next - xs).squaredNorm() + w.displacement * (x_next - x).squaredNorm() +
          2.0 * lambda * (1.0 + w.beta * theta) * (f_x - fs);
  e.rhs = (x - xs).squaredNorm() + w.displacement * (x - x_prev).squaredNorm() +
          2.0 * lambda * w.beta * theta * (f_x_prev - fs);
  return e;
}

void ErgodicTracker::update(const Vector& x_k, double lambda, double theta) {
  if (count_ == 0) {
    numerator_ = lambda * (1.0 + beta_ * theta) * x_k;
    S_ = lambda + beta_ * lambda * theta;
  } else {
    if (x_k.size() != numerator_.size()) throw ConfigError("iterate dimension changed");
    numerator_ += lambda * (1.0 + beta_ * theta) * x_k - beta_ * lambda * theta * x_last_;
    S_ += lambda;
  }
  x_last_ = x_k;
  ++count_;
}

Vector ErgodicTracker::average() const {
  if (count_ == 0) throw ConfigError("ergodic average of an empty trajectory");
  return numerator_ / S_;
}

double certificate_constant(const ProblemMeta& meta, const Vector& x1, const Vector& x0,
                            double lambda1, double theta1, double f_x0, EnergyWeights w) {
  require_solution(meta);
  return (x1 - *meta.x_star).squaredNorm() + w.displacement * (x1 - x0).squaredNorm() +
         2.0 * lambda1 * w.beta * theta1 * (f_x0 - *meta.f_star);
}

CertificateGap certificate_gap(const ErgodicTracker& tracker, const Objective& f,
                               const ProblemMeta& meta, double D) {
  require_solution(meta);
  if (!f.has_value()) throw MissingValue("certificate gap needs function values");
  CertificateGap out;
  out.gap = f.value(tracker.average()) - *meta.f_star;
  out.bound = D / (2.0 * tracker.S());
  return out;
}

ScEnergySeries sc_energy(const RunTrace& trace, const ProblemMeta& meta) {
  require_solution(meta);
  if (!meta.L_global || !meta.mu_global) throw MissingMeta("strongly convex energy needs L and mu");
  const double c = 0.5 * (1.0 + 2.0 * *meta.mu_global / *meta.L_global);
  const Vector& xs = *meta.x_star;
  const double fs = *meta.f_star;

  ScEnergySeries out;
  for (std::size_t k = 1; k + 1 < trace.rows.size(); ++k) {
    const TraceRow& row = trace.rows[k];
    if (!has_step(row)) break;
    const Vector& x = iterate(row);
    const Vector& x_next = iterate(trace.rows[k + 1]);
    const double psi = (x_next - xs).squaredNorm() + c * (x_next - x).squaredNorm() +
                       2.0 * row.lambda * (1.0 + row.theta) * (value_of(row) - fs);
    const double ratio = out.psi.empty() || out.psi.back() == 0.0 ? kNaN : psi / out.psi.back();
    out.k.push_back(static_cast<int>(k));
    out.psi.push_back(psi);
    out.ratio.push_back(ratio);
  }
  return out;
}

double fit_linear_rate(std::span<const double> residuals, std::size_t begin, std::size_t end) {
  if (end > residuals.size() || end < begin + 2) throw DegenerateWindow("window needs two points");
  const double n = static_cast<double>(end - begin);
  double mean_i = 0.0;
  double mean_y = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    if (!(residuals[i] > 0.0) || std::isinf(residuals[i]))
      throw DegenerateWindow("residuals must be positive and finite");
    mean_i += static_cast<double>(i);
    mean_y += std::log(residuals[i]);
  }
  mean_i /= n;
  mean_y /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    const double di = static_cast<double>(i) - mean_i;
    sxy += di * (std::log(residuals[i]) - mean_y);
    sxx += di * di;
  }
  return sxy / sxx;
}

std::vector<double> distance_residuals(const RunTrace& trace, const Vector& x_star) {
  std::vector<double> out;
  out.reserve(trace.rows.size());
  for (const auto& row : trace.rows) out.push_back((iterate(row) - x_star).squaredNorm());
  return out;
}

ConvexCertificate certify_convex_trace(RunTrace& trace, const Objective& f,
                                       const ProblemMeta& meta, EnergyWeights w) {
  require_solution(meta);
  ConvexCertificate out;
  auto& rows = trace.rows;
  if (rows.size() < 3 || !has_step(rows[1])) return out;

  out.D = certificate_constant(meta, iterate(rows[1]), iterate(rows[0]), rows[1].lambda,
                               rows[1].theta, value_of(rows[0]), w);
  const double slack = 1e-9 * out.D;
  rows[1].energy = out.D;
  ErgodicTracker tracker(w.beta);

  for (std::size_t k = 1; k < rows.size() && has_step(rows[k]); ++k) {
    const TraceRow& row = rows[k];
    tracker.update(iterate(row), row.lambda, row.theta);
    const CertificateGap cg = certificate_gap(tracker, f, meta, out.D);
    rows[k].ergodic_gap = cg.gap;
    if (cg.gap > cg.bound * (1.0 + 1e-9)) ++out.certificate_violations;
    if (meta.L_global && cg.gap > out.D * *meta.L_global / static_cast<double>(k) * (1.0 + 1e-9))
      ++out.rate_violations;

    if (k + 1 < rows.size() && has_step(rows[k + 1])) {
      const double w_k = row.lambda * (1.0 + w.beta * row.theta) -
                         w.beta * rows[k + 1].lambda * rows[k + 1].theta;
      if (w_k < -1e-12 * row.lambda) ++out.negative_weights;
    }

    if (k + 1 >= rows.size()) break;
    const EnergyPair e = lyapunov_energy(meta, iterate(rows[k + 1]), iterate(row),
                                         iterate(rows[k - 1]), row.lambda, row.theta,
                                         value_of(row), value_of(rows[k - 1]), w);
    ++out.steps_checked;
    if (e.lhs > e.rhs + slack) ++out.lemma_violations;
    if (e.lhs > rows[k].energy + slack) ++out.monotonicity_violations;
    rows[k + 1].energy = e.lhs;
  }
  return out;
}

ConstructionCheck check_construction(const RunTrace& trace, const ConstructionSpec& spec) {
  std::optional<GeneralUpdateConfig> general;
  if (spec.rule == AdaptiveRule::General) general.emplace(spec.alpha);
  if (spec.rule == AdaptiveRule::KnownL && !(spec.L > 0.0))
    throw ConfigError("known-L construction check needs L");

  auto growth = [&](double theta) {
    switch (spec.rule) {
      case AdaptiveRule::StronglyConvex:
        return std::sqrt(1.0 + theta / 2.0);
      case AdaptiveRule::General:
        return std::sqrt(1.0 / general->beta() + theta);
      default:
        return std::sqrt(1.0 + theta);
    }
  };

  ConstructionCheck out;
  const auto& rows = trace.rows;
  for (std::size_t k = 1; k < rows.size() && has_step(rows[k]); ++k) {
    const TraceRow& row = rows[k];
    const TraceRow& prev = rows[k - 1];
    ++out.steps_checked;

    if (std::isfinite(prev.theta) && row.lambda > growth(prev.theta) * prev.lambda * (1.0 + 1e-15))
      ++out.growth_violations;

    const double inv_Lk = row.dg_norm > 0.0 ? row.dx_norm / row.dg_norm : kInf;
    switch (spec.rule) {
      case AdaptiveRule::Standard:
      case AdaptiveRule::StronglyConvex:
        if (row.dg_norm > 0.0 && 2.0 * row.lambda * row.dg_norm > row.dx_norm * (1.0 + 1e-12))
          ++out.curvature_violations;
        break;
      case AdaptiveRule::General:
        if (row.dg_norm > 0.0 && row.lambda * row.dg_norm > spec.alpha * row.dx_norm * (1.0 + 1e-12))
          ++out.curvature_violations;
        break;
      case AdaptiveRule::KnownL: {
        const double cand = 1.0 / (prev.lambda * spec.L * spec.L) + 0.5 * inv_Lk;
        if (row.lambda > cand * (1.0 + 1e-12)) ++out.curvature_violations;
        if (2.0 * (row.lambda - std::sqrt(row.theta) / spec.L) > inv_Lk + 1e-12)
          ++out.ledger_violations;
        break;
      }
      case AdaptiveRule::Plus:
        break;  // the weaker condition needs inner products the trace does not keep
    }
  }
  return out;
}

double stepsize_floor(AdaptiveRule rule, double alpha, double L) {
  switch (rule) {
    case AdaptiveRule::General:
      static_cast<void>(GeneralUpdateConfig(alpha));  // rejects alpha outside (0, 1)
      return std::min(alpha, 2.0 * alpha * (1.0 - alpha)) / L;
    case AdaptiveRule::Plus:
      return 0.0;
    default:
      return 0.5 / L;
  }
}

int count_stepsize_floor_violations(const RunTrace& trace, double floor) {
  int violations = 0;
  for (std::size_t k = 1; k < trace.rows.size(); ++k) {
    const TraceRow& row = trace.rows[k];
    if (has_step(row) && row.lambda < floor * (1.0 - 1e-10)) ++violations;
  }
  return violations;
}

ProblemMeta reference_meta(const Objective& f, const Vector& x0, double grad_tol, int max_iter) {
  AdaptiveGradientDescent method;
  TerminationRule term;
  term.grad_tol = grad_tol;
  term.max_iter = max_iter;
  RunOptions options;
  options.record_values = false;
  const RunTrace trace = run(method, f, x0, term, options);
  if (trace.status == RunStatus::Diverged) throw Error("reference run diverged");
  ProblemMeta meta;
  meta.x_star = trace.x_final;
  if (f.has_value()) meta.f_star = f.value(trace.x_final);
  return meta;
}

}  // namespace adaptgd
