#pragma once

#include <string>

#include "adaptgd/core.hpp"

namespace adaptgd {

/// Memory carried between adaptive steps: lambda_{k-1}, theta_{k-1}, x^{k-1}
/// and grad f(x^{k-1}). theta_prev is +inf only before the first adaptive step.
struct StepsizeState {
  double lambda_prev = 0.0;
  double theta_prev = kInf;
  Vector x_prev;
  Vector grad_prev;
};

/// alpha in (0,1); beta = 1/(2(1-alpha)) is derived, never set on its own.
class GeneralUpdateConfig {
 public:
  explicit GeneralUpdateConfig(double alpha);

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

 private:
  double alpha_;
  double beta_;
};

/// Trusted global Lipschitz constant; the method then starts from lambda_0 = 1/L.
class KnownLConfig {
 public:
  explicit KnownLConfig(double L);

  double L() const { return L_; }
  double lambda0() const { return lambda0_; }

 private:
  double L_;
  double lambda0_;
};

/// ||x - x_prev|| and ||grad - grad_prev||.
///
/// Throws ZeroDisplacement when x == x_prev exactly but the gradients differ.
struct Displacement {
  double dx = 0.0;
  double dg = 0.0;
};
Displacement measure_displacement(const Vector& x, const Vector& x_prev, const Vector& grad,
                                  const Vector& grad_prev);

// Stepsize rules. Each returns lambda_k > 0 (finite). A curvature candidate
// with a zero gradient difference is +inf; if both candidates are +inf
// (possible only on the first adaptive step) lambda_prev is reused.

double adgd_stepsize(const StepsizeState& state, const Vector& x, const Vector& grad);
/// Second candidate ||dx|| / sqrt([3||g_k||^2 - 4<g_k, g_{k-1}>]_+).
double adgd_plus_stepsize(const StepsizeState& state, const Vector& x, const Vector& grad);
/// Growth factor sqrt(1 + theta/2) instead of sqrt(1 + theta).
double adgd_sc_stepsize(const StepsizeState& state, const Vector& x, const Vector& grad);
double adgd_general_stepsize(const GeneralUpdateConfig& cfg, const StepsizeState& state,
                             const Vector& x, const Vector& grad);
double adgd_knownL_stepsize(const KnownLConfig& cfg, const StepsizeState& state,
                            const Vector& x, const Vector& grad);

/// Result of one adaptive transition x^k -> x^{k+1}.
struct AdaptiveStep {
  Vector x_next;
  StepsizeState state;  // carries lambda_k, theta_k, x^k, grad f(x^k)
  double lambda = kNaN;
  double theta = kNaN;
  double dx_norm = kNaN;
  double dg_norm = kNaN;
};

/// x^1 = x^0 - lambda_0 grad f(x^0), leaving theta_0 = +inf in the state.
AdaptiveStep adgd_bootstrap(double lambda0, const Vector& x0, const Vector& grad0);

AdaptiveStep adgd_step(const StepsizeState& state, const Vector& x, const Vector& grad);
AdaptiveStep adgd_plus_step(const StepsizeState& state, const Vector& x, const Vector& grad);
AdaptiveStep adgd_sc_step(const StepsizeState& state, const Vector& x, const Vector& grad);
AdaptiveStep adgd_general_step(const GeneralUpdateConfig& cfg, const StepsizeState& state,
                               const Vector& x, const Vector& grad);
AdaptiveStep adgd_knownL_step(const KnownLConfig& cfg, const StepsizeState& state,
                              const Vector& x, const Vector& grad);

enum class AdaptiveRule {
  Standard,        // sqrt(1+theta) growth, ||dx|| / (2||dg||)
  Plus,            // weaker second condition
  StronglyConvex,  // sqrt(1+theta/2) growth
  General,         // alpha/beta family
  KnownL,          // global L supplied
};

const char* to_string(AdaptiveRule rule);

struct AdaptiveConfig {
  AdaptiveRule rule = AdaptiveRule::Standard;
  double lambda0 = 1e-10;  // ignored by KnownL, which starts from 1/L
  double alpha = 0.5;      // General only
  double L = 0.0;          // KnownL only
  bool check_lipschitz = false;  // KnownL: count visited pairs with L_k > L
};

/// Adaptive gradient descent in all deterministic variants, as a Method.
class AdaptiveGradientDescent final : public Method {
 public:
  explicit AdaptiveGradientDescent(AdaptiveConfig config = {});

  std::string name() const override;
  void reset() override;
  StepReport step(const Objective& f, const Vector& x, const Vector& grad,
                  Vector& x_next) override;

  const AdaptiveConfig& config() const { return config_; }
  /// Number of steps where the observed L_k exceeded the trusted L.
  int lipschitz_warnings() const { return lipschitz_warnings_; }

 private:
  AdaptiveStep advance(const Vector& x, const Vector& grad) const;

  AdaptiveConfig config_;
  std::optional<GeneralUpdateConfig> general_;
  std::optional<KnownLConfig> known_;
  std::optional<StepsizeState> state_;
  int lipschitz_warnings_ = 0;
};

}  // namespace adaptgd
