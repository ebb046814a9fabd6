#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "adaptgd/core.hpp"

namespace adaptgd {

enum class SgdOption {
  BiasedSameSample,     // curvature from the sample used for the step
  UnbiasedFreshSample,  // curvature from an independent sample, drawn first
};

const char* to_string(SgdOption option);

struct SgdConfig {
  double alpha = 0.5;
  SgdOption option = SgdOption::BiasedSameSample;
  int batch_size = 1;
  std::uint64_t seed = 0;
  double lambda0 = 1e-10;

  void validate(std::size_t num_samples) const;
};

struct SgdState {
  double lambda_prev = 0.0;
  double theta_prev = kInf;
  Vector x_prev;
  std::mt19937_64 rng;
};

struct SgdStep {
  Vector x_next;
  SgdState state;
  double lambda = kNaN;
  double theta = kNaN;
  double dx_norm = kNaN;
  double dg_norm = kNaN;
  double grad_norm = kNaN;  // of the sampled gradient used for the step
  std::size_t sample_gradients = 0;
};

/// Indices drawn uniformly with replacement.
std::vector<std::size_t> draw_batch(std::mt19937_64& rng, std::size_t num_samples, int batch_size);

/// Average of the member sample gradients (a single sample is returned as is).
Vector batch_gradient(const StochasticObjective& f, const std::vector<std::size_t>& batch,
                      const Vector& x);

/// x^1 = x^0 - lambda_0 grad f_{xi^0}(x^0).
SgdStep sgd_bootstrap(const SgdConfig& cfg, const StochasticObjective& f, const Vector& x0);

/// lambda_k = min{sqrt(1+theta_{k-1}) lambda_{k-1}, alpha ||dx|| / ||dg||} with dg
/// measured on xi^k (biased) or on an independent zeta^k (unbiased); then
/// x^{k+1} = x^k - lambda_k grad f_{xi^k}(x^k).
SgdStep sgd_step(const SgdConfig& cfg, const SgdState& state, const StochasticObjective& f,
                 const Vector& x);

/// Exact moments of the sample gradients at x, by enumeration.
struct SampleGradientStats {
  Vector mean_gradient;
  double second_moment = 0.0;  // E||grad f_xi(x)||^2; equals sigma^2 at x = x*
  double variance = 0.0;       // E||grad f_xi(x) - mean||^2
};

SampleGradientStats sgd_variance_stats(const StochasticObjective& f, const Vector& x);

/// Stochastic driver. grad_norm in the trace is the sampled gradient norm and
/// termination on grad_tol uses it; f_value (if recorded) is the full objective.
RunTrace run_sgd(const SgdConfig& cfg, const StochasticObjective& f, const Vector& x0,
                 const TerminationRule& term, const RunOptions& options = {});

}  // namespace adaptgd
