#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tmaxbayes/fitted.hpp"
#include "tmaxbayes/mcmc.hpp"
#include "tmaxbayes/series.hpp"

/// Coupled continuous-time random walk: T_i = T_{i-1} + delta_i * w_i with
/// delta_i ~ N(mu, tau^2) and w_i ~ Gamma(alpha, rate beta), independent.
namespace tmaxbayes::ctrw {

struct Params {
  double mu = 0.0;
  double tau = 1.0;
  double alpha = 1.0;
  double beta = 1.0;

  bool in_support() const noexcept;
  /// E[delta * w] = mu * alpha / beta.
  double mean_increment() const noexcept { return mu * alpha / beta; }
};

struct Latents {
  std::vector<double> w;
};

struct NormalPrior {
  double mean = 0.0;
  double sd = 1.0;
};

struct Priors {
  NormalPrior mu{0.0, 10.0};
  double tau_scale = 5.0;  // half-normal
  NormalPrior log_alpha{0.0, 1.5};
  NormalPrior log_beta{0.0, 1.5};

  void validate() const;
};

/// Log prior density of the parameters on their natural (constrained) scale.
double log_prior(const Params& p, const Priors& priors);

/// Sum over i of log N(d_i / w_i; mu, tau) - log w_i + log Gamma(w_i; alpha, beta).
double log_likelihood_augmented(const Params& p, std::span<const double> w,
                                std::span<const double> deltas);

/// Augmented likelihood plus log prior; -inf outside the support.
double log_joint(const Params& p, const Latents& latents, const IncrementSeries& deltas,
                 const Priors& priors);

struct QuadratureRule {
  std::size_t nodes = 401;  // odd
  double tail = 1e-10;      // gamma probability left outside each end of the bracket

  void validate() const;
};

/// Density of one increment delta * w with w integrated out:
///   p(d) = int (1/w) N(d/w; mu, tau) Gamma(w; alpha, beta) dw.
/// Composite Simpson on log w over the gamma quantile bracket [q(tail), q(1 - tail)],
/// accumulated in log space. Node weights are computed once per parameter set.
class MarginalIncrementDensity {
 public:
  explicit MarginalIncrementDensity(const Params& p, const QuadratureRule& rule = {});

  double log_pdf(double delta) const;

 private:
  double mu_;
  double tau_;
  std::vector<double> inv_w_;
  std::vector<double> log_weight_;
};

double marginal_increment_logpdf(double delta, const Params& p, const QuadratureRule& rule = {});

/// Forward simulation of n levels starting at t0.
std::vector<double> simulate(const Params& p, double t0, std::size_t n, std::uint64_t seed);

struct FitOptions {
  Priors priors;
  /// Pin beta = alpha so that waits have unit mean.
  bool fix_mean_wait = false;
  /// Append the latent waits w_2..w_N to the returned draws.
  bool export_latents = false;
};

struct Fit {
  /// Columns mu, tau, alpha, beta (then w[...] when exported).
  PosteriorDraws draws;
  /// Sampler-scale posterior mean mapped back to (mu, tau, alpha, beta).
  Params point_estimate;
};

/// Metropolis-within-Gibbs over the latent-augmented posterior.
Fit fit(const NormalizedSeries& series, const McmcConfig& config, const FitOptions& options = {});

/// Parameters of every retained draw, chain-major.
std::vector<Params> extract_params(const PosteriorDraws& draws);

/// One-step-ahead posterior predictive: for year i the predictive level is
/// T_{i-1} + delta * w. The first year echoes the observation.
FittedSeries predict_one_step(const PosteriorDraws& draws, const NormalizedSeries& series,
                              std::uint64_t seed, std::size_t samples_per_draw = 20);

/// Entry (s, i) = marginal log density of increment i under draw s.
Eigen::MatrixXd pointwise_loglik(const PosteriorDraws& draws, const IncrementSeries& deltas,
                                 const QuadratureRule& rule = {});
std::vector<double> pointwise_loglik(const Params& p, const IncrementSeries& deltas,
                                     const QuadratureRule& rule = {});

}  // namespace tmaxbayes::ctrw
