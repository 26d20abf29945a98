#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tmaxbayes/ctrw.hpp"
#include "tmaxbayes/series.hpp"

namespace tmaxbayes::testing {

/// Adaptive Gauss-Kronrod on [a, b].
double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-13);

/// Composite 20-point Gauss-Legendre on equal panels.
double integrate_panels(const std::function<double(double)>& f, double a, double b, std::size_t panels);

/// Composite trapezoid over the given abscissae.
double trapezoid(const std::vector<double>& x, const std::vector<double>& y);

std::vector<double> linspace(double a, double b, std::size_t n);

/// int_0^x phi_j(s) phi_k(s) ds by adaptive quadrature of the cosine basis, coded afresh.
double cross_integral_quadrature(std::size_t j, std::size_t k, double x);

/// Density of delta * w by direct integration over w on (0, inf).
double increment_density_quadrature(double d, const ctrw::Params& p);

/// Monte Carlo estimate of the density of delta * w at each point. Waits are
/// drawn from Gamma(alpha - 1, beta) with importance weights (or from the prior
/// when alpha <= 1.5) by stratified inverse-CDF sampling, and delta is
/// integrated analytically given w.
std::vector<double> increment_density_monte_carlo(const std::vector<double>& points,
                                                  const ctrw::Params& p, std::size_t samples,
                                                  std::uint64_t seed);

/// Histogram of directly simulated delta * w: fraction of samples in
/// [d - h, d + h) divided by 2h, together with its binomial standard error.
struct HistogramEstimate {
  std::vector<double> density;
  std::vector<double> se;
};
HistogramEstimate increment_density_histogram(const std::vector<double>& points, double half_width,
                                              const ctrw::Params& p, std::size_t samples,
                                              std::uint64_t seed);

/// Second implementation of the correlation matrix: explicit two-pass covariance.
Eigen::MatrixXd two_pass_correlation(const std::vector<std::vector<double>>& columns);

/// Normal-mean model with known unit variance and N(0, prior_sd^2) prior.
struct ConjugateNormal {
  std::vector<double> y;
  double prior_sd = 10.0;

  /// Exact sum over i of log p(y_i | y_{-i}).
  double exact_loo_elpd() const;
  /// S iid posterior draws of the mean and the S x n log-likelihood matrix.
  Eigen::MatrixXd loglik_matrix(std::size_t draws, std::uint64_t seed) const;
};

/// Gaussian linear regression with known noise sd and a flat prior: iid
/// posterior draws, their pointwise log-likelihood and the value at the posterior mean.
struct RegressionDraws {
  Eigen::MatrixXd loglik;
  std::vector<double> loglik_at_mean;
};
RegressionDraws gaussian_regression_draws(std::size_t n, std::size_t k, std::size_t draws,
                                          std::uint64_t seed);

/// Table over consecutive years starting at 1901 with the given annual values.
SeasonalTable annual_table(const std::vector<double>& annual, int first_year = 1901);
NormalizedSeries annual_series(const std::vector<double>& annual, int first_year = 1901);

/// Synthetic monotone-trend data: 1 + 0.5 x + 0.8 (t^2 - 1/3) + N(0, 0.1^2).
struct TrendData {
  NormalizedSeries series;
  std::vector<double> truth;
};
TrendData monotone_trend_data(std::size_t n, std::uint64_t seed, double noise_sd = 0.1);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);
std::string slurp(const std::filesystem::path& path);

}  // namespace tmaxbayes::testing
