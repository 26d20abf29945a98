#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tmaxbayes/fitted.hpp"
#include "tmaxbayes/mcmc.hpp"
#include "tmaxbayes/series.hpp"

/// Spectral regression with a monotone trend:
///   y_i = beta0 + beta1 * x_i + f(t_i) + eps_i,   eps_i ~ N(0, sigma^2),
///   f(x) = gamma^2 * ( int_0^x Z^2 - int_0^1 int_0^x Z^2 ),
///   Z(s) = sum_{j=0..J} theta_j phi_j(s),  phi_0 = 1,  phi_j = sqrt(2) cos(pi j s).
namespace tmaxbayes::bsar {

double basis_function(std::size_t j, double s);

/// A(x) with A_jk(x) = int_0^x phi_j phi_k, closed form, (J+1) x (J+1).
Eigen::MatrixXd cross_integrals(std::size_t order, double x);
/// Abar_jk = int_0^1 A_jk(x) dx.
Eigen::MatrixXd mean_cross_integrals(std::size_t order);

/// Basis quantities cached at the observation times.
class BasisSet {
 public:
  BasisSet(std::size_t order, std::vector<double> times);

  std::size_t order() const noexcept { return order_; }
  std::size_t num_coefficients() const noexcept { return order_ + 1; }
  std::size_t size() const noexcept { return times_.size(); }
  const std::vector<double>& times() const noexcept { return times_; }

  /// phi_j(t_i), rows = times.
  const Eigen::MatrixXd& phi() const noexcept { return phi_; }
  const Eigen::MatrixXd& a(std::size_t i) const { return a_.at(i); }
  const Eigen::MatrixXd& a_bar() const noexcept { return a_bar_; }

  /// theta' (A(t_i) - Abar) theta for every cached time.
  Eigen::VectorXd centered_quadratic(std::span<const double> theta) const;

 private:
  std::size_t order_;
  std::vector<double> times_;
  Eigen::MatrixXd phi_;
  std::vector<Eigen::MatrixXd> a_;
  Eigen::MatrixXd a_bar_;
  // Row i: upper triangle of A(t_i) - Abar, off-diagonal entries doubled.
  Eigen::MatrixXd packed_;
};

struct State {
  double beta0 = 0.0;
  double beta1 = 0.0;
  double sigma = 1.0;
  double gamma = 1.0;
  double psi = 1.0;
  std::vector<double> theta;

  bool in_support() const noexcept;
};

struct Priors {
  double coef_sd = 100.0;     // beta0, beta1 ~ N(0, coef_sd^2)
  double sigma_scale = 5.0;   // half-normal
  double gamma_scale = 2.0;   // half-normal
  double psi_rate = 0.5;      // exponential
  // theta_j ~ N(0, exp(-j psi))

  void validate() const;
};

/// f at every cached time.
std::vector<double> eval_f(const State& state, const BasisSet& basis);
/// f at an arbitrary x in [0, 1].
double eval_f(const State& state, double x);

double log_likelihood(const State& state, const NormalizedSeries& data, const BasisSet& basis);
double log_prior(const State& state, const Priors& priors);
double log_posterior(const State& state, const NormalizedSeries& data, const BasisSet& basis,
                     const Priors& priors);

/// Parameter names in draw order: beta0, beta1, sigma, gamma, psi, theta[0..J].
std::vector<std::string> parameter_names(std::size_t order);
State state_from(std::span<const double> row);
std::vector<double> to_vector(const State& state);
std::vector<State> extract_states(const PosteriorDraws& draws);

struct FitOptions {
  std::size_t order = 20;
  Priors priors;
};

struct Fit {
  PosteriorDraws draws;
  State point_estimate;
};

Fit fit(const NormalizedSeries& series, const McmcConfig& config, const FitOptions& options = {});

enum class Band { Trend, Predictive };

/// Posterior mean curve with a pointwise band; `Predictive` adds observation noise.
FittedSeries predict(const PosteriorDraws& draws, const NormalizedSeries& series,
                     const BasisSet& basis, Band band = Band::Trend, std::uint64_t seed = 0,
                     std::size_t noise_samples_per_draw = 10);

/// Entry (s, i) = log N(y_i; beta0 + beta1 x_i + f(t_i), sigma) under draw s.
Eigen::MatrixXd pointwise_loglik(const PosteriorDraws& draws, const NormalizedSeries& series,
                                 const BasisSet& basis);
std::vector<double> pointwise_loglik(const State& state, const NormalizedSeries& series,
                                     const BasisSet& basis);

/// Log-likelihood per observation at the posterior mean of the regression
/// level beta0 + beta1 x_i + f(t_i) and of log sigma; the DIC plug-in point.
std::vector<double> plug_in_loglik(const PosteriorDraws& draws, const NormalizedSeries& series,
                                   const BasisSet& basis);

}  // namespace tmaxbayes::bsar
