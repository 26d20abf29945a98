#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tmaxbayes {

/// S x M pointwise log-likelihood: entry (s, m) = log p(obs_m | draw_s).
struct LogLikMatrix {
  Eigen::MatrixXd values;
  std::string model;
  std::vector<std::string> observations;
};

struct DicResult {
  double dic = 0.0;
  double p_d = 0.0;
  double d_bar = 0.0;  // posterior mean deviance
  double d_hat = 0.0;  // deviance at the point estimate
};

/// D(theta) = -2 sum_m loglik_m;  p_D = mean_s D(theta_s) - D(theta_bar);  DIC = D(theta_bar) + 2 p_D.
DicResult dic(const Eigen::MatrixXd& loglik, std::span<const double> loglik_at_mean);

struct ParetoFit {
  double k = 0.0;
  double sigma = 0.0;
};

/// Zhang-Stephens posterior-mean estimate of a generalized Pareto fit to
/// ascending, non-negative exceedances, with the weakly informative shrinkage of k
/// towards 0.5 used by PSIS. k is +inf when the fit is undefined.
ParetoFit fit_generalized_pareto(std::span<const double> sorted_exceedances);

struct SmoothedWeights {
  std::vector<double> log_weights;  // unnormalised, same order as the input
  double k = 0.0;
  bool degenerate = false;  // tail could not be fitted; raw ratios kept
};

/// Pareto-smoothed importance weights from raw log ratios.
SmoothedWeights psis_smooth(std::span<const double> log_ratios);

struct LooResult {
  double elpd = 0.0;
  double se = 0.0;
  double looic = 0.0;
  std::vector<double> elpd_i;
  std::vector<double> pareto_k;
  std::vector<bool> k_degenerate;
  std::size_t n_high_k = 0;  // non-degenerate k > 0.7
  bool few_draws = false;    // S < 100
};

inline constexpr double kParetoKThreshold = 0.7;

/// PSIS leave-one-out. Throws InsufficientDrawsError for S < 16.
LooResult psis_loo(const Eigen::MatrixXd& loglik);
inline LooResult psis_loo(const LogLikMatrix& m) { return psis_loo(m.values); }

double rmse(std::span<const double> observed, std::span<const double> fitted);
double mae(std::span<const double> observed, std::span<const double> fitted);

struct ModelEntry {
  LogLikMatrix loglik;
  std::vector<double> loglik_at_mean;
  std::vector<double> observed;
  std::vector<double> fitted;
  std::string fit_description;
};

struct ModelRow {
  std::string model;
  DicResult dic;
  LooResult loo;
  double rmse = 0.0;
  double mae = 0.0;
  std::string fit_description;
  std::size_t n_loglik_obs = 0;
  std::size_t n_level_obs = 0;
};

struct ComparisonReport {
  std::vector<ModelRow> rows;
  std::vector<std::string> notes;
};

/// draw,<observation labels...>; one row per draw.
void write_loglik_csv(std::ostream& out, const LogLikMatrix& m);
LogLikMatrix read_loglik_csv(std::istream& in);
/// observation,loglik
void write_point_loglik_csv(std::ostream& out, std::span<const std::string> observations,
                            std::span<const double> loglik);
std::vector<double> read_point_loglik_csv(std::istream& in);

/// One row per entry, in input order.
ComparisonReport compare(std::span<const ModelEntry> entries);

/// model,dic,p_d,looic,elpd,se_elpd,rmse,mae,n_pareto_k_gt_0.7,fit_description
void write_compare_csv(std::ostream& out, const ComparisonReport& report);
/// model,observation,elpd_i,pareto_k
void write_loo_csv(std::ostream& out, const ComparisonReport& report,
                   std::span<const std::vector<std::string>> observation_labels);

}  // namespace tmaxbayes
