#include "oracles.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <unistd.h>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace tmaxbayes::testing {

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 12, tol);
}

double integrate_panels(const std::function<double(double)>& f, double a, double b, std::size_t panels) {
  const double h = (b - a) / static_cast<double>(panels);
  double s = 0.0;
  for (std::size_t i = 0; i < panels; ++i) {
    const double lo = a + h * static_cast<double>(i);
    s += boost::math::quadrature::gauss<double, 20>::integrate(f, lo, lo + h);
  }
  return s;
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return out;
}

double cross_integral_quadrature(std::size_t j, std::size_t k, double x) {
  if (x == 0.0) return 0.0;
  auto phi = [](std::size_t m, double s) {
    return m == 0 ? 1.0 : std::numbers::sqrt2 * std::cos(std::numbers::pi * static_cast<double>(m) * s);
  };
  return integrate_panels([&](double s) { return phi(j, s) * phi(k, s); }, 0.0, x, 64);
}

double increment_density_quadrature(double d, const ctrw::Params& p) {
  auto integrand = [&](double w) {
    if (!(w > 0.0)) return 0.0;
    const double z = (d / w - p.mu) / p.tau;
    const double log_g = p.alpha * std::log(p.beta) - std::lgamma(p.alpha) + (p.alpha - 1.0) * std::log(w) - p.beta * w;
    return std::exp(-0.5 * z * z - std::log(w * p.tau) - 0.5 * std::log(2.0 * std::numbers::pi) + log_g);
  };
  // Split where the gamma mass sits so the adaptive rule sees the peak.
  const double mode = std::max(p.alpha - 1.0, 0.0) / p.beta;
  const double knot = std::max(mode, 1.0 / p.beta);
  return integrate(integrand, 0.0, knot, 1e-12) +
         integrate(integrand, knot, std::numeric_limits<double>::infinity(), 1e-12);
}

std::vector<double> increment_density_monte_carlo(const std::vector<double>& points,
                                                  const ctrw::Params& p, std::size_t samples,
                                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const bool shifted = p.alpha > 1.5;
  const double shape_q = shifted ? p.alpha - 1.0 : p.alpha;
  const boost::math::gamma_distribution<double> wait(shape_q, 1.0 / p.beta);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Gamma(a, b) / Gamma(a - 1, b) = w * b / (a - 1).
  const double weight_scale = shifted ? p.beta / (p.alpha - 1.0) : 1.0;
  std::vector<double> sum(points.size(), 0.0);
  const double norm = 1.0 / (p.tau * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t s = 0; s < samples; ++s) {
    // One uniform per stratum of width 1 / samples.
    const double u = (static_cast<double>(s) + unit(rng)) / static_cast<double>(samples);
    const double w = boost::math::quantile(wait, u);
    const double weight = shifted ? w * weight_scale : 1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double z = (points[i] / w - p.mu) / p.tau;
      sum[i] += weight * norm * std::exp(-0.5 * z * z) / w;
    }
  }
  for (double& v : sum) v /= static_cast<double>(samples);
  return sum;
}

HistogramEstimate increment_density_histogram(const std::vector<double>& points, double half_width,
                                              const ctrw::Params& p, std::size_t samples,
                                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jump(p.mu, p.tau);
  std::gamma_distribution<double> wait(p.alpha, 1.0 / p.beta);
  std::vector<std::size_t> counts(points.size(), 0);
  for (std::size_t s = 0; s < samples; ++s) {
    const double d = jump(rng) * wait(rng);
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (d >= points[i] - half_width && d < points[i] + half_width) ++counts[i];
    }
  }
  HistogramEstimate out;
  const double n = static_cast<double>(samples);
  for (std::size_t c : counts) {
    const double frac = static_cast<double>(c) / n;
    out.density.push_back(frac / (2.0 * half_width));
    out.se.push_back(std::sqrt(frac * (1.0 - frac) / n) / (2.0 * half_width));
  }
  return out;
}

Eigen::MatrixXd two_pass_correlation(const std::vector<std::vector<double>>& columns) {
  const std::size_t m = columns.size();
  const std::size_t n = columns.front().size();
  std::vector<double> means(m, 0.0);
  for (std::size_t c = 0; c < m; ++c) {
    for (double v : columns[c]) means[c] += v;
    means[c] /= static_cast<double>(n);
  }
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (columns[a][i] - means[a]) * (columns[b][i] - means[b]);
      cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = s / static_cast<double>(n - 1);
    }
  }
  Eigen::MatrixXd cor = cov;
  for (Eigen::Index a = 0; a < cov.rows(); ++a) {
    for (Eigen::Index b = 0; b < cov.cols(); ++b) cor(a, b) = cov(a, b) / std::sqrt(cov(a, a) * cov(b, b));
  }
  return cor;
}

namespace {

struct NormalPosterior {
  double mean;
  double var;
};

NormalPosterior posterior(const std::vector<double>& y, double prior_sd, std::size_t skip) {
  double precision = 1.0 / (prior_sd * prior_sd);
  double shift = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (i == skip) continue;
    precision += 1.0;
    shift += y[i];
  }
  return {shift / precision, 1.0 / precision};
}

double log_normal(double x, double m, double var) {
  return -0.5 * (x - m) * (x - m) / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
}

}  // namespace

double ConjugateNormal::exact_loo_elpd() const {
  double elpd = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto post = posterior(y, prior_sd, i);
    elpd += log_normal(y[i], post.mean, 1.0 + post.var);
  }
  return elpd;
}

Eigen::MatrixXd ConjugateNormal::loglik_matrix(std::size_t draws, std::uint64_t seed) const {
  const auto post = posterior(y, prior_sd, y.size());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> mu(post.mean, std::sqrt(post.var));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(draws), static_cast<Eigen::Index>(y.size()));
  for (Eigen::Index s = 0; s < out.rows(); ++s) {
    const double m = mu(rng);
    for (Eigen::Index i = 0; i < out.cols(); ++i) out(s, i) = log_normal(y[static_cast<std::size_t>(i)], m, 1.0);
  }
  return out;
}

RegressionDraws gaussian_regression_draws(std::size_t n, std::size_t k, std::size_t draws,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    x(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < cols; ++j) x(i, j) = z(rng);
  }
  Eigen::VectorXd b_true = Eigen::VectorXd::LinSpaced(cols, 0.5, 2.0);
  Eigen::VectorXd y = x * b_true;
  for (Eigen::Index i = 0; i < rows; ++i) y(i) += z(rng);

  const Eigen::MatrixXd xtx = x.transpose() * x;
  const Eigen::VectorXd b_hat = xtx.ldlt().solve(x.transpose() * y);
  const Eigen::LLT<Eigen::MatrixXd> llt(xtx.inverse());
  const Eigen::MatrixXd l = llt.matrixL();

  auto loglik_row = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd r = y - x * b;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = log_normal(r(static_cast<Eigen::Index>(i)), 0.0, 1.0);
    return out;
  };

  RegressionDraws out;
  out.loglik.resize(static_cast<Eigen::Index>(draws), rows);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(cols);
  for (std::size_t s = 0; s < draws; ++s) {
    Eigen::VectorXd e(cols);
    for (Eigen::Index j = 0; j < cols; ++j) e(j) = z(rng);
    const Eigen::VectorXd b = b_hat + l * e;
    sum += b;
    const auto row = loglik_row(b);
    for (Eigen::Index i = 0; i < rows; ++i) out.loglik(static_cast<Eigen::Index>(s), i) = row[static_cast<std::size_t>(i)];
  }
  out.loglik_at_mean = loglik_row(sum / static_cast<double>(draws));
  return out;
}

SeasonalTable annual_table(const std::vector<double>& annual, int first_year) {
  std::vector<int> years(annual.size());
  for (std::size_t i = 0; i < years.size(); ++i) years[i] = first_year + static_cast<int>(i);
  return SeasonalTable(years, annual);
}

NormalizedSeries annual_series(const std::vector<double>& annual, int first_year) {
  return normalize(annual_table(annual, first_year));
}

TrendData monotone_trend_data(std::size_t n, std::uint64_t seed, double noise_sd) {
  TrendData out;
  out.series = annual_series(std::vector<double>(n, 0.0));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> eps(0.0, noise_sd);
  out.truth.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = out.series.t[i];
    out.truth[i] = 1.0 + 0.5 * out.series.x_std[i] + 0.8 * (t * t - 1.0 / 3.0);
    out.series.y[i] = out.truth[i] + eps(rng);
  }
  return out;
}

std::filesystem::path scratch_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("tmaxbayes_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace tmaxbayes::testing
