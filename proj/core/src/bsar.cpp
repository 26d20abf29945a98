#include "tmaxbayes/bsar.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tmaxbayes/errors.hpp"
#include "tmaxbayes/stats.hpp"

namespace tmaxbayes::bsar {
namespace {

using std::numbers::pi;
using std::numbers::sqrt2;

constexpr std::size_t kFixed = 5;  // beta0, beta1, sigma, gamma, psi
constexpr std::size_t kThetaBlock = 5;

/// sin(pi m x) / (pi m), with the m = 0 limit x.
double sinc_integral(long m, double x) {
  if (m == 0) return x;
  const double a = pi * static_cast<double>(m);
  return std::sin(a * x) / a;
}

/// int_0^1 sin(pi m x) / (pi m) dx.
double sinc_integral_mean(long m) {
  if (m == 0) return 0.5;
  const double a = pi * static_cast<double>(m);
  return (m % 2 == 0 ? 0.0 : 2.0) / (a * a);
}

double quadratic(const Eigen::MatrixXd& m, std::span<const double> theta) {
  const Eigen::Map<const Eigen::VectorXd> t(theta.data(), static_cast<Eigen::Index>(theta.size()));
  return t.dot(m * t);
}

}  // namespace

double basis_function(std::size_t j, double s) {
  return j == 0 ? 1.0 : sqrt2 * std::cos(pi * static_cast<double>(j) * s);
}

Eigen::MatrixXd cross_integrals(std::size_t order, double x) {
  const auto n = static_cast<Eigen::Index>(order + 1);
  Eigen::MatrixXd a(n, n);
  a(0, 0) = x;
  for (Eigen::Index k = 1; k < n; ++k) {
    a(0, k) = a(k, 0) = sqrt2 * sinc_integral(k, x);
  }
  for (Eigen::Index j = 1; j < n; ++j) {
    for (Eigen::Index k = j; k < n; ++k) {
      const double v = sinc_integral(k - j, x) + sinc_integral(j + k, x);
      a(j, k) = a(k, j) = v;
    }
  }
  return a;
}

Eigen::MatrixXd mean_cross_integrals(std::size_t order) {
  const auto n = static_cast<Eigen::Index>(order + 1);
  Eigen::MatrixXd a(n, n);
  a(0, 0) = 0.5;
  for (Eigen::Index k = 1; k < n; ++k) a(0, k) = a(k, 0) = sqrt2 * sinc_integral_mean(k);
  for (Eigen::Index j = 1; j < n; ++j) {
    for (Eigen::Index k = j; k < n; ++k) {
      a(j, k) = a(k, j) = sinc_integral_mean(k - j) + sinc_integral_mean(j + k);
    }
  }
  return a;
}

BasisSet::BasisSet(std::size_t order, std::vector<double> times)
    : order_(order), times_(std::move(times)) {
  if (order < 1) throw ValidationError("basis order J must be at least 1");
  for (double t : times_) {
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("basis times must lie in [0, 1]");
  }
  const auto n = static_cast<Eigen::Index>(times_.size());
  const auto p = static_cast<Eigen::Index>(order + 1);
  a_bar_ = mean_cross_integrals(order);
  phi_.resize(n, p);
  packed_.resize(n, p * (p + 1) / 2);
  a_.reserve(times_.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = times_[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < p; ++j) phi_(i, j) = basis_function(static_cast<std::size_t>(j), t);
    a_.push_back(cross_integrals(order, t));
    const Eigen::MatrixXd centered = a_.back() - a_bar_;
    Eigen::Index idx = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
      for (Eigen::Index k = j; k < p; ++k) packed_(i, idx++) = (j == k ? 1.0 : 2.0) * centered(j, k);
    }
  }
}

Eigen::VectorXd BasisSet::centered_quadratic(std::span<const double> theta) const {
  const auto p = static_cast<Eigen::Index>(num_coefficients());
  if (static_cast<Eigen::Index>(theta.size()) != p) throw ShapeError("theta length does not match basis order");
  Eigen::VectorXd outer(p * (p + 1) / 2);
  Eigen::Index idx = 0;
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = j; k < p; ++k) outer(idx++) = theta[static_cast<std::size_t>(j)] * theta[static_cast<std::size_t>(k)];
  }
  return packed_ * outer;
}

bool State::in_support() const noexcept {
  if (!(sigma > 0.0 && gamma > 0.0 && psi > 0.0)) return false;
  if (!std::isfinite(beta0) || !std::isfinite(beta1) || !std::isfinite(sigma) ||
      !std::isfinite(gamma) || !std::isfinite(psi)) {
    return false;
  }
  return std::all_of(theta.begin(), theta.end(), [](double v) { return std::isfinite(v); });
}

void Priors::validate() const {
  if (!(coef_sd > 0.0 && sigma_scale > 0.0 && gamma_scale > 0.0 && psi_rate > 0.0)) {
    throw ValidationError("BSAR prior scales must be positive");
  }
}

std::vector<double> eval_f(const State& state, const BasisSet& basis) {
  const Eigen::VectorXd q = basis.centered_quadratic(state.theta);
  const double g2 = state.gamma * state.gamma;
  std::vector<double> out(static_cast<std::size_t>(q.size()));
  for (Eigen::Index i = 0; i < q.size(); ++i) out[static_cast<std::size_t>(i)] = g2 * q(i);
  return out;
}

double eval_f(const State& state, double x) {
  if (state.theta.empty()) throw ShapeError("state has no spectral coefficients");
  const std::size_t order = state.theta.size() - 1;
  const Eigen::MatrixXd centered = cross_integrals(order, x) - mean_cross_integrals(order);
  return state.gamma * state.gamma * quadratic(centered, state.theta);
}

double log_likelihood(const State& state, const NormalizedSeries& data, const BasisSet& basis) {
  if (basis.size() != data.size() || data.x_std.size() != data.size()) {
    throw ShapeError("basis grid does not match the series");
  }
  if (!state.in_support()) return kNegInf;
  const Eigen::VectorXd q = basis.centered_quadratic(state.theta);
  const double g2 = state.gamma * state.gamma;
  const double inv_sigma = 1.0 / state.sigma;
  double ss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double r = (data.y[i] - state.beta0 - state.beta1 * data.x_std[i] -
                      g2 * q(static_cast<Eigen::Index>(i))) * inv_sigma;
    ss += r * r;
  }
  const double n = static_cast<double>(data.size());
  return -0.5 * ss - n * (std::log(state.sigma) + kLogSqrt2Pi);
}

namespace {

double log_theta_prior(const State& state) {
  double lp = 0.0;
  for (std::size_t j = 0; j < state.theta.size(); ++j) {
    const double log_var = -static_cast<double>(j) * state.psi;
    const double t = state.theta[j];
    lp += -0.5 * t * t * std::exp(-log_var) - 0.5 * log_var - kLogSqrt2Pi;
  }
  return lp;
}

}  // namespace

double log_prior(const State& state, const Priors& priors) {
  if (!state.in_support()) return kNegInf;
  return log_normal_pdf(state.beta0, 0.0, priors.coef_sd) +
         log_normal_pdf(state.beta1, 0.0, priors.coef_sd) +
         log_half_normal_pdf(state.sigma, priors.sigma_scale) +
         log_half_normal_pdf(state.gamma, priors.gamma_scale) +
         log_exponential_pdf(state.psi, priors.psi_rate) + log_theta_prior(state);
}

double log_posterior(const State& state, const NormalizedSeries& data, const BasisSet& basis,
                     const Priors& priors) {
  const double lp = log_prior(state, priors);
  if (!std::isfinite(lp)) return kNegInf;
  return lp + log_likelihood(state, data, basis);
}

std::vector<std::string> parameter_names(std::size_t order) {
  std::vector<std::string> names = {"beta0", "beta1", "sigma", "gamma", "psi"};
  for (std::size_t j = 0; j <= order; ++j) names.push_back("theta[" + std::to_string(j) + "]");
  return names;
}

State state_from(std::span<const double> row) {
  if (row.size() < kFixed + 2) throw ShapeError("BSAR draw row is too short");
  State s{row[0], row[1], row[2], row[3], row[4], {}};
  s.theta.assign(row.begin() + kFixed, row.end());
  return s;
}

std::vector<double> to_vector(const State& state) {
  std::vector<double> v = {state.beta0, state.beta1, state.sigma, state.gamma, state.psi};
  v.insert(v.end(), state.theta.begin(), state.theta.end());
  return v;
}

std::vector<State> extract_states(const PosteriorDraws& draws) {
  if (draws.num_params() < kFixed + 2 || draws.names[0] != "beta0") {
    throw ShapeError("draws are not BSAR draws");
  }
  std::vector<State> out;
  out.reserve(draws.total_draws());
  std::vector<double> row(draws.num_params());
  for (const auto& c : draws.chains) {
    for (Eigen::Index r = 0; r < c.rows(); ++r) {
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = c(r, static_cast<Eigen::Index>(j));
      out.push_back(state_from(row));
    }
  }
  return out;
}

Fit fit(const NormalizedSeries& series, const McmcConfig& config, const FitOptions& options) {
  if (series.size() < 5) throw ValidationError("BSAR fit needs at least 5 observations");
  options.priors.validate();
  const BasisSet basis(options.order, series.t);
  const std::size_t p = options.order + 1;
  const std::size_t n = series.size();
  const Priors priors = options.priors;

  // Sampler coordinates hold eta_j = theta_j exp(j psi / 2) in place of theta_j,
  // so eta has a standard normal prior whatever psi is. (beta0, beta1) are
  // integrated out of the Metropolis target and drawn from their Gaussian
  // conditional after every sweep.
  TargetDensity target;
  target.names = {"beta0", "beta1", "sigma", "gamma", "psi"};
  for (std::size_t j = 0; j < p; ++j) target.names.push_back("eta[" + std::to_string(j) + "]");
  target.transforms.assign(target.names.size(), Transform::Identity);
  target.transforms[2] = target.transforms[3] = target.transforms[4] = Transform::Log;
  target.blocks = {{2}, {3}, {4}};
  target.block_names = {"sigma", "gamma", "psi"};
  // eta_0 alone carries the constant part of Z, i.e. the linear part of f.
  target.blocks.push_back({kFixed});
  target.block_names.push_back("eta[0]");
  for (std::size_t start = 1; start < p; start += kThetaBlock) {
    std::vector<std::size_t> block;
    for (std::size_t j = start; j < std::min(p, start + kThetaBlock); ++j) block.push_back(kFixed + j);
    target.blocks.push_back(std::move(block));
    target.block_names.push_back("eta[" + std::to_string(start) + ".." +
                                 std::to_string(std::min(p, start + kThetaBlock) - 1) + "]");
  }

  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    design(static_cast<Eigen::Index>(i), 0) = 1.0;
    design(static_cast<Eigen::Index>(i), 1) = series.x_std[i];
  }
  const Eigen::Matrix2d gram = design.transpose() * design;
  const Eigen::Map<const Eigen::VectorXd> y(series.y.data(), static_cast<Eigen::Index>(n));
  const double prior_prec = 1.0 / (priors.coef_sd * priors.coef_sd);

  struct Conditional {
    Eigen::Matrix2d precision;
    Eigen::Vector2d shift;  // X' r / sigma^2
    double rss = 0.0;       // r' r
  };
  const auto conditional = [&, prior_prec](std::span<const double> x) {
    Eigen::VectorXd theta(static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) {
      theta(static_cast<Eigen::Index>(j)) = x[kFixed + j] * std::exp(-0.5 * static_cast<double>(j) * x[4]);
    }
    const Eigen::VectorXd r =
        y - x[3] * x[3] * basis.centered_quadratic(std::span<const double>(theta.data(), p));
    const double inv_var = 1.0 / (x[2] * x[2]);
    Conditional c;
    c.precision = gram * inv_var + prior_prec * Eigen::Matrix2d::Identity();
    c.shift = design.transpose() * r * inv_var;
    c.rss = r.squaredNorm();
    return c;
  };

  const auto density = [&, prior_prec](std::span<const double> x) {
    const double sigma = x[2], gamma = x[3], psi = x[4];
    if (!(sigma > 0.0 && gamma > 0.0 && psi > 0.0)) return kNegInf;
    double lp = log_half_normal_pdf(sigma, priors.sigma_scale) +
                log_half_normal_pdf(gamma, priors.gamma_scale) +
                log_exponential_pdf(psi, priors.psi_rate);
    for (std::size_t j = 0; j < p; ++j) lp += log_normal_pdf(x[kFixed + j], 0.0, 1.0);
    const Conditional c = conditional(x);
    const Eigen::LLT<Eigen::Matrix2d> llt(c.precision);
    const double log_det = 2.0 * std::log(llt.matrixL()(0, 0) * llt.matrixL()(1, 1));
    const double quad = c.shift.dot(llt.solve(c.shift));
    const double nn = static_cast<double>(n);
    lp += -nn * (std::log(sigma) + kLogSqrt2Pi) - 0.5 * c.rss / (sigma * sigma) + 0.5 * quad -
          0.5 * log_det + std::log(prior_prec);
    return std::isfinite(lp) ? lp : kNegInf;
  };
  target.log_density = density;

  target.gibbs_steps.push_back({"beta", {0, 1}, [conditional](std::span<double> x, std::mt19937_64& rng) {
    const Conditional c = conditional(x);
    const Eigen::LLT<Eigen::Matrix2d> llt(c.precision);
    std::normal_distribution<double> z;
    const Eigen::Vector2d draw = llt.solve(c.shift) + llt.matrixU().solve(Eigen::Vector2d(z(rng), z(rng)));
    x[0] = draw(0);
    x[1] = draw(1);
  }});

  // f depends on gamma^2 theta theta' only: walk the (gamma k, eta / k) ridge.
  target.joint_moves.push_back({"gamma+eta", [density, p](std::span<double> x, double step) {
    const double lp0 = density(x);
    x[3] *= std::exp(step);
    for (std::size_t j = 0; j < p; ++j) x[kFixed + j] *= std::exp(-step);
    const double lp1 = density(x);
    if (!std::isfinite(lp0) || !std::isfinite(lp1)) return kNegInf;
    return lp1 - lp0 + step * (1.0 - static_cast<double>(p));
  }});
  // Move psi while holding theta fixed.
  target.joint_moves.push_back({"psi|theta", [density, p](std::span<double> x, double step) {
    const double lp0 = density(x);
    const double psi_new = x[4] * std::exp(step);
    const double d = psi_new - x[4];
    double log_jac = step;
    for (std::size_t j = 0; j < p; ++j) {
      const double grow = 0.5 * static_cast<double>(j) * d;
      x[kFixed + j] *= std::exp(grow);
      log_jac += grow;
    }
    x[4] = psi_new;
    const double lp1 = density(x);
    if (!std::isfinite(lp0) || !std::isfinite(lp1)) return kNegInf;
    return lp1 - lp0 + log_jac;
  }});

  // Least-squares start for the linear part, flat-ish trend.
  std::vector<double> init(kFixed + p, 0.0);
  const double x_var = sample_variance(series.x_std);
  init[0] = mean(series.y);
  double cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) cov += series.x_std[i] * (series.y[i] - init[0]);
  init[1] = cov / static_cast<double>(n - 1) / x_var;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = series.y[i] - init[0] - init[1] * series.x_std[i];
    rss += r * r;
  }
  init[2] = std::max(std::sqrt(rss / static_cast<double>(n - 2)), 1e-3);
  init[3] = 0.5;
  init[4] = 1.0;
  init[kFixed] = 0.5;

  const PosteriorDraws raw = run_chains(target, init, config);

  Fit result;
  PosteriorDraws& out = result.draws;
  out = raw;
  out.names = parameter_names(options.order);
  for (auto& chain : out.chains) {
    for (Eigen::Index r = 0; r < chain.rows(); ++r) {
      const double psi = chain(r, 4);
      // f is even in theta; report the representative with theta_0 >= 0.
      const double sign = chain(r, kFixed) < 0.0 ? -1.0 : 1.0;
      for (std::size_t j = 0; j < p; ++j) {
        chain(r, static_cast<Eigen::Index>(kFixed + j)) *= sign * std::exp(-0.5 * static_cast<double>(j) * psi);
      }
    }
  }
  result.point_estimate = state_from(out.unconstrained_mean());
  return result;
}

FittedSeries predict(const PosteriorDraws& draws, const NormalizedSeries& series,
                     const BasisSet& basis, Band band, std::uint64_t seed,
                     std::size_t noise_samples_per_draw) {
  const auto states = extract_states(draws);
  if (states.empty()) throw ValidationError("prediction needs at least one draw");
  const std::size_t n = series.size();
  const std::size_t per = band == Band::Predictive ? std::max<std::size_t>(1, noise_samples_per_draw) : 1;

  std::vector<std::vector<double>> samples(n);
  for (auto& s : samples) s.reserve(states.size() * per);
  std::vector<double> mean_curve(n, 0.0);
  Rng rng(stream_seed(seed, kBsarPredictStream));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (const auto& s : states) {
    const auto f = eval_f(s, basis);
    for (std::size_t i = 0; i < n; ++i) {
      const double curve = s.beta0 + s.beta1 * series.x_std[i] + f[i];
      mean_curve[i] += curve;
      if (band == Band::Trend) {
        samples[i].push_back(curve);
      } else {
        for (std::size_t k = 0; k < per; ++k) samples[i].push_back(curve + s.sigma * noise(rng));
      }
    }
  }

  FittedSeries out;
  out.years = series.years;
  out.observed = series.y;
  out.mean.resize(n);
  out.lo95.resize(n);
  out.hi95.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.mean[i] = mean_curve[i] / static_cast<double>(states.size());
    std::sort(samples[i].begin(), samples[i].end());
    out.lo95[i] = std::min(quantile_sorted(samples[i], 0.025), out.mean[i]);
    out.hi95[i] = std::max(quantile_sorted(samples[i], 0.975), out.mean[i]);
  }
  return out;
}

std::vector<double> pointwise_loglik(const State& state, const NormalizedSeries& series,
                                     const BasisSet& basis) {
  if (basis.size() != series.size()) throw ShapeError("basis grid does not match the series");
  const auto f = eval_f(state, basis);
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    out[i] = log_normal_pdf(series.y[i], state.beta0 + state.beta1 * series.x_std[i] + f[i], state.sigma);
  }
  return out;
}

Eigen::MatrixXd pointwise_loglik(const PosteriorDraws& draws, const NormalizedSeries& series,
                                 const BasisSet& basis) {
  const auto states = extract_states(draws);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(states.size()), static_cast<Eigen::Index>(series.size()));
  for (std::size_t s = 0; s < states.size(); ++s) {
    const auto row = pointwise_loglik(states[s], series, basis);
    for (std::size_t i = 0; i < row.size(); ++i) out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)) = row[i];
  }
  return out;
}

std::vector<double> plug_in_loglik(const PosteriorDraws& draws, const NormalizedSeries& series,
                                   const BasisSet& basis) {
  const auto states = extract_states(draws);
  if (states.empty()) throw ValidationError("plug-in log-likelihood needs at least one draw");
  if (basis.size() != series.size()) throw ShapeError("basis grid does not match the series");
  std::vector<double> level(series.size(), 0.0);
  double log_sigma = 0.0;
  for (const auto& st : states) {
    const auto f = eval_f(st, basis);
    for (std::size_t i = 0; i < series.size(); ++i) level[i] += st.beta0 + st.beta1 * series.x_std[i] + f[i];
    log_sigma += std::log(st.sigma);
  }
  const double n = static_cast<double>(states.size());
  const double sigma = std::exp(log_sigma / n);
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) out[i] = log_normal_pdf(series.y[i], level[i] / n, sigma);
  return out;
}

}  // namespace tmaxbayes::bsar
