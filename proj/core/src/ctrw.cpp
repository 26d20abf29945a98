#include "tmaxbayes/ctrw.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <boost/math/distributions/gamma.hpp>

#include "tmaxbayes/csv.hpp"
#include "tmaxbayes/errors.hpp"
#include "tmaxbayes/stats.hpp"

namespace tmaxbayes::ctrw {
namespace {

// Sampler coordinates. The scale shared by (mu, tau, 1/w) is not identified by
// the increments, so the chain runs on
//   m = mu / c, s = tau / c, u_i = c * w_i,  c = beta (or alpha when beta = alpha),
// under which the likelihood depends on (m, s, alpha, u) only and c is informed
// by the prior alone. The Jacobian of the map contributes 2 log c.
enum Slot : std::size_t { kM = 0, kS = 1, kAlpha = 2, kBeta = 3 };

struct Model {
  std::vector<double> deltas;
  Priors priors;
  bool fix_mean_wait = false;

  std::size_t first_latent() const { return fix_mean_wait ? 3 : 4; }
  double scale(std::span<const double> x) const { return fix_mean_wait ? x[kAlpha] : x[kBeta]; }

  double prior_part(std::span<const double> x) const {
    const double c = scale(x);
    Params p{x[kM] * c, x[kS] * c, x[kAlpha], c};
    double lp = log_normal_pdf(p.mu, priors.mu.mean, priors.mu.sd) +
                log_half_normal_pdf(p.tau, priors.tau_scale) +
                log_normal_pdf(std::log(p.alpha), priors.log_alpha.mean, priors.log_alpha.sd) -
                std::log(p.alpha);
    if (!fix_mean_wait) {
      lp += log_normal_pdf(std::log(p.beta), priors.log_beta.mean, priors.log_beta.sd) -
            std::log(p.beta);
    }
    return lp + 2.0 * std::log(c);
  }

  double jump_term(double delta, double u, double m, double s) const {
    return log_normal_pdf(delta / u, m, s) - std::log(u);
  }

  double jumps(std::span<const double> x) const {
    const std::size_t base = first_latent();
    double lp = 0.0;
    for (std::size_t i = 0; i < deltas.size(); ++i) lp += jump_term(deltas[i], x[base + i], x[kM], x[kS]);
    return lp;
  }

  double waits(std::span<const double> x) const {
    const std::size_t base = first_latent();
    const double a = x[kAlpha];
    double sum_log = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      sum_log += std::log(x[base + i]);
      sum += x[base + i];
    }
    return -static_cast<double>(deltas.size()) * std::lgamma(a) + (a - 1.0) * sum_log - sum;
  }

  bool in_support(std::span<const double> x) const {
    if (!(x[kS] > 0.0) || !(x[kAlpha] > 0.0) || !(scale(x) > 0.0)) return false;
    return true;
  }

  double full(std::span<const double> x) const {
    if (!in_support(x)) return kNegInf;
    return jumps(x) + waits(x) + prior_part(x);
  }

  double block(std::size_t b, std::span<const double> x) const {
    if (!in_support(x)) return kNegInf;
    const std::size_t base = first_latent();
    if (b >= base) {
      const std::size_t i = b - base;
      const double u = x[base + i];
      if (!(u > 0.0)) return kNegInf;
      return jump_term(deltas[i], u, x[kM], x[kS]) + log_gamma_pdf(u, x[kAlpha], 1.0);
    }
    switch (b) {
      case kM:
      case kS: return jumps(x) + prior_part(x);
      case kAlpha: return waits(x) + prior_part(x);
      default: return prior_part(x);
    }
  }
};

// Wilson-Hilferty coordinates: u = a * g^3 with g = 1 - 1/(9a) + z / (3 sqrt(a))
// makes z roughly standard normal when u ~ Gamma(a, 1).
double wh_offset(double a) { return 1.0 - 1.0 / (9.0 * a); }
double wh_slope(double a) { return 1.0 / (3.0 * std::sqrt(a)); }

// Moves alpha by exp(step), carries every u_i along at fixed z_i and rescales
// (m, s) by the inverse ratio so the mean increment m * alpha stays put.
double alpha_latent_move(const Model& model, std::span<double> x, double step) {
  const double current = model.full(x);
  if (!std::isfinite(current)) return kNegInf;
  const double a = x[kAlpha];
  const double a_new = a * std::exp(step);
  const double c0 = wh_offset(a), k0 = wh_slope(a);
  const double c1 = wh_offset(a_new), k1 = wh_slope(a_new);
  const std::size_t base = model.first_latent();
  double log_jac = std::log(a_new) - std::log(a) + 0.5 * static_cast<double>(model.deltas.size()) *
                                                        (std::log(a_new) - std::log(a));
  for (std::size_t i = 0; i < model.deltas.size(); ++i) {
    const double g0 = std::cbrt(x[base + i] / a);
    const double g1 = c1 + (g0 - c0) * k1 / k0;
    if (!(g1 > 0.0)) return kNegInf;
    x[base + i] = a_new * g1 * g1 * g1;
    log_jac += 2.0 * (std::log(g1) - std::log(g0));
  }
  x[kAlpha] = a_new;
  x[kM] *= a / a_new;
  x[kS] *= a / a_new;
  log_jac += 2.0 * (std::log(a) - std::log(a_new));
  const double proposed = model.full(x);
  if (!std::isfinite(proposed)) return kNegInf;
  return proposed - current + log_jac;
}

Params to_params(std::span<const double> x, bool fix_mean_wait) {
  const double c = fix_mean_wait ? x[kAlpha] : x[kBeta];
  return {x[kM] * c, x[kS] * c, x[kAlpha], c};
}

}  // namespace

bool Params::in_support() const noexcept {
  return std::isfinite(mu) && std::isfinite(tau) && std::isfinite(alpha) && std::isfinite(beta) &&
         tau > 0.0 && alpha > 0.0 && beta > 0.0;
}

void Priors::validate() const {
  if (!(mu.sd > 0.0 && tau_scale > 0.0 && log_alpha.sd > 0.0 && log_beta.sd > 0.0)) {
    throw ValidationError("CTRW prior scales must be positive");
  }
}

double log_prior(const Params& p, const Priors& priors) {
  if (!p.in_support()) return kNegInf;
  return log_normal_pdf(p.mu, priors.mu.mean, priors.mu.sd) +
         log_half_normal_pdf(p.tau, priors.tau_scale) +
         log_normal_pdf(std::log(p.alpha), priors.log_alpha.mean, priors.log_alpha.sd) -
         std::log(p.alpha) +
         log_normal_pdf(std::log(p.beta), priors.log_beta.mean, priors.log_beta.sd) -
         std::log(p.beta);
}

double log_likelihood_augmented(const Params& p, std::span<const double> w,
                                std::span<const double> deltas) {
  if (w.size() != deltas.size()) throw ShapeError("latent waits and increments differ in length");
  if (!p.in_support()) return kNegInf;
  double lp = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] > 0.0)) return kNegInf;
    lp += log_normal_pdf(deltas[i] / w[i], p.mu, p.tau) - std::log(w[i]) +
          log_gamma_pdf(w[i], p.alpha, p.beta);
  }
  return lp;
}

double log_joint(const Params& p, const Latents& latents, const IncrementSeries& deltas,
                 const Priors& priors) {
  const double ll = log_likelihood_augmented(p, latents.w, deltas.deltas);
  if (!std::isfinite(ll)) return kNegInf;
  return ll + log_prior(p, priors);
}

void QuadratureRule::validate() const {
  if (nodes < 3 || nodes % 2 == 0) throw ValidationError("quadrature node count must be odd and >= 3");
  if (!(tail > 0.0 && tail < 0.5)) throw ValidationError("quadrature tail must lie in (0, 0.5)");
}

MarginalIncrementDensity::MarginalIncrementDensity(const Params& p, const QuadratureRule& rule)
    : mu_(p.mu), tau_(p.tau) {
  rule.validate();
  if (!p.in_support()) throw QuadratureError("CTRW parameters outside support");

  double lo = 0.0, hi = 0.0;
  try {
    const boost::math::gamma_distribution<double> waits(p.alpha, 1.0 / p.beta);
    lo = boost::math::quantile(waits, rule.tail);
    hi = boost::math::quantile(boost::math::complement(waits, rule.tail));
  } catch (const std::exception& e) {
    throw QuadratureError(std::string("gamma quantile bracket failed: ") + e.what());
  }
  if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi)) {
    throw QuadratureError("degenerate gamma quantile bracket");
  }

  // Substituting v = log w turns (1/w) N(d/w) G(w) dw into N(d/w) G(w) dv.
  const std::size_t n = rule.nodes;
  const double v0 = std::log(lo);
  const double h = (std::log(hi) - v0) / static_cast<double>(n - 1);
  const double log_h3 = std::log(h / 3.0);
  inv_w_.resize(n);
  log_weight_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double v = v0 + h * static_cast<double>(k);
    const double w = std::exp(v);
    const double simpson = (k == 0 || k == n - 1) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    inv_w_[k] = 1.0 / w;
    log_weight_[k] = log_h3 + std::log(simpson) + log_gamma_pdf(w, p.alpha, p.beta) -
                     std::log(tau_) - kLogSqrt2Pi;
  }
}

double MarginalIncrementDensity::log_pdf(double delta) const {
  // Streaming log-sum-exp.
  double m = kNegInf;
  double acc = 0.0;
  for (std::size_t k = 0; k < inv_w_.size(); ++k) {
    const double z = (delta * inv_w_[k] - mu_) / tau_;
    const double t = log_weight_[k] - 0.5 * z * z;
    if (t > m) {
      acc = acc * std::exp(m - t) + 1.0;
      m = t;
    } else {
      acc += std::exp(t - m);
    }
  }
  const double out = m + std::log(acc);
  if (!std::isfinite(out)) throw QuadratureError("marginal increment density underflowed");
  return out;
}

double marginal_increment_logpdf(double delta, const Params& p, const QuadratureRule& rule) {
  return MarginalIncrementDensity(p, rule).log_pdf(delta);
}

std::vector<double> simulate(const Params& p, double t0, std::size_t n, std::uint64_t seed) {
  if (n < 2) throw ValidationError("simulate needs n >= 2");
  if (!p.in_support()) throw ValidationError("CTRW parameters outside support");
  Rng rng(stream_seed(seed, kSimulateStream));
  std::normal_distribution<double> jump(p.mu, p.tau);
  std::gamma_distribution<double> wait(p.alpha, 1.0 / p.beta);
  std::vector<double> out;
  out.reserve(n);
  out.push_back(t0);
  for (std::size_t i = 1; i < n; ++i) {
    const double delta = jump(rng);
    const double w = wait(rng);
    out.push_back(out.back() + delta * w);
  }
  return out;
}

Fit fit(const NormalizedSeries& series, const McmcConfig& config, const FitOptions& options) {
  if (series.size() < 3) throw ValidationError("CTRW fit needs at least 3 observations");
  options.priors.validate();
  const auto inc = increments(series);
  const std::size_t n = inc.size();

  Model model{inc.deltas, options.priors, options.fix_mean_wait};
  const std::size_t base = model.first_latent();

  TargetDensity target;
  target.names = {"m", "s", "alpha"};
  target.transforms = {Transform::Identity, Transform::Log, Transform::Log};
  if (!options.fix_mean_wait) {
    target.names.push_back("beta");
    target.transforms.push_back(Transform::Log);
  }
  for (std::size_t i = 0; i < n; ++i) {
    target.names.push_back("u[" + std::to_string(inc.years[i]) + "]");
    target.transforms.push_back(Transform::Log);
  }
  for (std::size_t j = 0; j < target.names.size(); ++j) target.blocks.push_back({j});
  target.log_density = [&model](std::span<const double> x) { return model.full(x); };
  target.block_log_density = [&model](std::size_t b, std::span<const double> x) {
    return model.block(b, x);
  };
  target.joint_moves.push_back({"alpha+u", [&model](std::span<double> x, double step) {
                                  return alpha_latent_move(model, x, step);
                                }});

  // Start at alpha = beta = 1 and w_i = 1, with (mu, tau) from the raw increments.
  std::vector<double> init(target.dim(), 1.0);
  const double inc_mean = mean(inc.deltas);
  const double inc_sd = std::sqrt(sample_variance(inc.deltas));
  init[kM] = inc_mean;
  init[kS] = std::max(inc_sd, 1e-3 * (std::abs(inc_mean) + 1.0));

  const PosteriorDraws raw = run_chains(target, init, config);

  Fit result;
  const auto centre = raw.unconstrained_mean();
  result.point_estimate = to_params(centre, options.fix_mean_wait);

  PosteriorDraws& out = result.draws;
  out.names = {"mu", "tau", "alpha", "beta"};
  out.transforms = {Transform::Identity, Transform::Log, Transform::Log, Transform::Log};
  if (options.export_latents) {
    for (std::size_t i = 0; i < n; ++i) {
      out.names.push_back("w[" + std::to_string(inc.years[i]) + "]");
      out.transforms.push_back(Transform::Log);
    }
  }
  out.block_names = raw.block_names;
  out.acceptance = raw.acceptance;
  out.burn_in_acceptance = raw.burn_in_acceptance;
  out.scale_trace = raw.scale_trace;
  out.adapted_scale = raw.adapted_scale;
  out.iterations = raw.iterations;
  out.config = raw.config;
  for (const auto& chain : raw.chains) {
    Eigen::MatrixXd mapped(chain.rows(), static_cast<Eigen::Index>(out.names.size()));
    for (Eigen::Index r = 0; r < chain.rows(); ++r) {
      const Eigen::VectorXd row = chain.row(r);
      const auto p = to_params(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())),
                               options.fix_mean_wait);
      mapped(r, 0) = p.mu;
      mapped(r, 1) = p.tau;
      mapped(r, 2) = p.alpha;
      mapped(r, 3) = p.beta;
      if (options.export_latents) {
        for (std::size_t i = 0; i < n; ++i) {
          mapped(r, static_cast<Eigen::Index>(4 + i)) = row(static_cast<Eigen::Index>(base + i)) / p.beta;
        }
      }
    }
    out.chains.push_back(std::move(mapped));
  }
  return result;
}

std::vector<Params> extract_params(const PosteriorDraws& draws) {
  const auto mu = draws.index_of("mu");
  const auto tau = draws.index_of("tau");
  const auto alpha = draws.index_of("alpha");
  const auto beta = draws.index_of("beta");
  if (!mu || !tau || !alpha || !beta) throw ShapeError("draws lack one of mu, tau, alpha, beta");
  std::vector<Params> out;
  out.reserve(draws.total_draws());
  for (const auto& c : draws.chains) {
    for (Eigen::Index r = 0; r < c.rows(); ++r) {
      out.push_back({c(r, static_cast<Eigen::Index>(*mu)), c(r, static_cast<Eigen::Index>(*tau)),
                     c(r, static_cast<Eigen::Index>(*alpha)), c(r, static_cast<Eigen::Index>(*beta))});
    }
  }
  return out;
}

FittedSeries predict_one_step(const PosteriorDraws& draws, const NormalizedSeries& series,
                              std::uint64_t seed, std::size_t samples_per_draw) {
  const auto params = extract_params(draws);
  if (params.empty()) throw ValidationError("prediction needs at least one draw");
  if (samples_per_draw == 0) throw ValidationError("samples per draw must be positive");

  // The predictive increment law is the same every year, so one pooled sample
  // serves all years.
  Rng rng(stream_seed(seed, kCtrwPredictStream));
  std::vector<double> incs;
  incs.reserve(params.size() * samples_per_draw);
  double mean_inc = 0.0;
  for (const auto& p : params) {
    mean_inc += p.mean_increment();
    std::normal_distribution<double> jump(p.mu, p.tau);
    std::gamma_distribution<double> wait(p.alpha, 1.0 / p.beta);
    for (std::size_t k = 0; k < samples_per_draw; ++k) {
      const double delta = jump(rng);
      incs.push_back(delta * wait(rng));
    }
  }
  mean_inc /= static_cast<double>(params.size());
  std::sort(incs.begin(), incs.end());
  const double q_lo = quantile_sorted(incs, 0.025);
  const double q_hi = quantile_sorted(incs, 0.975);

  FittedSeries f;
  f.years = series.years;
  f.observed = series.y;
  const std::size_t n = series.size();
  f.mean.resize(n);
  f.lo95.resize(n);
  f.hi95.resize(n);
  f.mean[0] = f.lo95[0] = f.hi95[0] = series.y[0];
  for (std::size_t i = 1; i < n; ++i) {
    const double prev = series.y[i - 1];
    f.mean[i] = prev + mean_inc;
    f.lo95[i] = std::min(prev + q_lo, f.mean[i]);
    f.hi95[i] = std::max(prev + q_hi, f.mean[i]);
  }
  return f;
}

std::vector<double> pointwise_loglik(const Params& p, const IncrementSeries& deltas,
                                     const QuadratureRule& rule) {
  const MarginalIncrementDensity density(p, rule);
  std::vector<double> out;
  out.reserve(deltas.size());
  for (double d : deltas.deltas) out.push_back(density.log_pdf(d));
  return out;
}

Eigen::MatrixXd pointwise_loglik(const PosteriorDraws& draws, const IncrementSeries& deltas,
                                 const QuadratureRule& rule) {
  const auto params = extract_params(draws);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(params.size()), static_cast<Eigen::Index>(deltas.size()));
  for (std::size_t s = 0; s < params.size(); ++s) {
    std::size_t i = 0;
    try {
      const MarginalIncrementDensity density(params[s], rule);
      for (; i < deltas.size(); ++i) {
        out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)) = density.log_pdf(deltas.deltas[i]);
      }
    } catch (const QuadratureError& e) {
      throw QuadratureError("draw " + std::to_string(s) + ", increment " + std::to_string(i) + ": " +
                            e.what());
    }
  }
  return out;
}

}  // namespace tmaxbayes::ctrw
