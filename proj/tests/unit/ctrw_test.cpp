#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tmaxbayes/ctrw.hpp"
#include "tmaxbayes/errors.hpp"
#include "tmaxbayes/stats.hpp"

using namespace tmaxbayes;
namespace tt = tmaxbayes::testing;

namespace {

const ctrw::Params kTruth{0.05, 0.1, 2.0, 2.0};

PosteriorDraws draws_of(const std::vector<ctrw::Params>& rows, std::size_t chains = 1) {
  PosteriorDraws d;
  d.names = {"mu", "tau", "alpha", "beta"};
  d.transforms = {Transform::Identity, Transform::Log, Transform::Log, Transform::Log};
  const std::size_t per = rows.size() / chains;
  for (std::size_t c = 0; c < chains; ++c) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(per), 4);
    for (std::size_t r = 0; r < per; ++r) {
      const auto& p = rows[c * per + r];
      m.row(static_cast<Eigen::Index>(r)) << p.mu, p.tau, p.alpha, p.beta;
    }
    d.chains.push_back(m);
  }
  return d;
}

McmcConfig short_config(std::uint64_t seed) {
  McmcConfig c;
  c.iterations = 4000;
  c.burn_in = 1000;
  c.thin = 5;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(CtrwLogJoint, HandEvaluation) {
  const ctrw::Params p{0.0, 1.0, 1.0, 1.0};
  const std::vector<double> w{1.0}, d{0.0};
  EXPECT_NEAR(ctrw::log_likelihood_augmented(p, w, d), -0.9189385332046727 - 1.0, 1e-12);
}

TEST(CtrwLogJoint, NormalTermInvariantUnderJointScaling) {
  const ctrw::Params p{0.1, 0.3, 2.5, 1.5};
  const std::vector<double> w{0.7, 1.3, 2.0}, d{0.05, -0.2, 0.4};
  const double c = 3.0;
  std::vector<double> cw(w), cd(d);
  for (auto& v : cw) v *= c;
  for (auto& v : cd) v *= c;
  auto normal_part = [&](std::span<const double> ws, std::span<const double> ds) {
    double s = ctrw::log_likelihood_augmented(p, ws, ds);
    for (double x : ws) s += std::log(x) - log_gamma_pdf(x, p.alpha, p.beta);
    return s;
  };
  EXPECT_NEAR(normal_part(w, d), normal_part(cw, cd), 1e-12);
}

TEST(CtrwLogJoint, SupportAndShape) {
  const ctrw::Params p{0.0, 1.0, 2.0, 2.0};
  const std::vector<double> d{0.1, 0.2};
  EXPECT_EQ(ctrw::log_likelihood_augmented(p, std::vector<double>{1.0, 0.0}, d), kNegInf);
  EXPECT_EQ(ctrw::log_likelihood_augmented(p, std::vector<double>{-1.0, 1.0}, d), kNegInf);
  const auto series = tt::annual_series({1.0, 1.1, 1.3});
  const auto inc = increments(series);
  EXPECT_THROW(ctrw::log_joint(p, {{1.0}}, inc, {}), ShapeError);
  EXPECT_EQ(ctrw::log_joint({0.0, -1.0, 2.0, 2.0}, {{1.0, 1.0}}, inc, {}), kNegInf);
  const double lj = ctrw::log_joint(p, {{1.0, 1.0}}, inc, {});
  EXPECT_NEAR(lj, ctrw::log_likelihood_augmented(p, std::vector<double>{1.0, 1.0}, inc.deltas) +
                      ctrw::log_prior(p, {}),
              1e-12);
}

TEST(CtrwMarginal, SymmetricWhenMuIsZero) {
  const ctrw::Params p{0.0, 0.2, 1.7, 0.9};
  for (double d : {0.1, 0.5, 2.0}) {
    EXPECT_NEAR(ctrw::marginal_increment_logpdf(d, p), ctrw::marginal_increment_logpdf(-d, p), 1e-10);
  }
}

TEST(CtrwMarginal, MatchesAdaptiveQuadratureOracle) {
  for (const auto& p : {kTruth, ctrw::Params{-0.2, 0.5, 0.8, 3.0}, ctrw::Params{0.3, 0.05, 6.0, 1.0}}) {
    const double sd = std::sqrt((p.mu * p.mu + p.tau * p.tau) * p.alpha * (p.alpha + 1.0) / (p.beta * p.beta) -
                                p.mu * p.mu * p.alpha * p.alpha / (p.beta * p.beta));
    for (double k : {-2.0, -1.0, -0.1, 0.3, 1.0, 2.0, 3.0}) {
      const double d = p.mean_increment() + k * sd;
      const double oracle = std::log(tt::increment_density_quadrature(d, p));
      EXPECT_NEAR(ctrw::marginal_increment_logpdf(d, p), oracle, 1e-6)
          << "alpha " << p.alpha << " d " << d;
    }
  }
}

TEST(CtrwMarginal, TotalMassIsOne) {
  for (const auto& p : {kTruth, ctrw::Params{0.0, 1.0, 3.0, 1.0}}) {
    const ctrw::MarginalIncrementDensity density(p);
    const double sd = std::sqrt((p.mu * p.mu + p.tau * p.tau) * p.alpha * (p.alpha + 1.0) / (p.beta * p.beta) -
                                p.mu * p.mu * p.alpha * p.alpha / (p.beta * p.beta));
    const auto x = tt::linspace(-30.0 * sd, 30.0 * sd, 60001);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::exp(density.log_pdf(x[i]));
    EXPECT_NEAR(tt::trapezoid(x, y), 1.0, 5e-4);
  }
}

TEST(CtrwMarginal, MonteCarloOracleAtThreePoints) {
  const std::vector<double> points{-0.3, 0.0, 0.3};
  const auto mc = tt::increment_density_monte_carlo(points, kTruth, 1'000'000, 123);
  for (std::size_t i = 0; i < points.size(); ++i) {
    EXPECT_NEAR(std::exp(ctrw::marginal_increment_logpdf(points[i], kTruth)), mc[i], 5e-3);
  }
}

TEST(CtrwMarginal, DirectHistogramOfProducts) {
  const std::vector<double> points{-0.3, -0.1, 0.05, 0.2, 0.4};
  const double h = 0.02;
  const auto hist = tt::increment_density_histogram(points, h, kTruth, 1'000'000, 77);
  const ctrw::MarginalIncrementDensity density(kTruth);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto x = tt::linspace(points[i] - h, points[i] + h, 401);
    std::vector<double> y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) y[k] = std::exp(density.log_pdf(x[k]));
    const double bin_average = tt::trapezoid(x, y) / (2.0 * h);
    EXPECT_NEAR(hist.density[i], bin_average, 4.0 * hist.se[i]) << "d " << points[i];
  }
}

TEST(CtrwMarginal, AugmentedAverageConvergesToMarginal) {
  std::mt19937_64 rng(5);
  std::gamma_distribution<double> wait(kTruth.alpha, 1.0 / kTruth.beta);
  const std::vector<double> points{-0.15, 0.2};
  std::vector<double> acc(points.size(), 0.0);
  const std::size_t n = 1'000'000;
  for (std::size_t s = 0; s < n; ++s) {
    const double w = wait(rng);
    for (std::size_t i = 0; i < points.size(); ++i) {
      acc[i] += std::exp(ctrw::log_likelihood_augmented(kTruth, std::vector<double>{w},
                                                        std::vector<double>{points[i]}) -
                         log_gamma_pdf(w, kTruth.alpha, kTruth.beta));
    }
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double exact = std::exp(ctrw::marginal_increment_logpdf(points[i], kTruth));
    EXPECT_NEAR(acc[i] / static_cast<double>(n) / exact, 1.0, 0.02);
  }
}

TEST(CtrwMarginal, NodeDoublingIsStable) {
  ctrw::QuadratureRule fine;
  fine.nodes = 801;
  for (const auto& p : {kTruth, ctrw::Params{0.0, 0.3, 1.2, 0.5}, ctrw::Params{1.0, 0.2, 10.0, 8.0}}) {
    for (double d : {-0.5, -0.01, 0.0, 0.1, 0.6}) {
      EXPECT_LT(std::abs(ctrw::marginal_increment_logpdf(d, p) - ctrw::marginal_increment_logpdf(d, p, fine)), 1e-6);
    }
  }
}

TEST(CtrwMarginal, Errors) {
  EXPECT_THROW(ctrw::marginal_increment_logpdf(0.1, {0.0, -1.0, 1.0, 1.0}), QuadratureError);
  ctrw::QuadratureRule even;
  even.nodes = 400;
  EXPECT_THROW(ctrw::marginal_increment_logpdf(0.1, kTruth, even), ValidationError);
}

TEST(CtrwSimulate, VanishingJumpNoiseIsIncreasing) {
  const auto y = ctrw::simulate({1.0, 1e-12, 0.7, 3.0}, 20.0, 1000, 3);
  ASSERT_EQ(y.size(), 1000u);
  EXPECT_EQ(y.front(), 20.0);
  for (std::size_t i = 1; i < y.size(); ++i) EXPECT_GT(y[i], y[i - 1]);
}

TEST(CtrwSimulate, IncrementMoments) {
  const std::size_t n = 1'000'001;
  const auto y = ctrw::simulate(kTruth, 0.0, n, 11);
  std::vector<double> d(n - 1);
  for (std::size_t i = 1; i < n; ++i) d[i - 1] = y[i] - y[i - 1];
  const double m = mean(d);
  const double v = sample_variance(d);
  const double a = kTruth.alpha, b = kTruth.beta, mu = kTruth.mu, tau = kTruth.tau;
  EXPECT_NEAR(m, mu * a / b, 3.0 * std::sqrt(v / static_cast<double>(d.size())));
  const double var_expected = (mu * mu + tau * tau) * a * (a + 1.0) / (b * b) - mu * mu * a * a / (b * b);
  EXPECT_NEAR(v / var_expected, 1.0, 0.02);
  for (double x : y) ASSERT_TRUE(std::isfinite(x));
}

TEST(CtrwSimulate, DeterministicAndLocationEquivariant) {
  const auto a = ctrw::simulate(kTruth, 30.0, 200, 42);
  const auto b = ctrw::simulate(kTruth, 30.0, 200, 42);
  const auto shifted = ctrw::simulate(kTruth, 30.0 + 4.0, 200, 42);
  EXPECT_EQ(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(shifted[i] - a[i], 4.0, 1e-12);
  EXPECT_NE(a, ctrw::simulate(kTruth, 30.0, 200, 43));
  EXPECT_THROW(ctrw::simulate(kTruth, 0.0, 1, 1), ValidationError);
}

TEST(CtrwFit, ConstantSeriesCentresMuAtZero) {
  const auto series = tt::annual_series(std::vector<double>(60, 31.0));
  const auto fit = ctrw::fit(series, short_config(8));
  const auto mu = summarize(fit.draws)[0];
  EXPECT_EQ(fit.draws.names, (std::vector<std::string>{"mu", "tau", "alpha", "beta"}));
  EXPECT_LT(std::abs(mu.mean), mu.sd);
}

TEST(CtrwFit, PositiveParametersStayPositive) {
  const auto series = tt::annual_series(ctrw::simulate(kTruth, 30.0, 80, 4));
  ctrw::FitOptions opts;
  opts.export_latents = true;
  const auto fit = ctrw::fit(series, short_config(2), opts);
  ASSERT_EQ(fit.draws.num_params(), 4u + 79u);
  EXPECT_EQ(fit.draws.names[4], "w[1902]");
  for (std::size_t j = 1; j < fit.draws.num_params(); ++j) {
    for (double v : fit.draws.pooled(j)) ASSERT_GT(v, 0.0);
  }
  EXPECT_EQ(fit.draws.total_draws(), 4u * 600u);
}

TEST(CtrwFit, FixedMeanWaitPinsBetaToAlpha) {
  const auto series = tt::annual_series(ctrw::simulate(kTruth, 30.0, 60, 5));
  ctrw::FitOptions opts;
  opts.fix_mean_wait = true;
  const auto fit = ctrw::fit(series, short_config(3), opts);
  const auto alpha = fit.draws.pooled(2), beta = fit.draws.pooled(3);
  for (std::size_t i = 0; i < alpha.size(); ++i) ASSERT_EQ(alpha[i], beta[i]);
  EXPECT_EQ(fit.point_estimate.alpha, fit.point_estimate.beta);
}

TEST(CtrwFit, TooShort) {
  NormalizedSeries s;
  s.years = {2000, 2001};
  s.t = {0.0, 1.0};
  s.x_std = {-0.7, 0.7};
  s.y = {30.0, 30.5};
  EXPECT_THROW(ctrw::fit(s, short_config(1)), ValidationError);
}

TEST(CtrwPredict, ZeroDriftEchoesLaggedSeries) {
  const auto series = tt::annual_series({30.0, 30.4, 30.1, 30.9, 31.2});
  const auto draws = draws_of(std::vector<ctrw::Params>(10, {0.0, 0.1, 2.0, 2.0}));
  const auto f = ctrw::predict_one_step(draws, series, 1);
  EXPECT_EQ(f.mean[0], series.y[0]);
  for (std::size_t i = 1; i < series.size(); ++i) {
    EXPECT_DOUBLE_EQ(f.mean[i], series.y[i - 1]);
    EXPECT_LE(f.lo95[i], f.mean[i]);
    EXPECT_GE(f.hi95[i], f.mean[i]);
  }
}

TEST(CtrwPredict, PositiveDriftRaisesEveryForecast) {
  const auto series = tt::annual_series(ctrw::simulate(kTruth, 30.0, 50, 9));
  const auto draws = draws_of(std::vector<ctrw::Params>(20, kTruth));
  const auto f = ctrw::predict_one_step(draws, series, 1);
  for (std::size_t i = 1; i < series.size(); ++i) EXPECT_GT(f.mean[i], series.y[i - 1]);
}

TEST(CtrwPredict, BandCalibratedAtTruth) {
  const auto series = tt::annual_series(ctrw::simulate(kTruth, 30.0, 501, 10));
  const auto draws = draws_of(std::vector<ctrw::Params>(400, kTruth), 4);
  const auto f = ctrw::predict_one_step(draws, series, 77);
  std::size_t inside = 0;
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (series.y[i] >= f.lo95[i] && series.y[i] <= f.hi95[i]) ++inside;
  }
  EXPECT_NEAR(static_cast<double>(inside) / 500.0, 0.95, 0.05);
}

TEST(CtrwLoglik, ConsistentWithMarginal) {
  const auto series = tt::annual_series({30.0, 30.2, 29.9, 30.5});
  const auto inc = increments(series);
  const auto single = draws_of({kTruth});
  const auto m = ctrw::pointwise_loglik(single, inc);
  ASSERT_EQ(m.rows(), 1);
  ASSERT_EQ(m.cols(), 3);
  for (Eigen::Index i = 0; i < 3; ++i) {
    EXPECT_EQ(m(0, i), ctrw::marginal_increment_logpdf(inc.deltas[static_cast<std::size_t>(i)], kTruth));
  }
  const auto same = ctrw::pointwise_loglik(draws_of(std::vector<ctrw::Params>(5, kTruth)), inc);
  for (Eigen::Index s = 1; s < 5; ++s) EXPECT_TRUE((same.row(s).array() == same.row(0).array()).all());
}

TEST(CtrwLoglik, TrueParametersDominateShiftedOnes) {
  ctrw::Params far = kTruth;
  far.mu += 1.0;
  int wins = 0;
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    const auto inc = increments(tt::annual_series(ctrw::simulate(kTruth, 30.0, 117, 1000 + rep)));
    const auto m = ctrw::pointwise_loglik(draws_of({kTruth, far}), inc);
    if (m.row(0).sum() > m.row(1).sum()) ++wins;
  }
  EXPECT_GE(wins, 99);
}
