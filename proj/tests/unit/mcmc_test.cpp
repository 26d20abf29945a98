#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "tmaxbayes/errors.hpp"
#include "tmaxbayes/mcmc.hpp"
#include "tmaxbayes/stats.hpp"

using namespace tmaxbayes;

namespace {

TargetDensity standard_normal() {
  TargetDensity t;
  t.names = {"x"};
  t.transforms = {Transform::Identity};
  t.blocks = {{0}};
  t.log_density = [](std::span<const double> x) { return -0.5 * x[0] * x[0]; };
  return t;
}

/// x ~ N(1, 0.5^2), y ~ Gamma(3, 2), z1,z2 ~ correlated normal block.
TargetDensity mixed_target() {
  TargetDensity t;
  t.names = {"x", "y", "z1", "z2"};
  t.transforms = {Transform::Identity, Transform::Log, Transform::Identity, Transform::Identity};
  t.blocks = {{0}, {1}, {2, 3}};
  t.log_density = [](std::span<const double> v) {
    if (!(v[1] > 0.0)) return kNegInf;
    const double a = v[2], b = v[3];
    const double quad = (a * a - 1.6 * a * b + b * b) / (1.0 - 0.64);
    return log_normal_pdf(v[0], 1.0, 0.5) + log_gamma_pdf(v[1], 3.0, 2.0) - 0.5 * quad;
  };
  return t;
}

McmcConfig small_config(std::uint64_t seed = 1) {
  McmcConfig c;
  c.iterations = 3000;
  c.burn_in = 1000;
  c.thin = 2;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(RunChains, StandardNormalMeanWithinMonteCarloError) {
  McmcConfig cfg;
  cfg.seed = 2024;
  const auto draws = run_chains(standard_normal(), std::vector<double>{0.0}, cfg);
  const auto pooled = draws.pooled(0);
  const double m = mean(pooled);
  const double sd = std::sqrt(sample_variance(pooled));
  const double n_eff = ess(draws)[0].value;
  EXPECT_LT(std::abs(m), 4.0 * sd / std::sqrt(n_eff));
  EXPECT_NEAR(sd, 1.0, 0.1);
}

TEST(RunChains, DefaultProtocolRetainsEightHundredPerChain) {
  McmcConfig cfg;
  EXPECT_EQ(cfg.chains, 4u);
  EXPECT_EQ(cfg.iterations, 10000u);
  EXPECT_EQ(cfg.burn_in, 2000u);
  EXPECT_EQ(cfg.thin, 10u);
  const auto draws = run_chains(standard_normal(), std::vector<double>{0.0}, cfg);
  EXPECT_EQ(draws.num_chains(), 4u);
  EXPECT_EQ(draws.draws_per_chain(), 800u);
  EXPECT_EQ(draws.total_draws(), 3200u);
}

TEST(RunChains, RetainedCountUsesFloor) {
  for (std::size_t thin : {1u, 3u, 7u, 10u}) {
    McmcConfig cfg = small_config();
    cfg.chains = 2;
    cfg.iterations = 1001;
    cfg.burn_in = 200;
    cfg.thin = thin;
    const auto draws = run_chains(standard_normal(), std::vector<double>{0.0}, cfg);
    EXPECT_EQ(draws.draws_per_chain(), 801 / thin);
  }
}

TEST(RunChains, SameSeedIsBitIdentical) {
  const auto t = mixed_target();
  const std::vector<double> init{0.0, 1.0, 0.0, 0.0};
  const auto a = run_chains(t, init, small_config(9));
  const auto b = run_chains(t, init, small_config(9));
  for (std::size_t c = 0; c < a.num_chains(); ++c) {
    EXPECT_TRUE((a.chains[c].array() == b.chains[c].array()).all());
  }
  const auto other = run_chains(t, init, small_config(10));
  EXPECT_FALSE((a.chains[0].array() == other.chains[0].array()).all());
}

TEST(RunChains, SerialAndParallelAgree) {
  const auto t = mixed_target();
  const std::vector<double> init{0.0, 1.0, 0.0, 0.0};
  auto serial = small_config(4);
  serial.threads = 1;
  auto parallel = small_config(4);
  parallel.threads = 4;
  const auto a = run_chains(t, init, serial);
  const auto b = run_chains(t, init, parallel);
  for (std::size_t c = 0; c < a.num_chains(); ++c) {
    EXPECT_TRUE((a.chains[c].array() == b.chains[c].array()).all());
  }
}

TEST(RunChains, ChainStreamsDependOnlyOnIndex) {
  const auto t = mixed_target();
  const std::vector<double> init{0.0, 1.0, 0.0, 0.0};
  auto two = small_config(4);
  two.chains = 2;
  const auto a = run_chains(t, init, two);
  const auto b = run_chains(t, init, small_config(4));
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_TRUE((a.chains[c].array() == b.chains[c].array()).all());
  }
}

TEST(RunChains, RecoversMixedTargetMoments) {
  auto cfg = small_config(5);
  cfg.iterations = 20000;
  cfg.burn_in = 4000;
  cfg.thin = 4;
  const auto draws = run_chains(mixed_target(), std::vector<double>{0.0, 1.0, 0.0, 0.0}, cfg);
  const auto s = summarize(draws);
  EXPECT_NEAR(s[0].mean, 1.0, 0.05);
  EXPECT_NEAR(s[0].sd, 0.5, 0.05);
  EXPECT_NEAR(s[1].mean, 1.5, 0.08);
  EXPECT_NEAR(s[2].sd, 1.0, 0.1);
  const auto z1 = draws.pooled(2), z2 = draws.pooled(3);
  double cov = 0.0;
  for (std::size_t i = 0; i < z1.size(); ++i) cov += z1[i] * z2[i];
  EXPECT_NEAR(cov / static_cast<double>(z1.size()), 0.8, 0.1);
  for (double v : draws.pooled(1)) EXPECT_GT(v, 0.0);
}

TEST(RunChains, AcceptanceNearTargets) {
  auto cfg = small_config(6);
  cfg.iterations = 12000;
  cfg.burn_in = 4000;
  const auto draws = run_chains(mixed_target(), std::vector<double>{0.0, 1.0, 0.0, 0.0}, cfg);
  for (const auto& chain : draws.acceptance) {
    EXPECT_NEAR(chain[0], 0.44, 0.08);
    EXPECT_NEAR(chain[1], 0.44, 0.08);
    EXPECT_NEAR(chain[2], 0.234, 0.08);
  }
}

TEST(RunChains, ScalesFrozenAfterBurnIn) {
  const auto draws = run_chains(mixed_target(), std::vector<double>{0.0, 1.0, 0.0, 0.0}, small_config(7));
  for (std::size_t c = 0; c < draws.num_chains(); ++c) {
    const auto& trace = draws.scale_trace[c];
    ASSERT_EQ(static_cast<std::size_t>(trace.rows()), draws.draws_per_chain());
    for (Eigen::Index b = 0; b < trace.cols(); ++b) {
      EXPECT_TRUE((trace.col(b).array() == trace(0, b)).all());
      EXPECT_EQ(trace(0, b), draws.adapted_scale[c][static_cast<std::size_t>(b)]);
    }
  }
  EXPECT_EQ(draws.iterations.front(), 1002u);
  EXPECT_EQ(draws.iterations.back(), 3000u);
}

TEST(RunChains, NonFiniteInitIsInitError) {
  auto t = standard_normal();
  t.log_density = [](std::span<const double> x) { return x[0] > 5.0 ? 0.0 : kNegInf; };
  EXPECT_THROW(run_chains(t, std::vector<double>{0.0}, small_config()), InitError);

  auto positive = mixed_target();
  EXPECT_THROW(run_chains(positive, std::vector<double>{0.0, -1.0, 0.0, 0.0}, small_config()), InitError);
}

TEST(RunChains, PointMassBlockIsStuck) {
  TargetDensity t;
  t.names = {"a", "b"};
  t.transforms = {Transform::Identity, Transform::Identity};
  t.blocks = {{0, 1}};
  t.block_names = {"pinned"};
  t.log_density = [](std::span<const double> x) { return x[0] == 0.5 && x[1] == 0.5 ? 0.0 : kNegInf; };
  try {
    run_chains(t, std::vector<double>{0.5, 0.5}, small_config());
    FAIL() << "expected StuckChainError";
  } catch (const StuckChainError& e) {
    EXPECT_EQ(e.block(), "pinned");
  }
}

TEST(RunChains, BlocksMustPartition) {
  auto t = mixed_target();
  t.blocks = {{0}, {1}, {2}};
  EXPECT_THROW(t.validate(), ShapeError);
  t.blocks = {{0, 1}, {1}, {2, 3}};
  EXPECT_THROW(t.validate(), ShapeError);
}

TEST(RunChains, ConfigValidation) {
  McmcConfig c;
  c.burn_in = c.iterations;
  EXPECT_THROW(c.validate(), ValidationError);
  c = McmcConfig{};
  c.thin = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = McmcConfig{};
  c.chains = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_DOUBLE_EQ(McmcConfig{}.target_for(1), 0.44);
  EXPECT_DOUBLE_EQ(McmcConfig{}.target_for(3), 0.234);
}

TEST(RunChains, JointMoveAndGibbsStep) {
  // x, y iid N(0,1); y is refreshed exactly and a joint move shifts both.
  TargetDensity t;
  t.names = {"x", "y"};
  t.transforms = {Transform::Identity, Transform::Identity};
  t.blocks = {{0}};
  t.log_density = [](std::span<const double> v) { return -0.5 * (v[0] * v[0] + v[1] * v[1]); };
  t.joint_moves.push_back({"shift", [&](std::span<double> v, double step) {
                             const double before = -0.5 * (v[0] * v[0] + v[1] * v[1]);
                             v[0] += step;
                             v[1] += step;
                             return -0.5 * (v[0] * v[0] + v[1] * v[1]) - before;
                           }});
  t.gibbs_steps.push_back({"y", {1}, [](std::span<double> v, std::mt19937_64& rng) {
                             v[1] = std::normal_distribution<double>(0.0, 1.0)(rng);
                           }});
  auto cfg = small_config(12);
  cfg.iterations = 8000;
  const auto draws = run_chains(t, std::vector<double>{0.0, 0.0}, cfg);
  ASSERT_EQ(draws.block_names.size(), 2u);
  EXPECT_EQ(draws.block_names[1], "shift");
  ASSERT_EQ(draws.acceptance[0].size(), 2u);
  const auto s = summarize(draws);
  EXPECT_NEAR(s[0].sd, 1.0, 0.08);
  EXPECT_NEAR(s[1].sd, 1.0, 0.08);
  EXPECT_NEAR(s[1].mean, 0.0, 0.08);
}

TEST(DrawsCsv, RoundTripAndHeader) {
  const auto draws = run_chains(mixed_target(), std::vector<double>{0.0, 1.0, 0.0, 0.0}, small_config(3));
  std::ostringstream out;
  write_draws_csv(out, draws);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "chain,iter,x,y,z1,z2");
  std::istringstream in(out.str());
  const auto back = read_draws_csv(in);
  ASSERT_EQ(back.num_chains(), draws.num_chains());
  for (std::size_t c = 0; c < draws.num_chains(); ++c) {
    EXPECT_TRUE((back.chains[c].array() == draws.chains[c].array()).all());
  }
  std::ostringstream summary;
  write_summary_csv(summary, draws);
  EXPECT_EQ(summary.str().substr(0, summary.str().find('\n')), "param,rhat,ess,mean,sd,q2.5,q50,q97.5");
}

TEST(PosteriorDraws, UnconstrainedMean) {
  PosteriorDraws d;
  d.names = {"a", "b"};
  d.transforms = {Transform::Identity, Transform::Log};
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 1.0, 3.0, 4.0;
  d.chains = {m};
  const auto c = d.unconstrained_mean();
  EXPECT_DOUBLE_EQ(c[0], 2.0);
  EXPECT_NEAR(c[1], 2.0, 1e-14);
}
