#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "tmaxbayes/bsar.hpp"
#include "tmaxbayes/compare.hpp"
#include "tmaxbayes/ctrw.hpp"
#include "tmaxbayes/mcmc.hpp"
#include "tmaxbayes/stats.hpp"

using namespace tmaxbayes;

namespace {

NormalizedSeries series_of(const std::vector<double>& y) {
  std::vector<int> years(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) years[i] = 1901 + static_cast<int>(i);
  return normalize(SeasonalTable(years, y));
}

}  // namespace

static void BM_MarginalDensityBuild(benchmark::State& state) {
  ctrw::QuadratureRule rule;
  rule.nodes = static_cast<std::size_t>(state.range(0));
  const ctrw::Params p{0.05, 0.1, 2.0, 2.0};
  for (auto _ : state) {
    ctrw::MarginalIncrementDensity d(p, rule);
    benchmark::DoNotOptimize(d.log_pdf(0.1));
  }
}
BENCHMARK(BM_MarginalDensityBuild)->Arg(201)->Arg(401)->Arg(801);

static void BM_MarginalLogPdf(benchmark::State& state) {
  const ctrw::MarginalIncrementDensity d({0.05, 0.1, 2.0, 2.0});
  double x = -0.4;
  for (auto _ : state) {
    benchmark::DoNotOptimize(d.log_pdf(x));
    x = x > 0.4 ? -0.4 : x + 0.01;
  }
}
BENCHMARK(BM_MarginalLogPdf);

static void BM_BsarLogPosterior(benchmark::State& state) {
  const auto order = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> y(117);
  for (double& v : y) v = 34.0 + 0.3 * z(rng);
  const auto series = series_of(y);
  const bsar::BasisSet basis(order, series.t);
  bsar::State s;
  s.beta0 = 34.0;
  for (std::size_t j = 0; j <= order; ++j) s.theta.push_back(0.3 * z(rng));
  for (auto _ : state) benchmark::DoNotOptimize(bsar::log_posterior(s, series, basis, {}));
}
BENCHMARK(BM_BsarLogPosterior)->Arg(10)->Arg(20)->Arg(40);

static void BM_PsisLoo(benchmark::State& state) {
  const auto draws = static_cast<Eigen::Index>(state.range(0));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd ll(draws, 117);
  for (Eigen::Index s = 0; s < ll.rows(); ++s) {
    for (Eigen::Index i = 0; i < ll.cols(); ++i) ll(s, i) = -0.5 * z(rng) * z(rng) - 1.0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(psis_loo(ll).elpd);
}
BENCHMARK(BM_PsisLoo)->Arg(800)->Arg(3200)->Unit(benchmark::kMillisecond);

static void BM_EngineNormal(benchmark::State& state) {
  TargetDensity t;
  t.names = {"a", "b", "c"};
  t.transforms = {Transform::Identity, Transform::Identity, Transform::Log};
  t.blocks = {{0, 1}, {2}};
  t.log_density = [](std::span<const double> x) {
    return -0.5 * (x[0] * x[0] + x[1] * x[1]) + log_gamma_pdf(x[2], 2.0, 1.0);
  };
  McmcConfig cfg;
  cfg.iterations = 2000;
  cfg.burn_in = 500;
  cfg.thin = 1;
  cfg.threads = 1;
  const std::vector<double> init{0.0, 0.0, 1.0};
  for (auto _ : state) benchmark::DoNotOptimize(run_chains(t, init, cfg).total_draws());
}
BENCHMARK(BM_EngineNormal)->Unit(benchmark::kMillisecond);

static void BM_CtrwFitShort(benchmark::State& state) {
  const auto series = series_of(ctrw::simulate({0.05, 0.1, 2.0, 2.0}, 34.0, 117, 3));
  McmcConfig cfg;
  cfg.iterations = 1000;
  cfg.burn_in = 200;
  for (auto _ : state) benchmark::DoNotOptimize(ctrw::fit(series, cfg).draws.total_draws());
}
BENCHMARK(BM_CtrwFitShort)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
