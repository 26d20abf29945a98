#include <algorithm>
#include <cmath>
#include <limits>

#include "tmaxbayes/errors.hpp"
#include "tmaxbayes/mcmc.hpp"
#include "tmaxbayes/stats.hpp"

namespace tmaxbayes {
namespace {

/// Splits each chain into a first and second half (odd middle draw dropped).
/// Chains shorter than 4 draws are used whole.
std::vector<std::vector<double>> split_halves(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    if (half < 2) {
      out.push_back(c);
      continue;
    }
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

struct ChainMoments {
  std::size_t n = 0;      // draws per (split) chain
  double within = 0.0;    // W
  double var_plus = 0.0;  // pooled variance estimate
  std::vector<double> means;
};

ChainMoments moments(const std::vector<std::vector<double>>& chains) {
  ChainMoments m;
  m.n = chains.front().size();
  for (const auto& c : chains) {
    if (c.size() != m.n) throw ShapeError("chains must have equal length");
    m.means.push_back(mean(c));
    m.within += sample_variance(c);
  }
  m.within /= static_cast<double>(chains.size());
  const double n = static_cast<double>(m.n);
  const double between_over_n = chains.size() > 1 ? sample_variance(m.means) : 0.0;
  m.var_plus = (n - 1.0) / n * m.within + between_over_n;
  return m;
}

void require_draws(const std::vector<std::vector<double>>& chains, std::size_t min_per_chain) {
  if (chains.empty() || chains.front().size() < min_per_chain) {
    throw ValidationError("diagnostic needs at least " + std::to_string(min_per_chain) +
                          " draws per chain");
  }
}

}  // namespace

ScalarDiagnostic split_rhat(const std::vector<std::vector<double>>& chains) {
  require_draws(chains, 2);
  const auto halves = split_halves(chains);
  const auto m = moments(halves);
  if (m.within == 0.0) {
    const bool equal_means =
        std::all_of(m.means.begin(), m.means.end(), [&](double v) { return v == m.means.front(); });
    return {equal_means ? 1.0 : std::numeric_limits<double>::infinity(), true};
  }
  return {std::sqrt(m.var_plus / m.within), false};
}

ScalarDiagnostic effective_sample_size(const std::vector<std::vector<double>>& chains) {
  require_draws(chains, 1);
  std::size_t total = 0;
  for (const auto& c : chains) total += c.size();
  const auto halves = split_halves(chains);
  if (halves.front().size() < 2) return {static_cast<double>(total), true};
  const auto m = moments(halves);
  if (m.within == 0.0 || m.var_plus == 0.0) return {static_cast<double>(total), true};

  const std::size_t n = m.n;
  const std::size_t k = halves.size();

  // Mean over chains of the (biased) lag-t autocovariance.
  auto mean_autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const auto& x = halves[c];
      const double mu = m.means[c];
      double s = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - mu) * (x[i + lag] - mu);
      acc += s / static_cast<double>(n);
    }
    return acc / static_cast<double>(k);
  };
  auto rho = [&](std::size_t lag) { return 1.0 - (m.within - mean_autocov(lag)) / m.var_plus; };

  double sum = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  double rho_even = 1.0;
  for (std::size_t t = 0; t + 1 < n; t += 2) {
    if (t > 0) rho_even = rho(t);
    const double pair = rho_even + rho(t + 1);
    if (!(pair > 0.0)) break;
    const double monotone = std::min(pair, prev_pair);
    sum += monotone;
    prev_pair = monotone;
  }
  const double draws = static_cast<double>(n * k);
  double tau = -1.0 + 2.0 * sum;
  tau = std::max(tau, 1.0 / std::log10(draws));
  return {draws / tau, false};
}

std::vector<ScalarDiagnostic> split_rhat(const PosteriorDraws& draws) {
  std::vector<ScalarDiagnostic> out;
  for (std::size_t j = 0; j < draws.num_params(); ++j) out.push_back(split_rhat(draws.per_chain(j)));
  return out;
}

std::vector<ScalarDiagnostic> ess(const PosteriorDraws& draws) {
  std::vector<ScalarDiagnostic> out;
  for (std::size_t j = 0; j < draws.num_params(); ++j) {
    out.push_back(effective_sample_size(draws.per_chain(j)));
  }
  return out;
}

ParamSummary summarize_values(std::string name, std::vector<double> values) {
  if (values.empty()) throw ValidationError("cannot summarize an empty sample");
  ParamSummary s;
  s.name = std::move(name);
  s.mean = mean(values);
  s.sd = std::sqrt(sample_variance(values));
  std::sort(values.begin(), values.end());
  s.q025 = quantile_sorted(values, 0.025);
  s.q50 = quantile_sorted(values, 0.5);
  s.q975 = quantile_sorted(values, 0.975);
  return s;
}

std::vector<ParamSummary> summarize(const PosteriorDraws& draws) {
  std::vector<ParamSummary> out;
  for (std::size_t j = 0; j < draws.num_params(); ++j) {
    out.push_back(summarize_values(draws.names[j], draws.pooled(j)));
  }
  return out;
}

}  // namespace tmaxbayes
