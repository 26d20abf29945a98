#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace tmaxbayes {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))

inline double log_normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}

/// Gamma(shape, rate) log density; -inf for x <= 0.
inline double log_gamma_pdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

/// Half-normal on (0, inf) with the given scale.
inline double log_half_normal_pdf(double x, double scale) {
  if (!(x > 0.0)) return kNegInf;
  return std::numbers::ln2 + log_normal_pdf(x, 0.0, scale);
}

inline double log_exponential_pdf(double x, double rate) {
  if (!(x > 0.0)) return kNegInf;
  return std::log(rate) - rate * x;
}

inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return kNegInf;
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

/// Shifted by the first element, so a constant sample returns that constant exactly.
inline double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  const double shift = xs.front();
  double s = 0.0;
  for (double x : xs) s += x - shift;
  return shift + s / static_cast<double>(xs.size());
}

/// Sample variance (n - 1 denominator), two-pass.
inline double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

/// Type-7 quantile (linear interpolation of order statistics) of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = (static_cast<double>(n) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, n - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> xs, double p) {
  std::sort(xs.begin(), xs.end());
  return quantile_sorted(xs, p);
}

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for stream `index` under a master seed.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

/// Stream indices below this are MCMC chains; auxiliary consumers sit above.
inline constexpr std::uint64_t kAuxStreamBase = 1ULL << 32;
enum AuxStream : std::uint64_t {
  kSimulateStream = kAuxStreamBase,
  kCtrwPredictStream = kAuxStreamBase + 1,
  kBsarPredictStream = kAuxStreamBase + 2,
};

using Rng = std::mt19937_64;

}  // namespace tmaxbayes
