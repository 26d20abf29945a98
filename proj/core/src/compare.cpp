#include "tmaxbayes/compare.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "tmaxbayes/csv.hpp"
#include "tmaxbayes/errors.hpp"
#include "tmaxbayes/stats.hpp"

namespace tmaxbayes {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMinDraws = 16;
constexpr std::size_t kWarnDraws = 100;

double deviance(std::span<const double> loglik) {
  return -2.0 * std::accumulate(loglik.begin(), loglik.end(), 0.0);
}

/// Profile log-likelihood of the GPD in the Zhang-Stephens parameterisation.
double profile_loglik(double theta, std::span<const double> x) {
  const double a = -theta;
  double k = 0.0;
  for (double v : x) k += std::log1p(a * v);
  k /= static_cast<double>(x.size());
  return std::log(a / k) - k - 1.0;
}

double gpd_quantile(double p, double k, double sigma) {
  if (k == 0.0) return -sigma * std::log1p(-p);
  return sigma * std::expm1(-k * std::log1p(-p)) / k;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

DicResult dic(const Eigen::MatrixXd& loglik, std::span<const double> loglik_at_mean) {
  if (static_cast<std::size_t>(loglik.cols()) != loglik_at_mean.size() || loglik.rows() == 0) {
    throw ShapeError("DIC: log-likelihood matrix and point log-likelihood disagree in size");
  }
  DicResult r;
  double sum = 0.0;
  for (Eigen::Index s = 0; s < loglik.rows(); ++s) sum += -2.0 * loglik.row(s).sum();
  r.d_bar = sum / static_cast<double>(loglik.rows());
  r.d_hat = deviance(loglik_at_mean);
  r.p_d = r.d_bar - r.d_hat;
  r.dic = r.d_hat + 2.0 * r.p_d;
  return r;
}

ParetoFit fit_generalized_pareto(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2 || !(x.back() > 0.0)) return {kInf, 0.0};
  constexpr double prior = 3.0;
  const std::size_t grid = 30 + static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const std::size_t quartile = static_cast<std::size_t>(std::floor(static_cast<double>(n) / 4.0 + 0.5));
  const double xstar = x[std::max<std::size_t>(quartile, 1) - 1];
  if (!(xstar > 0.0)) return {kInf, 0.0};

  std::vector<double> theta(grid), l_theta(grid);
  for (std::size_t j = 0; j < grid; ++j) {
    const double jj = static_cast<double>(j + 1);
    theta[j] = 1.0 / x.back() + (1.0 - std::sqrt(static_cast<double>(grid) / (jj - 0.5))) / prior / xstar;
    l_theta[j] = static_cast<double>(n) * profile_loglik(theta[j], x);
  }
  const double norm = log_sum_exp(l_theta);
  double theta_hat = 0.0;
  for (std::size_t j = 0; j < grid; ++j) {
    const double w = std::exp(l_theta[j] - norm);
    if (std::isfinite(w)) theta_hat += theta[j] * w;
  }
  double k = 0.0;
  for (double v : x) k += std::log1p(-theta_hat * v);
  k /= static_cast<double>(n);
  const double sigma = -k / theta_hat;
  // Shrink towards 0.5 as if 10 pseudo-observations were added.
  constexpr double a = 10.0;
  const double nn = static_cast<double>(n);
  k = k * nn / (nn + a) + a * 0.5 / (nn + a);
  if (!std::isfinite(k) || !std::isfinite(sigma)) return {kInf, 0.0};
  return {k, sigma};
}

SmoothedWeights psis_smooth(std::span<const double> log_ratios) {
  const std::size_t s = log_ratios.size();
  SmoothedWeights out;
  out.log_weights.assign(log_ratios.begin(), log_ratios.end());
  const double max_lr = *std::max_element(log_ratios.begin(), log_ratios.end());
  for (double& v : out.log_weights) v -= max_lr;

  const double ds = static_cast<double>(s);
  const auto tail_len =
      static_cast<std::size_t>(std::ceil(std::min(0.2 * ds, 3.0 * std::sqrt(ds))));
  out.k = kInf;
  out.degenerate = true;
  if (tail_len >= 5 && tail_len < s) {
    std::vector<std::size_t> order(s);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return out.log_weights[a] < out.log_weights[b];
    });
    const std::size_t first_tail = s - tail_len;
    const double tail_min = out.log_weights[order[first_tail]];
    const double tail_max = out.log_weights[order[s - 1]];
    if (std::abs(tail_max - tail_min) >= std::numeric_limits<double>::epsilon() / 100.0) {
      const double cutoff = out.log_weights[order[first_tail - 1]];
      const double exp_cutoff = std::exp(cutoff);
      std::vector<double> exceed(tail_len);
      for (std::size_t t = 0; t < tail_len; ++t) {
        exceed[t] = std::exp(out.log_weights[order[first_tail + t]]) - exp_cutoff;
      }
      const auto fit = fit_generalized_pareto(exceed);
      if (std::isfinite(fit.k)) {
        for (std::size_t t = 0; t < tail_len; ++t) {
          const double p = (static_cast<double>(t) + 0.5) / static_cast<double>(tail_len);
          out.log_weights[order[first_tail + t]] = std::log(gpd_quantile(p, fit.k, fit.sigma) + exp_cutoff);
        }
        out.k = fit.k;
        out.degenerate = false;
      }
    }
  }
  // Truncate at the largest raw ratio.
  for (double& v : out.log_weights) v = std::min(v, 0.0);
  return out;
}

LooResult psis_loo(const Eigen::MatrixXd& loglik) {
  const auto s = static_cast<std::size_t>(loglik.rows());
  const auto m = static_cast<std::size_t>(loglik.cols());
  if (s < kMinDraws) {
    throw InsufficientDrawsError("PSIS-LOO needs at least " + std::to_string(kMinDraws) +
                                 " draws, got " + std::to_string(s));
  }
  if (m == 0) throw ShapeError("PSIS-LOO needs at least one observation");
  if (!loglik.allFinite()) throw ValidationError("log-likelihood matrix has non-finite entries");

  LooResult r;
  r.few_draws = s < kWarnDraws;
  r.elpd_i.resize(m);
  r.pareto_k.resize(m);
  r.k_degenerate.resize(m);
  std::vector<double> neg(s), lw_ll(s);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t d = 0; d < s; ++d) neg[d] = -loglik(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i));
    const auto w = psis_smooth(neg);
    for (std::size_t d = 0; d < s; ++d) {
      lw_ll[d] = w.log_weights[d] + loglik(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i));
    }
    r.elpd_i[i] = log_sum_exp(lw_ll) - log_sum_exp(w.log_weights);
    r.pareto_k[i] = w.k;
    r.k_degenerate[i] = w.degenerate;
    if (!w.degenerate && w.k > kParetoKThreshold) ++r.n_high_k;
  }
  r.elpd = std::accumulate(r.elpd_i.begin(), r.elpd_i.end(), 0.0);
  r.looic = -2.0 * r.elpd;
  r.se = std::sqrt(static_cast<double>(m) * sample_variance(r.elpd_i));
  return r;
}

double rmse(std::span<const double> observed, std::span<const double> fitted) {
  if (observed.size() != fitted.size() || observed.empty()) throw ShapeError("rmse: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) s += (observed[i] - fitted[i]) * (observed[i] - fitted[i]);
  return std::sqrt(s / static_cast<double>(observed.size()));
}

double mae(std::span<const double> observed, std::span<const double> fitted) {
  if (observed.size() != fitted.size() || observed.empty()) throw ShapeError("mae: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) s += std::abs(observed[i] - fitted[i]);
  return s / static_cast<double>(observed.size());
}

ComparisonReport compare(std::span<const ModelEntry> entries) {
  if (entries.empty()) throw ValidationError("compare needs at least one model");
  ComparisonReport report;
  for (const auto& e : entries) {
    ModelRow row;
    row.model = e.loglik.model;
    row.fit_description = e.fit_description;
    row.dic = dic(e.loglik.values, e.loglik_at_mean);
    row.loo = psis_loo(e.loglik.values);
    row.rmse = rmse(e.observed, e.fitted);
    row.mae = mae(e.observed, e.fitted);
    row.n_loglik_obs = static_cast<std::size_t>(e.loglik.values.cols());
    row.n_level_obs = e.observed.size();
    if (row.loo.few_draws) {
      report.notes.push_back(row.model + ": fewer than 100 draws; PSIS tail fits are unreliable");
    }
    if (row.loo.n_high_k > 0) {
      report.notes.push_back(row.model + ": " + std::to_string(row.loo.n_high_k) +
                             " observation(s) with Pareto k > 0.7");
    }
    report.rows.push_back(std::move(row));
  }
  const bool mixed = std::any_of(report.rows.begin(), report.rows.end(), [&](const ModelRow& r) {
    return r.n_loglik_obs != report.rows.front().n_loglik_obs;
  });
  if (mixed) {
    std::string note = "log-likelihood criteria use different observation counts:";
    for (const auto& r : report.rows) note += " " + r.model + "=" + std::to_string(r.n_loglik_obs);
    report.notes.push_back(note);
  }
  return report;
}

void write_loglik_csv(std::ostream& out, const LogLikMatrix& m) {
  if (m.observations.size() != static_cast<std::size_t>(m.values.cols())) {
    throw ShapeError("one observation label per log-likelihood column required");
  }
  out << "draw";
  for (const auto& o : m.observations) out << ',' << csv_field(o);
  out << '\n';
  for (Eigen::Index s = 0; s < m.values.rows(); ++s) {
    out << s + 1;
    for (Eigen::Index i = 0; i < m.values.cols(); ++i) out << ',' << csv::format_double(m.values(s, i));
    out << '\n';
  }
}

LogLikMatrix read_loglik_csv(std::istream& in) {
  const auto doc = csv::read(in);
  if (doc.header.size() < 2 || doc.header.front() != "draw") {
    throw IngestError("log-likelihood file must start with a 'draw' column");
  }
  LogLikMatrix m;
  m.observations.assign(doc.header.begin() + 1, doc.header.end());
  m.values.resize(static_cast<Eigen::Index>(doc.rows.size()),
                  static_cast<Eigen::Index>(m.observations.size()));
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    if (doc.rows[r].size() != doc.header.size()) {
      throw ParseError(doc.line_numbers[r], "draw", "expected " + std::to_string(doc.header.size()) + " fields");
    }
    for (std::size_t c = 1; c < doc.header.size(); ++c) {
      const auto v = csv::parse_double(doc.rows[r][c]);
      if (!v) throw ParseError(doc.line_numbers[r], doc.header[c], "not a number");
      m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 1)) = *v;
    }
  }
  return m;
}

void write_point_loglik_csv(std::ostream& out, std::span<const std::string> observations,
                            std::span<const double> loglik) {
  if (observations.size() != loglik.size()) throw ShapeError("one label per log-likelihood value required");
  out << "observation,loglik\n";
  for (std::size_t i = 0; i < loglik.size(); ++i) {
    out << csv_field(observations[i]) << ',' << csv::format_double(loglik[i]) << '\n';
  }
}

std::vector<double> read_point_loglik_csv(std::istream& in) {
  const auto doc = csv::read(in);
  const auto col = doc.column("loglik");
  if (!col) throw IngestError("point log-likelihood file lacks a 'loglik' column");
  std::vector<double> out;
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    const auto v = *col < doc.rows[r].size() ? csv::parse_double(doc.rows[r][*col]) : std::nullopt;
    if (!v) throw ParseError(doc.line_numbers[r], "loglik", "not a number");
    out.push_back(*v);
  }
  return out;
}

void write_compare_csv(std::ostream& out, const ComparisonReport& report) {
  out << "model,dic,p_d,looic,elpd,se_elpd,rmse,mae,n_pareto_k_gt_0.7,fit_description\n";
  for (const auto& r : report.rows) {
    out << csv_field(r.model) << ',' << csv::format_double(r.dic.dic) << ','
        << csv::format_double(r.dic.p_d) << ',' << csv::format_double(r.loo.looic) << ','
        << csv::format_double(r.loo.elpd) << ',' << csv::format_double(r.loo.se) << ','
        << csv::format_double(r.rmse) << ',' << csv::format_double(r.mae) << ',' << r.loo.n_high_k
        << ',' << csv_field(r.fit_description) << '\n';
  }
}

void write_loo_csv(std::ostream& out, const ComparisonReport& report,
                   std::span<const std::vector<std::string>> observation_labels) {
  out << "model,observation,elpd_i,pareto_k\n";
  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    const auto& row = report.rows[r];
    for (std::size_t i = 0; i < row.loo.elpd_i.size(); ++i) {
      const std::string label = r < observation_labels.size() && i < observation_labels[r].size()
                                    ? observation_labels[r][i]
                                    : std::to_string(i + 1);
      out << csv_field(row.model) << ',' << csv_field(label) << ','
          << csv::format_double(row.loo.elpd_i[i]) << ',' << csv::format_double(row.loo.pareto_k[i])
          << '\n';
    }
  }
}

}  // namespace tmaxbayes
