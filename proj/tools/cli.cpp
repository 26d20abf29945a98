#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tmaxbayes/bsar.hpp"
#include "tmaxbayes/compare.hpp"
#include "tmaxbayes/csv.hpp"
#include "tmaxbayes/ctrw.hpp"
#include "tmaxbayes/errors.hpp"
#include "tmaxbayes/fitted.hpp"
#include "tmaxbayes/mcmc.hpp"
#include "tmaxbayes/series.hpp"
#include "tmaxbayes/stats.hpp"

namespace tmaxbayes::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr const char* kToolVersion = "0.1.0";
constexpr const char* kCtrwLabel = "CTRW";
constexpr const char* kBsarLabel = "BSAR";
constexpr const char* kCtrwDescription = "Dynamic (jump + waiting)";
constexpr const char* kBsarDescription = "Semiparametric GP + linear";
constexpr double kRhatWarn = 1.05;

struct DataArgs {
  std::string input;
  std::string column_map;
  bool allow_exceedance = false;
};

struct ChainArgs {
  std::size_t chains = 4;
  std::size_t iters = 10'000;
  std::size_t burnin = 2'000;
  std::size_t thin = 10;
  std::optional<std::uint64_t> seed;
};

struct FitArgs {
  DataArgs data;
  ChainArgs chain;
  std::string out;
  std::size_t basis_j = 20;
  std::size_t quad_nodes = 401;
  std::string band = "trend";
  bool fix_mean_wait = false;
};

struct SimulateArgs {
  std::string model = "ctrw";
  double mu = 0.0, tau = 0.0, alpha = 0.0, beta = 0.0;
  double t0 = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::optional<int> start_year;
  std::string out;
};

// ---------------------------------------------------------------- file helpers

fs::path ensure_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IngestError("cannot create output directory '" + dir + "'");
  return fs::path(dir);
}

template <class Writer>
void write_file(const fs::path& path, Writer&& writer) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IngestError("cannot write '" + path.string() + "'");
  writer(file);
  file.flush();
  if (!file) throw IngestError("error while writing '" + path.string() + "'");
}

std::ifstream open_artifact(const fs::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IngestError("missing " + path.filename().string() + " in '" + path.parent_path().string() + "'");
  return file;
}

Json read_json(const fs::path& path) {
  auto file = open_artifact(path);
  try {
    return Json::parse(file);
  } catch (const nlohmann::json::exception& e) {
    throw IngestError("malformed " + path.filename().string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const Json& j) {
  write_file(path, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

// ----------------------------------------------------------------- formatting

std::string fixed(double v, int digits = 4) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::vector<std::string> year_labels(const std::vector<int>& years) {
  std::vector<std::string> out;
  out.reserve(years.size());
  for (int y : years) out.push_back(std::to_string(y));
  return out;
}

void rule(std::ostream& out) { out << std::string(72, '-') << '\n'; }

// ------------------------------------------------------------------ data load

SeasonalTable load(const DataArgs& a) {
  LoadOptions options;
  options.columns = ColumnMap::parse(a.column_map);
  options.allow_seasonal_exceedance = a.allow_exceedance;
  return load_csv(a.input, options);
}

bool has_all_seasons(const SeasonalTable& table) {
  return std::all_of(kAllColumns.begin() + 1, kAllColumns.end(),
                     [&](Column c) { return table.has_complete(c); });
}

Json column_map_json(const DataArgs& a) {
  const ColumnMap m = ColumnMap::parse(a.column_map);
  Json j;
  j["year"] = m.year;
  for (Column c : kAllColumns) j[std::string(column_key(c))] = m.header_for(c);
  return j;
}

Json data_json(const DataArgs& a, const SeasonalTable& table) {
  Json j;
  j["input"] = a.input;
  j["column_map"] = column_map_json(a);
  j["allow_seasonal_exceedance"] = a.allow_exceedance;
  j["observations"] = table.size();
  j["first_year"] = table.years().front();
  j["last_year"] = table.years().back();
  return j;
}

McmcConfig mcmc_config(const ChainArgs& a) {
  McmcConfig c;
  c.chains = a.chains;
  c.iterations = a.iters;
  c.burn_in = a.burnin;
  c.thin = a.thin;
  c.seed = *a.seed;
  c.validate();
  if (c.retained_per_chain() == 0) throw ValidationError("no draws retained: raise --iters or lower --thin");
  return c;
}

Json mcmc_json(const McmcConfig& c) {
  Json j;
  j["chains"] = c.chains;
  j["iterations"] = c.iterations;
  j["burn_in"] = c.burn_in;
  j["thin"] = c.thin;
  j["retained_per_chain"] = c.retained_per_chain();
  j["initial_scale"] = c.initial_scale;
  j["init_jitter"] = c.init_jitter;
  return j;
}

// ------------------------------------------------------------------- summaries

struct Criteria {
  DicResult dic;
  LooResult loo;
  double rmse = 0.0;
  double mae = 0.0;
};

Criteria criteria(const LogLikMatrix& ll, std::span<const double> ll_mean, const FittedSeries& fitted,
                  std::size_t skip_first) {
  Criteria c;
  c.dic = dic(ll.values, ll_mean);
  c.loo = psis_loo(ll);
  const std::span<const double> obs(fitted.observed);
  const std::span<const double> fit(fitted.mean);
  c.rmse = rmse(obs.subspan(skip_first), fit.subspan(skip_first));
  c.mae = mae(obs.subspan(skip_first), fit.subspan(skip_first));
  return c;
}

void print_parameters(std::ostream& out, const PosteriorDraws& draws, std::span<const std::string> shown) {
  const auto rhat = split_rhat(draws);
  const auto n_eff = ess(draws);
  const auto summary = summarize(draws);
  out << std::left << std::setw(10) << "param" << std::right << std::setw(11) << "mean" << std::setw(11)
      << "sd" << std::setw(11) << "q2.5" << std::setw(11) << "q97.5" << std::setw(8) << "rhat"
      << std::setw(9) << "ess" << '\n';
  for (const auto& name : shown) {
    const auto j = draws.index_of(name);
    if (!j) continue;
    const auto& s = summary[*j];
    out << std::left << std::setw(10) << s.name << std::right << std::setw(11) << fixed(s.mean)
        << std::setw(11) << fixed(s.sd) << std::setw(11) << fixed(s.q025) << std::setw(11)
        << fixed(s.q975) << std::setw(8) << fixed(rhat[*j].value, 3) << std::setw(9)
        << fixed(n_eff[*j].value, 0) << '\n';
  }
  std::vector<std::string> slow;
  for (const auto& name : shown) {
    const auto j = draws.index_of(name);
    if (j && rhat[*j].value > kRhatWarn) slow.push_back(name);
  }
  if (!slow.empty()) {
    out << "warning: R-hat above " << fixed(kRhatWarn, 2) << " for";
    for (const auto& s : slow) out << ' ' << s;
    out << '\n';
  }
}

void print_acceptance(std::ostream& out, const PosteriorDraws& draws) {
  double lo = 1.0, hi = 0.0;
  for (const auto& chain : draws.acceptance) {
    for (double a : chain) {
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
  }
  out << "acceptance after burn-in: " << fixed(lo, 3) << " - " << fixed(hi, 3) << " across "
      << draws.block_names.size() << " updates x " << draws.num_chains() << " chains\n";
}

void print_criteria(std::ostream& out, const Criteria& c, std::size_t loglik_obs, std::size_t level_obs) {
  out << "DIC " << fixed(c.dic.dic, 3) << "  (p_D " << fixed(c.dic.p_d, 2) << ")   LOOIC "
      << fixed(c.loo.looic, 3) << "  (elpd " << fixed(c.loo.elpd, 3) << " +/- " << fixed(c.loo.se, 3)
      << ")\n";
  out << "RMSE " << fixed(c.rmse, 4) << "  MAE " << fixed(c.mae, 4) << "  on " << level_obs
      << " levels; likelihood criteria on " << loglik_obs << " observations\n";
  if (c.loo.n_high_k > 0) out << "warning: " << c.loo.n_high_k << " Pareto k above 0.7\n";
  if (c.loo.few_draws) out << "warning: fewer than 100 draws for PSIS-LOO\n";
}

void print_header(std::ostream& out, const std::string& title, const SeasonalTable& table,
                  const McmcConfig& config) {
  rule(out);
  out << title << ": " << table.size() << " years " << table.years().front() << "-"
      << table.years().back() << "; " << config.chains << " chains x " << config.iterations
      << " iterations, burn-in " << config.burn_in << ", thin " << config.thin << " -> "
      << config.chains * config.retained_per_chain() << " draws; seed " << config.seed << '\n';
  rule(out);
}

// ------------------------------------------------------------------ fit output

void write_fit_artifacts(const fs::path& dir, const Json& manifest, const PosteriorDraws& draws,
                         const FittedSeries& fitted, const LogLikMatrix& ll,
                         std::span<const double> ll_mean, const SeasonalTable& table) {
  write_json(dir / "manifest.json", manifest);
  write_file(dir / "draws.csv", [&](std::ostream& o) { write_draws_csv(o, draws); });
  write_file(dir / "summary.csv", [&](std::ostream& o) { write_summary_csv(o, draws); });
  write_file(dir / "fitted.csv", [&](std::ostream& o) { write_fitted_csv(o, fitted); });
  write_file(dir / "loglik.csv", [&](std::ostream& o) { write_loglik_csv(o, ll); });
  write_file(dir / "loglik_mean.csv",
             [&](std::ostream& o) { write_point_loglik_csv(o, ll.observations, ll_mean); });
  if (has_all_seasons(table)) {
    write_file(dir / "correlation.csv",
               [&](std::ostream& o) { write_correlation_csv(o, correlation_matrix(table)); });
  }
}

int fit_ctrw(const FitArgs& a, std::ostream& out) {
  const SeasonalTable table = load(a.data);
  const NormalizedSeries series = normalize(table);
  const McmcConfig config = mcmc_config(a.chain);
  ctrw::QuadratureRule quad;
  quad.nodes = a.quad_nodes;
  quad.validate();
  ctrw::FitOptions options;
  options.fix_mean_wait = a.fix_mean_wait;
  const fs::path dir = ensure_directory(a.out);

  const ctrw::Fit result = ctrw::fit(series, config, options);
  const FittedSeries fitted = ctrw::predict_one_step(result.draws, series, config.seed);
  const IncrementSeries inc = increments(series);
  const LogLikMatrix ll{ctrw::pointwise_loglik(result.draws, inc, quad), kCtrwLabel, year_labels(inc.years)};
  const std::vector<double> ll_mean = ctrw::pointwise_loglik(result.point_estimate, inc, quad);

  Json manifest;
  manifest["tool"] = "tmaxbayes";
  manifest["version"] = kToolVersion;
  manifest["command"] = "fit-ctrw";
  manifest["model"] = "ctrw";
  manifest["label"] = kCtrwLabel;
  manifest["fit_description"] = kCtrwDescription;
  manifest["seed"] = config.seed;
  manifest["data"] = data_json(a.data, table);
  manifest["mcmc"] = mcmc_json(config);
  Json model;
  model["quad_nodes"] = quad.nodes;
  model["quad_tail"] = quad.tail;
  model["fix_mean_wait"] = a.fix_mean_wait;
  model["predictive_samples_per_draw"] = 20;
  manifest["model_settings"] = model;
  const auto& pr = options.priors;
  manifest["priors"] = {{"mu", {{"normal_mean", pr.mu.mean}, {"normal_sd", pr.mu.sd}}},
                        {"tau", {{"half_normal_scale", pr.tau_scale}}},
                        {"log_alpha", {{"normal_mean", pr.log_alpha.mean}, {"normal_sd", pr.log_alpha.sd}}},
                        {"log_beta", {{"normal_mean", pr.log_beta.mean}, {"normal_sd", pr.log_beta.sd}}}};
  manifest["point_estimate"] = {{"mu", result.point_estimate.mu},
                                {"tau", result.point_estimate.tau},
                                {"alpha", result.point_estimate.alpha},
                                {"beta", result.point_estimate.beta}};
  write_fit_artifacts(dir, manifest, result.draws, fitted, ll, ll_mean, table);

  print_header(out, "Coupled CTRW fit", table, config);
  const std::vector<std::string> shown{"mu", "tau", "alpha", "beta"};
  print_parameters(out, result.draws, shown);
  out << "mean increment mu*alpha/beta: " << fixed(result.point_estimate.mean_increment(), 5)
      << " C/yr at the posterior centre\n";
  print_acceptance(out, result.draws);
  print_criteria(out, criteria(ll, ll_mean, fitted, 1), inc.size(), fitted.size() - 1);
  out << "outputs written to " << dir.string() << '\n';
  return kOk;
}

int fit_bsar(const FitArgs& a, std::ostream& out) {
  if (a.band != "trend" && a.band != "predictive") {
    throw ValidationError("--band must be 'trend' or 'predictive'");
  }
  const SeasonalTable table = load(a.data);
  const NormalizedSeries series = normalize(table);
  const McmcConfig config = mcmc_config(a.chain);
  if (a.basis_j < 1) throw ValidationError("--basis-J must be at least 1");
  bsar::FitOptions options;
  options.order = a.basis_j;
  const fs::path dir = ensure_directory(a.out);

  const bsar::Fit result = bsar::fit(series, config, options);
  const bsar::BasisSet basis(options.order, series.t);
  const bsar::Band band = a.band == "trend" ? bsar::Band::Trend : bsar::Band::Predictive;
  const FittedSeries fitted = bsar::predict(result.draws, series, basis, band, config.seed);
  const LogLikMatrix ll{bsar::pointwise_loglik(result.draws, series, basis), kBsarLabel,
                        year_labels(series.years)};
  const std::vector<double> ll_mean = bsar::plug_in_loglik(result.draws, series, basis);

  Json manifest;
  manifest["tool"] = "tmaxbayes";
  manifest["version"] = kToolVersion;
  manifest["command"] = "fit-bsar";
  manifest["model"] = "bsar";
  manifest["label"] = kBsarLabel;
  manifest["fit_description"] = kBsarDescription;
  manifest["seed"] = config.seed;
  manifest["data"] = data_json(a.data, table);
  manifest["mcmc"] = mcmc_json(config);
  Json model;
  model["basis_J"] = options.order;
  model["band"] = a.band;
  model["noise_samples_per_draw"] = 10;
  manifest["model_settings"] = model;
  const auto& pr = options.priors;
  manifest["priors"] = {{"beta0", {{"normal_sd", pr.coef_sd}}},
                        {"beta1", {{"normal_sd", pr.coef_sd}}},
                        {"sigma", {{"half_normal_scale", pr.sigma_scale}}},
                        {"gamma", {{"half_normal_scale", pr.gamma_scale}}},
                        {"psi", {{"exponential_rate", pr.psi_rate}}},
                        {"theta_j", "normal(0, exp(-j psi))"}};
  write_fit_artifacts(dir, manifest, result.draws, fitted, ll, ll_mean, table);

  print_header(out, "BSAR isotonic fit", table, config);
  const std::vector<std::string> shown{"beta0", "beta1", "sigma", "gamma", "psi"};
  print_parameters(out, result.draws, shown);
  out << "theta[0.." << options.order << "] summarised in summary.csv (f is invariant to the sign of theta)\n";
  print_acceptance(out, result.draws);
  print_criteria(out, criteria(ll, ll_mean, fitted, 0), series.size(), fitted.size());
  out << "band: " << a.band << "; outputs written to " << dir.string() << '\n';
  return kOk;
}

// ------------------------------------------------------------------ ingest

int ingest(const DataArgs& a, const std::string& out_dir, std::ostream& out) {
  const SeasonalTable table = load(a);
  const NormalizedSeries series = normalize(table);
  const IncrementSeries inc = increments(series);
  const fs::path dir = ensure_directory(out_dir);

  Json manifest;
  manifest["tool"] = "tmaxbayes";
  manifest["version"] = kToolVersion;
  manifest["command"] = "ingest";
  manifest["data"] = data_json(a, table);
  write_json(dir / "manifest.json", manifest);
  write_file(dir / "table.csv", [&](std::ostream& o) { write_table(o, table); });
  write_file(dir / "normalized.csv", [&](std::ostream& o) { write_normalized_csv(o, series); });
  write_file(dir / "increments.csv", [&](std::ostream& o) {
    o << "year,delta\n";
    for (std::size_t i = 0; i < inc.size(); ++i) o << inc.years[i] << ',' << csv::format_double(inc.deltas[i]) << '\n';
  });

  rule(out);
  out << "Ingested " << table.size() << " years " << table.years().front() << "-" << table.years().back()
      << " from " << a.input << '\n';
  rule(out);
  const auto& y = table.annual();
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  out << "annual max: mean " << fixed(mean(y), 3) << "  sd " << fixed(std::sqrt(sample_variance(y)), 3)
      << "  range " << fixed(*lo, 2) << " - " << fixed(*hi, 2) << '\n';
  out << "increments: mean " << fixed(mean(inc.deltas), 4) << "  sd "
      << fixed(std::sqrt(sample_variance(inc.deltas)), 4) << '\n';
  for (Column c : kAllColumns) {
    if (c == Column::Annual) continue;
    out << std::left << std::setw(14) << column_key(c) << std::right
        << (table.has_complete(c) ? "complete" : "missing or partial");
    if (table.has_complete(c)) out << "  r(annual) " << fixed(pearson(table.annual(), table.values(c)), 3);
    out << '\n';
  }
  if (has_all_seasons(table)) {
    write_file(dir / "correlation.csv",
               [&](std::ostream& o) { write_correlation_csv(o, correlation_matrix(table)); });
  }
  out << "outputs written to " << dir.string() << '\n';
  return kOk;
}

// ------------------------------------------------------------------ simulate

int simulate_cmd(const SimulateArgs& a, std::ostream& out) {
  if (a.model != "ctrw") throw ValidationError("only --model ctrw can be simulated");
  const ctrw::Params p{a.mu, a.tau, a.alpha, a.beta};
  const std::vector<double> series = ctrw::simulate(p, a.t0, a.n, a.seed);
  const fs::path path(a.out);
  if (path.has_parent_path()) ensure_directory(path.parent_path().string());
  write_file(path, [&](std::ostream& o) {
    if (a.start_year) {
      const ColumnMap m;
      o << m.year << ',' << m.annual << '\n';
      for (std::size_t i = 0; i < series.size(); ++i) {
        o << *a.start_year + static_cast<int>(i) << ',' << csv::format_double(series[i]) << '\n';
      }
    } else {
      o << "index,value\n";
      for (std::size_t i = 0; i < series.size(); ++i) o << i + 1 << ',' << csv::format_double(series[i]) << '\n';
    }
  });
  out << "simulated " << series.size() << " CTRW levels (mu " << a.mu << ", tau " << a.tau << ", alpha "
      << a.alpha << ", beta " << a.beta << ", seed " << a.seed << ") -> " << path.string() << '\n';
  return kOk;
}

// ------------------------------------------------------------------ compare

int compare_cmd(const std::vector<std::string>& runs, const std::string& out_dir, std::ostream& out) {
  if (runs.empty()) throw ValidationError("--runs needs at least one run directory");
  std::vector<ModelEntry> entries;
  std::vector<std::vector<std::string>> labels;
  Json inputs = Json::array();
  for (const auto& run : runs) {
    const fs::path dir(run);
    const Json manifest = read_json(dir / "manifest.json");
    const std::string model = manifest.value("model", "");
    if (model != "ctrw" && model != "bsar") {
      throw IngestError("run '" + run + "' is not a model fit (manifest model '" + model + "')");
    }
    ModelEntry e;
    {
      auto f = open_artifact(dir / "loglik.csv");
      e.loglik = read_loglik_csv(f);
    }
    e.loglik.model = manifest.value("label", model);
    {
      auto f = open_artifact(dir / "loglik_mean.csv");
      e.loglik_at_mean = read_point_loglik_csv(f);
    }
    FittedSeries fitted;
    {
      auto f = open_artifact(dir / "fitted.csv");
      fitted = read_fitted_csv(f);
    }
    // The first CTRW year has no one-step prediction.
    const std::size_t skip = model == "ctrw" ? 1 : 0;
    if (fitted.size() <= skip) throw ShapeError("fitted.csv in '" + run + "' has too few rows");
    e.observed.assign(fitted.observed.begin() + static_cast<std::ptrdiff_t>(skip), fitted.observed.end());
    e.fitted.assign(fitted.mean.begin() + static_cast<std::ptrdiff_t>(skip), fitted.mean.end());
    e.fit_description = manifest.value("fit_description", "");
    labels.push_back(e.loglik.observations);
    entries.push_back(std::move(e));
    inputs.push_back(run);
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto same = std::count_if(entries.begin(), entries.end(),
                                    [&](const ModelEntry& o) { return o.loglik.model == entries[i].loglik.model; });
    if (same > 1) entries[i].loglik.model += " (" + fs::path(runs[i]).filename().string() + ")";
  }

  const ComparisonReport report = compare(entries);
  const fs::path dir = ensure_directory(out_dir);
  Json manifest;
  manifest["tool"] = "tmaxbayes";
  manifest["version"] = kToolVersion;
  manifest["command"] = "compare";
  manifest["runs"] = inputs;
  write_json(dir / "manifest.json", manifest);
  write_file(dir / "compare.csv", [&](std::ostream& o) { write_compare_csv(o, report); });
  write_file(dir / "loo.csv", [&](std::ostream& o) { write_loo_csv(o, report, labels); });

  rule(out);
  out << "Model comparison (" << report.rows.size() << " models)\n";
  rule(out);
  out << std::left << std::setw(22) << "model" << std::right << std::setw(11) << "DIC" << std::setw(8)
      << "p_D" << std::setw(9) << "RMSE" << std::setw(9) << "MAE" << std::setw(11) << "LOOIC"
      << std::setw(9) << "se" << std::setw(6) << "k>.7" << '\n';
  for (const auto& r : report.rows) {
    out << std::left << std::setw(22) << r.model << std::right << std::setw(11) << fixed(r.dic.dic, 3)
        << std::setw(8) << fixed(r.dic.p_d, 2) << std::setw(9) << fixed(r.rmse, 4) << std::setw(9)
        << fixed(r.mae, 4) << std::setw(11) << fixed(r.loo.looic, 3) << std::setw(9) << fixed(r.loo.se, 3)
        << std::setw(6) << r.loo.n_high_k << '\n';
  }
  for (const auto& r : report.rows) out << r.model << ": " << r.fit_description << '\n';
  out << "RMSE/MAE are on temperature levels; CTRW levels are one-step-ahead predictions from year 2.\n";
  for (const auto& note : report.notes) out << "note: " << note << '\n';
  out << "outputs written to " << dir.string() << '\n';
  return kOk;
}

// ------------------------------------------------------------------ diagnose

int diagnose(const std::string& run, const std::string& out_dir, std::ostream& out) {
  const fs::path dir(run);
  PosteriorDraws draws;
  {
    auto f = open_artifact(dir / "draws.csv");
    draws = read_draws_csv(f);
  }
  const auto rhat = split_rhat(draws);
  const auto n_eff = ess(draws);
  const auto summary = summarize(draws);

  rule(out);
  out << "Diagnostics for " << run << ": " << draws.num_chains() << " chains x " << draws.draws_per_chain()
      << " draws, " << draws.num_params() << " parameters\n";
  rule(out);
  out << std::left << std::setw(14) << "param" << std::right << std::setw(9) << "rhat" << std::setw(10)
      << "ess" << std::setw(12) << "mean" << std::setw(12) << "sd" << '\n';
  std::size_t flagged = 0;
  for (std::size_t j = 0; j < draws.num_params(); ++j) {
    const bool bad = rhat[j].value > kRhatWarn;
    flagged += bad ? 1 : 0;
    out << std::left << std::setw(14) << draws.names[j] << std::right << std::setw(9)
        << fixed(rhat[j].value, 3) << std::setw(10) << fixed(n_eff[j].value, 0) << std::setw(12)
        << fixed(summary[j].mean) << std::setw(12) << fixed(summary[j].sd)
        << (bad ? "  R-hat high" : "") << (rhat[j].degenerate ? "  constant" : "") << '\n';
  }
  out << flagged << " of " << draws.num_params() << " parameters with R-hat above " << fixed(kRhatWarn, 2)
      << '\n';
  if (!out_dir.empty()) {
    const fs::path target = ensure_directory(out_dir);
    write_file(target / "diagnostics.csv", [&](std::ostream& o) { write_summary_csv(o, draws); });
    out << "diagnostics written to " << (target / "diagnostics.csv").string() << '\n';
  }
  return kOk;
}

// ------------------------------------------------------------------ plot data

int plot_data(const std::string& run, const std::string& out_dir, std::ostream& out) {
  const fs::path dir(run);
  FittedSeries fitted;
  {
    auto f = open_artifact(dir / "fitted.csv");
    fitted = read_fitted_csv(f);
  }
  const fs::path target = ensure_directory(out_dir);
  std::vector<std::string> written;
  const auto emit = [&](const std::string& name, auto&& writer) {
    write_file(target / name, writer);
    written.push_back(name);
  };
  const auto d = [](double v) { return csv::format_double(v); };

  emit("trend.csv", [&](std::ostream& o) {
    o << "year,observed\n";
    for (std::size_t i = 0; i < fitted.size(); ++i) o << fitted.years[i] << ',' << d(fitted.observed[i]) << '\n';
  });
  emit("overlay.csv", [&](std::ostream& o) {
    o << "year,observed,fitted\n";
    for (std::size_t i = 0; i < fitted.size(); ++i) {
      o << fitted.years[i] << ',' << d(fitted.observed[i]) << ',' << d(fitted.mean[i]) << '\n';
    }
  });
  emit("band.csv", [&](std::ostream& o) {
    o << "year,fit_mean,lo95,hi95\n";
    for (std::size_t i = 0; i < fitted.size(); ++i) {
      o << fitted.years[i] << ',' << d(fitted.mean[i]) << ',' << d(fitted.lo95[i]) << ',' << d(fitted.hi95[i])
        << '\n';
    }
  });
  emit("observed_vs_predicted.csv", [&](std::ostream& o) {
    o << "observed,predicted\n";
    for (std::size_t i = 0; i < fitted.size(); ++i) o << d(fitted.observed[i]) << ',' << d(fitted.mean[i]) << '\n';
  });
  if (fs::exists(dir / "correlation.csv")) {
    auto f = open_artifact(dir / "correlation.csv");
    const Eigen::MatrixXd m = read_correlation_csv(f);
    if (m.rows() != 5 || m.cols() != 5) throw ShapeError("correlation.csv is not 5 x 5");
    emit("correlation.csv", [&](std::ostream& o) { write_correlation_csv(o, CorrelationMatrix(m)); });
  }

  out << "plot data for " << run << " -> " << target.string() << ':';
  for (const auto& w : written) out << ' ' << w;
  out << '\n';
  return kOk;
}

// ------------------------------------------------------------------ wiring

void add_data_options(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--input", a.input, "CSV with YEAR, ANNUAL and optional seasonal columns")->required();
  cmd->add_option("--column-map", a.column_map, "Header overrides, e.g. \"annual=Tmax,year=Yr\"");
  cmd->add_flag("--allow-seasonal-exceedance", a.allow_exceedance,
                "Accept seasonal maxima above the annual maximum");
}

void add_chain_options(CLI::App* cmd, ChainArgs& a) {
  cmd->add_option("--seed", a.seed, "Master RNG seed")->required();
  cmd->add_option("--chains", a.chains, "Number of chains")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--iters", a.iters, "Iterations per chain")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--burnin", a.burnin, "Burn-in iterations")->capture_default_str();
  cmd->add_option("--thin", a.thin, "Thinning interval")->capture_default_str()->check(CLI::PositiveNumber);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian CTRW and isotonic-trend models for annual maximum temperature", "tmaxbayes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  DataArgs ingest_data;
  std::string ingest_out;
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate a temperature table and write normalized series");
  add_data_options(ingest_cmd, ingest_data);
  ingest_cmd->add_option("--out", ingest_out, "Output directory")->required();

  FitArgs ctrw_args;
  auto* ctrw_cmd = app.add_subcommand("fit-ctrw", "Fit the coupled continuous-time random walk");
  add_data_options(ctrw_cmd, ctrw_args.data);
  add_chain_options(ctrw_cmd, ctrw_args.chain);
  ctrw_cmd->add_option("--out", ctrw_args.out, "Run directory")->required();
  ctrw_cmd->add_option("--quad-nodes", ctrw_args.quad_nodes, "Simpson nodes for the marginal density (odd)")
      ->capture_default_str();
  ctrw_cmd->add_flag("--fix-mean-wait", ctrw_args.fix_mean_wait, "Constrain beta = alpha (unit-mean waits)");

  FitArgs bsar_args;
  auto* bsar_cmd = app.add_subcommand("fit-bsar", "Fit the isotonic spectral regression");
  add_data_options(bsar_cmd, bsar_args.data);
  add_chain_options(bsar_cmd, bsar_args.chain);
  bsar_cmd->add_option("--out", bsar_args.out, "Run directory")->required();
  bsar_cmd->add_option("--basis-J", bsar_args.basis_j, "Highest cosine frequency J")->capture_default_str();
  bsar_cmd->add_option("--band", bsar_args.band, "Credible band for fitted.csv")
      ->check(CLI::IsMember({"trend", "predictive"}))
      ->capture_default_str();

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate a synthetic series");
  sim_cmd->add_option("--model", sim.model, "Model to simulate")->check(CLI::IsMember({"ctrw"}))->capture_default_str();
  sim_cmd->add_option("--mu", sim.mu, "Mean jump size")->required();
  sim_cmd->add_option("--tau", sim.tau, "Jump-size sd")->required();
  sim_cmd->add_option("--alpha", sim.alpha, "Waiting-time shape")->required();
  sim_cmd->add_option("--beta", sim.beta, "Waiting-time rate")->required();
  sim_cmd->add_option("--n", sim.n, "Series length")->required();
  sim_cmd->add_option("--seed", sim.seed, "RNG seed")->required();
  sim_cmd->add_option("--t0", sim.t0, "Starting level")->capture_default_str();
  sim_cmd->add_option("--start-year", sim.start_year, "Write a YEAR,ANNUAL table starting at this year");
  sim_cmd->add_option("--out", sim.out, "Output CSV path")->required();

  std::vector<std::string> runs;
  std::string compare_out;
  auto* compare_cmd_app = app.add_subcommand("compare", "Compare fitted runs by DIC, LOOIC, RMSE and MAE");
  compare_cmd_app->add_option("--runs", runs, "Run directories")->required();
  compare_cmd_app->add_option("--out", compare_out, "Output directory")->required();

  std::string diag_in, diag_out;
  auto* diag_cmd = app.add_subcommand("diagnose", "Convergence diagnostics for a run");
  diag_cmd->add_option("--input", diag_in, "Run directory")->required();
  diag_cmd->add_option("--out", diag_out, "Directory for diagnostics.csv");

  std::string plot_in, plot_out;
  auto* plot_cmd = app.add_subcommand("plot-data", "Emit plot-ready CSVs from a run");
  plot_cmd->add_option("--input", plot_in, "Run directory")->required();
  plot_cmd->add_option("--out", plot_out, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    err << (sub ? sub->help() : app.help());
    return kInputFailure;
  }

  try {
    if (*ingest_cmd) return ingest(ingest_data, ingest_out, out);
    if (*ctrw_cmd) return fit_ctrw(ctrw_args, out);
    if (*bsar_cmd) return fit_bsar(bsar_args, out);
    if (*sim_cmd) return simulate_cmd(sim, out);
    if (*compare_cmd_app) return compare_cmd(runs, compare_out, out);
    if (*diag_cmd) return diagnose(diag_in, diag_out, out);
    if (*plot_cmd) return plot_data(plot_in, plot_out, out);
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what();
    if (!e.years().empty()) {
      err << " (years";
      for (int y : e.years()) err << ' ' << y;
      err << ')';
    }
    err << '\n';
    return kInputFailure;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kInputFailure;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumericalFailure;
  }
  return kInputFailure;
}

}  // namespace tmaxbayes::cli
