#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace tmaxbayes {

/// Support transform of one parameter. Log-transformed parameters are strictly
/// positive and are proposed on the log scale; the engine adds the Jacobian.
enum class Transform { Identity, Log };

/// A posterior known up to a constant, on the constrained parameter scale.
struct TargetDensity {
  std::vector<std::string> names;
  std::vector<Transform> transforms;
  /// Partition of parameter indices into update blocks.
  std::vector<std::vector<std::size_t>> blocks;
  /// Optional labels for blocks; defaults to the first member's name.
  std::vector<std::string> block_names;

  std::function<double(std::span<const double>)> log_density;

  /// Optional. Log density up to terms that do not involve `block`. When set,
  /// block updates evaluate this instead of the full density.
  std::function<double(std::size_t block, std::span<const double>)> block_log_density;

  /// A Metropolis-Hastings move driven by one scalar step that may change many
  /// parameters through a deterministic invertible map. `propose` rewrites `x`
  /// in place and returns log(target ratio) plus the log Jacobian of the map,
  /// or -inf to reject. Its step scale adapts like a 1-D block.
  struct JointMove {
    std::string name;
    std::function<double(std::span<double> x, double step)> propose;
  };
  /// Applied in order after every sweep over `blocks`.
  std::vector<JointMove> joint_moves;

  /// An exact draw of `members` from their full conditional, always accepted.
  struct GibbsStep {
    std::string name;
    std::vector<std::size_t> members;
    std::function<void(std::span<double> x, std::mt19937_64& rng)> draw;
  };
  /// Applied in order after the joint moves. Members are excluded from `blocks`.
  std::vector<GibbsStep> gibbs_steps;

  std::size_t dim() const noexcept { return names.size(); }
  std::string block_name(std::size_t b) const;

  /// Throws ShapeError unless names/transforms agree and blocks together with
  /// Gibbs members partition {0..dim-1}.
  void validate() const;
};

struct McmcConfig {
  std::size_t chains = 4;
  std::size_t iterations = 10'000;
  std::size_t burn_in = 2'000;
  std::size_t thin = 10;
  std::uint64_t seed = 0;
  /// Per-block acceptance goal; unset means 0.44 for 1-D blocks and 0.234 otherwise.
  std::optional<double> target_acceptance;
  /// Proposal scale on the unconstrained scale at the start of every chain.
  double initial_scale = 0.1;
  /// Sd of the Gaussian perturbation applied to the unconstrained initial point per chain.
  double init_jitter = 0.1;
  /// Worker threads for chains; 0 uses the hardware concurrency.
  std::size_t threads = 0;

  /// Throws ValidationError on burn_in >= iterations, thin == 0 or chains == 0.
  void validate() const;
  std::size_t retained_per_chain() const noexcept { return (iterations - burn_in) / thin; }
  double target_for(std::size_t block_dim) const noexcept;
};

/// Retained draws on the constrained scale, one matrix per chain.
struct PosteriorDraws {
  std::vector<std::string> names;
  std::vector<Transform> transforms;
  std::vector<std::string> block_names;
  std::vector<Eigen::MatrixXd> chains;

  /// Acceptance rate per chain per block after burn-in. Joint moves follow the
  /// blocks in this and the other per-block fields.
  std::vector<std::vector<double>> acceptance;
  std::vector<std::vector<double>> burn_in_acceptance;
  /// Proposal scale of each block at every retained iteration (rows) per chain.
  std::vector<Eigen::MatrixXd> scale_trace;
  /// Scale per chain per block at the moment adaptation stopped.
  std::vector<std::vector<double>> adapted_scale;
  /// 1-based sampler iteration of each retained row.
  std::vector<std::size_t> iterations;

  McmcConfig config;

  std::size_t num_chains() const noexcept { return chains.size(); }
  std::size_t draws_per_chain() const noexcept {
    return chains.empty() ? 0 : static_cast<std::size_t>(chains.front().rows());
  }
  std::size_t num_params() const noexcept { return names.size(); }
  std::size_t total_draws() const noexcept { return num_chains() * draws_per_chain(); }

  std::optional<std::size_t> index_of(std::string_view name) const;
  /// One parameter split by chain.
  std::vector<std::vector<double>> per_chain(std::size_t param) const;
  /// One parameter pooled in chain-major order.
  std::vector<double> pooled(std::size_t param) const;
  /// All chains stacked, chain-major.
  Eigen::MatrixXd stacked() const;
  /// Posterior mean taken on the unconstrained scale, mapped back.
  std::vector<double> unconstrained_mean() const;
};

/// Adaptive random-walk Metropolis within Gibbs over the target's blocks.
/// Scales follow a Robbins-Monro recursion on the log scale during burn-in and
/// multi-dimensional blocks also learn a proposal covariance; both freeze
/// afterwards. Output is a pure function of (target, init, config).
PosteriorDraws run_chains(const TargetDensity& target, std::span<const double> init,
                          const McmcConfig& config);

struct ScalarDiagnostic {
  double value = 0.0;
  bool degenerate = false;
};

/// Split-chain potential scale reduction for a single parameter.
ScalarDiagnostic split_rhat(const std::vector<std::vector<double>>& chains);
/// Effective sample size by Geyer's initial monotone sequence over split chains.
ScalarDiagnostic effective_sample_size(const std::vector<std::vector<double>>& chains);

std::vector<ScalarDiagnostic> split_rhat(const PosteriorDraws& draws);
std::vector<ScalarDiagnostic> ess(const PosteriorDraws& draws);

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
};

ParamSummary summarize_values(std::string name, std::vector<double> values);
std::vector<ParamSummary> summarize(const PosteriorDraws& draws);

/// chain,iter,<names...>; one row per retained draw.
void write_draws_csv(std::ostream& out, const PosteriorDraws& draws);
/// Inverse of write_draws_csv. Transforms are not stored and come back as Identity.
PosteriorDraws read_draws_csv(std::istream& in);
/// param,rhat,ess,mean,sd,q2.5,q50,q97.5
void write_summary_csv(std::ostream& out, const PosteriorDraws& draws);

}  // namespace tmaxbayes
