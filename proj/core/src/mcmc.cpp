#include "tmaxbayes/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "tmaxbayes/errors.hpp"
#include "tmaxbayes/stats.hpp"

namespace tmaxbayes {
namespace {

constexpr double kAdaptationExponent = 0.6;
constexpr double kMinLogScale = -30.0;
constexpr double kMaxLogScale = 10.0;
// A block counts as stuck when it never accepted during burn-in and its
// scale fell this far below the initial value.
constexpr double kStuckScaleRatio = 1e-3;

double to_unconstrained(double x, Transform t) { return t == Transform::Log ? std::log(x) : x; }
double to_constrained(double u, Transform t) { return t == Transform::Log ? std::exp(u) : u; }

struct BlockState {
  std::vector<std::size_t> members;
  double log_scale = 0.0;
  double target = 0.44;
  Eigen::MatrixXd chol;  // proposal shape, lower triangular
  bool shape_learned = false;

  // Running moments of the block on the unconstrained scale (burn-in only).
  std::size_t n_obs = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd m2;

  std::size_t burn_accepts = 0;
  std::size_t burn_tries = 0;
  std::size_t accepts = 0;
  std::size_t tries = 0;
};

struct ChainResult {
  Eigen::MatrixXd draws;
  Eigen::MatrixXd scales;
  std::vector<double> acceptance;
  std::vector<double> burn_in_acceptance;
  std::vector<double> adapted_scale;
};

class ChainRunner {
 public:
  ChainRunner(const TargetDensity& target, const McmcConfig& config, std::size_t chain)
      : target_(target), config_(config), chain_(chain), rng_(stream_seed(config.seed, chain)) {}

  ChainResult run(std::span<const double> init) {
    const std::size_t dim = target_.dim();
    x_.assign(init.begin(), init.end());
    jitter_start();

    blocks_.clear();
    for (const auto& members : target_.blocks) {
      BlockState b;
      b.members = members;
      b.log_scale = std::log(config_.initial_scale);
      b.target = config_.target_for(members.size());
      const auto d = static_cast<Eigen::Index>(members.size());
      b.chol = Eigen::MatrixXd::Identity(d, d);
      b.mean = Eigen::VectorXd::Zero(d);
      b.m2 = Eigen::MatrixXd::Zero(d, d);
      blocks_.push_back(std::move(b));
    }
    for (std::size_t m = 0; m < target_.joint_moves.size(); ++m) {
      BlockState b;
      b.log_scale = std::log(config_.initial_scale);
      b.target = config_.target_for(1);
      b.chol = Eigen::MatrixXd::Identity(1, 1);
      blocks_.push_back(std::move(b));
    }
    const std::size_t num_blocks = target_.blocks.size();

    const std::size_t kept = config_.retained_per_chain();
    ChainResult out;
    out.draws.resize(static_cast<Eigen::Index>(kept), static_cast<Eigen::Index>(dim));
    out.scales.resize(static_cast<Eigen::Index>(kept), static_cast<Eigen::Index>(blocks_.size()));
    out.adapted_scale.resize(blocks_.size(), config_.initial_scale);

    std::size_t row = 0;
    for (std::size_t iter = 1; iter <= config_.iterations; ++iter) {
      const bool adapting = iter <= config_.burn_in;
      for (std::size_t b = 0; b < num_blocks; ++b) update_block(b, iter, adapting);
      for (std::size_t m = 0; m < target_.joint_moves.size(); ++m) {
        update_joint(m, num_blocks + m, iter, adapting);
      }
      for (const auto& g : target_.gibbs_steps) g.draw(x_, rng_);

      if (iter == config_.burn_in) finish_burn_in(out);
      if (iter > config_.burn_in && (iter - config_.burn_in) % config_.thin == 0 && row < kept) {
        const auto r = static_cast<Eigen::Index>(row);
        for (std::size_t j = 0; j < dim; ++j) out.draws(r, static_cast<Eigen::Index>(j)) = x_[j];
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
          out.scales(r, static_cast<Eigen::Index>(b)) = std::exp(blocks_[b].log_scale);
        }
        ++row;
      }
    }
    if (config_.burn_in == 0) {
      for (std::size_t b = 0; b < blocks_.size(); ++b) {
        out.adapted_scale[b] = std::exp(blocks_[b].log_scale);
      }
    }

    for (const auto& b : blocks_) {
      out.acceptance.push_back(b.tries ? static_cast<double>(b.accepts) / b.tries : 0.0);
      out.burn_in_acceptance.push_back(
          b.burn_tries ? static_cast<double>(b.burn_accepts) / b.burn_tries : 0.0);
    }
    return out;
  }

 private:
  double block_density(std::size_t b) const {
    const double lp = target_.block_log_density ? target_.block_log_density(b, x_)
                                                : target_.log_density(x_);
    return std::isnan(lp) ? kNegInf : lp;
  }

  double log_jacobian(const BlockState& b) const {
    double lj = 0.0;
    for (std::size_t j : b.members) {
      if (target_.transforms[j] == Transform::Log) lj += std::log(x_[j]);
    }
    return lj;
  }

  void jitter_start() {
    if (config_.init_jitter <= 0.0) return;
    const std::vector<double> base = x_;
    std::normal_distribution<double> normal(0.0, config_.init_jitter);
    for (int attempt = 0; attempt < 50; ++attempt) {
      for (std::size_t j = 0; j < x_.size(); ++j) {
        const Transform t = target_.transforms[j];
        x_[j] = to_constrained(to_unconstrained(base[j], t) + normal(rng_), t);
      }
      if (std::isfinite(target_.log_density(x_))) return;
    }
    x_ = base;
  }

  void update_block(std::size_t bi, std::size_t iter, bool adapting) {
    BlockState& b = blocks_[bi];
    const std::size_t d = b.members.size();

    saved_.resize(d);
    for (std::size_t k = 0; k < d; ++k) saved_[k] = x_[b.members[k]];
    const double current = block_density(bi) + log_jacobian(b);

    z_.resize(static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < d; ++k) z_(static_cast<Eigen::Index>(k)) = normal_(rng_);
    const double scale = std::exp(b.log_scale);
    Eigen::VectorXd step = b.chol.triangularView<Eigen::Lower>() * z_;
    step *= scale;

    bool in_support = true;
    for (std::size_t k = 0; k < d; ++k) {
      const std::size_t j = b.members[k];
      const Transform t = target_.transforms[j];
      const double proposed = to_constrained(to_unconstrained(saved_[k], t) + step(static_cast<Eigen::Index>(k)), t);
      if (!std::isfinite(proposed) || (t == Transform::Log && !(proposed > 0.0))) in_support = false;
      x_[j] = proposed;
    }

    bool accepted = false;
    if (in_support) {
      const double proposal = block_density(bi) + log_jacobian(b);
      const double log_ratio = proposal - current;
      if (std::isfinite(proposal)) {
        accepted = log_ratio >= 0.0 || std::log(uniform_(rng_)) < log_ratio;
      }
    }
    if (!accepted) {
      for (std::size_t k = 0; k < d; ++k) x_[b.members[k]] = saved_[k];
    }
    record(b, iter, adapting, accepted);
  }

  void update_joint(std::size_t m, std::size_t bi, std::size_t iter, bool adapting) {
    BlockState& b = blocks_[bi];
    saved_ = x_;
    const double step = std::exp(b.log_scale) * normal_(rng_);
    const double log_ratio = target_.joint_moves[m].propose(x_, step);
    bool accepted = false;
    if (std::isfinite(log_ratio)) accepted = log_ratio >= 0.0 || std::log(uniform_(rng_)) < log_ratio;
    if (!accepted) x_ = saved_;
    record(b, iter, adapting, accepted);
  }

  void record(BlockState& b, std::size_t iter, bool adapting, bool accepted) {
    if (adapting) {
      ++b.burn_tries;
      if (accepted) ++b.burn_accepts;
      adapt(b, iter, accepted);
    } else {
      ++b.tries;
      if (accepted) ++b.accepts;
    }
  }

  void adapt(BlockState& b, std::size_t iter, bool accepted) {
    const double gain = std::pow(static_cast<double>(iter), -kAdaptationExponent);
    b.log_scale += gain * ((accepted ? 1.0 : 0.0) - b.target);
    b.log_scale = std::clamp(b.log_scale, kMinLogScale, kMaxLogScale);

    const std::size_t d = b.members.size();
    if (d < 2 || iter <= config_.burn_in / 5) return;

    // Welford update of the block's unconstrained moments.
    Eigen::VectorXd u(static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < d; ++k) {
      const std::size_t j = b.members[k];
      u(static_cast<Eigen::Index>(k)) = to_unconstrained(x_[j], target_.transforms[j]);
    }
    ++b.n_obs;
    const Eigen::VectorXd delta = u - b.mean;
    b.mean += delta / static_cast<double>(b.n_obs);
    b.m2 += delta * (u - b.mean).transpose();

    if (b.n_obs >= 2 * d + 20 && b.n_obs % 50 == 0) {
      Eigen::MatrixXd cov = b.m2 / static_cast<double>(b.n_obs - 1);
      cov.diagonal().array() += 1e-10;
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (llt.info() == Eigen::Success) {
        b.chol = llt.matrixL();
        b.chol *= 2.38 / std::sqrt(static_cast<double>(d));
        if (!b.shape_learned) {
          b.log_scale = 0.0;
          b.shape_learned = true;
        }
      }
    }
  }

  void finish_burn_in(ChainResult& out) {
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const BlockState& s = blocks_[b];
      out.adapted_scale[b] = std::exp(s.log_scale);
      const double effective = std::exp(s.log_scale) * s.chol.diagonal().maxCoeff();
      if (s.burn_tries > 0 && s.burn_accepts == 0 &&
          effective < kStuckScaleRatio * config_.initial_scale) {
        throw StuckChainError(chain_, b < target_.blocks.size()
                                          ? target_.block_name(b)
                                          : target_.joint_moves[b - target_.blocks.size()].name);
      }
    }
  }

  const TargetDensity& target_;
  const McmcConfig& config_;
  std::size_t chain_;
  Rng rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::vector<double> x_;
  std::vector<double> saved_;
  Eigen::VectorXd z_;
  std::vector<BlockState> blocks_;
};

}  // namespace

std::string TargetDensity::block_name(std::size_t b) const {
  if (b < block_names.size() && !block_names[b].empty()) return block_names[b];
  if (b < blocks.size() && !blocks[b].empty() && blocks[b].front() < names.size()) {
    return names[blocks[b].front()];
  }
  return "block" + std::to_string(b);
}

void TargetDensity::validate() const {
  if (!log_density) throw ShapeError("target has no log density");
  if (transforms.size() != names.size()) throw ShapeError("one transform per parameter required");
  for (const auto& m : joint_moves) {
    if (!m.propose) throw ShapeError("joint move '" + m.name + "' has no proposal");
  }
  std::vector<int> seen(names.size(), 0);
  for (const auto& block : blocks) {
    if (block.empty()) throw ShapeError("empty update block");
    for (std::size_t j : block) {
      if (j >= names.size()) throw ShapeError("block index out of range");
      ++seen[j];
    }
  }
  for (const auto& g : gibbs_steps) {
    if (!g.draw || g.members.empty()) throw ShapeError("Gibbs step '" + g.name + "' is incomplete");
    for (std::size_t j : g.members) {
      if (j >= names.size()) throw ShapeError("Gibbs member index out of range");
      ++seen[j];
    }
  }
  for (std::size_t j = 0; j < seen.size(); ++j) {
    if (seen[j] != 1) {
      throw ShapeError("parameter '" + names[j] + "' must belong to exactly one block");
    }
  }
}

void McmcConfig::validate() const {
  if (chains == 0) throw ValidationError("chains must be at least 1");
  if (thin == 0) throw ValidationError("thin must be at least 1");
  if (burn_in >= iterations) throw ValidationError("burn-in must be smaller than iterations");
  if (target_acceptance && !(*target_acceptance > 0.0 && *target_acceptance < 1.0)) {
    throw ValidationError("target acceptance must lie in (0, 1)");
  }
  if (!(initial_scale > 0.0)) throw ValidationError("initial proposal scale must be positive");
}

double McmcConfig::target_for(std::size_t block_dim) const noexcept {
  if (target_acceptance) return *target_acceptance;
  return block_dim <= 1 ? 0.44 : 0.234;
}

std::optional<std::size_t> PosteriorDraws::index_of(std::string_view name) const {
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j] == name) return j;
  }
  return std::nullopt;
}

std::vector<std::vector<double>> PosteriorDraws::per_chain(std::size_t param) const {
  std::vector<std::vector<double>> out;
  out.reserve(chains.size());
  for (const auto& c : chains) {
    const auto col = c.col(static_cast<Eigen::Index>(param));
    out.emplace_back(col.data(), col.data() + col.size());
  }
  return out;
}

std::vector<double> PosteriorDraws::pooled(std::size_t param) const {
  std::vector<double> out;
  out.reserve(total_draws());
  for (const auto& c : chains) {
    const auto col = c.col(static_cast<Eigen::Index>(param));
    out.insert(out.end(), col.data(), col.data() + col.size());
  }
  return out;
}

Eigen::MatrixXd PosteriorDraws::stacked() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(total_draws()), static_cast<Eigen::Index>(num_params()));
  Eigen::Index r = 0;
  for (const auto& c : chains) {
    out.middleRows(r, c.rows()) = c;
    r += c.rows();
  }
  return out;
}

std::vector<double> PosteriorDraws::unconstrained_mean() const {
  std::vector<double> out(num_params(), 0.0);
  const double n = static_cast<double>(total_draws());
  for (std::size_t j = 0; j < num_params(); ++j) {
    const Transform t = j < transforms.size() ? transforms[j] : Transform::Identity;
    double s = 0.0;
    for (const auto& c : chains) {
      for (Eigen::Index r = 0; r < c.rows(); ++r) s += to_unconstrained(c(r, static_cast<Eigen::Index>(j)), t);
    }
    out[j] = to_constrained(s / n, t);
  }
  return out;
}

PosteriorDraws run_chains(const TargetDensity& target, std::span<const double> init,
                          const McmcConfig& config) {
  target.validate();
  config.validate();
  if (init.size() != target.dim()) throw ShapeError("initial point has the wrong dimension");
  for (std::size_t j = 0; j < init.size(); ++j) {
    if (!std::isfinite(init[j]) || (target.transforms[j] == Transform::Log && !(init[j] > 0.0))) {
      throw InitError("initial value of '" + target.names[j] + "' is outside its support");
    }
  }
  if (!std::isfinite(target.log_density(init))) {
    throw InitError("log density is not finite at the initial point");
  }

  std::vector<ChainResult> results(config.chains);
  std::vector<std::exception_ptr> errors(config.chains);
  auto run_one = [&](std::size_t c) {
    try {
      ChainRunner runner(target, config, c);
      results[c] = runner.run(init);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };

  std::size_t workers = config.threads ? config.threads : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, config.chains);
  if (workers == 1) {
    for (std::size_t c = 0; c < config.chains; ++c) run_one(c);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < config.chains; c += workers) run_one(c);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  PosteriorDraws draws;
  draws.names = target.names;
  draws.transforms = target.transforms;
  for (std::size_t b = 0; b < target.blocks.size(); ++b) draws.block_names.push_back(target.block_name(b));
  for (const auto& m : target.joint_moves) draws.block_names.push_back(m.name);
  draws.config = config;
  for (std::size_t k = 1; k <= config.retained_per_chain(); ++k) {
    draws.iterations.push_back(config.burn_in + k * config.thin);
  }
  for (auto& r : results) {
    draws.chains.push_back(std::move(r.draws));
    draws.scale_trace.push_back(std::move(r.scales));
    draws.acceptance.push_back(std::move(r.acceptance));
    draws.burn_in_acceptance.push_back(std::move(r.burn_in_acceptance));
    draws.adapted_scale.push_back(std::move(r.adapted_scale));
  }
  return draws;
}

}  // namespace tmaxbayes
