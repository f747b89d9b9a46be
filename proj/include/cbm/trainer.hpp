#pragma once

#include <optional>
#include <vector>

#include "cbm/dataset.hpp"
#include "cbm/exact.hpp"
#include "cbm/gradients.hpp"
#include "cbm/rbm.hpp"
#include "cbm/samplers.hpp"

namespace cbm {

enum class OffsetSource { Zero, DataMean, ModelMean, AverageDM, FixedHalf, RandomUniform };
enum class ReparamTiming { BeforeGradient, AfterGradient };

struct OffsetPolicy {
  OffsetSource visible_source = OffsetSource::DataMean;
  OffsetSource hidden_source = OffsetSource::DataMean;
  double nu_mu = 1.0;     // sliding factor; 1 disables the moving average
  double nu_lambda = 1.0;
  ReparamTiming timing = ReparamTiming::BeforeGradient;
  bool decoupled_offset_samples = false;  // separate chain feeds the offsets

  void validate() const {
    require(nu_mu > 0.0 && nu_mu <= 1.0 && nu_lambda > 0.0 && nu_lambda <= 1.0,
            "offset policy: sliding factors must lie in (0, 1]");
  }
};

enum class SamplerKind { Cd, Pcd, Pt, Exact };

struct SamplerConfig {
  SamplerKind kind = SamplerKind::Pt;
  int k = 1;       // Gibbs steps per update for CD/PCD
  int chains = 10; // tempered chains for PT
};

/// Which update path the trainer runs: gradient ascent on the centered
/// parameters themselves, or the equivalent centered update rule applied to
/// a normal RBM whose offsets live only inside the rule.
enum class UpdateAlgorithm { CenteredParams, CenteredGradientRule };

struct TrainConfig {
  double eta = 0.1;
  SamplerConfig sampler;
  Index batch_size = 0;  // 0 = full batch
  long updates = 50000;
  long eval_every = 50;
  std::uint64_t seed = 0;
  bool use_probabilities = true;
  BiasInit bias_init = BiasInit::InverseSigmoid;
  double weight_std = 0.01;
  UpdateAlgorithm algorithm = UpdateAlgorithm::CenteredParams;

  void validate() const {
    require(eta > 0.0, "train config: eta must be positive");
    require(batch_size >= 0, "train config: bad batch size");
    require(sampler.k >= 1 && sampler.chains >= 1, "train config: bad sampler settings");
  }
};

/// Transforms to zero offsets; the modeled distribution is unchanged.
inline RbmParams finalize_to_normal(const RbmParams& p) {
  return reparameterize(p, Vector::Zero(p.num_visible()), Vector::Zero(p.num_hidden()));
}

namespace detail {

inline Vector initial_offsets(OffsetSource source, const Vector& data_mean) {
  switch (source) {
    case OffsetSource::Zero:
      return Vector::Zero(data_mean.size());
    case OffsetSource::DataMean:
    case OffsetSource::ModelMean:
    case OffsetSource::AverageDM:
      return data_mean;
    case OffsetSource::FixedHalf:
    case OffsetSource::RandomUniform:
      return Vector::Constant(data_mean.size(), 0.5);
  }
  return data_mean;
}

inline Vector estimate_offsets(OffsetSource source, const Vector& data_mean,
                               const Vector& model_mean, const Vector& current, Rng& rng) {
  switch (source) {
    case OffsetSource::Zero:
      return Vector::Zero(current.size());
    case OffsetSource::DataMean:
      return data_mean;
    case OffsetSource::ModelMean:
      return model_mean;
    case OffsetSource::AverageDM:
      return 0.5 * (data_mean + model_mean);
    case OffsetSource::FixedHalf:
      return Vector::Constant(current.size(), 0.5);
    case OffsetSource::RandomUniform: {
      Vector v(current.size());
      for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform();
      return v;
    }
  }
  return current;
}

}  // namespace detail

/// Runs one of the two equivalent training loops for (centered) binary
/// RBMs: estimate offsets from the batch, smooth them with the sliding
/// factors, reparameterize, and ascend the (centered) gradient. Exclusive
/// owner of its parameters and chains.
class RbmTrainer {
 public:
  RbmTrainer(const Dataset& data, Index num_hidden, OffsetPolicy policy, TrainConfig cfg)
      : RbmTrainer(data, policy, cfg,
                   make_initial(data, num_hidden, policy, cfg)) {}

  /// Explicit initial state. For CenteredGradientRule `initial` must be a
  /// normal RBM; `mu0` / `lam0` are the offsets the update rule starts from.
  RbmTrainer(const Dataset& data, OffsetPolicy policy, TrainConfig cfg, RbmParams initial,
             std::optional<Vector> mu0 = std::nullopt, std::optional<Vector> lam0 = std::nullopt)
      : data_(data),
        rows_(data.expand()),
        policy_(policy),
        cfg_(cfg),
        p_(std::move(initial)),
        sampler_rng_(Rng::derive(cfg.seed, 2)),
        stats_rng_(Rng::derive(cfg.seed, 3)),
        offset_rng_(Rng::derive(cfg.seed, 4)),
        shuffle_rng_(Rng::derive(cfg.seed, 5)) {
    policy_.validate();
    cfg_.validate();
    p_.validate();
    mu_ = mu0 ? *mu0 : Vector(p_.mu);
    lam_ = lam0 ? *lam0 : Vector(p_.lam);
    if (cfg_.algorithm == UpdateAlgorithm::CenteredGradientRule) {
      require(p_.is_normal(), "trainer: centered gradient rule needs a normal RBM");
    } else {
      p_.mu = mu_;
      p_.lam = lam_;
    }
    const Index lanes = effective_batch_size();
    if (cfg_.sampler.kind == SamplerKind::Pcd)
      chain_ = ChainState::make_pcd(p_, lanes, Rng::derive(cfg_.seed, 1));
    else if (cfg_.sampler.kind == SamplerKind::Pt)
      chain_ = ChainState::make_pt(p_, lanes, cfg_.sampler.chains, Rng::derive(cfg_.seed, 1));
    if (policy_.decoupled_offset_samples && cfg_.sampler.kind != SamplerKind::Cd &&
        cfg_.sampler.kind != SamplerKind::Exact) {
      if (cfg_.sampler.kind == SamplerKind::Pcd)
        offset_chain_ = ChainState::make_pcd(p_, lanes, Rng::derive(cfg_.seed, 6));
      else
        offset_chain_ = ChainState::make_pt(p_, lanes, cfg_.sampler.chains, Rng::derive(cfg_.seed, 6));
    }
  }

  void step() {
    const Matrix batch = next_batch();
    BatchStats stats;
    if (cfg_.sampler.kind == SamplerKind::Exact) {
      stats = exact_batch_stats(p_, data_);
    } else {
      const Matrix model_x = sample_model_batch(batch);
      StatsOptions opt{cfg_.use_probabilities};
      stats = compute_batch_stats(p_, batch, model_x, opt, &stats_rng_);
    }

    Vector offs_mean_x = stats.mean_x_m;
    Vector offs_mean_h = stats.mean_h_m;
    if (offset_chain_) {
      const Matrix offs_x = advance(*offset_chain_);
      StatsOptions opt{cfg_.use_probabilities};
      const BatchStats off_stats = compute_batch_stats(p_, offs_x, offs_x, opt, &stats_rng_);
      offs_mean_x = off_stats.mean_x_m;
      offs_mean_h = off_stats.mean_h_m;
    }
    const Vector mu_new = detail::estimate_offsets(policy_.visible_source, stats.mean_x_d,
                                                   offs_mean_x, mu_, offset_rng_);
    const Vector lam_new = detail::estimate_offsets(policy_.hidden_source, stats.mean_h_d,
                                                    offs_mean_h, lam_, offset_rng_);

    if (policy_.timing == ReparamTiming::BeforeGradient) {
      shift_offsets(mu_new, lam_new);
      apply_gradient(stats);
    } else {
      apply_gradient(stats);
      shift_offsets(mu_new, lam_new);
    }
    ++step_count_;
  }

  long steps_done() const { return step_count_; }
  const Dataset& data() const { return data_; }
  const TrainConfig& config() const { return cfg_; }
  const OffsetPolicy& policy() const { return policy_; }

  /// Parameters in the trainer's own parameterization.
  const RbmParams& params() const { return p_; }
  const Vector& mu() const { return mu_; }
  const Vector& lam() const { return lam_; }

  /// The same model expressed as a normal RBM.
  RbmParams as_normal() const {
    return cfg_.algorithm == UpdateAlgorithm::CenteredParams ? finalize_to_normal(p_) : p_;
  }

  const GradientEstimate& last_gradient() const { return last_grad_; }
  const Vector& gradient_mu() const { return last_grad_mu_; }    // offsets used by the
  const Vector& gradient_lam() const { return last_grad_lam_; }  // most recent gradient

 private:
  static RbmParams make_initial(const Dataset& data, Index num_hidden, const OffsetPolicy& policy,
                                const TrainConfig& cfg) {
    Rng init_rng = Rng::derive(cfg.seed, 0);
    InitOptions opt;
    opt.bias_init = cfg.bias_init;
    opt.weight_std = cfg.weight_std;
    RbmParams p = init_params(data.column_means(), num_hidden, opt, init_rng);
    p.mu = detail::initial_offsets(policy.visible_source, data.column_means());
    p.lam = detail::initial_offsets(policy.hidden_source, Vector::Constant(num_hidden, 0.5));
    if (cfg.algorithm == UpdateAlgorithm::CenteredGradientRule) {
      // offsets are trainer state, not model state
      RbmParams normal = p;
      normal.mu.setZero();
      normal.lam.setZero();
      return normal;
    }
    return p;
  }

  Index effective_batch_size() const {
    if (cfg_.batch_size == 0 || cfg_.batch_size >= rows_.rows()) return rows_.rows();
    return cfg_.batch_size;
  }

  Matrix next_batch() {
    const Index bs = effective_batch_size();
    if (bs == rows_.rows()) return rows_;
    if (order_.empty() || batch_pos_ + bs > static_cast<Index>(order_.size())) {
      order_.resize(static_cast<std::size_t>(rows_.rows()));
      for (Index i = 0; i < rows_.rows(); ++i) order_[static_cast<std::size_t>(i)] = i;
      for (Index i = rows_.rows() - 1; i > 0; --i) {
        const Index j = static_cast<Index>(shuffle_rng_.uniform() * static_cast<double>(i + 1));
        std::swap(order_[static_cast<std::size_t>(i)], order_[static_cast<std::size_t>(j)]);
      }
      batch_pos_ = 0;
    }
    Matrix batch(bs, rows_.cols());
    for (Index r = 0; r < bs; ++r)
      batch.row(r) = rows_.row(order_[static_cast<std::size_t>(batch_pos_ + r)]);
    batch_pos_ += bs;
    return batch;
  }

  Matrix advance(ChainState& chain) {
    if (chain.kind == ChainKind::Pcd) {
      for (int s = 0; s < cfg_.sampler.k; ++s) (void)pcd_step(p_, chain);
      return chain.model_particles();
    }
    return pt_step(p_, chain);  // one sweep-swap round per update
  }

  Matrix sample_model_batch(const Matrix& batch) {
    switch (cfg_.sampler.kind) {
      case SamplerKind::Cd:
        return cd_sample(p_, batch, cfg_.sampler.k, sampler_rng_);
      case SamplerKind::Pcd:
      case SamplerKind::Pt:
        return advance(*chain_);
      case SamplerKind::Exact:
        break;
    }
    throw std::logic_error("sample_model_batch: exact sampler has no batch");
  }

  /// Reparameterize toward the new estimates with the sliding factors and
  /// update the offsets. For the centered-gradient rule only the offsets
  /// move; the stored parameters remain a normal RBM.
  void shift_offsets(const Vector& mu_new, const Vector& lam_new) {
    const Vector dmu = policy_.nu_mu * (mu_new - mu_);
    const Vector dlam = policy_.nu_lambda * (lam_new - lam_);
    if (cfg_.algorithm == UpdateAlgorithm::CenteredParams) {
      p_.b += p_.W * dlam;
      p_.c += p_.W.transpose() * dmu;
    }
    mu_ = (mu_ + dmu).cwiseMax(0.0).cwiseMin(1.0);
    lam_ = (lam_ + dlam).cwiseMax(0.0).cwiseMin(1.0);
    if (cfg_.algorithm == UpdateAlgorithm::CenteredParams) {
      p_.mu = mu_;
      p_.lam = lam_;
    }
  }

  void apply_gradient(const BatchStats& stats) {
    last_grad_mu_ = mu_;
    last_grad_lam_ = lam_;
    if (cfg_.algorithm == UpdateAlgorithm::CenteredParams)
      last_grad_ = centered_ll_gradient(p_, stats);
    else
      last_grad_ = centered_gradient(p_, stats, mu_, lam_);
    p_.W += cfg_.eta * last_grad_.dW;
    p_.b += cfg_.eta * last_grad_.db;
    p_.c += cfg_.eta * last_grad_.dc;
  }

  Dataset data_;
  Matrix rows_;
  OffsetPolicy policy_;
  TrainConfig cfg_;
  RbmParams p_;
  Vector mu_, lam_;
  std::optional<ChainState> chain_;
  std::optional<ChainState> offset_chain_;
  Rng sampler_rng_;
  Rng stats_rng_;
  Rng offset_rng_;
  Rng shuffle_rng_;
  long step_count_ = 0;
  Index batch_pos_ = 0;
  std::vector<Index> order_;
  GradientEstimate last_grad_;
  Vector last_grad_mu_, last_grad_lam_;
};

struct NaturalTrainConfig {
  double eta = 1.0;
  std::uint64_t seed = 0;
  BiasInit bias_init = BiasInit::InverseSigmoid;
  double weight_std = 0.01;
  NaturalGradientOptions solve;
  bool rescale_to_standard_norm = false;  // optional norm-matching variant
};

/// Exact natural-gradient ascent on a normal RBM; feasible only where the
/// Fisher matrix is.
class NaturalGradientTrainer {
 public:
  NaturalGradientTrainer(const Dataset& data, Index num_hidden, NaturalTrainConfig cfg)
      : data_(data), cfg_(cfg) {
    Rng init_rng = Rng::derive(cfg.seed, 0);
    InitOptions opt;
    opt.bias_init = cfg.bias_init;
    opt.weight_std = cfg.weight_std;
    p_ = init_params(data.column_means(), num_hidden, opt, init_rng);
    p_.mu.setZero();
    p_.lam.setZero();
  }

  void step() {
    const GradientEstimate standard = exact_standard_gradient(p_, data_);
    GradientEstimate g = solve_natural_gradient(fisher_matrix(p_), standard, cfg_.solve);
    if (cfg_.rescale_to_standard_norm) {
      const double gn = g.norm();
      if (gn > 0.0) {
        const double scale = standard.norm() / gn;
        g.dW *= scale;
        g.db *= scale;
        g.dc *= scale;
      }
    }
    p_.W += cfg_.eta * g.dW;
    p_.b += cfg_.eta * g.db;
    p_.c += cfg_.eta * g.dc;
    last_grad_ = std::move(g);
  }

  const RbmParams& params() const { return p_; }
  const GradientEstimate& last_gradient() const { return last_grad_; }

 private:
  Dataset data_;
  NaturalTrainConfig cfg_;
  RbmParams p_;
  GradientEstimate last_grad_;
};

}  // namespace cbm
