#pragma once

#include <optional>
#include <vector>

#include "cbm/exact.hpp"
#include "cbm/gradients.hpp"
#include "cbm/rbm.hpp"
#include "cbm/samplers.hpp"
#include "cbm/trainer.hpp"

namespace cbm {

/// Layered binary Boltzmann machine with bipartite connections between
/// adjacent layers only. Layer 0 is the visible layer. All layers carry
/// offsets.
struct DbmParams {
  std::vector<Matrix> Ws;   // Ws[l]: size(l) x size(l+1)
  std::vector<Vector> bs;   // one bias vector per layer
  std::vector<Vector> lams; // one offset vector per layer

  Index num_layers() const { return static_cast<Index>(bs.size()); }
  Index layer_size(Index l) const { return bs[static_cast<std::size_t>(l)].size(); }

  std::vector<Index> layer_sizes() const {
    std::vector<Index> out;
    for (const auto& b : bs) out.push_back(b.size());
    return out;
  }

  static DbmParams zeros(const std::vector<Index>& sizes) {
    require(sizes.size() >= 2, "dbm: need at least two layers");
    DbmParams p;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
      p.Ws.push_back(Matrix::Zero(sizes[l], sizes[l + 1]));
    for (Index s : sizes) {
      p.bs.push_back(Vector::Zero(s));
      p.lams.push_back(Vector::Zero(s));
    }
    return p;
  }

  void validate() const {
    require(bs.size() >= 2 && bs.size() == lams.size() && Ws.size() + 1 == bs.size(),
            "dbm: inconsistent layer counts");
    for (std::size_t l = 0; l < Ws.size(); ++l)
      require(Ws[l].rows() == bs[l].size() && Ws[l].cols() == bs[l + 1].size(),
              "dbm: weight shape mismatch at layer " + std::to_string(l));
    for (const auto& lam : lams)
      require((lam.array() >= 0.0).all() && (lam.array() <= 1.0).all(), "dbm: offsets out of [0,1]");
  }
};

/// E = -sum_l (h_l - lam_l)' b_l - sum_l (h_l - lam_l)' W_l (h_{l+1} - lam_{l+1})
inline double dbm_energy(const DbmParams& p, const std::vector<Vector>& states) {
  require(static_cast<Index>(states.size()) == p.num_layers(), "dbm_energy: one state per layer");
  double e = 0.0;
  for (std::size_t l = 0; l < states.size(); ++l) e -= (states[l] - p.lams[l]).dot(p.bs[l]);
  for (std::size_t l = 0; l + 1 < states.size(); ++l)
    e -= (states[l] - p.lams[l]).dot(p.Ws[l] * (states[l + 1] - p.lams[l + 1]));
  return e;
}

/// Mapping of each DBM layer into the flattened two-layer model: even
/// layers concatenate into the visible side, odd layers into the hidden
/// side.
struct FlattenedDbm {
  RbmParams rbm;
  std::vector<Index> layer_offset;  // start of each layer within its side
  std::vector<bool> layer_is_visible_side;

  /// Concatenates per-layer states into (visible, hidden) of the flat model.
  std::pair<Vector, Vector> pack(const std::vector<Vector>& states) const {
    Vector x(rbm.num_visible()), h(rbm.num_hidden());
    for (std::size_t l = 0; l < states.size(); ++l) {
      auto& side = layer_is_visible_side[l] ? x : h;
      side.segment(layer_offset[l], states[l].size()) = states[l];
    }
    return {x, h};
  }
};

/// Equivalent shallow model: absent inter-layer connections become
/// structural zeros; the joint distribution over all units is unchanged.
inline FlattenedDbm flatten_to_rbm(const DbmParams& p) {
  p.validate();
  const Index layers = p.num_layers();
  FlattenedDbm out;
  out.layer_offset.resize(static_cast<std::size_t>(layers));
  out.layer_is_visible_side.resize(static_cast<std::size_t>(layers));
  Index n = 0, m = 0;
  for (Index l = 0; l < layers; ++l) {
    const bool vis = l % 2 == 0;
    out.layer_is_visible_side[static_cast<std::size_t>(l)] = vis;
    out.layer_offset[static_cast<std::size_t>(l)] = vis ? n : m;
    (vis ? n : m) += p.layer_size(l);
  }
  out.rbm = RbmParams::zeros(n, m);
  for (Index l = 0; l < layers; ++l) {
    const auto lu = static_cast<std::size_t>(l);
    const Index off = out.layer_offset[lu];
    if (out.layer_is_visible_side[lu]) {
      out.rbm.b.segment(off, p.layer_size(l)) = p.bs[lu];
      out.rbm.mu.segment(off, p.layer_size(l)) = p.lams[lu];
    } else {
      out.rbm.c.segment(off, p.layer_size(l)) = p.bs[lu];
      out.rbm.lam.segment(off, p.layer_size(l)) = p.lams[lu];
    }
  }
  for (Index l = 0; l + 1 < layers; ++l) {
    const auto lu = static_cast<std::size_t>(l);
    const Index row = out.layer_offset[lu];
    const Index col = out.layer_offset[lu + 1];
    if (out.layer_is_visible_side[lu]) {
      // even -> odd: resident orientation
      out.rbm.W.block(row, col, p.Ws[lu].rows(), p.Ws[lu].cols()) = p.Ws[lu];
    } else {
      // odd -> even: transpose into (visible, hidden) orientation
      out.rbm.W.block(col, row, p.Ws[lu].cols(), p.Ws[lu].rows()) = p.Ws[lu].transpose();
    }
  }
  return out;
}

/// ln Z of the DBM via the flattened model.
inline double dbm_log_partition(const DbmParams& p) { return log_partition(flatten_to_rbm(p).rbm); }

namespace detail {

/// ln sum over all non-visible units of e^{-E} with layer 0 clamped to x.
inline double dbm_log_unnormalized_marginal(const FlattenedDbm& flat, const Vector& x) {
  const RbmParams& r = flat.rbm;
  const Index n0 = x.size();
  detail::check_enumeration_capacity(r.num_hidden(), "dbm marginal");
  LogSumExp lse;
  const std::uint64_t states = 1ULL << r.num_hidden();
  for (std::uint64_t s = 0; s < states; ++s) {
    const Vector h = bits_to_vector(s, r.num_hidden());
    const Vector hc = h - r.lam;
    const Vector g = r.b + r.W * hc;  // per-visible-unit fields
    double term = r.c.dot(hc);
    for (Index i = 0; i < r.num_visible(); ++i) {
      if (i < n0) {
        term += (x[i] - r.mu[i]) * g[i];  // clamped visible unit
      } else {
        // free even-layer unit: sum over {0, 1}
        term += -r.mu[i] * g[i] + softplus(g[i]);
      }
    }
    lse.add(term);
  }
  return lse.value();
}

}  // namespace detail

/// Exact log-likelihood of visible data under the DBM (all hidden layers
/// summed out), with the dataset's normalization convention.
inline double dbm_log_likelihood_exact(const DbmParams& p, const Dataset& d) {
  require(d.num_variables() == p.layer_size(0), "dbm_log_likelihood_exact: dimension mismatch");
  const FlattenedDbm flat = flatten_to_rbm(p);
  const double log_z = log_partition(flat.rbm);
  double s = 0.0;
  for (Index r = 0; r < d.num_patterns(); ++r)
    s += d.weights[r] *
         (detail::dbm_log_unnormalized_marginal(flat, d.patterns.row(r).transpose()) - log_z);
  if (d.ll_norm == LlNormalization::PerSample) s /= d.total_weight();
  return s;
}

struct MeanFieldOptions {
  double tol = 1e-4;
  int max_iters = 50;
  double damping = 0.5;
};

struct MeanFieldResult {
  std::vector<Matrix> means;  // per layer, rows = batch samples; layer 0 = data
  bool converged = true;
};

namespace detail {

inline Matrix dbm_layer_field(const DbmParams& p, Index l, const Matrix* below,
                              const Matrix* above, Index rows) {
  Matrix act = Matrix::Zero(rows, p.layer_size(l));
  act.rowwise() += p.bs[static_cast<std::size_t>(l)].transpose();
  if (below) {
    const auto wl = static_cast<std::size_t>(l - 1);
    act += (below->rowwise() - p.lams[wl].transpose()) * p.Ws[wl];
  }
  if (above) {
    const auto wl = static_cast<std::size_t>(l);
    act += (above->rowwise() - p.lams[wl + 1].transpose()) * p.Ws[wl].transpose();
  }
  return act;
}

}  // namespace detail

/// Factorized variational posterior over the hidden layers for a batch of
/// clamped visible rows: damped fixed-point iteration of the layerwise
/// sigmoid updates, initialized by a bottom-up pass.
inline MeanFieldResult mean_field_posterior(const DbmParams& p, const Matrix& x,
                                            const MeanFieldOptions& opt = {}) {
  require(opt.tol > 0.0 && opt.max_iters >= 1, "mean_field: bad options");
  require(x.cols() == p.layer_size(0), "mean_field: dimension mismatch");
  const Index layers = p.num_layers();
  const Index rows = x.rows();
  MeanFieldResult result;
  result.means.resize(static_cast<std::size_t>(layers));
  result.means[0] = x;
  for (Index l = 1; l < layers; ++l) {
    const Matrix act =
        detail::dbm_layer_field(p, l, &result.means[static_cast<std::size_t>(l - 1)], nullptr, rows);
    result.means[static_cast<std::size_t>(l)] =
        act.unaryExpr([](double v) { return sigmoid(v); });
  }
  if (layers == 2) return result;  // single hidden layer: already exact

  for (int iter = 0; iter < opt.max_iters; ++iter) {
    double change = 0.0;
    for (Index l = 1; l < layers; ++l) {
      const auto lu = static_cast<std::size_t>(l);
      const Matrix* below = &result.means[lu - 1];
      const Matrix* above = l + 1 < layers ? &result.means[lu + 1] : nullptr;
      const Matrix target = detail::dbm_layer_field(p, l, below, above, rows)
                                .unaryExpr([](double v) { return sigmoid(v); });
      const Matrix updated =
          (1.0 - opt.damping) * result.means[lu] + opt.damping * target;
      change = std::max(change, (updated - result.means[lu]).cwiseAbs().maxCoeff());
      result.means[lu] = updated;
    }
    if (change < opt.tol) return result;
  }
  result.converged = false;
  return result;
}

/// Variational lower bound on the summed log-likelihood:
/// -<E>_q + H(q) - ln Z per pattern.
inline double dbm_variational_bound(const DbmParams& p, const Dataset& d,
                                    const MeanFieldOptions& opt = {}) {
  const double log_z = dbm_log_partition(p);
  const MeanFieldResult mf = mean_field_posterior(p, d.patterns, opt);
  double total = 0.0;
  for (Index r = 0; r < d.num_patterns(); ++r) {
    std::vector<Vector> means;
    for (const auto& layer : mf.means) means.push_back(layer.row(r).transpose());
    double bound = -dbm_energy(p, means) - log_z;
    for (std::size_t l = 1; l < means.size(); ++l)
      for (Index j = 0; j < means[l].size(); ++j) {
        const double m = std::clamp(means[l][j], 1e-12, 1.0 - 1e-12);
        bound -= m * std::log(m) + (1.0 - m) * std::log(1.0 - m);
      }
    total += d.weights[r] * bound;
  }
  if (d.ll_norm == LlNormalization::PerSample) total /= d.total_weight();
  return total;
}

/// Persistent fantasy particles for DBM training; per-temperature replicas
/// as in the RBM chains.
struct DbmChain {
  ChainKind kind = ChainKind::Pcd;
  // states[t][l]: particle states of layer l at temperature t
  std::vector<std::vector<Matrix>> states;
  Vector inv_temps;
  Rng rng;
  long swap_round = 0;

  static DbmChain make(const DbmParams& p, Index particles, const SamplerConfig& cfg, Rng rng) {
    DbmChain c{cfg.kind == SamplerKind::Pt ? ChainKind::Pt : ChainKind::Pcd,
               {},
               cfg.kind == SamplerKind::Pt ? uniform_inv_temps(cfg.chains) : uniform_inv_temps(1),
               std::move(rng)};
    c.states.resize(static_cast<std::size_t>(c.inv_temps.size()));
    for (auto& replica : c.states) {
      replica.resize(static_cast<std::size_t>(p.num_layers()));
      for (Index l = 0; l < p.num_layers(); ++l) {
        Matrix& s = replica[static_cast<std::size_t>(l)];
        s.resize(particles, p.layer_size(l));
        for (Index r = 0; r < particles; ++r)
          for (Index j = 0; j < s.cols(); ++j) s(r, j) = c.rng.bernoulli(0.5) ? 1.0 : 0.0;
      }
    }
    return c;
  }
};

namespace detail {

/// One even-odd block Gibbs sweep over all layers at inverse temperature
/// beta: odd layers given evens, then even layers given odds.
inline void dbm_gibbs_sweep(const DbmParams& p, std::vector<Matrix>& states, double beta,
                            Rng& rng) {
  const Index layers = p.num_layers();
  const Index rows = states[0].rows();
  auto sample_layer = [&](Index l) {
    const auto lu = static_cast<std::size_t>(l);
    const Matrix* below = l > 0 ? &states[lu - 1] : nullptr;
    const Matrix* above = l + 1 < layers ? &states[lu + 1] : nullptr;
    const Matrix act = beta * dbm_layer_field(p, l, below, above, rows);
    for (Index r = 0; r < rows; ++r)
      for (Index j = 0; j < act.cols(); ++j)
        states[lu](r, j) = rng.bernoulli(sigmoid(act(r, j))) ? 1.0 : 0.0;
  };
  for (Index l = 1; l < layers; l += 2) sample_layer(l);
  for (Index l = 0; l < layers; l += 2) sample_layer(l);
}

inline std::vector<Vector> particle_states(const std::vector<Matrix>& replica, Index r) {
  std::vector<Vector> out;
  for (const auto& layer : replica) out.push_back(layer.row(r).transpose());
  return out;
}

}  // namespace detail

/// Advances the DBM chain one sweep (plus the even-odd swap phase for
/// tempered chains) and returns the beta = 1 particle states per layer.
inline const std::vector<Matrix>& dbm_chain_step(const DbmParams& p, DbmChain& chain) {
  const auto temps = static_cast<Index>(chain.inv_temps.size());
  for (Index t = 0; t < temps; ++t)
    detail::dbm_gibbs_sweep(p, chain.states[static_cast<std::size_t>(t)], chain.inv_temps[t],
                            chain.rng);
  if (chain.kind == ChainKind::Pt) {
    const Index start = chain.swap_round % 2 == 0 ? 0 : 1;
    const Index rows = chain.states[0][0].rows();
    for (Index t = start; t + 1 < temps; t += 2) {
      auto& a = chain.states[static_cast<std::size_t>(t)];
      auto& b = chain.states[static_cast<std::size_t>(t + 1)];
      const double dbeta = chain.inv_temps[t] - chain.inv_temps[t + 1];
      for (Index r = 0; r < rows; ++r) {
        const double ea = dbm_energy(p, detail::particle_states(a, r));
        const double eb = dbm_energy(p, detail::particle_states(b, r));
        if (std::log(chain.rng.uniform()) < dbeta * (ea - eb))
          for (std::size_t l = 0; l < a.size(); ++l) a[l].row(r).swap(b[l].row(r));
      }
    }
    ++chain.swap_round;
  }
  return chain.states.back();
}

/// Per-layer offset sources with shared sliding factors and timing.
struct DbmOffsetPolicy {
  std::vector<OffsetSource> sources;  // one per layer
  double nu = 1.0;
  ReparamTiming timing = ReparamTiming::BeforeGradient;
};

struct DbmTrainConfig {
  double eta = 0.1;
  SamplerConfig sampler;
  long updates = 5000;
  std::uint64_t seed = 0;
  BiasInit bias_init = BiasInit::InverseSigmoid;
  double weight_std = 0.01;
  MeanFieldOptions mean_field;
};

/// Centered DBM trainer: data term from the mean-field posterior, model
/// term from persistent (tempered) fantasy particles, per-layer offsets
/// with reparameterization of the neighboring biases.
class DbmTrainer {
 public:
  DbmTrainer(const Dataset& data, std::vector<Index> hidden_sizes, DbmOffsetPolicy policy,
             DbmTrainConfig cfg)
      : DbmTrainer(data, policy, cfg, default_init(data, hidden_sizes, policy, cfg)) {}

  DbmTrainer(const Dataset& data, DbmOffsetPolicy policy, DbmTrainConfig cfg, DbmParams initial)
      : data_(data),
        rows_(data.expand()),
        policy_(std::move(policy)),
        cfg_(cfg),
        p_(std::move(initial)),
        offset_rng_(Rng::derive(cfg.seed, 4)) {
    p_.validate();
    require(static_cast<Index>(policy_.sources.size()) == p_.num_layers(),
            "dbm trainer: one offset source per layer");
    require(cfg_.sampler.kind == SamplerKind::Pcd || cfg_.sampler.kind == SamplerKind::Pt,
            "dbm trainer: model side needs a persistent sampler");
    chain_ = DbmChain::make(p_, rows_.rows(), cfg_.sampler, Rng::derive(cfg_.seed, 1));
  }

  void step() {
    const Index layers = p_.num_layers();
    // data side: clamped visibles, mean-field hidden means
    const MeanFieldResult mf = mean_field_posterior(p_, rows_, cfg_.mean_field);

    // model side: fantasy particles; odd layers Rao-Blackwellized given the
    // final even states
    std::vector<Matrix> model(static_cast<std::size_t>(layers));
    const auto& particles = advance_chain();
    const Index rows = particles[0].rows();
    for (Index l = 0; l < layers; ++l) {
      const auto lu = static_cast<std::size_t>(l);
      if (l % 2 == 0) {
        model[lu] = particles[lu];
      } else {
        const Matrix* below = &particles[lu - 1];
        const Matrix* above = l + 1 < layers ? &particles[lu + 1] : nullptr;
        model[lu] = detail::dbm_layer_field(p_, l, below, above, rows)
                        .unaryExpr([](double v) { return sigmoid(v); });
      }
    }

    // per adjacent pair, through the same statistics assembly as the RBM
    std::vector<BatchStats> pair_stats(static_cast<std::size_t>(layers - 1));
    for (Index l = 0; l + 1 < layers; ++l) {
      const auto lu = static_cast<std::size_t>(l);
      const auto d = detail::assemble_side_stats(mf.means[lu], mf.means[lu + 1], nullptr);
      const auto m = detail::assemble_side_stats(model[lu], model[lu + 1], nullptr);
      BatchStats& s = pair_stats[lu];
      s.mean_x_d = d.mean_x;
      s.mean_h_d = d.mean_h;
      s.corr_d = d.corr;
      s.cov_d = d.cov;
      s.mean_x_m = m.mean_x;
      s.mean_h_m = m.mean_h;
      s.corr_m = m.corr;
      s.cov_m = m.cov;
    }
    auto mean_d = [&](Index l) -> const Vector& {
      return l + 1 < layers ? pair_stats[static_cast<std::size_t>(l)].mean_x_d
                            : pair_stats[static_cast<std::size_t>(l - 1)].mean_h_d;
    };
    auto mean_m = [&](Index l) -> const Vector& {
      return l + 1 < layers ? pair_stats[static_cast<std::size_t>(l)].mean_x_m
                            : pair_stats[static_cast<std::size_t>(l - 1)].mean_h_m;
    };

    std::vector<Vector> new_lams(static_cast<std::size_t>(layers));
    for (Index l = 0; l < layers; ++l) {
      const auto lu = static_cast<std::size_t>(l);
      new_lams[lu] = detail::estimate_offsets(policy_.sources[lu], mean_d(l), mean_m(l),
                                              p_.lams[lu], offset_rng_);
    }

    auto gradient = [&]() {
      for (Index l = 0; l + 1 < layers; ++l) {
        const auto lu = static_cast<std::size_t>(l);
        RbmParams pair = RbmParams::zeros(p_.layer_size(l), p_.layer_size(l + 1));
        pair.W = p_.Ws[lu];
        pair.mu = p_.lams[lu];
        pair.lam = p_.lams[lu + 1];
        const GradientEstimate g = centered_ll_gradient(pair, pair_stats[lu]);
        p_.Ws[lu] += cfg_.eta * g.dW;
      }
      for (Index l = 0; l < layers; ++l) {
        const auto lu = static_cast<std::size_t>(l);
        p_.bs[lu] += cfg_.eta * (mean_d(l) - mean_m(l));
      }
    };

    if (policy_.timing == ReparamTiming::BeforeGradient) {
      shift_offsets(new_lams);
      gradient();
    } else {
      gradient();
      shift_offsets(new_lams);
    }
    ++steps_;
  }

  const DbmParams& params() const { return p_; }
  long steps_done() const { return steps_; }

 private:
  static DbmParams default_init(const Dataset& data, const std::vector<Index>& hidden_sizes,
                                const DbmOffsetPolicy& policy, const DbmTrainConfig& cfg) {
    std::vector<Index> sizes;
    sizes.push_back(data.num_variables());
    for (Index h : hidden_sizes) sizes.push_back(h);
    DbmParams p = DbmParams::zeros(sizes);
    Rng init_rng = Rng::derive(cfg.seed, 0);
    for (auto& w : p.Ws)
      for (Index i = 0; i < w.rows(); ++i)
        for (Index j = 0; j < w.cols(); ++j) w(i, j) = init_rng.gaussian(cfg.weight_std);
    const Vector data_mean = data.column_means();
    for (std::size_t l = 0; l < p.bs.size(); ++l) {
      const Vector mean = l == 0 ? data_mean : Vector(Vector::Constant(p.bs[l].size(), 0.5));
      p.lams[l] = detail::initial_offsets(policy.sources[l], mean);
      if (cfg.bias_init == BiasInit::InverseSigmoid) p.bs[l] = logit(mean);
    }
    return p;
  }

  /// Changing layer l's offset adjusts the biases of both neighbors.
  void shift_offsets(const std::vector<Vector>& new_lams) {
    const Index layers = p_.num_layers();
    std::vector<Vector> deltas(static_cast<std::size_t>(layers));
    for (Index l = 0; l < layers; ++l) {
      const auto lu = static_cast<std::size_t>(l);
      deltas[lu] = policy_.nu * (new_lams[lu] - p_.lams[lu]);
    }
    for (Index l = 0; l < layers; ++l) {
      const auto lu = static_cast<std::size_t>(l);
      if (l > 0) p_.bs[lu - 1] += p_.Ws[lu - 1] * deltas[lu];
      if (l + 1 < layers) p_.bs[lu + 1] += p_.Ws[lu].transpose() * deltas[lu];
    }
    for (Index l = 0; l < layers; ++l) {
      const auto lu = static_cast<std::size_t>(l);
      p_.lams[lu] = (p_.lams[lu] + deltas[lu]).cwiseMax(0.0).cwiseMin(1.0);
    }
  }

  const std::vector<Matrix>& advance_chain() {
    if (chain_->kind == ChainKind::Pcd)
      for (int s = 1; s < cfg_.sampler.k; ++s) (void)dbm_chain_step(p_, *chain_);
    return dbm_chain_step(p_, *chain_);
  }

  Dataset data_;
  Matrix rows_;
  DbmOffsetPolicy policy_;
  DbmTrainConfig cfg_;
  DbmParams p_;
  std::optional<DbmChain> chain_;
  Rng offset_rng_;
  long steps_ = 0;
};

/// Layer-wise pre-training: an RBM per adjacent layer pair, trained
/// bottom-up with hidden probabilities fed upward, then stacked plainly.
/// Hidden-layer offsets start from the pre-trained hidden means.
inline DbmParams greedy_pretrain(const Dataset& data, const std::vector<Index>& hidden_sizes,
                                 const OffsetPolicy& rbm_policy, const TrainConfig& rbm_cfg) {
  require(!hidden_sizes.empty(), "greedy_pretrain: need at least one hidden layer");
  std::vector<Index> sizes;
  sizes.push_back(data.num_variables());
  for (Index h : hidden_sizes) sizes.push_back(h);
  DbmParams p = DbmParams::zeros(sizes);

  Dataset current = data;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    TrainConfig cfg = rbm_cfg;
    cfg.seed = rbm_cfg.seed + l;
    RbmTrainer trainer(current, sizes[l + 1], rbm_policy, cfg);
    for (long u = 0; u < cfg.updates; ++u) trainer.step();
    const RbmParams& trained = trainer.params();
    p.Ws[l] = trained.W;
    if (l == 0) {
      p.bs[0] = trained.b;
      p.lams[0] = trained.mu;
    }
    p.bs[l + 1] = trained.c;
    // next layer's data: hidden probabilities of the current representation,
    // multiplicities carried over
    const Matrix probs = prob_h_given_x_rows(trained, current.patterns);
    p.lams[l + 1] = (probs.transpose() * current.weights / current.total_weight())
                        .cwiseMax(0.0)
                        .cwiseMin(1.0);
    Dataset next;
    next.patterns = probs;
    next.weights = current.weights;
    next.name = current.name + "-layer" + std::to_string(l + 1);
    current = std::move(next);
  }
  return p;
}

}  // namespace cbm
