#pragma once

#include <utility>
#include <vector>

#include "cbm/rbm.hpp"
#include "cbm/rng.hpp"

namespace cbm {

enum class ChainKind { Cd, Pcd, Pt };

/// Inverse temperatures beta_i = i / (c-1), ascending, ending at 1.
inline Vector uniform_inv_temps(int c) {
  require(c >= 1, "uniform_inv_temps: need at least one chain");
  Vector beta(c);
  if (c == 1) {
    beta[0] = 1.0;
    return beta;
  }
  for (int i = 0; i < c; ++i) beta[i] = static_cast<double>(i) / (c - 1);
  return beta;
}

/// One block Gibbs sweep at inverse temperature beta: h' ~ p_beta(h|x),
/// then x' ~ p_beta(x|h'). beta scales the whole energy.
inline std::pair<Vector, Vector> gibbs_step(const RbmParams& p, const Vector& x, double beta,
                                            Rng& rng) {
  const Vector ph = prob_h_given_x(p, x, beta);
  Vector h(ph.size());
  for (Index j = 0; j < h.size(); ++j) h[j] = rng.bernoulli(ph[j]) ? 1.0 : 0.0;
  const Vector px = prob_x_given_h(p, h, beta);
  Vector xn(px.size());
  for (Index i = 0; i < xn.size(); ++i) xn[i] = rng.bernoulli(px[i]) ? 1.0 : 0.0;
  return {xn, h};
}

/// Persistent sampler state: fantasy particles (rows), one set per inverse
/// temperature for parallel tempering.
struct ChainState {
  ChainKind kind = ChainKind::Pcd;
  std::vector<Matrix> xs;  // per temperature, rows = particles
  std::vector<Matrix> hs;
  Vector inv_temps;  // sorted, distinct, last entry 1.0
  Rng rng;
  long swap_round = 0;
  long swaps_proposed = 0;
  long swaps_accepted = 0;

  Index num_particles() const { return xs.empty() ? 0 : xs.front().rows(); }

  const Matrix& model_particles() const { return xs.back(); }  // beta = 1 replicas

  static ChainState make_pcd(const RbmParams& p, Index particles, Rng rng) {
    ChainState s{ChainKind::Pcd, {}, {}, uniform_inv_temps(1), std::move(rng)};
    s.init_uniform(p, particles);
    return s;
  }

  static ChainState make_pt(const RbmParams& p, Index particles, int chains, Rng rng) {
    ChainState s{ChainKind::Pt, {}, {}, uniform_inv_temps(chains), std::move(rng)};
    s.init_uniform(p, particles);
    return s;
  }

  /// Particles start from uniform random states.
  void init_uniform(const RbmParams& p, Index particles) {
    xs.assign(static_cast<std::size_t>(inv_temps.size()), Matrix(particles, p.num_visible()));
    hs.assign(static_cast<std::size_t>(inv_temps.size()), Matrix(particles, p.num_hidden()));
    for (std::size_t t = 0; t < xs.size(); ++t) {
      for (Index r = 0; r < particles; ++r)
        for (Index i = 0; i < xs[t].cols(); ++i) xs[t](r, i) = rng.bernoulli(0.5) ? 1.0 : 0.0;
      for (Index r = 0; r < particles; ++r)
        for (Index j = 0; j < hs[t].cols(); ++j) hs[t](r, j) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    }
  }
};

namespace detail {

inline void sample_rows(const Matrix& probs, Matrix& out, Rng& rng) {
  for (Index r = 0; r < probs.rows(); ++r)
    for (Index j = 0; j < probs.cols(); ++j) out(r, j) = rng.bernoulli(probs(r, j)) ? 1.0 : 0.0;
}

/// Block sweep over a batch: all hidden units given the visibles, then all
/// visibles given the fresh hiddens.
inline void gibbs_sweep_rows(const RbmParams& p, Matrix& x, Matrix& h, double beta, Rng& rng) {
  sample_rows(prob_h_given_x_rows(p, x, beta), h, rng);
  sample_rows(prob_x_given_h_rows(p, h, beta), x, rng);
}

}  // namespace detail

/// CD-k: each fantasy particle results from k Gibbs sweeps started at the
/// corresponding data row.
inline Matrix cd_sample(const RbmParams& p, const Matrix& data_x, int k, Rng& rng) {
  require(k >= 1, "cd_sample: k must be >= 1");
  require(data_x.cols() == p.num_visible(), "cd_sample: dimension mismatch");
  Matrix x = data_x;
  Matrix h(data_x.rows(), p.num_hidden());
  for (int step = 0; step < k; ++step) detail::gibbs_sweep_rows(p, x, h, 1.0, rng);
  return x;
}

/// Advances every persistent particle one Gibbs sweep; particles survive
/// across parameter updates.
inline const Matrix& pcd_step(const RbmParams& p, ChainState& state) {
  require(state.kind == ChainKind::Pcd, "pcd_step: chain kind mismatch");
  detail::gibbs_sweep_rows(p, state.xs[0], state.hs[0], 1.0, state.rng);
  return state.model_particles();
}

/// One Gibbs sweep in every tempered replica, then swap proposals between
/// adjacent temperatures on the deterministic even-odd schedule (even pairs
/// on even rounds). A proposed swap of replicas i and i+1 is accepted with
/// min(1, exp((beta_i - beta_{i+1}) (E_i - E_{i+1}))).
inline const Matrix& pt_step(const RbmParams& p, ChainState& state) {
  require(state.kind == ChainKind::Pt, "pt_step: chain kind mismatch");
  const auto c = static_cast<Index>(state.inv_temps.size());
  for (Index t = 0; t < c; ++t)
    detail::gibbs_sweep_rows(p, state.xs[static_cast<std::size_t>(t)],
                             state.hs[static_cast<std::size_t>(t)], state.inv_temps[t], state.rng);
  const Index start = state.swap_round % 2 == 0 ? 0 : 1;
  for (Index t = start; t + 1 < c; t += 2) {
    auto& xa = state.xs[static_cast<std::size_t>(t)];
    auto& ha = state.hs[static_cast<std::size_t>(t)];
    auto& xb = state.xs[static_cast<std::size_t>(t + 1)];
    auto& hb = state.hs[static_cast<std::size_t>(t + 1)];
    const double dbeta = state.inv_temps[t] - state.inv_temps[t + 1];
    for (Index r = 0; r < xa.rows(); ++r) {
      const double ea = energy(p, xa.row(r).transpose(), ha.row(r).transpose());
      const double eb = energy(p, xb.row(r).transpose(), hb.row(r).transpose());
      const double log_ratio = dbeta * (ea - eb);
      const double u = state.rng.uniform();
      ++state.swaps_proposed;
      if (std::log(u) < log_ratio) {
        ++state.swaps_accepted;
        xa.row(r).swap(xb.row(r));
        ha.row(r).swap(hb.row(r));
      }
    }
  }
  ++state.swap_round;
  return state.model_particles();
}

}  // namespace cbm
