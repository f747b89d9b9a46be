#pragma once

#include <Eigen/Eigenvalues>

#include "cbm/dataset.hpp"
#include "cbm/gradients.hpp"
#include "cbm/rbm.hpp"

namespace cbm {

inline constexpr Index kMaxEnumerationBits = 25;

namespace detail {

inline Vector bits_to_vector(std::uint64_t bits, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = (bits >> i) & 1ULL ? 1.0 : 0.0;
  return v;
}

inline void check_enumeration_capacity(Index bits, const char* where) {
  if (bits > kMaxEnumerationBits)
    throw CapacityError(std::string(where) + ": layer of " + std::to_string(bits) +
                        " units exceeds the enumeration limit of " +
                        std::to_string(kMaxEnumerationBits));
}

}  // namespace detail

/// -ln sum_h e^{-E(x,h)}; the hidden layer is marginalized analytically.
inline double free_energy(const RbmParams& p, const Vector& x) {
  const Vector a = hidden_activation(p, x);
  double s = (x - p.mu).dot(p.b);
  for (Index j = 0; j < a.size(); ++j) s += -p.lam[j] * a[j] + softplus(a[j]);
  return -s;
}

/// Visible-side analogue: -ln sum_x e^{-E(x,h)}.
inline double free_energy_of_hidden(const RbmParams& p, const Vector& h) {
  const Vector g = visible_activation(p, h);
  double s = (h - p.lam).dot(p.c);
  for (Index i = 0; i < g.size(); ++i) s += -p.mu[i] * g[i] + softplus(g[i]);
  return -s;
}

/// ln Z by enumerating the visible layer (hidden side marginalized).
inline double log_partition_over_visible(const RbmParams& p) {
  detail::check_enumeration_capacity(p.num_visible(), "log_partition_over_visible");
  LogSumExp lse;
  const std::uint64_t states = 1ULL << p.num_visible();
  for (std::uint64_t s = 0; s < states; ++s)
    lse.add(-free_energy(p, detail::bits_to_vector(s, p.num_visible())));
  return lse.value();
}

inline double log_partition_over_hidden(const RbmParams& p) {
  detail::check_enumeration_capacity(p.num_hidden(), "log_partition_over_hidden");
  LogSumExp lse;
  const std::uint64_t states = 1ULL << p.num_hidden();
  for (std::uint64_t s = 0; s < states; ++s)
    lse.add(-free_energy_of_hidden(p, detail::bits_to_vector(s, p.num_hidden())));
  return lse.value();
}

/// ln Z via enumeration over the smaller layer.
inline double log_partition(const RbmParams& p) {
  return p.num_hidden() <= p.num_visible() ? log_partition_over_hidden(p)
                                           : log_partition_over_visible(p);
}

/// Exact log-likelihood of the dataset under the model, using the dataset's
/// sum / per-sample convention.
inline double log_likelihood_exact(const RbmParams& p, const Dataset& d) {
  require(d.num_variables() == p.num_visible(), "log_likelihood_exact: dimension mismatch");
  const double log_z = log_partition(p);
  double s = 0.0;
  for (Index r = 0; r < d.num_patterns(); ++r)
    s += d.weights[r] * (-free_energy(p, d.patterns.row(r).transpose()) - log_z);
  if (d.ll_norm == LlNormalization::PerSample) s /= d.total_weight();
  return s;
}

struct ExactMoments {
  Vector mean_x, mean_h;
  Matrix corr;  // raw <x h'>
};

/// Exact model expectations <x>_m, <h>_m, <x h'>_m by enumerating the
/// smaller layer and taking conditional expectations over the other.
inline ExactMoments exact_model_stats(const RbmParams& p) {
  const Index n = p.num_visible();
  const Index m = p.num_hidden();
  ExactMoments out;
  out.mean_x = Vector::Zero(n);
  out.mean_h = Vector::Zero(m);
  out.corr = Matrix::Zero(n, m);
  if (m <= n) {
    const double log_z = log_partition_over_hidden(p);
    const std::uint64_t states = 1ULL << m;
    for (std::uint64_t s = 0; s < states; ++s) {
      const Vector h = detail::bits_to_vector(s, m);
      const double ph = std::exp(-free_energy_of_hidden(p, h) - log_z);
      const Vector px = prob_x_given_h(p, h);
      out.mean_x += ph * px;
      out.mean_h += ph * h;
      out.corr += ph * px * h.transpose();
    }
  } else {
    const double log_z = log_partition_over_visible(p);
    const std::uint64_t states = 1ULL << n;
    for (std::uint64_t s = 0; s < states; ++s) {
      const Vector x = detail::bits_to_vector(s, n);
      const double px = std::exp(-free_energy(p, x) - log_z);
      const Vector ph = prob_h_given_x(p, x);
      out.mean_x += px * x;
      out.mean_h += px * ph;
      out.corr += px * x * ph.transpose();
    }
  }
  return out;
}

struct ExactDataMoments {
  Vector mean_x, mean_h;
  Matrix corr;
};

/// Data-side expectations with hidden units Rao-Blackwellized through the
/// conditionals.
inline ExactDataMoments exact_data_stats(const RbmParams& p, const Dataset& d) {
  require(d.num_variables() == p.num_visible(), "exact_data_stats: dimension mismatch");
  const double total = d.total_weight();
  ExactDataMoments out;
  out.mean_x = Vector::Zero(p.num_visible());
  out.mean_h = Vector::Zero(p.num_hidden());
  out.corr = Matrix::Zero(p.num_visible(), p.num_hidden());
  for (Index r = 0; r < d.num_patterns(); ++r) {
    const Vector x = d.patterns.row(r).transpose();
    const Vector ph = prob_h_given_x(p, x);
    const double w = d.weights[r] / total;
    out.mean_x += w * x;
    out.mean_h += w * ph;
    out.corr += w * x * ph.transpose();
  }
  return out;
}

/// Full exact statistics struct (both sides), usable by every gradient rule.
inline BatchStats exact_batch_stats(const RbmParams& p, const Dataset& d) {
  const auto dm = exact_data_stats(p, d);
  const auto mm = exact_model_stats(p);
  BatchStats s;
  s.mean_x_d = dm.mean_x;
  s.mean_h_d = dm.mean_h;
  s.corr_d = dm.corr;
  s.mean_x_m = mm.mean_x;
  s.mean_h_m = mm.mean_h;
  s.corr_m = mm.corr;
  // covariance forms around the respective means
  s.cov_d = dm.corr - dm.mean_x * dm.mean_h.transpose();
  s.cov_m = mm.corr - mm.mean_x * mm.mean_h.transpose();
  return s;
}

/// Exact standard log-likelihood gradient in the normal parameterization
/// (offsets folded into the biases first).
inline GradientEstimate exact_standard_gradient(const RbmParams& p, const Dataset& d) {
  const RbmParams pn = reparameterize(p, Vector::Zero(p.num_visible()), Vector::Zero(p.num_hidden()));
  return centered_ll_gradient(pn, exact_batch_stats(pn, d));
}

/// Exact centered gradient for the normal parameterization of p with the
/// given offsets.
inline GradientEstimate exact_centered_gradient(const RbmParams& p, const Dataset& d,
                                                const Vector& mu, const Vector& lam) {
  const RbmParams pn = reparameterize(p, Vector::Zero(p.num_visible()), Vector::Zero(p.num_hidden()));
  return centered_gradient(pn, exact_batch_stats(pn, d), mu, lam);
}

/// Dense Fisher information matrix of the sufficient statistics
/// (x_i h_j, x_i, h_j) under the model distribution, in the uncentered
/// parameterization. Index layout: weights row-major, then b, then c.
struct FisherMatrix {
  Matrix I;
  Index n_vis = 0, n_hid = 0;

  Index dim() const { return n_vis * n_hid + n_vis + n_hid; }
  Index w_index(Index i, Index j) const { return i * n_hid + j; }
  Index b_index(Index i) const { return n_vis * n_hid + i; }
  Index c_index(Index j) const { return n_vis * n_hid + n_vis + j; }
};

inline FisherMatrix fisher_matrix(const RbmParams& p_in) {
  const RbmParams p =
      reparameterize(p_in, Vector::Zero(p_in.num_visible()), Vector::Zero(p_in.num_hidden()));
  const Index n = p.num_visible();
  const Index m = p.num_hidden();
  const Index dim = n * m + n + m;
  if (dim > 220)
    throw CapacityError("fisher_matrix: " + std::to_string(dim) + " parameters is too large");
  detail::check_enumeration_capacity(n, "fisher_matrix");

  FisherMatrix f;
  f.n_vis = n;
  f.n_hid = m;
  f.I = Matrix::Zero(dim, dim);
  Vector mean = Vector::Zero(dim);

  const double log_z = log_partition(p);
  const std::uint64_t states = 1ULL << n;
  // T(x, h) is linear in h given x, so conditional second moments are the
  // outer product of the conditional mean plus one rank-one Bernoulli
  // variance term per hidden unit.
  Vector t_hat(dim);
  for (std::uint64_t s = 0; s < states; ++s) {
    const Vector x = detail::bits_to_vector(s, n);
    const double px = std::exp(-free_energy(p, x) - log_z);
    const Vector pi = prob_h_given_x(p, x);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < m; ++j) t_hat[f.w_index(i, j)] = x[i] * pi[j];
    for (Index i = 0; i < n; ++i) t_hat[f.b_index(i)] = x[i];
    for (Index j = 0; j < m; ++j) t_hat[f.c_index(j)] = pi[j];

    mean += px * t_hat;
    f.I.selfadjointView<Eigen::Lower>().rankUpdate(t_hat, px);
    for (Index j = 0; j < m; ++j) {
      const double var = pi[j] * (1.0 - pi[j]);
      if (var == 0.0) continue;
      Vector u = Vector::Zero(dim);
      for (Index i = 0; i < n; ++i) u[f.w_index(i, j)] = x[i];
      u[f.c_index(j)] = 1.0;
      f.I.selfadjointView<Eigen::Lower>().rankUpdate(u, px * var);
    }
  }
  f.I.triangularView<Eigen::Upper>() = f.I.transpose();
  f.I -= mean * mean.transpose();
  f.I = ((f.I + f.I.transpose()) / 2.0).eval();  // exact symmetry
  return f;
}

struct NaturalGradientOptions {
  double damping_scale = 1e-6;  // epsilon = scale * trace(I) / dim
};

inline GradientEstimate solve_natural_gradient(const FisherMatrix& f, const GradientEstimate& grad,
                                               const NaturalGradientOptions& opt = {}) {
  const Index dim = f.dim();
  const double eps = opt.damping_scale * f.I.trace() / static_cast<double>(dim);
  Matrix damped = f.I + eps * Matrix::Identity(dim, dim);
  Eigen::LDLT<Matrix> solver(damped);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("natural gradient: damped Fisher solve failed");
  const Vector g = solver.solve(grad.flatten());
  if (!g.allFinite()) throw std::runtime_error("natural gradient: singular after damping");
  GradientEstimate out;
  out.rule = GradientRule::Natural;
  out.dW.resize(f.n_vis, f.n_hid);
  for (Index i = 0; i < f.n_vis; ++i)
    for (Index j = 0; j < f.n_hid; ++j) out.dW(i, j) = g[f.w_index(i, j)];
  out.db = g.segment(f.n_vis * f.n_hid, f.n_vis);
  out.dc = g.segment(f.n_vis * f.n_hid + f.n_vis, f.n_hid);
  return out;
}

/// Natural gradient I^{-1} grad with scale-aware Tikhonov damping, computed
/// for (and applicable to) the uncentered parameterization of p.
inline GradientEstimate natural_gradient(const RbmParams& p, const Dataset& d,
                                         const NaturalGradientOptions& opt = {}) {
  return solve_natural_gradient(fisher_matrix(p), exact_standard_gradient(p, d), opt);
}

}  // namespace cbm
