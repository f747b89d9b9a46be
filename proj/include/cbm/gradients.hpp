#pragma once

#include "cbm/rbm.hpp"
#include "cbm/rng.hpp"
#include "cbm/types.hpp"

namespace cbm {

enum class GradientRule { Standard, Centered, Enhanced, Natural };

struct GradientEstimate {
  Matrix dW;
  Vector db;
  Vector dc;
  GradientRule rule = GradientRule::Standard;

  Vector flatten() const {
    Vector v(dW.size() + db.size() + dc.size());
    Index k = 0;
    for (Index i = 0; i < dW.rows(); ++i)
      for (Index j = 0; j < dW.cols(); ++j) v[k++] = dW(i, j);
    v.segment(k, db.size()) = db;
    k += db.size();
    v.segment(k, dc.size()) = dc;
    return v;
  }

  double norm() const { return flatten().norm(); }

  static GradientEstimate zeros(Index n, Index m, GradientRule rule) {
    return {Matrix::Zero(n, m), Vector::Zero(n), Vector::Zero(m), rule};
  }
};

/// Sufficient statistics of one gradient step. Means and raw second moments
/// <x h'> are kept for both the data and the model side, together with the
/// covariance form (second moments around the batch means, plug-in
/// estimator without Bessel correction).
struct BatchStats {
  Vector mean_x_d, mean_h_d;
  Vector mean_x_m, mean_h_m;
  Matrix corr_d, corr_m;  // raw <x h'>
  Matrix cov_d, cov_m;    // <(x - <x>)(h - <h>)'>

  Index num_visible() const { return mean_x_d.size(); }
  Index num_hidden() const { return mean_h_d.size(); }

  void validate() const {
    auto in01 = [](const Vector& v) { return (v.array() >= 0.0).all() && (v.array() <= 1.0).all(); };
    require(in01(mean_x_d) && in01(mean_h_d) && in01(mean_x_m) && in01(mean_h_m),
            "batch stats: mean entries must lie in [0,1]");
  }
};

struct StatsOptions {
  bool use_probabilities = true;  // hidden means from conditionals (lower variance)
};

namespace detail {

struct SideStats {
  Vector mean_x, mean_h;
  Matrix corr, cov;
};

/// Means, raw second moments, and covariance form from explicit (possibly
/// real-valued) unit values. Shared by every statistics producer so equal
/// inputs give bit-equal statistics.
inline SideStats assemble_side_stats(const Matrix& xs, const Matrix& hs, const Vector* weights) {
  const Index rows = xs.rows();
  require(rows > 0, "batch stats: empty batch");
  require(hs.rows() == rows, "batch stats: side row mismatch");
  Vector w = weights ? *weights : Vector(Vector::Ones(rows));
  require(w.size() == rows, "batch stats: weight size mismatch");
  const double total = w.sum();
  SideStats s;
  s.mean_x = xs.transpose() * w / total;
  s.mean_h = hs.transpose() * w / total;
  s.corr = xs.transpose() * w.asDiagonal() * hs / total;
  const Matrix xc = xs.rowwise() - s.mean_x.transpose();
  const Matrix hc = hs.rowwise() - s.mean_h.transpose();
  s.cov = xc.transpose() * w.asDiagonal() * hc / total;
  return s;
}

inline SideStats side_stats(const RbmParams& p, const Matrix& xs, const Vector* weights,
                            bool use_probabilities, Rng* rng) {
  Matrix hs = prob_h_given_x_rows(p, xs);
  if (!use_probabilities) {
    require(rng != nullptr, "batch stats: sampled estimation needs an rng");
    for (Index r = 0; r < hs.rows(); ++r)
      for (Index j = 0; j < hs.cols(); ++j) hs(r, j) = rng->bernoulli(hs(r, j)) ? 1.0 : 0.0;
  }
  return assemble_side_stats(xs, hs, weights);
}

}  // namespace detail

/// Estimates all statistics of one step from a data batch and a batch of
/// model (fantasy) states. Hidden-side quantities default to conditional
/// probabilities; visible model-side quantities always come from the
/// sampled states themselves.
inline BatchStats compute_batch_stats(const RbmParams& p, const Matrix& data_x,
                                      const Matrix& model_x, const StatsOptions& opt = {},
                                      Rng* rng = nullptr, const Vector* data_weights = nullptr) {
  require(data_x.cols() == p.num_visible() && model_x.cols() == p.num_visible(),
          "batch stats: dimension mismatch");
  const auto d = detail::side_stats(p, data_x, data_weights, opt.use_probabilities, rng);
  const auto m = detail::side_stats(p, model_x, nullptr, opt.use_probabilities, rng);
  BatchStats s;
  s.mean_x_d = d.mean_x;
  s.mean_h_d = d.mean_h;
  s.corr_d = d.corr;
  s.cov_d = d.cov;
  s.mean_x_m = m.mean_x;
  s.mean_h_m = m.mean_h;
  s.corr_m = m.corr;
  s.cov_m = m.cov;
  return s;
}

namespace detail {

/// <(x-mu)(h-lam)'>_d - <(x-mu)(h-lam)'>_m assembled from raw moments.
inline Matrix centered_weight_gradient(const BatchStats& s, const Vector& mu, const Vector& lam) {
  return (s.corr_d - s.corr_m) - (s.mean_x_d - s.mean_x_m) * lam.transpose() -
         mu * (s.mean_h_d - s.mean_h_m).transpose();
}

}  // namespace detail

/// Log-likelihood gradient of a centered RBM: the weight term uses the
/// model's own offsets, the bias terms reduce to plain mean differences.
inline GradientEstimate centered_ll_gradient(const RbmParams& p, const BatchStats& s) {
  require(s.num_visible() == p.num_visible() && s.num_hidden() == p.num_hidden(),
          "centered_ll_gradient: dimension mismatch");
  GradientEstimate g;
  g.rule = p.is_normal() ? GradientRule::Standard : GradientRule::Centered;
  g.dW = detail::centered_weight_gradient(s, p.mu, p.lam);
  g.db = s.mean_x_d - s.mean_x_m;
  g.dc = s.mean_h_d - s.mean_h_m;
  return g;
}

/// Centered update rule for a normal RBM: transform to offsets (mu, lam),
/// take a gradient step there, transform back. Collapses to the standard
/// gradient when both offsets are zero.
inline GradientEstimate centered_gradient(const RbmParams& p, const BatchStats& s, const Vector& mu,
                                          const Vector& lam) {
  require(p.is_normal(), "centered_gradient: model must have zero offsets");
  require(mu.size() == p.num_visible() && lam.size() == p.num_hidden(),
          "centered_gradient: offset dimension mismatch");
  GradientEstimate g;
  g.rule = GradientRule::Centered;
  g.dW = detail::centered_weight_gradient(s, mu, lam);
  g.db = s.mean_x_d - s.mean_x_m - g.dW * lam;
  g.dc = s.mean_h_d - s.mean_h_m - g.dW.transpose() * mu;
  return g;
}

/// Flip-averaged update rule: the weight update is the difference of the
/// data- and model-side covariances, the bias updates subtract the weight
/// update projected onto the averaged means.
inline GradientEstimate enhanced_gradient(const BatchStats& s) {
  GradientEstimate g;
  g.rule = GradientRule::Enhanced;
  g.dW = s.cov_d - s.cov_m;
  g.db = s.mean_x_d - s.mean_x_m - g.dW * (0.5 * (s.mean_h_d + s.mean_h_m));
  g.dc = s.mean_h_d - s.mean_h_m - g.dW.transpose() * (0.5 * (s.mean_x_d + s.mean_x_m));
  return g;
}

/// Angle in degrees between two updates over the flattened parameter vector.
inline double gradient_angle_degrees(const GradientEstimate& a, const GradientEstimate& b) {
  const Vector va = a.flatten();
  const Vector vb = b.flatten();
  require(va.size() == vb.size(), "gradient_angle: dimension mismatch");
  const double na = va.norm();
  const double nb = vb.norm();
  require(na > 0.0 && nb > 0.0, "gradient_angle: undefined for zero vectors");
  const double cosv = std::clamp(va.dot(vb) / (na * nb), -1.0, 1.0);
  return std::acos(cosv) * 180.0 / 3.14159265358979323846;
}

}  // namespace cbm
