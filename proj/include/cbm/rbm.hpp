#pragma once

#include "cbm/math.hpp"
#include "cbm/rng.hpp"
#include "cbm/types.hpp"

namespace cbm {

/// Parameters of a binary RBM with visible offsets mu and hidden offsets
/// lam. Offsets of zero give the ordinary parameterization; nonzero offsets
/// shift the variables inside the energy. One struct serves both cases.
struct RbmParams {
  Matrix W;    // num_visible x num_hidden
  Vector b;    // visible bias
  Vector c;    // hidden bias
  Vector mu;   // visible offsets, entries in [0, 1]
  Vector lam;  // hidden offsets, entries in [0, 1]

  Index num_visible() const { return W.rows(); }
  Index num_hidden() const { return W.cols(); }

  bool is_normal() const { return mu.isZero(0.0) && lam.isZero(0.0); }

  static RbmParams zeros(Index n, Index m) {
    RbmParams p;
    p.W = Matrix::Zero(n, m);
    p.b = Vector::Zero(n);
    p.c = Vector::Zero(m);
    p.mu = Vector::Zero(n);
    p.lam = Vector::Zero(m);
    return p;
  }

  void validate() const {
    require(b.size() == W.rows() && mu.size() == W.rows(), "rbm: visible dimension mismatch");
    require(c.size() == W.cols() && lam.size() == W.cols(), "rbm: hidden dimension mismatch");
    require((mu.array() >= 0.0).all() && (mu.array() <= 1.0).all(), "rbm: mu out of [0,1]");
    require((lam.array() >= 0.0).all() && (lam.array() <= 1.0).all(), "rbm: lam out of [0,1]");
  }
};

/// E(x, h) = -(x-mu)' b - c' (h-lam) - (x-mu)' W (h-lam)
inline double energy(const RbmParams& p, const Vector& x, const Vector& h) {
  require(x.size() == p.num_visible() && h.size() == p.num_hidden(), "energy: dimension mismatch");
  const Vector xc = x - p.mu;
  const Vector hc = h - p.lam;
  return -xc.dot(p.b) - p.c.dot(hc) - xc.dot(p.W * hc);
}

/// Hidden pre-activations c_j + (x-mu)' w_{*j}, optionally scaled by an
/// inverse temperature.
inline Vector hidden_activation(const RbmParams& p, const Vector& x, double beta = 1.0) {
  require(x.size() == p.num_visible(), "hidden_activation: dimension mismatch");
  return beta * (p.W.transpose() * (x - p.mu) + p.c);
}

inline Vector visible_activation(const RbmParams& p, const Vector& h, double beta = 1.0) {
  require(h.size() == p.num_hidden(), "visible_activation: dimension mismatch");
  return beta * (p.W * (h - p.lam) + p.b);
}

inline Vector prob_h_given_x(const RbmParams& p, const Vector& x, double beta = 1.0) {
  return sigmoid(hidden_activation(p, x, beta));
}

inline Vector prob_x_given_h(const RbmParams& p, const Vector& h, double beta = 1.0) {
  return sigmoid(visible_activation(p, h, beta));
}

/// Batch versions; rows are samples.
inline Matrix prob_h_given_x_rows(const RbmParams& p, const Matrix& xs, double beta = 1.0) {
  require(xs.cols() == p.num_visible(), "prob_h_given_x_rows: dimension mismatch");
  Matrix act = (xs.rowwise() - p.mu.transpose()) * p.W;
  act.rowwise() += p.c.transpose();
  return (beta * act).unaryExpr([](double v) { return sigmoid(v); });
}

inline Matrix prob_x_given_h_rows(const RbmParams& p, const Matrix& hs, double beta = 1.0) {
  require(hs.cols() == p.num_hidden(), "prob_x_given_h_rows: dimension mismatch");
  Matrix act = (hs.rowwise() - p.lam.transpose()) * p.W.transpose();
  act.rowwise() += p.b.transpose();
  return (beta * act).unaryExpr([](double v) { return sigmoid(v); });
}

/// Moves the model to new offsets while keeping the modeled distribution
/// unchanged: b' = b + W (lam'-lam), c' = c + W' (mu'-mu).
inline RbmParams reparameterize(const RbmParams& p, const Vector& mu_new, const Vector& lam_new) {
  require(mu_new.size() == p.num_visible() && lam_new.size() == p.num_hidden(),
          "reparameterize: dimension mismatch");
  require((mu_new.array() >= 0.0).all() && (mu_new.array() <= 1.0).all() &&
              (lam_new.array() >= 0.0).all() && (lam_new.array() <= 1.0).all(),
          "reparameterize: offsets out of [0,1]");
  RbmParams out = p;
  out.b = p.b + p.W * (lam_new - p.lam);
  out.c = p.c + p.W.transpose() * (mu_new - p.mu);
  out.mu = mu_new;
  out.lam = lam_new;
  return out;
}

enum class BiasInit { InverseSigmoid, Zero };

struct InitOptions {
  BiasInit bias_init = BiasInit::InverseSigmoid;
  double weight_std = 0.01;
  double mean_clamp = 1e-4;  // sigma^-1 inputs clamped to [clamp, 1-clamp]
};

/// Small random weights; visible bias set to the inverse sigmoid of the data
/// mean (its maximum-likelihood value for a zero-weight model), hidden bias
/// to sigma^-1(0.5) = 0; offsets start at the data mean and 0.5.
inline RbmParams init_params(const Vector& mean_x, Index num_hidden, const InitOptions& opt,
                             Rng& rng) {
  RbmParams p;
  const Index n = mean_x.size();
  p.W.resize(n, num_hidden);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < num_hidden; ++j) p.W(i, j) = rng.gaussian(opt.weight_std);
  p.b = opt.bias_init == BiasInit::InverseSigmoid ? Vector(logit(mean_x, opt.mean_clamp))
                                                  : Vector(Vector::Zero(n));
  p.c = Vector::Zero(num_hidden);
  p.mu = mean_x.unaryExpr([](double v) { return std::clamp(v, 0.0, 1.0); });
  p.lam = Vector::Constant(num_hidden, 0.5);
  return p;
}

}  // namespace cbm
