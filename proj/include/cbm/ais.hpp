#pragma once

#include <cmath>
#include <vector>

#include "cbm/math.hpp"
#include "cbm/rbm.hpp"
#include "cbm/rng.hpp"

namespace cbm {

/// Intermediate-distribution counts used by the reference setups this
/// estimator mirrors; the desk-scale default is much smaller.
inline constexpr int kAisIntermediatesRbmParity = 14500;
inline constexpr int kAisIntermediatesDbmParity = 29000;

struct AisConfig {
  int num_intermediate = 1000;
  int num_runs = 100;
  Vector base_rate_biases;  // visible biases of the base-rate model; empty = zeros

  void validate() const {
    require(num_intermediate >= 1 && num_runs >= 1, "ais config: counts must be >= 1");
  }
};

struct AisResult {
  double log_z = 0.0;
  double std_err = 0.0;
  bool degenerate = false;  // a non-finite importance weight appeared
  std::vector<double> log_weights;
};

namespace detail {

/// ln of the unnormalized intermediate marginal over x on the geometric
/// path: the base-rate term enters with weight (1-beta), the target's
/// hidden layer is marginalized at inverse temperature beta.
inline double ais_log_f(const RbmParams& p, const Vector& base_b, const Vector& x, double beta) {
  double s = (1.0 - beta) * base_b.dot(x) + beta * (x - p.mu).dot(p.b);
  const Vector a = p.W.transpose() * (x - p.mu) + p.c;
  for (Index j = 0; j < a.size(); ++j) s += -p.lam[j] * beta * a[j] + softplus(beta * a[j]);
  return s;
}

/// One Gibbs transition of the composite model at inverse temperature beta.
inline void ais_transition(const RbmParams& p, const Vector& base_b, Vector& x, double beta,
                           Rng& rng) {
  const Vector a = beta * (p.W.transpose() * (x - p.mu) + p.c);
  Vector h(a.size());
  for (Index j = 0; j < h.size(); ++j) h[j] = rng.bernoulli(sigmoid(a[j])) ? 1.0 : 0.0;
  const Vector act = (1.0 - beta) * base_b + beta * (p.W * (h - p.lam) + p.b);
  for (Index i = 0; i < x.size(); ++i) x[i] = rng.bernoulli(sigmoid(act[i])) ? 1.0 : 0.0;
}

}  // namespace detail

/// ln Z of the beta = 0 composite: the base-rate visible model times the
/// target's free hidden units.
inline double ais_base_log_partition(const RbmParams& p, const Vector& base_b) {
  double s = static_cast<double>(p.num_hidden()) * std::log(2.0);
  for (Index i = 0; i < base_b.size(); ++i) s += softplus(base_b[i]);
  return s;
}

/// Annealed importance sampling estimate of ln Z along a geometric path
/// from a visible-bias-only base-rate model to the target, with a linear
/// beta schedule and one Gibbs transition per intermediate distribution.
/// The standard error comes from the delta method on the log weights.
inline AisResult estimate_log_partition(const RbmParams& p, const AisConfig& cfg,
                                        std::uint64_t seed) {
  cfg.validate();
  p.validate();
  const Vector base_b =
      cfg.base_rate_biases.size() > 0 ? cfg.base_rate_biases : Vector(Vector::Zero(p.num_visible()));
  require(base_b.size() == p.num_visible(), "ais: base-rate bias dimension mismatch");

  AisResult result;
  result.log_weights.resize(static_cast<std::size_t>(cfg.num_runs));
  const int steps = cfg.num_intermediate;
  for (int run = 0; run < cfg.num_runs; ++run) {
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(run));
    Vector x(p.num_visible());
    for (Index i = 0; i < x.size(); ++i) x[i] = rng.bernoulli(sigmoid(base_b[i])) ? 1.0 : 0.0;
    double lw = 0.0;
    double beta_prev = 0.0;
    for (int k = 1; k <= steps; ++k) {
      const double beta = static_cast<double>(k) / steps;
      lw += detail::ais_log_f(p, base_b, x, beta) - detail::ais_log_f(p, base_b, x, beta_prev);
      if (k < steps) detail::ais_transition(p, base_b, x, beta, rng);
      beta_prev = beta;
    }
    result.log_weights[static_cast<std::size_t>(run)] = lw;
    if (!std::isfinite(lw)) result.degenerate = true;
  }

  const double log_runs = std::log(static_cast<double>(cfg.num_runs));
  LogSumExp lse1, lse2;
  for (double lw : result.log_weights) {
    if (!std::isfinite(lw)) continue;  // flagged above; -inf is a zero weight
    lse1.add(lw);
    lse2.add(2.0 * lw);
  }
  const double log_mean = lse1.value() - log_runs;
  const double log_mean_sq = lse2.value() - log_runs;
  result.log_z = ais_base_log_partition(p, base_b) + log_mean;
  const double ratio = std::exp(log_mean_sq - 2.0 * log_mean) - 1.0;
  result.std_err = std::sqrt(std::max(0.0, ratio) / cfg.num_runs);
  return result;
}

}  // namespace cbm
