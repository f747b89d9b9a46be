#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cbm/types.hpp"

namespace cbm {

inline double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

/// ln(1 + e^a), stable for large |a|.
inline double softplus(double a) {
  if (a > 0.0) return a + std::log1p(std::exp(-a));
  return std::log1p(std::exp(a));
}

/// Inverse sigmoid. Inputs are clamped to [lo, 1-lo] so boundary
/// probabilities yield finite biases.
inline double logit(double p, double lo = 1e-4) {
  p = std::clamp(p, lo, 1.0 - lo);
  return std::log(p / (1.0 - p));
}

inline Vector sigmoid(const Vector& a) { return a.unaryExpr([](double v) { return sigmoid(v); }); }

inline Vector logit(const Vector& p, double lo = 1e-4) {
  return p.unaryExpr([lo](double v) { return logit(v, lo); });
}

inline double log_sum_exp(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

/// Streaming log-sum-exp; avoids materializing all terms.
class LogSumExp {
 public:
  void add(double x) {
    if (x == -std::numeric_limits<double>::infinity()) return;
    if (x <= max_) {
      sum_ += std::exp(x - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - x) + 1.0;
      max_ = x;
    }
  }
  double value() const {
    if (sum_ == 0.0) return -std::numeric_limits<double>::infinity();
    return max_ + std::log(sum_);
  }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0;
};

inline double mean(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Sample standard deviation (n-1 denominator), 0 for n < 2.
inline double stddev(const std::vector<double>& xs) {
  const auto n = xs.size();
  if (n < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(n - 1));
}

inline double median(std::vector<double> xs) {
  const auto n = xs.size();
  std::sort(xs.begin(), xs.end());
  if (n % 2 == 1) return xs[n / 2];
  return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

/// One-sided paired t statistic for H1: mean(a) < mean(b).
/// Returns the t value of the differences (b - a); large positive
/// values support H1.
inline double paired_t_statistic(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size() && a.size() >= 2, "paired_t_statistic: need matched samples");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = b[i] - a[i];
  const double sd = stddev(d);
  if (sd == 0.0) return mean(d) > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return mean(d) / (sd / std::sqrt(static_cast<double>(d.size())));
}

/// Upper chi-square quantile via the Wilson-Hilferty approximation.
inline double chi_square_quantile(double df, double z_upper) {
  const double t = 1.0 - 2.0 / (9.0 * df) + z_upper * std::sqrt(2.0 / (9.0 * df));
  return df * t * t * t;
}

}  // namespace cbm
