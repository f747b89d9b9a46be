#include <catch2/catch_amalgamated.hpp>

#include "cbm/exact.hpp"
#include "cbm/gradients.hpp"
#include "oracles.hpp"

using namespace cbm;

namespace {

BatchStats random_stats(Index n, Index m, Rng& rng) {
  // statistics of small random batches, so raw moments and covariances are
  // mutually consistent
  const RbmParams p = oracle::random_params(n, m, rng, 0.5, 0.5);
  const Matrix data = oracle::random_binary_rows(12, n, rng, 0.4);
  const Matrix model = oracle::random_binary_rows(12, n, rng, 0.6);
  return compute_batch_stats(p, data, model);
}

}  // namespace

TEST_CASE("identical data- and model-side statistics give a zero gradient") {
  Rng rng(21);
  const RbmParams p = oracle::random_params(4, 3, rng);
  const Matrix batch = oracle::random_binary_rows(10, 4, rng);
  const BatchStats s = compute_batch_stats(p, batch, batch);
  REQUIRE(centered_ll_gradient(p, s).norm() < 1e-14);
  RbmParams pn = p;
  pn.mu.setZero();
  pn.lam.setZero();
  REQUIRE(centered_gradient(pn, s, p.mu, p.lam).norm() < 1e-14);
  REQUIRE(enhanced_gradient(s).norm() < 1e-14);
}

TEST_CASE("zero offsets reduce the centered rules to the standard gradient") {
  Rng rng(22);
  RbmParams p = oracle::random_params(4, 3, rng, 0.5, 0.5, /*with_offsets=*/false);
  const BatchStats s = random_stats(4, 3, rng);
  const GradientEstimate g = centered_ll_gradient(p, s);
  REQUIRE((g.dW - (s.corr_d - s.corr_m)).cwiseAbs().maxCoeff() < 1e-14);
  REQUIRE((g.db - (s.mean_x_d - s.mean_x_m)).norm() < 1e-14);
  REQUIRE((g.dc - (s.mean_h_d - s.mean_h_m)).norm() < 1e-14);
  const GradientEstimate gc = centered_gradient(p, s, Vector::Zero(4), Vector::Zero(3));
  REQUIRE((gc.dW - g.dW).cwiseAbs().maxCoeff() < 1e-14);
  REQUIRE((gc.db - g.db).norm() < 1e-14);
  REQUIRE((gc.dc - g.dc).norm() < 1e-14);
}

TEST_CASE("exact centered gradient matches finite differences of the exact LL") {
  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    RbmParams p = oracle::random_params(3, 2, rng, 0.6, 0.6);
    Dataset d = oracle::random_dataset(3, 5, rng);
    d.ll_norm = LlNormalization::PerSample;  // gradient formulas are per-sample
    const GradientEstimate g = centered_ll_gradient(p, exact_batch_stats(p, d));
    const double step = 1e-5;
    auto check = [&](double got, double* param) {
      const double saved = *param;
      *param = saved + step;
      const double up = log_likelihood_exact(p, d);
      *param = saved - step;
      const double down = log_likelihood_exact(p, d);
      *param = saved;
      const double fd = (up - down) / (2.0 * step);
      REQUIRE(got == Catch::Approx(fd).epsilon(1e-6).margin(1e-8));
    };
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 2; ++j) check(g.dW(i, j), &p.W(i, j));
    for (Index i = 0; i < 3; ++i) check(g.db[i], &p.b[i]);
    for (Index j = 0; j < 2; ++j) check(g.dc[j], &p.c[j]);
  }
}

TEST_CASE("enhanced weight update equals the naive covariance-difference loop") {
  Rng rng(24);
  const BatchStats s = random_stats(4, 3, rng);
  const GradientEstimate g = enhanced_gradient(s);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 3; ++j) {
      const double cov_d = s.corr_d(i, j) - s.mean_x_d[i] * s.mean_h_d[j];
      const double cov_m = s.corr_m(i, j) - s.mean_x_m[i] * s.mean_h_m[j];
      REQUIRE(g.dW(i, j) == Catch::Approx(cov_d - cov_m).margin(1e-12));
    }
}

TEST_CASE("enhanced gradient equals the centered gradient with averaged means") {
  Rng rng(25);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.uniform() * 4);
    const Index m = 2 + static_cast<Index>(rng.uniform() * 3);
    const BatchStats s = random_stats(n, m, rng);
    const Vector mu = 0.5 * (s.mean_x_d + s.mean_x_m);
    const Vector lam = 0.5 * (s.mean_h_d + s.mean_h_m);
    const GradientEstimate ge = enhanced_gradient(s);
    const GradientEstimate gc = centered_gradient(RbmParams::zeros(n, m), s, mu, lam);
    REQUIRE((ge.dW - gc.dW).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((ge.db - gc.db).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((ge.dc - gc.dc).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("batch statistics: zero-weight model gives 0.5 hidden means") {
  const RbmParams p = RbmParams::zeros(3, 4);
  Matrix one_point(1, 3);
  one_point << 1.0, 0.0, 1.0;
  const BatchStats s = compute_batch_stats(p, one_point, one_point);
  REQUIRE((s.mean_h_d - Vector::Constant(4, 0.5)).norm() == 0.0);
}

TEST_CASE("full weighted batch reproduces the exact data-side statistics") {
  Rng rng(26);
  const RbmParams p = oracle::random_params(4, 3, rng);
  const Dataset d = generate_bars_stripes(2);
  const auto exact = exact_data_stats(p, d);
  // expanded rows, unweighted
  const BatchStats s1 = compute_batch_stats(p, d.expand(), d.expand());
  REQUIRE((s1.mean_x_d - exact.mean_x).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((s1.mean_h_d - exact.mean_h).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((s1.corr_d - exact.corr).cwiseAbs().maxCoeff() < 1e-12);
  // distinct patterns with weights
  const BatchStats s2 =
      compute_batch_stats(p, d.patterns, d.patterns, {}, nullptr, &d.weights);
  REQUIRE((s2.mean_x_d - exact.mean_x).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((s2.corr_d - exact.corr).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("probability-based estimation has lower variance than sampling") {
  Rng rng(27);
  const RbmParams p = oracle::random_params(3, 2, rng, 0.8, 0.8);
  const auto exact = exact_model_stats(p);
  const auto marginal = oracle::enumerated_visible_marginal(p);

  // 100 batches of 100 exact model draws
  const int batches = 100, per_batch = 100;
  Vector mean_prob = Vector::Zero(2), mean_samp = Vector::Zero(2);
  Vector var_prob = Vector::Zero(2), var_samp = Vector::Zero(2);
  std::vector<Vector> est_prob, est_samp;
  for (int bidx = 0; bidx < batches; ++bidx) {
    Matrix draws(per_batch, 3);
    for (int r = 0; r < per_batch; ++r) {
      double u = rng.uniform();
      std::uint64_t s = 0;
      while (s + 1 < marginal.size() && u > marginal[s]) u -= marginal[s], ++s;
      draws.row(r) = oracle::bits_to_vector(s, 3).transpose();
    }
    StatsOptions prob_opt{true}, samp_opt{false};
    const BatchStats sp = compute_batch_stats(p, draws, draws, prob_opt);
    const BatchStats ss = compute_batch_stats(p, draws, draws, samp_opt, &rng);
    est_prob.push_back(sp.mean_h_m);
    est_samp.push_back(ss.mean_h_m);
    mean_prob += sp.mean_h_m;
    mean_samp += ss.mean_h_m;
  }
  mean_prob /= batches;
  mean_samp /= batches;
  for (const auto& e : est_prob) var_prob += (e - mean_prob).cwiseAbs2();
  for (const auto& e : est_samp) var_samp += (e - mean_samp).cwiseAbs2();

  // both unbiased: grand means within 4 sigma of the exact value
  for (Index j = 0; j < 2; ++j) {
    const double se = std::sqrt(var_samp[j] / batches / batches) + 1e-6;
    REQUIRE(std::abs(mean_prob[j] - exact.mean_h[j]) < 4.0 * se + 0.01);
    REQUIRE(std::abs(mean_samp[j] - exact.mean_h[j]) < 4.0 * se + 0.01);
    REQUIRE(var_prob[j] < var_samp[j]);
  }
}

TEST_CASE("one exact gradient step preserves flip equivalence of centered models") {
  Rng rng(28);
  for (int trial = 0; trial < 10; ++trial) {
    const RbmParams p = oracle::random_params(3, 2, rng, 0.6, 0.6);
    const Dataset d = oracle::random_dataset(3, 4, rng);
    const std::vector<bool> fmask = {true, false, rng.bernoulli(0.5)};
    const std::vector<bool> gmask = {rng.bernoulli(0.5), true};
    const RbmParams q = oracle::flip_params(p, fmask, gmask);
    const Dataset df = oracle::flip_dataset_columns(d, fmask);
    REQUIRE(oracle::flip_energy_deviation(p, q, fmask, gmask) < 1e-12);

    const double eta = 0.3;
    auto step = [eta](const RbmParams& model, const Dataset& data) {
      const GradientEstimate g = centered_ll_gradient(model, exact_batch_stats(model, data));
      RbmParams out = model;
      out.W += eta * g.dW;
      out.b += eta * g.db;
      out.c += eta * g.dc;
      return out;
    };
    const RbmParams p1 = step(p, d);
    const RbmParams q1 = step(q, df);
    REQUIRE(oracle::flip_energy_deviation(p1, q1, fmask, gmask) < 1e-10);
  }
}

TEST_CASE("the standard gradient is not flip invariant (witness)") {
  Rng rng(29);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    RbmParams p = oracle::random_params(3, 2, rng, 0.8, 0.8, /*with_offsets=*/false);
    const Dataset d = oracle::random_dataset(3, 4, rng);
    const std::vector<bool> fmask = {true, false, false};
    const std::vector<bool> gmask = {false, false};
    // transform biases so the flipped pair starts out equivalent, then force
    // zero offsets on both sides (policy 00)
    RbmParams q = oracle::flip_params(p, fmask, gmask);
    q = reparameterize(q, Vector::Zero(3), Vector::Zero(2));
    REQUIRE(oracle::flip_energy_deviation_constant_ok(p, q, fmask, gmask) < 1e-10);

    const double eta = 0.3;
    auto step = [eta](const RbmParams& model, const Dataset& data) {
      const GradientEstimate g = centered_ll_gradient(model, exact_batch_stats(model, data));
      RbmParams out = model;
      out.W += eta * g.dW;
      out.b += eta * g.db;
      out.c += eta * g.dc;
      return out;
    };
    const RbmParams p1 = step(p, d);
    const RbmParams q1 = step(q, oracle::flip_dataset_columns(d, fmask));
    worst = std::max(worst, oracle::flip_energy_deviation_constant_ok(p1, q1, fmask, gmask));
  }
  REQUIRE(worst > 1e-4);  // the test has power
}

TEST_CASE("gradient angle basics") {
  GradientEstimate a = GradientEstimate::zeros(2, 2, GradientRule::Standard);
  a.dW(0, 0) = 1.0;
  GradientEstimate b = a;
  REQUIRE(gradient_angle_degrees(a, b) == Catch::Approx(0.0).margin(1e-9));
  b.dW(0, 0) = -1.0;
  REQUIRE(gradient_angle_degrees(a, b) == Catch::Approx(180.0).margin(1e-9));
  b.dW(0, 0) = 0.0;
  b.db[1] = 2.0;
  REQUIRE(gradient_angle_degrees(a, b) == Catch::Approx(90.0).margin(1e-9));
  GradientEstimate z = GradientEstimate::zeros(2, 2, GradientRule::Standard);
  REQUIRE_THROWS_AS(gradient_angle_degrees(a, z), std::invalid_argument);
}
