#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include "cbm/ais.hpp"
#include "cbm/dataset.hpp"
#include "cbm/exact.hpp"
#include "cbm/policy.hpp"
#include "cbm/trainer.hpp"

namespace cbm {

inline std::uint64_t splitmix64_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
  return splitmix64(s);
}

/// Log-likelihood given an externally estimated ln Z (AIS); the data side
/// only needs the analytically marginalized free energies.
inline double log_likelihood_with_log_z(const RbmParams& p, const Dataset& d, double log_z) {
  double s = 0.0;
  for (Index r = 0; r < d.num_patterns(); ++r)
    s += d.weights[r] * (-free_energy(p, d.patterns.row(r).transpose()) - log_z);
  if (d.ll_norm == LlNormalization::PerSample) s /= d.total_weight();
  return s;
}

struct MetricsRow {
  int trial = 0;
  long update = 0;
  double ll = 0.0;
  bool is_ais = false;
  double grad_norm_w = 0.0;
  double norm_w_rows_mean = 0.0;
  double norm_w_cols_mean = 0.0;
  double norm_b = 0.0;
  double norm_c = 0.0;
  double mu_mean = 0.0;
  double lam_mean = 0.0;
  std::optional<double> angle_centered_natural;
  std::optional<double> angle_standard_natural;
};

struct TrialResult {
  int trial = 0;
  double max_ll = 0.0;
  double final_ll = 0.0;
  std::vector<MetricsRow> rows;
};

struct ExperimentSummary {
  double max_ll_mean = 0.0;
  double max_ll_std = 0.0;
  double final_ll_mean = 0.0;
  int trials = 0;
};

struct ExperimentResult {
  std::vector<TrialResult> trials;
  ExperimentSummary summary;
  bool with_angles = false;
};

struct RunOptions {
  int trials = 25;
  int workers = 0;  // 0 = one per hardware thread, capped by CBM_WORKERS
  bool track_angles = false;
  bool force_ais = false;
  AisConfig ais;
  std::uint64_t ais_seed_offset = 1000003;  // stream id base for AIS evals
};

inline int resolve_workers(int requested, int jobs) {
  int w = requested;
  if (w <= 0) {
    w = static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("CBM_WORKERS")) {
      try {
        w = std::max(1, std::stoi(env));
      } catch (const std::exception&) {
      }
    }
  }
  return std::max(1, std::min(w, jobs));
}

namespace detail {

inline void fill_param_metrics(const RbmParams& p, const Vector& mu, const Vector& lam,
                               const GradientEstimate& grad, MetricsRow& row) {
  row.grad_norm_w = grad.dW.size() > 0 ? grad.dW.norm() : 0.0;
  row.norm_w_rows_mean = p.W.rowwise().norm().mean();
  row.norm_w_cols_mean = p.W.colwise().norm().mean();
  row.norm_b = p.b.norm();
  row.norm_c = p.c.norm();
  row.mu_mean = mu.mean();
  row.lam_mean = lam.mean();
}

/// Angles of the exact standard and data-mean centered gradients against
/// the exact natural gradient, all in the normal parameterization.
inline void fill_angles(const RbmParams& normal, const Dataset& d, MetricsRow& row) {
  try {
    const GradientEstimate standard = exact_standard_gradient(normal, d);
    const auto dm = exact_data_stats(normal, d);
    const GradientEstimate centered =
        centered_gradient(normal, exact_batch_stats(normal, d), dm.mean_x, dm.mean_h);
    const GradientEstimate natural =
        solve_natural_gradient(fisher_matrix(normal), standard, {});
    row.angle_centered_natural = gradient_angle_degrees(centered, natural);
    row.angle_standard_natural = gradient_angle_degrees(standard, natural);
  } catch (const CapacityError&) {
  } catch (const std::invalid_argument&) {
    // zero gradient at an exact optimum leaves the angle undefined
  }
}

}  // namespace detail

/// Trains one seeded trial and records a metrics row at every evaluation
/// point (each eval_every updates, plus the final update).
inline TrialResult run_trial(const Dataset& d, Index num_hidden, const OffsetPolicy& policy,
                             TrainConfig cfg, int trial, std::uint64_t master_seed,
                             const RunOptions& opt) {
  cfg.seed = splitmix64_seed(master_seed, static_cast<std::uint64_t>(trial));
  RbmTrainer trainer(d, num_hidden, policy, cfg);
  TrialResult result;
  result.trial = trial;
  const long evals = std::max(1L, cfg.eval_every);
  for (long u = 1; u <= cfg.updates; ++u) {
    trainer.step();
    if (u % evals == 0 || u == cfg.updates) {
      MetricsRow row;
      row.trial = trial;
      row.update = u;
      const RbmParams& p = trainer.params();
      double ll = 0.0;
      bool is_ais = false;
      if (opt.force_ais) {
        is_ais = true;
      } else {
        try {
          ll = log_likelihood_exact(p, d);
        } catch (const CapacityError&) {
          is_ais = true;
        }
      }
      if (is_ais) {
        AisConfig ais = opt.ais;
        if (ais.base_rate_biases.size() == 0) ais.base_rate_biases = logit(d.column_means());
        const AisResult z = estimate_log_partition(
            p, ais, splitmix64_seed(cfg.seed, opt.ais_seed_offset + static_cast<std::uint64_t>(u)));
        ll = log_likelihood_with_log_z(p, d, z.log_z);
      }
      row.ll = ll;
      row.is_ais = is_ais;
      detail::fill_param_metrics(p, trainer.mu(), trainer.lam(), trainer.last_gradient(), row);
      if (opt.track_angles) detail::fill_angles(trainer.as_normal(), d, row);
      result.rows.push_back(std::move(row));
    }
  }
  result.max_ll = -std::numeric_limits<double>::infinity();
  for (const auto& row : result.rows) result.max_ll = std::max(result.max_ll, row.ll);
  result.final_ll = result.rows.empty() ? 0.0 : result.rows.back().ll;
  return result;
}

/// Independent seeded repetitions on a bounded worker pool; results are
/// merged by trial index, so the outcome does not depend on the worker
/// count.
inline ExperimentResult run_experiment(const Dataset& d, Index num_hidden,
                                       const OffsetPolicy& policy, const TrainConfig& cfg,
                                       const RunOptions& opt) {
  require(opt.trials >= 1, "run_experiment: need at least one trial");
  ExperimentResult result;
  result.with_angles = opt.track_angles;
  result.trials.resize(static_cast<std::size_t>(opt.trials));
  const int workers = resolve_workers(opt.workers, opt.trials);
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  auto work = [&]() {
    for (;;) {
      const int t = next.fetch_add(1);
      if (t >= opt.trials) return;
      result.trials[static_cast<std::size_t>(t)] =
          run_trial(d, num_hidden, policy, cfg, t, cfg.seed, opt);
    }
  };
  if (workers == 1) {
    work();
  } else {
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  std::vector<double> maxes, finals;
  for (const auto& t : result.trials) {
    maxes.push_back(t.max_ll);
    finals.push_back(t.final_ll);
  }
  result.summary.max_ll_mean = mean(maxes);
  result.summary.max_ll_std = stddev(maxes);
  result.summary.final_ll_mean = mean(finals);
  result.summary.trials = opt.trials;
  return result;
}

/// "-51.13 ±0.85 (-52.1)": maximum mean LL with its trial standard
/// deviation, final mean LL in parenthesis.
inline std::string format_summary(const ExperimentSummary& s) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << s.max_ll_mean << " ±" << s.max_ll_std << " ("
      << std::setprecision(1) << s.final_ll_mean << ")";
  return out.str();
}

inline const char* metrics_csv_header(bool with_angles) {
  return with_angles
             ? "trial,update,ll_exact_or_ais,ll_is_ais,grad_norm_w,norm_w_rows_mean,"
               "norm_w_cols_mean,norm_b,norm_c,mu_mean,lam_mean,angle_centered_natural,"
               "angle_standard_natural"
             : "trial,update,ll_exact_or_ais,ll_is_ais,grad_norm_w,norm_w_rows_mean,"
               "norm_w_cols_mean,norm_b,norm_c,mu_mean,lam_mean";
}

inline void write_metrics_csv(std::ostream& out, const ExperimentResult& r) {
  out << metrics_csv_header(r.with_angles) << '\n';
  out << std::setprecision(17);
  for (const auto& trial : r.trials) {
    for (const auto& row : trial.rows) {
      out << row.trial << ',' << row.update << ',' << row.ll << ',' << (row.is_ais ? 1 : 0) << ','
          << row.grad_norm_w << ',' << row.norm_w_rows_mean << ',' << row.norm_w_cols_mean << ','
          << row.norm_b << ',' << row.norm_c << ',' << row.mu_mean << ',' << row.lam_mean;
      if (r.with_angles) {
        out << ',';
        if (row.angle_centered_natural) out << *row.angle_centered_natural;
        out << ',';
        if (row.angle_standard_natural) out << *row.angle_standard_natural;
      }
      out << '\n';
    }
  }
}

}  // namespace cbm
