#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asgld/config.hpp"
#include "asgld/metrics.hpp"
#include "asgld/potentials.hpp"
#include "asgld/record.hpp"

namespace asgld {

// One metric-series evaluation. wall_ns is 0 when the run clock is disabled
// (sim/sync default), keeping repeated runs byte-identical.
struct MetricsRow {
  std::int64_t iter = 0;
  std::int64_t wall_ns = 0;
  double w2 = 0.0;
  double kl = 0.0;
  double delay_mean = 0.0;
  std::int64_t delay_max = 0;
};

std::string metrics_to_csv(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> metrics_from_csv(const std::string& text);

struct Artifacts {
  std::string dir;
  ExperimentConfig config;  // effective config (digest-stable)
  Vector x_star;
  bool mode_converged = false;
  bool early_stopped = false;
  std::int64_t iters_run = 0;
  std::vector<MetricsRow> metrics;
  RunRecord record;
};

// Deterministic full-gradient descent with Armijo backtracking until
// ||grad U|| <= tol. Hitting max_iters is reported via `converged`, not fatal.
Vector find_mode(const Potential& p, const Vector& x0, double tol,
                 std::int64_t max_iters, bool* converged = nullptr);

// Instantiates the configured potential (generating regression data or
// loading the image file as needed).
Potential build_potential(const ExperimentConfig& cfg);

// Full protocol: find the mode, build the Laplace reference, run the
// configured scheme with metric evaluations every `cadence` iterations
// (stopping early when the relative W2 improvement over the plateau window
// falls below plateau_tol), and write metrics.csv, trajectory.csv,
// staleness.csv, record.csv, record.bin, config.effective and summary.txt
// into cfg.out_dir.
Artifacts run_experiment(const ExperimentConfig& cfg);

// Rebuilds the metric series of a stored run from its record (used by the
// `metrics` CLI subcommand).
std::vector<MetricsRow> recompute_metrics(const ExperimentConfig& cfg,
                                          const RunRecord& r);

// Time-to-threshold comparison across artifact directories (each produced by
// run_experiment over the same target measure). Returns CSV text with
// columns label,threshold,first_iter,first_wall_ns; -1 = not reached.
std::string compare_report(const std::vector<std::string>& artifact_dirs,
                           const std::vector<double>& thresholds);

}  // namespace asgld
