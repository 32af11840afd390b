#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "asgld/types.hpp"

namespace asgld {

// Flat key=value experiment configuration ('#' comments, blank lines
// ignored). Unknown and duplicate keys are errors. Defaults depend on the
// potential, so `potential` is applied before the remaining keys.
struct ExperimentConfig {
  std::string potential = "quadratic";  // quadratic | regression | rica
  std::string scheme = "sim";           // sim | sync | wcon | wicon
  int workers = 1;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::string label;  // artifact prefix; defaults to the scheme name

  double sigma = 1.0;
  double gamma = 0.01;
  std::string schedule = "constant";  // constant | power
  double gamma_decay = 0.0;           // power: gamma_k = gamma * k^-gamma_decay
  double lambda_decay = 0.0;
  std::int64_t batch = 0;  // 0 = exact gradients
  std::int64_t iters = 50000;
  std::int64_t cadence = 100;         // metric evaluation period (iterations)
  std::int64_t plateau_window = 500;  // iterations; 0 disables early stop
  double plateau_tol = 1e-4;          // relative W2 improvement threshold
  std::int64_t w2_window = 500;       // trailing iterates entering the W2 cloud
  std::int64_t w2_points = 200;       // cloud size after subsampling
  int kl_bins = 8;                    // per axis, first-two-coordinate marginal
  double kl_span = 4.0;               // grid half-width in reference std units
  std::int64_t record_stride = 1;
  std::string clock = "auto";  // auto | none | mono
  std::vector<double> x0;     // empty = origin
  double mode_tol = 1e-7;
  std::int64_t mode_iters = 200000;

  // sim delays
  std::string delay = "none";  // none | fixed | uniform
  std::int64_t tau_max = 0;
  std::int64_t fixed_delay = 0;

  // async schemes
  std::int64_t tau_cap = -1;  // wcon; -1 = unbounded
  std::string sync_noise = "per_worker";

  // quadratic
  std::vector<double> quad_diag{1.0, 4.0};
  std::vector<double> quad_b;  // empty = zeros

  // regression
  std::int64_t n_samples = 100000;
  double data_noise_std = 1.0;
  std::vector<double> true_coeffs{2.0, -1.0, 0.5, 0.3, 1.0};
  std::uint64_t data_seed = 0xA5C0FFEEULL;  // dataset fixed across run seeds

  // rica
  std::string data_file;
  int rica_dim = 16;        // leading pixel columns used as patch features
  double rica_lambda = 0.4;
  std::int64_t rica_samples = 0;  // 0 = all records

  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_string(const std::string& text);

  int dim() const;  // parameter dimension implied by the potential
  bool clock_enabled() const;

  // Sorted key=value rendering of every effective field; digests hash it.
  std::string canonical() const;
  std::uint64_t digest() const;
  // Hash of the fields that define the target measure; comparisons across
  // artifacts require equal values.
  std::uint64_t potential_digest() const;
};

}  // namespace asgld
