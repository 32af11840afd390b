#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "asgld/rng.hpp"
#include "asgld/types.hpp"

namespace asgld {

// Minibatch request for stochastic gradients. For potentials backed by a
// finite dataset, size >= n_data selects the exact full-batch path, which
// reproduces grad() bit-exactly.
struct BatchSpec {
  std::int64_t size = 1;
};

// A potential U with gradient oracles and the curvature constants the
// step-size theory consumes. Closures are pure: safe to call from any
// number of threads as long as each caller owns its RngStream.
struct Potential {
  int dim = 0;
  double m = 0.0;           // strong-convexity constant (0 when non-convex/unknown)
  double L = 0.0;           // gradient Lipschitz constant (empirical for RICA)
  std::optional<double> G;  // gradient-norm bound, when one is declared
  std::int64_t n_data = 0;  // 0 for closed-form or streaming potentials
  std::string kind;

  std::function<double(const Vector&)> value_fn;
  std::function<void(const Vector&, Vector&)> grad_fn;
  std::function<void(const Vector&, const BatchSpec&, RngStream&, Vector&)>
      stoch_grad_fn;
  std::function<void(const Vector&, Matrix&)> hessian_fn;  // may be empty
  std::optional<Vector> minimizer;

  double value(const Vector& x) const;
  Vector grad(const Vector& x) const;
  void grad_into(const Vector& x, Vector& out) const;
  Vector stoch_grad(const Vector& x, const BatchSpec& batch, RngStream& rng) const;
  void stoch_grad_into(const Vector& x, const BatchSpec& batch, RngStream& rng,
                       Vector& out) const;
  bool has_hessian() const { return static_cast<bool>(hessian_fn); }
  void hessian_into(const Vector& x, Matrix& out) const;
};

// U(x) = 1/2 x^T A x - b^T x with A symmetric positive definite.
struct QuadraticSpec {
  Matrix A;
  Vector b;
};

// Least-squares fit of a 4th-degree polynomial: features (t, t^2, t^3, t^4)
// plus a bias, data generated from true_coeffs with additive output noise.
// U is the mean squared residual / 2, a convex quadratic in the coefficients.
struct RegressionSpec {
  Vector true_coeffs;          // 4 feature weights + bias
  std::int64_t n_samples = 0;  // frozen dataset size (ignored when streaming)
  double data_noise_std = 0.0;
  bool streaming = false;      // resample t ~ U[-1,1] per batch instead of a frozen set
  bool parallel_kernels = true;
};

// Reconstruction ICA: per sample, lambda*||W x||_1 + 1/2 ||W^T W x - x||_2^2,
// averaged over the batch. W is a p x p matrix stored column-major as a
// flattened vector of dimension p^2. Non-convex: m = 0, L is a probe estimate.
struct RicaSpec {
  double lambda = 0.4;
  Matrix data;  // p x n, one sample per column
  bool parallel_kernels = true;
};

Potential make_quadratic(const QuadraticSpec& spec);

struct RegressionPotential {
  Potential potential;
  Vector generating_coeffs;
};
RegressionPotential make_regression(const RegressionSpec& spec, RngStream& rng);

Potential make_rica(const RicaSpec& spec);

// Empirical checks of the strong-convexity/Lipschitz/gradient-bound
// assumptions over a probe ball. Report-only: never throws on violations.
struct ProbeSpec {
  Vector center;        // empty => origin
  double radius = 5.0;
};

struct AssumptionReport {
  bool m_ok = false;    // strong-convexity inequality held on all sampled triples
  bool L_ok = false;    // L_hat <= declared L within 1e-9 slack
  double L_hat = 0.0;   // max pairwise ||grad(x)-grad(y)|| / ||x-y||
  double G_hat = 0.0;   // max observed ||grad||
};

AssumptionReport verify_assumptions(const Potential& p, std::int64_t n_probe,
                                    RngStream& rng, ProbeSpec probe = {});

namespace kernels {

// Blocked per-sample reductions used by the data-backed potentials. The
// parallel and serial paths share one fixed block structure, so they produce
// bit-identical results; tests and the benchmark compare them.

// Mean gradient of 1/2 (f(t)^T x - y)^2 over the selected samples
// (idx == nullptr selects 0..count-1).
void regression_grad(const std::vector<double>& ts, const std::vector<double>& ys,
                     const std::int64_t* idx, std::int64_t count, const Vector& x,
                     Vector& out, bool parallel);

double rica_value(const Matrix& data, const std::int64_t* idx, std::int64_t count,
                  double lambda, const Vector& w_flat, bool parallel);

void rica_grad(const Matrix& data, const std::int64_t* idx, std::int64_t count,
               double lambda, const Vector& w_flat, Vector& out, bool parallel);

}  // namespace kernels

}  // namespace asgld
