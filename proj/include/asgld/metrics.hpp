#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "asgld/potentials.hpp"
#include "asgld/record.hpp"
#include "asgld/rng.hpp"
#include "asgld/types.hpp"

namespace asgld {

// Weighted empirical measure. Empty weights = uniform 1/N.
struct SampleCloud {
  Matrix points;   // N x d
  Vector weights;  // empty or N nonnegative entries summing to 1 (within 1e-12)

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
  bool uniform() const { return weights.size() == 0; }
};

SampleCloud make_cloud(Matrix points);
SampleCloud make_cloud(Matrix points, Vector weights);

struct GaussianMeasure {
  Vector mean;
  Matrix cov;  // symmetric PSD within 1e-10
};

// Rectangular histogram grid, per-axis bounds and bin counts.
struct GridSpec {
  Vector lo, hi;
  std::vector<int> bins;

  static GridSpec cube(int d, double lo, double hi, int bins_per_axis);
};

// Exact Wasserstein-2 with squared-Euclidean ground cost. Equal-size uniform
// clouds use the optimal-assignment solver; general weights route through the
// transportation LP. Returns the distance (not its square).
double w2_empirical(const SampleCloud& a, const SampleCloud& b);

// Closed-form Bures-Wasserstein distance between Gaussians.
double w2_gaussian(const GaussianMeasure& g1, const GaussianMeasure& g2);

// Histogram KL divergence of the sample cloud against the unnormalized
// log-density log_u (= -U/sigma): bins samples into p, discretizes
// exp(log_u) at bin centers into q via Riemann quadrature, returns
// sum p ln(p/q) over occupied bins. Samples falling outside the grid are
// tolerated up to 1% leakage (the in-grid mass is renormalized); beyond
// that the data is considered incompatible with the grid.
double kl_histogram(const SampleCloud& samples,
                    const std::function<double(const Vector&)>& log_u,
                    const GridSpec& grid);

// Gaussian surrogate N(x_star, sigma * H(x_star)^{-1}) for the target
// measure, from the exact Hessian when the potential has one, otherwise
// central finite differences of the gradient.
GaussianMeasure laplace_gaussian(const Potential& p, const Vector& x_star,
                                 double sigma);

// n_samples draws from the Laplace surrogate as a uniform cloud.
SampleCloud laplace_reference(const Potential& p, const Vector& x_star,
                              double sigma, std::int64_t n_samples,
                              RngStream& rng);

SampleCloud sample_gaussian(const GaussianMeasure& g, std::int64_t n,
                            RngStream& rng);

// Last `window` recorded iterates as a uniform cloud.
SampleCloud trailing_cloud(const RunRecord& r, std::int64_t window);

struct Moments {
  Vector mean;
  Matrix cov;  // unbiased (Bessel-corrected)
};

Moments moments(const SampleCloud& c);

}  // namespace asgld
