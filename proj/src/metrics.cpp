#include "asgld/metrics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "asgld/ot.hpp"

namespace asgld {
namespace {

constexpr double kWeightTol = 1e-12;
constexpr double kPsdTol = 1e-10;

void check_cloud(const SampleCloud& c, const char* who) {
  if (c.points.rows() < 1)
    throw std::invalid_argument(std::string(who) + ": empty cloud");
  if (!c.points.allFinite())
    throw std::invalid_argument(std::string(who) + ": non-finite points");
  if (!c.uniform()) {
    if (c.weights.size() != c.points.rows())
      throw std::invalid_argument(std::string(who) + ": weight count mismatch");
    if ((c.weights.array() < 0.0).any())
      throw std::invalid_argument(std::string(who) + ": negative weight");
    if (std::abs(c.weights.sum() - 1.0) > kWeightTol)
      throw std::invalid_argument(std::string(who) + ": weights not normalized");
  }
}

// Explicit differences rather than the -2ab + norms expansion: identical
// points get a cost of exactly zero, which the metric axioms rely on.
Matrix sq_dist_matrix(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      c(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  return c;
}

// Total order on clouds so w2_empirical can evaluate both argument orders in
// one canonical orientation, making symmetry bit-exact.
bool cloud_precedes(const SampleCloud& a, const SampleCloud& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  for (Eigen::Index i = 0; i < a.points.rows(); ++i)
    for (Eigen::Index j = 0; j < a.points.cols(); ++j)
      if (a.points(i, j) != b.points(i, j)) return a.points(i, j) < b.points(i, j);
  if (a.weights.size() != b.weights.size()) return a.weights.size() < b.weights.size();
  for (Eigen::Index i = 0; i < a.weights.size(); ++i)
    if (a.weights[i] != b.weights[i]) return a.weights[i] < b.weights[i];
  return false;
}

void check_gaussian(const GaussianMeasure& g, const char* who) {
  const Eigen::Index d = g.mean.size();
  if (d < 1) throw std::invalid_argument(std::string(who) + ": empty mean");
  if (g.cov.rows() != d || g.cov.cols() != d)
    throw std::invalid_argument(std::string(who) + ": covariance shape mismatch");
  const double scale = 1.0 + g.cov.cwiseAbs().maxCoeff();
  if ((g.cov - g.cov.transpose()).cwiseAbs().maxCoeff() > kPsdTol * scale)
    throw std::invalid_argument(std::string(who) + ": covariance not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(g.cov);
  if (es.eigenvalues().minCoeff() < -kPsdTol * scale)
    throw std::invalid_argument(std::string(who) + ": covariance not PSD");
}

// Symmetric PSD square root with tiny negative eigenvalues clamped to zero.
Matrix sqrt_psd(const Matrix& c) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(c);
  Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Matrix hessian_at(const Potential& p, const Vector& x) {
  const int d = p.dim;
  Matrix h(d, d);
  if (p.has_hessian()) {
    p.hessian_into(x, h);
  } else {
    Vector xp = x, xm = x, gp(d), gm(d);
    for (int j = 0; j < d; ++j) {
      const double step = 1e-5 * (1.0 + std::abs(x[j]));
      xp[j] = x[j] + step;
      xm[j] = x[j] - step;
      p.grad_into(xp, gp);
      p.grad_into(xm, gm);
      h.col(j) = (gp - gm) / (2.0 * step);
      xp[j] = x[j];
      xm[j] = x[j];
    }
    h = ((h + h.transpose()) / 2.0).eval();
  }
  return h;
}

}  // namespace

SampleCloud make_cloud(Matrix points) {
  SampleCloud c{std::move(points), Vector()};
  check_cloud(c, "make_cloud");
  return c;
}

SampleCloud make_cloud(Matrix points, Vector weights) {
  SampleCloud c{std::move(points), std::move(weights)};
  check_cloud(c, "make_cloud");
  return c;
}

GridSpec GridSpec::cube(int d, double lo, double hi, int bins_per_axis) {
  GridSpec g;
  g.lo = Vector::Constant(d, lo);
  g.hi = Vector::Constant(d, hi);
  g.bins.assign(static_cast<std::size_t>(d), bins_per_axis);
  return g;
}

double w2_empirical(const SampleCloud& a, const SampleCloud& b) {
  check_cloud(a, "w2_empirical");
  check_cloud(b, "w2_empirical");
  if (a.dim() != b.dim())
    throw std::invalid_argument("w2_empirical: dimension mismatch");
  if (cloud_precedes(b, a)) return w2_empirical(b, a);

  const Matrix cost = sq_dist_matrix(a.points, b.points);
  if (a.uniform() && b.uniform() && a.size() == b.size()) {
    const auto match = ot::solve_assignment(cost);
    const double total = ot::assignment_cost(cost, match);
    return std::sqrt(std::max(0.0, total / static_cast<double>(a.size())));
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const Vector supply =
      a.uniform() ? Vector::Constant(a.size(), 1.0 / na).eval() : a.weights;
  const Vector demand =
      b.uniform() ? Vector::Constant(b.size(), 1.0 / nb).eval() : b.weights;
  return std::sqrt(std::max(0.0, ot::transport_cost(cost, supply, demand)));
}

double w2_gaussian(const GaussianMeasure& g1, const GaussianMeasure& g2) {
  check_gaussian(g1, "w2_gaussian");
  check_gaussian(g2, "w2_gaussian");
  if (g1.mean.size() != g2.mean.size())
    throw std::invalid_argument("w2_gaussian: dimension mismatch");
  const Matrix r2 = sqrt_psd(g2.cov);
  const Matrix inner = sqrt_psd(r2 * g1.cov * r2);
  const double tr = g1.cov.trace() + g2.cov.trace() - 2.0 * inner.trace();
  const double mean_sq = (g1.mean - g2.mean).squaredNorm();
  return std::sqrt(std::max(0.0, mean_sq + tr));
}

double kl_histogram(const SampleCloud& samples,
                    const std::function<double(const Vector&)>& log_u,
                    const GridSpec& grid) {
  check_cloud(samples, "kl_histogram");
  const int d = static_cast<int>(samples.dim());
  if (grid.lo.size() != d || grid.hi.size() != d ||
      static_cast<int>(grid.bins.size()) != d)
    throw std::invalid_argument("kl_histogram: grid dimension mismatch");

  std::int64_t cells = 1;
  for (int ax = 0; ax < d; ++ax) {
    if (grid.bins[static_cast<std::size_t>(ax)] < 1 ||
        !(grid.hi[ax] > grid.lo[ax]))
      throw std::invalid_argument("kl_histogram: zero-volume bins");
    cells *= grid.bins[static_cast<std::size_t>(ax)];
    if (cells > (std::int64_t{1} << 26))
      throw std::invalid_argument("kl_histogram: grid too large");
  }
  Vector width(d);
  for (int ax = 0; ax < d; ++ax)
    width[ax] = (grid.hi[ax] - grid.lo[ax]) /
                static_cast<double>(grid.bins[static_cast<std::size_t>(ax)]);

  // p: row-major binning of the (possibly weighted) samples.
  std::vector<double> p(static_cast<std::size_t>(cells), 0.0);
  const double n = static_cast<double>(samples.size());
  double leaked = 0.0, kept = 0.0;
  for (Eigen::Index k = 0; k < samples.size(); ++k) {
    const double w = samples.uniform() ? 1.0 / n : samples.weights[k];
    std::int64_t idx = 0;
    bool inside = true;
    for (int ax = 0; ax < d; ++ax) {
      const double x = samples.points(k, ax);
      if (!(x >= grid.lo[ax]) || !(x < grid.hi[ax])) {
        inside = false;
        break;
      }
      auto bin = static_cast<std::int64_t>((x - grid.lo[ax]) / width[ax]);
      bin = std::min<std::int64_t>(bin, grid.bins[static_cast<std::size_t>(ax)] - 1);
      idx = idx * grid.bins[static_cast<std::size_t>(ax)] + bin;
    }
    if (inside) {
      p[static_cast<std::size_t>(idx)] += w;
      kept += w;
    } else {
      leaked += w;
    }
  }
  const double leak_frac = leaked / (leaked + kept);
  if (leak_frac > 0.01) {
    std::ostringstream os;
    os << "kl_histogram: " << leak_frac * 100.0
       << "% of sample mass falls outside the grid (limit 1%)";
    throw data_error(os.str());
  }
  if (kept <= 0.0) throw data_error("kl_histogram: no sample mass inside grid");

  // q: log-space bin-center quadrature, normalized by log-sum-exp. Equal cell
  // volumes cancel in the normalization.
  std::vector<double> lq(static_cast<std::size_t>(cells));
  Vector center(d);
  double lmax = -std::numeric_limits<double>::infinity();
  for (std::int64_t b = 0; b < cells; ++b) {
    std::int64_t rest = b;
    for (int ax = d - 1; ax >= 0; --ax) {
      const int nb = grid.bins[static_cast<std::size_t>(ax)];
      const std::int64_t i = rest % nb;
      rest /= nb;
      center[ax] = grid.lo[ax] + (static_cast<double>(i) + 0.5) * width[ax];
    }
    const double v = log_u(center);
    if (std::isnan(v)) throw numerical_error("kl_histogram: log_u returned NaN");
    lq[static_cast<std::size_t>(b)] = v;
    lmax = std::max(lmax, v);
  }
  if (!std::isfinite(lmax))
    throw numerical_error("kl_histogram: log_u non-finite on entire grid");
  double lse_acc = 0.0;
  for (double v : lq) lse_acc += std::exp(v - lmax);
  const double lse = lmax + std::log(lse_acc);

  double kl = 0.0;
  for (std::int64_t b = 0; b < cells; ++b) {
    const double pb = p[static_cast<std::size_t>(b)] / kept;
    if (pb <= 0.0) continue;
    kl += pb * (std::log(pb) - (lq[static_cast<std::size_t>(b)] - lse));
  }
  if (!std::isfinite(kl)) throw numerical_error("kl_histogram: divergence overflow");
  return kl;
}

GaussianMeasure laplace_gaussian(const Potential& p, const Vector& x_star,
                                 double sigma) {
  require_dim(x_star, p.dim, "x_star");
  if (!(sigma > 0.0))
    throw std::invalid_argument("laplace_gaussian: sigma must be positive");
  const Matrix h = hessian_at(p, x_star);
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success)
    throw numerical_error("laplace_gaussian: Hessian not positive definite");
  GaussianMeasure g;
  g.mean = x_star;
  g.cov = sigma * llt.solve(Matrix::Identity(p.dim, p.dim));
  g.cov = ((g.cov + g.cov.transpose()) / 2.0).eval();
  return g;
}

SampleCloud laplace_reference(const Potential& p, const Vector& x_star,
                              double sigma, std::int64_t n_samples,
                              RngStream& rng) {
  require_dim(x_star, p.dim, "x_star");
  if (!(sigma > 0.0))
    throw std::invalid_argument("laplace_reference: sigma must be positive");
  if (n_samples < 1)
    throw std::invalid_argument("laplace_reference: need at least one sample");
  const Matrix h = hessian_at(p, x_star);
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success)
    throw numerical_error("laplace_reference: Hessian not positive definite");

  // H = L L^T, so x = x* + sqrt(sigma) L^{-T} z has covariance sigma H^{-1}.
  const double root_sigma = std::sqrt(sigma);
  Matrix pts(n_samples, p.dim);
  Vector z(p.dim);
  for (std::int64_t k = 0; k < n_samples; ++k) {
    rng.fill_gaussian(z);
    pts.row(k) =
        (x_star + root_sigma * llt.matrixU().solve(z)).transpose();
  }
  return make_cloud(std::move(pts));
}

SampleCloud sample_gaussian(const GaussianMeasure& g, std::int64_t n,
                            RngStream& rng) {
  check_gaussian(g, "sample_gaussian");
  if (n < 1)
    throw std::invalid_argument("sample_gaussian: need at least one sample");
  const Eigen::Index d = g.mean.size();
  // LLT fails on singular PSD inputs; the eigen square root covers those.
  const Matrix root = sqrt_psd(g.cov);
  Matrix pts(n, d);
  Vector z(d);
  for (std::int64_t k = 0; k < n; ++k) {
    rng.fill_gaussian(z);
    pts.row(k) = (g.mean + root * z).transpose();
  }
  return make_cloud(std::move(pts));
}

SampleCloud trailing_cloud(const RunRecord& r, std::int64_t window) {
  const auto total = static_cast<std::int64_t>(r.iterates.size());
  if (window < 1)
    throw std::invalid_argument("trailing_cloud: window must be >= 1");
  if (window > total)
    throw std::invalid_argument("trailing_cloud: window exceeds recorded length");
  Matrix pts(window, r.dim);
  for (std::int64_t k = 0; k < window; ++k)
    pts.row(k) = r.iterates[static_cast<std::size_t>(total - window + k)].transpose();
  return make_cloud(std::move(pts));
}

Moments moments(const SampleCloud& c) {
  check_cloud(c, "moments");
  const Eigen::Index n = c.size();
  Moments m;
  if (c.uniform()) {
    m.mean = c.points.colwise().mean().transpose();
    if (n < 2) throw std::invalid_argument("moments: covariance needs >= 2 points");
    const Matrix centered = c.points.rowwise() - m.mean.transpose();
    m.cov = centered.transpose() * centered / static_cast<double>(n - 1);
  } else {
    m.mean = c.points.transpose() * c.weights;
    const double sw2 = c.weights.squaredNorm();
    if (sw2 >= 1.0)
      throw std::invalid_argument("moments: covariance needs >= 2 effective points");
    const Matrix centered = c.points.rowwise() - m.mean.transpose();
    m.cov = centered.transpose() * c.weights.asDiagonal() * centered / (1.0 - sw2);
  }
  m.cov = ((m.cov + m.cov.transpose()) / 2.0).eval();
  return m;
}

}  // namespace asgld
