#include "asgld/potentials.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

namespace asgld {
namespace {

constexpr std::int64_t kBlock = 1024;

void check_batch(const BatchSpec& batch) {
  if (batch.size < 1) throw std::invalid_argument("batch size must be >= 1");
}

// Feature map for the polynomial regression: (t, t^2, t^3, t^4, 1).
inline void poly_features(double t, double* f) {
  const double t2 = t * t;
  f[0] = t;
  f[1] = t2;
  f[2] = t2 * t;
  f[3] = t2 * t2;
  f[4] = 1.0;
}

Vector sample_in_ball(const Vector& center, double radius, int dim,
                      RngStream& rng) {
  Vector dir(dim);
  rng.fill_gaussian(dir);
  double norm = dir.norm();
  if (norm == 0.0) norm = 1.0;
  const double r = radius * std::pow(rng.uniform01(), 1.0 / dim);
  return center + (r / norm) * dir;
}

struct RegressionData {
  std::vector<double> ts, ys;
  Matrix gram;      // (1/n) sum f f^T, or population moments when streaming
  Vector lin;       // (1/n) sum y f, or gram * true_coeffs when streaming
  double offset;    // constant term so value() equals the mean loss
  bool streaming = false;
  bool parallel = true;
  Vector coeffs;    // generating coefficients
  double noise_std = 0.0;
};

struct RicaData {
  Matrix data;
  double lambda = 0.0;
  int p = 0;
  bool parallel = true;
};

}  // namespace

double Potential::value(const Vector& x) const {
  require_dim(x, dim, "x");
  return value_fn(x);
}

Vector Potential::grad(const Vector& x) const {
  Vector out(dim);
  grad_into(x, out);
  return out;
}

void Potential::grad_into(const Vector& x, Vector& out) const {
  require_dim(x, dim, "x");
  out.resize(dim);
  grad_fn(x, out);
}

Vector Potential::stoch_grad(const Vector& x, const BatchSpec& batch,
                             RngStream& rng) const {
  Vector out(dim);
  stoch_grad_into(x, batch, rng, out);
  return out;
}

void Potential::stoch_grad_into(const Vector& x, const BatchSpec& batch,
                                RngStream& rng, Vector& out) const {
  require_dim(x, dim, "x");
  check_batch(batch);
  out.resize(dim);
  stoch_grad_fn(x, batch, rng, out);
}

void Potential::hessian_into(const Vector& x, Matrix& out) const {
  if (!hessian_fn) throw std::logic_error("potential has no hessian");
  require_dim(x, dim, "x");
  out.resize(dim, dim);
  hessian_fn(x, out);
}

Potential make_quadratic(const QuadraticSpec& spec) {
  const Eigen::Index d = spec.A.rows();
  if (d < 1 || spec.A.cols() != d)
    throw std::invalid_argument("quadratic: A must be square and nonempty");
  if (spec.b.size() != d)
    throw std::invalid_argument("quadratic: b dimension mismatch");
  if (!spec.A.isApprox(spec.A.transpose(), 1e-12))
    throw std::invalid_argument("quadratic: A must be symmetric");

  Eigen::SelfAdjointEigenSolver<Matrix> eig(spec.A);
  if (eig.info() != Eigen::Success)
    throw numerical_error("quadratic: eigendecomposition failed");
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (lmin <= 0.0)
    throw std::invalid_argument("quadratic: A must be positive definite");

  auto A = std::make_shared<Matrix>(spec.A);
  auto b = std::make_shared<Vector>(spec.b);

  Potential p;
  p.dim = static_cast<int>(d);
  p.m = lmin;
  p.L = lmax;
  p.kind = "quadratic";
  p.value_fn = [A, b](const Vector& x) {
    return 0.5 * x.dot(*A * x) - b->dot(x);
  };
  p.grad_fn = [A, b](const Vector& x, Vector& out) { out = *A * x - *b; };
  p.stoch_grad_fn = [A, b](const Vector& x, const BatchSpec&, RngStream&,
                           Vector& out) { out = *A * x - *b; };
  p.hessian_fn = [A](const Vector&, Matrix& out) { out = *A; };
  p.minimizer = spec.A.llt().solve(spec.b);
  return p;
}

namespace kernels {

void regression_grad(const std::vector<double>& ts, const std::vector<double>& ys,
                     const std::int64_t* idx, std::int64_t count, const Vector& x,
                     Vector& out, bool parallel) {
  if (count < 1) throw std::invalid_argument("regression_grad: empty selection");
  if (x.size() != 5) throw std::invalid_argument("regression_grad: x must be 5-dim");
  const std::int64_t nblocks = (count + kBlock - 1) / kBlock;
  std::vector<Eigen::Matrix<double, 5, 1>> partial(
      static_cast<size_t>(nblocks), Eigen::Matrix<double, 5, 1>::Zero());

#pragma omp parallel for schedule(static) if (parallel)
  for (std::int64_t bi = 0; bi < nblocks; ++bi) {
    Eigen::Matrix<double, 5, 1> acc = Eigen::Matrix<double, 5, 1>::Zero();
    const std::int64_t lo = bi * kBlock;
    const std::int64_t hi = std::min(lo + kBlock, count);
    double f[5];
    for (std::int64_t s = lo; s < hi; ++s) {
      const std::int64_t j = idx ? idx[s] : s;
      poly_features(ts[static_cast<size_t>(j)], f);
      double pred = 0.0;
      for (int k = 0; k < 5; ++k) pred += f[k] * x[k];
      const double resid = pred - ys[static_cast<size_t>(j)];
      for (int k = 0; k < 5; ++k) acc[k] += resid * f[k];
    }
    partial[static_cast<size_t>(bi)] = acc;
  }

  Eigen::Matrix<double, 5, 1> total = Eigen::Matrix<double, 5, 1>::Zero();
  for (const auto& v : partial) total += v;
  out = total / static_cast<double>(count);
}

double rica_value(const Matrix& data, const std::int64_t* idx, std::int64_t count,
                  double lambda, const Vector& w_flat, bool parallel) {
  if (count < 1) throw std::invalid_argument("rica_value: empty selection");
  const Eigen::Index p = data.rows();
  if (w_flat.size() != p * p)
    throw std::invalid_argument("rica_value: W dimension mismatch");
  const Eigen::Map<const Matrix> W(w_flat.data(), p, p);
  const std::int64_t nblocks = (count + kBlock - 1) / kBlock;
  std::vector<double> partial(static_cast<size_t>(nblocks), 0.0);

#pragma omp parallel for schedule(static) if (parallel)
  for (std::int64_t bi = 0; bi < nblocks; ++bi) {
    double acc = 0.0;
    const std::int64_t lo = bi * kBlock;
    const std::int64_t hi = std::min(lo + kBlock, count);
    Vector h(p), r(p);
    for (std::int64_t s = lo; s < hi; ++s) {
      const std::int64_t j = idx ? idx[s] : s;
      const auto x = data.col(j);
      h.noalias() = W * x;
      r.noalias() = W.transpose() * h;
      r -= x;
      acc += lambda * h.lpNorm<1>() + 0.5 * r.squaredNorm();
    }
    partial[static_cast<size_t>(bi)] = acc;
  }

  double total = 0.0;
  for (double v : partial) total += v;
  return total / static_cast<double>(count);
}

void rica_grad(const Matrix& data, const std::int64_t* idx, std::int64_t count,
               double lambda, const Vector& w_flat, Vector& out, bool parallel) {
  if (count < 1) throw std::invalid_argument("rica_grad: empty selection");
  const Eigen::Index p = data.rows();
  if (w_flat.size() != p * p)
    throw std::invalid_argument("rica_grad: W dimension mismatch");
  const Eigen::Map<const Matrix> W(w_flat.data(), p, p);
  const std::int64_t nblocks = (count + kBlock - 1) / kBlock;
  std::vector<Matrix> partial(static_cast<size_t>(nblocks), Matrix::Zero(p, p));

#pragma omp parallel for schedule(static) if (parallel)
  for (std::int64_t bi = 0; bi < nblocks; ++bi) {
    Matrix acc = Matrix::Zero(p, p);
    const std::int64_t lo = bi * kBlock;
    const std::int64_t hi = std::min(lo + kBlock, count);
    Vector h(p), r(p), s_(p);
    for (std::int64_t s = lo; s < hi; ++s) {
      const std::int64_t j = idx ? idx[s] : s;
      const auto x = data.col(j);
      h.noalias() = W * x;
      r.noalias() = W.transpose() * h;
      r -= x;
      // d/dW of lambda*||Wx||_1 + 1/2 ||W^T W x - x||^2
      //   = lambda*sign(Wx) x^T + (Wx) r^T + W r x^T,  sign(0) := 0
      for (Eigen::Index k = 0; k < p; ++k)
        s_[k] = (h[k] > 0.0) ? 1.0 : (h[k] < 0.0 ? -1.0 : 0.0);
      acc.noalias() += lambda * s_ * x.transpose();
      acc.noalias() += h * r.transpose();
      acc.noalias() += (W * r) * x.transpose();
    }
    partial[static_cast<size_t>(bi)] = acc;
  }

  Matrix total = Matrix::Zero(p, p);
  for (const auto& mat : partial) total += mat;
  total /= static_cast<double>(count);
  out = Eigen::Map<const Vector>(total.data(), p * p);
}

}  // namespace kernels

RegressionPotential make_regression(const RegressionSpec& spec, RngStream& rng) {
  if (spec.true_coeffs.size() != 5)
    throw std::invalid_argument("regression: true_coeffs must be 5-dim");
  if (spec.data_noise_std < 0.0)
    throw std::invalid_argument("regression: data_noise_std must be >= 0");
  if (!spec.streaming && spec.n_samples < 1)
    throw std::invalid_argument("regression: n_samples must be >= 1");

  auto data = std::make_shared<RegressionData>();
  data->streaming = spec.streaming;
  data->parallel = spec.parallel_kernels;
  data->coeffs = spec.true_coeffs;
  data->noise_std = spec.data_noise_std;

  static const int kPow[5] = {1, 2, 3, 4, 0};
  if (spec.streaming) {
    // Population moments of the feature map under t ~ Uniform[-1,1]:
    // E[t^k] = 1/(k+1) for even k, 0 for odd k.
    data->gram.resize(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        const int k = kPow[i] + kPow[j];
        data->gram(i, j) = (k % 2 == 0) ? 1.0 / (k + 1) : 0.0;
      }
    data->lin = data->gram * spec.true_coeffs;
    const double var = spec.data_noise_std * spec.data_noise_std;
    data->offset =
        0.5 * (spec.true_coeffs.dot(data->gram * spec.true_coeffs) + var);
  } else {
    const std::int64_t n = spec.n_samples;
    data->ts.resize(static_cast<size_t>(n));
    data->ys.resize(static_cast<size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
      const double t = rng.uniform(-1.0, 1.0);
      double f[5];
      poly_features(t, f);
      double y = 0.0;
      for (int k = 0; k < 5; ++k) y += f[k] * spec.true_coeffs[k];
      if (spec.data_noise_std > 0.0) y += spec.data_noise_std * rng.gaussian();
      data->ts[static_cast<size_t>(i)] = t;
      data->ys[static_cast<size_t>(i)] = y;
    }
    // Sufficient statistics: U(x) = 1/2 x^T Gram x - lin^T x + offset.
    Matrix gram = Matrix::Zero(5, 5);
    Vector lin = Vector::Zero(5);
    double sum_y2 = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      double f[5];
      poly_features(data->ts[static_cast<size_t>(i)], f);
      const double y = data->ys[static_cast<size_t>(i)];
      for (int a = 0; a < 5; ++a) {
        lin[a] += y * f[a];
        for (int b = 0; b < 5; ++b) gram(a, b) += f[a] * f[b];
      }
      sum_y2 += y * y;
    }
    data->gram = gram / static_cast<double>(n);
    data->lin = lin / static_cast<double>(n);
    data->offset = 0.5 * sum_y2 / static_cast<double>(n);
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig(data->gram);
  if (eig.info() != Eigen::Success)
    throw numerical_error("regression: moment matrix eigendecomposition failed");
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (lmin <= 0.0)
    throw numerical_error("regression: moment matrix not positive definite");

  Potential p;
  p.dim = 5;
  p.m = lmin;
  p.L = lmax;
  p.kind = "regression";
  p.n_data = spec.streaming ? 0 : spec.n_samples;
  p.value_fn = [data](const Vector& x) {
    return 0.5 * x.dot(data->gram * x) - data->lin.dot(x) + data->offset;
  };
  p.grad_fn = [data](const Vector& x, Vector& out) {
    out = data->gram * x - data->lin;
  };
  p.hessian_fn = [data](const Vector&, Matrix& out) { out = data->gram; };
  p.minimizer = data->gram.ldlt().solve(data->lin);

  if (spec.streaming) {
    p.stoch_grad_fn = [data](const Vector& x, const BatchSpec& batch,
                             RngStream& rs, Vector& out) {
      const std::int64_t bsz = batch.size;
      std::vector<double> ts(static_cast<size_t>(bsz)),
          ys(static_cast<size_t>(bsz));
      for (std::int64_t i = 0; i < bsz; ++i) {
        const double t = rs.uniform(-1.0, 1.0);
        double f[5];
        poly_features(t, f);
        double y = 0.0;
        for (int k = 0; k < 5; ++k) y += f[k] * data->coeffs[k];
        if (data->noise_std > 0.0) y += data->noise_std * rs.gaussian();
        ts[static_cast<size_t>(i)] = t;
        ys[static_cast<size_t>(i)] = y;
      }
      kernels::regression_grad(ts, ys, nullptr, bsz, x, out, data->parallel);
    };
  } else {
    const std::int64_t n = spec.n_samples;
    p.stoch_grad_fn = [data, n](const Vector& x, const BatchSpec& batch,
                                RngStream& rs, Vector& out) {
      if (batch.size >= n) {
        out = data->gram * x - data->lin;  // exact full-batch path
        return;
      }
      std::vector<std::int64_t> idx(static_cast<size_t>(batch.size));
      for (auto& j : idx)
        j = static_cast<std::int64_t>(rs.uniform_below(static_cast<uint64_t>(n)));
      kernels::regression_grad(data->ts, data->ys, idx.data(), batch.size, x,
                               out, data->parallel);
    };
  }

  return RegressionPotential{std::move(p), spec.true_coeffs};
}

Potential make_rica(const RicaSpec& spec) {
  if (spec.data.rows() < 1 || spec.data.cols() < 1)
    throw std::invalid_argument("rica: data matrix must be nonempty");
  if (spec.lambda <= 0.0)
    throw std::invalid_argument("rica: lambda must be > 0");

  auto data = std::make_shared<RicaData>();
  data->data = spec.data;
  data->lambda = spec.lambda;
  data->p = static_cast<int>(spec.data.rows());
  data->parallel = spec.parallel_kernels;
  const std::int64_t n = spec.data.cols();

  Potential p;
  p.dim = data->p * data->p;
  p.m = 0.0;
  p.kind = "rica";
  p.n_data = n;
  p.value_fn = [data, n](const Vector& w) {
    return kernels::rica_value(data->data, nullptr, n, data->lambda, w,
                               data->parallel);
  };
  p.grad_fn = [data, n](const Vector& w, Vector& out) {
    kernels::rica_grad(data->data, nullptr, n, data->lambda, w, out,
                       data->parallel);
  };
  p.stoch_grad_fn = [data, n](const Vector& w, const BatchSpec& batch,
                              RngStream& rs, Vector& out) {
    if (batch.size >= n) {
      kernels::rica_grad(data->data, nullptr, n, data->lambda, w, out,
                         data->parallel);
      return;
    }
    std::vector<std::int64_t> idx(static_cast<size_t>(batch.size));
    for (auto& j : idx)
      j = static_cast<std::int64_t>(rs.uniform_below(static_cast<uint64_t>(n)));
    kernels::rica_grad(data->data, idx.data(), batch.size, data->lambda, w, out,
                       data->parallel);
  };

  // No global Lipschitz constant exists (the reconstruction term is quartic
  // in W); estimate one over the region the dynamics actually visits: a ball
  // of radius 2 around the identity, via deterministic probe pairs.
  Matrix wid = Matrix::Identity(data->p, data->p);
  Vector center = Eigen::Map<const Vector>(wid.data(), p.dim);
  RngStream probe_rng(0x52494341u);
  double lhat = 0.0;
  Vector gx(p.dim), gy(p.dim);
  for (int it = 0; it < 48; ++it) {
    const Vector x = sample_in_ball(center, 2.0, p.dim, probe_rng);
    const Vector y = sample_in_ball(center, 2.0, p.dim, probe_rng);
    const double dist = (x - y).norm();
    if (dist < 1e-12) continue;
    p.grad_fn(x, gx);
    p.grad_fn(y, gy);
    lhat = std::max(lhat, (gx - gy).norm() / dist);
  }
  p.L = 2.0 * std::max(lhat, 1e-6);
  return p;
}

AssumptionReport verify_assumptions(const Potential& p, std::int64_t n_probe,
                                    RngStream& rng, ProbeSpec probe) {
  if (n_probe < 2) throw std::invalid_argument("verify_assumptions: n_probe >= 2");
  Vector center = probe.center.size() == 0 ? Vector::Zero(p.dim).eval()
                                           : probe.center;
  require_dim(center, p.dim, "probe.center");
  if (probe.radius <= 0.0)
    throw std::invalid_argument("verify_assumptions: radius must be > 0");

  AssumptionReport rep;
  rep.m_ok = true;
  Vector gx(p.dim), gy(p.dim);

  auto touch = [&](const Vector& x) {
    p.grad_fn(x, gx);
    rep.G_hat = std::max(rep.G_hat, gx.norm());
  };

  // Pairwise Lipschitz ratios: random pairs, plus axis-aligned pairs through
  // the center so diagonal quadratics reveal their extreme eigenvalue.
  for (std::int64_t it = 0; it < n_probe; ++it) {
    const Vector x = sample_in_ball(center, probe.radius, p.dim, rng);
    const Vector y = sample_in_ball(center, probe.radius, p.dim, rng);
    const double dist = (x - y).norm();
    if (dist < 1e-12) continue;
    p.grad_fn(x, gx);
    p.grad_fn(y, gy);
    rep.G_hat = std::max(rep.G_hat, std::max(gx.norm(), gy.norm()));
    rep.L_hat = std::max(rep.L_hat, (gx - gy).norm() / dist);
  }
  for (int a = 0; a < p.dim; ++a) {
    Vector x = center, y = center;
    x[a] += probe.radius;
    y[a] -= probe.radius;
    p.grad_fn(x, gx);
    p.grad_fn(y, gy);
    rep.G_hat = std::max(rep.G_hat, std::max(gx.norm(), gy.norm()));
    rep.L_hat = std::max(rep.L_hat, (gx - gy).norm() / (2.0 * probe.radius));
  }
  rep.L_ok = rep.L_hat <= p.L * (1.0 + 1e-9) + 1e-9;

  if (p.m > 0.0) {
    for (std::int64_t it = 0; it < n_probe; ++it) {
      const Vector x = sample_in_ball(center, probe.radius, p.dim, rng);
      const Vector y = sample_in_ball(center, probe.radius, p.dim, rng);
      const double t = rng.uniform01();
      const double ux = p.value_fn(x), uy = p.value_fn(y);
      const double mid = p.value_fn(t * x + (1.0 - t) * y);
      const double bound = t * ux + (1.0 - t) * uy -
                           t * (1.0 - t) * 0.5 * p.m * (x - y).squaredNorm();
      const double slack = 1e-9 * (1.0 + std::abs(ux) + std::abs(uy));
      if (mid > bound + slack) {
        rep.m_ok = false;
        break;
      }
      touch(x);
    }
  }
  return rep;
}

}  // namespace asgld
