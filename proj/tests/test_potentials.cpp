#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "asgld/potentials.hpp"
#include "asgld/rng.hpp"

using namespace asgld;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Potential diag14() {
  Matrix A = Matrix::Zero(2, 2);
  A(0, 0) = 1.0;
  A(1, 1) = 4.0;
  return make_quadratic({A, Vector::Zero(2)});
}

Matrix random_spd(int d, RngStream& rng) {
  Matrix M(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) M(i, j) = rng.gaussian();
  return M * M.transpose() + 0.1 * Matrix::Identity(d, d);
}

// Central finite difference of U along direction u.
double fd_directional(const Potential& p, const Vector& x, const Vector& u,
                      double h) {
  return (p.value(x + h * u) - p.value(x - h * u)) / (2.0 * h);
}

}  // namespace

TEST_CASE("quadratic value examples") {
  const Potential pI = make_quadratic({Matrix::Identity(2, 2), Vector::Zero(2)});
  CHECK(pI.value(vec2(2, 0)) == doctest::Approx(2.0).epsilon(1e-15));
  const Potential p = diag14();
  CHECK(p.value(vec2(1, 1)) == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("quadratic gradient examples") {
  const Potential pI = make_quadratic({Matrix::Identity(2, 2), Vector::Zero(2)});
  const Vector g = pI.grad(vec2(2, 0));
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(g[1] == 0.0);
  const Potential p = diag14();
  const Vector g2 = p.grad(vec2(1, 1));
  CHECK(g2[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g2[1] == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("quadratic rejects dimension mismatch") {
  const Potential p = diag14();
  Vector x3 = Vector::Zero(3);
  CHECK_THROWS_AS(p.value(x3), std::invalid_argument);
  CHECK_THROWS_AS(p.grad(x3), std::invalid_argument);
}

TEST_CASE("quadratic constants are the extreme eigenvalues") {
  const Potential p = diag14();
  CHECK(p.m == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p.L == doctest::Approx(4.0).epsilon(1e-15));
  const Potential pI = make_quadratic({Matrix::Identity(2, 2), Vector::Zero(2)});
  CHECK(pI.m == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pI.L == doctest::Approx(1.0).epsilon(1e-15));

  RngStream rng(21);
  for (int t = 0; t < 5; ++t) {
    const int d = 2 + static_cast<int>(rng.uniform_below(5));
    const Matrix A = random_spd(d, rng);
    const Potential q = make_quadratic({A, Vector::Zero(d)});
    Eigen::SelfAdjointEigenSolver<Matrix> es(A);
    CHECK(q.m == doctest::Approx(es.eigenvalues().minCoeff()).epsilon(1e-10));
    CHECK(q.L == doctest::Approx(es.eigenvalues().maxCoeff()).epsilon(1e-10));
  }
}

TEST_CASE("quadratic minimizer solves A x = b") {
  RngStream rng(33);
  const Matrix A = random_spd(4, rng);
  Vector b(4);
  rng.fill_gaussian(b);
  const Potential p = make_quadratic({A, b});
  REQUIRE(p.minimizer.has_value());
  CHECK((A * (*p.minimizer) - b).norm() <= 1e-10);
  CHECK(p.grad(*p.minimizer).norm() <= 1e-10);
}

TEST_CASE("make_quadratic rejects non-SPD matrices") {
  Matrix neg = Matrix::Identity(2, 2);
  neg(1, 1) = -1.0;
  CHECK_THROWS_AS(make_quadratic({neg, Vector::Zero(2)}), std::invalid_argument);
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(make_quadratic({asym, Vector::Zero(2)}), std::invalid_argument);
}

TEST_CASE("noiseless regression gradient vanishes at the true coefficients") {
  RngStream rng(1);
  Vector coeffs(5);
  coeffs << 2, -1, 0.5, 0.3, 1;
  RegressionSpec spec;
  spec.true_coeffs = coeffs;
  spec.n_samples = 5000;
  spec.data_noise_std = 0.0;
  const auto reg = make_regression(spec, rng);
  CHECK((reg.generating_coeffs - coeffs).norm() == 0.0);
  CHECK(reg.potential.grad(coeffs).norm() <= 1e-8);
}

TEST_CASE("full-batch stochastic gradient equals the exact gradient bitwise") {
  RngStream rng(2);
  Vector coeffs(5);
  coeffs << 1, 0.2, -0.4, 0.1, -2;
  RegressionSpec spec;
  spec.true_coeffs = coeffs;
  spec.n_samples = 1000;
  spec.data_noise_std = 0.5;
  const auto reg = make_regression(spec, rng);
  Vector x(5);
  rng.fill_gaussian(x);
  RngStream batch_rng(77);
  const Vector exact = reg.potential.grad(x);
  const Vector full = reg.potential.stoch_grad(x, BatchSpec{1000}, batch_rng);
  for (int i = 0; i < 5; ++i) CHECK(full[i] == exact[i]);
  const Vector larger = reg.potential.stoch_grad(x, BatchSpec{4000}, batch_rng);
  for (int i = 0; i < 5; ++i) CHECK(larger[i] == exact[i]);
}

TEST_CASE("minibatch gradients are unbiased") {
  RngStream rng(3);
  Vector coeffs(5);
  coeffs << 2, -1, 0.5, 0.3, 1;
  RegressionSpec spec;
  spec.true_coeffs = coeffs;
  spec.n_samples = 400;
  spec.data_noise_std = 1.0;
  const auto reg = make_regression(spec, rng);
  Vector x(5);
  rng.fill_gaussian(x);
  const Vector exact = reg.potential.grad(x);

  const int trials = 10000;
  RngStream batch_rng(99);
  Vector mean = Vector::Zero(5), msq = Vector::Zero(5), g(5);
  for (int t = 0; t < trials; ++t) {
    reg.potential.stoch_grad_into(x, BatchSpec{10}, batch_rng, g);
    mean += g;
    msq += g.cwiseProduct(g);
  }
  mean /= trials;
  for (int i = 0; i < 5; ++i) {
    const double var = msq[i] / trials - mean[i] * mean[i];
    const double se = std::sqrt(std::max(var, 1e-30) / trials);
    CHECK(std::abs(mean[i] - exact[i]) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("empty batches are rejected") {
  RngStream rng(4);
  Vector coeffs(5);
  coeffs << 1, 1, 1, 1, 1;
  RegressionSpec spec;
  spec.true_coeffs = coeffs;
  spec.n_samples = 100;
  const auto reg = make_regression(spec, rng);
  RngStream batch_rng(5);
  CHECK_THROWS_AS(reg.potential.stoch_grad(coeffs, BatchSpec{0}, batch_rng),
                  std::invalid_argument);
}

TEST_CASE("make_regression validates its spec") {
  RngStream rng(6);
  RegressionSpec bad;
  bad.true_coeffs = Vector::Zero(5);
  bad.n_samples = 0;
  CHECK_THROWS_AS(make_regression(bad, rng), std::invalid_argument);
  RegressionSpec wrong_dim;
  wrong_dim.true_coeffs = Vector::Zero(3);
  wrong_dim.n_samples = 10;
  CHECK_THROWS_AS(make_regression(wrong_dim, rng), std::invalid_argument);
}

TEST_CASE("rica value example: identity dictionary, one sample") {
  Matrix data(2, 1);
  data << 1, 1;
  const Potential p = make_rica({0.4, data, true});
  Vector w = Vector::Zero(4);
  w[0] = 1.0;  // column-major identity
  w[3] = 1.0;
  CHECK(p.value(w) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(p.dim == 4);
  CHECK(p.m == 0.0);
}

TEST_CASE("rica rejects empty data") {
  Matrix empty(2, 0);
  CHECK_THROWS_AS(make_rica({0.4, empty, true}), std::invalid_argument);
  Matrix data(2, 1);
  data << 1, 1;
  CHECK_THROWS_AS(make_rica({0.0, data, true}), std::invalid_argument);
}

TEST_CASE("gradients agree with finite differences") {
  RngStream rng(8);
  const double h = 1e-5;

  const Potential quad = make_quadratic({random_spd(3, rng), Vector::Zero(3)});
  Vector coeffs(5);
  coeffs << 2, -1, 0.5, 0.3, 1;
  RegressionSpec rspec;
  rspec.true_coeffs = coeffs;
  rspec.n_samples = 200;
  rspec.data_noise_std = 0.3;
  const Potential reg = make_regression(rspec, rng).potential;
  Matrix data(3, 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) data(i, j) = rng.gaussian();
  const Potential rica = make_rica({0.4, data, true});

  for (const Potential* p : {&quad, &reg, &rica}) {
    for (int t = 0; t < 25; ++t) {
      Vector x(p->dim), u(p->dim);
      rng.fill_gaussian(x);
      rng.fill_gaussian(u);
      u.normalize();
      if (p == &rica) {
        // keep the probe away from the |.|_1 kinks
        bool near_kink = false;
        const int pd = static_cast<int>(std::lround(std::sqrt(double(p->dim))));
        Eigen::Map<const Matrix> W(x.data(), pd, pd);
        for (int c = 0; c < data.cols(); ++c)
          if (((W * data.col(c)).cwiseAbs().array() < 1e-2).any()) near_kink = true;
        if (near_kink) continue;
      }
      const double fd = fd_directional(*p, x, u, h);
      const double an = p->grad(x).dot(u);
      CHECK(std::abs(fd - an) <= 1e-6 * (1.0 + std::abs(an)));
    }
  }
}

TEST_CASE("verify_assumptions reports the sharp Lipschitz ratio on diag(1,4)") {
  const Potential p = diag14();
  RngStream rng(9);
  const AssumptionReport rep = verify_assumptions(p, 500, rng);
  CHECK(rep.L_ok);
  CHECK(rep.L_hat <= 4.0 + 1e-9);
  CHECK(rep.L_hat >= 4.0 - 1e-6);
  CHECK(rep.m_ok);
  CHECK(rep.G_hat > 0.0);
}

TEST_CASE("verify_assumptions refutes a fake convexity constant on rica") {
  RngStream rng(10);
  Matrix data(2, 3);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) data(i, j) = rng.gaussian();
  Potential p = make_rica({0.4, data, true});
  p.m = 0.1;  // false claim: the objective is non-convex
  const AssumptionReport rep = verify_assumptions(p, 2000, rng, {Vector(), 3.0});
  CHECK_FALSE(rep.m_ok);
}

TEST_CASE("verify_assumptions validates its inputs") {
  const Potential p = diag14();
  RngStream rng(11);
  CHECK_THROWS_AS(verify_assumptions(p, 1, rng), std::invalid_argument);
  CHECK_THROWS_AS(verify_assumptions(p, 10, rng, {Vector(), 0.0}),
                  std::invalid_argument);
}

TEST_CASE("kernel reductions: serial and parallel paths are bit-identical") {
  RngStream rng(12);
  const std::int64_t n = 4097;  // not a multiple of the block size
  std::vector<double> ts(n), ys(n);
  for (std::int64_t i = 0; i < n; ++i) {
    ts[i] = rng.uniform(-1.0, 1.0);
    ys[i] = rng.gaussian();
  }
  Vector x(5), a(5), b(5);
  rng.fill_gaussian(x);
  kernels::regression_grad(ts, ys, nullptr, n, x, a, false);
  kernels::regression_grad(ts, ys, nullptr, n, x, b, true);
  for (int i = 0; i < 5; ++i) CHECK(a[i] == b[i]);

  Matrix data(4, 257);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 257; ++j) data(i, j) = rng.gaussian();
  Vector w(16), ga(16), gb(16);
  rng.fill_gaussian(w);
  const double va = kernels::rica_value(data, nullptr, 257, 0.4, w, false);
  const double vb = kernels::rica_value(data, nullptr, 257, 0.4, w, true);
  CHECK(va == vb);
  kernels::rica_grad(data, nullptr, 257, 0.4, w, ga, false);
  kernels::rica_grad(data, nullptr, 257, 0.4, w, gb, true);
  for (int i = 0; i < 16; ++i) CHECK(ga[i] == gb[i]);
}

TEST_CASE("kernel index selection matches a manual subset average") {
  RngStream rng(13);
  const std::int64_t n = 50;
  std::vector<double> ts(n), ys(n);
  for (std::int64_t i = 0; i < n; ++i) {
    ts[i] = rng.uniform(-1.0, 1.0);
    ys[i] = rng.gaussian();
  }
  Vector x(5);
  rng.fill_gaussian(x);
  const std::vector<std::int64_t> idx = {3, 11, 11, 42};
  Vector out(5);
  kernels::regression_grad(ts, ys, idx.data(), 4, x, out, false);

  Vector manual = Vector::Zero(5);
  for (std::int64_t i : idx) {
    Vector f(5);
    const double t = ts[i];
    f << t, t * t, t * t * t, t * t * t * t, 1.0;
    manual += (f.dot(x) - ys[i]) * f;
  }
  manual /= 4.0;
  CHECK((out - manual).norm() <= 1e-12 * (1.0 + manual.norm()));
}
