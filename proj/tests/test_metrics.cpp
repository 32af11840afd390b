#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "asgld/metrics.hpp"
#include "asgld/simulator.hpp"

using namespace asgld;

namespace {

SampleCloud cloud_of(std::initializer_list<std::initializer_list<double>> rows) {
  const int n = static_cast<int>(rows.size());
  const int d = static_cast<int>(rows.begin()->size());
  Matrix m(n, d);
  int i = 0;
  for (const auto& row : rows) {
    int j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return make_cloud(std::move(m));
}

SampleCloud random_cloud(int n, int d, RngStream& rng) {
  Matrix m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.gaussian();
  return make_cloud(std::move(m));
}

// Exhaustive assignment search; the ground truth for small equal-size clouds.
double w2_brute_force(const SampleCloud& a, const SampleCloud& b) {
  const int n = static_cast<int>(a.size());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i)
      total += (a.points.row(i) - b.points.row(perm[static_cast<std::size_t>(i)]))
                   .squaredNorm();
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / n);
}

GaussianMeasure gauss(Vector mean, Matrix cov) { return {std::move(mean), std::move(cov)}; }

}  // namespace

TEST_CASE("w2_empirical identity and single-atom transport") {
  const SampleCloud a = cloud_of({{0, 0}, {1, 2}, {-1, 3}});
  CHECK(w2_empirical(a, a) == 0.0);
  const SampleCloud o = cloud_of({{0, 0}});
  const SampleCloud p = cloud_of({{3, 4}});
  CHECK(w2_empirical(o, p) == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("w2_empirical two-point example") {
  const SampleCloud a = cloud_of({{0, 0}, {2, 0}});
  const SampleCloud b = cloud_of({{1, 0}, {3, 0}});
  CHECK(w2_empirical(a, b) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("w2_empirical matches brute force on small clouds") {
  RngStream rng(17);
  for (int t = 0; t < 40; ++t) {
    const int n = 2 + static_cast<int>(rng.uniform_below(5));
    const int d = 1 + static_cast<int>(rng.uniform_below(4));
    const SampleCloud a = random_cloud(n, d, rng);
    const SampleCloud b = random_cloud(n, d, rng);
    CHECK(w2_empirical(a, b) ==
          doctest::Approx(w2_brute_force(a, b)).epsilon(1e-10));
  }
}

TEST_CASE("w2_empirical is symmetric bitwise and permutation-invariant") {
  RngStream rng(19);
  for (int t = 0; t < 15; ++t) {
    const int n = 3 + static_cast<int>(rng.uniform_below(20));
    const SampleCloud a = random_cloud(n, 3, rng);
    const SampleCloud b = random_cloud(n, 3, rng);
    CHECK(w2_empirical(a, b) == w2_empirical(b, a));

    Matrix shuffled = a.points;
    shuffled.row(0).swap(shuffled.row(n - 1));
    CHECK(w2_empirical(make_cloud(shuffled), b) ==
          doctest::Approx(w2_empirical(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("w2_empirical triangle inequality on random triples") {
  RngStream rng(23);
  for (int t = 0; t < 25; ++t) {
    const int n = 2 + static_cast<int>(rng.uniform_below(15));
    const SampleCloud a = random_cloud(n, 2, rng);
    const SampleCloud b = random_cloud(n, 2, rng);
    const SampleCloud c = random_cloud(n, 2, rng);
    CHECK(w2_empirical(a, c) <=
          w2_empirical(a, b) + w2_empirical(b, c) + 1e-9);
  }
}

TEST_CASE("weighted transport agrees with a replicated assignment oracle") {
  RngStream rng(29);
  Matrix a(3, 2), b(6, 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) a(i, j) = rng.gaussian();
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 2; ++j) b(i, j) = rng.gaussian();
  Vector w(3);
  w << 2.0 / 6, 1.0 / 6, 3.0 / 6;
  const double lp = w2_empirical(make_cloud(a, w), make_cloud(b));

  Matrix rep(6, 2);
  const int owner[6] = {0, 0, 1, 2, 2, 2};
  for (int i = 0; i < 6; ++i) rep.row(i) = a.row(owner[i]);
  const double oracle = w2_empirical(make_cloud(rep), make_cloud(b));
  CHECK(lp == doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("unequal-size uniform clouds route through the transport LP") {
  RngStream rng(31);
  const SampleCloud a = random_cloud(40, 2, rng);
  const SampleCloud b = random_cloud(100, 2, rng);
  const double v = w2_empirical(a, b);
  CHECK(std::isfinite(v));
  CHECK(v >= 0.0);
  CHECK(w2_empirical(a, b) == w2_empirical(b, a));
  // against itself with explicit uniform weights: still zero
  Vector uw = Vector::Constant(40, 1.0 / 40);
  CHECK(w2_empirical(make_cloud(a.points, uw), a) <= 1e-7);
}

TEST_CASE("w2_empirical rejects invalid inputs") {
  const SampleCloud a = cloud_of({{0, 0}});
  const SampleCloud b3 = make_cloud(Matrix::Zero(2, 3));
  CHECK_THROWS_AS(w2_empirical(a, b3), std::invalid_argument);
  CHECK_THROWS_AS(make_cloud(Matrix(0, 2)), std::invalid_argument);
  Vector negw(2);
  negw << 1.5, -0.5;
  CHECK_THROWS_AS(make_cloud(Matrix::Zero(2, 2), negw), std::invalid_argument);
  Vector badsum(2);
  badsum << 0.7, 0.7;
  CHECK_THROWS_AS(make_cloud(Matrix::Zero(2, 2), badsum), std::invalid_argument);
}

TEST_CASE("w2_gaussian closed form") {
  const Matrix I2 = Matrix::Identity(2, 2);
  CHECK(w2_gaussian(gauss(Vector::Zero(2), I2), gauss(Vector::Zero(2), I2)) ==
        0.0);
  Vector m2(2);
  m2 << 3, 4;
  CHECK(w2_gaussian(gauss(Vector::Zero(2), I2), gauss(m2, I2)) ==
        doctest::Approx(5.0).epsilon(1e-12));
  CHECK(w2_gaussian(gauss(Vector::Zero(2), I2), gauss(Vector::Zero(2), 4.0 * I2)) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("w2_gaussian rejects non-PSD covariances") {
  Matrix bad = Matrix::Identity(2, 2);
  bad(1, 1) = -0.1;
  CHECK_THROWS_AS(w2_gaussian(gauss(Vector::Zero(2), bad),
                              gauss(Vector::Zero(2), Matrix::Identity(2, 2))),
                  std::invalid_argument);
}

TEST_CASE("empirical W2 between Gaussian samples approaches the closed form") {
  RngStream rng(37);
  Vector m1 = Vector::Zero(2), m2(2);
  m2 << 2, 0;
  const Matrix cov = Matrix::Identity(2, 2);
  const SampleCloud a = sample_gaussian(gauss(m1, cov), 800, rng);
  const SampleCloud b = sample_gaussian(gauss(m2, cov), 800, rng);
  const double exact = w2_gaussian(gauss(m1, cov), gauss(m2, cov));
  CHECK(w2_empirical(a, b) == doctest::Approx(exact).epsilon(0.20));
}

TEST_CASE("kl_histogram two-bin example") {
  Matrix pts(4, 1);
  pts << 0.5, 0.5, 1.5, 1.5;  // p = (1/2, 1/2)
  GridSpec grid = GridSpec::cube(1, 0.0, 2.0, 2);
  // exp(log_u) at centers 0.5 and 1.5 normalizes to q = (1/4, 3/4)
  auto log_u = [](const Vector& x) {
    return x[0] < 1.0 ? std::log(0.25) : std::log(0.75);
  };
  const double kl = kl_histogram(make_cloud(pts), log_u, grid);
  CHECK(kl == doctest::Approx(0.5 * std::log(2.0) - 0.5 * std::log(1.5))
                  .epsilon(1e-12));
  CHECK(kl == doctest::Approx(0.1438).epsilon(1e-3));
}

TEST_CASE("kl_histogram vanishes when samples mirror the density") {
  Matrix pts(8, 1);
  pts << 0.25, 0.25, 0.75, 0.75, 1.25, 1.25, 1.75, 1.75;
  GridSpec grid = GridSpec::cube(1, 0.0, 2.0, 4);
  const double kl =
      kl_histogram(make_cloud(pts), [](const Vector&) { return 0.0; }, grid);
  CHECK(std::abs(kl) <= 1e-12);
}

TEST_CASE("kl_histogram on exact standard normal draws") {
  RngStream rng(41);
  Matrix pts(100000, 1);
  for (int i = 0; i < pts.rows(); ++i) pts(i, 0) = rng.gaussian();
  GridSpec grid = GridSpec::cube(1, -6.0, 6.0, 64);
  const double kl = kl_histogram(
      make_cloud(std::move(pts)), [](const Vector& x) { return -0.5 * x[0] * x[0]; },
      grid);
  CHECK(kl >= -1e-9);
  CHECK(kl <= 0.01);
}

TEST_CASE("kl_histogram leakage policy") {
  Matrix pts(200, 1);
  for (int i = 0; i < 200; ++i) pts(i, 0) = 0.5;
  pts(0, 0) = 50.0;  // 0.5% leakage: tolerated
  GridSpec grid = GridSpec::cube(1, 0.0, 1.0, 2);
  const double kl = kl_histogram(make_cloud(pts),
                                 [](const Vector&) { return 0.0; }, grid);
  CHECK(std::isfinite(kl));

  Matrix bad(50, 1);
  for (int i = 0; i < 50; ++i) bad(i, 0) = 0.5;
  bad(0, 0) = 50.0;
  bad(1, 0) = -3.0;  // 4% leakage: data incompatible with the grid
  CHECK_THROWS_AS(kl_histogram(make_cloud(bad),
                               [](const Vector&) { return 0.0; }, grid),
                  data_error);
}

TEST_CASE("kl_histogram is nonnegative on random inputs") {
  RngStream rng(43);
  for (int t = 0; t < 10; ++t) {
    Matrix pts(500, 2);
    for (int i = 0; i < 500; ++i)
      for (int j = 0; j < 2; ++j) pts(i, j) = std::tanh(rng.gaussian());
    GridSpec grid = GridSpec::cube(2, -1.0, 1.0, 5);
    const double a = rng.uniform(0.2, 2.0);
    const double kl = kl_histogram(
        make_cloud(pts),
        [a](const Vector& x) { return -a * x.squaredNorm(); }, grid);
    CHECK(kl >= -1e-9);
  }
}

TEST_CASE("laplace surrogate is exact for quadratics") {
  Matrix A = Matrix::Zero(2, 2);
  A(0, 0) = 1.0;
  A(1, 1) = 4.0;
  Vector b(2);
  b << 1, 2;
  const Potential p = make_quadratic({A, b});
  const Vector xs = *p.minimizer;
  const GaussianMeasure g = laplace_gaussian(p, xs, 0.5);
  CHECK((g.mean - xs).norm() <= 1e-12);
  CHECK((g.cov - 0.5 * A.inverse()).norm() <= 1e-12);
}

TEST_CASE("laplace surrogate from finite differences matches the exact one") {
  Matrix A(2, 2);
  A << 2, 0.3, 0.3, 1;
  const Potential p = make_quadratic({A, Vector::Zero(2)});
  Potential no_hess = p;
  no_hess.hessian_fn = nullptr;
  const GaussianMeasure exact = laplace_gaussian(p, Vector::Zero(2), 1.0);
  const GaussianMeasure fd = laplace_gaussian(no_hess, Vector::Zero(2), 1.0);
  CHECK((exact.cov - fd.cov).norm() <= 1e-6);
}

TEST_CASE("laplace_reference sample mean obeys the CLT") {
  Matrix A = Matrix::Identity(3, 3) * 2.0;
  Vector b(3);
  b << 2, -2, 4;
  const Potential p = make_quadratic({A, b});
  const Vector xs = *p.minimizer;
  RngStream rng(47);
  const std::int64_t n = 100000;
  const SampleCloud ref = laplace_reference(p, xs, 1.0, n, rng);
  REQUIRE(ref.size() == n);
  const Moments mom = moments(ref);
  const double axis_sd = std::sqrt(0.5);  // sigma * A^{-1} = I/2
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(mom.mean[i] - xs[i]) <=
          3.0 * axis_sd / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("laplace_reference rejects indefinite curvature") {
  Potential p;
  p.dim = 2;
  p.L = 1.0;
  p.kind = "saddle";
  p.value_fn = [](const Vector& x) { return 0.5 * (x[0] * x[0] - x[1] * x[1]); };
  p.grad_fn = [](const Vector& x, Vector& out) {
    out = x;
    out[1] = -x[1];
  };
  p.stoch_grad_fn = [&](const Vector& x, const BatchSpec&, RngStream&,
                        Vector& out) {
    out = x;
    out[1] = -x[1];
  };
  RngStream rng(53);
  CHECK_THROWS_AS(laplace_reference(p, Vector::Zero(2), 1.0, 10, rng),
                  numerical_error);
}

TEST_CASE("trailing_cloud windows the record tail") {
  Matrix A = Matrix::Identity(2, 2);
  const Potential p = make_quadratic({A, Vector::Zero(2)});
  Vector x0(2);
  x0 << 1, 0;
  const RunRecord r = simulate(p, StepSchedule::constant(0.01), {1.0},
                               DelayModel::none(), 50, x0, 59);
  const SampleCloud last = trailing_cloud(r, 1);
  REQUIRE(last.size() == 1);
  CHECK(last.points(0, 0) == r.iterates.back()[0]);
  const SampleCloud tail = trailing_cloud(r, 20);
  REQUIRE(tail.size() == 20);
  CHECK(tail.points(0, 0) == r.iterates[30][0]);
  CHECK_THROWS_AS(trailing_cloud(r, 0), std::invalid_argument);
  CHECK_THROWS_AS(trailing_cloud(r, 51), std::invalid_argument);
}

TEST_CASE("moments of a two-point cloud use the unbiased estimator") {
  const SampleCloud c = cloud_of({{0, 0}, {2, 0}});
  const Moments mom = moments(c);
  CHECK(mom.mean[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(mom.mean[1] == 0.0);
  CHECK(mom.cov(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(mom.cov(0, 1) == 0.0);
  CHECK(mom.cov(1, 1) == 0.0);
}

TEST_CASE("weighted moments with uniform weights match the unweighted path") {
  RngStream rng(61);
  const SampleCloud c = random_cloud(50, 3, rng);
  const SampleCloud cw = make_cloud(c.points, Vector::Constant(50, 0.02));
  const Moments a = moments(c);
  const Moments b = moments(cw);
  CHECK((a.mean - b.mean).norm() <= 1e-12);
  CHECK((a.cov - b.cov).norm() <= 1e-12);
}
