#include "asgld/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace asgld {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double ceil_to_count(double v) {
  if (!(v >= 0.0)) return 0.0;
  return std::ceil(v);
}

std::array<double, 6> gamma_components(const TheoryParams& tp) {
  const double m = tp.m, L = tp.L, sigma = tp.sigma, G = tp.G, eps = tp.eps;
  const double d = static_cast<double>(tp.d);
  const double tau = static_cast<double>(tp.tau);
  std::array<double, 6> c{};
  c[0] = eps / (L * d + L * L * tau * tau * sigma);
  c[1] = std::sqrt(eps) / ((L + L * L + tau * tau * L * L) * G * G);
  c[2] = tp.tau > 0 ? std::sqrt(eps) * m / (L * tau * G) : kInf;
  c[3] = std::pow(eps, 2.0 / 3.0) /
         (2.0 * sigma / (1.65 * L + std::sqrt(sigma) * std::sqrt(m)) +
          1.65 * (L / m) + tau * L * std::sqrt(sigma) / m);
  c[4] = L * L / (L * L + L * L * L * L);
  c[5] = 1.0 / 12.0;
  return c;
}

double phi(double gamma, double L) {
  return L * L / 4.0 + 2.0 * gamma * L * L +
         gamma * gamma * (L * L + L * L * L * L);
}

}  // namespace

void validate(const TheoryParams& tp) {
  if (!(tp.m > 0.0)) throw std::invalid_argument("TheoryParams: m must be positive");
  if (!(tp.L > 0.0)) throw std::invalid_argument("TheoryParams: L must be positive");
  if (tp.m > tp.L) throw std::invalid_argument("TheoryParams: m must not exceed L");
  if (tp.d < 1) throw std::invalid_argument("TheoryParams: d must be >= 1");
  if (!(tp.sigma > 0.0))
    throw std::invalid_argument("TheoryParams: sigma must be positive");
  if (!(tp.G > 0.0)) throw std::invalid_argument("TheoryParams: G must be positive");
  if (tp.tau < 0) throw std::invalid_argument("TheoryParams: tau must be >= 0");
  if (!(tp.eps > 0.0))
    throw std::invalid_argument("TheoryParams: eps must be positive");
  if (!(tp.W2_0 > 0.0))
    throw std::invalid_argument("TheoryParams: W2_0 must be positive");
}

std::vector<std::string> theory_warnings(const TheoryParams& tp) {
  std::vector<std::string> w;
  if (tp.eps >= 1.0)
    w.push_back("eps >= 1: the accuracy prescriptions are vacuous at this target");
  return w;
}

GammaBreakdown gamma_eps_kl(const TheoryParams& tp) {
  validate(tp);
  GammaBreakdown b;
  b.components = gamma_components(tp);
  b.gamma = *std::min_element(b.components.begin(), b.components.end()) / 4.0;
  return b;
}

std::int64_t n_eps_kl(const TheoryParams& tp, double gamma) {
  validate(tp);
  if (!(gamma > 0.0)) throw std::invalid_argument("n_eps_kl: gamma must be positive");
  const double iters = ceil_to_count(tp.W2_0 * tp.W2_0 / (gamma * tp.eps));
  const double n = 2.0 * std::max(iters, static_cast<double>(tp.tau));
  if (n >= 9.2e18) throw std::invalid_argument("n_eps_kl: iteration count overflows");
  return static_cast<std::int64_t>(n);
}

GammaBreakdown gamma_eps_w2(const TheoryParams& tp) {
  validate(tp);
  GammaBreakdown b;
  b.components = gamma_components(tp);
  b.gamma =
      tp.m * *std::min_element(b.components.begin(), b.components.end()) / 8.0;
  return b;
}

std::int64_t n_eps_w2(const TheoryParams& tp, double gamma) {
  validate(tp);
  if (!(gamma > 0.0)) throw std::invalid_argument("n_eps_w2: gamma must be positive");
  const double mix =
      ceil_to_count(std::log(4.0 * tp.W2_0 * tp.W2_0 / tp.eps) / (gamma * tp.m));
  const double tau_term =
      tp.tau > 0 ? ceil_to_count(std::log(static_cast<double>(tp.tau))) : 0.0;
  const double n = 2.0 * std::max(mix, tau_term);
  if (n >= 9.2e18) throw std::invalid_argument("n_eps_w2: iteration count overflows");
  return static_cast<std::int64_t>(n);
}

BoundBreakdown theorem_bound_rhs(const StepSchedule& s, const TheoryParams& tp,
                                 std::int64_t N, std::int64_t n, double W2_N,
                                 const std::vector<double>& grad_sq_seq,
                                 const std::vector<double>& s_dist_seq) {
  validate(tp);
  if (n < 1) throw std::invalid_argument("theorem_bound_rhs: n must be >= 1");
  if (N < tp.tau)
    throw std::invalid_argument("theorem_bound_rhs: need N >= tau");
  if (!(W2_N >= 0.0))
    throw std::invalid_argument("theorem_bound_rhs: W2_N must be >= 0");
  const auto window = static_cast<std::size_t>(n + tp.tau);
  if (grad_sq_seq.size() != window || s_dist_seq.size() != window)
    throw std::invalid_argument(
        "theorem_bound_rhs: sequences must cover k = N+1-tau .. N+n");
  if (!validate_schedule(s, tp.m, tp.L, N + n))
    throw std::invalid_argument(
        "theorem_bound_rhs: schedule violates the required conditions");

  const double L = tp.L, sigma = tp.sigma;
  const double tau = static_cast<double>(tp.tau);
  double lambda_sum = 0.0;
  for (std::int64_t k = N + 1; k <= N + n; ++k) lambda_sum += s.lambda(k);
  if (!(lambda_sum > 0.0))
    throw std::invalid_argument("theorem_bound_rhs: degenerate weight sum");

  BoundBreakdown b;
  {
    const double g1 = s.gamma(N + 1);
    b.transient = s.lambda(N + 1) * (1.0 - tp.m * g1) * W2_N /
                  (2.0 * g1 * lambda_sum);
  }
  // seq index 0 corresponds to k = N+1-tau.
  auto at = [&](const std::vector<double>& v, std::int64_t k) {
    return v[static_cast<std::size_t>(k - (N + 1 - tp.tau))];
  };
  for (std::int64_t k = N + 1; k <= N + n; ++k) {
    const double g = s.gamma(k);
    const double l = s.lambda(k);
    b.discretization += g * l * L * static_cast<double>(tp.d);
    b.delay += 2.0 * g * l * tau * tau * sigma * phi(g, L);
    b.s_dist += at(s_dist_seq, k);
  }
  for (std::int64_t k = N + 1 - tp.tau; k <= N + n - 1; ++k) {
    const double g = s.gamma(k);
    const double grad_sq = std::min(at(grad_sq_seq, k), tp.G * tp.G);
    b.gradient +=
        g * g * (L / 2.0 + L * L / 2.0 + tau * tau * phi(g, L)) * grad_sq;
  }
  b.discretization /= lambda_sum;
  b.delay /= lambda_sum;
  b.s_dist /= lambda_sum;
  b.gradient /= lambda_sum;
  b.total = b.transient + b.discretization + b.delay + b.s_dist + b.gradient;
  return b;
}

double bias_bound(double L, double tau, double gamma, double G, double sigma) {
  if (L < 0.0 || tau < 0.0 || gamma < 0.0 || G < 0.0 || sigma < 0.0)
    throw std::invalid_argument("bias_bound: arguments must be nonnegative");
  return L * tau * (gamma * G + std::sqrt(gamma * sigma));
}

}  // namespace asgld
