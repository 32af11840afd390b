#include "asgld/langevin.hpp"

#include <cmath>
#include <stdexcept>

namespace asgld {

StepSchedule StepSchedule::constant(double gamma0, double lambda0) {
  StepSchedule s;
  s.gamma = [gamma0](std::int64_t) { return gamma0; };
  s.lambda = [lambda0](std::int64_t) { return lambda0; };
  return s;
}

StepSchedule StepSchedule::power(double gamma0, double a, double lambda0,
                                 double b) {
  StepSchedule s;
  s.gamma = [gamma0, a](std::int64_t k) {
    return gamma0 * std::pow(static_cast<double>(k), -a);
  };
  s.lambda = [lambda0, b](std::int64_t k) {
    return lambda0 * std::pow(static_cast<double>(k), -b);
  };
  return s;
}

static void check_step_args(const Vector& x, const Vector& g, double gamma,
                            double sigma, const Vector& z) {
  if (gamma <= 0.0) throw std::invalid_argument("em_step: gamma must be positive");
  if (sigma < 0.0) throw std::invalid_argument("em_step: sigma must be nonnegative");
  require_dim(g, x.size(), "em_step: gradient");
  require_dim(z, x.size(), "em_step: noise");
}

// All update paths (simulator, barrier/locked/lock-free executors) share one
// arithmetic form, delta_i = c*z_i - gamma*g_i applied by addition, so the
// P=1 degenerate cases of every scheme reproduce this step bit-exactly.
Vector em_step(const Vector& x, const Vector& g, double gamma, double sigma,
               const Vector& z) {
  check_step_args(x, g, gamma, sigma, z);
  const double c = std::sqrt(2.0 * sigma * gamma);
  return x + (c * z - gamma * g);
}

Vector delayed_step(const Vector& x_now, const Vector& g_stale, double gamma,
                    double sigma, const Vector& z) {
  return em_step(x_now, g_stale, gamma, sigma, z);
}

void em_step_inplace(Vector& x, const Vector& g, double gamma, double sigma,
                     const Vector& z) {
  check_step_args(x, g, gamma, sigma, z);
  const double c = std::sqrt(2.0 * sigma * gamma);
  x.noalias() += c * z - gamma * g;
}

bool validate_schedule(const StepSchedule& s, double m, double L,
                       std::int64_t horizon) {
  if (horizon < 1) throw std::invalid_argument("validate_schedule: horizon must be >= 1");
  const double cap = 1.0 / (2.0 * (L * L + L * L * L * L));
  double g_prev = s.gamma(1);
  double l_prev = s.lambda(1);
  if (!(g_prev > 0.0) || !(l_prev > 0.0)) return false;
  if (!(g_prev < cap)) return false;
  for (std::int64_t k = 2; k <= horizon; ++k) {
    double g = s.gamma(k);
    double l = s.lambda(k);
    if (!(g > 0.0) || !(l > 0.0)) return false;
    if (g > g_prev || l > l_prev) return false;
    // lambda_k (1 - m*gamma_k)/gamma_k <= lambda_{k-1}/gamma_{k-1}
    if (l * (1.0 - m * g) / g > l_prev / g_prev * (1.0 + 1e-12)) return false;
    g_prev = g;
    l_prev = l;
  }
  return true;
}

std::vector<double> averaged_weights(const StepSchedule& s, std::int64_t N,
                                     std::int64_t n) {
  if (n < 1) throw std::invalid_argument("averaged_weights: n must be >= 1");
  std::vector<double> w(static_cast<std::size_t>(n));
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    double l = s.lambda(N + 1 + i);
    if (!(l > 0.0))
      throw std::invalid_argument("averaged_weights: lambda must be positive");
    w[static_cast<std::size_t>(i)] = l;
    total += l;
  }
  for (double& v : w) v /= total;
  return w;
}

}  // namespace asgld
