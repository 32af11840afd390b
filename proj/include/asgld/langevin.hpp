#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "asgld/types.hpp"

namespace asgld {

// Step-size sequence gamma_k and averaging weights lambda_k, both indexed
// from k = 1 and non-increasing. validate_schedule() checks the conditions
// the convergence theory needs.
struct StepSchedule {
  std::function<double(std::int64_t)> gamma;
  std::function<double(std::int64_t)> lambda;

  static StepSchedule constant(double gamma0, double lambda0 = 1.0);
  // gamma0 * k^-a and lambda0 * k^-b.
  static StepSchedule power(double gamma0, double a, double lambda0 = 1.0,
                            double b = 0.0);
};

struct NoiseParams {
  double sigma = 1.0;  // diffusion temperature; injected noise is sqrt(2*sigma*gamma)*z
};

// One Euler-Maruyama step: x - gamma*g + sqrt(2*sigma*gamma)*z.
// The Gaussian draw z is supplied by the caller so executors control the
// noise sequence independently of scheduling.
Vector em_step(const Vector& x, const Vector& g, double gamma, double sigma,
               const Vector& z);

// Same update with a gradient evaluated at a staleness-resolved iterate.
Vector delayed_step(const Vector& x_now, const Vector& g_stale, double gamma,
                    double sigma, const Vector& z);

// In-place form used by the hot loops.
void em_step_inplace(Vector& x, const Vector& g, double gamma, double sigma,
                     const Vector& z);

// Checks positivity, monotonicity, the lambda/gamma chain condition
// lambda_{k+1}(1-m*gamma_{k+1})/gamma_{k+1} <= lambda_k/gamma_k, and the
// gamma_1 < 1/(2(L^2+L^4)) cap, for k = 1..horizon.
bool validate_schedule(const StepSchedule& s, double m, double L,
                       std::int64_t horizon);

// Normalized weights (lambda_{N+1},...,lambda_{N+n}) / Lambda_{N,N+n} for the
// averaged measure over iterates N+1..N+n.
std::vector<double> averaged_weights(const StepSchedule& s, std::int64_t N,
                                     std::int64_t n);

}  // namespace asgld
