#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "asgld/langevin.hpp"

namespace asgld {

// Problem constants the convergence prescriptions depend on.
struct TheoryParams {
  double m = 0.0;       // strong-convexity constant
  double L = 0.0;       // gradient Lipschitz constant
  int d = 0;            // dimension
  double sigma = 0.0;   // diffusion temperature
  double G = 0.0;       // gradient-norm bound
  std::int64_t tau = 0; // maximum delay
  double eps = 0.0;     // target accuracy
  double W2_0 = 0.0;    // initial Wasserstein-2 distance to the target
};

// Throws std::invalid_argument unless m, L, sigma, G, eps, W2_0 > 0,
// d >= 1, tau >= 0 and m <= L.
void validate(const TheoryParams& tp);

// Non-fatal diagnostics (currently: eps >= 1 makes the bounds vacuous).
std::vector<std::string> theory_warnings(const TheoryParams& tp);

struct GammaBreakdown {
  double gamma = 0.0;
  // Components gamma^1..gamma^6. gamma^3 is +infinity when tau = 0 (the
  // delay-free case is not penalized by a delay-only component).
  std::array<double, 6> components{};
};

// Step size guaranteeing KL(nu_n | pi) <= eps: min(components)/4.
GammaBreakdown gamma_eps_kl(const TheoryParams& tp);

// Matching iteration count: 2*max(ceil(W2_0^2/(gamma*eps)), tau).
std::int64_t n_eps_kl(const TheoryParams& tp, double gamma);

// W2 variant: step size m*min(components)/8, iteration count
// 2*max(ceil(ln(4*W2_0^2/eps)/(gamma*m)), ceil(max(0, ln tau))).
GammaBreakdown gamma_eps_w2(const TheoryParams& tp);
std::int64_t n_eps_w2(const TheoryParams& tp, double gamma);

// Labeled right-hand side of the averaged-measure KL bound. Each field is
// already divided by Lambda_{N,N+n}; total is their sum.
struct BoundBreakdown {
  double transient = 0.0;
  double discretization = 0.0;
  double delay = 0.0;
  double s_dist = 0.0;
  double gradient = 0.0;
  double total = 0.0;
};

// W2_N is W2^2(mu_0 Q^N, pi). grad_sq_seq supplies E||grad U(X_k)||^2 and
// s_dist_seq supplies W2^2(mu_0 S^k, pi) for k = N+1-tau .. N+n (length
// n + tau each); gradient entries are capped at G^2. Requires N >= tau so
// the window stays inside the schedule domain.
BoundBreakdown theorem_bound_rhs(const StepSchedule& s, const TheoryParams& tp,
                                 std::int64_t N, std::int64_t n, double W2_N,
                                 const std::vector<double>& grad_sq_seq,
                                 const std::vector<double>& s_dist_seq);

// Stale-gradient bias: L*tau*(gamma*G + sqrt(gamma*sigma)).
double bias_bound(double L, double tau, double gamma, double G, double sigma);

}  // namespace asgld
