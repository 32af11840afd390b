#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "asgld/executor.hpp"
#include "asgld/potentials.hpp"
#include "asgld/simulator.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void print_row(const std::string& name, std::int64_t updates, double secs) {
  std::cout << std::left << std::setw(28) << name << std::right << std::setw(10)
            << updates << " updates  " << std::setw(10) << std::fixed
            << std::setprecision(3) << secs << " s  " << std::setw(12)
            << std::setprecision(0) << (updates / secs) << " upd/s\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Throughput comparison: serial reference vs multi-worker schemes"};
  std::int64_t updates = 20000;
  int dim = 16;
  std::vector<int> workers{1, 2, 4, 8};
  std::int64_t kernel_samples = 200000;
  app.add_option("--updates", updates, "applied updates per case");
  app.add_option("--dim", dim, "quadratic dimension");
  app.add_option("--workers", workers, "worker counts for the schemes");
  app.add_option("--kernel-samples", kernel_samples,
                 "dataset size for the gradient-kernel comparison");
  CLI11_PARSE(app, argc, argv);

  asgld::Matrix A = asgld::Matrix::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) A(i, i) = 1.0 + i / static_cast<double>(dim);
  const asgld::Potential p =
      asgld::make_quadratic({A, asgld::Vector::Zero(dim)});
  const asgld::StepSchedule sched = asgld::StepSchedule::constant(1e-3);
  const asgld::NoiseParams noise{1.0};
  const asgld::Vector x0 = asgld::Vector::Constant(dim, 1.0);

  std::cout << "== scheme throughput (quadratic, d=" << dim << ") ==\n";
  {
    asgld::SimOptions so;
    so.record_stride = updates;  // keep recording out of the hot loop
    auto t0 = Clock::now();
    asgld::simulate(p, sched, noise, asgld::DelayModel::none(), updates, x0, 1,
                    so);
    print_row("sim (serial reference)", updates, seconds_since(t0));
  }
  for (int P : workers) {
    asgld::WorkerConfig wc;
    wc.workers = P;
    wc.updates = updates;
    wc.seed = 1;
    wc.x0 = x0;
    wc.record_stride = updates;
    wc.timed = false;
    {
      auto t0 = Clock::now();
      asgld::run_sync(p, sched, noise, wc);
      print_row("sync P=" + std::to_string(P), updates, seconds_since(t0));
    }
    {
      auto t0 = Clock::now();
      asgld::run_wcon(p, sched, noise, wc);
      print_row("wcon P=" + std::to_string(P), updates, seconds_since(t0));
    }
    {
      auto t0 = Clock::now();
      asgld::run_wicon(p, sched, noise, wc);
      print_row("wicon P=" + std::to_string(P), updates, seconds_since(t0));
    }
  }

  std::cout << "\n== gradient kernel (regression, n=" << kernel_samples
            << ") ==\n";
  asgld::RegressionSpec spec;
  spec.true_coeffs = asgld::Vector::Zero(5);
  spec.true_coeffs << 2.0, -1.0, 0.5, 0.3, 1.0;
  spec.n_samples = kernel_samples;
  spec.data_noise_std = 1.0;
  asgld::RngStream rng(7);
  // Rebuild the raw sample arrays the kernels consume.
  std::vector<double> ts(static_cast<std::size_t>(kernel_samples));
  std::vector<double> ys(static_cast<std::size_t>(kernel_samples));
  for (std::int64_t i = 0; i < kernel_samples; ++i) {
    const double t = rng.uniform(-1.0, 1.0);
    const double f = spec.true_coeffs[0] * t + spec.true_coeffs[1] * t * t +
                     spec.true_coeffs[2] * t * t * t +
                     spec.true_coeffs[3] * t * t * t * t + spec.true_coeffs[4];
    ts[static_cast<std::size_t>(i)] = t;
    ys[static_cast<std::size_t>(i)] = f + rng.gaussian();
  }
  asgld::Vector x = asgld::Vector::Constant(5, 0.5), g_serial(5), g_parallel(5);
  const int reps = 20;
  double secs_serial = 0.0, secs_parallel = 0.0;
  {
    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r)
      asgld::kernels::regression_grad(ts, ys, nullptr, kernel_samples, x,
                                      g_serial, false);
    secs_serial = seconds_since(t0);
  }
  {
    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r)
      asgld::kernels::regression_grad(ts, ys, nullptr, kernel_samples, x,
                                      g_parallel, true);
    secs_parallel = seconds_since(t0);
  }
  const bool identical = g_serial == g_parallel;
  std::cout << "serial   " << std::setprecision(3) << secs_serial / reps
            << " s/pass\nparallel " << secs_parallel / reps << " s/pass\n"
            << "outputs bit-identical: " << (identical ? "yes" : "NO") << "\n";
  return identical ? 0 : 1;
}
