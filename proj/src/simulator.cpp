#include "asgld/simulator.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace asgld {
namespace {

using Clock = std::chrono::steady_clock;

// Delay bookkeeping convention, fixed by the module's oracle examples: a
// delay of tau at the step producing x_K reads x_{max(0, K - max(tau,1))},
// so tau=0 and tau=1 both read the latest state (a step never reads its own
// output), and recorded delays are clipped to K during warm-up.
std::int64_t record_delay(std::int64_t tau, std::int64_t K) {
  return tau < K ? tau : K;
}

std::int64_t read_index(std::int64_t delay, std::int64_t K) {
  const std::int64_t back = delay > 1 ? delay : 1;
  return K > back ? K - back : 0;
}

}  // namespace

DelayModel DelayModel::none() { return DelayModel{}; }

DelayModel DelayModel::fixed(std::int64_t tau0) {
  DelayModel dm;
  dm.law = Law::fixed;
  dm.tau_max = tau0;
  dm.fixed_delay = tau0;
  return dm;
}

DelayModel DelayModel::uniform(std::int64_t tau, Mode mode) {
  DelayModel dm;
  dm.law = Law::uniform;
  dm.mode = mode;
  dm.tau_max = tau;
  return dm;
}

DelayModel DelayModel::recorded(std::vector<std::int64_t> seq, Mode mode) {
  DelayModel dm;
  dm.law = Law::recorded;
  dm.mode = mode;
  std::int64_t mx = 0;
  for (auto v : seq) mx = std::max(mx, v);
  dm.tau_max = mx;
  dm.sequence = std::move(seq);
  return dm;
}

RunRecord simulate(const Potential& p, const StepSchedule& s,
                   const NoiseParams& noise, const DelayModel& dm,
                   std::int64_t n_iters, const Vector& x0, std::uint64_t seed,
                   const SimOptions& opts) {
  require_dim(x0, p.dim, "x0");
  if (n_iters < 1) throw std::invalid_argument("simulate: n_iters must be >= 1");
  if (dm.tau_max < 0) throw std::invalid_argument("simulate: tau_max must be >= 0");
  if (dm.law == DelayModel::Law::fixed &&
      (dm.fixed_delay < 0 || dm.fixed_delay > dm.tau_max))
    throw std::invalid_argument("simulate: fixed delay outside [0, tau_max]");
  if (dm.law == DelayModel::Law::recorded) {
    const std::int64_t need =
        dm.mode == DelayModel::Mode::consistent ? n_iters : n_iters * p.dim;
    if (static_cast<std::int64_t>(dm.sequence.size()) < need)
      throw std::invalid_argument("simulate: recorded delay sequence too short");
    for (auto v : dm.sequence)
      if (v < 0 || v > dm.tau_max)
        throw std::invalid_argument("simulate: recorded delay outside [0, tau_max]");
  }
  if (opts.record_stride < 1)
    throw std::invalid_argument("simulate: record_stride must be >= 1");
  if (opts.track_staleness && opts.record_stride != 1)
    throw std::invalid_argument("simulate: staleness tracking needs stride 1");
  if (opts.theory_check && !validate_schedule(s, p.m, p.L, n_iters))
    throw config_error("simulate: schedule fails the theory conditions");
  if (noise.sigma < 0.0)
    throw std::invalid_argument("simulate: sigma must be >= 0");

  RngStream noise_rng = RngStream::substream(seed, 0);
  RngStream delay_rng = RngStream::substream(seed, 1);
  RngStream batch_rng = RngStream::substream(seed, 2);

  RunRecord r;
  r.dim = p.dim;
  r.seed = seed;
  r.tau_max = dm.tau_max;
  r.scheme = "sim";
  r.mode = dm.mode_name();
  r.n_steps = n_iters;
  r.record_stride = opts.record_stride;
  r.x0 = x0;
  r.has_staleness = true;
  r.delay_hist.assign(static_cast<std::size_t>(dm.tau_max) + 1, 0);

  const std::int64_t depth = dm.tau_max + 1;
  std::vector<Vector> ring(static_cast<std::size_t>(depth));
  ring[0] = x0;
  Vector x = x0;
  Vector xhat(p.dim), g(p.dim), z(p.dim);
  std::vector<std::int64_t> coord_s(
      dm.mode == DelayModel::Mode::inconsistent ? static_cast<std::size_t>(p.dim)
                                                : 0);

  const bool inconsistent = dm.mode == DelayModel::Mode::inconsistent;
  const auto t0 = Clock::now();

  for (std::int64_t k = 0; k < n_iters; ++k) {
    const std::int64_t K = k + 1;  // index of the iterate this step produces
    // Resolve x-hat from the ring buffer holding x_{k-tau_max}..x_k.
    std::int64_t row_delay = 0;
    if (!inconsistent) {
      std::int64_t tau;
      switch (dm.law) {
        case DelayModel::Law::fixed: tau = dm.fixed_delay; break;
        case DelayModel::Law::uniform:
          tau = static_cast<std::int64_t>(
              delay_rng.uniform_below(static_cast<std::uint64_t>(dm.tau_max) + 1));
          break;
        default: tau = dm.sequence[static_cast<std::size_t>(k)]; break;
      }
      row_delay = record_delay(tau, K);
      xhat = ring[static_cast<std::size_t>(read_index(row_delay, K) % depth)];
    } else {
      for (int i = 0; i < p.dim; ++i) {
        std::int64_t si;
        switch (dm.law) {
          case DelayModel::Law::fixed: si = dm.fixed_delay; break;
          case DelayModel::Law::uniform:
            si = static_cast<std::int64_t>(delay_rng.uniform_below(
                static_cast<std::uint64_t>(dm.tau_max) + 1));
            break;
          default:
            si = dm.sequence[static_cast<std::size_t>(k * p.dim + i)];
            break;
        }
        si = record_delay(si, K);
        coord_s[static_cast<std::size_t>(i)] = si;
        xhat[i] = ring[static_cast<std::size_t>(read_index(si, K) % depth)][i];
        row_delay = std::max(row_delay, si);
      }
    }

    if (opts.batch)
      p.stoch_grad_fn(xhat, *opts.batch, batch_rng, g);
    else
      p.grad_fn(xhat, g);
    noise_rng.fill_gaussian(z);

    const double gamma = s.gamma(k + 1);
    if (!(gamma > 0.0)) throw config_error("simulate: nonpositive step size");
    em_step_inplace(x, g, gamma, noise.sigma, z);

    ring[static_cast<std::size_t>((k + 1) % depth)] = x;
    r.delay_hist[static_cast<std::size_t>(row_delay)]++;

    if ((k + 1) % opts.record_stride == 0) {
      r.step.push_back(k + 1);
      r.iterates.push_back(x);
      r.delays.push_back(row_delay);
      if (opts.timed)
        r.row_wall_ns.push_back(
            std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() -
                                                                 t0)
                .count());
    }
    if (opts.track_staleness) {
      r.xhat.push_back(xhat);
      if (inconsistent) r.coord_delays.push_back(coord_s);
    }
    if (opts.on_step && !opts.on_step(K, x, row_delay)) {
      r.n_steps = K;
      break;
    }
  }

  r.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() -
                                                                   t0)
                  .count();
  return r;
}

std::vector<std::int64_t> delay_histogram(const RunRecord& r) {
  if (r.n_steps < 1 || r.delay_hist.empty())
    throw std::invalid_argument("delay_histogram: empty record");
  return r.delay_hist;
}

bool check_delay_assumption(const RunRecord& r, const DelayModel& dm) {
  if (r.xhat.empty() || r.record_stride != 1)
    throw std::invalid_argument(
        "check_delay_assumption: record lacks staleness tracking");
  if (static_cast<std::int64_t>(r.xhat.size()) != r.rows()) return false;
  auto history = [&](std::int64_t j) -> const Vector& {
    return j == 0 ? r.x0 : r.iterates[static_cast<std::size_t>(j - 1)];
  };
  for (std::int64_t i = 0; i < r.rows(); ++i) {
    const std::int64_t K = r.step[i];      // this row produced x_K
    const std::int64_t tau = r.delays[i];  // resolved delay for that read
    if (tau < 0 || tau > dm.tau_max) return false;
    const Vector& xh = r.xhat[static_cast<std::size_t>(i)];
    if (xh.size() != r.dim) return false;
    if (dm.mode == DelayModel::Mode::consistent) {
      if (xh != history(read_index(tau, K))) return false;
    } else {
      const std::int64_t lo = read_index(dm.tau_max, K);
      for (int c = 0; c < r.dim; ++c) {
        bool found = false;
        for (std::int64_t j = lo; j <= K - 1 && !found; ++j)
          found = history(j)[c] == xh[c];
        if (!found) return false;
      }
    }
  }
  return true;
}

}  // namespace asgld
