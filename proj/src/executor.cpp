#include "asgld/executor.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <unordered_set>

#include "asgld/rng.hpp"

namespace asgld {
namespace {

using Clock = std::chrono::steady_clock;

std::int64_t elapsed_ns(Clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0)
      .count();
}

struct Event {
  std::int64_t version = 0;  // 1-based applied-update number
  std::int32_t worker = 0;
  std::int64_t v_read = 0;
  std::int64_t v_read_hi = 0;  // lock-free scheme: upper version bound of the read
  std::int64_t delay = 0;
  std::int64_t wall_ns = 0;
  Vector x_after;  // populated only for recorded rows / shadow runs
};

void check_config(const Potential& p, const WorkerConfig& wc) {
  if (wc.workers < 1)
    throw std::invalid_argument("executor: worker count must be >= 1");
  if (wc.updates < 1)
    throw std::invalid_argument("executor: update budget must be >= 1");
  if (wc.record_stride < 1)
    throw std::invalid_argument("executor: record_stride must be >= 1");
  require_dim(wc.x0, p.dim, "x0");
}

void grad_at(const Potential& p, const Vector& x, const WorkerConfig& wc,
             RngStream& rng, Vector& g) {
  if (wc.batch)
    p.stoch_grad_fn(x, *wc.batch, rng, g);
  else
    p.grad_fn(x, g);
}

RunRecord base_record(const Potential& p, const WorkerConfig& wc,
                      const char* scheme, const char* mode) {
  RunRecord r;
  r.dim = p.dim;
  r.seed = wc.seed;
  r.scheme = scheme;
  r.mode = mode;
  r.record_stride = wc.record_stride;
  r.x0 = wc.x0;
  r.has_staleness = true;
  return r;
}

// Folds per-worker event logs into a RunRecord ordered by version.
void assemble(RunRecord& r, std::vector<std::vector<Event>>& per_worker,
              std::int64_t applied) {
  std::vector<Event*> all;
  all.reserve(static_cast<std::size_t>(applied));
  for (auto& v : per_worker)
    for (auto& e : v) all.push_back(&e);
  std::sort(all.begin(), all.end(),
            [](const Event* a, const Event* b) { return a->version < b->version; });
  if (static_cast<std::int64_t>(all.size()) != applied)
    throw numerical_error("executor: event count disagrees with applied updates");
  std::int64_t max_delay = 0;
  for (const Event* e : all) max_delay = std::max(max_delay, e->delay);
  r.n_steps = applied;
  r.delay_hist.assign(static_cast<std::size_t>(max_delay) + 1, 0);
  for (std::int64_t i = 0; i < applied; ++i) {
    const Event& e = *all[static_cast<std::size_t>(i)];
    if (e.version != i + 1)
      throw numerical_error("executor: version sequence has gaps");
    r.delay_hist[static_cast<std::size_t>(e.delay)]++;
    if (e.version % r.record_stride == 0) {
      if (e.x_after.size() != r.dim)
        throw numerical_error("executor: recorded row lacks state");
      r.step.push_back(e.version);
      r.iterates.push_back(e.x_after);
      r.delays.push_back(e.delay);
      r.row_wall_ns.push_back(e.wall_ns);
      r.worker.push_back(e.worker);
      r.version_at_read.push_back(e.v_read);
      r.version_at_apply.push_back(e.version - 1);
    }
  }
  if (r.tau_max < max_delay) r.tau_max = max_delay;
}

}  // namespace

RunRecord run_sync(const Potential& p, const StepSchedule& s,
                   const NoiseParams& noise, const WorkerConfig& wc) {
  check_config(p, wc);
  const int P = wc.workers;
  const int d = p.dim;
  Vector x = wc.x0;

  std::vector<RngStream> streams;
  streams.reserve(static_cast<std::size_t>(P));
  for (int w = 0; w < P; ++w) streams.push_back(RngStream::substream(wc.seed, w));
  RngStream round_rng = RngStream::substream(wc.seed, static_cast<std::uint64_t>(P));

  std::vector<Vector> contrib(static_cast<std::size_t>(P), Vector(d));
  std::vector<Vector> gbuf(static_cast<std::size_t>(P), Vector(d));
  std::vector<Vector> zbuf(static_cast<std::size_t>(P), Vector(d));

  RunRecord r = base_record(p, wc, "sync", "consistent");
  r.delay_hist.assign(1, 0);
  r.n_steps = wc.updates;
  const auto t0 = Clock::now();
  Vector zround(d), acc(d);

  for (std::int64_t round = 1; round <= wc.updates; ++round) {
    const double gamma = s.gamma(round);
    if (!(gamma > 0.0)) throw config_error("run_sync: nonpositive step size");
    const double c = std::sqrt(2.0 * noise.sigma * gamma);

    // Every worker reads the same x; contributions depend only on (x, own
    // stream), so results are independent of thread scheduling.
#pragma omp parallel for schedule(static) num_threads(P)
    for (int w = 0; w < P; ++w) {
      const auto wi = static_cast<std::size_t>(w);
      grad_at(p, x, wc, streams[wi], gbuf[wi]);
      if (wc.sync_noise == SyncNoise::per_worker) {
        streams[wi].fill_gaussian(zbuf[wi]);
        contrib[wi] = c * zbuf[wi] - gamma * gbuf[wi];
      } else {
        contrib[wi] = -gamma * gbuf[wi];
      }
    }

    // Updater: apply the worker-ordered sum as one update.
    acc = contrib[0];
    for (int w = 1; w < P; ++w) acc += contrib[static_cast<std::size_t>(w)];
    if (wc.sync_noise == SyncNoise::per_round) {
      round_rng.fill_gaussian(zround);
      acc += c * zround;
    }
    x += acc;

    r.delay_hist[0]++;
    if (round % wc.record_stride == 0) {
      r.step.push_back(round);
      r.iterates.push_back(x);
      r.delays.push_back(0);
      r.row_wall_ns.push_back(wc.timed ? elapsed_ns(t0) : 0);
      r.worker.push_back(0);
      r.version_at_read.push_back(round - 1);
      r.version_at_apply.push_back(round - 1);
    }
  }
  r.wall_ns = elapsed_ns(t0);
  return r;
}

RunRecord sync_replay_oracle(const Potential& p, const StepSchedule& s,
                             const NoiseParams& noise, const WorkerConfig& wc) {
  check_config(p, wc);
  const int P = wc.workers;
  const int d = p.dim;
  Vector x = wc.x0;
  std::vector<RngStream> streams;
  for (int w = 0; w < P; ++w) streams.push_back(RngStream::substream(wc.seed, w));
  RngStream round_rng = RngStream::substream(wc.seed, static_cast<std::uint64_t>(P));

  RunRecord r = base_record(p, wc, "sync", "consistent");
  r.delay_hist.assign(1, 0);
  r.n_steps = wc.updates;
  Vector g(d), z(d), acc(d), contrib(d);
  for (std::int64_t round = 1; round <= wc.updates; ++round) {
    const double gamma = s.gamma(round);
    const double c = std::sqrt(2.0 * noise.sigma * gamma);
    for (int w = 0; w < P; ++w) {
      auto& rng = streams[static_cast<std::size_t>(w)];
      grad_at(p, x, wc, rng, g);
      if (wc.sync_noise == SyncNoise::per_worker) {
        rng.fill_gaussian(z);
        contrib = c * z - gamma * g;
      } else {
        contrib = -gamma * g;
      }
      if (w == 0)
        acc = contrib;
      else
        acc += contrib;
    }
    if (wc.sync_noise == SyncNoise::per_round) {
      round_rng.fill_gaussian(z);
      acc += c * z;
    }
    x += acc;
    r.delay_hist[0]++;
    if (round % wc.record_stride == 0) {
      r.step.push_back(round);
      r.iterates.push_back(x);
      r.delays.push_back(0);
      r.row_wall_ns.push_back(0);
      r.worker.push_back(0);
      r.version_at_read.push_back(round - 1);
      r.version_at_apply.push_back(round - 1);
    }
  }
  return r;
}

RunRecord run_wcon(const Potential& p, const StepSchedule& s,
                   const NoiseParams& noise, const WorkerConfig& wc,
                   std::optional<std::int64_t> tau_cap, AsyncDebug* dbg) {
  check_config(p, wc);
  if (tau_cap && *tau_cap < 0)
    throw std::invalid_argument("run_wcon: tau_cap must be >= 0");
  const int P = wc.workers;
  const int d = p.dim;

  auto coords = std::make_unique<std::atomic<double>[]>(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i)
    coords[static_cast<std::size_t>(i)].store(wc.x0[i], std::memory_order_relaxed);
  std::atomic<std::uint64_t> seq{0};  // even = stable; version = seq/2
  std::mutex write_mu;
  std::int64_t applied = 0;  // guarded by write_mu
  std::atomic<bool> done{false};

  const bool shadow = wc.shadow_history && dbg != nullptr;
  if (dbg != nullptr) {
    *dbg = AsyncDebug{};
    if (shadow) {
      dbg->state_history.assign(1, wc.x0);
      dbg->state_history.reserve(static_cast<std::size_t>(wc.updates) + 1);
      dbg->snapshots.reserve(static_cast<std::size_t>(wc.updates));
      dbg->snapshot_versions.reserve(static_cast<std::size_t>(wc.updates));
    }
  }

  std::vector<std::vector<Event>> events(static_cast<std::size_t>(P));
  const auto t0 = Clock::now();

#pragma omp parallel num_threads(P)
  {
    const int wid = omp_get_thread_num();
    RngStream rng = RngStream::substream(wc.seed, static_cast<std::uint64_t>(wid));
    Vector snap(d), g(d), z(d), xafter(d);
    auto& my_events = events[static_cast<std::size_t>(wid)];

    while (!done.load(std::memory_order_relaxed)) {
      std::int64_t v_read;
      if (wc.blocking_reads) {
        std::lock_guard<std::mutex> lk(write_mu);
        for (int i = 0; i < d; ++i)
          snap[i] = coords[static_cast<std::size_t>(i)].load(
              std::memory_order_relaxed);
        v_read = applied;
      } else {
        // Versioned double-read: retry while a writer holds the odd state or
        // the counter moved during the copy.
        for (;;) {
          const std::uint64_t s1 = seq.load(std::memory_order_acquire);
          if (s1 & 1) continue;
          for (int i = 0; i < d; ++i)
            snap[i] = coords[static_cast<std::size_t>(i)].load(
                std::memory_order_relaxed);
          std::atomic_thread_fence(std::memory_order_acquire);
          const std::uint64_t s2 = seq.load(std::memory_order_relaxed);
          if (s1 == s2) {
            v_read = static_cast<std::int64_t>(s1 / 2);
            break;
          }
        }
      }

      grad_at(p, snap, wc, rng, g);
      rng.fill_gaussian(z);

      std::lock_guard<std::mutex> lk(write_mu);
      if (applied >= wc.updates) {
        done.store(true, std::memory_order_relaxed);
        break;
      }
      const std::int64_t v_now = applied;
      std::int64_t tau = v_now - v_read;
      if (tau_cap && tau > *tau_cap) {
        // Bounded-staleness enforcement: refresh the read under the lock
        // (no writer can interleave) and recompute the gradient there.
        for (int i = 0; i < d; ++i)
          snap[i] = coords[static_cast<std::size_t>(i)].load(
              std::memory_order_relaxed);
        v_read = v_now;
        grad_at(p, snap, wc, rng, g);
        tau = 0;
      }
      const double gamma = s.gamma(v_now + 1);
      if (!(gamma > 0.0)) throw config_error("run_wcon: nonpositive step size");
      const double c = std::sqrt(2.0 * noise.sigma * gamma);

      seq.fetch_add(1, std::memory_order_acq_rel);
      for (int i = 0; i < d; ++i) {
        const double delta = c * z[i] - gamma * g[i];
        auto& cell = coords[static_cast<std::size_t>(i)];
        const double next = cell.load(std::memory_order_relaxed) + delta;
        cell.store(next, std::memory_order_relaxed);
        xafter[i] = next;
      }
      seq.fetch_add(1, std::memory_order_release);
      applied++;

      Event e;
      e.version = applied;
      e.worker = wid;
      e.v_read = v_read;
      e.v_read_hi = v_read;
      e.delay = tau;
      e.wall_ns = wc.timed ? elapsed_ns(t0) : 0;
      const bool keep = (e.version % wc.record_stride == 0) || shadow;
      if (keep) e.x_after = xafter;
      if (shadow) {
        dbg->state_history.push_back(xafter);
        dbg->snapshots.push_back(snap);
        dbg->snapshot_versions.push_back(v_read);
      }
      my_events.push_back(std::move(e));
    }
  }

  RunRecord r = base_record(p, wc, "wcon", "consistent");
  if (tau_cap) r.tau_max = *tau_cap;
  assemble(r, events, applied);
  r.wall_ns = elapsed_ns(t0);
  return r;
}

RunRecord run_wicon(const Potential& p, const StepSchedule& s,
                    const NoiseParams& noise, const WorkerConfig& wc,
                    AsyncDebug* dbg) {
  check_config(p, wc);
  const int P = wc.workers;
  const int d = p.dim;

  auto coords = std::make_unique<std::atomic<double>[]>(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i)
    coords[static_cast<std::size_t>(i)].store(wc.x0[i], std::memory_order_relaxed);
  std::atomic<std::int64_t> version{0};
  std::atomic<std::int64_t> tickets{0};

  const bool shadow = wc.shadow_history && dbg != nullptr;
  if (dbg != nullptr) *dbg = AsyncDebug{};

  std::vector<std::vector<Event>> events(static_cast<std::size_t>(P));
  // Shadow logs are gathered per worker and merged afterwards; membership
  // checks do not depend on write order.
  std::vector<std::vector<std::pair<int, double>>> writes(
      static_cast<std::size_t>(P));
  std::vector<std::vector<Vector>> reads(static_cast<std::size_t>(P));
  std::vector<std::vector<std::pair<std::int64_t, std::int64_t>>> bounds(
      static_cast<std::size_t>(P));
  const auto t0 = Clock::now();

#pragma omp parallel num_threads(P)
  {
    const int wid = omp_get_thread_num();
    RngStream rng = RngStream::substream(wc.seed, static_cast<std::uint64_t>(wid));
    Vector snap(d), g(d), z(d), xafter(d);
    auto& my_events = events[static_cast<std::size_t>(wid)];

    for (;;) {
      const std::int64_t ticket = tickets.fetch_add(1, std::memory_order_relaxed);
      if (ticket >= wc.updates) break;

      const std::int64_t v_lo = version.load(std::memory_order_acquire);
      for (int i = 0; i < d; ++i)
        snap[i] =
            coords[static_cast<std::size_t>(i)].load(std::memory_order_relaxed);
      const std::int64_t v_hi = version.load(std::memory_order_acquire);

      grad_at(p, snap, wc, rng, g);
      rng.fill_gaussian(z);

      const std::int64_t slot = version.fetch_add(1, std::memory_order_acq_rel) + 1;
      const double gamma = s.gamma(slot);
      if (!(gamma > 0.0)) throw config_error("run_wicon: nonpositive step size");
      const double c = std::sqrt(2.0 * noise.sigma * gamma);
      for (int i = 0; i < d; ++i) {
        const double delta = c * z[i] - gamma * g[i];
        const double old = coords[static_cast<std::size_t>(i)].fetch_add(
            delta, std::memory_order_relaxed);
        xafter[i] = old + delta;
      }

      Event e;
      e.version = slot;
      e.worker = wid;
      e.v_read = v_lo;
      e.v_read_hi = v_hi;
      e.delay = (slot - 1) - v_lo;
      e.wall_ns = wc.timed ? elapsed_ns(t0) : 0;
      const bool keep = (slot % wc.record_stride == 0) || shadow;
      if (keep) e.x_after = xafter;
      if (dbg != nullptr)
        bounds[static_cast<std::size_t>(wid)].emplace_back(v_lo, v_hi);
      if (shadow) {
        auto& wlog = writes[static_cast<std::size_t>(wid)];
        for (int i = 0; i < d; ++i) wlog.emplace_back(i, xafter[i]);
        reads[static_cast<std::size_t>(wid)].push_back(snap);
      }
      my_events.push_back(std::move(e));
    }
  }

  const std::int64_t applied = version.load(std::memory_order_relaxed);
  if (dbg != nullptr) {
    for (auto& b : bounds)
      for (auto& [lo, hi] : b) {
        dbg->read_version_lo.push_back(lo);
        dbg->read_version_hi.push_back(hi);
      }
    if (shadow) {
      dbg->coord_writes.assign(static_cast<std::size_t>(d), {});
      for (int i = 0; i < d; ++i)
        dbg->coord_writes[static_cast<std::size_t>(i)].push_back(wc.x0[i]);
      for (auto& wlog : writes)
        for (auto& [coord, val] : wlog)
          dbg->coord_writes[static_cast<std::size_t>(coord)].push_back(val);
      for (auto& rlog : reads)
        for (auto& v : rlog) dbg->reads.push_back(v);
    }
  }

  RunRecord r = base_record(p, wc, "wicon", "inconsistent");
  assemble(r, events, applied);
  r.wall_ns = elapsed_ns(t0);
  return r;
}

StalenessSummary measure_staleness(const RunRecord& r) {
  if (!r.has_staleness || r.delay_hist.empty())
    throw std::invalid_argument("measure_staleness: record lacks staleness tracking");
  StalenessSummary s;
  s.histogram = r.delay_hist;
  std::int64_t total = 0;
  double weighted = 0.0;
  for (std::size_t dval = 0; dval < r.delay_hist.size(); ++dval) {
    const std::int64_t c = r.delay_hist[dval];
    if (c < 0) throw std::invalid_argument("measure_staleness: negative count");
    total += c;
    weighted += static_cast<double>(dval) * static_cast<double>(c);
    if (c > 0) s.max = static_cast<std::int64_t>(dval);
  }
  if (total == 0)
    throw std::invalid_argument("measure_staleness: empty record");
  s.mean = weighted / static_cast<double>(total);
  return s;
}

bool validate_snapshots(const AsyncDebug& dbg) {
  if (dbg.snapshots.size() != dbg.snapshot_versions.size()) return false;
  for (std::size_t k = 0; k < dbg.snapshots.size(); ++k) {
    const std::int64_t v = dbg.snapshot_versions[k];
    if (v < 0 || v >= static_cast<std::int64_t>(dbg.state_history.size()))
      return false;
    const Vector& h = dbg.state_history[static_cast<std::size_t>(v)];
    const Vector& snap = dbg.snapshots[k];
    if (snap.size() != h.size()) return false;
    if (std::memcmp(snap.data(), h.data(),
                    sizeof(double) * static_cast<std::size_t>(h.size())) != 0)
      return false;
  }
  return true;
}

bool validate_coord_reads(const AsyncDebug& dbg) {
  const std::size_t d = dbg.coord_writes.size();
  std::vector<std::unordered_set<std::uint64_t>> seen(d);
  for (std::size_t i = 0; i < d; ++i)
    for (double v : dbg.coord_writes[i])
      seen[i].insert(std::bit_cast<std::uint64_t>(v));
  for (const Vector& r : dbg.reads) {
    if (static_cast<std::size_t>(r.size()) != d) return false;
    for (std::size_t i = 0; i < d; ++i)
      if (!seen[i].count(std::bit_cast<std::uint64_t>(r[static_cast<Eigen::Index>(i)])))
        return false;
  }
  return true;
}

}  // namespace asgld
