#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "asgld/langevin.hpp"
#include "asgld/potentials.hpp"
#include "asgld/record.hpp"

namespace asgld {

// Noise injection policy for the barrier scheme. Per-worker matches the
// updater summing P independently noised gradients (P-fold noise variance
// per round); per-round draws a single Gaussian per applied update for
// temperature-matched comparisons against the serial schemes.
enum class SyncNoise { per_worker, per_round };

struct WorkerConfig {
  int workers = 1;
  std::int64_t updates = 0;  // total applied updates (rounds for the barrier scheme)
  std::optional<BatchSpec> batch;  // absent = exact gradients
  std::uint64_t seed = 0;
  Vector x0;
  std::int64_t record_stride = 1;
  SyncNoise sync_noise = SyncNoise::per_worker;
  bool blocking_reads = false;  // consistent reads under the write lock
                                // instead of versioned double-reads
  bool shadow_history = false;  // retain full histories for soundness checks
  bool timed = true;            // stamp events with a monotonic clock
};

// Debug retention for the shadow-history validations (small d, test builds).
struct AsyncDebug {
  // Consistent scheme: full state after every update (index = version,
  // entry 0 = x0) and the snapshot each update read.
  std::vector<Vector> state_history;
  std::vector<Vector> snapshots;
  std::vector<std::int64_t> snapshot_versions;
  // Lock-free scheme: every value ever written per coordinate (including
  // x0), every read vector, and the version bounds around each read.
  std::vector<std::vector<double>> coord_writes;
  std::vector<Vector> reads;
  std::vector<std::int64_t> read_version_lo, read_version_hi;
};

// Barrier scheme: per round every worker reads the same state, computes an
// independently seeded noisy gradient contribution, and a single updater
// applies the worker-ordered sum. Output is a pure function of (seed,
// config), independent of thread scheduling.
RunRecord run_sync(const Potential& p, const StepSchedule& s,
                   const NoiseParams& noise, const WorkerConfig& wc);

// Consistent-read scheme: workers loop {versioned snapshot read, gradient,
// apply under the write lock}. Staleness = version at apply - version at
// read. With tau_cap set, any update whose staleness would exceed the cap
// re-reads the state under the lock before applying (staleness 0).
RunRecord run_wcon(const Potential& p, const StepSchedule& s,
                   const NoiseParams& noise, const WorkerConfig& wc,
                   std::optional<std::int64_t> tau_cap = std::nullopt,
                   AsyncDebug* dbg = nullptr);

// Lock-free scheme: per-coordinate atomic reads and fetch-add writes with no
// cross-coordinate consistency. Per-update staleness is bounded by the
// version window observed around the read.
RunRecord run_wicon(const Potential& p, const StepSchedule& s,
                    const NoiseParams& noise, const WorkerConfig& wc,
                    AsyncDebug* dbg = nullptr);

struct StalenessSummary {
  double mean = 0.0;
  std::int64_t max = 0;
  std::vector<std::int64_t> histogram;
};

// Summary over all applied updates; requires a record with staleness data.
StalenessSummary measure_staleness(const RunRecord& r);

// Shadow-history soundness checks. Both return true when every read is
// explainable by the retained history.
bool validate_snapshots(const AsyncDebug& dbg);
bool validate_coord_reads(const AsyncDebug& dbg);

// Single-threaded replay oracle for run_sync: performs the same P draws in
// worker order without threads. Used by tests and the benchmark.
RunRecord sync_replay_oracle(const Potential& p, const StepSchedule& s,
                             const NoiseParams& noise, const WorkerConfig& wc);

}  // namespace asgld
