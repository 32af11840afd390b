#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "asgld/langevin.hpp"
#include "asgld/potentials.hpp"
#include "asgld/record.hpp"
#include "asgld/rng.hpp"

namespace asgld {

// Staleness model for the deterministic simulator. In consistent mode the
// whole read vector comes from one past iterate x_{k-tau_k}; in inconsistent
// mode each coordinate i independently comes from x_{k-s_i}. All delays are
// clipped to the available history during warm-up (x-hat_k = x_{max(0,k-tau_k)}).
struct DelayModel {
  enum class Mode { consistent, inconsistent };
  enum class Law { fixed, uniform, recorded };

  Mode mode = Mode::consistent;
  Law law = Law::fixed;
  std::int64_t tau_max = 0;
  std::int64_t fixed_delay = 0;
  // For Law::recorded: one entry per step (consistent) or d entries per step
  // (inconsistent), each in [0, tau_max].
  std::vector<std::int64_t> sequence;

  static DelayModel none();
  static DelayModel fixed(std::int64_t tau0);
  static DelayModel uniform(std::int64_t tau, Mode mode = Mode::consistent);
  static DelayModel recorded(std::vector<std::int64_t> seq,
                             Mode mode = Mode::consistent);

  const char* mode_name() const {
    return mode == Mode::consistent ? "consistent" : "inconsistent";
  }
};

struct SimOptions {
  std::int64_t record_stride = 1;
  bool track_staleness = false;  // store resolved read vectors (stride must be 1)
  std::optional<BatchSpec> batch;  // stochastic gradients; absent = exact grad
  bool theory_check = false;       // reject schedules validate_schedule refuses
  bool timed = false;              // stamp recorded rows with a monotonic clock
  // Invoked after each applied step with (step, state, delay); returning
  // false stops the run early (the record reflects the steps taken).
  std::function<bool(std::int64_t, const Vector&, std::int64_t)> on_step;
};

// Single-threaded delayed-gradient SGLD. Identical (seed, DelayModel, config)
// give bit-identical records. The noise substream is separate from the delay
// and batch substreams, so the consumed noise sequence depends only on the
// seed and the step count.
RunRecord simulate(const Potential& p, const StepSchedule& s,
                   const NoiseParams& noise, const DelayModel& dm,
                   std::int64_t n_iters, const Vector& x0, std::uint64_t seed,
                   const SimOptions& opts = {});

// Counts per observed delay value over all applied steps.
std::vector<std::int64_t> delay_histogram(const RunRecord& r);

// Validates that every resolved read in a staleness-tracked record is
// explainable under the given model: in consistent mode the full vector must
// equal one stored past iterate at its recorded delay; in inconsistent mode
// every coordinate must match some iterate within the staleness window.
bool check_delay_assumption(const RunRecord& r, const DelayModel& dm);

}  // namespace asgld
