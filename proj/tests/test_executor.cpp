#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "asgld/executor.hpp"
#include "asgld/simulator.hpp"

using namespace asgld;

namespace {

Potential quad(int d) {
  Matrix A = Matrix::Identity(d, d);
  for (int i = 0; i < d; ++i) A(i, i) = 1.0 + 3.0 * i / std::max(1, d - 1);
  return make_quadratic({A, Vector::Zero(d)});
}

std::string csv_of(const RunRecord& r) {
  std::ostringstream os;
  write_csv(r, os);
  return os.str();
}

WorkerConfig base_config(int workers, std::int64_t updates, int d,
                         std::uint64_t seed) {
  WorkerConfig wc;
  wc.workers = workers;
  wc.updates = updates;
  wc.seed = seed;
  wc.x0 = Vector::Constant(d, 1.0);
  wc.timed = false;
  return wc;
}

}  // namespace

TEST_CASE("run_sync with one worker equals the serial simulator bitwise") {
  const Potential p = quad(3);
  const StepSchedule s = StepSchedule::constant(0.02);
  const WorkerConfig wc = base_config(1, 150, 3, 99);
  const RunRecord sync = run_sync(p, s, {1.0}, wc);
  const RunRecord sim = simulate(p, s, {1.0}, DelayModel::none(), 150, wc.x0, 99);
  REQUIRE(sync.rows() == sim.rows());
  for (std::int64_t k = 0; k < sync.rows(); ++k)
    for (int i = 0; i < 3; ++i)
      CHECK(sync.iterates[static_cast<std::size_t>(k)][i] ==
            sim.iterates[static_cast<std::size_t>(k)][i]);
}

TEST_CASE("run_sync matches the single-threaded replay oracle bitwise") {
  const Potential p = quad(4);
  const StepSchedule s = StepSchedule::constant(0.01);
  for (int workers : {2, 4}) {
    const WorkerConfig wc = base_config(workers, 120, 4, 7);
    const RunRecord par = run_sync(p, s, {1.0}, wc);
    const RunRecord ser = sync_replay_oracle(p, s, {1.0}, wc);
    CHECK(csv_of(par) == csv_of(ser));
  }
}

TEST_CASE("run_sync repeated runs are byte-identical") {
  const Potential p = quad(4);
  const StepSchedule s = StepSchedule::constant(0.01);
  const WorkerConfig wc = base_config(3, 200, 4, 12345);
  CHECK(csv_of(run_sync(p, s, {1.0}, wc)) == csv_of(run_sync(p, s, {1.0}, wc)));
}

TEST_CASE("run_sync staleness is identically zero") {
  const Potential p = quad(2);
  const WorkerConfig wc = base_config(4, 80, 2, 3);
  const RunRecord r = run_sync(p, StepSchedule::constant(0.01), {1.0}, wc);
  const StalenessSummary sum = measure_staleness(r);
  CHECK(sum.mean == 0.0);
  CHECK(sum.max == 0);
}

TEST_CASE("per-round sync noise is deterministic and distinct from per-worker") {
  const Potential p = quad(2);
  const StepSchedule s = StepSchedule::constant(0.01);
  WorkerConfig wc = base_config(2, 100, 2, 21);
  wc.sync_noise = SyncNoise::per_round;
  const RunRecord a = run_sync(p, s, {1.0}, wc);
  const RunRecord b = run_sync(p, s, {1.0}, wc);
  CHECK(csv_of(a) == csv_of(b));
  CHECK(csv_of(a) == csv_of(sync_replay_oracle(p, s, {1.0}, wc)));
  WorkerConfig pw = wc;
  pw.sync_noise = SyncNoise::per_worker;
  CHECK(csv_of(a) != csv_of(run_sync(p, s, {1.0}, pw)));
}

TEST_CASE("run_wcon with one worker equals the serial simulator bitwise") {
  const Potential p = quad(3);
  const StepSchedule s = StepSchedule::constant(0.02);
  const WorkerConfig wc = base_config(1, 150, 3, 55);
  const RunRecord wcon = run_wcon(p, s, {1.0}, wc);
  const RunRecord sim = simulate(p, s, {1.0}, DelayModel::none(), 150, wc.x0, 55);
  REQUIRE(wcon.rows() == sim.rows());
  for (std::int64_t k = 0; k < wcon.rows(); ++k)
    for (int i = 0; i < 3; ++i)
      CHECK(wcon.iterates[static_cast<std::size_t>(k)][i] ==
            sim.iterates[static_cast<std::size_t>(k)][i]);
  const StalenessSummary sum = measure_staleness(wcon);
  CHECK(sum.mean == 0.0);
  CHECK(sum.max == 0);
}

TEST_CASE("run_wcon honors the staleness cap") {
  const Potential p = quad(4);
  const StepSchedule s = StepSchedule::constant(0.005);
  for (std::int64_t cap : {0, 1, 2}) {
    const WorkerConfig wc = base_config(4, 4000, 4, 77 + cap);
    const RunRecord r = run_wcon(p, s, {1.0}, wc, cap);
    CHECK(measure_staleness(r).max <= cap);
    CHECK(r.n_steps == 4000);
  }
}

TEST_CASE("run_wcon snapshots match the shadow history") {
  const Potential p = quad(4);
  const StepSchedule s = StepSchedule::constant(0.005);
  WorkerConfig wc = base_config(4, 5000, 4, 101);
  wc.shadow_history = true;
  AsyncDebug dbg;
  const RunRecord r = run_wcon(p, s, {1.0}, wc, std::nullopt, &dbg);
  CHECK(r.n_steps == 5000);
  REQUIRE(dbg.state_history.size() == 5001);  // x0 plus every applied update
  REQUIRE(dbg.snapshots.size() == 5000);
  CHECK(validate_snapshots(dbg));

  SUBCASE("a corrupted snapshot is detected") {
    dbg.snapshots[1234][0] += 0.5;
    CHECK_FALSE(validate_snapshots(dbg));
  }
}

TEST_CASE("run_wcon blocking reads variant is sound too") {
  const Potential p = quad(3);
  WorkerConfig wc = base_config(3, 2000, 3, 31);
  wc.blocking_reads = true;
  wc.shadow_history = true;
  AsyncDebug dbg;
  const RunRecord r = run_wcon(p, StepSchedule::constant(0.01), {1.0}, wc,
                               std::nullopt, &dbg);
  CHECK(r.n_steps == 2000);
  CHECK(validate_snapshots(dbg));
}

TEST_CASE("run_wicon with one worker equals run_wcon bitwise") {
  const Potential p = quad(3);
  const StepSchedule s = StepSchedule::constant(0.02);
  const WorkerConfig wc = base_config(1, 150, 3, 55);
  const RunRecord wi = run_wicon(p, s, {1.0}, wc);
  const RunRecord wl = run_wcon(p, s, {1.0}, wc);
  REQUIRE(wi.rows() == wl.rows());
  for (std::int64_t k = 0; k < wi.rows(); ++k)
    for (int i = 0; i < 3; ++i)
      CHECK(wi.iterates[static_cast<std::size_t>(k)][i] ==
            wl.iterates[static_cast<std::size_t>(k)][i]);
}

TEST_CASE("run_wicon coordinate reads come from written values") {
  const Potential p = quad(4);
  WorkerConfig wc = base_config(4, 5000, 4, 202);
  wc.shadow_history = true;
  AsyncDebug dbg;
  const RunRecord r = run_wicon(p, StepSchedule::constant(0.005), {1.0}, wc, &dbg);
  CHECK(r.n_steps == 5000);
  REQUIRE(dbg.reads.size() == 5000);
  REQUIRE(dbg.read_version_lo.size() == 5000);
  CHECK(validate_coord_reads(dbg));
  for (std::size_t i = 0; i < dbg.reads.size(); ++i)
    CHECK(dbg.read_version_lo[i] <= dbg.read_version_hi[i]);

  // On a multicore host some read straddles concurrent writes; a single
  // hardware thread may serialize every update, so only warn.
  bool straddled = false;
  for (std::size_t i = 0; i < dbg.reads.size(); ++i)
    if (dbg.read_version_lo[i] != dbg.read_version_hi[i]) straddled = true;
  WARN_MESSAGE(straddled, "no torn read window observed (single-core host?)");

  SUBCASE("a fabricated read value is detected") {
    dbg.reads[100][2] = 1e300;
    CHECK_FALSE(validate_coord_reads(dbg));
  }
}

TEST_CASE("update counts are conserved across schemes") {
  const Potential p = quad(3);
  const StepSchedule s = StepSchedule::constant(0.01);
  WorkerConfig wc = base_config(4, 1000, 3, 59);
  wc.record_stride = 10;
  for (int scheme = 0; scheme < 3; ++scheme) {
    const RunRecord r = scheme == 0   ? run_sync(p, s, {1.0}, wc)
                        : scheme == 1 ? run_wcon(p, s, {1.0}, wc)
                                      : run_wicon(p, s, {1.0}, wc);
    CHECK(r.n_steps == 1000);
    CHECK(r.rows() == 100);
    std::int64_t hist_total = 0;
    for (auto c : r.delay_hist) hist_total += c;
    CHECK(hist_total == 1000);
    // each update applies onto the store version it increments
    CHECK(r.version_at_apply.back() == 999);
    CHECK(r.step.back() == 1000);
    // observed delay is exactly the version gap at apply time
    for (std::int64_t k = 0; k < r.rows(); ++k) {
      const auto ku = static_cast<std::size_t>(k);
      CHECK(r.delays[ku] == r.version_at_apply[ku] - r.version_at_read[ku]);
    }
  }
}

TEST_CASE("measure_staleness summarizes a synthetic histogram") {
  RunRecord r;
  r.has_staleness = true;
  r.delay_hist = {1, 1, 1, 1};  // one update each at delays 0,1,2,3
  const StalenessSummary sum = measure_staleness(r);
  CHECK(sum.mean == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(sum.max == 3);
  REQUIRE(sum.histogram.size() == 4);
}

TEST_CASE("measure_staleness requires staleness data") {
  RunRecord r;
  r.has_staleness = false;
  CHECK_THROWS_AS(measure_staleness(r), std::invalid_argument);
}

TEST_CASE("executors validate the worker configuration") {
  const Potential p = quad(2);
  const StepSchedule s = StepSchedule::constant(0.01);
  WorkerConfig wc = base_config(0, 10, 2, 1);
  CHECK_THROWS_AS(run_sync(p, s, {1.0}, wc), std::invalid_argument);
  CHECK_THROWS_AS(run_wcon(p, s, {1.0}, wc), std::invalid_argument);
  CHECK_THROWS_AS(run_wicon(p, s, {1.0}, wc), std::invalid_argument);
  WorkerConfig bad_dim = base_config(2, 10, 3, 1);
  CHECK_THROWS_AS(run_sync(p, s, {1.0}, bad_dim), std::invalid_argument);
  WorkerConfig no_updates = base_config(2, 0, 2, 1);
  CHECK_THROWS_AS(run_sync(p, s, {1.0}, no_updates), std::invalid_argument);
}
