#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "asgld/types.hpp"

namespace asgld {

// Trajectory record shared by the serial simulator and the multi-worker
// executor. Rows are strided (every record_stride-th applied update); the
// delay histogram covers every applied update regardless of stride.
struct RunRecord {
  int dim = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_digest = 0;
  std::int64_t tau_max = 0;
  std::string scheme = "sim";       // sim | sync | wcon | wicon
  std::string mode = "consistent";  // consistent | inconsistent
  std::int64_t n_steps = 0;         // total applied updates
  std::int64_t record_stride = 1;
  Vector x0;

  // Per recorded row (parallel arrays).
  std::vector<std::int64_t> step;    // applied-update index, 1-based
  std::vector<Vector> iterates;      // state after that update
  std::vector<std::int64_t> delays;  // observed tau_k (per-coordinate max in
                                     // inconsistent mode)
  std::vector<std::int64_t> row_wall_ns;  // ns since run start (0 if untimed)

  // Async-only per-row fields (empty for scheme == "sim").
  std::vector<std::int32_t> worker;
  std::vector<std::int64_t> version_at_read;
  std::vector<std::int64_t> version_at_apply;

  // Aggregates over all applied updates.
  std::vector<std::int64_t> delay_hist;  // counts indexed by delay value
  std::int64_t wall_ns = 0;              // total run duration
  bool has_staleness = false;            // delay columns are meaningful

  // Staleness-tracking extras (only populated with stride 1 and tracking on).
  std::vector<Vector> xhat;                            // resolved read vectors
  std::vector<std::vector<std::int64_t>> coord_delays; // per-coordinate, inconsistent mode

  bool is_async() const { return scheme != "sim"; }
  std::int64_t rows() const { return static_cast<std::int64_t>(step.size()); }
  void check_consistent() const;  // throws data_error on malformed records
};

// CSV row schema: step,delay,x0,...,x{d-1} for sim records; async records
// append worker_id,version_at_read,version_at_apply. Floats use %.17g so
// parsing reproduces the exact doubles.
void write_csv(const RunRecord& r, std::ostream& os);
void write_csv_file(const RunRecord& r, const std::string& path);
RunRecord parse_csv(std::istream& is);
RunRecord parse_csv_file(const std::string& path);

// Compact binary frame, little-endian throughout, 8-byte IEEE floats.
// Layout: magic "ASGLDRV1" | u32 dim | u32 flags (bit0: async columns)
// | u64 seed | u64 config_digest | i64 tau_max | u8 scheme | u8 mode
// | u16 pad | u32 pad | i64 n_steps | i64 record_stride | i64 n_rows
// | x0 (dim f64) | i64 hist_len | delay_hist (i64 each) | i64 wall_ns
// | rows: i64 step, i64 delay, i64 wall_ns,
//         [i32 worker, i64 v_read, i64 v_apply,] dim f64 coordinates.
void write_binary(const RunRecord& r, std::ostream& os);
void write_binary_file(const RunRecord& r, const std::string& path);
RunRecord parse_binary(std::istream& is);
RunRecord parse_binary_file(const std::string& path);

// FNV-1a over a canonical rendering; used for config digests.
std::uint64_t fnv1a(const std::string& text);

// Exact textual round-trip for doubles (%.17g).
std::string format_double(double v);

}  // namespace asgld
