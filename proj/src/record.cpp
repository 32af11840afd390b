#include "asgld/record.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace asgld {
namespace {

constexpr char kMagic[8] = {'A', 'S', 'G', 'L', 'D', 'R', 'V', '1'};

int scheme_id(const std::string& s) {
  if (s == "sim") return 0;
  if (s == "sync") return 1;
  if (s == "wcon") return 2;
  if (s == "wicon") return 3;
  throw data_error("unknown scheme: " + s);
}

const char* scheme_name(int id) {
  switch (id) {
    case 0: return "sim";
    case 1: return "sync";
    case 2: return "wcon";
    case 3: return "wicon";
  }
  throw data_error("bad scheme id in binary frame");
}

int mode_id(const std::string& m) {
  if (m == "consistent") return 0;
  if (m == "inconsistent") return 1;
  throw data_error("unknown mode: " + m);
}

const char* mode_name(int id) {
  switch (id) {
    case 0: return "consistent";
    case 1: return "inconsistent";
  }
  throw data_error("bad mode id in binary frame");
}

template <typename T>
void put(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  // Little-endian on every supported target; serialize bytes directly.
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw data_error("binary frame truncated");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    std::size_t next = line.find(sep, pos);
    if (next == std::string::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
}

std::int64_t parse_i64(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<std::int64_t>(v);
  } catch (const std::exception&) {
    throw data_error(std::string("csv: bad integer in column ") + what + ": '" +
                     s + "'");
  }
}

double parse_f64(const std::string& s, const char* what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == nullptr || *end != '\0' || end == s.c_str())
    throw data_error(std::string("csv: bad float in column ") + what + ": '" +
                     s + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void RunRecord::check_consistent() const {
  const std::size_t n = step.size();
  if (iterates.size() != n || delays.size() != n)
    throw data_error("record: row arrays disagree in length");
  if (!row_wall_ns.empty() && row_wall_ns.size() != n)
    throw data_error("record: wall column length mismatch");
  if (is_async() &&
      (worker.size() != n || version_at_read.size() != n ||
       version_at_apply.size() != n))
    throw data_error("record: async columns missing or mismatched");
  for (const auto& x : iterates)
    if (x.size() != dim) throw data_error("record: iterate dimension mismatch");
}

void write_csv(const RunRecord& r, std::ostream& os) {
  r.check_consistent();
  os << "step,delay";
  for (int i = 0; i < r.dim; ++i) os << ",x" << i;
  if (r.is_async()) os << ",worker_id,version_at_read,version_at_apply";
  os << "\n";
  char ibuf[32];
  for (std::int64_t k = 0; k < r.rows(); ++k) {
    std::snprintf(ibuf, sizeof(ibuf), "%" PRId64 ",%" PRId64, r.step[k],
                  r.delays[k]);
    os << ibuf;
    for (int i = 0; i < r.dim; ++i) os << ',' << format_double(r.iterates[k][i]);
    if (r.is_async()) {
      os << ',' << r.worker[k] << ',' << r.version_at_read[k] << ','
         << r.version_at_apply[k];
    }
    os << "\n";
  }
}

void write_csv_file(const RunRecord& r, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw data_error("cannot open for writing: " + path);
  write_csv(r, os);
  if (!os) throw data_error("write failed: " + path);
}

RunRecord parse_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw data_error("csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto head = split(line, ',');
  if (head.size() < 3 || head[0] != "step" || head[1] != "delay")
    throw data_error("csv: unrecognized header");
  int dim = 0;
  std::size_t col = 2;
  while (col < head.size() && head[col] == "x" + std::to_string(dim)) {
    ++dim;
    ++col;
  }
  bool async = false;
  if (col < head.size()) {
    if (head.size() - col == 3 && head[col] == "worker_id" &&
        head[col + 1] == "version_at_read" && head[col + 2] == "version_at_apply")
      async = true;
    else
      throw data_error("csv: unrecognized trailing columns");
  }
  if (dim == 0) throw data_error("csv: no coordinate columns");

  RunRecord r;
  r.dim = dim;
  r.scheme = async ? "wcon" : "sim";
  r.has_staleness = true;
  const std::size_t want = 2 + static_cast<std::size_t>(dim) + (async ? 3 : 0);
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != want)
      throw data_error("csv: row has " + std::to_string(f.size()) +
                       " fields, expected " + std::to_string(want));
    r.step.push_back(parse_i64(f[0], "step"));
    r.delays.push_back(parse_i64(f[1], "delay"));
    Vector x(dim);
    for (int i = 0; i < dim; ++i)
      x[i] = parse_f64(f[2 + static_cast<std::size_t>(i)], "x");
    r.iterates.push_back(std::move(x));
    if (async) {
      const std::size_t b = 2 + static_cast<std::size_t>(dim);
      r.worker.push_back(static_cast<std::int32_t>(parse_i64(f[b], "worker_id")));
      r.version_at_read.push_back(parse_i64(f[b + 1], "version_at_read"));
      r.version_at_apply.push_back(parse_i64(f[b + 2], "version_at_apply"));
    }
  }
  r.n_steps = r.step.empty() ? 0 : r.step.back();
  if (!r.step.empty()) r.x0 = Vector::Zero(dim);
  std::int64_t max_delay = 0;
  for (auto d : r.delays) max_delay = std::max(max_delay, d);
  r.tau_max = max_delay;
  r.delay_hist.assign(static_cast<std::size_t>(max_delay) + 1, 0);
  for (auto d : r.delays) {
    if (d < 0) throw data_error("csv: negative delay");
    r.delay_hist[static_cast<std::size_t>(d)]++;
  }
  return r;
}

RunRecord parse_csv_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("cannot open: " + path);
  return parse_csv(is);
}

void write_binary(const RunRecord& r, std::ostream& os) {
  r.check_consistent();
  if (r.x0.size() != r.dim) throw data_error("record: x0 missing or misshaped");
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(r.dim));
  std::uint32_t flags = r.is_async() ? 1u : 0u;
  if (r.has_staleness) flags |= 2u;
  put<std::uint32_t>(os, flags);
  put<std::uint64_t>(os, r.seed);
  put<std::uint64_t>(os, r.config_digest);
  put<std::int64_t>(os, r.tau_max);
  put<std::uint8_t>(os, static_cast<std::uint8_t>(scheme_id(r.scheme)));
  put<std::uint8_t>(os, static_cast<std::uint8_t>(mode_id(r.mode)));
  put<std::uint16_t>(os, 0);
  put<std::uint32_t>(os, 0);
  put<std::int64_t>(os, r.n_steps);
  put<std::int64_t>(os, r.record_stride);
  put<std::int64_t>(os, r.rows());
  for (int i = 0; i < r.dim; ++i) put<double>(os, r.x0[i]);
  put<std::int64_t>(os, static_cast<std::int64_t>(r.delay_hist.size()));
  for (auto c : r.delay_hist) put<std::int64_t>(os, c);
  put<std::int64_t>(os, r.wall_ns);
  const bool async = r.is_async();
  for (std::int64_t k = 0; k < r.rows(); ++k) {
    put<std::int64_t>(os, r.step[k]);
    put<std::int64_t>(os, r.delays[k]);
    put<std::int64_t>(os, r.row_wall_ns.empty() ? 0 : r.row_wall_ns[k]);
    if (async) {
      put<std::int32_t>(os, r.worker[k]);
      put<std::int64_t>(os, r.version_at_read[k]);
      put<std::int64_t>(os, r.version_at_apply[k]);
    }
    for (int i = 0; i < r.dim; ++i) put<double>(os, r.iterates[k][i]);
  }
  if (!os) throw data_error("binary frame write failed");
}

void write_binary_file(const RunRecord& r, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw data_error("cannot open for writing: " + path);
  write_binary(r, os);
}

RunRecord parse_binary(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw data_error("binary frame: bad magic");
  RunRecord r;
  const auto dim = get<std::uint32_t>(is);
  if (dim == 0 || dim > (1u << 24)) throw data_error("binary frame: bad dim");
  r.dim = static_cast<int>(dim);
  const auto flags = get<std::uint32_t>(is);
  const bool async = (flags & 1u) != 0;
  r.has_staleness = (flags & 2u) != 0;
  r.seed = get<std::uint64_t>(is);
  r.config_digest = get<std::uint64_t>(is);
  r.tau_max = get<std::int64_t>(is);
  const int sid = get<std::uint8_t>(is);
  const int mid = get<std::uint8_t>(is);
  (void)get<std::uint16_t>(is);
  (void)get<std::uint32_t>(is);
  r.scheme = scheme_name(sid);
  r.mode = mode_name(mid);
  if (async != r.is_async())
    throw data_error("binary frame: scheme/flag mismatch");
  r.n_steps = get<std::int64_t>(is);
  r.record_stride = get<std::int64_t>(is);
  const auto n_rows = get<std::int64_t>(is);
  if (n_rows < 0) throw data_error("binary frame: negative row count");
  r.x0.resize(r.dim);
  for (int i = 0; i < r.dim; ++i) r.x0[i] = get<double>(is);
  const auto hist_len = get<std::int64_t>(is);
  if (hist_len < 0 || hist_len > (1 << 24))
    throw data_error("binary frame: bad histogram length");
  r.delay_hist.resize(static_cast<std::size_t>(hist_len));
  for (auto& c : r.delay_hist) c = get<std::int64_t>(is);
  r.wall_ns = get<std::int64_t>(is);
  r.step.reserve(static_cast<std::size_t>(n_rows));
  for (std::int64_t k = 0; k < n_rows; ++k) {
    r.step.push_back(get<std::int64_t>(is));
    r.delays.push_back(get<std::int64_t>(is));
    r.row_wall_ns.push_back(get<std::int64_t>(is));
    if (async) {
      r.worker.push_back(get<std::int32_t>(is));
      r.version_at_read.push_back(get<std::int64_t>(is));
      r.version_at_apply.push_back(get<std::int64_t>(is));
    }
    Vector x(r.dim);
    for (int i = 0; i < r.dim; ++i) x[i] = get<double>(is);
    r.iterates.push_back(std::move(x));
  }
  r.check_consistent();
  return r;
}

RunRecord parse_binary_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("cannot open: " + path);
  return parse_binary(is);
}

}  // namespace asgld
