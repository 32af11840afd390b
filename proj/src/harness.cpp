#include "asgld/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "asgld/cifar.hpp"
#include "asgld/executor.hpp"
#include "asgld/simulator.hpp"

namespace asgld {
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kRefStreamId = 99;  // reference-cloud noise substream

std::string read_text_file(const std::string& path, const char* who) {
  std::ifstream in(path);
  if (!in) throw data_error(std::string(who) + ": cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("harness: cannot write " + path);
  out << text;
}

// Rolling state feeding the metric series: a trailing window of iterates, a
// fixed reference cloud, and cumulative staleness statistics.
class MetricEngine {
 public:
  MetricEngine(const ExperimentConfig& cfg, const Potential& p,
               const Vector& x_star)
      : cfg_(cfg) {
    const int d = p.dim;
    if (cfg.sigma > 0.0) {
      ref_ = laplace_gaussian(p, x_star, cfg.sigma);
      RngStream ref_rng = RngStream::substream(cfg.data_seed, kRefStreamId);
      ref_cloud_ = sample_gaussian(ref_, cfg.w2_points, ref_rng);
      q_ = std::min(2, d);
      marg_mean_ = ref_.mean.head(q_);
      const Matrix sq = ref_.cov.topLeftCorner(q_, q_);
      marg_prec_ = sq.inverse();
      grid_.lo = Vector(q_);
      grid_.hi = Vector(q_);
      grid_.bins.assign(static_cast<std::size_t>(q_), cfg.kl_bins);
      for (int i = 0; i < q_; ++i) {
        const double half = cfg.kl_span * std::sqrt(sq(i, i));
        grid_.lo[i] = marg_mean_[i] - half;
        grid_.hi[i] = marg_mean_[i] + half;
      }
      kl_ok_ = true;
    } else {
      // Degenerate target: the reference collapses to the mode, W2 becomes
      // the root-mean-square distance to it and KL is reported as 0.
      Matrix atom(1, d);
      atom.row(0) = x_star.transpose();
      ref_cloud_ = make_cloud(std::move(atom));
    }
  }

  void push(const Vector& x, std::int64_t delay) {
    window_.push_back(x);
    while (static_cast<std::int64_t>(window_.size()) > cfg_.w2_window)
      window_.pop_front();
    delay_sum_ += static_cast<double>(delay);
    delay_count_ += 1;
    delay_max_ = std::max(delay_max_, delay);
  }

  void eval(std::int64_t iter, std::int64_t wall_ns) {
    const auto n = static_cast<std::int64_t>(window_.size());
    if (n < 1) throw std::invalid_argument("metric eval before any update");
    const std::int64_t pts = std::min<std::int64_t>(n, cfg_.w2_points);
    Matrix cloud_pts(pts, window_.front().size());
    for (std::int64_t i = 0; i < pts; ++i)
      cloud_pts.row(i) = window_[static_cast<std::size_t>(i * n / pts)].transpose();
    const SampleCloud cloud = make_cloud(std::move(cloud_pts));

    MetricsRow row;
    row.iter = iter;
    row.wall_ns = wall_ns;
    row.w2 = w2_empirical(cloud, ref_cloud_);
    row.kl = kl_ok_ ? marginal_kl() : 0.0;
    row.delay_mean =
        delay_count_ > 0 ? delay_sum_ / static_cast<double>(delay_count_) : 0.0;
    row.delay_max = delay_max_;
    rows_.push_back(row);
  }

  // Plateau rule: once evaluations span the plateau window, stop when the
  // relative W2 improvement across it falls below the tolerance.
  bool plateaued() const {
    if (cfg_.plateau_window <= 0) return false;
    const auto span = static_cast<std::size_t>(
        (cfg_.plateau_window + cfg_.cadence - 1) / cfg_.cadence);
    if (rows_.size() < span + 1) return false;
    const double prev = rows_[rows_.size() - 1 - span].w2;
    const double cur = rows_.back().w2;
    return (prev - cur) < cfg_.plateau_tol * std::max(prev, 1e-300);
  }

  const std::vector<MetricsRow>& rows() const { return rows_; }

 private:
  double marginal_kl() {
    const auto n = static_cast<std::int64_t>(window_.size());
    Matrix proj(n, q_);
    for (std::int64_t i = 0; i < n; ++i)
      proj.row(i) = window_[static_cast<std::size_t>(i)].head(q_).transpose();
    const SampleCloud cloud = make_cloud(std::move(proj));
    auto log_u = [this](const Vector& y) {
      const Vector c = y - marg_mean_;
      return -0.5 * c.dot(marg_prec_ * c);
    };
    try {
      return kl_histogram(cloud, log_u, grid_);
    } catch (const data_error&) {
      // Transient mass outside the grid (early iterations far from the
      // mode); the series records it as NaN rather than aborting the run.
      return std::numeric_limits<double>::quiet_NaN();
    }
  }

  const ExperimentConfig& cfg_;
  GaussianMeasure ref_;
  SampleCloud ref_cloud_;
  bool kl_ok_ = false;
  int q_ = 1;
  Vector marg_mean_;
  Matrix marg_prec_;
  GridSpec grid_;
  std::deque<Vector> window_;
  double delay_sum_ = 0.0;
  std::int64_t delay_count_ = 0;
  std::int64_t delay_max_ = 0;
  std::vector<MetricsRow> rows_;
};

DelayModel delay_model_from(const ExperimentConfig& cfg) {
  if (cfg.delay == "fixed") {
    DelayModel dm;
    dm.law = DelayModel::Law::fixed;
    dm.tau_max = cfg.tau_max;
    dm.fixed_delay = cfg.fixed_delay;
    return dm;
  }
  if (cfg.delay == "uniform") return DelayModel::uniform(cfg.tau_max);
  return DelayModel::none();
}

StepSchedule schedule_from(const ExperimentConfig& cfg) {
  if (cfg.schedule == "power")
    return StepSchedule::power(cfg.gamma, cfg.gamma_decay, 1.0, cfg.lambda_decay);
  return StepSchedule::constant(cfg.gamma);
}

std::string trajectory_csv(const RunRecord& rec, std::int64_t stride) {
  std::string out = "iter,x0,x1\n";
  for (std::int64_t i = 0; i < rec.rows(); ++i) {
    if (rec.step[static_cast<std::size_t>(i)] % stride != 0) continue;
    const Vector& x = rec.iterates[static_cast<std::size_t>(i)];
    const double x1 = x.size() > 1 ? x[1] : 0.0;
    out += std::to_string(rec.step[static_cast<std::size_t>(i)]) + "," +
           format_double(x[0]) + "," + format_double(x1) + "\n";
  }
  return out;
}

std::string staleness_csv(const RunRecord& rec) {
  std::string out = "delay,count\n";
  for (std::size_t d = 0; d < rec.delay_hist.size(); ++d)
    out += std::to_string(d) + "," + std::to_string(rec.delay_hist[d]) + "\n";
  return out;
}

}  // namespace

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "iter,wall_ns,w2,kl,delay_mean,delay_max\n";
  for (const auto& r : rows) {
    out += std::to_string(r.iter) + "," + std::to_string(r.wall_ns) + "," +
           format_double(r.w2) + "," + format_double(r.kl) + "," +
           format_double(r.delay_mean) + "," + std::to_string(r.delay_max) +
           "\n";
  }
  return out;
}

std::vector<MetricsRow> metrics_from_csv(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line) || line != "iter,wall_ns,w2,kl,delay_mean,delay_max")
    throw data_error("metrics csv: bad header");
  std::vector<MetricsRow> rows;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw data_error("metrics csv: bad row '" + line + "'");
    try {
      MetricsRow r;
      r.iter = std::stoll(cells[0]);
      r.wall_ns = std::stoll(cells[1]);
      r.w2 = std::stod(cells[2]);
      r.kl = std::stod(cells[3]);
      r.delay_mean = std::stod(cells[4]);
      r.delay_max = std::stoll(cells[5]);
      rows.push_back(r);
    } catch (const std::exception&) {
      throw data_error("metrics csv: unparsable row '" + line + "'");
    }
  }
  return rows;
}

Vector find_mode(const Potential& p, const Vector& x0, double tol,
                 std::int64_t max_iters, bool* converged) {
  require_dim(x0, p.dim, "x0");
  if (!(tol > 0.0)) throw std::invalid_argument("find_mode: tol must be > 0");
  if (max_iters < 1)
    throw std::invalid_argument("find_mode: max_iters must be >= 1");
  Vector x = x0, g(p.dim);
  if (converged) *converged = false;
  for (std::int64_t it = 0; it < max_iters; ++it) {
    p.grad_into(x, g);
    const double gn = g.norm();
    if (!std::isfinite(gn)) throw numerical_error("find_mode: gradient diverged");
    if (gn <= tol) {
      if (converged) *converged = true;
      return x;
    }
    const double fx = p.value(x);
    double t = 1.0;
    while (t > 1e-18 && !(p.value(x - t * g) <= fx - 0.5 * t * gn * gn)) t *= 0.5;
    x -= t * g;
  }
  return x;
}

Potential build_potential(const ExperimentConfig& cfg) {
  if (cfg.potential == "quadratic") {
    const auto d = static_cast<Eigen::Index>(cfg.quad_diag.size());
    Matrix A = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      A(i, i) = cfg.quad_diag[static_cast<std::size_t>(i)];
    Vector b = Vector::Zero(d);
    for (std::size_t i = 0; i < cfg.quad_b.size(); ++i)
      b[static_cast<Eigen::Index>(i)] = cfg.quad_b[i];
    return make_quadratic({A, b});
  }
  if (cfg.potential == "regression") {
    RegressionSpec spec;
    spec.true_coeffs =
        Eigen::Map<const Vector>(cfg.true_coeffs.data(),
                                 static_cast<Eigen::Index>(cfg.true_coeffs.size()));
    spec.n_samples = cfg.n_samples;
    spec.data_noise_std = cfg.data_noise_std;
    RngStream data_rng(cfg.data_seed);
    return make_regression(spec, data_rng).potential;
  }
  // rica
  Matrix raw = load_cifar10(cfg.data_file);
  std::int64_t rows = raw.rows();
  if (cfg.rica_samples > 0) {
    if (cfg.rica_samples > rows)
      throw data_error("harness: rica_samples exceeds records in " + cfg.data_file);
    rows = cfg.rica_samples;
  }
  if (cfg.rica_dim > raw.cols())
    throw config_error("harness: rica_dim exceeds pixels per record");
  RicaSpec spec;
  spec.lambda = cfg.rica_lambda;
  // One sample per column: the leading rica_dim pixels of each image.
  spec.data = raw.topLeftCorner(rows, cfg.rica_dim).transpose();
  return make_rica(spec);
}

Artifacts run_experiment(const ExperimentConfig& cfg) {
  const Potential p = build_potential(cfg);
  Vector x0 = Vector::Zero(p.dim);
  for (std::size_t i = 0; i < cfg.x0.size(); ++i)
    x0[static_cast<Eigen::Index>(i)] = cfg.x0[i];

  Artifacts art;
  art.config = cfg;
  art.x_star = find_mode(p, x0, cfg.mode_tol, cfg.mode_iters, &art.mode_converged);

  MetricEngine engine(cfg, p, art.x_star);
  const StepSchedule sched = schedule_from(cfg);
  const NoiseParams noise{cfg.sigma};
  const bool timed = cfg.clock_enabled();
  const auto t0 = Clock::now();
  auto wall_now = [&]() -> std::int64_t {
    if (!timed) return 0;
    return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0)
        .count();
  };

  RunRecord rec;
  if (cfg.scheme == "sim") {
    SimOptions so;
    so.record_stride = cfg.record_stride;
    if (cfg.batch > 0) so.batch = BatchSpec{cfg.batch};
    so.timed = timed;
    so.on_step = [&](std::int64_t K, const Vector& x, std::int64_t delay) {
      engine.push(x, delay);
      if (K % cfg.cadence == 0 || K == cfg.iters) {
        engine.eval(K, wall_now());
        if (engine.plateaued()) {
          art.early_stopped = true;
          return false;
        }
      }
      return true;
    };
    rec = simulate(p, sched, noise, delay_model_from(cfg), cfg.iters, x0,
                   cfg.seed, so);
    art.iters_run = rec.n_steps;
  } else {
    // The executors run in cadence-sized segments; each segment restarts the
    // workers from the last state with a fresh derived seed, which keeps the
    // output a pure function of (config, seed) for the barrier scheme.
    Vector xcur = x0;
    std::int64_t done = 0, seg = 0, wall_acc = 0;
    rec.dim = p.dim;
    rec.seed = cfg.seed;
    rec.scheme = cfg.scheme;
    rec.mode = cfg.scheme == "wicon" ? "inconsistent" : "consistent";
    rec.record_stride = 1;
    rec.x0 = x0;
    rec.has_staleness = true;
    while (done < cfg.iters) {
      const std::int64_t todo = std::min<std::int64_t>(cfg.cadence, cfg.iters - done);
      WorkerConfig wc;
      wc.workers = cfg.workers;
      wc.updates = todo;
      if (cfg.batch > 0) wc.batch = BatchSpec{cfg.batch};
      std::uint64_t seg_state =
          cfg.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(seg + 1);
      wc.seed = splitmix64(seg_state);
      wc.x0 = xcur;
      wc.record_stride = 1;
      wc.sync_noise = cfg.sync_noise == "per_round" ? SyncNoise::per_round
                                                    : SyncNoise::per_worker;
      wc.timed = timed;
      const std::int64_t base = done;
      StepSchedule seg_sched;
      seg_sched.gamma = [&sched, base](std::int64_t k) {
        return sched.gamma(base + k);
      };
      seg_sched.lambda = [&sched, base](std::int64_t k) {
        return sched.lambda(base + k);
      };

      RunRecord rr;
      if (cfg.scheme == "sync") {
        rr = run_sync(p, seg_sched, noise, wc);
      } else if (cfg.scheme == "wcon") {
        rr = run_wcon(p, seg_sched, noise, wc,
                      cfg.tau_cap >= 0 ? std::optional<std::int64_t>(cfg.tau_cap)
                                       : std::nullopt);
      } else {
        rr = run_wicon(p, seg_sched, noise, wc);
      }

      for (std::int64_t i = 0; i < rr.rows(); ++i) {
        const auto si = static_cast<std::size_t>(i);
        rec.step.push_back(base + rr.step[si]);
        rec.iterates.push_back(rr.iterates[si]);
        rec.delays.push_back(rr.delays[si]);
        rec.row_wall_ns.push_back(timed ? wall_acc + rr.row_wall_ns[si] : 0);
        rec.worker.push_back(rr.worker[si]);
        rec.version_at_read.push_back(base + rr.version_at_read[si]);
        rec.version_at_apply.push_back(base + rr.version_at_apply[si]);
        engine.push(rr.iterates[si], rr.delays[si]);
      }
      if (rec.delay_hist.size() < rr.delay_hist.size())
        rec.delay_hist.resize(rr.delay_hist.size(), 0);
      for (std::size_t d = 0; d < rr.delay_hist.size(); ++d)
        rec.delay_hist[d] += rr.delay_hist[d];
      rec.tau_max = std::max(rec.tau_max, rr.tau_max);
      wall_acc += rr.wall_ns;
      done += todo;
      engine.eval(done, timed ? wall_acc : 0);
      if (engine.plateaued()) {
        art.early_stopped = true;
        break;
      }
      xcur = rr.iterates.back();
      ++seg;
    }
    rec.n_steps = done;
    rec.wall_ns = wall_acc;
    art.iters_run = done;
  }
  rec.config_digest = cfg.digest();
  art.metrics = engine.rows();

  fs::create_directories(cfg.out_dir);
  const fs::path dir(cfg.out_dir);
  art.dir = dir.string();
  write_text_file((dir / "config.effective").string(), cfg.canonical());
  write_csv_file(rec, (dir / "record.csv").string());
  write_binary_file(rec, (dir / "record.bin").string());
  write_text_file((dir / "metrics.csv").string(), metrics_to_csv(art.metrics));
  write_text_file((dir / "trajectory.csv").string(),
                  trajectory_csv(rec, cfg.scheme == "sim" ? 1 : cfg.record_stride));
  write_text_file((dir / "staleness.csv").string(), staleness_csv(rec));

  const StalenessSummary stale = measure_staleness(rec);
  std::ostringstream sum;
  sum << "label = " << cfg.label << "\n"
      << "scheme = " << cfg.scheme << "\n"
      << "config_digest = " << cfg.digest() << "\n"
      << "potential_digest = " << cfg.potential_digest() << "\n"
      << "mode_converged = " << (art.mode_converged ? 1 : 0) << "\n"
      << "x_star =";
  for (Eigen::Index i = 0; i < art.x_star.size(); ++i)
    sum << (i ? "," : " ") << format_double(art.x_star[i]);
  sum << "\n"
      << "early_stopped = " << (art.early_stopped ? 1 : 0) << "\n"
      << "iters_run = " << art.iters_run << "\n"
      << "final_w2 = "
      << (art.metrics.empty() ? "nan" : format_double(art.metrics.back().w2))
      << "\n"
      << "final_kl = "
      << (art.metrics.empty() ? "nan" : format_double(art.metrics.back().kl))
      << "\n"
      << "staleness_mean = " << format_double(stale.mean) << "\n"
      << "staleness_max = " << stale.max << "\n"
      << "wall_ns = " << rec.wall_ns << "\n";
  write_text_file((dir / "summary.txt").string(), sum.str());

  art.record = std::move(rec);
  return art;
}

std::vector<MetricsRow> recompute_metrics(const ExperimentConfig& cfg,
                                          const RunRecord& r) {
  const Potential p = build_potential(cfg);
  Vector x0 = Vector::Zero(p.dim);
  for (std::size_t i = 0; i < cfg.x0.size(); ++i)
    x0[static_cast<Eigen::Index>(i)] = cfg.x0[i];
  bool conv = false;
  const Vector x_star = find_mode(p, x0, cfg.mode_tol, cfg.mode_iters, &conv);
  MetricEngine engine(cfg, p, x_star);
  std::vector<MetricsRow> out;
  for (std::int64_t i = 0; i < r.rows(); ++i) {
    const auto si = static_cast<std::size_t>(i);
    engine.push(r.iterates[si], r.delays[si]);
    const std::int64_t step = r.step[si];
    if (step % cfg.cadence == 0 || i + 1 == r.rows()) {
      const std::int64_t wall =
          r.row_wall_ns.empty() ? 0 : r.row_wall_ns[si];
      engine.eval(step, wall);
    }
  }
  return engine.rows();
}

std::string compare_report(const std::vector<std::string>& artifact_dirs,
                           const std::vector<double>& thresholds) {
  if (artifact_dirs.size() < 2)
    throw std::invalid_argument("compare_report: need at least two artifact dirs");
  if (thresholds.empty())
    throw std::invalid_argument("compare_report: need at least one threshold");

  struct Entry {
    std::string label;
    std::uint64_t pot_digest;
    std::vector<MetricsRow> rows;
  };
  std::vector<Entry> entries;
  for (const auto& d : artifact_dirs) {
    const fs::path dir(d);
    const ExperimentConfig cfg = ExperimentConfig::from_string(
        read_text_file((dir / "config.effective").string(), "compare_report"));
    Entry e;
    e.label = cfg.label;
    e.pot_digest = cfg.potential_digest();
    e.rows = metrics_from_csv(
        read_text_file((dir / "metrics.csv").string(), "compare_report"));
    entries.push_back(std::move(e));
  }
  for (std::size_t i = 1; i < entries.size(); ++i)
    if (entries[i].pot_digest != entries[0].pot_digest)
      throw data_error(
          "compare_report: artifacts describe different target measures");

  std::string out = "label,threshold,first_iter,first_wall_ns\n";
  for (const auto& e : entries) {
    for (double thr : thresholds) {
      std::int64_t first_iter = -1, first_wall = -1;
      for (const auto& r : e.rows) {
        if (r.w2 <= thr) {
          first_iter = r.iter;
          first_wall = r.wall_ns;
          break;
        }
      }
      out += e.label + "," + format_double(thr) + "," +
             std::to_string(first_iter) + "," + std::to_string(first_wall) + "\n";
    }
  }
  return out;
}

}  // namespace asgld
