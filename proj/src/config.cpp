#include "asgld/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "asgld/record.hpp"

namespace asgld {
namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double to_f64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw config_error("config: key '" + key + "' has non-numeric value '" + v + "'");
  }
}

std::int64_t to_i64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw config_error("config: key '" + key + "' has non-integer value '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw config_error("config: key '" + key + "' has non-integer value '" + v + "'");
  }
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_f64(key, trim(item)));
  if (out.empty())
    throw config_error("config: key '" + key + "' has an empty list value");
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

void apply_potential_defaults(ExperimentConfig& c) {
  if (c.potential == "quadratic") {
    c.gamma = 0.01;
    c.sigma = 1.0;
    c.batch = 0;
  } else if (c.potential == "regression") {
    c.gamma = 0.01;
    c.sigma = 1e-4;
    c.batch = 100000;
  } else if (c.potential == "rica") {
    c.gamma = 0.002;
    c.sigma = 1e-4;
    c.batch = 1000;
    c.record_stride = 50;
  } else {
    throw config_error("config: unknown potential '" + c.potential + "'");
  }
}

void validate(const ExperimentConfig& c) {
  auto bad = [](const std::string& msg) { throw config_error("config: " + msg); };
  if (c.scheme != "sim" && c.scheme != "sync" && c.scheme != "wcon" &&
      c.scheme != "wicon")
    bad("unknown scheme '" + c.scheme + "'");
  if (c.workers < 1) bad("workers must be >= 1");
  if (c.scheme == "sim" && c.workers != 1)
    bad("the sim scheme is single-threaded; workers must be 1");
  if (c.sigma < 0.0) bad("sigma must be >= 0");
  if (!(c.gamma > 0.0)) bad("gamma must be > 0");
  if (c.schedule != "constant" && c.schedule != "power")
    bad("unknown schedule '" + c.schedule + "'");
  if (c.gamma_decay < 0.0 || c.lambda_decay < 0.0)
    bad("schedule decays must be >= 0");
  if (c.schedule == "constant" && (c.gamma_decay != 0.0 || c.lambda_decay != 0.0))
    bad("decay keys require schedule=power");
  if (c.batch < 0) bad("batch must be >= 0");
  if (c.iters < 1) bad("iters must be >= 1");
  if (c.cadence < 1) bad("cadence must be >= 1");
  if (c.plateau_window < 0) bad("plateau_window must be >= 0");
  if (c.plateau_tol < 0.0) bad("plateau_tol must be >= 0");
  if (c.w2_window < 1) bad("w2_window must be >= 1");
  if (c.w2_points < 1) bad("w2_points must be >= 1");
  if (c.kl_bins < 1) bad("kl_bins must be >= 1");
  if (!(c.kl_span > 0.0)) bad("kl_span must be > 0");
  if (c.record_stride < 1) bad("record_stride must be >= 1");
  if (c.clock != "auto" && c.clock != "none" && c.clock != "mono")
    bad("clock must be auto, none or mono");
  if (!(c.mode_tol > 0.0)) bad("mode_tol must be > 0");
  if (c.mode_iters < 1) bad("mode_iters must be >= 1");

  if (c.delay != "none" && c.delay != "fixed" && c.delay != "uniform")
    bad("unknown delay model '" + c.delay + "'");
  if (c.scheme != "sim" &&
      (c.delay != "none" || c.tau_max != 0 || c.fixed_delay != 0))
    bad("the delay model applies to the sim scheme only");
  if (c.tau_max < 0) bad("tau_max must be >= 0");
  if (c.fixed_delay < 0) bad("fixed_delay must be >= 0");
  if (c.delay == "fixed" && c.fixed_delay > c.tau_max)
    bad("fixed_delay must not exceed tau_max");

  if (c.tau_cap < -1) bad("tau_cap must be >= -1");
  if (c.scheme != "wcon" && c.tau_cap != -1)
    bad("tau_cap applies to the wcon scheme only");
  if (c.sync_noise != "per_worker" && c.sync_noise != "per_round")
    bad("sync_noise must be per_worker or per_round");
  if (c.scheme != "sync" && c.sync_noise != "per_worker")
    bad("sync_noise applies to the sync scheme only");

  if (c.potential == "quadratic") {
    if (c.quad_diag.empty()) bad("quad_diag must be nonempty");
    for (double a : c.quad_diag)
      if (!(a > 0.0)) bad("quad_diag entries must be > 0");
    if (!c.quad_b.empty() && c.quad_b.size() != c.quad_diag.size())
      bad("quad_b length must match quad_diag");
  } else if (c.potential == "regression") {
    if (c.n_samples < 1) bad("n_samples must be >= 1");
    if (c.data_noise_std < 0.0) bad("data_noise_std must be >= 0");
    if (c.true_coeffs.size() != 5)
      bad("true_coeffs must have 5 entries (quartic polynomial features)");
  } else if (c.potential == "rica") {
    if (c.data_file.empty()) bad("rica requires data_file");
    if (c.rica_dim < 1) bad("rica_dim must be >= 1");
    if (!(c.rica_lambda > 0.0)) bad("rica_lambda must be > 0");
    if (c.rica_samples < 0) bad("rica_samples must be >= 0");
  }

  if (!c.x0.empty() && static_cast<int>(c.x0.size()) != c.dim())
    bad("x0 length does not match the potential dimension");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config: line " + std::to_string(lineno) +
                         " is not key=value: '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw config_error("config: line " + std::to_string(lineno) + " has empty key");
    if (!kv.emplace(key, val).second)
      throw config_error("config: duplicate key '" + key + "'");
  }

  ExperimentConfig c;
  if (auto it = kv.find("potential"); it != kv.end()) c.potential = it->second;
  apply_potential_defaults(c);

  for (const auto& [key, val] : kv) {
    if (key == "potential") continue;
    if (key == "scheme") c.scheme = val;
    else if (key == "workers") c.workers = static_cast<int>(to_i64(key, val));
    else if (key == "seed") c.seed = to_u64(key, val);
    else if (key == "out_dir") c.out_dir = val;
    else if (key == "label") c.label = val;
    else if (key == "sigma") c.sigma = to_f64(key, val);
    else if (key == "gamma") c.gamma = to_f64(key, val);
    else if (key == "schedule") c.schedule = val;
    else if (key == "gamma_decay") c.gamma_decay = to_f64(key, val);
    else if (key == "lambda_decay") c.lambda_decay = to_f64(key, val);
    else if (key == "batch") c.batch = to_i64(key, val);
    else if (key == "iters") c.iters = to_i64(key, val);
    else if (key == "cadence") c.cadence = to_i64(key, val);
    else if (key == "plateau_window") c.plateau_window = to_i64(key, val);
    else if (key == "plateau_tol") c.plateau_tol = to_f64(key, val);
    else if (key == "w2_window") c.w2_window = to_i64(key, val);
    else if (key == "w2_points") c.w2_points = to_i64(key, val);
    else if (key == "kl_bins") c.kl_bins = static_cast<int>(to_i64(key, val));
    else if (key == "kl_span") c.kl_span = to_f64(key, val);
    else if (key == "record_stride") c.record_stride = to_i64(key, val);
    else if (key == "clock") c.clock = val;
    else if (key == "x0") c.x0 = to_list(key, val);
    else if (key == "mode_tol") c.mode_tol = to_f64(key, val);
    else if (key == "mode_iters") c.mode_iters = to_i64(key, val);
    else if (key == "delay") c.delay = val;
    else if (key == "tau_max") c.tau_max = to_i64(key, val);
    else if (key == "fixed_delay") c.fixed_delay = to_i64(key, val);
    else if (key == "tau_cap") c.tau_cap = to_i64(key, val);
    else if (key == "sync_noise") c.sync_noise = val;
    else if (key == "quad_diag") c.quad_diag = to_list(key, val);
    else if (key == "quad_b") c.quad_b = to_list(key, val);
    else if (key == "n_samples") c.n_samples = to_i64(key, val);
    else if (key == "data_noise_std") c.data_noise_std = to_f64(key, val);
    else if (key == "true_coeffs") c.true_coeffs = to_list(key, val);
    else if (key == "data_seed") c.data_seed = to_u64(key, val);
    else if (key == "data_file") c.data_file = val;
    else if (key == "rica_dim") c.rica_dim = static_cast<int>(to_i64(key, val));
    else if (key == "rica_lambda") c.rica_lambda = to_f64(key, val);
    else if (key == "rica_samples") c.rica_samples = to_i64(key, val);
    else throw config_error("config: unknown key '" + key + "'");
  }
  if (c.label.empty()) c.label = c.scheme;
  validate(c);
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

int ExperimentConfig::dim() const {
  if (potential == "quadratic") return static_cast<int>(quad_diag.size());
  if (potential == "regression") return 5;
  return rica_dim * rica_dim;
}

bool ExperimentConfig::clock_enabled() const {
  if (clock == "mono") return true;
  if (clock == "none") return false;
  return scheme == "wcon" || scheme == "wicon";
}

std::string ExperimentConfig::canonical() const {
  std::map<std::string, std::string> kv;
  kv["potential"] = potential;
  kv["scheme"] = scheme;
  kv["workers"] = std::to_string(workers);
  kv["seed"] = std::to_string(seed);
  kv["out_dir"] = out_dir;
  kv["label"] = label;
  kv["sigma"] = format_double(sigma);
  kv["gamma"] = format_double(gamma);
  kv["schedule"] = schedule;
  kv["gamma_decay"] = format_double(gamma_decay);
  kv["lambda_decay"] = format_double(lambda_decay);
  kv["batch"] = std::to_string(batch);
  kv["iters"] = std::to_string(iters);
  kv["cadence"] = std::to_string(cadence);
  kv["plateau_window"] = std::to_string(plateau_window);
  kv["plateau_tol"] = format_double(plateau_tol);
  kv["w2_window"] = std::to_string(w2_window);
  kv["w2_points"] = std::to_string(w2_points);
  kv["kl_bins"] = std::to_string(kl_bins);
  kv["kl_span"] = format_double(kl_span);
  kv["record_stride"] = std::to_string(record_stride);
  kv["clock"] = clock;
  if (!x0.empty()) kv["x0"] = join(x0);
  kv["mode_tol"] = format_double(mode_tol);
  kv["mode_iters"] = std::to_string(mode_iters);
  kv["delay"] = delay;
  kv["tau_max"] = std::to_string(tau_max);
  kv["fixed_delay"] = std::to_string(fixed_delay);
  kv["tau_cap"] = std::to_string(tau_cap);
  kv["sync_noise"] = sync_noise;
  if (potential == "quadratic") {
    kv["quad_diag"] = join(quad_diag);
    if (!quad_b.empty()) kv["quad_b"] = join(quad_b);
  } else if (potential == "regression") {
    kv["n_samples"] = std::to_string(n_samples);
    kv["data_noise_std"] = format_double(data_noise_std);
    kv["true_coeffs"] = join(true_coeffs);
    kv["data_seed"] = std::to_string(data_seed);
  } else if (potential == "rica") {
    kv["data_file"] = data_file;
    kv["rica_dim"] = std::to_string(rica_dim);
    kv["rica_lambda"] = format_double(rica_lambda);
    kv["rica_samples"] = std::to_string(rica_samples);
  }
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t ExperimentConfig::digest() const { return fnv1a(canonical()); }

std::uint64_t ExperimentConfig::potential_digest() const {
  std::string s = "potential=" + potential + ";sigma=" + format_double(sigma);
  if (potential == "quadratic") {
    s += ";quad_diag=" + join(quad_diag);
    if (!quad_b.empty()) s += ";quad_b=" + join(quad_b);
  } else if (potential == "regression") {
    s += ";n_samples=" + std::to_string(n_samples);
    s += ";data_noise_std=" + format_double(data_noise_std);
    s += ";true_coeffs=" + join(true_coeffs);
    s += ";data_seed=" + std::to_string(data_seed);
  } else if (potential == "rica") {
    s += ";data_file=" + data_file;
    s += ";rica_dim=" + std::to_string(rica_dim);
    s += ";rica_lambda=" + format_double(rica_lambda);
    s += ";rica_samples=" + std::to_string(rica_samples);
  }
  return fnv1a(s);
}

}  // namespace asgld
