#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "asgld/config.hpp"
#include "asgld/harness.hpp"
#include "asgld/record.hpp"
#include "asgld/theory.hpp"

namespace {

std::vector<double> parse_thresholds(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw asgld::config_error("report: bad threshold '" + item + "'");
    }
  }
  return out;
}

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw asgld::data_error("cannot write " + path);
  out << text;
}

std::string theory_table(const asgld::TheoryParams& tp) {
  for (const auto& w : asgld::theory_warnings(tp)) std::cerr << "warning: " << w << "\n";
  const auto kl = asgld::gamma_eps_kl(tp);
  const auto w2 = asgld::gamma_eps_w2(tp);
  std::ostringstream os;
  os << "quantity,value\n";
  for (std::size_t i = 0; i < kl.components.size(); ++i)
    os << "gamma_component_" << i + 1 << ","
       << asgld::format_double(kl.components[i]) << "\n";
  os << "gamma_eps_kl," << asgld::format_double(kl.gamma) << "\n";
  os << "n_eps_kl," << asgld::n_eps_kl(tp, kl.gamma) << "\n";
  os << "gamma_eps_w2," << asgld::format_double(w2.gamma) << "\n";
  os << "n_eps_w2," << asgld::n_eps_w2(tp, w2.gamma) << "\n";
  os << "bias_bound_at_gamma_kl,"
     << asgld::format_double(asgld::bias_bound(tp.L, static_cast<double>(tp.tau),
                                               kl.gamma, tp.G, tp.sigma))
     << "\n";
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delayed and asynchronous SGLD sampling toolkit"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> out_override, scheme_override;
  std::optional<int> workers_override;
  run->add_option("--config", config_path, "key=value config file")->required();
  run->add_option("--seed", seed_override, "override the config seed");
  run->add_option("--out", out_override, "override the output directory");
  run->add_option("--scheme", scheme_override, "override the scheme")
      ->check(CLI::IsMember({"sim", "sync", "wcon", "wicon"}));
  run->add_option("--workers", workers_override, "override the worker count");

  // theory
  auto* th = app.add_subcommand("theory", "Print step-size/iteration prescriptions");
  asgld::TheoryParams tp;
  std::string theory_out;
  th->add_option("--m", tp.m, "strong-convexity constant")->required();
  th->add_option("--L", tp.L, "gradient Lipschitz constant")->required();
  th->add_option("--d", tp.d, "dimension")->required();
  th->add_option("--sigma", tp.sigma, "diffusion temperature")->required();
  th->add_option("--G", tp.G, "gradient-norm bound")->required();
  th->add_option("--tau", tp.tau, "maximum delay")->required();
  th->add_option("--eps", tp.eps, "target accuracy")->required();
  th->add_option("--w20", tp.W2_0, "initial W2 distance to the target")->required();
  th->add_option("--out", theory_out, "write the table to a file instead of stdout");

  // metrics
  auto* me = app.add_subcommand("metrics",
                                "Recompute the metric series from a stored record");
  std::string artifact_dir;
  me->add_option("--out", artifact_dir, "artifact directory of a previous run")
      ->required();

  // report
  auto* rp = app.add_subcommand("report", "Time-to-threshold comparison");
  std::vector<std::string> dirs;
  std::string thresholds_csv = "0.5,0.2,0.1";
  std::string report_out;
  rp->add_option("dirs", dirs, "artifact directories")->expected(2, -1);
  rp->add_option("--thresholds", thresholds_csv, "comma-separated W2 thresholds");
  rp->add_option("--out", report_out, "write the table to a file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      asgld::ExperimentConfig cfg = asgld::ExperimentConfig::from_file(config_path);
      if (seed_override) cfg.seed = *seed_override;
      if (out_override) cfg.out_dir = *out_override;
      if (scheme_override) {
        cfg.scheme = *scheme_override;
        cfg.label = cfg.scheme;
      }
      if (workers_override) cfg.workers = *workers_override;
      // Re-validate after overrides by round-tripping the canonical form.
      cfg = asgld::ExperimentConfig::from_string(cfg.canonical());
      const asgld::Artifacts art = asgld::run_experiment(cfg);
      std::cout << "artifacts written to " << art.dir << "\n"
                << "iters_run " << art.iters_run
                << (art.early_stopped ? " (plateau stop)" : "") << "\n";
      if (!art.metrics.empty())
        std::cout << "final_w2 " << asgld::format_double(art.metrics.back().w2)
                  << "\n";
      if (!art.mode_converged)
        std::cerr << "warning: mode finding hit the iteration cap without "
                     "reaching mode_tol\n";
    } else if (*th) {
      write_or_print(theory_out, theory_table(tp));
    } else if (*me) {
      const std::string cfg_path = artifact_dir + "/config.effective";
      std::ifstream cin_(cfg_path);
      if (!cin_) throw asgld::data_error("metrics: cannot open " + cfg_path);
      std::stringstream buf;
      buf << cin_.rdbuf();
      const asgld::ExperimentConfig cfg =
          asgld::ExperimentConfig::from_string(buf.str());
      const asgld::RunRecord rec =
          asgld::parse_binary_file(artifact_dir + "/record.bin");
      const auto rows = asgld::recompute_metrics(cfg, rec);
      write_or_print(artifact_dir + "/metrics_recomputed.csv",
                     asgld::metrics_to_csv(rows));
      std::cout << "wrote " << artifact_dir << "/metrics_recomputed.csv\n";
    } else if (*rp) {
      write_or_print(report_out,
                     asgld::compare_report(dirs, parse_thresholds(thresholds_csv)));
    }
  } catch (const asgld::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const asgld::data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const asgld::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
