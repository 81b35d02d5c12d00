// hdtm command line: estimate a transformation parameter on CSV data, test
// a null value, run Monte Carlo studies from a JSON config, and emit Q-Q
// plot data. Exit codes: 0 success, 2 input problems, 3 estimation/study
// failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hdtm/hdtm.hpp"
#include "hdtm/parallel.hpp"

namespace {

using hdtm::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitEstimation = 3;

struct CommonOptions {
  std::string data_path;
  std::string response;
  std::string family = "boxcox";
  std::optional<double> theta_min;
  std::optional<double> theta_max;
  int grid = 41;
  int bootstrap = 100;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int threads = hdtm::hardware_threads();
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--data", opt.data_path, "input CSV file")->required();
  cmd->add_option("--response", opt.response, "response column name")->required();
  cmd->add_option("--family", opt.family, "transformation family")
      ->check(CLI::IsMember({"boxcox", "yeo-johnson"}));
  cmd->add_option("--theta-min", opt.theta_min, "lower bound of the theta search interval");
  cmd->add_option("--theta-max", opt.theta_max, "upper bound of the theta search interval");
  cmd->add_option("--grid", opt.grid, "theta grid points (>= 9)");
  cmd->add_option("--bootstrap", opt.bootstrap, "bootstrap replicates (0 disables inference)");
  cmd->add_option("--alpha", opt.alpha, "test/CI level");
  cmd->add_option("--seed", opt.seed, "random seed");
  cmd->add_option("--threads", opt.threads, "parallelism budget");
}

hdtm::TransformationFamily resolve_family(const CommonOptions& opt) {
  // Default domains: Box-Cox [-2, 2], Yeo-Johnson [-1, 3]; the search
  // interval is overridable because no canonical domain exists for a given
  // dataset.
  hdtm::TransformationFamily fam =
      opt.family == "boxcox" ? hdtm::box_cox() : hdtm::yeo_johnson();
  if (opt.theta_min) fam.theta_lo = *opt.theta_min;
  if (opt.theta_max) fam.theta_hi = *opt.theta_max;
  if (!(fam.theta_lo < fam.theta_hi))
    throw hdtm::InputError("cli: --theta-min must be below --theta-max");
  return fam;
}

ordered_json echo_config(const CommonOptions& opt, const hdtm::TransformationFamily& fam) {
  ordered_json j;
  j["data"] = opt.data_path;
  j["response"] = opt.response;
  j["family"] = fam.name();
  j["theta_min"] = fam.theta_lo;
  j["theta_max"] = fam.theta_hi;
  j["grid"] = opt.grid;
  j["bootstrap"] = opt.bootstrap;
  j["alpha"] = opt.alpha;
  j["seed"] = opt.seed;
  j["threads"] = opt.threads;
  return j;
}

hdtm::Dataset load_dataset(const CommonOptions& opt, const hdtm::TransformationFamily& fam) {
  hdtm::Dataset data = hdtm::read_csv(opt.data_path, opt.response);
  if (fam.kind == hdtm::FamilyKind::BoxCox && data.y.minCoeff() <= 0.0)
    throw hdtm::InputError("cli: box-cox requires a strictly positive response; found " +
                           std::to_string(data.y.minCoeff()));
  return data;
}

hdtm::EstimationResult run_estimate(const CommonOptions& opt,
                                    const hdtm::TransformationFamily& fam,
                                    const hdtm::Dataset& data) {
  hdtm::SolverConfig solver;
  solver.grid_points = opt.grid;
  return hdtm::estimate(data, fam, {}, solver, opt.bootstrap, opt.alpha, opt.seed, opt.threads);
}

void print_estimate(const hdtm::EstimationResult& r) {
  std::cout << "theta_hat = " << r.theta_hat << "\n";
  std::cout << "score at theta_hat = " << r.mean_psi_at_hat << "\n";
  if (r.sigma_boot) {
    std::cout << "sd(theta_hat) [bootstrap] = " << std::sqrt(*r.sigma_boot) << "\n";
    std::cout << (1.0 - r.alpha) * 100.0 << "% CI = [" << r.ci->first << ", " << r.ci->second
              << "]\n";
  }
  if (r.sigma_plug)
    std::cout << "sd(theta_hat) [plug-in diagnostic] = " << std::sqrt(*r.sigma_plug) << "\n";
  if (r.multi_root) std::cout << "warning: multiple score roots on the grid\n";
  if (r.boot_failures > 0)
    std::cout << "note: " << r.boot_failures << " bootstrap replicates failed\n";
}

int cmd_estimate(const CommonOptions& opt, const std::string& out_path) {
  const auto fam = resolve_family(opt);
  const auto config = echo_config(opt, fam);
  std::cerr << "config: " << config.dump() << "\n";
  const auto data = load_dataset(opt, fam);
  const auto result = run_estimate(opt, fam, data);
  print_estimate(result);
  if (!out_path.empty()) hdtm::write_result(result, out_path, config);
  return kExitOk;
}

int cmd_test(const CommonOptions& opt, double null_value, const std::string& out_path) {
  const auto fam = resolve_family(opt);
  if (null_value < fam.theta_lo || null_value > fam.theta_hi)
    throw hdtm::InputError("cli: --null outside the theta search interval");
  if (opt.bootstrap < 2) throw hdtm::InputError("cli: test requires --bootstrap >= 2");
  auto config = echo_config(opt, fam);
  config["null"] = null_value;
  std::cerr << "config: " << config.dump() << "\n";
  const auto data = load_dataset(opt, fam);
  auto result = run_estimate(opt, fam, data);
  const auto decision = hdtm::test_null(result, null_value);
  print_estimate(result);
  std::cout << "H0: theta = " << null_value << "\n";
  std::cout << "z = " << decision.z_stat << ", p = " << decision.p_value << "\n";
  std::cout << (decision.reject ? "reject" : "accept") << " at level " << result.alpha << "\n";
  if (!out_path.empty()) {
    auto j = hdtm::result_to_json(result, config);
    j["test"] = {{"null", null_value},
                 {"z", decision.z_stat},
                 {"p", decision.p_value},
                 {"reject", decision.reject}};
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw hdtm::InputError("cli: cannot write '" + out_path + "'");
    out << j.dump(2) << "\n";
  }
  return kExitOk;
}

hdtm::SimConfig parse_sim_config(const ordered_json& j) {
  hdtm::SimConfig cfg;
  const std::string fam = j.value("family", "boxcox");
  if (fam == "boxcox")
    cfg.family = hdtm::box_cox();
  else if (fam == "yeo-johnson")
    cfg.family = hdtm::yeo_johnson();
  else
    throw hdtm::InputError("sim config: unknown family '" + fam + "' (field: family)");
  cfg.theta0 = j.value("theta0", 0.0);
  cfg.n = j.value("n", 200);
  cfg.n_test = j.value("n_test", 200);
  cfg.p = j.value("p", 20);
  cfg.s = j.value("s", 5);
  cfg.snr = j.value("snr", 1.0);
  const std::string cov = j.value("cov", "identity");
  if (cov == "identity")
    cfg.cov_kind = hdtm::CovKind::Identity;
  else if (cov == "toeplitz")
    cfg.cov_kind = hdtm::CovKind::Toeplitz;
  else if (cov == "equi")
    cfg.cov_kind = hdtm::CovKind::Equi;
  else
    throw hdtm::InputError("sim config: unknown covariance '" + cov + "' (field: cov)");
  cfg.c = j.value("c", 0.35);
  cfg.reps = j.value("reps", 500);
  cfg.n_boot = j.value("n_boot", 100);
  cfg.alpha = j.value("alpha", 0.05);
  cfg.base_seed = j.value("seed", std::uint64_t{1});
  if (j.contains("theta_min")) cfg.family.theta_lo = j["theta_min"].get<double>();
  if (j.contains("theta_max")) cfg.family.theta_hi = j["theta_max"].get<double>();
  if (j.contains("grid")) cfg.solver.grid_points = j["grid"].get<int>();
  cfg.validate();
  return cfg;
}

void append_report_csv(std::ostream& out, const hdtm::SimConfig& cfg,
                       const hdtm::SimulationReport& rep) {
  char line[512];
  std::snprintf(line, sizeof line, "%s,%.17g,%d,%d,%d,%.17g,%s,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                cfg.family.name(), cfg.theta0, cfg.n, cfg.p, cfg.s, cfg.snr,
                hdtm::cov_kind_name(cfg.cov_kind), cfg.reps, cfg.n_boot, rep.mean_estimator,
                rep.acceptance_rate, rep.mae, rep.rel_mse, rep.mse, rep.failures);
  out << line;
}

int cmd_simulate(const std::string& config_path, std::optional<int> reps_override,
                 std::optional<std::uint64_t> seed_override, int threads,
                 const std::string& out_path) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in) throw hdtm::InputError("cli: cannot open config '" + config_path + "'");
  ordered_json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw hdtm::InputError(std::string("cli: invalid config JSON: ") + e.what());
  }
  std::vector<ordered_json> blocks;
  if (doc.contains("configs")) {
    if (!doc["configs"].is_array())
      throw hdtm::InputError("cli: 'configs' must be an array (field: configs)");
    for (const auto& b : doc["configs"]) blocks.push_back(b);
  } else {
    blocks.push_back(doc);
  }
  if (blocks.empty()) throw hdtm::InputError("cli: empty config list");

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw hdtm::InputError("cli: cannot write '" + out_path + "'");
  out << "family,theta0,n,p,s,snr,cov,reps,n_boot,mean_estimator,acceptance_rate,mae,rel_mse,mse,"
         "failures\n";

  ordered_json detail;
  detail["tool"] = "hdtm";
  detail["version"] = hdtm::version;
  detail["configs"] = ordered_json::array();

  for (auto& block : blocks) {
    hdtm::SimConfig cfg = parse_sim_config(block);
    if (reps_override) cfg.reps = *reps_override;
    if (seed_override) cfg.base_seed = *seed_override;
    cfg.threads = threads;
    std::cerr << "config: " << block.dump() << " -> reps=" << cfg.reps
              << " seed=" << cfg.base_seed << " threads=" << cfg.threads << "\n";
    const auto report = hdtm::run_study(cfg);
    append_report_csv(out, cfg, report);

    ordered_json jc;
    jc["config"] = block;
    jc["reps_used"] = cfg.reps;
    jc["seed_used"] = cfg.base_seed;
    jc["sigma2_true"] = report.sigma2_true;
    jc["mean_estimator"] = report.mean_estimator;
    jc["acceptance_rate"] = report.acceptance_rate;
    jc["mae"] = report.mae;
    jc["rel_mse"] = report.rel_mse;
    jc["mse"] = report.mse;
    jc["failures"] = report.failures;
    ordered_json per = ordered_json::array();
    for (const auto& r : report.reps) {
      ordered_json jr;
      jr["rep"] = r.rep;
      if (r.failed) {
        jr["error"] = r.error;
      } else {
        jr["theta_hat"] = r.theta_hat;
        jr["mse"] = r.mse;
        if (cfg.n_boot > 0) {
          jr["accepted"] = r.accepted;
          jr["sigma_boot"] = r.sigma_boot;
        }
      }
      per.push_back(jr);
    }
    jc["reps"] = per;
    detail["configs"].push_back(jc);
    std::cout << hdtm::cov_kind_name(cfg.cov_kind) << " p=" << cfg.p << " n=" << cfg.n
              << " theta0=" << cfg.theta0 << " snr=" << cfg.snr
              << ": mean=" << report.mean_estimator << " acc=" << report.acceptance_rate
              << " mae=" << report.mae << " rel_mse=" << report.rel_mse << "\n";
  }

  std::filesystem::path detail_path(out_path);
  detail_path.replace_extension(".json");
  std::ofstream dj(detail_path, std::ios::binary);
  if (!dj) throw hdtm::InputError("cli: cannot write '" + detail_path.string() + "'");
  dj << detail.dump(2) << "\n";
  return kExitOk;
}

int cmd_qq(const CommonOptions& opt, std::optional<double> theta,
           const std::string& theta_from_json, const std::string& out_prefix) {
  const auto fam = resolve_family(opt);
  if (!theta && theta_from_json.empty())
    throw hdtm::InputError("cli: qq needs --theta or --theta-hat-from");
  double th = theta ? *theta : hdtm::read_result(theta_from_json).theta_hat;
  if (th < fam.theta_lo || th > fam.theta_hi)
    throw hdtm::InputError("cli: theta outside the family domain");
  auto config = echo_config(opt, fam);
  config["theta"] = th;
  std::cerr << "config: " << config.dump() << "\n";

  const auto data = load_dataset(opt, fam);
  const auto at_theta = hdtm::fit_at_theta(data, fam, th, {});
  const auto at_log = hdtm::fit_at_theta(data, fam, 0.0, {});
  const auto table_theta = hdtm::qq_data(at_theta);
  const auto table_log = hdtm::qq_data(at_log);
  hdtm::write_qq_csv(table_theta, out_prefix + "_theta.csv");
  hdtm::write_qq_csv(table_log, out_prefix + "_log.csv");
  std::cout << "qq sup deviation at theta=" << th << ": " << hdtm::qq_sup_deviation(table_theta)
            << "\n";
  std::cout << "qq sup deviation at theta=0 (log): " << hdtm::qq_sup_deviation(table_log) << "\n";
  std::cout << "wrote " << out_prefix << "_theta.csv and " << out_prefix << "_log.csv\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transformation-model estimation with lasso nuisances"};
  app.set_version_flag("--version", std::string("hdtm ") + hdtm::version);
  app.require_subcommand(1);

  CommonOptions est_opt;
  std::string est_out;
  auto* est = app.add_subcommand("estimate", "estimate the transformation parameter");
  add_common(est, est_opt);
  est->add_option("--out", est_out, "result JSON path")->required();

  CommonOptions test_opt;
  std::string test_out;
  double null_value = 0.0;
  auto* test = app.add_subcommand("test", "estimate, then test H0: theta = null");
  add_common(test, test_opt);
  test->add_option("--null", null_value, "null value of theta")->required();
  test->add_option("--out", test_out, "result JSON path");

  std::string sim_config, sim_out;
  std::optional<int> sim_reps;
  std::optional<std::uint64_t> sim_seed;
  int sim_threads = hdtm::hardware_threads();
  auto* sim = app.add_subcommand("simulate", "run Monte Carlo studies from a JSON config");
  sim->add_option("--config", sim_config, "study config JSON")->required();
  sim->add_option("--reps", sim_reps, "override repetition count");
  sim->add_option("--seed", sim_seed, "override base seed");
  sim->add_option("--threads", sim_threads, "parallelism budget");
  sim->add_option("--out", sim_out, "output CSV path")->required();

  CommonOptions qq_opt;
  std::optional<double> qq_theta;
  std::string qq_from, qq_prefix;
  auto* qq = app.add_subcommand("qq", "emit Q-Q plot data at theta and at theta = 0");
  qq->add_option("--data", qq_opt.data_path, "input CSV file")->required();
  qq->add_option("--response", qq_opt.response, "response column name")->required();
  qq->add_option("--family", qq_opt.family, "transformation family")
      ->check(CLI::IsMember({"boxcox", "yeo-johnson"}));
  qq->add_option("--theta", qq_theta, "transformation parameter");
  qq->add_option("--theta-hat-from", qq_from, "read theta from a result JSON");
  qq->add_option("--out-prefix", qq_prefix, "output prefix for the two CSV files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (est->parsed()) return cmd_estimate(est_opt, est_out);
    if (test->parsed()) return cmd_test(test_opt, null_value, test_out);
    if (sim->parsed()) return cmd_simulate(sim_config, sim_reps, sim_seed, sim_threads, sim_out);
    if (qq->parsed()) return cmd_qq(qq_opt, qq_theta, qq_from, qq_prefix);
  } catch (const hdtm::EstimationError& e) {
    std::cerr << "estimation failed: " << e.what() << "\n";
    return kExitEstimation;
  } catch (const hdtm::BootstrapError& e) {
    std::cerr << "bootstrap failed: " << e.what() << "\n";
    return kExitEstimation;
  } catch (const hdtm::StudyError& e) {
    std::cerr << "study failed: " << e.what() << "\n";
    return kExitEstimation;
  } catch (const hdtm::DgpError& e) {
    std::cerr << "data generation failed: " << e.what() << "\n";
    return kExitEstimation;
  } catch (const hdtm::Error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}
