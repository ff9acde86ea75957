#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "minimax/complexity.hpp"
#include "minimax/design.hpp"
#include "minimax/errors.hpp"
#include "minimax/geometry.hpp"
#include "minimax/harness.hpp"
#include "minimax/solvers.hpp"
#include "minimax/suite.hpp"

namespace minimax::cli {

namespace {

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw InputError("cannot write " + path);
}

struct WidthArgs {
  int d = 1;
  double rho = 0.0, r = 0.0;
  int samples = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out;
};

struct ProfileArgs {
  int N = 0, d = 0;
  double sigma = 1.0, rho_min = 0.0, rho_max = 0.0;
  int points = 12;
  std::string method = "mc", profile = "calibrated", out;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct EstimateArgs {
  std::string data, estimator = "rerm", profile = "calibrated", psi = "closed", out;
  double sigma = -1.0, rho = -1.0, lambda = -1.0;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct SuiteArgs {
  std::string config, out = "out";
  int threads = 1;
};

int cmd_width(const WidthArgs& a, std::ostream& out) {
  if (a.d < 1 || a.samples < 1 || !(a.rho >= 0.0) || !(a.r >= 0.0) || a.threads < 1)
    throw InputError("width: need d >= 1, samples >= 1, rho >= 0, r >= 0");
  const WidthEstimate w = gaussian_mean_width(L1L2Set{a.rho, a.r, a.d}, a.samples, a.seed, a.threads);
  emit("{\"value\": " + g17(w.value) + ", \"stderr\": " + g17(w.std_error) + ", \"samples\": " +
           std::to_string(w.samples) + "}\n",
       a.out, out);
  return kExitOk;
}

int cmd_profile(const ProfileArgs& a, std::ostream& out) {
  if (a.N < 1 || a.d < 1 || !(a.sigma >= 0.0) || !(a.rho_min > 0.0) || !(a.rho_max >= a.rho_min) || a.points < 1)
    throw InputError("profile: need N, d >= 1, sigma >= 0, 0 < rho-min <= rho-max, points >= 1");
  if (a.points == 1 && a.rho_max != a.rho_min) throw InputError("profile: one point needs rho-min = rho-max");
  if (a.method != "mc" && a.method != "closed") throw InputError("profile: --method must be mc or closed");
  const ConstantsProfile prof = ConstantsProfile::by_name(a.profile);
  const auto grid = a.points == 1 ? std::vector<double>{a.rho_min} : log_grid(a.rho_min, a.rho_max, a.points);
  const ComplexityProfile p = complexity_profile(a.N, a.d, a.sigma, grid, prof,
                                                 a.method == "mc" ? PsiMode::kMonteCarlo : PsiMode::kClosed, a.seed,
                                                 a.threads);
  std::string csv = "rho,r_M,r_Q,r,psi,method\n";
  for (std::size_t i = 0; i < grid.size(); ++i)
    csv += g17(p.rho_grid[i]) + "," + g17(p.r_M[i]) + "," + g17(p.r_Q[i]) + "," + g17(p.r[i]) + "," + g17(p.psi[i]) +
           "," + method_name(p.method[i]) + "\n";
  emit(csv, a.out, out);
  return kExitOk;
}

int cmd_estimate(const EstimateArgs& a, std::ostream& out) {
  const Dataset ds = [&] {
    Dataset d = load_dataset_csv(a.data);
    if (a.sigma >= 0.0) d.sigma_known = a.sigma;
    return d;
  }();
  EstimationResult res;
  nlohmann::ordered_json j;
  j["estimator"] = a.estimator;
  j["N"] = ds.N();
  j["d"] = ds.d();
  if (a.estimator == "erm") {
    if (!(a.rho >= 0.0)) throw InputError("estimate: erm needs --rho");
    res = constrained_erm(ds, a.rho);
    j["rho"] = a.rho;
  } else if (a.estimator == "lasso") {
    double lambda = a.lambda;
    if (lambda < 0.0) {
      if (a.sigma < 0.0) throw InputError("estimate: lasso needs --lambda or --sigma");
      lambda = lasso_default_lambda(a.sigma, ds.N(), ds.d());
    }
    res = lasso(ds, lambda);
    j["lambda"] = lambda;
    j["subgradient_residual"] = res.subgradient_residual;
  } else if (a.estimator == "rerm") {
    if (a.sigma < 0.0) throw InputError("estimate: rerm needs --sigma");
    if (a.psi != "mc" && a.psi != "closed") throw InputError("estimate: --psi must be mc or closed");
    const CellSpec cell{ds.N(), ds.d(), a.sigma, TargetSpec{}};
    const auto psi_fn = cell_psi(cell, ConstantsProfile::by_name(a.profile),
                                 a.psi == "mc" ? PsiMode::kMonteCarlo : PsiMode::kClosed, 32, a.seed, a.threads);
    res = rerm(ds, psi_fn, RermGrid{});
    j["psi"] = a.psi;
    j["profile"] = a.profile;
    j["psi_at_rho_hat"] = psi_fn(res.l1_norm);
  } else {
    throw InputError("estimate: --estimator must be rerm, lasso or erm");
  }
  j["l1_norm"] = res.l1_norm;
  j["objective"] = res.objective;
  j["converged"] = res.converged;
  j["iterations"] = res.iterations;
  j["t_hat"] = std::vector<double>(res.t_hat.data(), res.t_hat.data() + res.t_hat.size());
  emit(j.dump(2) + "\n", a.out, out);
  return kExitOk;
}

int cmd_suite(const SuiteArgs& a, const std::set<std::string>& types, std::ostream& out) {
  const auto config = load_config_file(a.config);
  const SuiteResult r = run_suite(config, a.threads, types);
  write_suite_outputs(r, a.out);
  out << "config_hash " << r.report["config_hash"].get<std::string>() << "\n";
  for (const auto& e : r.report["experiments"])
    out << (e["pass"].get<bool>() ? "PASS " : "FAIL ") << e["name"].get<std::string>() << "\n";
  for (const auto& f : r.failed_flags) out << "  failed: " << f << "\n";
  out << "wrote " << a.out << "/report.json and " << a.out << "/trials.csv\n";
  return r.pass ? kExitOk : kExitFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Minimax regularization for l1-penalized least squares"};
  app.name("minimaxreg");
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  WidthArgs wa;
  auto* width = app.add_subcommand("width", "Monte Carlo Gaussian mean width of rho*B_1 cap r*B_2");
  width->add_option("--d", wa.d, "dimension")->required();
  width->add_option("--rho", wa.rho, "l1 radius")->required();
  width->add_option("--r", wa.r, "l2 radius")->required();
  width->add_option("--samples", wa.samples, "Gaussian samples")->capture_default_str();
  width->add_option("--seed", wa.seed, "seed")->capture_default_str();
  width->add_option("--threads", wa.threads, "worker threads")->capture_default_str();
  width->add_option("--out", wa.out, "output file (default stdout)");

  ProfileArgs pa;
  auto* profile = app.add_subcommand("profile", "fixed points r_M, r_Q and Psi on a log grid of rho");
  profile->add_option("--N", pa.N, "sample size")->required();
  profile->add_option("--d", pa.d, "dimension")->required();
  profile->add_option("--sigma", pa.sigma, "noise level")->capture_default_str();
  profile->add_option("--rho-min", pa.rho_min, "smallest rho")->required();
  profile->add_option("--rho-max", pa.rho_max, "largest rho")->required();
  profile->add_option("--points", pa.points, "grid points")->capture_default_str();
  profile->add_option("--method", pa.method, "mc or closed")->capture_default_str();
  profile->add_option("--profile", pa.profile, "paper or calibrated")->capture_default_str();
  profile->add_option("--seed", pa.seed, "seed")->capture_default_str();
  profile->add_option("--threads", pa.threads, "worker threads")->capture_default_str();
  profile->add_option("--out", pa.out, "output file (default stdout)");

  EstimateArgs ea;
  auto* estimate = app.add_subcommand("estimate", "fit an estimator to a dataset CSV (y first, then features)");
  estimate->add_option("--data", ea.data, "dataset CSV")->required();
  estimate->add_option("--estimator", ea.estimator, "rerm, lasso or erm")->capture_default_str();
  estimate->add_option("--sigma", ea.sigma, "noise level (rerm, default lasso lambda)");
  estimate->add_option("--rho", ea.rho, "l1 radius for erm");
  estimate->add_option("--lambda", ea.lambda, "lasso penalty");
  estimate->add_option("--profile", ea.profile, "paper or calibrated")->capture_default_str();
  estimate->add_option("--psi", ea.psi, "mc or closed")->capture_default_str();
  estimate->add_option("--seed", ea.seed, "seed for Monte Carlo Psi")->capture_default_str();
  estimate->add_option("--threads", ea.threads, "worker threads")->capture_default_str();
  estimate->add_option("--out", ea.out, "output file (default stdout)");

  SuiteArgs sa;
  const auto add_suite = [&](const char* name, const char* help) {
    auto* c = app.add_subcommand(name, help);
    c->add_option("config", sa.config, "JSON config file")->required();
    c->add_option("--out", sa.out, "output directory")->capture_default_str();
    c->add_option("--threads", sa.threads, "worker threads")->capture_default_str();
    return c;
  };
  auto* simulate = add_suite("simulate", "run every experiment in a config");
  auto* compare = add_suite("compare", "run the rate experiments (paired estimator comparison)");
  auto* fixed = add_suite("fixed-design", "run the fixed-design and RIP experiments");
  auto* events = add_suite("check-events", "run the event-frequency experiments");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "minimaxreg: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (width->parsed()) return cmd_width(wa, out);
    if (profile->parsed()) return cmd_profile(pa, out);
    if (estimate->parsed()) return cmd_estimate(ea, out);
    if (sa.threads < 1) throw InputError("--threads must be at least 1");
    if (simulate->parsed()) return cmd_suite(sa, {}, out);
    if (compare->parsed()) return cmd_suite(sa, {"rate"}, out);
    if (fixed->parsed()) return cmd_suite(sa, {"fixed_design", "rip"}, out);
    if (events->parsed()) return cmd_suite(sa, {"events"}, out);
  } catch (const InputError& e) {
    err << "minimaxreg: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "minimaxreg: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "minimaxreg: error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}

}  // namespace minimax::cli
