// Copyright 2026 The rscmjp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// rscmjp command-line driver.

#include <fmt/format.h>

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rscmjp/rscmjp.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rscmjp;

namespace {

struct RunConfig {
  std::string command;
  fs::path model;
  fs::path stats;
  fs::path input;
  fs::path out = ".";
  std::uint64_t seed = 0;
  int n_paths = 100;
  double horizon = 10.0;
  int replicates = 10;
  std::string method = "EM";
  double tol = 1e-8;
  int max_iter = 0;
  int psi_iters = 500;
  double psi_tol = 1e-10;
  unsigned threads = 0;
  int regimes = 0;
  std::string column;
  double center = 0.0;
  double scale = 1.0;
};

const json* lookup(const json& j, const std::string& key) {
  for (const std::string& k : {key, [&] {
         std::string s = key;
         for (auto& c : s)
           if (c == '_') c = '-';
         return s;
       }()}) {
    auto it = j.find(k);
    if (it != j.end()) return &*it;
  }
  return nullptr;
}

// Settings from a config file; relative paths resolve against its directory.
void apply_config_file(RunConfig& cfg, const fs::path& file) {
  json j;
  try {
    j = json::parse(io::read_text_file(file));
  } catch (const json::exception& e) {
    throw IoError(file.string() + ": " + e.what());
  }
  if (!j.is_object()) throw IoError(file.string() + ": expected an object");
  const fs::path base = file.parent_path();
  auto path = [&](const char* key, fs::path& dst) {
    if (auto* v = lookup(j, key)) {
      fs::path p = v->get<std::string>();
      dst = p.is_absolute() || base.empty() ? p : base / p;
    }
  };
  try {
    if (auto* v = lookup(j, "command")) cfg.command = v->get<std::string>();
    path("model", cfg.model);
    path("stats", cfg.stats);
    path("input", cfg.input);
    path("out", cfg.out);
    if (auto* v = lookup(j, "seed")) cfg.seed = v->get<std::uint64_t>();
    if (auto* v = lookup(j, "n_paths")) cfg.n_paths = v->get<int>();
    if (auto* v = lookup(j, "horizon")) cfg.horizon = v->get<double>();
    if (auto* v = lookup(j, "replicates")) cfg.replicates = v->get<int>();
    if (auto* v = lookup(j, "method")) cfg.method = v->get<std::string>();
    if (auto* v = lookup(j, "tol")) cfg.tol = v->get<double>();
    if (auto* v = lookup(j, "max_iter")) cfg.max_iter = v->get<int>();
    if (auto* v = lookup(j, "psi_iters")) cfg.psi_iters = v->get<int>();
    if (auto* v = lookup(j, "psi_tol")) cfg.psi_tol = v->get<double>();
    if (auto* v = lookup(j, "threads")) cfg.threads = v->get<unsigned>();
    if (auto* v = lookup(j, "regimes")) cfg.regimes = v->get<int>();
    if (auto* v = lookup(j, "column")) cfg.column = v->get<std::string>();
    if (auto* v = lookup(j, "center")) cfg.center = v->get<double>();
    if (auto* v = lookup(j, "scale")) cfg.scale = v->get<double>();
  } catch (const json::exception& e) {
    throw IoError(file.string() + ": " + e.what());
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError({what});
}

void require_path(const fs::path& p, const char* flag) {
  if (p.empty()) throw ValidationError({std::string("missing ") + flag});
}

SimConfig sim_config(const RunConfig& cfg) {
  require(cfg.n_paths >= 1, "n-paths must be >= 1");
  require(cfg.horizon > 0.0, "horizon must be > 0");
  return {static_cast<std::size_t>(cfg.n_paths), cfg.horizon, cfg.seed, cfg.threads};
}

FitOptions fit_options(const RunConfig& cfg) {
  require(cfg.tol > 0.0, "tol must be > 0");
  require(cfg.max_iter >= 0, "max-iter must be >= 0");
  return {cfg.tol, cfg.max_iter};
}

PsiOptions psi_options(const RunConfig& cfg) {
  require(cfg.psi_iters >= 1, "psi-iters must be >= 1");
  require(cfg.psi_tol > 0.0, "psi-tol must be > 0");
  return {cfg.psi_tol, cfg.psi_iters};
}

int cmd_simulate(const RunConfig& cfg) {
  require_path(cfg.model, "--model");
  const ModelParams theta = io::load_params(cfg.model);
  const auto paths = simulate_sample(theta, sim_config(cfg));
  io::write_text_file(cfg.out / "paths.jsonl", io::paths_to_jsonl(paths));
  io::write_text_file(cfg.out / "stats.csv", io::stats_to_csv(sample_stats(paths, theta.p)));
  fmt::print("simulated {} paths (horizon {}, seed {}) -> {}\n", paths.size(), cfg.horizon, cfg.seed,
             cfg.out.string());
  return 0;
}

int regimes_for(const RunConfig& cfg) {
  if (cfg.regimes > 0) return cfg.regimes;
  if (!cfg.model.empty()) return io::load_params(cfg.model).M;
  throw ValidationError({"set --regimes or --model to fix the number of regimes"});
}

int cmd_estimate(const RunConfig& cfg) {
  require_path(cfg.stats, "--stats");
  const Sample sample = io::stats_from_csv(io::read_text_file(cfg.stats));
  const Method method = parse_method(cfg.method);
  const FitResult r = fit(sample, method, initial_guess(sample, regimes_for(cfg)), fit_options(cfg));
  io::save_params(cfg.out / "fit.json", r.theta_hat);
  io::write_text_file(cfg.out / "trace.csv", io::trace_to_csv(r));
  fmt::print("method {}: {} iterations, converged = {}, loglik = {}\n", to_string(method), r.iterations,
             r.converged, io::num(r.loglik_trace.back()));
  if (!r.converged) fmt::print(stderr, "warning: max-iter reached before tol\n");
  return 0;
}

std::string psi_trace_csv(const PsiTrace& t) {
  std::string out = "iter,increment_norm\n";
  for (std::size_t i = 0; i < t.increment_norms.size(); ++i)
    out += fmt::format("{},{}\n", i + 1, io::num(t.increment_norms[i]));
  return out;
}

int cmd_invert_info(const RunConfig& cfg) {
  require_path(cfg.stats, "--stats");
  require_path(cfg.model, "--model");
  const Sample sample = io::stats_from_csv(io::read_text_file(cfg.stats));
  const ModelParams theta = io::load_params(cfg.model);
  const ParamLayout layout(theta.p, theta.M);
  const WeightedStats ws = weighted_stats(sample, theta);
  const Eigen::MatrixXd jxm = jx(ws, theta);
  const Eigen::MatrixXd jxi = jx_inverse(ws, theta);
  const Eigen::MatrixXd jym = jy(sample, theta);
  io::write_text_file(cfg.out / "jx.csv", io::matrix_to_csv(jxm, layout));
  io::write_text_file(cfg.out / "jx_inverse.csv", io::matrix_to_csv(jxi, layout));
  io::write_text_file(cfg.out / "jy.csv", io::matrix_to_csv(jym, layout));
  io::write_text_file(cfg.out / "sandwich.csv", io::matrix_to_csv(sandwich(jxi, jym), layout));
  const double rho = iteration_spectral_radius(jxi, jym);
  PsiTrace trace;
  std::string failure;
  try {
    trace = psi_recursion(jxi, jym, psi_options(cfg));
  } catch (const PsiConvergenceError& e) {
    trace = e.trace();
    failure = e.what();
  }
  io::write_text_file(cfg.out / "psi.csv", io::matrix_to_csv(trace.limit(), layout));
  io::write_text_file(cfg.out / "psi_trace.csv", psi_trace_csv(trace));
  const Eigen::Index d = jym.rows();
  const double resid =
      (jym * trace.limit() - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().rowwise().sum().maxCoeff();
  fmt::print("psi iterations      {}\n", trace.iterations());
  fmt::print("converged           {}\n", trace.converged);
  fmt::print("rate estimate       {:.6f}\n", trace.spectral_radius_estimate);
  fmt::print("rho(I - Jx^-1 Jy)   {:.6f}\n", rho);
  fmt::print("|Jy Psi - I|_inf    {:.3e}\n", resid);
  if (!failure.empty()) {
    fmt::print(stderr, "error: {}\n", failure);
    return 1;
  }
  return 0;
}

struct Check {
  std::string name;
  bool pass;
  std::string detail;
  std::optional<bool> strict;  // Loewner checks: a - b positive definite beyond roundoff
};

// Passes when a - b is positive semidefinite up to the scaled tolerance; the
// strict outcome is recorded next to it.
Check loewner_check(std::string name, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* what) {
  const double lo = min_eigenvalue(symmetrize(a - b));
  return {std::move(name), loewner_greater_equal(a, b),
          fmt::format("min eigenvalue of {} = {:.6e}", what, lo), loewner_greater(a, b)};
}

void ordering_checks(std::vector<Check>& checks, const std::string& tag, const Eigen::MatrixXd& jxm,
                     const Eigen::MatrixXd& jym, const Eigen::MatrixXd& sig, const PsiTrace& psi) {
  checks.push_back(loewner_check("info_loss_" + tag, jxm, jym, "Jx - Jy"));
  const Eigen::MatrixXd jyi = dense_inverse(jym);
  const Eigen::MatrixXd jxi = dense_inverse(jxm);
  checks.push_back(loewner_check("jy_inv_ge_jx_inv_" + tag, jyi, jxi, "Jy^-1 - Jx^-1"));
  checks.push_back(loewner_check("jx_inv_ge_sandwich_" + tag, jxi, sig, "Jx^-1 - Sigma"));
  checks.push_back({"sandwich_pd_" + tag, is_positive_definite(sig),
                    fmt::format("min eigenvalue of Sigma = {:.6e}", min_eigenvalue(sig)), std::nullopt});
  double worst = std::numeric_limits<double>::infinity();
  bool psd = true;
  for (std::size_t i = 1; i < psi.iterates.size(); ++i) {
    const Eigen::MatrixXd inc = symmetrize(psi.iterates[i] - psi.iterates[i - 1]);
    const double lo = min_eigenvalue(inc);
    worst = std::min(worst, lo);
    if (lo < -definiteness_tolerance(inc)) psd = false;
  }
  checks.push_back({"psi_monotone_" + tag, psd,
                    fmt::format("min eigenvalue of the Psi increments = {:.6e}", worst), std::nullopt});
  checks.push_back({"psi_converged_" + tag, psi.converged,
                    fmt::format("{} iterations, rate estimate {:.6f}", psi.iterations(),
                                psi.spectral_radius_estimate),
                    std::nullopt});
}

PsiTrace run_psi(const Eigen::MatrixXd& jxm, const Eigen::MatrixXd& jym, const PsiOptions& opt) {
  try {
    return psi_recursion(spd_inverse(jxm), jym, opt);
  } catch (const PsiConvergenceError& e) {
    return e.trace();
  }
}

std::string estimates_csv(const std::vector<Eigen::VectorXd>& est, const ParamLayout& layout) {
  std::string out = "replicate";
  for (const auto& l : layout.labels()) out += "," + l;
  out += '\n';
  for (std::size_t k = 0; k < est.size(); ++k) {
    out += std::to_string(k + 1);
    for (Eigen::Index i = 0; i < est[k].size(); ++i) out += "," + io::num(est[k](i));
    out += '\n';
  }
  return out;
}

int cmd_reproduce(const RunConfig& cfg) {
  require_path(cfg.model, "--model");
  require(cfg.replicates >= 1, "replicates must be >= 1");
  const ModelParams truth = io::load_params(cfg.model);
  const Method method = parse_method(cfg.method);
  const FitConfig fc{method, fit_options(cfg), cfg.threads};
  const MEstimatorResult r = m_estimator_pipeline(truth, cfg.replicates, sim_config(cfg), fc);
  const PsiOptions po = psi_options(cfg);
  const PsiTrace psi_mle = run_psi(r.jx_bar_mle, r.jy_bar_mle, po);
  const PsiTrace psi_m = run_psi(r.jx_bar, r.jy_bar, po);
  const EstimationReport mle = build_report(truth, r, ReportKind::kMle, psi_mle);
  const EstimationReport mest = build_report(truth, r, ReportKind::kMEstimator, psi_m);

  std::vector<Check> checks;
  checks.push_back({"fits_converged", r.converged_fits() == r.K,
                    fmt::format("{} of {} fits converged", r.converged_fits(), r.K), std::nullopt});
  if (method == Method::kEM) {
    int bad = 0;
    for (const auto& f : r.fits)
      for (std::size_t i = 1; i < f.loglik_trace.size(); ++i)
        if (f.loglik_trace[i] < f.loglik_trace[i - 1] - 1e-10 * std::abs(f.loglik_trace[i - 1])) {
          ++bad;
          break;
        }
    checks.push_back({"em_loglik_monotone", bad == 0, fmt::format("{} fits with a decreasing step", bad),
                      std::nullopt});
  }
  ordering_checks(checks, "mle", r.jx_bar_mle, r.jy_bar_mle, r.sigma_n_mle, psi_mle);
  ordering_checks(checks, "mestimator", r.jx_bar, r.jy_bar, r.sigma_n, psi_m);
  for (const auto* rep : {&mle, &mest}) {
    int bad = 0;
    for (const auto& row : rep->rows) bad += !(row.se_sandwich_pct < row.se_jy_inv_pct);
    checks.push_back({std::string("se_sandwich_lt_se_jy_inv_") + (rep == &mle ? "mle" : "mestimator"),
                      bad == 0, fmt::format("{} rows violate", bad), std::nullopt});
  }

  json props;
  props["K"] = r.K;
  props["n"] = r.n;
  props["horizon"] = cfg.horizon;
  props["seed"] = cfg.seed;
  props["method"] = to_string(method);
  json jc = json::array();
  bool all = true;
  for (const auto& c : checks) {
    json e = {{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}};
    if (c.strict) e["strict"] = *c.strict;
    jc.push_back(e);
    all = all && c.pass;
  }
  props["checks"] = jc;
  props["all_passed"] = all;

  const ParamLayout layout(truth.p, truth.M);
  io::write_text_file(cfg.out / "mle_report.csv", format_report_csv(mle));
  io::write_text_file(cfg.out / "mle_report.txt", format_report_text(mle));
  io::write_text_file(cfg.out / "mestimator_report.csv", format_report_csv(mest));
  io::write_text_file(cfg.out / "mestimator_report.txt", format_report_text(mest));
  io::write_text_file(cfg.out / "mle_estimates.csv", estimates_csv(r.mle_estimates, layout));
  io::write_text_file(cfg.out / "mestimates.csv", estimates_csv(r.theta0_estimates, layout));
  io::write_text_file(cfg.out / "properties.json", props.dump(2) + "\n");

  fmt::print("{}\n{}\n", format_report_text(mle), format_report_text(mest));
  for (const auto& c : checks)
    fmt::print("{:<36} {}{}  {}\n", c.name, c.pass ? "PASS" : "FAIL",
               c.strict ? (*c.strict ? " (strict)" : " (not strict)") : "", c.detail);
  return all ? 0 : 1;
}

std::vector<double> read_column(const fs::path& file, const std::string& column) {
  std::istringstream in(io::read_text_file(file));
  std::string line;
  std::vector<double> out;
  int col = -1;
  bool first = true;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto fields = io::detail::split_csv_line(line);
    if (first) {
      first = false;
      char* end = nullptr;
      std::strtod(fields[0].c_str(), &end);
      const bool header = fields[0].empty() || *end != '\0' || (fields.size() > 1 && !column.empty());
      if (header) {
        for (std::size_t i = 0; i < fields.size(); ++i)
          if (fields[i] == column) col = static_cast<int>(i);
        if (col < 0 && column.empty() && fields.size() == 1) col = 0;
        if (col < 0)
          throw IoError(file.string() + ": " +
                        (column.empty() ? std::string("several columns; choose one with --column")
                                        : "no column named '" + column + "'"));
        continue;
      }
      if (fields.size() != 1 && column.empty())
        throw IoError(file.string() + ": several columns; choose one with --column");
      col = 0;
    }
    if (static_cast<int>(fields.size()) <= col)
      throw IoError(file.string() + " line " + std::to_string(lineno) + ": missing field");
    out.push_back(io::detail::parse_double(fields[static_cast<std::size_t>(col)],
                                           file.string() + " line " + std::to_string(lineno)));
  }
  return out;
}

int cmd_kstest(const RunConfig& cfg) {
  require_path(cfg.input, "--input");
  require(cfg.scale > 0.0, "scale must be > 0");
  std::vector<double> z = read_column(cfg.input, cfg.column);
  for (auto& v : z) v = (v - cfg.center) / cfg.scale;
  const KsResult r = ks_normality(z);
  fmt::print("n          {}\n", z.size());
  fmt::print("statistic  {}\n", io::num(r.statistic));
  fmt::print("p_value    {}\n", io::num(r.p_value));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Estimation for regime-switching conditional Markov jump processes"};
  app.require_subcommand(0, 1);
  RunConfig cfg;
  RunConfig flags;
  std::string config_file;
  std::string model, stats, input, out;

  app.add_option("--config", config_file, "JSON run configuration (command and settings)");
  auto* o_model = app.add_option("--model", model, "parameter file (JSON)");
  auto* o_stats = app.add_option("--stats", stats, "path statistics CSV");
  auto* o_input = app.add_option("--input", input, "kstest input (CSV column or one value per line)");
  auto* o_out = app.add_option("--out", out, "output directory");
  auto* o_seed = app.add_option("--seed", flags.seed);
  auto* o_n = app.add_option("--n-paths", flags.n_paths, "paths per sample");
  auto* o_h = app.add_option("--horizon", flags.horizon, "observation window length");
  auto* o_k = app.add_option("--replicates", flags.replicates, "number of samples K");
  auto* o_method = app.add_option("--method", flags.method, "EM, EM-Gradient or FisherScoring");
  auto* o_tol = app.add_option("--tol", flags.tol, "fit tolerance (sup-norm of the parameter change)");
  auto* o_iter = app.add_option("--max-iter", flags.max_iter, "fit iteration cap (0 = method default)");
  auto* o_psi = app.add_option("--psi-iters", flags.psi_iters, "Psi recursion iteration cap");
  auto* o_psitol = app.add_option("--psi-tol", flags.psi_tol, "Psi recursion tolerance");
  auto* o_threads = app.add_option("--threads", flags.threads, "worker threads (0 = all cores)");
  auto* o_regimes = app.add_option("--regimes", flags.regimes, "number of regimes M for estimate");
  auto* o_col = app.add_option("--column", flags.column, "kstest column name");
  auto* o_center = app.add_option("--center", flags.center, "kstest: subtract before scaling");
  auto* o_scale = app.add_option("--scale", flags.scale, "kstest: divide after centering");

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"simulate", "simulate paths and write paths.jsonl and stats.csv"},
      {"estimate", "fit a model to a stats file; writes fit.json and trace.csv"},
      {"invert-info", "information matrices and the Psi recursion at a parameter point"},
      {"reproduce", "repeated-sampling study: MLE and M-estimator reports plus property checks"},
      {"kstest", "one-sample KS test against the standard normal"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_file.empty()) apply_config_file(cfg, config_file);
    if (!app.get_subcommands().empty()) cfg.command = app.get_subcommands().front()->get_name();
    if (*o_model) cfg.model = model;
    if (*o_stats) cfg.stats = stats;
    if (*o_input) cfg.input = input;
    if (*o_out) cfg.out = out;
    if (*o_seed) cfg.seed = flags.seed;
    if (*o_n) cfg.n_paths = flags.n_paths;
    if (*o_h) cfg.horizon = flags.horizon;
    if (*o_k) cfg.replicates = flags.replicates;
    if (*o_method) cfg.method = flags.method;
    if (*o_tol) cfg.tol = flags.tol;
    if (*o_iter) cfg.max_iter = flags.max_iter;
    if (*o_psi) cfg.psi_iters = flags.psi_iters;
    if (*o_psitol) cfg.psi_tol = flags.psi_tol;
    if (*o_threads) cfg.threads = flags.threads;
    if (*o_regimes) cfg.regimes = flags.regimes;
    if (*o_col) cfg.column = flags.column;
    if (*o_center) cfg.center = flags.center;
    if (*o_scale) cfg.scale = flags.scale;

    if (cfg.command == "simulate") return cmd_simulate(cfg);
    if (cfg.command == "estimate") return cmd_estimate(cfg);
    if (cfg.command == "invert-info") return cmd_invert_info(cfg);
    if (cfg.command == "reproduce") return cmd_reproduce(cfg);
    if (cfg.command == "kstest") return cmd_kstest(cfg);
    fmt::print(stderr, "error: {}\n{}",
               cfg.command.empty() ? "no command given" : "unknown command '" + cfg.command + "'",
               app.help());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}
