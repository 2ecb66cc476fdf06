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

// Acceptance suite: one PASS/FAIL line per criterion. Exits 0 once every
// criterion has been evaluated; with --strict the exit code is the number of
// failed criteria.

#include <fmt/core.h>

#include <chrono>
#include <cstring>
#include <functional>

#include "support/oracles.hpp"

namespace {

using namespace rscmjp;
using namespace rscmjp::testing;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Closed-form score against central differences of the mean observed
// log-likelihood.
Outcome score_gradient() {
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const int p = 2 + static_cast<int>(i % 2), M = 2 + static_cast<int>((i / 2) % 2);
    const ModelParams theta = random_params(p, M, 1000 + i);
    const Sample s = simulate_stats(theta, {50, 10.0, 2000 + i, 1});
    const ParamLayout layout(p, M);
    const Eigen::VectorXd alpha = theta.alpha;
    const double n = static_cast<double>(s.size());
    const Fn f = [&](const Eigen::VectorXd& v) { return observed_loglik(s, unpack(layout, v, alpha)) / n; };
    const Eigen::VectorXd fd = fd_gradient(f, pack(theta).values);
    const Eigen::VectorXd g = score(s, theta);
    worst = std::max(worst, (g - fd).norm() / std::max(fd.norm(), 1e-300));
  }
  return {worst < 1e-6, fmt::format("max relative error {:.3e} over 20 instances", worst)};
}

// 2. Explicit Jy, the generic three-term form and -(1/n) FD Hessian.
Outcome ofi_agreement() {
  const ModelParams theta = random_params(2, 2, 31);
  const Sample s = simulate_stats(theta, {50, 10.0, 32, 1});
  const Eigen::MatrixXd a = jy(s, theta);
  const Eigen::MatrixXd b = jy_generic(s, theta);
  const ParamLayout layout(2, 2);
  const Eigen::VectorXd alpha = theta.alpha;
  const Fn f = [&](const Eigen::VectorXd& v) { return observed_loglik(s, unpack(layout, v, alpha)) / 50.0; };
  const Eigen::MatrixXd h = -fd_hessian(f, pack(theta).values);
  const double ab = rel_err(a, b), ah = rel_err(a, h), bh = rel_err(b, h);
  return {std::max({ab, ah, bh}) < 1e-5,
          fmt::format("explicit/generic {:.2e}, explicit/FD {:.2e}, generic/FD {:.2e}", ab, ah, bh)};
}

ModelParams study_mle(const Sample& s) {
  const FitResult r = fit(s, Method::kEM, initial_guess(s, 3), {1e-10, 50000});
  return align_regimes(r.theta_hat, study_truth());
}

// 3. Strict information-loss chain at per-sample MLEs.
Outcome information_loss() {
  int ok = 0;
  double worst_loss = std::numeric_limits<double>::infinity();
  std::string first_failure;
  for (std::uint64_t k = 0; k < 10; ++k) {
    const Sample s = simulate_stats(study_truth(), {500, 10.0, 300 + k, 1});
    const ModelParams mle = study_mle(s);
    const Eigen::MatrixXd jxm = jx(s, mle), jym = jy(s, mle);
    const Eigen::MatrixXd jxi = jx_inverse(s, mle), jyi = dense_inverse(jym);
    const Eigen::MatrixXd sig = sandwich(jxi, jym);
    const double loss = min_eigenvalue(symmetrize(jxm - jym));
    worst_loss = std::min(worst_loss, loss);
    const bool a = loss > 0.0;
    const bool b = loewner_greater(jyi, jxi);
    const bool c = loewner_greater(jxi, sig);
    const bool d = is_positive_definite(sig);
    if (a && b && c && d)
      ++ok;
    else if (first_failure.empty())
      first_failure = fmt::format("; sample {}: Jx>Jy {}, Jy^-1>Jx^-1 {}, Jx^-1>Sigma {}, Sigma>0 {}", k + 1,
                                  a, b, c, d);
  }
  return {ok == 10, fmt::format("{}/10 samples strict, min eig(Jx - Jy) = {:.3e}{}", ok, worst_loss,
                                first_failure)};
}

// 4. Psi recursion at the MLE of a study sample (d = 24).
Outcome psi_recursion_check() {
  const Sample s = simulate_stats(study_truth(), {500, 10.0, 404, 1});
  const ModelParams mle = study_mle(s);
  const Eigen::MatrixXd jxi = jx_inverse(s, mle), jym = jy(s, mle);
  const PsiTrace t = psi_recursion(jxi, jym, {1e-13, 20000});
  const bool starts_at_zero = t.iterates.front().isZero(0.0);
  double worst_inc = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < t.iterates.size(); ++i)
    worst_inc = std::min(worst_inc, min_eigenvalue(symmetrize(t.iterates[i] - t.iterates[i - 1])));
  const Eigen::Index d = jym.rows();
  const double resid = (jym * t.limit() - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().rowwise().sum().maxCoeff();
  const double rho = iteration_spectral_radius(jxi, jym);
  const double ratio_err = std::abs(t.spectral_radius_estimate - rho) / rho;
  return {starts_at_zero && worst_inc > -1e-10 && resid < 1e-8 && ratio_err < 0.05,
          fmt::format("{} iterations, min increment eig {:.2e}, |Jy Psi - I|_inf {:.2e}, rate {:.6f} vs rho "
                      "{:.6f}",
                      t.iterations(), worst_inc, resid, t.spectral_radius_estimate, rho)};
}

// 5. Sherman-Morrison inverse of Jx against a dense inverse.
Outcome sherman_morrison() {
  const Sample s = simulate_stats(study_truth(), {500, 10.0, 505, 1});
  const ModelParams theta = study_truth();
  const double e = rel_err(jx_inverse(s, theta), dense_inverse(jx(s, theta)));
  return {e < 1e-8, fmt::format("relative Frobenius error {:.3e}", e)};
}

// 6. EM monotonicity, EM/EM-Gradient agreement and iteration counts.
Outcome em_solvers() {
  int monotone = 0, agree = 0, fewer = 0, tied = 0, converged = 0;
  double worst_diff = 0.0;
  for (std::uint64_t k = 0; k < 50; ++k) {
    const Sample s = simulate_stats(study_truth(), {500, 10.0, 600 + k, 1});
    const ModelParams start = initial_guess(s, 3);
    const FitResult em = fit(s, Method::kEM, start, {1e-8, 50000});
    const FitResult emg = fit(s, Method::kEMGradient, start, {1e-8, 50000});
    converged += em.converged && emg.converged;
    bool mono = true;
    for (std::size_t i = 1; i < em.loglik_trace.size(); ++i)
      mono = mono && em.loglik_trace[i] >= em.loglik_trace[i - 1] - 1e-10 * std::abs(em.loglik_trace[i - 1]);
    monotone += mono;
    // regime labels are not identified; compare up to a relabelling
    const ModelParams emg_aligned = align_regimes(emg.theta_hat, em.theta_hat);
    const double diff = (pack(em.theta_hat).values - pack(emg_aligned).values).cwiseAbs().maxCoeff();
    worst_diff = std::max(worst_diff, diff);
    agree += diff < 1e-5;
    fewer += emg.iterations < em.iterations;
    tied += emg.iterations == em.iterations;
  }
  return {converged == 50 && monotone == 50 && agree == 50 && fewer >= 45,
          fmt::format("converged {}/50, monotone {}/50, agree {}/50 (max diff {:.2e}), EM-Gradient fewer "
                      "iterations {}/50 (ties {})",
                      converged, monotone, agree, worst_diff, fewer, tied)};
}

PsiTrace psi_or_last_iterate(const Eigen::MatrixXd& jxm, const Eigen::MatrixXd& jym) {
  try {
    return psi_recursion(spd_inverse(jxm), jym, {1e-10, 5000});
  } catch (const PsiConvergenceError& e) {
    return e.trace();
  }
}

// 7. Desk-scale repeated-sampling study on the study model.
Outcome desk_scale() {
  const ModelParams truth = study_truth();
  const MEstimatorResult r =
      m_estimator_pipeline(truth, 50, {1000, 10.0, 2026, 0}, {Method::kEM, {1e-8, 50000}, 0});
  const EstimationReport mle =
      build_report(truth, r, ReportKind::kMle, psi_or_last_iterate(r.jx_bar_mle, r.jy_bar_mle));
  const EstimationReport mest =
      build_report(truth, r, ReportKind::kMEstimator, psi_or_last_iterate(r.jx_bar, r.jy_bar));

  auto count = [](const EstimationReport& rep, auto pred) {
    return static_cast<int>(std::count_if(rep.rows.begin(), rep.rows.end(), pred));
  };
  auto bias_ok = [](const ReportRow& row) {
    return std::abs(row.estimate - row.true_value) < 4.0 * row.se_jy_inv_pct / 100.0;
  };
  auto dev = [](double rmse, double se) { return std::abs(rmse - se) / se; };
  double worst_mle = 0.0, worst_m = 0.0;
  for (const auto& row : mle.rows) worst_mle = std::max(worst_mle, dev(row.rmse_pct, row.se_jy_inv_pct));
  for (const auto& row : mest.rows) worst_m = std::max(worst_m, dev(row.rmse_pct, row.se_sandwich_pct));
  auto rmse_mle = [&](const ReportRow& row) { return dev(row.rmse_pct, row.se_jy_inv_pct) <= 0.35; };
  auto rmse_m = [&](const ReportRow& row) { return dev(row.rmse_pct, row.se_sandwich_pct) <= 0.35; };
  auto sw_lt = [](const ReportRow& row) { return row.se_sandwich_pct < row.se_jy_inv_pct; };
  auto ks_ok = [](const ReportRow& row) { return row.ks_pvalue > 0.05; };

  const int a1 = count(mle, bias_ok), a2 = count(mest, bias_ok);
  const int b1 = count(mle, rmse_mle), b2 = count(mest, rmse_m);
  const int c1 = count(mle, sw_lt), c2 = count(mest, sw_lt);
  const int d1 = count(mle, ks_ok), d2 = count(mest, ks_ok);
  const int d = static_cast<int>(mle.rows.size());
  const bool pass = a1 == d && a2 == d && b1 == d && b2 == d && c1 == d && c2 == d && d1 >= 20 && d2 >= 20;
  return {pass, fmt::format("fits converged {}/50; (a) {}/{} and {}/{}; (b) {}/{} (max dev {:.2f}) and {}/{} "
                            "(max dev {:.2f}); (c) {}/{} and {}/{}; (d) KS {}/{} and {}/{} [MLE and M-estimator]",
                            r.converged_fits(), a1, d, a2, d, b1, d, worst_mle, b2, d, worst_m, c1, d, c2, d, d1,
                            d, d2, d)};
}

// 8. K = 1: the one-step M-estimate is the sample's MLE.
Outcome single_replicate() {
  const MEstimatorResult r =
      m_estimator_pipeline(study_truth(), 1, {500, 10.0, 808, 1}, {Method::kEM, {1e-12, 100000}, 1});
  const double diff = (r.theta0_estimates[0] - r.mle_estimates[0]).cwiseAbs().maxCoeff();
  return {diff < 1e-8 && r.converged_fits() == 1, fmt::format("max |theta0 - mle| = {:.3e}", diff)};
}

// 9. M = 1: no missing information.
Outcome complete_information() {
  const ModelParams theta = random_params(3, 1, 909);
  const Sample s = simulate_stats(theta, {500, 10.0, 910, 1});
  const FitResult f = fit(s, Method::kEM, initial_guess(s, 1), {1e-8, 0});
  const ModelParams& mle = f.theta_hat;
  const Eigen::MatrixXd jxm = jx(s, mle), jym = jy(s, mle);
  const bool equal = jxm == jym;
  const Eigen::MatrixXd jyi = dense_inverse(jym);
  const double sig_err = rel_err(sandwich(jx_inverse(s, mle), jym), jyi);
  const Eigen::MatrixXd q = pooled_ctmc_mle(s);
  bool exact = true;
  for (int x = 0; x < 3; ++x)
    for (int y = 0; y < 3; ++y)
      if (x != y) exact = exact && mle.q[0](x, y) == q(x, y);
  return {equal && sig_err < 1e-12 && exact && f.iterations == 1,
          fmt::format("jy == jx bitwise {}, |Sigma - Jy^-1| rel {:.2e}, EM = sum N / sum T bitwise {} after {} "
                      "iteration(s)",
                      equal, sig_err, exact, f.iterations)};
}

}  // namespace

int main(int argc, char** argv) {
  const bool strict = argc > 1 && std::strcmp(argv[1], "--strict") == 0;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"1 score gradient", score_gradient},
      {"2 observed information agreement", ofi_agreement},
      {"3 information loss ordering", information_loss},
      {"4 psi recursion", psi_recursion_check},
      {"5 sherman-morrison inverse", sherman_morrison},
      {"6 em monotonicity and solvers", em_solvers},
      {"7 desk-scale study", desk_scale},
      {"8 single replicate coincidence", single_replicate},
      {"9 complete information", complete_information}};
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    fmt::print("{} criterion {}: {} [{:.1f} s]\n", o.pass ? "PASS" : "FAIL", name, o.detail, seconds_since(t0));
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return strict ? failed : 0;
}
