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

#ifndef RSCMJP_DIAGNOSTICS_HPP_
#define RSCMJP_DIAGNOSTICS_HPP_

#include <fmt/format.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "rscmjp/error.hpp"
#include "rscmjp/estimators.hpp"
#include "rscmjp/information.hpp"
#include "rscmjp/linalg.hpp"
#include "rscmjp/model.hpp"

namespace rscmjp {

/// Coordinatewise root mean squared deviation of the estimates from theta0.
inline Eigen::VectorXd rmse(std::span<const Eigen::VectorXd> estimates, const Eigen::VectorXd& theta0) {
  if (estimates.empty()) throw ValidationError({"rmse needs at least one estimate"});
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(theta0.size());
  for (const auto& e : estimates) {
    if (e.size() != theta0.size()) throw ValidationError({"rmse: estimate has the wrong dimension"});
    acc += (e - theta0).array().square().matrix();
  }
  return (acc / static_cast<double>(estimates.size())).cwiseSqrt();
}

inline double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// P(K > lambda) for the Kolmogorov distribution. Uses the theta-function
/// series below lambda = 1.18 and the alternating series above; both are
/// truncated once a term drops below 1e-12.
inline double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  constexpr double kTermTol = 1e-12;
  if (lambda < 1.18) {
    const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double sum = 0.0;
    for (int j = 1;; ++j) {
      const double term = std::exp(-(2 * j - 1) * (2 * j - 1) * c);
      sum += term;
      if (term < kTermTol) break;
    }
    const double cdf = std::sqrt(2.0 * std::numbers::pi) / lambda * sum;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int j = 1;; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 == 1) ? term : -term;
    if (term < kTermTol) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test of `z` against N(0, 1), with the
/// asymptotic p-value P(K > sqrt(K) D).
inline KsResult ks_normality(std::span<const double> z) {
  if (z.size() < 5) throw ValidationError({"ks_normality needs at least 5 values"});
  std::vector<double> sorted(z.begin(), z.end());
  std::sort(sorted.begin(), sorted.end());
  const double k = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = standard_normal_cdf(sorted[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / k - f, f - static_cast<double>(i) / k});
  }
  return {d, kolmogorov_survival(std::sqrt(k) * d)};
}

enum class ReportKind { kMle, kMEstimator };

struct ReportRow {
  std::string label;
  double true_value = 0.0;
  double estimate = 0.0;
  double rmse_pct = 0.0;
  double se_jy_inv_pct = 0.0;
  double se_psi_pct = 0.0;
  double se_sandwich_pct = 0.0;
  double ks_pvalue = std::numeric_limits<double>::quiet_NaN();
};

/// Table of estimates, RMSE and the three standard-error columns (all x100).
struct EstimationReport {
  ReportKind kind = ReportKind::kMle;
  int K = 0;
  int n = 0;
  std::vector<ReportRow> rows;
};

/// Assembles the MLE table (matrices at each replicate's MLE, z standardized
/// by sqrt(diag(Jy^{-1})/n)) or the M-estimator table (matrices at the pooled
/// estimate, z standardized by sqrt(diag(Sigma_n)/n)). `psi` must come from
/// the same pair of averaged matrices.
inline EstimationReport build_report(const ModelParams& truth, const MEstimatorResult& result,
                                     ReportKind kind, const PsiTrace& psi) {
  const FreeParamVector t0 = pack(truth);
  const int d = t0.layout.size();
  const bool mle = kind == ReportKind::kMle;
  const Eigen::MatrixXd& jyb = mle ? result.jy_bar_mle : result.jy_bar;
  const Eigen::MatrixXd& sig = mle ? result.sigma_n_mle : result.sigma_n;
  const auto& est = mle ? result.mle_estimates : result.theta0_estimates;
  if (jyb.rows() != d || sig.rows() != d || psi.limit().rows() != d || est.empty() ||
      est.front().size() != d)
    throw ValidationError({"build_report: dimension mismatch between truth and pipeline result"});

  const Eigen::MatrixXd jy_inv = spd_inverse(jyb);
  const Eigen::VectorXd err = rmse(est, t0.values);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& e : est) mean += e;
  mean /= static_cast<double>(est.size());

  const double n = result.n;
  EstimationReport rep;
  rep.kind = kind;
  rep.K = result.K;
  rep.n = result.n;
  for (int i = 0; i < d; ++i) {
    ReportRow row;
    row.label = t0.layout.label(i);
    row.true_value = t0.values(i);
    row.estimate = mean(i);
    row.rmse_pct = 100.0 * err(i);
    const double se_jy = std::sqrt(jy_inv(i, i) / n);
    const double se_sw = std::sqrt(sig(i, i) / n);
    row.se_jy_inv_pct = 100.0 * se_jy;
    row.se_psi_pct = 100.0 * std::sqrt(psi.limit()(i, i) / n);
    row.se_sandwich_pct = 100.0 * se_sw;
    if (est.size() >= 5) {
      const double scale = mle ? se_jy : se_sw;
      std::vector<double> z;
      for (const auto& e : est) z.push_back((e(i) - t0.values(i)) / scale);
      row.ks_pvalue = ks_normality(z).p_value;
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

inline const char* report_title(ReportKind kind) {
  return kind == ReportKind::kMle ? "Maximum likelihood estimates" : "Repeated-sampling M-estimates";
}

/// Human-readable table, 4 decimals.
inline std::string format_report_text(const EstimationReport& rep) {
  std::string out = fmt::format("{} (K = {}, n = {})\n", report_title(rep.kind), rep.K, rep.n);
  out += fmt::format("{:<10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>12} {:>8}\n", "theta", "true",
                     "estimate", "RMSE%", "SE_Jyinv%", "SE_Psi%", "SE_Sandw%", "KS p");
  for (const auto& r : rep.rows)
    out += fmt::format("{:<10} {:>10.4f} {:>10.4f} {:>10.4f} {:>10.4f} {:>10.4f} {:>12.4f} {:>8.4f}\n",
                       r.label, r.true_value, r.estimate, r.rmse_pct, r.se_jy_inv_pct, r.se_psi_pct,
                       r.se_sandwich_pct, r.ks_pvalue);
  out += "KS p-values use the asymptotic Kolmogorov distribution.\n";
  return out;
}

/// Machine-readable table, 17 significant digits.
inline std::string format_report_csv(const EstimationReport& rep) {
  std::string out = "label,true_value,estimate,rmse_pct,se_jy_inv_pct,se_psi_pct,se_sandwich_pct,ks_pvalue\n";
  for (const auto& r : rep.rows)
    out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.label,
                       r.true_value, r.estimate, r.rmse_pct, r.se_jy_inv_pct, r.se_psi_pct,
                       r.se_sandwich_pct, r.ks_pvalue);
  return out;
}

}  // namespace rscmjp

#endif  // RSCMJP_DIAGNOSTICS_HPP_
