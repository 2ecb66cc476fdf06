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

#ifndef RSCMJP_ESTIMATORS_HPP_
#define RSCMJP_ESTIMATORS_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "rscmjp/error.hpp"
#include "rscmjp/information.hpp"
#include "rscmjp/likelihood.hpp"
#include "rscmjp/linalg.hpp"
#include "rscmjp/model.hpp"
#include "rscmjp/parallel.hpp"
#include "rscmjp/simulator.hpp"

namespace rscmjp {

enum class Method { kEM, kEMGradient, kFisherScoring };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::kEM:
      return "EM";
    case Method::kEMGradient:
      return "EM-Gradient";
    case Method::kFisherScoring:
      return "FisherScoring";
  }
  return "?";
}

inline Method parse_method(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == '-' || c == '_'; }), s.end());
  if (s == "em") return Method::kEM;
  if (s == "emgradient" || s == "emg") return Method::kEMGradient;
  if (s == "fisherscoring" || s == "fisher" || s == "fs") return Method::kFisherScoring;
  throw ValidationError({"unknown method '" + s + "' (expected EM, EM-Gradient or FisherScoring)"});
}

/// Starting point built from the data alone.
///
/// Pooled Markov rates qbar_xy = sum N_xy / sum T_x, scaled in regime m
/// (1-based) by 1 + 0.5 (m - (M+1)/2) / M so the regimes start apart; phi
/// uniform; alpha = Bbar / n. A transition never observed in the sample gets
/// half a count so the guess stays strictly inside the parameter space.
inline ModelParams initial_guess(const Sample& sample, int M) {
  require_nonempty(sample);
  if (M < 1) throw ValidationError({"M must be >= 1"});
  const int p = sample.front().p();
  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd T = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd B = Eigen::VectorXd::Zero(p);
  for (const auto& s : sample) {
    N += s.N.cast<double>();
    T += s.T;
    B(s.initial_state) += 1.0;
  }
  ModelParams theta;
  theta.p = p;
  theta.M = M;
  theta.alpha = B / static_cast<double>(sample.size());
  theta.phi = Eigen::MatrixXd::Constant(p, M, 1.0 / M);
  theta.q.assign(static_cast<std::size_t>(M), Eigen::MatrixXd::Zero(p, p));
  for (int x = 0; x < p; ++x) {
    if (!(T(x) > 0.0))
      throw DegeneracyError("state " + std::to_string(x + 1) +
                            " is never visited; simulate longer paths or more paths");
    for (int y = 0; y < p; ++y) {
      if (y == x) continue;
      const double rate = (N(x, y) > 0.0 ? N(x, y) : 0.5) / T(x);
      for (int m = 0; m < M; ++m)
        theta.q[static_cast<std::size_t>(m)](x, y) = rate * (1.0 + 0.5 * ((m + 1) - (M + 1) / 2.0) / M);
    }
  }
  return normalized(canonicalize(std::move(theta)));
}

/// Floor applied to posterior-weighted occupation times in the EM update.
inline constexpr double kOccupationFloor = 1e-12;

struct EmStepResult {
  ModelParams theta;
  bool floored = false;  // some That_{x,m} hit kOccupationFloor
};

/// One EM update: phi_{x,m} = Bhat_{x,m} / Bbar_x, q_{xy,m} = Nhat_{xy,m} / That_{x,m}.
/// alpha is re-estimated as Bbar / n.
inline EmStepResult em_step_detailed(const Sample& sample, const ModelParams& theta) {
  const WeightedStats ws = weighted_stats(sample, theta);
  ModelParams next = theta;
  next.alpha = ws.Bbar / static_cast<double>(ws.n);
  bool floored = false;
  for (int x = 0; x < theta.p; ++x) {
    if (!(ws.Bbar(x) > 0.0))
      throw DegeneracyError("no path starts in state " + std::to_string(x + 1) +
                            "; phi_" + std::to_string(x + 1) + " is not identifiable");
    for (int m = 0; m < theta.M; ++m) next.phi(x, m) = ws.Bhat(x, m) / ws.Bbar(x);
  }
  for (int m = 0; m < theta.M; ++m) {
    auto& Q = next.q[static_cast<std::size_t>(m)];
    for (int x = 0; x < theta.p; ++x) {
      double t = ws.That(x, m);
      if (t < kOccupationFloor) {
        t = kOccupationFloor;
        floored = true;
      }
      for (int y = 0; y < theta.p; ++y)
        if (y != x) Q(x, y) = ws.Nhat[static_cast<std::size_t>(m)](x, y) / t;
    }
  }
  next = canonicalize(std::move(next));
  auto violations = validate(next);
  if (!violations.empty()) {
    violations.insert(violations.begin(), "EM update reached the boundary of the parameter space");
    throw DegeneracyError(ValidationError(std::move(violations)).what());
  }
  return {std::move(next), floored};
}

inline ModelParams em_step(const Sample& sample, const ModelParams& theta) {
  return em_step_detailed(sample, theta).theta;
}

namespace detail {

inline constexpr int kMaxHalvings = 30;

/// theta + h * direction for the largest h in {1, 1/2, ..., 2^-30} that stays valid.
inline ModelParams additive_update(const ModelParams& theta, const Eigen::VectorXd& direction) {
  const FreeParamVector v = pack(theta);
  double h = 1.0;
  for (int k = 0; k <= kMaxHalvings; ++k, h *= 0.5) {
    ModelParams cand = unpack(v.layout, v.values + h * direction, theta.alpha);
    if (validate(cand).empty()) return cand;
  }
  throw DegeneracyError("update left the parameter space after " + std::to_string(kMaxHalvings) +
                        " step halvings");
}

}  // namespace detail

/// EM-Gradient update theta + Jx(theta)^{-1} S_n(theta), with the closed-form
/// inverse of Jx.
inline ModelParams em_gradient_step(const Sample& sample, const ModelParams& theta) {
  const WeightedStats ws = weighted_stats(sample, theta);
  const Eigen::VectorXd direction = jx_inverse(ws, theta) * score(ws, theta);
  ModelParams next = detail::additive_update(theta, direction);
  next.alpha = ws.Bbar / static_cast<double>(ws.n);
  return next;
}

/// Fisher scoring update theta + Jy(theta)^{-1} S_n(theta). The inverse comes
/// from the Psi recursion when Jx >= Jy > 0 holds at theta and from a dense
/// LU solve otherwise.
inline ModelParams fisher_scoring_step(const Sample& sample, const ModelParams& theta) {
  const WeightedStats ws = weighted_stats(sample, theta);
  const Eigen::MatrixXd jyv = jy(sample, theta);
  Eigen::MatrixXd jyi;
  try {
    jyi = psi_recursion(jx_inverse(ws, theta), jyv).limit();
  } catch (const Error&) {
    jyi = dense_inverse(jyv);
  }
  ModelParams next = detail::additive_update(theta, jyi * score(ws, theta));
  next.alpha = ws.Bbar / static_cast<double>(ws.n);
  return next;
}

struct FitOptions {
  double tol = 1e-8;  // sup-norm of the parameter change
  int max_iter = 0;   // 0 selects the method default
};

inline int default_max_iter(Method m) { return m == Method::kFisherScoring ? 200 : 2000; }

struct FitResult {
  ModelParams theta_hat;
  int iterations = 0;
  std::vector<double> loglik_trace;  // iterations + 1 entries, starting at theta0
  std::vector<double> error_trace;   // sup-norm of each parameter change
  bool converged = false;
  Method method = Method::kEM;
};

/// Consecutive EM iterations with a floored occupation time before giving up.
inline constexpr int kMaxFlooredIterations = 5;

/// Iterates the chosen update until the parameter change drops below
/// opt.tol. Running out of iterations is reported through `converged`.
inline FitResult fit(const Sample& sample, Method method, const ModelParams& theta0,
                     const FitOptions& opt = {}) {
  require_nonempty(sample);
  require_valid(theta0);
  const int max_iter = opt.max_iter > 0 ? opt.max_iter : default_max_iter(method);
  FitResult r;
  r.method = method;
  r.theta_hat = theta0;
  r.loglik_trace.push_back(observed_loglik(sample, theta0));
  Eigen::VectorXd prev = pack(theta0).values;
  int floored_run = 0;
  while (r.iterations < max_iter) {
    ModelParams next;
    switch (method) {
      case Method::kEM: {
        auto step = em_step_detailed(sample, r.theta_hat);
        floored_run = step.floored ? floored_run + 1 : 0;
        if (floored_run >= kMaxFlooredIterations)
          throw DegeneracyError("a regime lost all posterior occupation time for " +
                                std::to_string(kMaxFlooredIterations) +
                                " consecutive EM iterations (label degeneracy)");
        next = std::move(step.theta);
        break;
      }
      case Method::kEMGradient:
        next = em_gradient_step(sample, r.theta_hat);
        break;
      case Method::kFisherScoring:
        next = fisher_scoring_step(sample, r.theta_hat);
        break;
    }
    const Eigen::VectorXd cur = pack(next).values;
    const double err = (cur - prev).cwiseAbs().maxCoeff();
    prev = cur;
    r.theta_hat = std::move(next);
    ++r.iterations;
    r.error_trace.push_back(err);
    r.loglik_trace.push_back(observed_loglik(sample, r.theta_hat));
    if (err < opt.tol) {
      r.converged = true;
      break;
    }
  }
  return r;
}

/// Relabels the regimes of `theta` to best match `reference`: the
/// permutation minimizing the squared distance between phi columns and
/// off-diagonal q entries, found by exhaustive search.
inline ModelParams align_regimes(const ModelParams& theta, const ModelParams& reference) {
  std::vector<int> perm(static_cast<std::size_t>(theta.M));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (int j = 0; j < theta.M; ++j) {
      const int src = perm[static_cast<std::size_t>(j)];
      cost += (theta.phi.col(src) - reference.phi.col(j)).squaredNorm();
      Eigen::MatrixXd diff = theta.q[static_cast<std::size_t>(src)] - reference.q[static_cast<std::size_t>(j)];
      diff.diagonal().setZero();
      cost += diff.squaredNorm();
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return permute_regimes(theta, best);
}

struct FitConfig {
  Method method = Method::kEM;
  FitOptions options;
  unsigned threads = 0;  // replicate-level parallelism, 0 = all cores
};

/// Output of the repeated-sampling M-estimator.
///
/// The plain fields hold quantities at the pooled estimate theta_bar (the
/// average of the K aligned MLEs); the *_mle fields average matrices each
/// evaluated at its own replicate's MLE.
struct MEstimatorResult {
  int K = 0;
  int n = 0;
  std::vector<FitResult> fits;                   // regimes aligned
  std::vector<Eigen::VectorXd> mle_estimates;    // packed aligned MLEs
  FreeParamVector theta_bar;
  ModelParams theta_bar_params;
  std::vector<Eigen::VectorXd> theta0_estimates;  // one-step M-estimates
  Eigen::MatrixXd jx_bar, jy_bar, sigma_n;
  Eigen::MatrixXd jx_bar_mle, jy_bar_mle, sigma_n_mle;

  int converged_fits() const {
    return static_cast<int>(std::count_if(fits.begin(), fits.end(), [](const FitResult& f) { return f.converged; }));
  }
};

/// Fits every sample, pools the MLEs and applies the one-step update
/// theta_bar + Jx_k(theta_bar)^{-1} S_k(theta_bar) to each sample. Regimes of
/// every fit are aligned to `reference` when given, else to the first fit.
/// Fits that exhaust max_iter are kept; see converged_fits().
inline MEstimatorResult m_estimator_pipeline(const std::vector<Sample>& samples, int M,
                                             const FitConfig& config,
                                             const std::optional<ModelParams>& reference = std::nullopt) {
  if (samples.empty()) throw ValidationError({"K must be >= 1"});
  const std::size_t K = samples.size();
  MEstimatorResult r;
  r.K = static_cast<int>(K);
  r.n = static_cast<int>(samples.front().size());
  r.fits.resize(K);

  parallel_for(K, config.threads, [&](std::size_t k) {
    try {
      r.fits[k] = fit(samples[k], config.method, initial_guess(samples[k], M), config.options);
    } catch (const std::exception& e) {
      throw Error("replicate " + std::to_string(k + 1) + ": " + e.what());
    }
  });

  const ModelParams ref = reference ? *reference : r.fits.front().theta_hat;
  const ParamLayout layout(ref.p, M);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(layout.size());
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(ref.p);
  for (auto& f : r.fits) {
    f.theta_hat = align_regimes(f.theta_hat, ref);
    r.mle_estimates.push_back(pack(f.theta_hat).values);
    mean += r.mle_estimates.back();
    alpha += f.theta_hat.alpha;
  }
  mean /= static_cast<double>(K);
  alpha /= static_cast<double>(K);
  r.theta_bar_params = normalized(unpack(layout, mean, alpha));
  r.theta_bar = pack(r.theta_bar_params);

  const int d = layout.size();
  std::vector<Eigen::MatrixXd> jxk(K), jyk(K), jxk_mle(K), jyk_mle(K);
  r.theta0_estimates.resize(K);
  parallel_for(K, config.threads, [&](std::size_t k) {
    const WeightedStats ws = weighted_stats(samples[k], r.theta_bar_params);
    jxk[k] = jx(ws, r.theta_bar_params);
    jyk[k] = jy(samples[k], r.theta_bar_params);
    r.theta0_estimates[k] =
        r.theta_bar.values + jx_inverse(ws, r.theta_bar_params) * score(ws, r.theta_bar_params);
    jxk_mle[k] = jx(samples[k], r.fits[k].theta_hat);
    jyk_mle[k] = jy(samples[k], r.fits[k].theta_hat);
  });
  r.jx_bar = r.jy_bar = r.jx_bar_mle = r.jy_bar_mle = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t k = 0; k < K; ++k) {
    r.jx_bar += jxk[k];
    r.jy_bar += jyk[k];
    r.jx_bar_mle += jxk_mle[k];
    r.jy_bar_mle += jyk_mle[k];
  }
  r.jx_bar /= static_cast<double>(K);
  r.jy_bar /= static_cast<double>(K);
  r.jx_bar_mle /= static_cast<double>(K);
  r.jy_bar_mle /= static_cast<double>(K);
  r.sigma_n = sandwich(spd_inverse(r.jx_bar), r.jy_bar);
  r.sigma_n_mle = sandwich(spd_inverse(r.jx_bar_mle), r.jy_bar_mle);
  return r;
}

/// Seed of replicate k's sample under a master seed.
inline std::uint64_t replicate_seed(std::uint64_t seed, std::size_t k) {
  return CounterRng::substream_key(seed ^ 0x5deece66dULL, k);
}

/// Simulates K samples of sim.n_paths paths from `truth` and runs the
/// pipeline, aligning regimes to the truth.
inline MEstimatorResult m_estimator_pipeline(const ModelParams& truth, int K, const SimConfig& sim,
                                             const FitConfig& config) {
  if (K < 1) throw ValidationError({"K must be >= 1"});
  std::vector<Sample> samples(static_cast<std::size_t>(K));
  parallel_for(samples.size(), config.threads, [&](std::size_t k) {
    SimConfig c = sim;
    c.seed = replicate_seed(sim.seed, k);
    c.threads = 1;
    samples[k] = simulate_stats(truth, c);
  });
  return m_estimator_pipeline(samples, truth.M, config, truth);
}

}  // namespace rscmjp

#endif  // RSCMJP_ESTIMATORS_HPP_
