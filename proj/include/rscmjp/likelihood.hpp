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

#ifndef RSCMJP_LIKELIHOOD_HPP_
#define RSCMJP_LIKELIHOOD_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <vector>

#include "rscmjp/error.hpp"
#include "rscmjp/model.hpp"

namespace rscmjp {

/// Pairwise (cascade) summation; result depends only on the input order.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double log_sum_exp(const Eigen::VectorXd& v) {
  const double top = v.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((v.array() - top).exp().sum());
}

/// log f_c(X, Phi = m | theta), excluding the alpha term which does not
/// depend on the estimated parameters.
inline double complete_loglik(const PathStats& s, int m, const ModelParams& theta) {
  const auto& Q = theta.q[static_cast<std::size_t>(m)];
  double out = std::log(theta.phi(s.initial_state, m));
  for (int x = 0; x < theta.p; ++x) {
    for (int y = 0; y < theta.p; ++y) {
      if (y == x) continue;
      const double qxy = Q(x, y);
      if (s.N(x, y) != 0) out += s.N(x, y) * std::log(qxy);
      out -= qxy * s.T(x);
    }
  }
  return out;
}

inline Eigen::VectorXd complete_logliks(const PathStats& s, const ModelParams& theta) {
  Eigen::VectorXd l(theta.M);
  for (int m = 0; m < theta.M; ++m) l(m) = complete_loglik(s, m, theta);
  return l;
}

/// Posterior regime probabilities of one path, computed in the log domain.
inline Eigen::VectorXd posterior_weights(const PathStats& s, const ModelParams& theta) {
  Eigen::VectorXd l = complete_logliks(s, theta);
  const double top = l.maxCoeff();
  Eigen::VectorXd w = (l.array() - top).exp();
  return w / w.sum();
}

inline void require_nonempty(const Sample& sample) {
  if (sample.empty()) throw ValidationError({"sample must contain at least one path"});
}

/// Observed-data log-likelihood sum_k log sum_m f_c(X^k, Phi^k = m | theta).
inline double observed_loglik(const Sample& sample, const ModelParams& theta) {
  require_nonempty(sample);
  std::vector<double> terms;
  terms.reserve(sample.size());
  for (const auto& s : sample) terms.push_back(log_sum_exp(complete_logliks(s, theta)));
  return pairwise_sum(terms);
}

/// Posterior-weighted sufficient statistics summed over the sample.
struct WeightedStats {
  Eigen::MatrixXd Bhat;              // p x M
  std::vector<Eigen::MatrixXd> Nhat;  // M matrices, p x p
  Eigen::MatrixXd That;              // p x M
  Eigen::VectorXd Bbar;              // p
  int n = 0;
};

inline WeightedStats weighted_stats(const Sample& sample, const ModelParams& theta) {
  require_nonempty(sample);
  const int p = theta.p;
  const int M = theta.M;
  WeightedStats ws;
  ws.Bhat = Eigen::MatrixXd::Zero(p, M);
  ws.Nhat.assign(static_cast<std::size_t>(M), Eigen::MatrixXd::Zero(p, p));
  ws.That = Eigen::MatrixXd::Zero(p, M);
  ws.Bbar = Eigen::VectorXd::Zero(p);
  ws.n = static_cast<int>(sample.size());
  for (const auto& s : sample) {
    const Eigen::VectorXd w = posterior_weights(s, theta);
    const Eigen::MatrixXd N = s.N.cast<double>();
    ws.Bbar(s.initial_state) += 1.0;
    for (int m = 0; m < M; ++m) {
      ws.Bhat(s.initial_state, m) += w(m);
      ws.Nhat[static_cast<std::size_t>(m)] += w(m) * N;
      ws.That.col(m) += w(m) * s.T;
    }
  }
  return ws;
}

/// Score S_n(theta) from weighted statistics evaluated at the same theta:
/// phi components (Bhat_{x,m}/phi_{x,m} - Bhat_{x,M}/phi_{x,M}) / n and
/// q components (Nhat_{xy,m}/q_{xy,m} - That_{x,m}) / n.
inline Eigen::VectorXd score(const WeightedStats& ws, const ModelParams& theta) {
  const ParamLayout layout(theta.p, theta.M);
  const int last = theta.M - 1;
  Eigen::VectorXd g(layout.size());
  for (int i = 0; i < layout.size(); ++i) {
    const auto& e = layout[i];
    if (e.kind == ParamKind::kPhi) {
      g(i) = ws.Bhat(e.x, e.m) / theta.phi(e.x, e.m) - ws.Bhat(e.x, last) / theta.phi(e.x, last);
    } else {
      const auto m = static_cast<std::size_t>(e.m);
      g(i) = ws.Nhat[m](e.x, e.y) / theta.q[m](e.x, e.y) - ws.That(e.x, e.m);
    }
  }
  return g / ws.n;
}

inline Eigen::VectorXd score(const Sample& sample, const ModelParams& theta) {
  return score(weighted_stats(sample, theta), theta);
}

/// Gradient of complete_loglik(s, m, .) with respect to the free parameters.
inline Eigen::VectorXd complete_score(const PathStats& s, int m, const ModelParams& theta) {
  const ParamLayout layout(theta.p, theta.M);
  const int last = theta.M - 1;
  const int x0 = s.initial_state;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(layout.size());
  for (int j = 0; j + 1 < theta.M; ++j) {
    double v = 0.0;
    if (m == j) v += 1.0 / theta.phi(x0, j);
    if (m == last) v -= 1.0 / theta.phi(x0, last);
    g(layout.phi_index(x0, j)) = v;
  }
  const auto& Q = theta.q[static_cast<std::size_t>(m)];
  for (int x = 0; x < theta.p; ++x)
    for (int y = 0; y < theta.p; ++y)
      if (y != x) g(layout.q_index(x, y, m)) = s.N(x, y) / Q(x, y) - s.T(x);
  return g;
}

/// Negative Hessian of complete_loglik(s, m, .) with respect to the free
/// parameters.
inline Eigen::MatrixXd complete_neg_hessian(const PathStats& s, int m, const ModelParams& theta) {
  const ParamLayout layout(theta.p, theta.M);
  const int last = theta.M - 1;
  const int x0 = s.initial_state;
  const int d = layout.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
  if (m == last) {
    const double c = 1.0 / (theta.phi(x0, last) * theta.phi(x0, last));
    for (int i = 0; i + 1 < theta.M; ++i)
      for (int j = 0; j + 1 < theta.M; ++j) h(layout.phi_index(x0, i), layout.phi_index(x0, j)) = c;
  } else {
    const int k = layout.phi_index(x0, m);
    h(k, k) = 1.0 / (theta.phi(x0, m) * theta.phi(x0, m));
  }
  const auto& Q = theta.q[static_cast<std::size_t>(m)];
  for (int x = 0; x < theta.p; ++x)
    for (int y = 0; y < theta.p; ++y)
      if (y != x) {
        const int k = layout.q_index(x, y, m);
        h(k, k) = s.N(x, y) / (Q(x, y) * Q(x, y));
      }
  return h;
}

/// Observed-data score of one path, d/dtheta log f_o(X | theta), computed as
/// the posterior expectation of the complete-data score.
inline Eigen::VectorXd path_score(const PathStats& s, const ModelParams& theta) {
  const Eigen::VectorXd w = posterior_weights(s, theta);
  const ParamLayout layout(theta.p, theta.M);
  const int last = theta.M - 1;
  const int x0 = s.initial_state;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(layout.size());
  for (int j = 0; j + 1 < theta.M; ++j)
    g(layout.phi_index(x0, j)) = w(j) / theta.phi(x0, j) - w(last) / theta.phi(x0, last);
  for (int m = 0; m < theta.M; ++m) {
    const auto& Q = theta.q[static_cast<std::size_t>(m)];
    for (int x = 0; x < theta.p; ++x)
      for (int y = 0; y < theta.p; ++y)
        if (y != x) g(layout.q_index(x, y, m)) = w(m) * (s.N(x, y) / Q(x, y) - s.T(x));
  }
  return g;
}

/// Per-path observed scores stacked as rows (n x d).
inline Eigen::MatrixXd path_scores(const Sample& sample, const ModelParams& theta) {
  require_nonempty(sample);
  const ParamLayout layout(theta.p, theta.M);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(sample.size()), layout.size());
  for (std::size_t k = 0; k < sample.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) = path_score(sample[k], theta).transpose();
  return out;
}

}  // namespace rscmjp

#endif  // RSCMJP_LIKELIHOOD_HPP_
