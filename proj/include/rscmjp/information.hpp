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

#ifndef RSCMJP_INFORMATION_HPP_
#define RSCMJP_INFORMATION_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "rscmjp/error.hpp"
#include "rscmjp/likelihood.hpp"
#include "rscmjp/linalg.hpp"
#include "rscmjp/model.hpp"

// Information matrices are normalized per path: Jx and Jy are averages over
// the n paths of the sample, so Jy = -(1/n) d^2/dtheta^2 sum_k log f_o.

namespace rscmjp {

/// Conditional observed information Jx(theta) from weighted statistics.
///
/// Block diagonal: one (M-1)x(M-1) block per state x equal to
/// diag(d_{x,l}) + beta_{x,M} 11^T with d_{x,l} = Bhat_{x,l}/(n phi_{x,l}^2)
/// and beta_{x,M} = Bhat_{x,M}/(n phi_{x,M}^2), then a diagonal q block with
/// entries Nhat_{xy,m}/(n q_{xy,m}^2). The phi-q cross block is zero.
inline Eigen::MatrixXd jx(const WeightedStats& ws, const ModelParams& theta) {
  const ParamLayout layout(theta.p, theta.M);
  const int last = theta.M - 1;
  const double n = ws.n;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(layout.size(), layout.size());
  for (int x = 0; x < theta.p; ++x) {
    const double beta = ws.Bhat(x, last) / (n * theta.phi(x, last) * theta.phi(x, last));
    for (int l = 0; l < last; ++l) {
      for (int m = 0; m < last; ++m) J(layout.phi_index(x, l), layout.phi_index(x, m)) = beta;
      J(layout.phi_index(x, l), layout.phi_index(x, l)) +=
          ws.Bhat(x, l) / (n * theta.phi(x, l) * theta.phi(x, l));
    }
  }
  for (int m = 0; m < theta.M; ++m) {
    const auto& Q = theta.q[static_cast<std::size_t>(m)];
    for (int x = 0; x < theta.p; ++x)
      for (int y = 0; y < theta.p; ++y)
        if (y != x) {
          const int k = layout.q_index(x, y, m);
          J(k, k) = ws.Nhat[static_cast<std::size_t>(m)](x, y) / (n * Q(x, y) * Q(x, y));
        }
  }
  return J;
}

inline Eigen::MatrixXd jx(const Sample& sample, const ModelParams& theta) {
  return jx(weighted_stats(sample, theta), theta);
}

/// Closed-form inverse of Jx: Sherman-Morrison on each phi block and the
/// reciprocal of the q diagonal.
inline Eigen::MatrixXd jx_inverse(const WeightedStats& ws, const ModelParams& theta) {
  const ParamLayout layout(theta.p, theta.M);
  const int last = theta.M - 1;
  const double n = ws.n;
  Eigen::MatrixXd inv = Eigen::MatrixXd::Zero(layout.size(), layout.size());
  auto singular = [&](int idx, const char* what) {
    throw SingularityError("Jx is singular: " + std::string(what) + " is zero for parameter " +
                           layout.label(idx));
  };
  std::vector<double> d(static_cast<std::size_t>(std::max(last, 0)));
  for (int x = 0; x < theta.p && last > 0; ++x) {
    if (!(ws.Bhat(x, last) > 0.0)) singular(layout.phi_index(x, 0), "weighted initial count");
    const double beta = ws.Bhat(x, last) / (n * theta.phi(x, last) * theta.phi(x, last));
    double sum_inv_d = 0.0;
    for (int l = 0; l < last; ++l) {
      if (!(ws.Bhat(x, l) > 0.0)) singular(layout.phi_index(x, l), "weighted initial count");
      d[static_cast<std::size_t>(l)] = ws.Bhat(x, l) / (n * theta.phi(x, l) * theta.phi(x, l));
      sum_inv_d += 1.0 / d[static_cast<std::size_t>(l)];
    }
    const double denom = 1.0 + beta * sum_inv_d;
    for (int l = 0; l < last; ++l) {
      const double dl = d[static_cast<std::size_t>(l)];
      for (int m = 0; m < last; ++m) {
        const double dm = d[static_cast<std::size_t>(m)];
        double v = -beta / (dl * dm * denom);
        if (l == m) v += 1.0 / dl;
        inv(layout.phi_index(x, l), layout.phi_index(x, m)) = v;
      }
    }
  }
  for (int m = 0; m < theta.M; ++m) {
    const auto& Q = theta.q[static_cast<std::size_t>(m)];
    for (int x = 0; x < theta.p; ++x)
      for (int y = 0; y < theta.p; ++y)
        if (y != x) {
          const int k = layout.q_index(x, y, m);
          const double nh = ws.Nhat[static_cast<std::size_t>(m)](x, y);
          if (!(nh > 0.0)) singular(k, "weighted transition count");
          inv(k, k) = n * Q(x, y) * Q(x, y) / nh;
        }
  }
  return inv;
}

inline Eigen::MatrixXd jx_inverse(const Sample& sample, const ModelParams& theta) {
  return jx_inverse(weighted_stats(sample, theta), theta);
}

/// Observed information Jy(theta) assembled from the explicit element
/// formulas for the RSCMJP:
///
///   Jy(phi_{x,i}, phi_{x,j}) = sum_k B_x^k Psi_i^k Psi_j^k / (phi_{x,i} phi_{x,j})
///   Jy(q_i, q_j) = delta_ij Nhat_i / q_i^2
///                  - sum_k w_l^k (delta_ml - w_m^k) a_i^k a_j^k
///   Jy(phi_{x,i}, q_j) = -sum_k w_l^k (delta_il - Psi_i^k) a_j^k B_x^k / phi_{x,i}
///                        + delta_{lM} sum_k w_l^k a_j^k B_x^k / phi_{x,M}
///
/// where q_i is in regime m, q_j in regime l, w^k are posterior weights,
/// Psi_i^k = w_i^k - (phi_{x,i}/phi_{x,M}) w_M^k and
/// a_j^k = (N_j^k - q_j T_x^k) / q_j is the per-path complete-data q score.
/// All sums are divided by n.
inline Eigen::MatrixXd jy(const Sample& sample, const ModelParams& theta) {
  require_nonempty(sample);
  const ParamLayout layout(theta.p, theta.M);
  const int d = layout.size();
  const int nphi = layout.num_phi();
  const int nq = d - nphi;
  const int last = theta.M - 1;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd a(nq), u(nq), c(nq), psi(std::max(last, 0));
  std::vector<int> regime_of(static_cast<std::size_t>(nq));
  for (int i = 0; i < nq; ++i) regime_of[static_cast<std::size_t>(i)] = layout[nphi + i].m;

  for (const auto& s : sample) {
    const Eigen::VectorXd w = posterior_weights(s, theta);
    const int x0 = s.initial_state;
    for (int i = 0; i < nq; ++i) {
      const auto& e = layout[nphi + i];
      const double qv = theta.q[static_cast<std::size_t>(e.m)](e.x, e.y);
      a(i) = (s.N(e.x, e.y) - qv * s.T(e.x)) / qv;
      u(i) = w(e.m) * a(i);
    }
    // q-q: diagonal Nhat term added after the loop; here minus the posterior
    // covariance of the complete-data q score, in centered form.
    for (int m = 0; m < theta.M; ++m) {
      c = -u;
      for (int i = 0; i < nq; ++i)
        if (regime_of[static_cast<std::size_t>(i)] == m) c(i) += a(i);
      J.bottomRightCorner(nq, nq).noalias() -= w(m) * c * c.transpose();
    }
    if (last == 0) continue;
    const double phiM = theta.phi(x0, last);
    for (int i = 0; i < last; ++i) psi(i) = w(i) - theta.phi(x0, i) / phiM * w(last);
    for (int i = 0; i < last; ++i) {
      const int pi = layout.phi_index(x0, i);
      const double phii = theta.phi(x0, i);
      for (int j = 0; j < last; ++j)
        J(pi, layout.phi_index(x0, j)) += psi(i) * psi(j) / (phii * theta.phi(x0, j));
      for (int j = 0; j < nq; ++j) {
        const int l = regime_of[static_cast<std::size_t>(j)];
        double v = -w(l) * ((i == l ? 1.0 : 0.0) - psi(i)) * a(j) / phii;
        if (l == last) v += w(l) * a(j) / phiM;
        J(pi, nphi + j) += v;
        J(nphi + j, pi) += v;
      }
    }
  }
  const double n = static_cast<double>(sample.size());
  J /= n;
  // Same expression as in jx(), so that M = 1 reproduces it bit for bit.
  const WeightedStats ws = weighted_stats(sample, theta);
  for (int i = 0; i < nq; ++i) {
    const auto& e = layout[nphi + i];
    const double qv = theta.q[static_cast<std::size_t>(e.m)](e.x, e.y);
    J(nphi + i, nphi + i) += ws.Nhat[static_cast<std::size_t>(e.m)](e.x, e.y) / (n * qv * qv);
  }
  return J;
}

/// Observed information from the generic three-term identity applied per
/// path: E[-H_c] - E[s_c s_c^T] + E[s_c] E[s_c]^T, with expectations over the
/// posterior regime distribution. Independent of the closed forms in jy().
inline Eigen::MatrixXd jy_generic(const Sample& sample, const ModelParams& theta) {
  require_nonempty(sample);
  const int d = ParamLayout(theta.p, theta.M).size();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(d, d);
  for (const auto& s : sample) {
    const Eigen::VectorXd w = posterior_weights(s, theta);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (int m = 0; m < theta.M; ++m) {
      const Eigen::VectorXd g = complete_score(s, m, theta);
      J.noalias() += w(m) * complete_neg_hessian(s, m, theta);
      J.noalias() -= w(m) * g * g.transpose();
      mean += w(m) * g;
    }
    J.noalias() += mean * mean.transpose();
  }
  return J / static_cast<double>(sample.size());
}

/// Both information matrices at one parameter point.
struct InfoMatrices {
  Eigen::MatrixXd jx;
  Eigen::MatrixXd jy;
  FreeParamVector at_theta;
  int n = 0;
};

inline InfoMatrices information_matrices(const Sample& sample, const ModelParams& theta) {
  return {jx(sample, theta), jy(sample, theta), pack(theta), static_cast<int>(sample.size())};
}

/// Eigenvalues of Jx^{-1} Jy (real: the product is similar to a symmetric
/// matrix), ascending.
inline Eigen::VectorXd relative_eigenvalues(const Eigen::MatrixXd& jx_inv, const Eigen::MatrixXd& jy) {
  require_same_square_shape(jx_inv, jy);
  Eigen::LLT<Eigen::MatrixXd> llt(symmetrize(jx_inv));
  if (llt.info() != Eigen::Success) throw OrderingError("Jx^{-1} is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  const Eigen::MatrixXd C = L.transpose() * symmetrize(jy) * L;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(C), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// Spectral radius of the recursion matrix I - Jx^{-1} Jy.
inline double iteration_spectral_radius(const Eigen::MatrixXd& jx_inv, const Eigen::MatrixXd& jy) {
  const Eigen::VectorXd lam = relative_eigenvalues(jx_inv, jy);
  return (1.0 - lam.array()).abs().maxCoeff();
}

struct PsiOptions {
  double tol = 1e-10;  // on the max absolute entry of the increment
  int max_iter = 500;
};

/// Iterates of the monotone recursion for Jy^{-1}.
struct PsiTrace {
  std::vector<Eigen::MatrixXd> iterates;  // Psi_0 = 0, Psi_1, ...
  std::vector<double> increment_norms;    // Frobenius norm of Psi_{l+1} - Psi_l
  double spectral_radius_estimate = 0.0;
  bool converged = false;

  const Eigen::MatrixXd& limit() const { return iterates.back(); }
  int iterations() const { return static_cast<int>(iterates.size()) - 1; }
};

class PsiConvergenceError : public Error {
 public:
  PsiConvergenceError(const std::string& what, PsiTrace trace)
      : Error(what), trace_(std::move(trace)) {}
  const PsiTrace& trace() const { return trace_; }

 private:
  PsiTrace trace_;
};

/// Psi_{l+1} = (I - Jx^{-1} Jy) Psi_l + Jx^{-1}, Psi_0 = 0.
///
/// Requires Jy > 0 and Jx >= Jy (checked through the eigenvalues of
/// Jx^{-1} Jy, which must lie in (0, 1]); the increments are then positive
/// semidefinite and the iterates rise monotonically to Jy^{-1} at the rate
/// rho(I - Jx^{-1} Jy). The rate estimate is the ratio of the last two
/// increment norms.
inline PsiTrace psi_recursion(const Eigen::MatrixXd& jx_inv, const Eigen::MatrixXd& jy,
                              const PsiOptions& opt = {}) {
  const Eigen::VectorXd lam = relative_eigenvalues(jx_inv, jy);
  const double eps = 1e-10 * (1.0 + lam.cwiseAbs().maxCoeff());
  if (!(lam(0) > eps))
    throw OrderingError("Jy is not positive definite (min eigenvalue of Jx^{-1}Jy = " +
                        std::to_string(lam(0)) + ")");
  if (!(lam(lam.size() - 1) <= 1.0 + eps))
    throw OrderingError("Jx - Jy is not positive semidefinite (max eigenvalue of Jx^{-1}Jy = " +
                        std::to_string(lam(lam.size() - 1)) + ")");

  const Eigen::Index d = jy.rows();
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(d, d) - jx_inv * jy;
  PsiTrace trace;
  trace.iterates.push_back(Eigen::MatrixXd::Zero(d, d));
  for (int it = 0; it < opt.max_iter; ++it) {
    Eigen::MatrixXd next = A * trace.iterates.back() + jx_inv;
    const Eigen::MatrixXd inc = next - trace.iterates.back();
    trace.increment_norms.push_back(inc.norm());
    trace.iterates.push_back(std::move(next));
    const auto k = trace.increment_norms.size();
    if (k >= 2)
      trace.spectral_radius_estimate =
          trace.increment_norms[k - 2] > 0.0 ? trace.increment_norms[k - 1] / trace.increment_norms[k - 2]
                                             : 0.0;
    if (inc.cwiseAbs().maxCoeff() < opt.tol) {
      trace.converged = true;
      return trace;
    }
  }
  throw PsiConvergenceError("Psi recursion did not converge in " + std::to_string(opt.max_iter) +
                                " iterations",
                            std::move(trace));
}

/// Sigma_n = Jx^{-1} Jy Jx^{-1}, symmetrized.
inline Eigen::MatrixXd sandwich(const Eigen::MatrixXd& jx_inv, const Eigen::MatrixXd& jy) {
  require_same_square_shape(jx_inv, jy);
  return symmetrize(jx_inv * jy * jx_inv);
}

/// Jy^{-1}: the Psi recursion when its ordering premise holds, otherwise a
/// dense Cholesky inverse.
inline Eigen::MatrixXd jy_inverse(const Eigen::MatrixXd& jx_inv, const Eigen::MatrixXd& jy,
                                  const PsiOptions& opt = {}) {
  try {
    return symmetrize(psi_recursion(jx_inv, jy, opt).limit());
  } catch (const OrderingError&) {
  } catch (const PsiConvergenceError&) {
  }
  try {
    return spd_inverse(jy);
  } catch (const SingularityError&) {
    throw SingularityError("Jy is singular or not positive definite");
  }
}

/// Huber-type sandwich V_n = Jy^{-1} K_n Jy^{-1}, where K_n is the average
/// outer product of the per-path observed-data scores.
inline Eigen::MatrixXd huber_sandwich(const Sample& sample, const ModelParams& theta) {
  const Eigen::MatrixXd scores = path_scores(sample, theta);
  const Eigen::MatrixXd K = scores.transpose() * scores / static_cast<double>(sample.size());
  const Eigen::MatrixXd jyi = jy_inverse(jx_inverse(sample, theta), jy(sample, theta));
  return symmetrize(jyi * K * jyi);
}

}  // namespace rscmjp

#endif  // RSCMJP_INFORMATION_HPP_
