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

#ifndef RSCMJP_MODEL_HPP_
#define RSCMJP_MODEL_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "rscmjp/error.hpp"

namespace rscmjp {

/// Absolute tolerance on simplex sums (alpha and each phi row).
inline constexpr double kSimplexTolerance = 1e-10;

/// Full parameter set of a regime-switching conditional Markov jump process.
///
/// States and regimes are 0-based in code and 1-based in every label and
/// file. `q[m]` is the intensity matrix of regime m; `phi(x, m)` is the
/// probability that a path starting in x follows regime m.
struct ModelParams {
  int p = 0;
  int M = 0;
  Eigen::VectorXd alpha;
  Eigen::MatrixXd phi;
  std::vector<Eigen::MatrixXd> q;

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    if (a.p != b.p || a.M != b.M || a.q.size() != b.q.size()) return false;
    if (a.alpha != b.alpha || a.phi != b.phi) return false;
    for (std::size_t m = 0; m < a.q.size(); ++m)
      if (a.q[m] != b.q[m]) return false;
    return true;
  }
};

/// Returns every violated invariant; empty iff `theta` is valid.
inline std::vector<std::string> validate(const ModelParams& theta) {
  std::vector<std::string> out;
  const int p = theta.p;
  const int M = theta.M;
  if (p < 2) out.push_back("p must be >= 2 (got " + std::to_string(p) + ")");
  if (M < 1) out.push_back("M must be >= 1 (got " + std::to_string(M) + ")");
  if (!out.empty()) return out;

  if (theta.alpha.size() != p) {
    out.push_back("alpha must have length p");
  } else {
    double sum = 0.0;
    for (int x = 0; x < p; ++x) {
      const double a = theta.alpha(x);
      if (!std::isfinite(a) || a < 0.0)
        out.push_back("alpha_" + std::to_string(x + 1) + " must be >= 0");
      sum += a;
    }
    if (!(std::abs(sum - 1.0) <= kSimplexTolerance))
      out.push_back("alpha does not sum to 1 (sum = " + std::to_string(sum) + ")");
  }

  if (theta.phi.rows() != p || theta.phi.cols() != M) {
    out.push_back("phi must be p x M");
  } else {
    for (int x = 0; x < p; ++x) {
      double sum = 0.0;
      for (int m = 0; m < M; ++m) {
        const double v = theta.phi(x, m);
        if (!std::isfinite(v) || v <= 0.0)
          out.push_back("phi_" + std::to_string(x + 1) + "," + std::to_string(m + 1) +
                        " must be strictly positive");
        sum += v;
      }
      if (!(std::abs(sum - 1.0) <= kSimplexTolerance))
        out.push_back("phi row x=" + std::to_string(x + 1) +
                      " does not sum to 1 (sum = " + std::to_string(sum) + ")");
    }
  }

  if (static_cast<int>(theta.q.size()) != M) {
    out.push_back("Q must contain M intensity matrices");
    return out;
  }
  for (int m = 0; m < M; ++m) {
    const auto& Q = theta.q[m];
    if (Q.rows() != p || Q.cols() != p) {
      out.push_back("Q_" + std::to_string(m + 1) + " must be p x p");
      continue;
    }
    for (int x = 0; x < p; ++x) {
      double off = 0.0;
      for (int y = 0; y < p; ++y) {
        if (y == x) continue;
        const double v = Q(x, y);
        if (!std::isfinite(v) || v <= 0.0)
          out.push_back("q_" + std::to_string(x + 1) + std::to_string(y + 1) + "," +
                        std::to_string(m + 1) + " must be strictly positive");
        off += v;
      }
      if (!(std::abs(Q(x, x) + off) <= kSimplexTolerance * (1.0 + off)))
        out.push_back("q_" + std::to_string(x + 1) + std::to_string(x + 1) + "," +
                      std::to_string(m + 1) + " is not minus the off-diagonal row sum");
    }
  }
  return out;
}

inline void require_valid(const ModelParams& theta) {
  auto v = validate(theta);
  if (!v.empty()) throw ValidationError(std::move(v));
}

/// Recomputes the dependent entries: phi(x, M-1) = 1 - sum of the other
/// entries of the row, and q_xx = -(sum of off-diagonal row entries), both
/// summed in ascending index order. Every ModelParams produced by the
/// library is canonical, which makes pack/unpack round trips bit-exact.
inline ModelParams canonicalize(ModelParams theta) {
  for (int x = 0; x < theta.p; ++x) {
    double s = 0.0;
    for (int m = 0; m + 1 < theta.M; ++m) s += theta.phi(x, m);
    theta.phi(x, theta.M - 1) = 1.0 - s;
  }
  for (auto& Q : theta.q) {
    for (int x = 0; x < theta.p; ++x) {
      double s = 0.0;
      for (int y = 0; y < theta.p; ++y)
        if (y != x) s += Q(x, y);
      Q(x, x) = -s;
    }
  }
  return theta;
}

/// Validates within tolerance, then renormalizes alpha and each phi row
/// exactly and returns the canonical form.
inline ModelParams normalized(ModelParams theta) {
  require_valid(theta);
  theta.alpha /= theta.alpha.sum();
  for (int x = 0; x < theta.p; ++x) theta.phi.row(x) /= theta.phi.row(x).sum();
  return canonicalize(std::move(theta));
}

/// Marginal regime probabilities p_m = sum_x alpha_x phi_{x,m}.
inline Eigen::VectorXd regime_probabilities(const ModelParams& theta) {
  return theta.phi.transpose() * theta.alpha;
}

/// Relabels regimes: new regime j is old regime perm[j].
inline ModelParams permute_regimes(const ModelParams& theta, std::span<const int> perm) {
  ModelParams out = theta;
  for (int j = 0; j < theta.M; ++j) {
    out.phi.col(j) = theta.phi.col(perm[j]);
    out.q[j] = theta.q[perm[j]];
  }
  return canonicalize(std::move(out));
}

enum class ParamKind { kPhi, kQ };

/// One free parameter: phi_{x,m} (y unused) or q_{xy,m}. 0-based.
struct ParamIndex {
  ParamKind kind;
  int x;
  int y;
  int m;
};

/// Canonical ordering of the free parameters.
///
/// First phi_{x,m} for x = 1..p (outer) and m = 1..M-1 (inner); then q_{xy,m}
/// grouped by regime, row-major over (x, y != x) inside a regime. The size is
/// d = p(M-1) + M p(p-1).
class ParamLayout {
 public:
  ParamLayout() = default;
  ParamLayout(int p, int M) : p_(p), M_(M) {
    entries_.reserve(static_cast<std::size_t>(p * (M - 1) + M * p * (p - 1)));
    for (int x = 0; x < p; ++x)
      for (int m = 0; m + 1 < M; ++m) entries_.push_back({ParamKind::kPhi, x, -1, m});
    for (int m = 0; m < M; ++m)
      for (int x = 0; x < p; ++x)
        for (int y = 0; y < p; ++y)
          if (y != x) entries_.push_back({ParamKind::kQ, x, y, m});
  }

  int p() const { return p_; }
  int M() const { return M_; }
  int size() const { return static_cast<int>(entries_.size()); }
  int num_phi() const { return p_ * (M_ - 1); }

  int phi_index(int x, int m) const { return x * (M_ - 1) + m; }
  int q_index(int x, int y, int m) const {
    return num_phi() + m * p_ * (p_ - 1) + x * (p_ - 1) + (y < x ? y : y - 1);
  }

  const ParamIndex& operator[](int i) const { return entries_[static_cast<std::size_t>(i)]; }

  /// "phi_1_2" or "q_1_3_2" (1-based state, state, regime).
  std::string label(int i) const {
    const auto& e = (*this)[i];
    if (e.kind == ParamKind::kPhi)
      return "phi_" + std::to_string(e.x + 1) + "_" + std::to_string(e.m + 1);
    return "q_" + std::to_string(e.x + 1) + "_" + std::to_string(e.y + 1) + "_" +
           std::to_string(e.m + 1);
  }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (int i = 0; i < size(); ++i) out.push_back(label(i));
    return out;
  }

  friend bool operator==(const ParamLayout& a, const ParamLayout& b) {
    return a.p_ == b.p_ && a.M_ == b.M_;
  }

 private:
  int p_ = 0;
  int M_ = 0;
  std::vector<ParamIndex> entries_;
};

/// Packed free parameters together with the layout that names them.
struct FreeParamVector {
  ParamLayout layout;
  Eigen::VectorXd values;
};

inline FreeParamVector pack(const ModelParams& theta) {
  require_valid(theta);
  ParamLayout layout(theta.p, theta.M);
  Eigen::VectorXd v(layout.size());
  for (int i = 0; i < layout.size(); ++i) {
    const auto& e = layout[i];
    v(i) = e.kind == ParamKind::kPhi ? theta.phi(e.x, e.m) : theta.q[e.m](e.x, e.y);
  }
  return {std::move(layout), std::move(v)};
}

/// Rebuilds the full parameter set. The result is canonical but NOT
/// validated: callers that move through parameter space (step halving)
/// check validity themselves.
inline ModelParams unpack(const ParamLayout& layout, const Eigen::VectorXd& values,
                          const Eigen::VectorXd& alpha) {
  ModelParams theta;
  theta.p = layout.p();
  theta.M = layout.M();
  theta.alpha = alpha;
  theta.phi = Eigen::MatrixXd::Zero(theta.p, theta.M);
  theta.q.assign(static_cast<std::size_t>(theta.M), Eigen::MatrixXd::Zero(theta.p, theta.p));
  for (int i = 0; i < layout.size(); ++i) {
    const auto& e = layout[i];
    if (e.kind == ParamKind::kPhi)
      theta.phi(e.x, e.m) = values(i);
    else
      theta.q[static_cast<std::size_t>(e.m)](e.x, e.y) = values(i);
  }
  return canonicalize(std::move(theta));
}

inline ModelParams unpack(const FreeParamVector& v, const Eigen::VectorXd& alpha) {
  return unpack(v.layout, v.values, alpha);
}

/// Sufficient statistics of one observed path.
struct PathStats {
  int initial_state = 0;  // index x with B_x = 1
  Eigen::MatrixXi N;      // transition counts, zero diagonal
  Eigen::VectorXd T;      // occupation times
  double horizon = 0.0;

  int p() const { return static_cast<int>(T.size()); }

  /// Initial-state indicator vector B.
  Eigen::VectorXd B() const {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p());
    b(initial_state) = 1.0;
    return b;
  }
};

/// An observed sample: one PathStats per independent path.
using Sample = std::vector<PathStats>;

inline std::vector<std::string> validate(const PathStats& s) {
  std::vector<std::string> out;
  const int p = s.p();
  if (p < 2) out.push_back("path statistics need p >= 2");
  if (s.N.rows() != p || s.N.cols() != p) out.push_back("N must be p x p");
  if (s.initial_state < 0 || s.initial_state >= p) out.push_back("initial state out of range");
  if (!(s.horizon > 0.0)) out.push_back("horizon must be positive");
  if (!out.empty()) return out;
  double total = 0.0;
  for (int x = 0; x < p; ++x) {
    if (!(s.T(x) >= 0.0)) out.push_back("T_" + std::to_string(x + 1) + " must be >= 0");
    total += s.T(x);
    if (s.N(x, x) != 0) out.push_back("N_xx must be 0");
    for (int y = 0; y < p; ++y) {
      if (s.N(x, y) < 0) out.push_back("N must be nonnegative");
      if (s.N(x, y) > 0 && !(s.T(x) > 0.0))
        out.push_back("N_" + std::to_string(x + 1) + std::to_string(y + 1) +
                      " > 0 requires T_" + std::to_string(x + 1) + " > 0");
    }
  }
  if (!(std::abs(total - s.horizon) <= 1e-12 * s.horizon))
    out.push_back("occupation times do not sum to the horizon");
  return out;
}

}  // namespace rscmjp

#endif  // RSCMJP_MODEL_HPP_
