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

#ifndef RSCMJP_LINALG_HPP_
#define RSCMJP_LINALG_HPP_

#include <Eigen/Dense>
#include <string>

#include "rscmjp/error.hpp"

namespace rscmjp {

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

inline void require_same_square_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
    throw ValidationError({"matrix shape mismatch: " + std::to_string(a.rows()) + "x" +
                           std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                           std::to_string(b.cols())});
}

/// Smallest eigenvalue of the symmetric part of `a`.
inline double min_eigenvalue(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

/// Scale-aware tolerance used by every definiteness test: 1e-10 (1 + max|a|).
inline double definiteness_tolerance(const Eigen::MatrixXd& a) {
  return 1e-10 * (1.0 + (a.size() ? a.cwiseAbs().maxCoeff() : 0.0));
}

inline bool is_positive_definite(const Eigen::MatrixXd& a) {
  Eigen::LLT<Eigen::MatrixXd> llt(symmetrize(a));
  if (llt.info() != Eigen::Success) return false;
  return min_eigenvalue(a) > definiteness_tolerance(a);
}

/// Strict Loewner order: a - b positive definite beyond the tolerance.
inline bool loewner_greater(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  require_same_square_shape(a, b);
  const Eigen::MatrixXd diff = a - b;
  return min_eigenvalue(diff) > definiteness_tolerance(diff);
}

/// Non-strict Loewner order: a - b positive semidefinite up to the tolerance.
inline bool loewner_greater_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  require_same_square_shape(a, b);
  const Eigen::MatrixXd diff = a - b;
  return min_eigenvalue(diff) > -definiteness_tolerance(diff);
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
inline Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& a) {
  Eigen::LLT<Eigen::MatrixXd> llt(symmetrize(a));
  if (llt.info() != Eigen::Success)
    throw SingularityError("matrix is not positive definite; Cholesky failed");
  return symmetrize(llt.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols())));
}

/// Inverse via full-pivot LU; throws if numerically singular.
inline Eigen::MatrixXd dense_inverse(const Eigen::MatrixXd& a) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) throw SingularityError("matrix is singular");
  return lu.inverse();
}

}  // namespace rscmjp

#endif  // RSCMJP_LINALG_HPP_
