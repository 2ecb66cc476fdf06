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

#include <gtest/gtest.h>

#include <cmath>

#include "rscmjp/estimators.hpp"
#include "rscmjp/information.hpp"
#include "support/oracles.hpp"

namespace rscmjp {
namespace {

using namespace rscmjp::testing;

Sample study_sample(std::size_t n, std::uint64_t seed) { return simulate_stats(study_truth(), {n, 10.0, seed, 1}); }

// Shared fitted study instance (n = 500).
struct Fitted {
  Sample sample;
  ModelParams mle;
  Fitted() : sample(study_sample(500, 77)) {
    mle = fit(sample, Method::kEM, initial_guess(sample, 3), {1e-10, 20000}).theta_hat;
  }
};

const Fitted& fitted() {
  static const Fitted f;
  return f;
}

TEST(Information, JxBlockStructure) {
  const auto& f = fitted();
  const Eigen::MatrixXd J = jx(f.sample, f.mle);
  const ParamLayout layout(3, 3);
  for (int i = 0; i < 24; ++i)
    for (int j = 0; j < 24; ++j) {
      const auto &a = layout[i], &b = layout[j];
      if (a.kind != b.kind) { EXPECT_EQ(J(i, j), 0.0); }
      if (a.kind == ParamKind::kPhi && b.kind == ParamKind::kPhi && a.x != b.x) { EXPECT_EQ(J(i, j), 0.0); }
      if (a.kind == ParamKind::kQ && b.kind == ParamKind::kQ && i != j) { EXPECT_EQ(J(i, j), 0.0); }
    }
  EXPECT_TRUE(is_positive_definite(J));
}

TEST(Information, ShermanMorrisonInverse) {
  const auto& f = fitted();
  const auto ws = weighted_stats(f.sample, f.mle);
  const Eigen::MatrixXd dense = dense_inverse(jx(ws, f.mle));
  EXPECT_LT(rel_err(jx_inverse(ws, f.mle), dense), 1e-8);
}

TEST(Information, JxInverseSingularNamesParameter) {
  // Every state is an initial state but no path ever jumps: Nhat = 0.
  Sample s;
  for (int k = 0; k < 6; ++k) {
    PathStats p{k % 3, Eigen::MatrixXi::Zero(3, 3), Eigen::VectorXd::Zero(3), 10.0};
    p.T(k % 3) = 10.0;
    s.push_back(p);
  }
  try {
    jx_inverse(s, study_truth());
    FAIL() << "expected SingularityError";
  } catch (const SingularityError& e) {
    EXPECT_NE(std::string(e.what()).find("q_1_2_1"), std::string::npos) << e.what();
  }
}

// Explicit Jy, the generic three-term form and the finite-difference Hessian.
TEST(Information, JyThreeWayAgreement) {
  const ModelParams theta = random_params(2, 2, 31);
  const Sample s = simulate_stats(theta, {50, 10.0, 32, 1});
  const Eigen::MatrixXd a = jy(s, theta);
  const Eigen::MatrixXd b = jy_generic(s, theta);
  const Eigen::MatrixXd h = -fd_hessian(mean_loglik_fn(s, theta), pack(theta).values);
  EXPECT_LT(rel_err(a, b), 1e-10);
  EXPECT_LT(rel_err(a, h), 1e-5);
}

TEST(Information, JyMatchesGenericOnStudyModel) {
  const auto& f = fitted();
  EXPECT_LT(rel_err(jy(f.sample, f.mle), jy_generic(f.sample, f.mle)), 1e-10);
}

TEST(Information, SingleRegimeJyEqualsJx) {
  const ModelParams theta = random_params(3, 1, 8);
  const Sample s = simulate_stats(theta, {40, 10.0, 9, 1});
  EXPECT_TRUE(jy(s, theta) == jx(s, theta));
}

TEST(Information, OrderingAtMle) {
  const auto& f = fitted();
  const auto ws = weighted_stats(f.sample, f.mle);
  const Eigen::MatrixXd jxm = jx(ws, f.mle), jym = jy(f.sample, f.mle), jxi = jx_inverse(ws, f.mle);
  EXPECT_TRUE(is_positive_definite(jym));
  EXPECT_TRUE(loewner_greater_equal(jxm, jym));
  const Eigen::MatrixXd sig = sandwich(jxi, jym);
  const Eigen::MatrixXd jyi = spd_inverse(jym);
  EXPECT_TRUE(loewner_greater_equal(jyi, jxi));
  EXPECT_TRUE(loewner_greater_equal(jxi, sig));
  EXPECT_TRUE(is_positive_definite(sig));
  for (int i = 0; i < 24; ++i) EXPECT_LT(sig(i, i), jyi(i, i));
}

// With a common horizon every path satisfies sum_x T_x = h, which leaves
// Jx - Jy with exact null directions; unequal horizons remove them.
TEST(Information, MissingInformationRankDependsOnHorizons) {
  const auto& f = fitted();
  const double common = min_eigenvalue(jx(f.sample, f.mle) - jy(f.sample, f.mle));
  EXPECT_LT(std::abs(common), 1e-12);

  Sample mixed = f.sample;
  for (std::size_t k = 0; k < mixed.size(); k += 3) {
    mixed[k].T *= 1.5;
    mixed[k].horizon *= 1.5;
  }
  for (std::size_t k = 1; k < mixed.size(); k += 3) {
    mixed[k].T *= 0.7;
    mixed[k].horizon *= 0.7;
  }
  const auto r = fit(mixed, Method::kEM, f.mle, {1e-10, 20000});
  EXPECT_TRUE(loewner_greater(jx(mixed, r.theta_hat), jy(mixed, r.theta_hat)));
}

TEST(Loewner, Examples) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3), Z = Eigen::MatrixXd::Zero(3, 3);
  EXPECT_TRUE(loewner_greater(I, Z));
  EXPECT_FALSE(loewner_greater(I, I));
  EXPECT_TRUE(loewner_greater_equal(I, I));
  EXPECT_FALSE(loewner_greater(Z, I));
  EXPECT_THROW(loewner_greater(I, Eigen::MatrixXd::Identity(2, 2)), ValidationError);
}

TEST(Psi, RecursionConvergesMonotonically) {
  const auto& f = fitted();
  const auto ws = weighted_stats(f.sample, f.mle);
  const Eigen::MatrixXd jxi = jx_inverse(ws, f.mle), jym = jy(f.sample, f.mle);
  const PsiTrace t = psi_recursion(jxi, jym, {1e-12, 5000});
  ASSERT_TRUE(t.converged);
  EXPECT_TRUE(t.iterates.front().isZero(0.0));
  for (std::size_t i = 1; i < t.iterates.size(); ++i) {
    const Eigen::MatrixXd inc = t.iterates[i] - t.iterates[i - 1];
    ASSERT_GT(min_eigenvalue(inc), -1e-10 * (1.0 + inc.cwiseAbs().maxCoeff())) << "step " << i;
  }
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(24, 24);
  EXPECT_LT((jym * t.limit() - I).cwiseAbs().rowwise().sum().maxCoeff(), 1e-8);
  EXPECT_LT(rel_err(t.limit(), dense_inverse(jym)), 1e-8);
  const double rho = iteration_spectral_radius(jxi, jym);
  EXPECT_NEAR(t.spectral_radius_estimate, rho, 0.05 * rho);
}

TEST(Psi, DefaultToleranceMatchesDenseInverse) {
  const auto& f = fitted();
  const auto ws = weighted_stats(f.sample, f.mle);
  const Eigen::MatrixXd jym = jy(f.sample, f.mle);
  const PsiTrace t = psi_recursion(jx_inverse(ws, f.mle), jym, {1e-10, 5000});
  EXPECT_LT((t.limit() - dense_inverse(jym)).cwiseAbs().maxCoeff() / dense_inverse(jym).cwiseAbs().maxCoeff(),
            1e-8);
}

TEST(Psi, EqualMatricesConvergeImmediately) {
  const Eigen::MatrixXd A = (Eigen::MatrixXd(2, 2) << 2, 0.5, 0.5, 1).finished();
  const Eigen::MatrixXd Ai = dense_inverse(A);
  const PsiTrace t = psi_recursion(Ai, A);
  EXPECT_TRUE(t.converged);
  EXPECT_LE(t.iterations(), 2);
  EXPECT_LT(rel_err(t.limit(), Ai), 1e-14);
}

TEST(Psi, OrderingViolationIsReported) {
  const Eigen::MatrixXd jxm = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd jym = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW(psi_recursion(dense_inverse(jxm), jym), OrderingError);
  EXPECT_THROW(psi_recursion(dense_inverse(jxm), -jym), OrderingError);
}

TEST(Psi, NonConvergenceCarriesTrace) {
  const auto& f = fitted();
  const auto ws = weighted_stats(f.sample, f.mle);
  try {
    psi_recursion(jx_inverse(ws, f.mle), jy(f.sample, f.mle), {1e-10, 3});
    FAIL() << "expected PsiConvergenceError";
  } catch (const PsiConvergenceError& e) {
    EXPECT_EQ(e.trace().iterations(), 3);
    EXPECT_FALSE(e.trace().converged);
  }
}

TEST(Sandwich, SingleRegimeEqualsJyInverse) {
  const ModelParams theta = random_params(2, 1, 3);
  const Sample s = simulate_stats(theta, {60, 10.0, 4, 1});
  const Eigen::MatrixXd jym = jy(s, theta);
  EXPECT_LT(rel_err(sandwich(jx_inverse(s, theta), jym), dense_inverse(jym)), 1e-12);
}

TEST(Huber, SinglePathIsOuterProduct) {
  const ModelParams theta = random_params(2, 2, 5);
  const Sample s = simulate_stats(theta, {1, 10.0, 6, 1});
  const Eigen::VectorXd g = path_score(s.front(), theta);
  const Eigen::MatrixXd scores = path_scores(s, theta);
  EXPECT_LT(rel_err(scores.transpose() * scores, g * g.transpose()), 1e-14);
}

TEST(Huber, ScoresSumToZeroAtMle) {
  const auto& f = fitted();
  EXPECT_LT(path_scores(f.sample, f.mle).colwise().sum().norm() / 500.0, 1e-7);
}

// Information identity: at theta0 and large n the outer product of scores
// approaches Jy, so the Huber sandwich approaches Jy^{-1}.
TEST(Huber, ApproachesInverseInformation) {
  ModelParams theta;
  theta.p = 2;
  theta.M = 2;
  theta.alpha = Eigen::Vector2d(0.5, 0.5);
  theta.phi.resize(2, 2);
  theta.phi << 0.6, 0.4, 0.3, 0.7;
  Eigen::Matrix2d q1, q2;
  q1 << -0.5, 0.5, 1.0, -1.0;
  q2 << -3.0, 3.0, 4.0, -4.0;
  theta.q = {q1, q2};
  const Sample s = simulate_stats(theta, {20000, 10.0, 17, 0});
  const Eigen::MatrixXd v = huber_sandwich(s, theta);
  const Eigen::MatrixXd jyi = dense_inverse(jy(s, theta));
  for (int i = 0; i < v.rows(); ++i) {
    // relative sampling error of a variance estimate ~ sqrt(2/n) ~ 1%; allow 10%
    EXPECT_NEAR(v(i, i), jyi(i, i), 0.1 * jyi(i, i)) << i;
  }
}

}  // namespace
}  // namespace rscmjp
