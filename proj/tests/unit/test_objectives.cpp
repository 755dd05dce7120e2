#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sketchstream/objectives.hpp"
#include "sketchstream/stats.hpp"
#include "support/test_support.hpp"

using namespace sketchstream;

namespace {

DenseMatrix multiply(const DenseMatrix& X, const DenseMatrix& Y) {
  DenseMatrix Z(X.rows(), Y.cols());
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (std::size_t k = 0; k < X.cols(); ++k)
      for (std::size_t j = 0; j < Y.cols(); ++j) Z(i, j) += X(i, k) * Y(k, j);
  return Z;
}

// sigma and R by enumerating every single-entry realization of B_1.
SigmaR enumeration_oracle(const DenseMatrix& A, const DenseMatrix& P) {
  const auto nz = A.nonzeros();
  DenseMatrix left(A.rows(), A.rows()), right(A.cols(), A.cols());
  double R = 0.0;
  for (const auto& e : nz) {
    const double p = P(e.row, e.col);
    DenseMatrix Z(A.rows(), A.cols());
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = 0; j < A.cols(); ++j) Z(i, j) = -A(i, j);
    Z(e.row, e.col) += e.value / p;
    const auto ZZt = multiply(Z, Z.transposed());
    const auto ZtZ = multiply(Z.transposed(), Z);
    for (std::size_t q = 0; q < ZZt.data().size(); ++q) left.data()[q] += p * ZZt.data()[q];
    for (std::size_t q = 0; q < ZtZ.data().size(); ++q) right.data()[q] += p * ZtZ.data()[q];
    R = std::max(R, sstest::oracle_spectral_norm(Z));
  }
  return {std::sqrt(std::max(sstest::oracle_spectral_norm(left), sstest::oracle_spectral_norm(right))), R};
}

DenseMatrix alg_probabilities(const DenseMatrix& A, const BernsteinParams& bp) {
  const auto st = stream_of(A);
  return plan_probabilities(A, make_plan(PlanOptions{}, accumulate_row_profile(st), st, bp.s, bp.delta));
}

}  // namespace

TEST(SigmaR, OneByOneIsDeterministic) {
  DenseMatrix A(1, 1, 1.0), P(1, 1, 1.0);
  const auto sr = sigma_R_exact(A, P);
  EXPECT_NEAR(sr.sigma, 0.0, 1e-15);
  EXPECT_NEAR(sr.R, 0.0, 1e-15);
  EXPECT_EQ(eps1(A, P, BernsteinParams::make(2, 10, 0.1)), 0.0);
}

TEST(SigmaR, DiagonalHandExample) {
  DenseMatrix A(2, 2), P(2, 2);
  A(0, 0) = A(1, 1) = 1.0;
  P(0, 0) = P(1, 1) = 0.5;
  const auto sr = sigma_R_exact(A, P);
  EXPECT_NEAR(sr.sigma, 1.0, 1e-12);
  EXPECT_NEAR(sr.R, 1.0, 1e-12);
  const auto tl = sigma_R_tilde(A, P);
  EXPECT_NEAR(tl.sigma_tilde * tl.sigma_tilde, 2.0, 1e-12);
  EXPECT_NEAR(tl.R_tilde, 2.0, 1e-12);
  const auto bp = BernsteinParams::make(4, 100, 0.1);
  const auto rep = eps_chain_report(A, P, bp);
  EXPECT_NEAR(rep.eps2, bp.alpha + bp.beta, 1e-12);
}

TEST(SigmaR, ZeroProbabilityOnNonzeroIsAnError) {
  DenseMatrix A(1, 2, 1.0), P(1, 2);
  P(0, 0) = 1.0;
  EXPECT_THROW(sigma_R_exact(A, P), Error);
  EXPECT_THROW(sigma_R_tilde(A, P), Error);
}

TEST(SigmaR, MatchesEnumerationOracle) {
  Rng rng(61);
  for (int trial = 0; trial < 60; ++trial) {
    const auto A = sstest::random_matrix(1 + rng.below(6), 1 + rng.below(7), 0.6, rng);
    const auto P = sstest::random_distribution(A, rng);
    const auto got = sigma_R_exact(A, P);
    const auto want = enumeration_oracle(A, P);
    EXPECT_NEAR(got.sigma, want.sigma, 1e-9 * std::max(1.0, want.sigma)) << trial;
    EXPECT_NEAR(got.R, want.R, 1e-9 * std::max(1.0, want.R)) << trial;
  }
}

TEST(SigmaR, LargeSidesUseTheIterativeSolver) {
  Rng rng(62);
  for (int trial = 0; trial < 3; ++trial) {
    const auto A = sstest::random_matrix(5, 90, 0.3, rng);
    const auto P = sstest::random_distribution(A, rng);
    const auto got = sigma_R_exact(A, P);
    const auto want = enumeration_oracle(A, P);
    EXPECT_NEAR(got.sigma, want.sigma, 1e-8 * want.sigma);
    EXPECT_NEAR(got.R, want.R, 1e-8 * want.R);
  }
}

TEST(SigmaR, MatchesMonteCarlo) {
  Rng rng(63);
  const auto A = sstest::random_matrix(3, 4, 1.0, rng);
  const auto P = sstest::random_distribution(A, rng);
  const auto nz = A.nonzeros();
  std::vector<double> w;
  for (const auto& e : nz) w.push_back(P(e.row, e.col));
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  std::mt19937_64 gen(7);
  DenseMatrix left(3, 3), right(4, 4);
  double R = 0.0;
  const int draws = 1000000;
  for (int d = 0; d < draws; ++d) {
    const auto& e = nz[pick(gen)];
    DenseMatrix Z(3, 4);
    for (std::size_t q = 0; q < Z.data().size(); ++q) Z.data()[q] = -A.data()[q];
    Z(e.row, e.col) += e.value / P(e.row, e.col);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t j = 0; j < 4; ++j) left(i, k) += Z(i, j) * Z(k, j);
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t l = 0; l < 4; ++l)
        for (std::size_t i = 0; i < 3; ++i) right(j, l) += Z(i, j) * Z(i, l);
    if (d < 2000) R = std::max(R, sstest::oracle_spectral_norm(Z));
  }
  for (double& x : left.data()) x /= draws;
  for (double& x : right.data()) x /= draws;
  const double sigma = std::sqrt(std::max(sstest::oracle_spectral_norm(left), sstest::oracle_spectral_norm(right)));
  const auto got = sigma_R_exact(A, P);
  EXPECT_NEAR(got.sigma, sigma, 5e-3 * sigma);
  EXPECT_NEAR(got.R, R, 5e-4 * R);
}

TEST(SigmaRTilde, SingleRowEqualitiesAndLowerBounds) {
  DenseMatrix A(1, 4);
  A(0, 0) = 1.0;
  A(0, 1) = -2.0;
  A(0, 3) = 0.5;
  const double l1 = 3.5;
  DenseMatrix P(1, 4);
  for (std::size_t j = 0; j < 4; ++j) P(0, j) = std::abs(A(0, j)) / l1;
  const auto tl = sigma_R_tilde(A, P);
  EXPECT_NEAR(tl.sigma_tilde * tl.sigma_tilde, l1 * l1, 1e-12);
  EXPECT_NEAR(tl.R_tilde, l1, 1e-12);

  Rng rng(64);
  for (int trial = 0; trial < 100; ++trial) {
    const auto B = sstest::random_matrix(1 + rng.below(6), 1 + rng.below(6), 0.6, rng);
    const auto Q = sstest::random_distribution(B, rng);
    const auto t = sigma_R_tilde(B, Q);
    double sumz2 = 0.0, total = 0.0;
    for (std::size_t i = 0; i < B.rows(); ++i) {
      double z = 0.0;
      for (std::size_t j = 0; j < B.cols(); ++j) z += std::abs(B(i, j));
      sumz2 += z * z;
      total += z;
    }
    EXPECT_GE(t.sigma_tilde * (1 + 1e-12), std::sqrt(sumz2));
    EXPECT_GE(t.R_tilde * (1 + 1e-12), total);
  }
}

TEST(Lemma3, ProportionalProbabilitiesMinimizeBothRowTerms) {
  Rng rng(65);
  for (int row = 0; row < 10; ++row) {
    std::vector<double> x(2 + rng.below(8));
    for (double& v : x) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.1 + rng.uniform());
    double l1 = 0.0;
    for (double v : x) l1 += std::abs(v);
    for (int t = 0; t < 1000; ++t) {
      std::vector<double> q(x.size());
      double tot = 0.0;
      for (double& v : q) tot += v = 1e-3 + rng.uniform();
      double mx = 0.0, sq = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) {
        mx = std::max(mx, std::abs(x[k]) / (q[k] / tot));
        sq += x[k] * x[k] / (q[k] / tot);
      }
      ASSERT_GE(mx, l1 * (1 - 1e-12));
      ASSERT_GE(sq, l1 * l1 * (1 - 1e-12));
    }
  }
}

TEST(Eps1, DegenerateAndSelfConsistent) {
  const auto bp = BernsteinParams::make(10, 50, 0.05);
  EXPECT_EQ(eps1_from(0.0, 0.0, bp), 0.0);
  EXPECT_NEAR(eps1_from(2.0, 0.0, bp), bp.alpha * 2.0, 1e-15);

  Rng rng(66);
  for (int trial = 0; trial < 200; ++trial) {
    const auto A = sstest::random_matrix(1 + rng.below(5), 1 + rng.below(5), 0.7, rng);
    const auto P = sstest::random_distribution(A, rng);
    const std::uint64_t s = 1 + rng.below(100000);
    const double delta = 0.001 + 0.9 * rng.uniform();
    const auto b = params_for(A, s, delta);
    const auto sr = sigma_R_exact(A, P);
    const double e = eps1_from(sr.sigma, sr.R, b);
    if (e == 0.0) continue;
    const double tail = bernstein_tail(e, sr.sigma, sr.R, A.rows() + A.cols(), s);
    EXPECT_NEAR(tail, delta, 1e-10 * delta) << trial;
  }
}

TEST(EpsilonChain, UnconditionalInequalities) {
  Rng rng(67);
  for (int trial = 0; trial < 100; ++trial) {
    const auto A = sstest::random_matrix(1 + rng.below(6), 1 + rng.below(6), 0.6, rng);
    const auto P = sstest::random_distribution(A, rng);
    const auto r = eps_chain_report(A, P, params_for(A, 1 + rng.below(10000), 0.1));
    ASSERT_TRUE(r.unconditional_chain_holds()) << nlohmann::json(to_json(r)).dump();
    if (A.nonzeros().size() == 1) continue;  // B_1 = A, every epsilon is zero
    EXPECT_GE(r.eps1 / r.eps2, 1.0 / std::sqrt(2.0) - 1e-12);
    EXPECT_LE(r.eps1 / r.eps2, 1.0 + 1e-12);
    EXPECT_DOUBLE_EQ(r.eps4, std::max(r.eps5, r.eps6));
    EXPECT_LE(r.eps4, r.eps3 * (1 + 1e-12));
    EXPECT_LE(r.eps3, 2.0 * r.eps4 * (1 + 1e-12));
  }
}

TEST(Eps5, SingleRowOptimalAndMirror) {
  DenseMatrix A(1, 3);
  A(0, 0) = 2.0;
  A(0, 1) = -1.0;
  A(0, 2) = 1.0;
  DenseMatrix P(1, 3);
  for (std::size_t j = 0; j < 3; ++j) P(0, j) = std::abs(A(0, j)) / 4.0;
  const auto bp = BernsteinParams::make(4, 30, 0.1);
  EXPECT_NEAR(eps5(A, P, bp), (bp.alpha + bp.beta) * 4.0, 1e-12);
  EXPECT_NEAR(eps6(A.transposed(), P.transposed(), bp), eps5(A, P, bp), 1e-15);
}

TEST(Eps5, AlgorithmPlanEqualsZeta) {
  Rng rng(68);
  for (int trial = 0; trial < 50; ++trial) {
    const auto A = sstest::random_matrix(1 + rng.below(8), 1 + rng.below(8), 0.5, rng);
    const auto st = stream_of(A);
    const auto plan = make_plan(PlanOptions{}, accumulate_row_profile(st), st, 1 + rng.below(5000), 0.1);
    const auto P = plan_probabilities(A, plan);
    EXPECT_NEAR(eps5(A, P, *plan.params), *plan.zeta, 1e-9 * *plan.zeta);
  }
}

TEST(ZetaBound, SolvedZetaIsBelowTheQuadraticRoot) {
  Rng rng(69);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<EntryTriplet> e;
    const std::size_t m = 1 + rng.below(20);
    for (std::size_t i = 0; i < m; ++i) e.push_back({i, 0, std::exp(3.0 * rng.normal())});
    const MatrixDims dims{m, 1, m};
    const auto prof = accumulate_row_profile(e, dims);
    const auto bp = BernsteinParams::make(m + 1, 1 + rng.below(1000000), 0.01 + 0.5 * rng.uniform());
    const double zeta = solve_zeta(prof.z, bp).zeta;
    const double root = zeta_upper_bound(prof, bp);
    EXPECT_LE(zeta, root * (1 + 1e-12));
    // The looser form with 2 beta ||A||_1 in place of beta ||A||_1 twice over.
    const double b2 = 2.0 * bp.beta * prof.total_l1;
    EXPECT_LE(root, b2 + std::sqrt(b2 * b2 + 4.0 * bp.alpha * bp.alpha * prof.sum_z_squared()));
    // The root solves zeta^2 - 2 beta ||A||_1 zeta - alpha^2 sum z^2 = 0.
    EXPECT_NEAR(root * root - 2.0 * bp.beta * prof.total_l1 * root,
                bp.alpha * bp.alpha * prof.sum_z_squared(), 1e-10 * root * root);
  }
}

TEST(SampleComplexity, ScalingAndRegression) {
  MatrixStats st;
  st.sr = 13.0;
  st.nd = 3.1e5;
  st.nrd = 3.2e3;
  st.l1 = 1000.0;
  st.spec = 2.0;
  st.sum_row_l1_sq = 5.0e4;
  const MatrixDims dims{100, 10000, 0};
  const auto a = sample_complexity_bound(st, dims, 0.1, 0.1);
  const auto b = sample_complexity_bound(st, dims, 0.05, 0.1);
  EXPECT_NEAR(a.theta_form, 47961885.34341668, 1e-6);
  EXPECT_NEAR(sample_complexity_bound(st, dims, 0.5, 0.1).theta_form, 1929373.879199154, 1e-7);
  EXPECT_TRUE(std::isfinite(a.explicit_form));
  const double L = std::log(10100 / 0.1);
  const double t1 = (4.0 / 3.0) * L * st.l1 / (0.1 * st.spec), t2 = 4.0 * L * st.sum_row_l1_sq / std::pow(0.1 * st.spec, 2);
  EXPECT_NEAR(a.explicit_form, t1 + t2, 1e-9 * (t1 + t2));
  EXPECT_NEAR(b.explicit_form, 2.0 * t1 + 4.0 * t2, 1e-9 * (t1 + t2));
  const auto big = sample_complexity_bound(st, dims, 1e12, 0.1);
  EXPECT_LT(big.theta_form, 1e-6);
  EXPECT_LT(big.explicit_form, 1e-6);
  EXPECT_THROW(sample_complexity_bound(st, dims, 0.0, 0.1), Error);
}

TEST(SampleComplexity, ExplicitBudgetMeetsTheTarget) {
  // At s = explicit_form the zeta upper bound is at most eps ||A||_2.
  Rng rng(70);
  for (int trial = 0; trial < 20; ++trial) {
    const auto A = sstest::random_matrix(4 + rng.below(6), 6 + rng.below(10), 0.5, rng);
    const auto stats = compute_matrix_stats(A);
    const MatrixDims dims{A.rows(), A.cols(), 0};
    const double eps = 0.05 + 0.5 * rng.uniform();
    const auto sc = sample_complexity_bound(stats, dims, eps, 0.1);
    const auto s = static_cast<std::uint64_t>(std::ceil(sc.explicit_form));
    const auto prof = accumulate_row_profile(stream_of(A));
    EXPECT_LE(zeta_upper_bound(prof, BernsteinParams::make(A.rows() + A.cols(), s, 0.1)), eps * stats.spec * (1 + 1e-9));
  }
}

TEST(NearOptimality, SingleRow) {
  // p proportional to |A| minimizes the surrogate eps5 exactly. The exact eps1
  // couples the row and column sides, so its minimizer sits slightly off it.
  DenseMatrix A(1, 4);
  A(0, 0) = 1.0;
  A(0, 1) = -3.0;
  A(0, 2) = 0.5;
  A(0, 3) = 2.0;
  const auto bp = params_for(A, 40, 0.1);
  const auto P = alg_probabilities(A, bp);
  EXPECT_NEAR(eps5(A, P, bp), (bp.alpha + bp.beta) * 6.5, 1e-12);
  OptimalityOptions o;
  o.restarts = 10;
  const auto r = near_optimality_check(A, P, bp, o);
  EXPECT_GE(r.ratio, 1.0 - 1e-6);
  EXPECT_LE(r.ratio, 1.05);
  EXPECT_FALSE(r.flagged);
}

TEST(NearOptimality, RatioNeverBelowOne) {
  Rng rng(71);
  for (int trial = 0; trial < 8; ++trial) {
    DenseMatrix A = sstest::random_matrix(2 + rng.below(2), 2 + rng.below(3), 0.6, rng);
    while (A.nonzeros().size() > 8) A = sstest::random_matrix(2, 3, 0.6, rng);
    const auto bp = params_for(A, 1 + rng.below(200), 0.1);
    OptimalityOptions o;
    o.restarts = 10;
    o.seed = trial;
    const auto r = near_optimality_check(A, alg_probabilities(A, bp), bp, o);
    EXPECT_GE(r.ratio, 1.0 - 1e-6);
    EXPECT_NEAR(std::accumulate(r.p_opt.begin(), r.p_opt.end(), 0.0), 1.0, 1e-9);
  }
}

TEST(NearOptimality, RejectsLargeSupport) {
  DenseMatrix A(3, 3, 1.0);
  const auto bp = params_for(A, 10, 0.1);
  EXPECT_THROW(near_optimality_check(A, alg_probabilities(A, bp), bp), Error);
}
