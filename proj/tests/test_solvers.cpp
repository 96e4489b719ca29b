#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "pdestride/dictionary.hpp"
#include "pdestride/rng.hpp"
#include "pdestride/solvers.hpp"

using namespace pdestride;
using namespace pdestride::solvers;

namespace {

Eigen::MatrixXd random_matrix(int n, int p, std::uint64_t seed) {
    rng::Stream s(seed);
    Eigen::MatrixXd m(n, p);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s.normal();
    return m;
}

double l0_objective(const Eigen::MatrixXd& theta, const Eigen::VectorXd& ut,
                    const Eigen::VectorXd& xi, double lambda) {
    int nnz = 0;
    for (Eigen::Index k = 0; k < xi.size(); ++k)
        if (xi[k] != 0) ++nnz;
    return 0.5 * (ut - theta * xi).squaredNorm() + lambda * nnz;
}

}  // namespace

TEST_CASE("threshold operator identities") {
    // Soft threshold: shrink toward zero by gamma, clip at zero.
    CHECK(soft_threshold(3.0, 1.0) == 2.0);
    CHECK(soft_threshold(-3.0, 1.0) == -2.0);
    CHECK(soft_threshold(0.5, 1.0) == 0.0);
    CHECK(soft_threshold(-0.5, 1.0) == 0.0);
    CHECK(soft_threshold(1.0, 1.0) == 0.0);
    // Hard threshold: zero iff |x| <= sqrt(lambda).
    CHECK(hard_threshold(3.0, 4.0) == 3.0);
    CHECK(hard_threshold(2.0, 4.0) == 0.0);   // boundary zeroes
    CHECK(hard_threshold(-2.1, 4.0) == -2.1);
    CHECK(hard_threshold(1.9, 4.0) == 0.0);
    for (double x : {-2.0, -0.3, 0.0, 0.7, 5.0}) {
        CHECK(soft_threshold(x, 0.0) == x);
        CHECK(std::abs(soft_threshold(x, 0.4)) <= std::abs(x));
    }
}

TEST_CASE("lambda_max closed forms on the identity design") {
    Eigen::MatrixXd theta = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd ut(2);
    ut << 3.0, -4.0;
    // l1: largest absolute correlation.
    CHECK(lambda_max(theta, ut, Penalty::l1) == doctest::Approx(4.0));
    // l0: (max correlation / L)^2 with L = 1 for the identity.
    CHECK(lambda_max(theta, ut, Penalty::l0) == doctest::Approx(16.0).epsilon(1e-6));
}

TEST_CASE("power iteration matches the largest squared singular value") {
    const Eigen::MatrixXd theta = random_matrix(30, 8, 2);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(theta);
    const double expected = svd.singularValues()[0] * svd.singularValues()[0];
    CHECK(lipschitz(theta) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("lasso satisfies the KKT conditions at its solution") {
    const Eigen::MatrixXd theta = random_matrix(60, 12, 5);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(12);
    truth[2] = 1.5;
    truth[7] = -2.0;
    Eigen::VectorXd ut = theta * truth + 0.01 * random_matrix(60, 1, 6).col(0);

    const double lambda = 0.5;
    const Coefficients c = lasso_cd(theta, ut, lambda);
    CHECK(c.converged);
    const Eigen::VectorXd g = theta.transpose() * (ut - theta * c.values);
    for (Eigen::Index k = 0; k < 12; ++k) {
        if (c.values[k] != 0) {
            // Active coordinates: gradient equals lambda * sign.
            CHECK(g[k] == doctest::Approx(lambda * (c.values[k] > 0 ? 1.0 : -1.0))
                              .epsilon(1e-4));
        } else {
            // Inactive coordinates: gradient within the subdifferential.
            CHECK(std::abs(g[k]) <= lambda * (1.0 + 1e-6));
        }
    }
}

TEST_CASE("penalty-free limits reduce to ordinary least squares") {
    const Eigen::MatrixXd theta = random_matrix(40, 6, 9);
    const Eigen::VectorXd ut = random_matrix(40, 1, 10).col(0);
    const Eigen::VectorXd ols = theta.colPivHouseholderQr().solve(ut);

    const Coefficients l = lasso_cd(theta, ut, 0.0, {});
    CHECK((l.values - ols).cwiseAbs().maxCoeff() < 1e-6);

    SolverOptions opts;
    opts.maxit = 5000;
    opts.tol = 1e-12;
    const Coefficients h = iht(theta, ut, 0.0, opts);
    CHECK((h.values - ols).cwiseAbs().maxCoeff() < 1e-5);

    // STRidge with a vanishing ridge penalty and lambda = 0 keeps all
    // columns and solves the same normal equations.
    SolverOptions ropts;
    ropts.ridge_lambda = 0.0;
    const Coefficients s = stridge(theta, ut, 0.0, ropts);
    CHECK((s.values - ols).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("orthonormal designs have closed-form solutions") {
    // QR of a random matrix gives orthonormal columns.
    const Eigen::MatrixXd base = random_matrix(50, 8, 13);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(base);
    const Eigen::MatrixXd q =
        Eigen::MatrixXd(qr.householderQ()) * Eigen::MatrixXd::Identity(50, 8);
    const Eigen::VectorXd ut = random_matrix(50, 1, 14).col(0);
    const Eigen::VectorXd corr = q.transpose() * ut;

    const double lambda = 0.3;
    const Coefficients l = lasso_cd(q, ut, lambda);
    for (Eigen::Index k = 0; k < 8; ++k)
        CHECK(l.values[k] == doctest::Approx(soft_threshold(corr[k], lambda))
                                 .epsilon(1e-6).scale(1.0));

    const double l0 = 0.02;
    const Coefficients h = iht(q, ut, l0);
    for (Eigen::Index k = 0; k < 8; ++k)
        CHECK(h.values[k] == doctest::Approx(hard_threshold(corr[k], l0))
                                 .epsilon(1e-5).scale(1.0));
}

TEST_CASE("iht objective is monitored and decreases to a fixed point") {
    const Eigen::MatrixXd theta = random_matrix(80, 10, 21);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(10);
    truth[1] = 2.0;
    truth[8] = -1.0;
    const Eigen::VectorXd ut = theta * truth;
    const double lambda = 0.5;

    const Coefficients c = iht(theta, ut, lambda);
    CHECK(c.converged);
    // The converged point cannot be beaten by re-running from it.
    const double obj = l0_objective(theta, ut, c.values, lambda);
    CHECK(obj <= l0_objective(theta, ut, Eigen::VectorXd::Zero(10), lambda));

    // Feeding a wildly wrong Lipschitz hint (too-large steps) trips the
    // monotonicity guard instead of silently diverging.
    CHECK_THROWS_AS(iht(theta, ut, lambda, {}, 1e-8), solver_failure);
}

TEST_CASE("iht_d recovers a planted sparse model and debiases it") {
    const Eigen::MatrixXd theta = random_matrix(100, 12, 31);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(12);
    truth[3] = 1.0;
    truth[9] = -0.8;
    const Eigen::VectorXd ut = theta * truth + 0.001 * random_matrix(100, 1, 32).col(0);

    const Coefficients c = iht_d(theta, ut, 0.05);
    CHECK(c.support == std::vector<int>{3, 9});
    CHECK(c.values[3] == doctest::Approx(1.0).epsilon(0.01));
    CHECK(c.values[9] == doctest::Approx(-0.8).epsilon(0.01));
}

TEST_CASE("htp recovers supports of a requested size") {
    const Eigen::MatrixXd theta = random_matrix(90, 15, 41);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(15);
    truth[0] = 2.0;
    truth[7] = 1.0;
    truth[14] = -1.5;
    const Eigen::VectorXd ut = theta * truth;

    const Coefficients c = htp(theta, ut, 3);
    CHECK(c.support == std::vector<int>{0, 7, 14});
    CHECK(c.values[0] == doctest::Approx(2.0).epsilon(1e-8));
    CHECK_THROWS(htp(theta, ut, 0));
    CHECK_THROWS(htp(theta, ut, 16));
}

TEST_CASE("stridge thresholds sequentially and keeps large coefficients") {
    const Eigen::MatrixXd theta = random_matrix(70, 10, 51);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(10);
    truth[2] = 3.0;
    truth[5] = -2.0;
    const Eigen::VectorXd ut = theta * truth + 0.01 * random_matrix(70, 1, 52).col(0);

    const Coefficients c = stridge(theta, ut, 0.5);
    CHECK(c.support == std::vector<int>{2, 5});
    CHECK(c.values[2] == doctest::Approx(3.0).epsilon(0.01));
    CHECK(c.values[5] == doctest::Approx(-2.0).epsilon(0.01));
    // The path anchor leaves the all-zero model at lambda_max.
    const double lmax = stridge_lambda_max(theta, ut);
    CHECK(stridge(theta, ut, lmax).support.empty());
}

TEST_CASE("randomized lasso is deterministic in its seed") {
    const Eigen::MatrixXd theta = random_matrix(50, 9, 61);
    const Eigen::VectorXd ut = random_matrix(50, 1, 62).col(0);
    SolverOptions a;
    a.seed = 5;
    SolverOptions b;
    b.seed = 6;
    const Coefficients c1 = randomized_lasso(theta, ut, 0.2, a);
    const Coefficients c2 = randomized_lasso(theta, ut, 0.2, a);
    const Coefficients c3 = randomized_lasso(theta, ut, 0.2, b);
    CHECK((c1.values - c2.values).norm() == 0.0);
    CHECK((c1.values - c3.values).norm() > 0.0);
}

TEST_CASE("solvers reject invalid inputs") {
    Eigen::MatrixXd theta = random_matrix(10, 3, 71);
    Eigen::VectorXd ut = random_matrix(10, 1, 72).col(0);
    CHECK_THROWS(lasso_cd(theta, ut, -1.0));
    CHECK_THROWS(iht(theta, ut, -1.0));
    theta(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS(lasso_cd(theta, ut, 0.1));
}

TEST_CASE("iht_d matches brute-force best subsets on small problems") {
    // 50 random 2-sparse problems with p <= 10, N = 50, SNR >= 20. For
    // each trial, an exhaustive search over all 2^p supports (with exact
    // least-squares refit per support) gives the global optimum of the l0
    // objective at every value of a 20-point lambda path. The trial counts
    // as a hit when iht_d returns exactly the oracle support for at least
    // one path value; at least 90% of trials must hit.
    const int trials = 50;
    int hits = 0;
    for (int trial = 0; trial < trials; ++trial) {
        rng::Stream s(1000 + trial);
        const int n = 50, p = 8 + (trial % 3);  // p in {8, 9, 10}
        Eigen::MatrixXd theta(n, p);
        for (Eigen::Index i = 0; i < theta.size(); ++i) theta.data()[i] = s.normal();
        for (int k = 0; k < p; ++k) theta.col(k) /= theta.col(k).norm();
        Eigen::VectorXd truth = Eigen::VectorXd::Zero(p);
        const int k1 = static_cast<int>(s.below(p));
        int k2 = static_cast<int>(s.below(p));
        if (k2 == k1) k2 = (k2 + 1) % p;
        truth[k1] = 1.0 + s.uniform01();
        truth[k2] = -(1.0 + s.uniform01());
        const Eigen::VectorXd signal = theta * truth;
        // Noise std set to signal std / 20 keeps the SNR at 20.
        const double noise_std =
            std::sqrt(signal.squaredNorm() / n) / 20.0;
        Eigen::VectorXd ut = signal;
        for (Eigen::Index i = 0; i < n; ++i) ut[i] += noise_std * s.normal();

        // Least-squares residual of every support, computed once; the
        // oracle support at a given lambda minimizes res2/2 + lambda*|S|.
        std::vector<double> res2(1u << p);
        std::vector<int> card(1u << p);
        res2[0] = ut.squaredNorm();
        card[0] = 0;
        for (unsigned mask = 1; mask < (1u << p); ++mask) {
            std::vector<int> sup;
            for (int k = 0; k < p; ++k)
                if (mask & (1u << k)) sup.push_back(k);
            Eigen::MatrixXd sub(n, sup.size());
            for (size_t i = 0; i < sup.size(); ++i) sub.col(i) = theta.col(sup[i]);
            const Eigen::VectorXd beta = sub.colPivHouseholderQr().solve(ut);
            res2[mask] = (ut - sub * beta).squaredNorm();
            card[mask] = static_cast<int>(sup.size());
        }

        const double lmax = lambda_max(theta, ut, Penalty::l0);
        bool hit = false;
        for (int j = 0; j < 20 && !hit; ++j) {
            const double lambda = lmax * std::pow(0.1, j / 19.0);
            unsigned best_mask = 0;
            double best = 0.5 * res2[0];
            for (unsigned mask = 1; mask < (1u << p); ++mask) {
                const double obj = 0.5 * res2[mask] + lambda * card[mask];
                if (obj < best) {
                    best = obj;
                    best_mask = mask;
                }
            }
            try {
                const Coefficients c = iht_d(theta, ut, lambda);
                unsigned got = 0;
                for (int k : c.support) got |= (1u << k);
                if (got == best_mask) hit = true;
            } catch (const solver_failure&) {
            }
        }
        if (hit) ++hits;
    }
    CHECK(hits >= 45);
}

TEST_CASE("ols refit uses raw columns and honors the intercept convention") {
    DesignSystem raw;
    const int n = 30;
    raw.theta = random_matrix(n, 4, 81);
    raw.theta.col(0).setOnes();  // constant term
    raw.constant_col = 0;
    raw.labels = {"1", "a", "b", "c"};
    raw.ut = 0.7 * Eigen::VectorXd::Ones(n) + 2.0 * raw.theta.col(2);

    const Coefficients c = ols_refit(raw, {2});
    CHECK(c.values[2] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(c.values[0] == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(c.values[1] == 0.0);
    CHECK(c.values[3] == 0.0);

    // Standardized designs are rejected; collinear supports fail loudly.
    DesignSystem stdd = raw;
    stdd.standardized = true;
    CHECK_THROWS(ols_refit(stdd, {2}));
    DesignSystem coll = raw;
    coll.theta.col(3) = coll.theta.col(2);
    CHECK_THROWS_AS(ols_refit(coll, {2, 3}), solver_failure);
}
