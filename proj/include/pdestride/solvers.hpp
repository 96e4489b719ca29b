#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdestride/dictionary.hpp"
#include "pdestride/errors.hpp"
#include "pdestride/rng.hpp"

namespace pdestride::solvers {

struct SolverOptions {
    int maxit = 1000;
    int subit = 100;
    double tol = 1e-6;          // relative coefficient change
    double lasso_alpha = 0.2;   // randomized-LASSO weight lower bound, in (0, 1]
    double ridge_lambda = 1e-5;
    std::uint64_t seed = 0;

    void validate() const {
        if (maxit < 1 || subit < 1)
            throw std::invalid_argument("solver options: maxit/subit must be >= 1");
        if (!(tol > 0)) throw std::invalid_argument("solver options: tol must be > 0");
        if (!(lasso_alpha > 0) || lasso_alpha > 1)
            throw std::invalid_argument("solver options: alpha must be in (0, 1]");
    }
};

struct Coefficients {
    Eigen::VectorXd values;
    std::vector<int> support;
    int iterations_used = 0;
    bool converged = false;
};

inline std::vector<int> support_of(const Eigen::VectorXd& v) {
    std::vector<int> s;
    for (Eigen::Index k = 0; k < v.size(); ++k)
        if (v[k] != 0.0) s.push_back(static_cast<int>(k));
    return s;
}

inline double soft_threshold(double x, double gamma) {
    if (gamma < 0) throw std::invalid_argument("soft_threshold: gamma < 0");
    const double m = std::abs(x) - gamma;
    return m > 0 ? (x > 0 ? m : -m) : 0.0;
}

// Zeroes entries with |x| <= sqrt(lambda), keeps the rest unchanged.
inline double hard_threshold(double x, double lambda) {
    if (lambda < 0) throw std::invalid_argument("hard_threshold: lambda < 0");
    return std::abs(x) <= std::sqrt(lambda) ? 0.0 : x;
}

// Squared spectral norm via power iteration on theta^T theta.
inline double lipschitz(const Eigen::MatrixXd& theta) {
    const Eigen::Index p = theta.cols();
    if (p == 0 || theta.norm() == 0)
        throw std::invalid_argument("lipschitz: zero matrix");
    rng::Stream stream(0x5e2d1c3b9a7f4e01ULL);
    Eigen::VectorXd v(p);
    for (Eigen::Index k = 0; k < p; ++k) v[k] = stream.normal();
    v.normalize();
    double prev = 0.0;
    for (int it = 0; it < 10000; ++it) {
        Eigen::VectorXd w = theta.transpose() * (theta * v);
        const double norm = w.norm();
        if (norm == 0) return 0.0;
        v = w / norm;
        if (std::abs(norm - prev) <= 1e-8 * norm && it > 2) return norm;
        prev = norm;
    }
    return prev;
}

enum class Penalty { l1, l0 };

// Smallest penalty at which one solver step from zero keeps the solution
// empty: max_k |theta_k^T ut| for the l1 penalty, (max_k |theta_k^T ut| / L)^2
// for hard thresholding of the first gradient step with mu = 1/L.
inline double lambda_max(const Eigen::MatrixXd& theta, const Eigen::VectorXd& ut,
                         Penalty penalty) {
    const double c = (theta.transpose() * ut).cwiseAbs().maxCoeff();
    if (c == 0) return 0.0;
    if (penalty == Penalty::l1) return c;
    return std::pow(c / lipschitz(theta), 2);
}

namespace detail {

inline void check_finite(const Eigen::MatrixXd& theta, const Eigen::VectorXd& ut) {
    if (!theta.allFinite() || !ut.allFinite())
        throw std::invalid_argument("solver: non-finite entries in the system");
}

// Exact least squares restricted to `support`; rank deficiency is a solver
// failure naming the offending columns.
inline Eigen::VectorXd restricted_lstsq(const Eigen::MatrixXd& theta,
                                        const Eigen::VectorXd& ut,
                                        const std::vector<int>& support,
                                        const std::vector<std::string>* labels = nullptr) {
    const int s = static_cast<int>(support.size());
    Eigen::MatrixXd sub(theta.rows(), s);
    for (int i = 0; i < s; ++i) sub.col(i) = theta.col(support[i]);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
    qr.setThreshold(1e-10);
    if (qr.rank() < s) {
        std::string msg = "restricted least squares is rank deficient";
        if (labels) {
            msg += " over {";
            for (int i = 0; i < s; ++i)
                msg += (i ? ", " : "") + (*labels)[support[i]];
            msg += "}";
        }
        throw solver_failure(msg);
    }
    return qr.solve(ut);
}

}  // namespace detail

// Cyclic coordinate descent for the l1-penalized least squares objective
// 1/2 ||ut - theta xi||^2 + lambda ||xi||_1. Runs until the KKT residual
// drops below 1e-6 * lambda (1e-9 absolute when lambda = 0) or maxit sweeps.
inline Coefficients lasso_cd(const Eigen::MatrixXd& theta, const Eigen::VectorXd& ut,
                             double lambda, const SolverOptions& opts = {}) {
    opts.validate();
    detail::check_finite(theta, ut);
    if (lambda < 0) throw std::invalid_argument("lasso_cd: lambda < 0");
    const Eigen::Index p = theta.cols();
    Eigen::VectorXd colsq(p);
    for (Eigen::Index k = 0; k < p; ++k) colsq[k] = theta.col(k).squaredNorm();

    Coefficients out;
    out.values = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd r = ut;
    const double kkt_tol = lambda > 0 ? 1e-6 * lambda : 1e-9;
    for (int sweep = 1; sweep <= opts.maxit; ++sweep) {
        out.iterations_used = sweep;
        for (Eigen::Index k = 0; k < p; ++k) {
            if (colsq[k] == 0) continue;
            const double old = out.values[k];
            const double rho = theta.col(k).dot(r) + colsq[k] * old;
            const double next = soft_threshold(rho, lambda) / colsq[k];
            if (next != old) {
                out.values[k] = next;
                r += theta.col(k) * (old - next);
            }
        }
        double viol = 0.0;
        const Eigen::VectorXd g = theta.transpose() * r;
        for (Eigen::Index k = 0; k < p; ++k) {
            if (colsq[k] == 0) continue;
            if (out.values[k] != 0)
                viol = std::max(viol, std::abs(g[k] - lambda * (out.values[k] > 0 ? 1 : -1)));
            else
                viol = std::max(viol, std::abs(g[k]) - lambda);
        }
        if (viol <= kkt_tol) {
            out.converged = true;
            break;
        }
    }
    out.support = support_of(out.values);
    return out;
}

// LASSO with per-column penalty weights W_k ~ Uniform[alpha, 1]: rescale
// column k by W_k, solve the plain LASSO, map back xi_k = W_k beta_k.
inline Coefficients randomized_lasso(const Eigen::MatrixXd& theta,
                                     const Eigen::VectorXd& ut, double lambda,
                                     const SolverOptions& opts = {}) {
    opts.validate();
    detail::check_finite(theta, ut);
    rng::Stream stream(rng::derive(opts.seed, "rlasso-weights"));
    const Eigen::Index p = theta.cols();
    Eigen::VectorXd w(p);
    for (Eigen::Index k = 0; k < p; ++k) w[k] = stream.uniform(opts.lasso_alpha, 1.0);
    Eigen::MatrixXd scaled = theta;
    for (Eigen::Index k = 0; k < p; ++k) scaled.col(k) *= w[k];
    Coefficients out = lasso_cd(scaled, ut, lambda, opts);
    for (Eigen::Index k = 0; k < p; ++k) out.values[k] *= w[k];
    out.support = support_of(out.values);
    return out;
}

// Iterative hard thresholding for 1/2 ||ut - theta xi||^2 + lambda ||xi||_0
// with step 1/L. The objective must not increase across iterates; a rise
// beyond slack means the step-size contract was violated.
inline Coefficients iht(const Eigen::MatrixXd& theta, const Eigen::VectorXd& ut,
                        double lambda, const SolverOptions& opts = {},
                        double lipschitz_hint = 0.0) {
    opts.validate();
    detail::check_finite(theta, ut);
    if (lambda < 0) throw std::invalid_argument("iht: lambda < 0");
    const double L = lipschitz_hint > 0 ? lipschitz_hint : lipschitz(theta);
    const Eigen::Index p = theta.cols();

    Coefficients out;
    out.values = Eigen::VectorXd::Zero(p);
    double obj = 0.5 * ut.squaredNorm();
    for (int n = 1; n <= opts.maxit; ++n) {
        out.iterations_used = n;
        const Eigen::VectorXd g = theta.transpose() * (theta * out.values - ut);
        Eigen::VectorXd next = out.values - g / L;
        int nnz = 0;
        for (Eigen::Index k = 0; k < p; ++k) {
            next[k] = hard_threshold(next[k], lambda);
            if (next[k] != 0) ++nnz;
        }
        const double next_obj = 0.5 * (ut - theta * next).squaredNorm() + lambda * nnz;
        if (next_obj > obj + 1e-10 * std::max(1.0, obj))
            throw solver_failure("iht: objective increased");
        const double change = (next - out.values).cwiseAbs().maxCoeff();
        const double scale = std::max(1.0, next.cwiseAbs().maxCoeff());
        out.values = next;
        obj = next_obj;
        if (change <= opts.tol * scale) {
            out.converged = true;
            break;
        }
    }
    out.support = support_of(out.values);
    return out;
}

// IHT with debiasing: each outer iteration takes one hard-thresholded
// gradient step, then refits on the resulting support by gradient descent
// with step 1/L_S, returning early once ||ut - theta u||^2 <= lambda |S|.
inline Coefficients iht_d(const Eigen::MatrixXd& theta, const Eigen::VectorXd& ut,
                          double lambda, const SolverOptions& opts = {},
                          double lipschitz_hint = 0.0) {
    opts.validate();
    detail::check_finite(theta, ut);
    if (lambda < 0) throw std::invalid_argument("iht_d: lambda < 0");
    const double L = lipschitz_hint > 0 ? lipschitz_hint : lipschitz(theta);
    const Eigen::Index p = theta.cols();

    std::map<std::vector<int>, double> lipschitz_cache;
    Coefficients out;
    out.values = Eigen::VectorXd::Zero(p);
    for (int n = 1; n <= opts.maxit; ++n) {
        out.iterations_used = n;
        const Eigen::VectorXd g = theta.transpose() * (theta * out.values - ut);
        Eigen::VectorXd next = out.values - g / L;
        for (Eigen::Index k = 0; k < p; ++k) next[k] = hard_threshold(next[k], lambda);
        const std::vector<int> s = support_of(next);
        if (s.empty()) {
            const bool fixed = (out.values.cwiseAbs().maxCoeff() == 0.0);
            out.values.setZero();
            out.support.clear();
            out.converged = fixed || ut.squaredNorm() == 0;
            return out;
        }

        const int ns = static_cast<int>(s.size());
        Eigen::MatrixXd sub(theta.rows(), ns);
        for (int i = 0; i < ns; ++i) sub.col(i) = theta.col(s[i]);
        auto it = lipschitz_cache.find(s);
        if (it == lipschitz_cache.end())
            it = lipschitz_cache.emplace(s, lipschitz(sub)).first;
        const double ls = it->second;

        Eigen::VectorXd u(ns);
        for (int i = 0; i < ns; ++i) u[i] = next[s[i]];
        Eigen::VectorXd r = ut - sub * u;
        double res2 = r.squaredNorm();
        for (int l = 1; l <= opts.subit; ++l) {
            u += sub.transpose() * r / ls;
            r = ut - sub * u;
            const double next_res2 = r.squaredNorm();
            if (next_res2 > res2 + 1e-10 * std::max(1.0, res2))
                throw solver_failure("iht_d: debias step increased the residual");
            res2 = next_res2;
            if (res2 <= lambda * ns) {
                out.values.setZero();
                for (int i = 0; i < ns; ++i) out.values[s[i]] = u[i];
                out.support = s;
                out.converged = true;
                return out;
            }
        }
        Eigen::VectorXd full = Eigen::VectorXd::Zero(p);
        for (int i = 0; i < ns; ++i) full[s[i]] = u[i];
        const double change = (full - out.values).cwiseAbs().maxCoeff();
        const double scale = std::max(1.0, full.cwiseAbs().maxCoeff());
        out.values = full;
        if (change <= opts.tol * scale) {
            out.converged = true;
            break;
        }
    }
    out.support = support_of(out.values);
    return out;
}

// Hard thresholding pursuit: keep the K largest entries of a gradient
// step, solve exact least squares on that support, stop when the support
// repeats.
inline Coefficients htp(const Eigen::MatrixXd& theta, const Eigen::VectorXd& ut, int k,
                        const SolverOptions& opts = {}, double lipschitz_hint = 0.0,
                        const std::vector<std::string>* labels = nullptr) {
    opts.validate();
    detail::check_finite(theta, ut);
    const Eigen::Index p = theta.cols();
    if (k < 1 || k > p) throw std::invalid_argument("htp: K out of range [1, p]");
    const double L = lipschitz_hint > 0 ? lipschitz_hint : lipschitz(theta);

    Coefficients out;
    out.values = Eigen::VectorXd::Zero(p);
    std::vector<int> prev;
    for (int n = 1; n <= opts.maxit; ++n) {
        out.iterations_used = n;
        const Eigen::VectorXd z =
            out.values - theta.transpose() * (theta * out.values - ut) / L;
        std::vector<int> idx(p);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
            return std::abs(z[a]) > std::abs(z[b]);
        });
        std::vector<int> s(idx.begin(), idx.begin() + k);
        std::sort(s.begin(), s.end());
        const Eigen::VectorXd coef = detail::restricted_lstsq(theta, ut, s, labels);
        out.values.setZero();
        for (int i = 0; i < k; ++i) out.values[s[i]] = coef[i];
        if (s == prev) {
            out.converged = true;
            break;
        }
        prev = std::move(s);
    }
    out.support = support_of(out.values);
    return out;
}

// Sequential thresholding of ridge regression: alternate a ridge solve on
// the surviving support with zeroing entries below the magnitude
// threshold, until the support stabilizes.
inline Coefficients stridge(const Eigen::MatrixXd& theta, const Eigen::VectorXd& ut,
                            double threshold, const SolverOptions& opts = {},
                            const std::vector<std::string>* labels = nullptr) {
    opts.validate();
    detail::check_finite(theta, ut);
    if (threshold < 0) throw std::invalid_argument("stridge: threshold < 0");
    const Eigen::Index p = theta.cols();

    auto ridge_solve = [&](const std::vector<int>& s) -> Eigen::VectorXd {
        if (opts.ridge_lambda <= 0) return detail::restricted_lstsq(theta, ut, s, labels);
        const int ns = static_cast<int>(s.size());
        Eigen::MatrixXd sub(theta.rows(), ns);
        for (int i = 0; i < ns; ++i) sub.col(i) = theta.col(s[i]);
        Eigen::MatrixXd gram = sub.transpose() * sub;
        gram.diagonal().array() += opts.ridge_lambda;
        return gram.ldlt().solve(sub.transpose() * ut);
    };

    std::vector<int> s;
    for (Eigen::Index k = 0; k < p; ++k)
        if (theta.col(k).squaredNorm() > 0) s.push_back(static_cast<int>(k));

    Coefficients out;
    out.values = Eigen::VectorXd::Zero(p);
    for (int n = 1; n <= opts.maxit && !s.empty(); ++n) {
        out.iterations_used = n;
        const Eigen::VectorXd coef = ridge_solve(s);
        std::vector<int> kept;
        for (int i = 0; i < static_cast<int>(s.size()); ++i)
            if (std::abs(coef[i]) >= threshold) kept.push_back(s[i]);
        if (kept == s) {
            for (int i = 0; i < static_cast<int>(s.size()); ++i)
                out.values[s[i]] = coef[i];
            out.converged = true;
            break;
        }
        s = std::move(kept);
    }
    if (s.empty()) out.converged = true;
    if (!out.converged && !s.empty()) {
        // Support still changing at maxit; report the solve on the last set.
        const Eigen::VectorXd coef = ridge_solve(s);
        for (int i = 0; i < static_cast<int>(s.size()); ++i) out.values[s[i]] = coef[i];
    }
    out.support = support_of(out.values);
    return out;
}

// Smallest threshold at which STRidge's first pass empties the support.
inline double stridge_lambda_max(const Eigen::MatrixXd& theta, const Eigen::VectorXd& ut,
                                 const SolverOptions& opts = {}) {
    std::vector<int> s;
    for (Eigen::Index k = 0; k < theta.cols(); ++k)
        if (theta.col(k).squaredNorm() > 0) s.push_back(static_cast<int>(k));
    if (s.empty()) return 0.0;
    const int ns = static_cast<int>(s.size());
    Eigen::MatrixXd sub(theta.rows(), ns);
    for (int i = 0; i < ns; ++i) sub.col(i) = theta.col(s[i]);
    Eigen::MatrixXd gram = sub.transpose() * sub;
    gram.diagonal().array() += std::max(opts.ridge_lambda, 0.0);
    const Eigen::VectorXd coef = gram.ldlt().solve(sub.transpose() * ut);
    return coef.cwiseAbs().maxCoeff() * (1.0 + 1e-12);
}

// Unpenalized least squares on the raw (unstandardized) columns of
// `support`; everything else zero. Adds an intercept column when the
// design carries a constant term, reported at that term's index.
inline Coefficients ols_refit(const DesignSystem& raw, const std::vector<int>& support) {
    if (raw.standardized)
        throw std::invalid_argument("ols_refit: expects the raw (unstandardized) design");
    const Eigen::Index n = raw.n();
    std::vector<int> cols;
    for (int k : support)
        if (k != raw.constant_col) cols.push_back(k);
    const bool intercept = raw.constant_col >= 0;
    const int s = static_cast<int>(cols.size());
    if (s + (intercept ? 1 : 0) > n)
        throw std::invalid_argument("ols_refit: support larger than sample size");
    if (s == 0 && !intercept) {
        Coefficients out;
        out.values = Eigen::VectorXd::Zero(raw.p());
        out.converged = true;
        return out;
    }

    Eigen::MatrixXd sub(n, s + (intercept ? 1 : 0));
    for (int i = 0; i < s; ++i) sub.col(i) = raw.theta.col(cols[i]);
    if (intercept) sub.col(s).setOnes();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
    qr.setThreshold(1e-10);
    if (qr.rank() < sub.cols()) {
        std::string msg = "ols_refit: collinear columns {";
        for (int i = 0; i < s; ++i) msg += (i ? ", " : "") + raw.labels[cols[i]];
        throw solver_failure(msg + "}");
    }
    const Eigen::VectorXd coef = qr.solve(raw.ut);

    Coefficients out;
    out.values = Eigen::VectorXd::Zero(raw.p());
    for (int i = 0; i < s; ++i) out.values[cols[i]] = coef[i];
    if (intercept) out.values[raw.constant_col] = coef[s];
    out.support = support_of(out.values);
    out.converged = true;
    return out;
}

}  // namespace pdestride::solvers
