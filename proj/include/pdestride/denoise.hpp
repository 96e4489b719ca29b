#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pdestride/errors.hpp"
#include "pdestride/field.hpp"

namespace pdestride {

struct SvdReport {
    std::vector<double> singular_values;  // descending
    int chosen_rank = 0;
    double reconstruction_error = 0.0;  // Frobenius norm of the discarded part
};

// Elbow of a descending singular-value curve: the interior position of
// the log spectrum furthest below the chord joining its endpoints (the
// steep-decay-to-noise-floor junction), returned as the rank (number of
// leading values kept). Strict comparison ties break toward the smallest
// rank, so a featureless flat spectrum yields rank 1.
inline int detect_elbow(const std::vector<double>& s) {
    const int m = static_cast<int>(s.size());
    if (m < 3) throw std::invalid_argument("detect_elbow: need at least 3 values");
    for (int i = 0; i < m; ++i) {
        if (s[i] < 0) throw std::invalid_argument("detect_elbow: negative value");
        if (i > 0 && s[i] > s[i - 1])
            throw std::invalid_argument("detect_elbow: values not descending");
    }
    const double delta = 1e-12 * s[0];
    std::vector<double> f(m);
    for (int i = 0; i < m; ++i) f[i] = std::log(s[i] + delta);
    const double slope = (f[m - 1] - f[0]) / static_cast<double>(m - 1);
    int best = 1;
    double best_gap = -std::numeric_limits<double>::infinity();
    for (int i = 1; i + 1 < m; ++i) {
        const double gap = (f[0] + slope * i) - f[i];
        if (gap > best_gap) {
            best_gap = gap;
            best = i;
        }
    }
    return best;
}

namespace detail {

struct ThinSvd {
    Eigen::MatrixXd u;        // m x r
    Eigen::VectorXd sigma;    // r, descending
    Eigen::MatrixXd v;        // n x r
};

// Thin SVD of an m x n matrix. Small or balanced problems go through
// BDCSVD; strongly rectangular ones through an eigendecomposition of the
// small Gram matrix, which is accurate enough for denoising and far
// cheaper when one dimension is huge.
inline ThinSvd thin_svd(const Eigen::MatrixXd& a) {
    const Eigen::Index m = a.rows(), n = a.cols();
    ThinSvd out;
    if (std::max(m, n) <= 2000) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
        out.u = svd.matrixU();
        out.sigma = svd.singularValues();
        out.v = svd.matrixV();
        return out;
    }
    const bool tall = m >= n;
    const Eigen::MatrixXd gram = tall ? Eigen::MatrixXd(a.transpose() * a)
                                      : Eigen::MatrixXd(a * a.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const Eigen::Index r = gram.rows();
    out.sigma.resize(r);
    Eigen::MatrixXd w(r, r);
    for (Eigen::Index i = 0; i < r; ++i) {  // eigenvalues come ascending
        out.sigma[i] = std::sqrt(std::max(eig.eigenvalues()[r - 1 - i], 0.0));
        w.col(i) = eig.eigenvectors().col(r - 1 - i);
    }
    if (tall) {
        out.v = w;
        out.u.resize(m, r);
        for (Eigen::Index i = 0; i < r; ++i)
            out.u.col(i) = out.sigma[i] > 0 ? Eigen::VectorXd(a * w.col(i) / out.sigma[i])
                                            : Eigen::VectorXd::Zero(m);
    } else {
        out.u = w;
        out.v.resize(n, r);
        for (Eigen::Index i = 0; i < r; ++i)
            out.v.col(i) = out.sigma[i] > 0
                               ? Eigen::VectorXd(a.transpose() * w.col(i) / out.sigma[i])
                               : Eigen::VectorXd::Zero(n);
    }
    return out;
}

}  // namespace detail

// Truncated-SVD denoising of the field's (time x space) data matrix. The
// rank defaults to the elbow of the singular-value curve.
inline std::pair<Field, SvdReport> denoise_field(const Field& field,
                                                 std::optional<int> rank = std::nullopt) {
    const std::int64_t rows = field.nt;
    const std::int64_t cols = field.spatial_size();
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        mat(field.values.data(), rows, cols);

    const detail::ThinSvd svd = detail::thin_svd(mat);
    const int nsv = static_cast<int>(svd.sigma.size());

    SvdReport report;
    report.singular_values.assign(svd.sigma.data(), svd.sigma.data() + nsv);
    int r;
    if (rank) {
        r = *rank;
        if (r < 1 || r > nsv)
            throw std::invalid_argument("denoise_field: rank out of range [1, " +
                                        std::to_string(nsv) + "]");
    } else {
        r = detect_elbow(report.singular_values);
    }
    report.chosen_rank = r;
    double err2 = 0.0;
    for (int i = r; i < nsv; ++i) err2 += svd.sigma[i] * svd.sigma[i];
    report.reconstruction_error = std::sqrt(err2);

    const Eigen::MatrixXd recon = svd.u.leftCols(r) *
                                  svd.sigma.head(r).asDiagonal() *
                                  svd.v.leftCols(r).transpose();
    Field out = field;
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        out.values.data(), rows, cols) = recon;
    return {std::move(out), std::move(report)};
}

}  // namespace pdestride
