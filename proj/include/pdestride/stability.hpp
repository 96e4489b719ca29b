#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pdestride/denoise.hpp"
#include "pdestride/dictionary.hpp"
#include "pdestride/errors.hpp"
#include "pdestride/field.hpp"
#include "pdestride/rng.hpp"
#include "pdestride/solvers.hpp"
#include "pdestride/threads.hpp"

namespace pdestride {

enum class SolverId { lasso, rlasso, iht, ihtd, stridge };

inline SolverId solver_from_name(const std::string& name) {
    if (name == "lasso") return SolverId::lasso;
    if (name == "rlasso") return SolverId::rlasso;
    if (name == "iht") return SolverId::iht;
    if (name == "ihtd") return SolverId::ihtd;
    if (name == "stridge") return SolverId::stridge;
    throw std::invalid_argument("unknown solver '" + name +
                                "' (expected lasso|rlasso|iht|ihtd|stridge)");
}

inline std::string solver_name(SolverId id) {
    switch (id) {
        case SolverId::lasso: return "lasso";
        case SolverId::rlasso: return "rlasso";
        case SolverId::iht: return "iht";
        case SolverId::ihtd: return "ihtd";
        case SolverId::stridge: return "stridge";
    }
    return "?";
}

struct LambdaPath {
    double lambda_max = 0.0;
    double epsilon = 0.1;
    int m = 20;
    std::vector<double> values;  // log-spaced, descending, lambda_max .. eps*lambda_max

    std::vector<double> normalized() const {
        std::vector<double> out;
        out.reserve(values.size());
        for (double v : values) out.push_back(v / lambda_max);
        return out;
    }
};

inline LambdaPath build_path(double lambda_max, double epsilon = 0.1, int m = 20) {
    if (!(lambda_max > 0))
        throw numerical_error("build_path: lambda_max is zero, path degenerates");
    if (m < 2) throw std::invalid_argument("build_path: need M >= 2");
    if (!(epsilon > 0) || epsilon > 1)
        throw std::invalid_argument("build_path: epsilon must be in (0, 1]");
    LambdaPath path{lambda_max, epsilon, m, {}};
    path.values.reserve(m);
    for (int j = 0; j < m; ++j)
        path.values.push_back(lambda_max *
                              std::pow(epsilon, static_cast<double>(j) / (m - 1)));
    return path;
}

// lambda_max appropriate for the given solver on a standardized system.
inline double solver_lambda_max(const DesignSystem& std_sys, SolverId id,
                                const solvers::SolverOptions& opts) {
    switch (id) {
        case SolverId::lasso:
        case SolverId::rlasso:
            return solvers::lambda_max(std_sys.theta, std_sys.ut, solvers::Penalty::l1);
        case SolverId::iht:
        case SolverId::ihtd:
            return solvers::lambda_max(std_sys.theta, std_sys.ut, solvers::Penalty::l0);
        case SolverId::stridge:
            return solvers::stridge_lambda_max(std_sys.theta, std_sys.ut, opts);
    }
    return 0.0;
}

// B index sets of floor(n/2) rows each, drawn uniformly without
// replacement, independently per set.
inline std::vector<std::vector<int>> subsample_indices(int n, int b, std::uint64_t seed) {
    if (n < 4) throw std::invalid_argument("subsample_indices: need n >= 4");
    std::vector<std::vector<int>> sets;
    sets.reserve(b);
    const int half = n / 2;
    for (int i = 0; i < b; ++i) {
        rng::Stream stream(rng::derive(seed, "subsample", static_cast<std::uint64_t>(i)));
        std::vector<int> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        for (int j = 0; j < half; ++j)
            std::swap(idx[j], idx[j + static_cast<int>(stream.below(n - j))]);
        idx.resize(half);
        sets.push_back(std::move(idx));
    }
    return sets;
}

struct StabilityParams {
    int b = 250;
    int m = 20;
    double epsilon = 0.1;
    double pi_threshold = 0.8;
    std::uint64_t seed = 0;
    int threads = 0;  // 0 = resolve from env / hardware
};

struct StabilityProfile {
    LambdaPath path;
    Eigen::MatrixXd pi;  // M x p, entries in [0,1], multiples of 1/B
    std::vector<std::string> labels;
    int b = 0;
    std::uint64_t seed = 0;
    int failures = 0;  // (subsample, lambda) cells counted as empty support
    std::vector<std::string> failure_log;
};

inline solvers::Coefficients run_solver(SolverId id, const Eigen::MatrixXd& theta,
                                        const Eigen::VectorXd& ut, double lambda,
                                        const solvers::SolverOptions& opts,
                                        double lipschitz_hint = 0.0) {
    switch (id) {
        case SolverId::lasso: return solvers::lasso_cd(theta, ut, lambda, opts);
        case SolverId::rlasso: return solvers::randomized_lasso(theta, ut, lambda, opts);
        case SolverId::iht: return solvers::iht(theta, ut, lambda, opts, lipschitz_hint);
        case SolverId::ihtd: return solvers::iht_d(theta, ut, lambda, opts, lipschitz_hint);
        case SolverId::stridge: return solvers::stridge(theta, ut, lambda, opts);
    }
    throw std::invalid_argument("run_solver: bad solver id");
}

// The subsampling loop of the stability engine: for each of B random
// half-samples, standardize the sub-design and record the recovered
// support at every path value. pi[j][k] is the fraction of subsamples
// whose support at path value j contains column k. Solver failures count
// as empty supports; more than 10% of failed cells aborts the run.
inline StabilityProfile importance_profile(const DesignSystem& raw, SolverId solver,
                                           solvers::SolverOptions opts,
                                           const LambdaPath& path, int b,
                                           std::uint64_t seed, int threads = 0) {
    if (b < 1) throw std::invalid_argument("importance_profile: need b >= 1");
    const int n = static_cast<int>(raw.n());
    const int p = static_cast<int>(raw.p());
    const int m = static_cast<int>(path.values.size());
    const auto sets = subsample_indices(n, b, seed);

    // Per-subsample support indicators; aggregation below is a fixed-order
    // sum, so the result is independent of the parallel schedule.
    std::vector<std::vector<char>> hits(b, std::vector<char>(m * p, 0));
    std::vector<std::vector<char>> failed(b, std::vector<char>(m, 0));
    std::vector<std::vector<std::string>> logs(b);

    parallel_for(b, threads, [&](std::int64_t i) {
        DesignSystem sub;
        const auto& rows = sets[i];
        sub.theta.resize(rows.size(), p);
        sub.ut.resize(rows.size());
        for (size_t r = 0; r < rows.size(); ++r) {
            sub.theta.row(r) = raw.theta.row(rows[r]);
            sub.ut[r] = raw.ut[rows[r]];
        }
        sub.labels = raw.labels;
        sub.constant_col = raw.constant_col;
        const DesignSystem std_sub = standardize(sub);
        double lips = 0.0;
        if ((solver == SolverId::iht || solver == SolverId::ihtd) &&
            std_sub.theta.norm() > 0)
            lips = solvers::lipschitz(std_sub.theta);
        for (int j = 0; j < m; ++j) {
            solvers::SolverOptions cell_opts = opts;
            cell_opts.seed = rng::derive(seed, "solver-cell",
                                         static_cast<std::uint64_t>(i) * m + j);
            try {
                const auto coef = run_solver(solver, std_sub.theta, std_sub.ut,
                                             path.values[j], cell_opts, lips);
                for (int k : coef.support) hits[i][j * p + k] = 1;
            } catch (const numerical_error& e) {
                failed[i][j] = 1;
                logs[i].push_back("subsample " + std::to_string(i) + ", path point " +
                                  std::to_string(j) + ": " + e.what());
            }
        }
    });

    StabilityProfile profile;
    profile.path = path;
    profile.labels = raw.labels;
    profile.b = b;
    profile.seed = seed;
    Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(m, p);
    for (int i = 0; i < b; ++i) {
        for (int j = 0; j < m; ++j) {
            if (failed[i][j]) ++profile.failures;
            for (int k = 0; k < p; ++k)
                if (hits[i][j * p + k]) ++counts(j, k);
        }
        for (auto& msg : logs[i]) profile.failure_log.push_back(std::move(msg));
    }
    profile.pi = counts.cast<double>() / static_cast<double>(b);
    if (profile.failures * 10 > b * m)
        throw numerical_error("importance_profile: " + std::to_string(profile.failures) +
                              " of " + std::to_string(b * m) +
                              " solver cells failed (> 10%)");
    return profile;
}

// Thresholds the lambda_min row of the profile.
inline std::vector<int> stable_support(const StabilityProfile& profile,
                                       double pi_threshold = 0.8) {
    if (!(pi_threshold > 0) || pi_threshold > 1)
        throw std::invalid_argument("stable_support: pi_threshold must be in (0, 1]");
    std::vector<int> out;
    const Eigen::Index last = profile.pi.rows() - 1;
    for (Eigen::Index k = 0; k < profile.pi.cols(); ++k)
        if (profile.pi(last, k) >= pi_threshold) out.push_back(static_cast<int>(k));
    return out;
}

struct ModelTerm {
    std::string label;
    double coefficient = 0.0;
    double importance = 0.0;
};

struct RecoveredModel {
    std::vector<ModelTerm> support;
    std::int64_t n = 0;
    std::int64_t p = 0;
    double sigma = 0.0;
    std::string solver;
    StabilityParams params;
    solvers::SolverOptions options;
};

struct StrideResult {
    StabilityProfile profile;
    RecoveredModel model;
};

// Design-level engine: path construction on the full standardized design,
// importance profile over B subsamples, stable support at lambda_min,
// least-squares refit on the raw columns. The intercept, when the
// dictionary has a constant term, is reported whenever its refit
// magnitude exceeds 1e-12; by convention it carries importance 1.
inline StrideResult run_stride(const DesignSystem& raw, SolverId solver,
                               solvers::SolverOptions opts, StabilityParams params) {
    const DesignSystem full_std = standardize(raw);
    const double lmax = solver_lambda_max(full_std, solver, opts);
    const LambdaPath path = build_path(lmax, params.epsilon, params.m);
    StrideResult res;
    res.profile = importance_profile(raw, solver, opts, path, params.b, params.seed,
                                     params.threads);
    const std::vector<int> support = stable_support(res.profile, params.pi_threshold);
    const auto refit = solvers::ols_refit(raw, support);

    const Eigen::Index last = res.profile.pi.rows() - 1;
    if (raw.constant_col >= 0 && std::abs(refit.values[raw.constant_col]) > 1e-12)
        res.model.support.push_back(
            {raw.labels[raw.constant_col], refit.values[raw.constant_col], 1.0});
    for (int k : support)
        res.model.support.push_back(
            {raw.labels[k], refit.values[k], res.profile.pi(last, k)});
    res.model.n = raw.n();
    res.model.p = raw.p();
    res.model.sigma = raw.provenance.sigma;
    res.model.solver = solver_name(solver);
    res.model.params = params;
    res.model.options = opts;
    return res;
}

// Pipeline configuration for running the full chain on fields.
struct PipelineConfig {
    std::string preset;          // dictionary preset name
    std::int64_t n_samples = 250;
    std::uint64_t sample_seed = 0;
    std::optional<IndexBox> region;     // default: whole valid interior
    std::optional<int> denoise_rank;    // fixed rank override
    bool denoise = true;                // SVD denoising before derivatives
    double sigma = 0.0;                 // recorded noise level (provenance)
};

// Full chain: denoise -> derivatives/dictionary -> subsampled solver runs
// -> stable support -> refit.
inline StrideResult pde_stride(const std::vector<Field>& fields, int target,
                               const PipelineConfig& cfg, SolverId solver,
                               const solvers::SolverOptions& opts,
                               const StabilityParams& params) {
    const Preset preset = get_preset(cfg.preset);
    std::vector<Field> work;
    work.reserve(fields.size());
    for (const auto& f : fields)
        work.push_back(cfg.denoise ? denoise_field(f, cfg.denoise_rank).first : f);

    const std::int64_t margin = widest_margin(preset.terms);
    const IndexBox region = cfg.region ? *cfg.region : whole_interior(work[0], margin);
    const SampleSet samples =
        sample_points(work[0], region, cfg.n_samples, cfg.sample_seed, margin);

    DesignSystem design =
        assemble_design(work, target, preset.terms, preset.field_names, samples);
    design.provenance.sample_seed = cfg.sample_seed;
    design.provenance.sigma = cfg.sigma;
    return run_stride(design, solver, opts, params);
}

// ---------------------------------------------------------------------------
// Exports.

inline void save_profile_csv(const StabilityProfile& profile, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw data_error("cannot write " + path);
    os << "lambda_star";
    for (const auto& l : profile.labels) os << ',' << l;
    os << '\n';
    char buf[64];
    const auto lam = profile.path.normalized();
    for (Eigen::Index j = 0; j < profile.pi.rows(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", lam[j]);
        os << buf;
        for (Eigen::Index k = 0; k < profile.pi.cols(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", profile.pi(j, k));
            os << ',' << buf;
        }
        os << '\n';
    }
}

inline nlohmann::json model_to_json(const RecoveredModel& model) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : model.support)
        terms.push_back({{"label", t.label},
                         {"coefficient", t.coefficient},
                         {"importance", t.importance}});
    return nlohmann::json{
        {"support", terms},
        {"meta",
         {{"N", model.n},
          {"p", model.p},
          {"sigma", model.sigma},
          {"solver", model.solver},
          {"params",
           {{"B", model.params.b},
            {"M", model.params.m},
            {"epsilon", model.params.epsilon},
            {"pi_threshold", model.params.pi_threshold}}},
          {"options",
           {{"maxit", model.options.maxit},
            {"subit", model.options.subit},
            {"tol", model.options.tol},
            {"alpha", model.options.lasso_alpha},
            {"ridge", model.options.ridge_lambda}}},
          {"seed", model.params.seed}}}};
}

inline void save_model_json(const RecoveredModel& model, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw data_error("cannot write " + path);
    os << model_to_json(model).dump(2) << "\n";
}

}  // namespace pdestride
