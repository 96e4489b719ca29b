#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "pdestride/dictionary.hpp"
#include "pdestride/errors.hpp"
#include "pdestride/field.hpp"
#include "pdestride/simulate.hpp"
#include "pdestride/solvers.hpp"
#include "pdestride/stability.hpp"
#include "pdestride/threads.hpp"

namespace pdestride {

enum class TrialMode { solver_path, stride };

inline TrialMode mode_from_name(const std::string& name) {
    if (name == "solver_path") return TrialMode::solver_path;
    if (name == "stride") return TrialMode::stride;
    throw std::invalid_argument("unknown mode '" + name +
                                "' (expected solver_path|stride)");
}

// One cell of the phase-transition sweep: sample size, dictionary preset,
// noise level, repetition count, and the ground-truth support.
struct ExperimentDesign {
    std::string model = "burgers";
    std::string preset;           // dictionary preset name
    std::int64_t n = 250;
    double sigma = 0.0;
    int reps = 20;
    TrialMode mode = TrialMode::stride;
    SolverId solver = SolverId::ihtd;
    solvers::SolverOptions options;
    StabilityParams stability;    // used in stride mode (seed set per trial)
    std::vector<std::string> truth;  // labels of the true support

    void validate() const {
        if (reps < 1) throw std::invalid_argument("design: reps must be >= 1");
        if (n < 4) throw std::invalid_argument("design: n too small");
        if (truth.empty()) throw std::invalid_argument("design: empty truth set");
    }
};

struct AchievabilityRow {
    ExperimentDesign design;
    int success_count = 0;
    double success_frequency = 0.0;
    double variance = 0.0;  // Bernoulli estimate f(1-f)/reps
};

// Clean simulations are expensive relative to a trial, so they are run
// once per model and shared; each trial only re-draws noise and sample
// points.
class SimulationCache {
  public:
    const std::vector<Field>& get(const std::string& model) {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = cache_.find(model);
        if (it != cache_.end()) return it->second;
        std::vector<Field> fields;
        if (model == "burgers") {
            fields.push_back(simulate_burgers(BurgersConfig{}));
        } else if (model == "grayscott" || model == "grayscott-3d") {
            auto [u, v] = simulate_gray_scott(GrayScottConfig{});
            fields.push_back(std::move(u));
            fields.push_back(std::move(v));
        } else if (model == "grayscott-2d") {
            GrayScottConfig cfg;
            cfg.dims = 2;
            cfg.grid = 128;
            auto [u, v] = simulate_gray_scott(cfg);
            fields.push_back(std::move(u));
            fields.push_back(std::move(v));
        } else {
            throw std::invalid_argument("unknown model '" + model + "'");
        }
        return cache_.emplace(model, std::move(fields)).first->second;
    }

  private:
    std::mutex mu_;
    std::map<std::string, std::vector<Field>> cache_;
};

namespace detail {

inline std::set<std::string> label_set(const std::vector<std::string>& labels,
                                       const std::vector<int>& support) {
    std::set<std::string> out;
    for (int k : support) out.insert(labels[k]);
    return out;
}

}  // namespace detail

// One recovery attempt: noise -> denoise -> sample -> assemble -> solve.
// Success means exact support equality with design.truth (no missing and
// no extra terms).
inline bool run_trial(const ExperimentDesign& design, const std::vector<Field>& clean,
                      std::uint64_t trial_seed, int target = 0) {
    design.validate();
    const Preset preset = get_preset(design.preset);
    {
        const std::vector<std::string> labels = preset.labels();
        const std::set<std::string> dict(labels.begin(), labels.end());
        for (const auto& t : design.truth)
            if (!dict.count(t)) return false;  // misconfigured truth: never succeeds
    }

    std::vector<Field> work;
    work.reserve(clean.size());
    for (size_t i = 0; i < clean.size(); ++i) {
        Field noisy = add_noise(clean[i], design.sigma,
                                rng::derive(trial_seed, "trial-noise", i));
        work.push_back(design.sigma > 0 ? denoise_field(noisy).first : std::move(noisy));
    }

    const std::int64_t margin = widest_margin(preset.terms);
    const SampleSet samples =
        sample_points(work[0], whole_interior(work[0], margin), design.n,
                      rng::derive(trial_seed, "trial-sample"), margin);
    const DesignSystem raw =
        assemble_design(work, target, preset.terms, preset.field_names, samples);
    const std::set<std::string> truth(design.truth.begin(), design.truth.end());

    if (design.mode == TrialMode::stride) {
        StabilityParams params = design.stability;
        params.seed = rng::derive(trial_seed, "trial-stride");
        params.threads = 1;  // trials are already parallel
        try {
            const StrideResult res = run_stride(raw, design.solver, design.options, params);
            // Success is judged on the thresholded stable support itself; the
            // refit intercept is bookkeeping, not a recovered term.
            return detail::label_set(raw.labels,
                                     stable_support(res.profile, params.pi_threshold)) ==
                   truth;
        } catch (const numerical_error&) {
            return false;
        }
    }

    // solver_path mode: bare solver on the full standardized design;
    // success if any path point recovers the truth exactly.
    const DesignSystem std_sys = standardize(raw);
    double lmax;
    try {
        lmax = solver_lambda_max(std_sys, design.solver, design.options);
    } catch (const numerical_error&) {
        return false;
    }
    if (!(lmax > 0)) return false;
    const LambdaPath path = build_path(lmax, design.stability.epsilon, design.stability.m);
    double lips = 0.0;
    if (design.solver == SolverId::iht || design.solver == SolverId::ihtd)
        lips = solvers::lipschitz(std_sys.theta);
    for (size_t j = 0; j < path.values.size(); ++j) {
        solvers::SolverOptions opts = design.options;
        opts.seed = rng::derive(trial_seed, "trial-path", j);
        try {
            const auto coef = run_solver(design.solver, std_sys.theta, std_sys.ut,
                                         path.values[j], opts, lips);
            if (detail::label_set(raw.labels, coef.support) == truth) return true;
        } catch (const numerical_error&) {
            continue;
        }
    }
    return false;
}

// Runs reps trials per design with seeds derived from (master, design
// index, trial index), so re-runs and cross-solver comparisons pair up.
inline std::vector<AchievabilityRow> achievability(std::vector<ExperimentDesign> designs,
                                                   std::uint64_t master_seed,
                                                   SimulationCache& cache,
                                                   int threads = 0) {
    if (designs.empty()) throw std::invalid_argument("achievability: no designs");
    for (auto& d : designs) d.validate();

    // Warm the cache serially; trials then only read it.
    std::vector<const std::vector<Field>*> clean(designs.size());
    for (size_t d = 0; d < designs.size(); ++d) clean[d] = &cache.get(designs[d].model);

    std::vector<std::int64_t> offset(designs.size() + 1, 0);
    for (size_t d = 0; d < designs.size(); ++d)
        offset[d + 1] = offset[d] + designs[d].reps;
    std::vector<char> success(offset.back(), 0);

    parallel_for(offset.back(), threads, [&](std::int64_t task) {
        const size_t d = static_cast<size_t>(
            std::upper_bound(offset.begin(), offset.end(), task) - offset.begin() - 1);
        const std::int64_t t = task - offset[d];
        const std::uint64_t seed = rng::derive(
            rng::derive(master_seed, "design", static_cast<std::uint64_t>(d)), "trial",
            static_cast<std::uint64_t>(t));
        success[task] = run_trial(designs[d], *clean[d], seed) ? 1 : 0;
    });

    std::vector<AchievabilityRow> rows;
    rows.reserve(designs.size());
    for (size_t d = 0; d < designs.size(); ++d) {
        AchievabilityRow row;
        row.design = designs[d];
        for (std::int64_t t = offset[d]; t < offset[d + 1]; ++t)
            row.success_count += success[t];
        const double f = static_cast<double>(row.success_count) / designs[d].reps;
        row.success_frequency = f;
        row.variance = f * (1.0 - f) / designs[d].reps;
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        const auto pa = get_preset(a.design.preset).terms.size();
        const auto pb = get_preset(b.design.preset).terms.size();
        if (pa != pb) return pa < pb;
        if (a.design.sigma != b.design.sigma) return a.design.sigma < b.design.sigma;
        return a.design.n < b.design.n;
    });
    return rows;
}

// Same trial protocol across several solvers with shared seeds per (grid
// cell, trial), giving a paired comparison. Returns one row list per
// solver, in the order given.
inline std::vector<std::pair<SolverId, std::vector<AchievabilityRow>>> compare_solvers(
    const std::vector<ExperimentDesign>& grid, const std::vector<SolverId>& solver_list,
    std::uint64_t master_seed, SimulationCache& cache, int threads = 0) {
    std::vector<std::pair<SolverId, std::vector<AchievabilityRow>>> out;
    for (SolverId s : solver_list) {
        std::vector<ExperimentDesign> designs = grid;
        for (auto& d : designs) {
            d.mode = TrialMode::solver_path;
            d.solver = s;
        }
        // Same master seed and design indices for every solver: trial
        // seeds, and hence noise and sampling, pair up exactly.
        out.emplace_back(s, achievability(designs, master_seed, cache, threads));
    }
    return out;
}

inline void save_achievability_csv(const std::vector<AchievabilityRow>& rows,
                                   const std::string& path) {
    std::ofstream os(path);
    if (!os) throw data_error("cannot write " + path);
    os << "model,p,sigma,n,reps,successes,frequency,variance\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%zu,%.17g,%lld,%d,%d,%.17g,%.17g\n",
                      r.design.model.c_str(), get_preset(r.design.preset).terms.size(),
                      r.design.sigma, static_cast<long long>(r.design.n), r.design.reps,
                      r.success_count, r.success_frequency, r.variance);
        os << buf;
    }
}

}  // namespace pdestride
