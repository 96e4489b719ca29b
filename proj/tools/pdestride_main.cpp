// Command-line front end: simulate -> noise -> denoise -> dictionary ->
// solve/stride -> achievability, plus field format conversion.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pdestride/denoise.hpp"
#include "pdestride/dictionary.hpp"
#include "pdestride/errors.hpp"
#include "pdestride/experiments.hpp"
#include "pdestride/field.hpp"
#include "pdestride/manifest.hpp"
#include "pdestride/simulate.hpp"
#include "pdestride/solvers.hpp"
#include "pdestride/stability.hpp"
#include "pdestride/threads.hpp"

namespace ps = pdestride;

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

int run_simulate(const std::string& model, int dims, std::int64_t grid,
                 std::int64_t save_stride, std::int64_t steps, std::uint64_t seed,
                 int ic_seeds, const std::string& ic, const std::string& out,
                 int threads, ps::RunManifest& manifest) {
    std::vector<std::string> artifacts;
    if (model == "burgers") {
        ps::BurgersConfig cfg;
        if (save_stride > 0) {
            cfg.save_stride = save_stride;
            cfg.nt = (cfg.nt - 1) / save_stride + 1;
        }
        if (steps > 0) cfg.nt = steps / cfg.save_stride + 1;
        const ps::Field u = simulate_burgers(cfg);
        ps::save_field(u, out + "_u.json");
        artifacts = {out + "_u.json", out + "_u.bin"};
        manifest.set_config({{"model", "burgers"},
                             {"nx", cfg.nx},
                             {"nt", cfg.nt},
                             {"dt", cfg.dt},
                             {"save_stride", cfg.save_stride}});
    } else if (model == "grayscott") {
        ps::GrayScottConfig cfg;
        cfg.dims = dims;
        if (grid > 0) cfg.grid = grid;
        else if (dims == 2) cfg.grid = 128;
        if (steps > 0) cfg.steps = steps;
        if (save_stride > 0) cfg.save_stride = save_stride;
        cfg.seed = seed;
        cfg.ic_seeds = ic_seeds;
        if (!ic.empty()) {
            const ps::Field iu = ps::load_field(ic + "_u.json");
            const ps::Field iv = ps::load_field(ic + "_v.json");
            const std::int64_t c = cfg.cells();
            cfg.ic_u = std::vector<double>(iu.values.begin(), iu.values.begin() + c);
            cfg.ic_v = std::vector<double>(iv.values.begin(), iv.values.begin() + c);
        }
        auto [u, v] = simulate_gray_scott(cfg, threads);
        ps::save_field(u, out + "_u.json");
        ps::save_field(v, out + "_v.json");
        artifacts = {out + "_u.json", out + "_u.bin", out + "_v.json", out + "_v.bin"};
        manifest.set_config({{"model", "grayscott"},
                             {"dims", cfg.dims},
                             {"grid", cfg.grid},
                             {"steps", cfg.steps},
                             {"save_stride", cfg.save_stride},
                             {"dt", cfg.dt},
                             {"dx", cfg.dx}});
        manifest.add_seed("ic", seed);
    } else {
        throw std::invalid_argument("unknown model '" + model + "'");
    }
    for (const auto& a : artifacts) manifest.add_artifact(a);
    return 0;
}

// Truth supports used by the achievability harness.
std::vector<std::string> default_truth(const std::string& model) {
    if (model == "burgers") return {"u*u_x", "u_xx"};
    throw std::invalid_argument("no built-in truth set for model '" + model + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pdestride: PDE identification via sparse regression and "
                 "stability selection"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = auto)");

    // simulate -----------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "run a ground-truth simulation");
    std::string sim_model, sim_ic, sim_out;
    int sim_dims = 3, sim_ic_seeds = 1;
    std::int64_t sim_grid = 0, sim_stride = 0, sim_steps = 0;
    std::uint64_t sim_seed = 0;
    sim->add_option("--model", sim_model, "burgers|grayscott")->required();
    sim->add_option("--dims", sim_dims, "spatial dimensions for grayscott (2|3)");
    sim->add_option("--grid", sim_grid, "grid points per axis (grayscott)");
    sim->add_option("--save-stride", sim_stride, "keep every S-th time step");
    sim->add_option("--steps", sim_steps, "number of time steps");
    sim->add_option("--seed", sim_seed, "seed for randomized initial conditions");
    sim->add_option("--ic-seeds", sim_ic_seeds,
                    "grayscott: number of scattered perturbation cubes (1 = single "
                    "centered cube)");
    sim->add_option("--ic", sim_ic, "field file prefix overriding the initial condition");
    sim->add_option("--out", sim_out, "output field prefix")->required();

    // noise --------------------------------------------------------------
    auto* noi = app.add_subcommand("noise", "add scaled Gaussian noise to a field");
    std::string noi_in, noi_out;
    double noi_sigma = 0.0;
    std::uint64_t noi_seed = 0;
    noi->add_option("--in", noi_in, "input field .json")->required();
    noi->add_option("--sigma", noi_sigma, "noise level as fraction of std")->required();
    noi->add_option("--seed", noi_seed, "noise seed")->required();
    noi->add_option("--out", noi_out, "output field .json")->required();

    // denoise ------------------------------------------------------------
    auto* den = app.add_subcommand("denoise", "truncated-SVD denoising");
    std::string den_in, den_out, den_report;
    int den_rank = 0;
    den->add_option("--in", den_in, "input field .json")->required();
    den->add_option("--out", den_out, "output field .json")->required();
    den->add_option("--rank", den_rank, "fixed rank (default: elbow rule)");
    den->add_option("--report", den_report, "SVD report .json");

    // dictionary ---------------------------------------------------------
    auto* dict = app.add_subcommand("dictionary", "assemble a regression design");
    std::string dict_fields, dict_target, dict_preset, dict_out;
    int dict_pmax = 0, dict_dmax = 0;
    std::int64_t dict_n = 250;
    std::uint64_t dict_seed = 0;
    double dict_sigma_used = 0.0, dict_region_frac = 0.0;
    dict->add_option("--fields", dict_fields, "comma-separated field .json files")
        ->required();
    dict->add_option("--target", dict_target, "field whose time derivative is the response")
        ->required();
    dict->add_option("--preset", dict_preset, "named dictionary preset");
    dict->add_option("--pmax", dict_pmax, "max monomial degree (with --dmax)");
    dict->add_option("--dmax", dict_dmax, "max derivative order (with --pmax)");
    dict->add_option("--n", dict_n, "number of sample points");
    dict->add_option("--seed", dict_seed, "sampling seed")->required();
    dict->add_option("--sigma-used", dict_sigma_used, "noise level recorded in provenance");
    dict->add_option("--region-frac", dict_region_frac,
                     "sample only a centered cube of this side fraction");
    dict->add_option("--out", dict_out, "output design .json")->required();

    // solve --------------------------------------------------------------
    auto* sol = app.add_subcommand("solve", "one-shot sparse regression");
    std::string sol_design, sol_solver, sol_out;
    double sol_lambda = -1.0;
    int sol_k = 0;
    ps::solvers::SolverOptions sol_opts;
    sol->add_option("--design", sol_design, "design .json")->required();
    sol->add_option("--solver", sol_solver, "lasso|rlasso|iht|ihtd|htp|stridge")
        ->required();
    sol->add_option("--lambda", sol_lambda, "penalty (all solvers except htp)");
    sol->add_option("--k", sol_k, "sparsity level (htp)");
    sol->add_option("--alpha", sol_opts.lasso_alpha, "randomized-lasso weight floor");
    sol->add_option("--ridge", sol_opts.ridge_lambda, "stridge ridge penalty");
    sol->add_option("--maxit", sol_opts.maxit, "outer iteration cap");
    sol->add_option("--subit", sol_opts.subit, "inner iteration cap");
    sol->add_option("--seed", sol_opts.seed, "solver seed");
    sol->add_option("--out", sol_out, "coefficients .json")->required();

    // stride -------------------------------------------------------------
    auto* str = app.add_subcommand("stride", "stability selection over a lambda path");
    std::string str_design, str_solver = "ihtd", str_profile, str_model;
    ps::StabilityParams str_params;
    ps::solvers::SolverOptions str_opts;
    str->add_option("--design", str_design, "design .json")->required();
    str->add_option("--solver", str_solver, "lasso|rlasso|iht|ihtd|stridge");
    str->add_option("--b", str_params.b, "number of subsamples");
    str->add_option("--m", str_params.m, "lambda path length");
    str->add_option("--eps", str_params.epsilon, "path floor as fraction of lambda_max");
    str->add_option("--pith", str_params.pi_threshold, "importance threshold");
    str->add_option("--seed", str_params.seed, "master seed")->required();
    str->add_option("--profile", str_profile, "importance profile .csv")->required();
    str->add_option("--model", str_model, "recovered model .json")->required();

    // achievability ------------------------------------------------------
    auto* ach = app.add_subcommand("achievability", "phase-transition sweep");
    std::string ach_model = "burgers", ach_presets, ach_ns, ach_sigmas,
                ach_mode = "stride", ach_solver = "ihtd", ach_out;
    int ach_reps = 20;
    std::uint64_t ach_seed = 0;
    ach->add_option("--model", ach_model, "source model (burgers)");
    ach->add_option("--preset-list", ach_presets, "e.g. p11,p15,p19")->required();
    ach->add_option("--n-list", ach_ns, "sample sizes, comma separated")->required();
    ach->add_option("--sigma-list", ach_sigmas, "noise levels, comma separated")
        ->required();
    ach->add_option("--reps", ach_reps, "repetitions per design");
    ach->add_option("--mode", ach_mode, "stride|solver_path");
    ach->add_option("--solver", ach_solver, "lasso|rlasso|iht|ihtd|stridge");
    ach->add_option("--seed", ach_seed, "master seed")->required();
    ach->add_option("--out", ach_out, "output table .csv")->required();

    // convert ------------------------------------------------------------
    auto* con = app.add_subcommand("convert", "convert a 1D field between bin and csv");
    std::string con_in, con_out, con_name = "u";
    con->add_option("--in", con_in, "input field (.json or .csv)")->required();
    con->add_option("--out", con_out, "output field (.json or .csv)")->required();
    con->add_option("--name", con_name, "field name for csv import");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    ps::RunManifest manifest(argc, argv);
    const auto ends_with = [](const std::string& s, const std::string& suf) {
        return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
    };

    try {
        std::string manifest_path;
        if (*sim) {
            run_simulate(sim_model, sim_dims, sim_grid, sim_stride, sim_steps, sim_seed,
                         sim_ic_seeds, sim_ic, sim_out, threads, manifest);
            manifest_path = sim_out + ".manifest.json";
        } else if (*noi) {
            const ps::Field in = ps::load_field(noi_in);
            const ps::Field out = ps::add_noise(in, noi_sigma, noi_seed);
            ps::save_field(out, noi_out);
            manifest.set_config({{"sigma", noi_sigma}});
            manifest.add_seed("noise", noi_seed);
            manifest.add_artifact(noi_out);
            manifest.add_artifact(ps::sibling_bin_path(noi_out));
            manifest_path = noi_out + ".manifest.json";
        } else if (*den) {
            const ps::Field in = ps::load_field(den_in);
            auto [out, report] = ps::denoise_field(
                in, den_rank > 0 ? std::optional<int>(den_rank) : std::nullopt);
            ps::save_field(out, den_out);
            manifest.add_artifact(den_out);
            manifest.add_artifact(ps::sibling_bin_path(den_out));
            if (!den_report.empty()) {
                nlohmann::json rj{{"singular_values", report.singular_values},
                                  {"chosen_rank", report.chosen_rank},
                                  {"reconstruction_error", report.reconstruction_error}};
                std::ofstream os(den_report);
                if (!os) throw ps::data_error("cannot write " + den_report);
                os << rj.dump(2) << "\n";
                manifest.add_artifact(den_report);
            }
            manifest.set_config({{"rank", report.chosen_rank}});
            manifest_path = den_out + ".manifest.json";
        } else if (*dict) {
            std::vector<ps::Field> fields;
            std::vector<std::string> names;
            for (const auto& path : split_list(dict_fields)) {
                fields.push_back(ps::load_field(path));
                names.push_back(fields.back().name);
            }
            if (fields.empty()) throw std::invalid_argument("dictionary: no fields given");
            int target = -1;
            for (size_t i = 0; i < names.size(); ++i)
                if (names[i] == dict_target) target = static_cast<int>(i);
            if (target < 0)
                throw std::invalid_argument("dictionary: target '" + dict_target +
                                            "' is not among the loaded fields");
            std::vector<ps::TermSpec> terms;
            if (!dict_preset.empty()) {
                terms = ps::get_preset(dict_preset).terms;
            } else if (dict_pmax > 0 && dict_dmax > 0) {
                terms = ps::enumerate_terms(static_cast<int>(fields.size()), dict_pmax,
                                            dict_dmax, fields[0].dims());
            } else {
                throw std::invalid_argument(
                    "dictionary: give --preset or both --pmax and --dmax");
            }
            const std::int64_t margin = ps::widest_margin(terms);
            ps::IndexBox region = ps::whole_interior(fields[0], margin);
            if (dict_region_frac > 0) {
                for (int a = 0; a < fields[0].dims(); ++a) {
                    const std::int64_t c = fields[0].extents[a] / 2;
                    const std::int64_t half = static_cast<std::int64_t>(
                        dict_region_frac * fields[0].extents[a] / 2.0);
                    region.lo[a] = std::max(region.lo[a], c - half);
                    region.hi[a] = std::min(region.hi[a], c + half);
                }
            }
            const ps::SampleSet samples =
                ps::sample_points(fields[0], region, dict_n, dict_seed, margin);
            ps::DesignSystem sys =
                ps::assemble_design(fields, target, terms, names, samples);
            sys.provenance.sample_seed = dict_seed;
            sys.provenance.sigma = dict_sigma_used;
            ps::save_design(sys, dict_out);
            for (const auto& w : sys.warnings) std::cerr << "warning: " << w << "\n";
            manifest.set_config({{"preset", dict_preset},
                                 {"pmax", dict_pmax},
                                 {"dmax", dict_dmax},
                                 {"n", dict_n},
                                 {"sigma_used", dict_sigma_used}});
            manifest.add_seed("sample", dict_seed);
            manifest.add_artifact(dict_out);
            manifest.add_artifact(ps::sibling_bin_path(dict_out));
            manifest_path = dict_out + ".manifest.json";
        } else if (*sol) {
            const ps::DesignSystem raw = ps::load_design(sol_design);
            const ps::DesignSystem std_sys =
                raw.standardized ? raw : ps::standardize(raw);
            ps::solvers::Coefficients coef;
            if (sol_solver == "htp") {
                if (sol_k < 1) throw std::invalid_argument("solve: htp needs --k >= 1");
                coef = ps::solvers::htp(std_sys.theta, std_sys.ut, sol_k, sol_opts, 0.0,
                                        &std_sys.labels);
            } else {
                if (sol_lambda < 0)
                    throw std::invalid_argument("solve: --lambda is required");
                coef = ps::run_solver(ps::solver_from_name(sol_solver), std_sys.theta,
                                      std_sys.ut, sol_lambda, sol_opts);
            }
            nlohmann::json terms = nlohmann::json::array();
            for (int k : coef.support)
                terms.push_back({{"label", std_sys.labels[k]},
                                 {"coefficient", coef.values[k]}});
            nlohmann::json out{{"support", terms},
                               {"converged", coef.converged},
                               {"iterations", coef.iterations_used},
                               {"solver", sol_solver},
                               {"lambda", sol_lambda},
                               {"k", sol_k}};
            if (!raw.standardized) {
                const auto refit = ps::solvers::ols_refit(raw, coef.support);
                nlohmann::json rf = nlohmann::json::array();
                for (int k : refit.support)
                    rf.push_back({{"label", raw.labels[k]},
                                  {"coefficient", refit.values[k]}});
                out["refit"] = rf;
            }
            std::ofstream os(sol_out);
            if (!os) throw ps::data_error("cannot write " + sol_out);
            os << out.dump(2) << "\n";
            manifest.set_config({{"solver", sol_solver}, {"lambda", sol_lambda}});
            manifest.add_seed("solver", sol_opts.seed);
            manifest.add_artifact(sol_out);
            manifest_path = sol_out + ".manifest.json";
        } else if (*str) {
            str_params.threads = threads;
            const ps::DesignSystem raw = ps::load_design(str_design);
            if (raw.standardized)
                throw ps::data_error("stride: expects a raw (unstandardized) design");
            const ps::StrideResult res = ps::run_stride(
                raw, ps::solver_from_name(str_solver), str_opts, str_params);
            ps::save_profile_csv(res.profile, str_profile);
            ps::save_model_json(res.model, str_model);
            manifest.set_config({{"solver", str_solver},
                                 {"B", str_params.b},
                                 {"M", str_params.m},
                                 {"eps", str_params.epsilon},
                                 {"pith", str_params.pi_threshold}});
            manifest.add_seed("stride", str_params.seed);
            manifest.add_artifact(str_profile);
            manifest.add_artifact(str_model);
            manifest_path = str_model + ".manifest.json";
        } else if (*ach) {
            std::vector<ps::ExperimentDesign> designs;
            for (const auto& ptag : split_list(ach_presets))
                for (const auto& sstr : split_list(ach_sigmas))
                    for (const auto& nstr : split_list(ach_ns)) {
                        ps::ExperimentDesign d;
                        d.model = ach_model;
                        d.preset = ach_model + "-" + ptag;
                        d.n = std::stoll(nstr);
                        d.sigma = std::stod(sstr);
                        d.reps = ach_reps;
                        d.mode = ps::mode_from_name(ach_mode);
                        d.solver = ps::solver_from_name(ach_solver);
                        d.truth = default_truth(ach_model);
                        designs.push_back(std::move(d));
                    }
            ps::SimulationCache cache;
            const auto rows = ps::achievability(designs, ach_seed, cache, threads);
            ps::save_achievability_csv(rows, ach_out);
            manifest.set_config({{"model", ach_model},
                                 {"presets", ach_presets},
                                 {"n_list", ach_ns},
                                 {"sigma_list", ach_sigmas},
                                 {"reps", ach_reps},
                                 {"mode", ach_mode},
                                 {"solver", ach_solver}});
            manifest.add_seed("master", ach_seed);
            manifest.add_artifact(ach_out);
            manifest_path = ach_out + ".manifest.json";
        } else if (*con) {
            if (ends_with(con_in, ".csv")) {
                const ps::Field f = ps::load_field_csv(con_in, con_name);
                ps::save_field(f, con_out);
                manifest.add_artifact(con_out);
                manifest.add_artifact(ps::sibling_bin_path(con_out));
            } else {
                const ps::Field f = ps::load_field(con_in);
                ps::save_field_csv(f, con_out);
                manifest.add_artifact(con_out);
            }
            manifest_path = con_out + ".manifest.json";
        }
        manifest.write(manifest_path);
        return 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ps::data_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ps::numerical_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
