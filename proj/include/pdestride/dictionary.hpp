#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pdestride/errors.hpp"
#include "pdestride/field.hpp"

namespace pdestride {

inline constexpr const char* kAxisNames = "xyz";

struct DerivFactor {
    int field = 0;
    int axis = 0;
    int order = 1;

    bool operator==(const DerivFactor&) const = default;
};

// One candidate PDE term: a monomial in the fields times at most one
// derivative factor. powers[f] is the exponent of field f.
struct TermSpec {
    std::vector<int> powers;
    std::optional<DerivFactor> deriv;

    bool is_constant() const {
        return !deriv && std::all_of(powers.begin(), powers.end(),
                                     [](int p) { return p == 0; });
    }

    std::string label(const std::vector<std::string>& field_names) const {
        std::string s;
        for (size_t f = 0; f < powers.size(); ++f) {
            if (powers[f] == 0) continue;
            if (!s.empty()) s += '*';
            s += field_names[f];
            if (powers[f] > 1) s += '^' + std::to_string(powers[f]);
        }
        if (deriv) {
            if (!s.empty()) s += '*';
            s += field_names[deriv->field] + "_" +
                 std::string(deriv->order, kAxisNames[deriv->axis]);
        }
        return s.empty() ? "1" : s;
    }

    bool operator==(const TermSpec&) const = default;
};

// Deterministic term enumeration: the constant, then monomials of total
// degree 1..p_max (ascending degree, fields in order), then each monomial
// of degree 0..p_max times each single-field pure-axis derivative of
// order 1..d_max. No mixed derivatives.
inline std::vector<TermSpec> enumerate_terms(int n_fields, int p_max, int d_max,
                                             int spatial_dims) {
    if (p_max < 1 || d_max < 1)
        throw std::invalid_argument("enumerate_terms: p_max and d_max must be >= 1");

    std::vector<std::vector<int>> monomials;  // includes the all-zero monomial
    std::vector<int> powers(n_fields, 0);
    // Exponent vectors ordered by total degree, then first field highest.
    for (int deg = 0; deg <= p_max; ++deg) {
        std::function<void(int, int)> rec = [&](int f, int remaining) {
            if (f == n_fields - 1) {
                powers[f] = remaining;
                monomials.push_back(powers);
                return;
            }
            for (int e = remaining; e >= 0; --e) {
                powers[f] = e;
                rec(f + 1, remaining - e);
            }
        };
        rec(0, deg);
    }

    std::vector<TermSpec> terms;
    for (const auto& m : monomials) terms.push_back({m, std::nullopt});
    for (const auto& m : monomials)
        for (int f = 0; f < n_fields; ++f)
            for (int axis = 0; axis < spatial_dims; ++axis)
                for (int order = 1; order <= d_max; ++order)
                    terms.push_back({m, DerivFactor{f, axis, order}});
    return terms;
}

// A named, fixed dictionary: term list plus the grid context it expects.
struct Preset {
    std::string name;
    std::vector<TermSpec> terms;
    std::vector<std::string> field_names;
    int dims = 1;
    int d_max = 2;

    std::vector<std::string> labels() const {
        std::vector<std::string> out;
        out.reserve(terms.size());
        for (const auto& t : terms) out.push_back(t.label(field_names));
        return out;
    }
};

namespace detail {

inline Preset burgers_preset(int p) {
    // Full 1-field enumeration with degree <= 3, derivatives <= 4 is
    // [1, u, u^2, u^3, u_x..u_xxxx, u*u_x.., u^2*u_x.., u^3*u_x..].
    // p = 19 drops the constant, p = 15 also drops the u^3 block,
    // p = 11 also drops the u^2 block. All contain u*u_x and u_xx.
    const auto all = enumerate_terms(1, 3, 4, 1);
    Preset pr{"burgers-p" + std::to_string(p), {}, {"u"}, 1, 4};
    for (const auto& t : all) {
        if (t.is_constant()) continue;
        const int mult_deg = t.powers[0];
        if (t.deriv && p == 15 && mult_deg >= 3) continue;
        if (t.deriv && p == 11 && mult_deg >= 2) continue;
        pr.terms.push_back(t);
    }
    return pr;
}

inline Preset gray_scott_preset(int p, int dims) {
    // First p terms of the 2-field enumeration with degree <= 3 and
    // pure-axis derivatives <= 2; 2D variants keep the same list minus
    // z-derivative terms. Every truncation keeps the monomial block
    // (so u, v, u*v^2) and the bare Laplacian components.
    const auto all = enumerate_terms(2, 3, 2, 3);
    Preset pr{"gray-scott-p" + std::to_string(p), {}, {"u", "v"}, dims, 2};
    int taken = 0;
    for (const auto& t : all) {
        if (taken == p) break;
        ++taken;
        if (dims == 2 && t.deriv && t.deriv->axis == 2) continue;
        pr.terms.push_back(t);
    }
    if (dims == 2) pr.name += "-2d";
    return pr;
}

}  // namespace detail

inline Preset get_preset(const std::string& name) {
    std::string base = name;
    int dims = 3;
    if (base.size() > 3 && base.substr(base.size() - 3) == "-2d") {
        base = base.substr(0, base.size() - 3);
        dims = 2;
    }
    if (base == "burgers-p11") return detail::burgers_preset(11);
    if (base == "burgers-p15") return detail::burgers_preset(15);
    if (base == "burgers-p19") return detail::burgers_preset(19);
    if (base == "gray-scott-p26") return detail::gray_scott_preset(26, dims);
    if (base == "gray-scott-p53") return detail::gray_scott_preset(53, dims);
    if (base == "gray-scott-p69") return detail::gray_scott_preset(69, dims);
    throw std::invalid_argument("unknown preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// Finite differences. Orders 1 and 2 are the usual second-order central
// stencils; order 3 composes order-1 onto order-2, order 4 composes two
// order-2 stencils. Stencil half-width is 1, 1, 2, 2 for orders 1..4.

inline std::int64_t stencil_margin(int order) { return (order + 1) / 2; }

// Derivative of `field` along `axis` evaluated at one interior point.
// Odd orders >= 3 apply one order-1 stencil on top of the order-(n-1)
// values; even orders >= 4 apply one order-2 stencil on the order-(n-2)
// values.
inline double spatial_derivative_at(const Field& f, const std::array<std::int64_t, 3>& ix,
                                    std::int64_t it, int axis, int order) {
    if (axis < 0 || axis >= f.dims())
        throw std::invalid_argument("spatial_derivative: axis out of range");
    if (order < 1) throw std::invalid_argument("spatial_derivative: order < 1");
    const double h = f.spacing[axis];
    auto shifted = [&](std::int64_t d) {
        auto j = ix;
        j[axis] += d;
        return j;
    };
    if (order == 1)
        return (f.at(shifted(1), it) - f.at(shifted(-1), it)) / (2.0 * h);
    if (order == 2)
        return (f.at(shifted(1), it) - 2.0 * f.at(ix, it) + f.at(shifted(-1), it)) /
               (h * h);
    if (order % 2 == 1)
        return (spatial_derivative_at(f, shifted(1), it, axis, order - 1) -
                spatial_derivative_at(f, shifted(-1), it, axis, order - 1)) /
               (2.0 * h);
    return (spatial_derivative_at(f, shifted(1), it, axis, order - 2) -
            2.0 * spatial_derivative_at(f, ix, it, axis, order - 2) +
            spatial_derivative_at(f, shifted(-1), it, axis, order - 2)) /
           (h * h);
}

// Full-grid derivative field. Boundary cells within the stencil margin are
// set to zero and are invalid for sampling.
inline Field spatial_derivative(const Field& f, int axis, int order) {
    if (axis < 0 || axis >= f.dims())
        throw std::invalid_argument("spatial_derivative: axis out of range");
    if (f.extents[axis] < order + 2)
        throw std::invalid_argument("spatial_derivative: extent too small for order");
    Field out = f;
    out.name = f.name + "_" + std::string(order, kAxisNames[axis]);
    std::fill(out.values.begin(), out.values.end(), 0.0);
    const std::int64_t m = stencil_margin(order);
    std::array<std::int64_t, 3> lo{0, 0, 0}, hi{0, 0, 0};
    for (int a = 0; a < f.dims(); ++a) {
        lo[a] = (a == axis) ? m : 0;
        hi[a] = f.extents[a] - 1 - ((a == axis) ? m : 0);
    }
    for (std::int64_t it = 0; it < f.nt; ++it)
        for (std::int64_t k = lo[2]; k <= hi[2]; ++k)
            for (std::int64_t j = lo[1]; j <= hi[1]; ++j)
                for (std::int64_t i = lo[0]; i <= hi[0]; ++i) {
                    const std::array<std::int64_t, 3> ix{i, j, k};
                    out.at(ix, it) = spatial_derivative_at(f, ix, it, axis, order);
                }
    return out;
}

// First-order forward difference in time; the last slice is invalid and
// left at zero.
inline Field time_derivative(const Field& f) {
    if (f.nt < 2) throw std::invalid_argument("time_derivative: nt < 2");
    Field out = f;
    out.name = f.name + "_t";
    const std::int64_t s = f.spatial_size();
    for (std::int64_t it = 0; it + 1 < f.nt; ++it)
        for (std::int64_t i = 0; i < s; ++i)
            out.values[it * s + i] =
                (f.values[(it + 1) * s + i] - f.values[it * s + i]) / f.dt;
    for (std::int64_t i = 0; i < s; ++i) out.values[(f.nt - 1) * s + i] = 0.0;
    return out;
}

inline double time_derivative_at(const Field& f, const std::array<std::int64_t, 3>& ix,
                                 std::int64_t it) {
    return (f.at(ix, it + 1) - f.at(ix, it)) / f.dt;
}

// ---------------------------------------------------------------------------
// Design system.

struct ColumnStats {
    double mean = 0.0;
    double scale = 1.0;
};

struct Provenance {
    std::vector<std::string> field_names;
    std::uint64_t sample_seed = 0;
    double sigma = 0.0;
};

struct DesignSystem {
    Eigen::MatrixXd theta;  // N x p
    Eigen::VectorXd ut;     // N
    std::vector<std::string> labels;
    bool standardized = false;
    std::vector<ColumnStats> stats;  // per column, valid once standardized
    double response_mean = 0.0;
    int constant_col = -1;          // index of the "1" term, -1 if absent
    std::vector<int> zeroed;        // columns excluded from selection
    std::vector<std::string> warnings;
    Provenance provenance;

    Eigen::Index n() const { return theta.rows(); }
    Eigen::Index p() const { return theta.cols(); }

    bool is_zeroed(int k) const {
        return std::find(zeroed.begin(), zeroed.end(), k) != zeroed.end();
    }
};

inline std::int64_t widest_margin(const std::vector<TermSpec>& terms) {
    std::int64_t m = 1;
    for (const auto& t : terms)
        if (t.deriv) m = std::max(m, stencil_margin(t.deriv->order));
    return m;
}

// Evaluates every term at the sampled points. `fields` are the (denoised)
// state variables; the response is the forward time difference of
// fields[target].
inline DesignSystem assemble_design(const std::vector<Field>& fields, int target,
                                    const std::vector<TermSpec>& terms,
                                    const std::vector<std::string>& field_names,
                                    const SampleSet& samples) {
    if (fields.empty()) throw std::invalid_argument("assemble_design: no fields");
    if (target < 0 || target >= static_cast<int>(fields.size()))
        throw std::invalid_argument("assemble_design: target out of range");
    const std::int64_t n = samples.count();
    const std::int64_t p = static_cast<std::int64_t>(terms.size());
    const std::int64_t margin = widest_margin(terms);

    DesignSystem sys;
    sys.theta.resize(n, p);
    sys.ut.resize(n);
    for (std::int64_t r = 0; r < n; ++r) {
        const SamplePoint& pt = samples.points[r];
        for (int a = 0; a < fields[0].dims(); ++a)
            if (pt.ix[a] < margin || pt.ix[a] > fields[0].extents[a] - 1 - margin)
                throw numerical_error("assemble_design: sample touches invalid cells");
        if (pt.it < 0 || pt.it > fields[0].nt - 2)
            throw numerical_error("assemble_design: sample outside valid time range");
        for (std::int64_t k = 0; k < p; ++k) {
            const TermSpec& t = terms[k];
            double v = 1.0;
            for (size_t f = 0; f < t.powers.size(); ++f)
                for (int e = 0; e < t.powers[f]; ++e) v *= fields[f].at(pt.ix, pt.it);
            if (t.deriv)
                v *= spatial_derivative_at(fields[t.deriv->field], pt.ix, pt.it,
                                           t.deriv->axis, t.deriv->order);
            sys.theta(r, k) = v;
        }
        sys.ut[r] = time_derivative_at(fields[target], pt.ix, pt.it);
    }
    for (const auto& t : terms) sys.labels.push_back(t.label(field_names));
    for (std::int64_t k = 0; k < p; ++k)
        if (terms[k].is_constant()) sys.constant_col = static_cast<int>(k);
    sys.provenance.field_names = field_names;
    return sys;
}

// Centers and scales columns to unit 1/n-variance, centers the response,
// and records the transform. The constant column is annihilated by
// centering and is zeroed out; its effect lives in the response mean.
// Zero-variance non-constant columns are likewise zeroed, with a warning.
inline DesignSystem standardize(const DesignSystem& in) {
    DesignSystem out = in;
    const Eigen::Index n = in.n(), p = in.p();
    if (n < 2) throw std::invalid_argument("standardize: need at least 2 rows");
    out.stats.assign(p, {});
    out.zeroed.clear();
    out.warnings = in.warnings;
    for (Eigen::Index k = 0; k < p; ++k) {
        const double mean = in.theta.col(k).mean();
        const double var =
            (in.theta.col(k).array() - mean).square().sum() / static_cast<double>(n);
        const double sd = std::sqrt(var);
        if (sd <= 1e-12 * (std::abs(mean) + 1.0)) {
            out.theta.col(k).setZero();
            out.stats[k] = {mean, 1.0};
            out.zeroed.push_back(static_cast<int>(k));
            if (static_cast<int>(k) != in.constant_col)
                out.warnings.push_back("degenerate column dropped: " + in.labels[k]);
            continue;
        }
        out.theta.col(k) = (in.theta.col(k).array() - mean) / sd;
        out.stats[k] = {mean, sd};
    }
    const double um = in.standardized ? 0.0 : in.ut.mean();
    out.ut = in.ut.array() - um;
    out.response_mean = in.standardized ? in.response_mean : um;
    out.standardized = true;
    return out;
}

// ---------------------------------------------------------------------------
// Design file: <stem>.json header + <stem>.bin (theta row-major, then ut).

inline void save_design(const DesignSystem& sys, const std::string& json_path) {
    nlohmann::json meta{{"n", sys.n()},
                        {"p", sys.p()},
                        {"labels", sys.labels},
                        {"standardized", sys.standardized},
                        {"response_mean", sys.response_mean},
                        {"constant_col", sys.constant_col},
                        {"zeroed", sys.zeroed},
                        {"warnings", sys.warnings},
                        {"provenance",
                         {{"fields", sys.provenance.field_names},
                          {"sample_seed", sys.provenance.sample_seed},
                          {"sigma", sys.provenance.sigma}}}};
    if (sys.standardized) {
        nlohmann::json st = nlohmann::json::array();
        for (const auto& c : sys.stats) st.push_back({{"mean", c.mean}, {"scale", c.scale}});
        meta["standardization"] = st;
    }
    std::ofstream js(json_path);
    if (!js) throw data_error("cannot write " + json_path);
    js << meta.dump(2) << "\n";

    const std::string bin_path = sibling_bin_path(json_path);
    std::ofstream bs(bin_path, std::ios::binary);
    if (!bs) throw data_error("cannot write " + bin_path);
    const Eigen::Index n = sys.n(), p = sys.p();
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index k = 0; k < p; ++k) {
            const double v = sys.theta(r, k);
            bs.write(reinterpret_cast<const char*>(&v), sizeof v);
        }
    bs.write(reinterpret_cast<const char*>(sys.ut.data()),
             static_cast<std::streamsize>(n * sizeof(double)));
}

inline DesignSystem load_design(const std::string& json_path) {
    std::ifstream js(json_path);
    if (!js) throw data_error("cannot read " + json_path);
    nlohmann::json meta;
    try {
        js >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw data_error(json_path + ": bad JSON: " + e.what());
    }
    DesignSystem sys;
    std::int64_t n, p;
    try {
        n = meta.at("n").get<std::int64_t>();
        p = meta.at("p").get<std::int64_t>();
        sys.labels = meta.at("labels").get<std::vector<std::string>>();
        sys.standardized = meta.at("standardized").get<bool>();
        sys.response_mean = meta.at("response_mean").get<double>();
        sys.constant_col = meta.at("constant_col").get<int>();
        sys.zeroed = meta.at("zeroed").get<std::vector<int>>();
        sys.warnings = meta.at("warnings").get<std::vector<std::string>>();
        sys.provenance.field_names =
            meta.at("provenance").at("fields").get<std::vector<std::string>>();
        sys.provenance.sample_seed =
            meta.at("provenance").at("sample_seed").get<std::uint64_t>();
        sys.provenance.sigma = meta.at("provenance").at("sigma").get<double>();
        if (meta.contains("standardization")) {
            for (const auto& c : meta["standardization"])
                sys.stats.push_back({c.at("mean").get<double>(), c.at("scale").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw data_error(json_path + ": bad header: " + e.what());
    }
    if (static_cast<std::int64_t>(sys.labels.size()) != p)
        throw data_error(json_path + ": label count does not match p");

    const std::string bin_path = sibling_bin_path(json_path);
    std::ifstream bs(bin_path, std::ios::binary | std::ios::ate);
    if (!bs) throw data_error("cannot read " + bin_path);
    const std::int64_t bytes = bs.tellg();
    const std::int64_t expected = (n * p + n) * 8;
    if (bytes != expected)
        throw data_error(bin_path + ": size " + std::to_string(bytes) +
                         " bytes does not match header in " + json_path + " (" +
                         std::to_string(expected) + " bytes expected)");
    bs.seekg(0);
    sys.theta.resize(n, p);
    for (std::int64_t r = 0; r < n; ++r)
        for (std::int64_t k = 0; k < p; ++k) {
            double v;
            bs.read(reinterpret_cast<char*>(&v), sizeof v);
            sys.theta(r, k) = v;
        }
    sys.ut.resize(n);
    bs.read(reinterpret_cast<char*>(sys.ut.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    return sys;
}

}  // namespace pdestride
