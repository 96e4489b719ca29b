#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdestride/errors.hpp"
#include "pdestride/rng.hpp"

namespace pdestride {

static_assert(std::endian::native == std::endian::little,
              "field binary format is little-endian");

// A named scalar quantity on a regular space-time grid (1-3 spatial axes
// plus time). Storage is time-major with the first spatial axis fastest:
// values[t * spatial_size + (i1 + n1*(i2 + n2*i3))].
struct Field {
    std::string name;
    std::vector<std::int64_t> extents;  // spatial, size 1..3
    std::int64_t nt = 0;
    std::vector<double> spacing;  // per spatial axis
    double dt = 0.0;
    std::vector<double> values;

    int dims() const { return static_cast<int>(extents.size()); }

    std::int64_t spatial_size() const {
        return std::accumulate(extents.begin(), extents.end(), std::int64_t{1},
                               std::multiplies<>());
    }

    std::int64_t size() const { return spatial_size() * nt; }

    std::int64_t spatial_flat(const std::array<std::int64_t, 3>& ix) const {
        std::int64_t f = 0;
        for (int a = dims() - 1; a >= 0; --a) f = f * extents[a] + ix[a];
        return f;
    }

    double at(const std::array<std::int64_t, 3>& ix, std::int64_t it) const {
        return values[it * spatial_size() + spatial_flat(ix)];
    }

    double& at(const std::array<std::int64_t, 3>& ix, std::int64_t it) {
        return values[it * spatial_size() + spatial_flat(ix)];
    }

    void validate() const {
        if (extents.empty() || extents.size() > 3)
            throw std::invalid_argument("field '" + name + "': need 1..3 spatial axes");
        if (extents.size() != spacing.size())
            throw std::invalid_argument("field '" + name + "': extents/spacing mismatch");
        for (auto n : extents)
            if (n < 3) throw std::invalid_argument("field '" + name + "': extent < 3");
        if (nt < 3) throw std::invalid_argument("field '" + name + "': time extent < 3");
        for (auto h : spacing)
            if (!(h > 0)) throw std::invalid_argument("field '" + name + "': spacing <= 0");
        if (!(dt > 0)) throw std::invalid_argument("field '" + name + "': dt <= 0");
        if (size() != static_cast<std::int64_t>(values.size()))
            throw std::invalid_argument("field '" + name + "': value count mismatch");
        for (double v : values)
            if (!std::isfinite(v))
                throw data_error("field '" + name + "': non-finite value");
    }
};

// One estimation point: spatial multi-index plus time index.
struct SamplePoint {
    std::array<std::int64_t, 3> ix{0, 0, 0};
    std::int64_t it = 0;

    bool operator==(const SamplePoint&) const = default;
};

struct SampleSet {
    std::vector<SamplePoint> points;

    std::int64_t count() const { return static_cast<std::int64_t>(points.size()); }
};

// Axis-aligned box in index space, inclusive bounds. Unused spatial axes
// are clamped to [0, 0].
struct IndexBox {
    std::array<std::int64_t, 3> lo{0, 0, 0};
    std::array<std::int64_t, 3> hi{0, 0, 0};
    std::int64_t t_lo = 0;
    std::int64_t t_hi = 0;
};

inline IndexBox whole_interior(const Field& f, std::int64_t margin) {
    IndexBox box;
    for (int a = 0; a < f.dims(); ++a) {
        box.lo[a] = margin;
        box.hi[a] = f.extents[a] - 1 - margin;
    }
    box.t_lo = 1;
    box.t_hi = f.nt - 2;
    return box;
}

inline double field_mean(const Field& f) {
    double s = 0.0;
    for (double v : f.values) s += v;
    return s / static_cast<double>(f.values.size());
}

// Population (1/N) standard deviation over all entries.
inline double field_std(const Field& f) {
    const double m = field_mean(f);
    double s = 0.0;
    for (double v : f.values) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(f.values.size()));
}

// Additive Gaussian noise with standard deviation sigma * std(u).
// Degenerate cases (sigma == 0 or a constant field) return the input.
inline Field add_noise(const Field& field, double sigma, std::uint64_t seed) {
    if (sigma < 0) throw std::invalid_argument("add_noise: sigma < 0");
    Field out = field;
    if (sigma == 0) return out;
    const double s = sigma * field_std(field);
    if (s == 0) return out;
    rng::Stream stream(rng::derive(seed, "add-noise"));
    for (double& v : out.values) v += s * stream.normal();
    return out;
}

// Draws n distinct points uniformly without replacement from the part of
// `region` that is strictly interior (spatial margin, time in [1, nt-2]).
inline SampleSet sample_points(const Field& field, const IndexBox& region,
                               std::int64_t n, std::uint64_t seed,
                               std::int64_t margin = 2) {
    const IndexBox interior = whole_interior(field, margin);
    IndexBox box;
    std::int64_t capacity = 1;
    for (int a = 0; a < field.dims(); ++a) {
        box.lo[a] = std::max(region.lo[a], interior.lo[a]);
        box.hi[a] = std::min(region.hi[a], interior.hi[a]);
        capacity *= std::max<std::int64_t>(box.hi[a] - box.lo[a] + 1, 0);
    }
    box.t_lo = std::max(region.t_lo, interior.t_lo);
    box.t_hi = std::min(region.t_hi, interior.t_hi);
    capacity *= std::max<std::int64_t>(box.t_hi - box.t_lo + 1, 0);
    if (capacity < n)
        throw data_error("sample_points: region holds " + std::to_string(capacity) +
                         " valid points, need " + std::to_string(n));

    std::vector<SamplePoint> candidates;
    candidates.reserve(capacity);
    std::array<std::int64_t, 3> ext{1, 1, 1};
    for (int a = 0; a < field.dims(); ++a) ext[a] = box.hi[a] - box.lo[a] + 1;
    for (std::int64_t it = box.t_lo; it <= box.t_hi; ++it)
        for (std::int64_t k = 0; k < ext[2]; ++k)
            for (std::int64_t j = 0; j < ext[1]; ++j)
                for (std::int64_t i = 0; i < ext[0]; ++i)
                    candidates.push_back(
                        {{box.lo[0] + i, box.lo[1] + j, box.lo[2] + k}, it});

    rng::Stream stream(rng::derive(seed, "sample-points"));
    SampleSet out;
    out.points.reserve(n);
    // Partial Fisher-Yates: first n slots are a uniform draw without
    // replacement.
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t j = i + static_cast<std::int64_t>(
                                       stream.below(candidates.size() - i));
        std::swap(candidates[i], candidates[j]);
        out.points.push_back(candidates[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// On-disk format: <stem>.json metadata + <stem>.bin flat f64le values.

inline std::string sibling_bin_path(const std::string& json_path) {
    std::string p = json_path;
    if (p.size() >= 5 && p.substr(p.size() - 5) == ".json")
        p = p.substr(0, p.size() - 5);
    return p + ".bin";
}

inline void save_field(const Field& f, const std::string& json_path) {
    nlohmann::json meta{{"name", f.name},
                        {"dims", f.extents},
                        {"nt", f.nt},
                        {"spacing", f.spacing},
                        {"dt", f.dt},
                        {"dtype", "f64le"},
                        {"layout", "t-major,x-fastest"}};
    std::ofstream js(json_path);
    if (!js) throw data_error("cannot write " + json_path);
    js << meta.dump(2) << "\n";

    const std::string bin_path = sibling_bin_path(json_path);
    std::ofstream bs(bin_path, std::ios::binary);
    if (!bs) throw data_error("cannot write " + bin_path);
    bs.write(reinterpret_cast<const char*>(f.values.data()),
             static_cast<std::streamsize>(f.values.size() * sizeof(double)));
}

inline Field load_field(const std::string& json_path) {
    std::ifstream js(json_path);
    if (!js) throw data_error("cannot read " + json_path);
    nlohmann::json meta;
    try {
        js >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw data_error(json_path + ": bad JSON: " + e.what());
    }
    Field f;
    try {
        f.name = meta.at("name").get<std::string>();
        f.extents = meta.at("dims").get<std::vector<std::int64_t>>();
        f.nt = meta.at("nt").get<std::int64_t>();
        f.spacing = meta.at("spacing").get<std::vector<double>>();
        f.dt = meta.at("dt").get<double>();
        if (meta.at("dtype") != "f64le" || meta.at("layout") != "t-major,x-fastest")
            throw data_error(json_path + ": unsupported dtype/layout");
    } catch (const nlohmann::json::exception& e) {
        throw data_error(json_path + ": bad metadata: " + e.what());
    }

    const std::string bin_path = sibling_bin_path(json_path);
    std::ifstream bs(bin_path, std::ios::binary | std::ios::ate);
    if (!bs) throw data_error("cannot read " + bin_path);
    const std::int64_t bytes = bs.tellg();
    const std::int64_t expected = f.spatial_size() * f.nt * 8;
    if (bytes != expected)
        throw data_error(bin_path + ": size " + std::to_string(bytes) +
                         " bytes does not match dims in " + json_path + " (" +
                         std::to_string(expected) + " bytes expected)");
    bs.seekg(0);
    f.values.resize(f.spatial_size() * f.nt);
    bs.read(reinterpret_cast<char*>(f.values.data()), bytes);
    f.validate();
    return f;
}

// CSV form for 1D fields: header "t,x,value", rows in storage order.
// %.17g round-trips doubles exactly, so bin -> csv -> bin is bitwise.
inline void save_field_csv(const Field& f, const std::string& path) {
    if (f.dims() != 1) throw data_error("CSV export supports 1D fields only");
    std::ofstream os(path);
    if (!os) throw data_error("cannot write " + path);
    os << "t,x,value\n";
    char buf[96];
    for (std::int64_t it = 0; it < f.nt; ++it)
        for (std::int64_t i = 0; i < f.extents[0]; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n",
                          static_cast<double>(it) * f.dt,
                          static_cast<double>(i) * f.spacing[0],
                          f.values[it * f.extents[0] + i]);
            os << buf;
        }
}

inline Field load_field_csv(const std::string& path, const std::string& name) {
    std::ifstream is(path);
    if (!is) throw data_error("cannot read " + path);
    std::string line;
    if (!std::getline(is, line) || line != "t,x,value")
        throw data_error(path + ": expected header 't,x,value'");
    std::vector<double> t, x, v;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        double a, b, c;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &a, &b, &c) != 3)
            throw data_error(path + ": bad row '" + line + "'");
        t.push_back(a);
        x.push_back(b);
        v.push_back(c);
    }
    if (v.size() < 9) throw data_error(path + ": too few rows");
    // Rows are t-major: the first block of constant t spans one spatial sweep.
    std::int64_t nx = 1;
    while (nx < static_cast<std::int64_t>(t.size()) && t[nx] == t[0]) ++nx;
    if (static_cast<std::int64_t>(v.size()) % nx != 0)
        throw data_error(path + ": ragged grid");
    Field f;
    f.name = name;
    f.extents = {nx};
    f.nt = static_cast<std::int64_t>(v.size()) / nx;
    f.spacing = {x[1] - x[0]};
    f.dt = t[nx] - t[0];
    f.values = std::move(v);
    f.validate();
    return f;
}

}  // namespace pdestride
