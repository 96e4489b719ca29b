#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pdestride/errors.hpp"
#include "pdestride/field.hpp"
#include "pdestride/rng.hpp"
#include "pdestride/threads.hpp"

namespace pdestride {

// 1D viscous Burgers equation u_t = -u*u_x + nu*u_xx on [-8, 8] with
// periodic boundaries, explicit Euler in time and second-order central
// differences in space. nt counts saved time points (nt - 1 steps when
// save_stride == 1).
struct BurgersConfig {
    double x_lo = -8.0;
    double x_hi = 8.0;
    std::int64_t nx = 256;
    std::int64_t nt = 1000;
    double dt = 0.01;
    double nu = 0.1;
    std::int64_t save_stride = 1;

    double dx() const { return (x_hi - x_lo) / static_cast<double>(nx); }

    void validate() const {
        if (nx < 8 || nt < 3) throw std::invalid_argument("burgers: grid too small");
        if (!(dt > 0) || !(nu > 0) || !(x_hi > x_lo) || save_stride < 1)
            throw std::invalid_argument("burgers: bad parameters");
        const double cfl = dt * nu / (dx() * dx());
        if (!(cfl < 0.5))
            throw numerical_error("burgers: diffusion number dt*nu/dx^2 = " +
                                  std::to_string(cfl) + " >= 0.5, unstable");
    }
};

inline Field simulate_burgers(const BurgersConfig& cfg) {
    cfg.validate();
    const std::int64_t nx = cfg.nx;
    const double dx = cfg.dx();
    Field out;
    out.name = "u";
    out.extents = {nx};
    out.nt = cfg.nt;
    out.spacing = {dx};
    out.dt = cfg.dt * static_cast<double>(cfg.save_stride);
    out.values.resize(nx * cfg.nt);

    std::vector<double> u(nx), next(nx);
    for (std::int64_t i = 0; i < nx; ++i) {
        const double x = cfg.x_lo + static_cast<double>(i) * dx;
        u[i] = std::exp(-(x + 2.0) * (x + 2.0));
    }
    std::copy(u.begin(), u.end(), out.values.begin());

    const std::int64_t steps = (cfg.nt - 1) * cfg.save_stride;
    std::int64_t saved = 1;
    for (std::int64_t s = 1; s <= steps; ++s) {
        for (std::int64_t i = 0; i < nx; ++i) {
            const double ul = u[(i + nx - 1) % nx];
            const double ur = u[(i + 1) % nx];
            const double ux = (ur - ul) / (2.0 * dx);
            const double uxx = (ur - 2.0 * u[i] + ul) / (dx * dx);
            next[i] = u[i] + cfg.dt * (-u[i] * ux + cfg.nu * uxx);
            if (!std::isfinite(next[i]))
                throw numerical_error("burgers: non-finite value at step " +
                                      std::to_string(s));
        }
        u.swap(next);
        if (s % cfg.save_stride == 0)
            std::copy(u.begin(), u.end(), out.values.begin() + saved++ * nx);
    }
    return out;
}

// Gray-Scott reaction-diffusion system
//   u_t = D_u lap(u) - u v^2 + f (1 - u)
//   v_t = D_v lap(v) + u v^2 - (f + k) v
// on a periodic cube, explicit Euler with central-difference Laplacians.
// The default initial condition is the homogeneous state (u=1, v=0)
// perturbed in a centered cube (u=0.5, v=0.25) with seeded uniform jitter.
struct GrayScottConfig {
    int dims = 3;            // 2 or 3
    std::int64_t grid = 64;  // points per axis (desk scale; paper scale 128)
    double dx = 0.01953;
    double dt = 5.0e-4;
    std::int64_t steps = 10000;  // T = 5.0 at the default dt
    std::int64_t save_stride = 200;
    double f = 0.014;
    double k = 0.053;
    double du = 2.0e-5;
    double dv = 1.0e-5;
    double ic_cube_fraction = 0.10;  // side of each perturbed cube, fraction of box
    double ic_jitter = 0.01;
    // With ic_seeds == 1 the initial condition is a single centered cube
    // (u=0.5, v=0.25) in the homogeneous state. With ic_seeds > 1 the cubes
    // are scattered and typed (mixed / u-only / v-only), which makes the
    // two species vary independently and keeps the regression problem
    // well-conditioned; recommended for identification runs.
    int ic_seeds = 1;
    std::uint64_t seed = 0;
    std::optional<std::vector<double>> ic_u;  // overrides the default IC
    std::optional<std::vector<double>> ic_v;

    std::int64_t cells() const {
        std::int64_t c = 1;
        for (int a = 0; a < dims; ++a) c *= grid;
        return c;
    }

    void validate() const {
        if (dims != 2 && dims != 3)
            throw std::invalid_argument("gray-scott: dims must be 2 or 3");
        if (grid < 8 || steps < 1 || save_stride < 1)
            throw std::invalid_argument("gray-scott: grid/steps too small");
        if (!(dx > 0) || !(dt > 0) || du < 0 || dv < 0 || f < 0 || k < 0)
            throw std::invalid_argument("gray-scott: bad parameters");
        if (steps % save_stride != 0)
            throw std::invalid_argument("gray-scott: steps must be a multiple of save_stride");
        const double stab = dt * std::max(du, dv) * 2.0 * dims / (dx * dx);
        if (!(stab < 1.0))
            throw numerical_error("gray-scott: diffusion number " +
                                  std::to_string(stab) + " >= 1, unstable");
        if (ic_seeds < 1)
            throw std::invalid_argument("gray-scott: ic_seeds must be >= 1");
        if (ic_u.has_value() != ic_v.has_value())
            throw std::invalid_argument("gray-scott: supply both ic_u and ic_v or neither");
        if (ic_u && (static_cast<std::int64_t>(ic_u->size()) != cells() ||
                     static_cast<std::int64_t>(ic_v->size()) != cells()))
            throw data_error("gray-scott: initial condition size does not match grid");
    }
};

namespace detail {

// Homogeneous steady state (u=1, v=0) perturbed by ic_seeds cubes with
// per-cell jitter inside each cube. A single seed is the classic centered
// perturbation (u=0.5, v=0.25). Multiple seeds are scattered over the
// central region and typed mixed / u-only / v-only so the two species vary
// independently somewhere in the data; otherwise u and v are
// anti-correlated everywhere and a regression cannot tell them apart.
inline void gray_scott_default_ic(const GrayScottConfig& cfg, std::vector<double>& u,
                                  std::vector<double>& v) {
    const std::int64_t n = cfg.grid;
    u.assign(cfg.cells(), 1.0);
    v.assign(cfg.cells(), 0.0);
    rng::Stream stream(rng::derive(cfg.seed, "gray-scott-ic"));
    const auto jitter = [&] { return cfg.ic_jitter * (2.0 * stream.uniform01() - 1.0); };
    const std::int64_t nz = cfg.dims == 3 ? n : 1;
    // Scattered centres stay in the middle 50% of the box, away from the
    // periodic wrap and inside a centered sampling window.
    const auto centre = [&] {
        const double lo = 0.25, hi = 0.75;
        return static_cast<std::int64_t>(lo * n + stream.uniform01() * (hi - lo) * n);
    };
    for (int s = 0; s < cfg.ic_seeds; ++s) {
        const bool single = cfg.ic_seeds == 1;
        const std::int64_t cx = single ? n / 2 : centre();
        const std::int64_t cy = single ? n / 2 : centre();
        const std::int64_t cz = cfg.dims == 3 ? (single ? n / 2 : centre()) : 0;
        const int kind = single ? 0 : s % 3;
        // u-only dips cycle through two depths; with a single depth the u
        // column is two-valued on the v == 0 rows and any monotone function
        // of u fits those rows equally well.
        static constexpr double kDipDepth[3] = {0.1, 0.1, 0.3};
        const double ubase = kind == 2 ? 1.0 : kind == 1 ? kDipDepth[(s / 3) % 3] : 0.5;
        const double vbase = kind == 1 ? 0.0 : 0.25;
        // u-only dips are larger: they are the only rows where u varies
        // with v == 0, which is what pins the linear u term.
        const double frac = kind == 1 ? 2.0 * cfg.ic_cube_fraction : cfg.ic_cube_fraction;
        const std::int64_t half = std::max<std::int64_t>(
            1, static_cast<std::int64_t>(std::llround(frac * n / 2.0)));
        for (std::int64_t z = (cfg.dims == 3 ? cz - half : 0);
             z <= (cfg.dims == 3 ? cz + half : 0); ++z)
            for (std::int64_t y = cy - half; y <= cy + half; ++y)
                for (std::int64_t x = cx - half; x <= cx + half; ++x) {
                    if (x < 0 || x >= n || y < 0 || y >= n || z < 0 || z >= nz) continue;
                    const std::int64_t idx = x + n * (y + n * z);
                    u[idx] = std::min(1.0, std::max(0.0, ubase + jitter()));
                    v[idx] = std::max(0.0, vbase + (kind == 1 ? 0.0 : jitter()));
                }
    }
}

}  // namespace detail

inline std::pair<Field, Field> simulate_gray_scott(const GrayScottConfig& cfg,
                                                   int threads = 0) {
    cfg.validate();
    const std::int64_t n = cfg.grid;
    const std::int64_t cells = cfg.cells();
    const std::int64_t nz = cfg.dims == 3 ? n : 1;
    const double inv_dx2 = 1.0 / (cfg.dx * cfg.dx);

    std::vector<double> u, v;
    if (cfg.ic_u) {
        u = *cfg.ic_u;
        v = *cfg.ic_v;
    } else {
        detail::gray_scott_default_ic(cfg, u, v);
    }
    std::vector<double> un(cells), vn(cells);

    const std::int64_t slices = cfg.steps / cfg.save_stride + 1;
    Field fu, fv;
    fu.name = "u";
    fv.name = "v";
    fu.extents.assign(cfg.dims, n);
    fv.extents = fu.extents;
    fu.nt = fv.nt = slices;
    fu.spacing.assign(cfg.dims, cfg.dx);
    fv.spacing = fu.spacing;
    fu.dt = fv.dt = cfg.dt * static_cast<double>(cfg.save_stride);
    fu.values.resize(cells * slices);
    fv.values.resize(cells * slices);

    const auto save = [&](std::int64_t slice, std::int64_t step) {
        for (std::int64_t i = 0; i < cells; ++i)
            if (!std::isfinite(u[i]) || !std::isfinite(v[i]))
                throw numerical_error("gray-scott: non-finite value at step " +
                                      std::to_string(step));
        std::copy(u.begin(), u.end(), fu.values.begin() + slice * cells);
        std::copy(v.begin(), v.end(), fv.values.begin() + slice * cells);
    };
    save(0, 0);

    const std::int64_t plane = n * n;
    for (std::int64_t s = 1; s <= cfg.steps; ++s) {
        parallel_for(nz, threads, [&](std::int64_t z) {
            const std::int64_t zb = z * (cfg.dims == 3 ? plane : 0);
            const std::int64_t zm = ((z + nz - 1) % nz) * (cfg.dims == 3 ? plane : 0);
            const std::int64_t zp = ((z + 1) % nz) * (cfg.dims == 3 ? plane : 0);
            for (std::int64_t y = 0; y < n; ++y) {
                const std::int64_t yb = y * n;
                const std::int64_t ym = ((y + n - 1) % n) * n;
                const std::int64_t yp = ((y + 1) % n) * n;
                for (std::int64_t x = 0; x < n; ++x) {
                    const std::int64_t xm = (x + n - 1) % n;
                    const std::int64_t xp = (x + 1) % n;
                    const std::int64_t i = zb + yb + x;
                    double lap_u = u[zb + yb + xm] + u[zb + yb + xp] +
                                   u[zb + ym + x] + u[zb + yp + x] -
                                   2.0 * cfg.dims * u[i];
                    double lap_v = v[zb + yb + xm] + v[zb + yb + xp] +
                                   v[zb + ym + x] + v[zb + yp + x] -
                                   2.0 * cfg.dims * v[i];
                    if (cfg.dims == 3) {
                        lap_u += u[zm + yb + x] + u[zp + yb + x];
                        lap_v += v[zm + yb + x] + v[zp + yb + x];
                    }
                    const double uv2 = u[i] * v[i] * v[i];
                    un[i] = u[i] + cfg.dt * (cfg.du * lap_u * inv_dx2 - uv2 +
                                             cfg.f * (1.0 - u[i]));
                    vn[i] = v[i] + cfg.dt * (cfg.dv * lap_v * inv_dx2 + uv2 -
                                             (cfg.f + cfg.k) * v[i]);
                }
            }
        });
        u.swap(un);
        v.swap(vn);
        if (s % cfg.save_stride == 0) save(s / cfg.save_stride, s);
    }
    return {std::move(fu), std::move(fv)};
}

}  // namespace pdestride
