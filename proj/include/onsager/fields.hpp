#pragma once
// Space-time blocks of primitive fields, shifted increments, subdomains and
// L^p norms. Blocks are immutable after construction; everything here is a
// read-only transform.

#include "onsager/core.hpp"
#include "onsager/thermo.hpp"

namespace onsager {

struct FieldBlock {
    Grid grid;
    Field rho, u;
    std::array<Field, 2> v;  // v[1] unused when d == 1
    double eps = 0.0;        // viscosity scale of the generating run (0 = exact/weak data)

    explicit FieldBlock(const Grid& g)
        : grid(g), rho(Box::full(g)), u(Box::full(g)) {
        v[0] = Field(Box::full(g));
        if (g.d == 2) v[1] = Field(Box::full(g));
    }

    Box box() const { return Box::full(grid); }

    double momentum(int c, int ix, int iy, int it) const {
        return rho.at(ix, iy, it) * v[c].at(ix, iy, it);
    }
    double total_energy(int ix, int iy, int it) const {
        double k = v[0].at(ix, iy, it) * v[0].at(ix, iy, it);
        if (grid.d == 2) k += v[1].at(ix, iy, it) * v[1].at(ix, iy, it);
        return 0.5 * rho.at(ix, iy, it) * k + u.at(ix, iy, it);
    }
    void check_finite_and_floored(double rho_floor = 1e-12) const {
        for (std::size_t i = 0; i < rho.a.size(); ++i) {
            if (!(rho.a[i] >= rho_floor))
                throw StateOutsideValidity("block density below floor");
            if (!std::isfinite(u.a[i]) || !std::isfinite(v[0].a[i]))
                throw StateOutsideValidity("non-finite block entry");
        }
    }
};

// An analysis subdomain is just a Box; margin() gives its metric distance to
// the data boundary (infinite across periodic axes).
struct Subdomain {
    Box box;
    double margin(const Grid& g, const Box& data) const {
        return metric_margin(g, data, box);
    }
};

// Space-time lattice shift with its metric norm.
struct Shift {
    int rx = 0, ry = 0, rt = 0;
    double norm(const Grid& g) const { return g.shift_norm(rx, ry, rt); }
};

struct Increment {
    Shift shift;
    Field payload;  // delta f(R; X) = f(X+R) - f(X) on the valid box
};

namespace detail {

// Wrap a global index into [0, n) on periodic axes.
inline int wrap(int i, int n) {
    int r = i % n;
    return r < 0 ? r + n : r;
}

}  // namespace detail

// Sample f(X + R) with periodic wrapping; X + R must be inside f.box on
// non-periodic axes (callers shrink the output box accordingly).
inline double sample_shifted(const Grid& g, const Field& f, int ix, int iy, int it,
                             const Shift& s) {
    int jx = ix + s.rx, jy = iy + s.ry, jt = it + s.rt;
    if (g.periodic[0]) jx = f.box.lo[0] + detail::wrap(jx - f.box.lo[0], f.box.extent(0));
    if (g.d == 2 && g.periodic[1])
        jy = f.box.lo[1] + detail::wrap(jy - f.box.lo[1], f.box.extent(1));
    return f.at(jx, jy, jt);
}

inline Increment increment(const Grid& g, const Field& f, const Shift& s,
                           const Subdomain& O) {
    if (!f.box.contains(O.box)) throw ShiftExceedsMargin("subdomain not inside field box");
    // shrink on non-periodic axes so both X and X+R stay in the data
    Box valid = O.box;
    auto clampAxis = [&](int axis, int r, bool per) {
        if (per) return;
        if (r > 0) valid.hi[axis] = std::min(valid.hi[axis], f.box.hi[axis] - r);
        if (r < 0) valid.lo[axis] = std::max(valid.lo[axis], f.box.lo[axis] - r);
    };
    clampAxis(0, s.rx, g.periodic[0]);
    clampAxis(1, s.ry, g.d == 2 && g.periodic[1]);
    clampAxis(2, s.rt, false);
    if (valid.empty())
        throw ShiftExceedsMargin("shift " + format_double(s.norm(g)) +
                                 " leaves no valid cells");
    Increment inc;
    inc.shift = s;
    inc.payload = Field(valid);
    for_each_cell(valid, [&](int ix, int iy, int it) {
        inc.payload.at(ix, iy, it) =
            sample_shifted(g, f, ix, iy, it, s) - f.at(ix, iy, it);
    });
    return inc;
}

// L^p norm over O with midpoint quadrature, cell measure prod(dx)*dt.
// p = infinity returns max |f|.
inline double lp_norm(const Grid& g, const Field& f, const Box& O, double p) {
    if (O.empty() || !f.box.contains(O)) throw EmptyDomain("lp_norm domain");
    if (std::isinf(p)) {
        double m = 0.0;
        for_each_cell(O, [&](int ix, int iy, int it) {
            m = std::max(m, std::abs(f.at(ix, iy, it)));
        });
        return m;
    }
    if (!(p >= 1)) throw Error("lp_norm requires p >= 1");
    double acc = 0.0;
    for_each_cell(O, [&](int ix, int iy, int it) {
        acc += std::pow(std::abs(f.at(ix, iy, it)), p);
    });
    return std::pow(acc * g.cell_measure(), 1.0 / p);
}

inline double box_measure(const Grid& g, const Box& O) {
    return double(O.count()) * g.cell_measure();
}

// Componentwise min/max of (u, rho) over the block.
struct RangeHull {
    double u_min, u_max, rho_min, rho_max;
    bool contains(double uu, double rr) const {
        return uu >= u_min && uu <= u_max && rr >= rho_min && rr <= rho_max;
    }
};

inline RangeHull essential_range_hull(const FieldBlock& b) {
    RangeHull h{b.u.a[0], b.u.a[0], b.rho.a[0], b.rho.a[0]};
    for (std::size_t i = 0; i < b.u.a.size(); ++i) {
        h.u_min = std::min(h.u_min, b.u.a[i]);
        h.u_max = std::max(h.u_max, b.u.a[i]);
        h.rho_min = std::min(h.rho_min, b.rho.a[i]);
        h.rho_max = std::max(h.rho_max, b.rho.a[i]);
    }
    return h;
}

inline RangeHull range_hull(const Field& f, const Field& g, const Box& O) {
    RangeHull h{f.at(O.lo[0], O.lo[1], O.lo[2]), f.at(O.lo[0], O.lo[1], O.lo[2]),
                g.at(O.lo[0], O.lo[1], O.lo[2]), g.at(O.lo[0], O.lo[1], O.lo[2])};
    for_each_cell(O, [&](int ix, int iy, int it) {
        h.u_min = std::min(h.u_min, f.at(ix, iy, it));
        h.u_max = std::max(h.u_max, f.at(ix, iy, it));
        h.rho_min = std::min(h.rho_min, g.at(ix, iy, it));
        h.rho_max = std::max(h.rho_max, g.at(ix, iy, it));
    });
    return h;
}

// The EOS validity check over a hull: evaluates the four corners plus the
// edge midpoints; throws StateOutsideValidity if any is invalid.
inline void check_hull_validity(const EosSpec& eos, const RangeHull& h) {
    const double us[3] = {h.u_min, 0.5 * (h.u_min + h.u_max), h.u_max};
    const double rs[3] = {h.rho_min, 0.5 * (h.rho_min + h.rho_max), h.rho_max};
    for (double uu : us)
        for (double rr : rs) (void)eval_derivs(eos, {uu, rr});
}

}  // namespace onsager
