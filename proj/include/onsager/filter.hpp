#pragma once
// Discrete space-time mollification at scale ell: kernel construction,
// coarse-graining, Favre (density-weighted) filtering, coarse-graining
// cumulants in both the moment and the increment representation, fluctuation
// fields, filtered gradients via kernel-derivative stencils, and the
// composite-function defect.

#include "onsager/fields.hpp"

#include <map>

namespace onsager {

enum class MollifierProfile { PolynomialBump, SmoothBump };

struct MollifierSpec {
    MollifierProfile profile = MollifierProfile::SmoothBump;
    bool causal_in_time = false;
};

namespace detail {

inline double bump_value(MollifierProfile p, double z2) {
    if (z2 >= 1.0) return 0.0;
    if (p == MollifierProfile::PolynomialBump) {
        double q = 1.0 - z2;
        return q * q * q;
    }
    return std::exp(-1.0 / (1.0 - z2));
}

// dG/d(z^2)
inline double bump_slope(MollifierProfile p, double z2) {
    if (z2 >= 1.0) return 0.0;
    double q = 1.0 - z2;
    if (p == MollifierProfile::PolynomialBump) return -3.0 * q * q;
    return -std::exp(-1.0 / q) / (q * q);
}

}  // namespace detail

struct KernelTap {
    int rx, ry, rt;
    double w;                       // normalized weight, sums to 1
    std::array<double, 3> dw;       // derivative stencils: d/dx, d/dy, d/dt
};

struct FilterKernel {
    MollifierSpec spec;
    double ell = 0.0;
    // tap offset bounds per axis (inclusive); causal kernels have lo_off[2] >= 1
    std::array<int, 3> lo_off{0, 0, 0};
    std::array<int, 3> hi_off{0, 0, 0};
    std::vector<KernelTap> taps;

    double weight_sum() const {
        double s = 0;
        for (const auto& t : taps) s += t.w;
        return s;
    }
    double first_moment(int axis) const {  // metric units
        double s = 0;
        for (const auto& t : taps) {
            int r = axis == 0 ? t.rx : axis == 1 ? t.ry : t.rt;
            s += t.w * r;
        }
        return s;
    }
    double second_moment_x(const Grid& g) const {
        double s = 0;
        for (const auto& t : taps) s += t.w * (t.rx * g.dx[0]) * (t.rx * g.dx[0]);
        return s;
    }
    double deriv_sum(int axis) const {
        double s = 0;
        for (const auto& t : taps) s += t.dw[axis];
        return s;
    }
};

// Build the discrete kernel at scale ell. Weights are the radial profile
// sampled on the lattice metric ball and renormalized to sum exactly 1.
// Derivative stencils are the analytically differentiated profile, then
// discretized, then forced to zero sum by mean subtraction; finally each is
// rescaled to unit first moment so that filtering x and differentiating
// returns exactly 1.
inline FilterKernel build_kernel(const MollifierSpec& spec, double ell, const Grid& g) {
    if (!(ell > 0)) throw ScaleUnresolved("ell must be positive");
    if (ell < 2.0 * std::max({g.dx[0], g.d == 2 ? g.dx[1] : 0.0, g.c_ref * g.dt}))
        throw ScaleUnresolved("ell = " + format_double(ell) +
                              " smaller than two cells of the grid");
    FilterKernel K;
    K.spec = spec;
    K.ell = ell;

    const bool causal = spec.causal_in_time;
    // causal kernels live on a ball of radius ell/2 centered at tau = ell/2,
    // which stays inside the metric ball of radius ell and has tau > 0 only
    const double ar = causal ? ell / 2 : ell;   // spatial semi-axis
    const double at = causal ? ell / 2 : ell;   // time semi-axis (metric)
    const double tc = causal ? ell / 2 : 0.0;   // time center (metric)

    int rx_max = int(std::floor(ar / g.dx[0]));
    int ry_max = g.d == 2 ? int(std::floor(ar / g.dx[1])) : 0;
    double ct = g.c_ref * g.dt;
    int rt_lo = causal ? 1 : -int(std::floor(at / ct));
    int rt_hi = causal ? int(std::floor((tc + at) / ct)) : int(std::floor(at / ct));

    for (int rt = rt_lo; rt <= rt_hi; ++rt)
        for (int ry = -ry_max; ry <= ry_max; ++ry)
            for (int rx = -rx_max; rx <= rx_max; ++rx) {
                double mx = rx * g.dx[0];
                double my = g.d == 2 ? ry * g.dx[1] : 0.0;
                double mt = ct * rt - tc;
                double z2 = (mx * mx + my * my) / (ar * ar) + (mt * mt) / (at * at);
                if (z2 >= 1.0) continue;
                double gv = detail::bump_value(spec.profile, z2);
                if (gv <= 0.0) continue;
                KernelTap tap{rx, ry, rt, gv, {0, 0, 0}};
                // d/dR_k of G(z(R)) = dG/d(z^2) * d(z^2)/dR_k ; stencil is -1x that
                double slope = detail::bump_slope(spec.profile, z2);
                tap.dw[0] = -slope * 2.0 * mx / (ar * ar);
                tap.dw[1] = -slope * 2.0 * my / (ar * ar);
                tap.dw[2] = -slope * 2.0 * mt / (at * at);
                K.taps.push_back(tap);
            }
    if (K.taps.empty()) throw ScaleUnresolved("kernel has no interior taps");

    // normalize weights to 1
    double ws = 0;
    for (auto& t : K.taps) ws += t.w;
    for (auto& t : K.taps) t.w /= ws;

    // zero-sum then unit-first-moment calibration per axis
    int naxes = 3;
    for (int ax = 0; ax < naxes; ++ax) {
        if (ax == 1 && g.d == 1) {
            for (auto& t : K.taps) t.dw[1] = 0.0;
            continue;
        }
        double s = 0;
        for (auto& t : K.taps) s += t.dw[ax];
        double mean = s / double(K.taps.size());
        double moment = 0;
        for (auto& t : K.taps) {
            t.dw[ax] -= mean;
            double r = ax == 0 ? t.rx * g.dx[0]
                     : ax == 1 ? t.ry * g.dx[1]
                               : t.rt * g.dt;  // time stencil yields d/dt directly
            moment += t.dw[ax] * r;
        }
        if (!(std::abs(moment) > 0))
            throw ScaleUnresolved("degenerate derivative stencil on axis " +
                                  std::to_string(ax));
        for (auto& t : K.taps) t.dw[ax] /= moment;
    }

    K.lo_off = {K.taps[0].rx, K.taps[0].ry, K.taps[0].rt};
    K.hi_off = K.lo_off;
    for (const auto& t : K.taps) {
        K.lo_off[0] = std::min(K.lo_off[0], t.rx);
        K.hi_off[0] = std::max(K.hi_off[0], t.rx);
        K.lo_off[1] = std::min(K.lo_off[1], t.ry);
        K.hi_off[1] = std::max(K.hi_off[1], t.ry);
        K.lo_off[2] = std::min(K.lo_off[2], t.rt);
        K.hi_off[2] = std::max(K.hi_off[2], t.rt);
    }
    // require the stencil to actually resolve each participating axis
    if (K.hi_off[0] - K.lo_off[0] < 2 || K.hi_off[2] - K.lo_off[2] < 1 ||
        (g.d == 2 && K.hi_off[1] - K.lo_off[1] < 2))
        throw ScaleUnresolved("stencil thinner than two cells on some axis");
    return K;
}

// The box on which filtered fields of data on `data` are defined: shrunk by
// the tap extent on non-periodic axes.
inline Box filtered_box(const Grid& g, const FilterKernel& K, const Box& data) {
    Box b = data;
    if (!g.periodic[0]) {
        b.lo[0] -= K.lo_off[0];
        b.hi[0] -= K.hi_off[0];
    }
    if (g.d == 2 && !g.periodic[1]) {
        b.lo[1] -= K.lo_off[1];
        b.hi[1] -= K.hi_off[1];
    }
    b.lo[2] -= K.lo_off[2];
    b.hi[2] -= K.hi_off[2];
    if (b.empty()) throw ScaleExceedsMargin("filter scale leaves no valid cells");
    return b;
}

// A copy of f covering out expanded by the tap extents, with periodic wrap.
// Lets the convolution run with constant flat offsets.
struct PaddedField {
    Field data;
};

inline PaddedField pad_for_kernel(const Grid& g, const Field& f, const FilterKernel& K,
                                  const Box& out) {
    Box pb = out;
    for (int a = 0; a < 3; ++a) {
        pb.lo[a] += K.lo_off[a];
        pb.hi[a] += K.hi_off[a];
    }
    PaddedField p{Field(pb)};
    for_each_cell(pb, [&](int ix, int iy, int it) {
        int jx = ix, jy = iy;
        if (g.periodic[0]) jx = f.box.lo[0] + detail::wrap(ix - f.box.lo[0], f.box.extent(0));
        if (g.d == 2 && g.periodic[1])
            jy = f.box.lo[1] + detail::wrap(iy - f.box.lo[1], f.box.extent(1));
        if (jx < f.box.lo[0] || jx >= f.box.hi[0] || jy < f.box.lo[1] ||
            jy >= f.box.hi[1] || it < f.box.lo[2] || it >= f.box.hi[2])
            throw ScaleExceedsMargin("field does not cover the kernel support");
        p.data.at(ix, iy, it) = f.at(jx, jy, it);
    });
    return p;
}

namespace detail {

// which = -1: weights; 0..2: derivative stencil for that axis
inline Field apply_taps(const Grid&, const FilterKernel& K, const PaddedField& p,
                        const Box& out, int which) {
    Field r(out);
    const Field& src = p.data;
    const int ex = out.extent(0);
    const std::ptrdiff_t sy = src.box.extent(0);
    const std::ptrdiff_t st = std::ptrdiff_t(src.box.extent(0)) * src.box.extent(1);
    for (const auto& tap : K.taps) {
        const double w = which < 0 ? tap.w : tap.dw[which];
        if (w == 0.0) continue;
        const std::ptrdiff_t off = tap.rt * st + tap.ry * sy + tap.rx;
        for (int it = out.lo[2]; it < out.hi[2]; ++it)
            for (int iy = out.lo[1]; iy < out.hi[1]; ++iy) {
                double* po = &r.a[r.offset(out.lo[0], iy, it)];
                const double* ps = &src.a[src.offset(out.lo[0], iy, it)] + off;
                for (int i = 0; i < ex; ++i) po[i] += w * ps[i];
            }
    }
    return r;
}

}  // namespace detail

inline Field apply_weights(const Grid& g, const FilterKernel& K, const PaddedField& p,
                           const Box& out) {
    return detail::apply_taps(g, K, p, out, -1);
}
// axis: 0, 1 spatial (d/dx_k); 2 gives the time derivative d/dt.
inline Field apply_derivative(const Grid& g, const FilterKernel& K, const PaddedField& p,
                              const Box& out, int axis) {
    return detail::apply_taps(g, K, p, out, axis);
}

// ---------------------------------------------------------------------------
// Strided evaluation: filtered fields sampled on the sublattice
// anchor + stride * k of the fine grid. The stencil quadrature itself always
// runs on the fine lattice; only the set of evaluation points is thinned.
// The outputs live on a self-consistent coarse Grid for downstream analysis.
// ---------------------------------------------------------------------------

struct StridedLayout {
    Grid coarse;                    // analysis grid (fine spacing * stride)
    std::array<int, 3> stride{1, 1, 1};
    std::array<int, 3> anchor{0, 0, 0};  // fine index of coarse index 0
    Box box;                        // output box in coarse indices

    int fine_index(int axis, int coarse_index) const {
        return anchor[axis] + stride[axis] * coarse_index;
    }
    Box fine_hull() const {  // fine-index hull of the strided points
        Box b;
        for (int a = 0; a < 3; ++a) {
            b.lo[a] = fine_index(a, box.lo[a]);
            b.hi[a] = fine_index(a, box.hi[a] - 1) + 1;
        }
        return b;
    }
};

// Lay a strided analysis lattice over a fine-grid box.
inline StridedLayout make_strided_layout(const Grid& g, const Box& fine_box,
                                         std::array<int, 3> stride) {
    if (g.d == 1) stride[1] = 1;
    StridedLayout lay;
    lay.stride = stride;
    lay.anchor = {fine_box.lo[0], fine_box.lo[1], fine_box.lo[2]};
    for (int a = 0; a < 3; ++a) {
        if (stride[a] < 1) throw ConfigError("stride must be >= 1");
        int ext = (fine_box.extent(a) - 1) / stride[a] + 1;
        lay.box.lo[a] = 0;
        lay.box.hi[a] = ext;
    }
    lay.coarse = g;
    lay.coarse.nx = {lay.box.hi[0], lay.box.hi[1]};
    lay.coarse.dx = {g.dx[0] * stride[0], g.dx[1] * stride[1]};
    lay.coarse.nt = lay.box.hi[2];
    lay.coarse.dt = g.dt * stride[2];
    lay.coarse.periodic = {false, false};
    lay.coarse.x0[0] = g.x(lay.anchor[0]);
    lay.coarse.x0[1] = g.d == 2 ? g.y(lay.anchor[1]) : 0.0;
    lay.coarse.t0 = g.t(lay.anchor[2]);
    lay.coarse.validate();
    return lay;
}

inline PaddedField pad_for_layout(const Grid& g, const Field& f, const FilterKernel& K,
                                  const StridedLayout& lay) {
    return pad_for_kernel(g, f, K, lay.fine_hull());
}

namespace detail {

inline Field apply_taps_strided(const FilterKernel& K, const PaddedField& p,
                                const StridedLayout& lay, int which) {
    Field r(lay.box);
    const Field& src = p.data;
    const int ex = lay.box.extent(0);
    const std::ptrdiff_t sy = src.box.extent(0);
    const std::ptrdiff_t st = std::ptrdiff_t(src.box.extent(0)) * src.box.extent(1);
    const std::ptrdiff_t sx_str = lay.stride[0];
    for (const auto& tap : K.taps) {
        const double w = which < 0 ? tap.w : tap.dw[which];
        if (w == 0.0) continue;
        const std::ptrdiff_t off = tap.rt * st + tap.ry * sy + tap.rx;
        for (int it = lay.box.lo[2]; it < lay.box.hi[2]; ++it)
            for (int iy = lay.box.lo[1]; iy < lay.box.hi[1]; ++iy) {
                double* po = &r.a[r.offset(lay.box.lo[0], iy, it)];
                const double* ps =
                    &src.a[src.offset(lay.fine_index(0, lay.box.lo[0]),
                                      lay.fine_index(1, iy), lay.fine_index(2, it))] +
                    off;
                for (int i = 0; i < ex; ++i) po[i] += w * ps[i * sx_str];
            }
    }
    return r;
}

}  // namespace detail

inline Field coarse_grain(const Grid& g, const Field& f, const FilterKernel& K) {
    Box out = filtered_box(g, K, f.box);
    return apply_weights(g, K, pad_for_kernel(g, f, K, out), out);
}
inline Field coarse_grain(const Grid& g, const Field& f, const FilterKernel& K,
                          const Box& out) {
    return apply_weights(g, K, pad_for_kernel(g, f, K, out), out);
}

inline Field grad_filtered(const Grid& g, const Field& f, const FilterKernel& K, int axis) {
    Box out = filtered_box(g, K, f.box);
    return apply_derivative(g, K, pad_for_kernel(g, f, K, out), out, axis);
}
inline Field grad_filtered(const Grid& g, const Field& f, const FilterKernel& K, int axis,
                           const Box& out) {
    return apply_derivative(g, K, pad_for_kernel(g, f, K, out), out, axis);
}

inline Field product(const Field& a, const Field& b) {
    if (!(a.box == b.box)) throw Error("field box mismatch in product");
    Field r(a.box);
    for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] = a.a[i] * b.a[i];
    return r;
}

inline Field favre(const Grid& g, const Field& f, const Field& rho, const FilterKernel& K,
                   const Box& out) {
    Field num = coarse_grain(g, product(rho, f), K, out);
    Field den = coarse_grain(g, rho, K, out);
    for (std::size_t i = 0; i < num.a.size(); ++i) num.a[i] /= den.a[i];
    return num;
}
inline Field favre(const Grid& g, const Field& f, const Field& rho, const FilterKernel& K) {
    return favre(g, f, rho, K, filtered_box(g, K, f.box));
}

// ---------------------------------------------------------------------------
// Coarse-graining cumulants (moment representation).
// ---------------------------------------------------------------------------

inline Field cumulant2(const Grid& g, const Field& f, const Field& h,
                       const FilterKernel& K, const Box& out) {
    Field r = coarse_grain(g, product(f, h), K, out);
    Field bf = coarse_grain(g, f, K, out), bh = coarse_grain(g, h, K, out);
    for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] -= bf.a[i] * bh.a[i];
    return r;
}
inline Field cumulant2(const Grid& g, const Field& f, const Field& h,
                       const FilterKernel& K) {
    return cumulant2(g, f, h, K, filtered_box(g, K, f.box));
}

inline Field cumulant3(const Grid& g, const Field& f, const Field& h, const Field& m,
                       const FilterKernel& K, const Box& out) {
    Field bf = coarse_grain(g, f, K, out), bh = coarse_grain(g, h, K, out),
          bm = coarse_grain(g, m, K, out);
    Field t_fh = cumulant2(g, f, h, K, out), t_fm = cumulant2(g, f, m, K, out),
          t_hm = cumulant2(g, h, m, K, out);
    Field r = coarse_grain(g, product(product(f, h), m), K, out);
    for (std::size_t i = 0; i < r.a.size(); ++i)
        r.a[i] -= bf.a[i] * t_hm.a[i] + bh.a[i] * t_fm.a[i] + bm.a[i] * t_fh.a[i] +
                  bf.a[i] * bh.a[i] * bm.a[i];
    return r;
}
inline Field cumulant3(const Grid& g, const Field& f, const Field& h, const Field& m,
                       const FilterKernel& K) {
    return cumulant3(g, f, h, m, K, filtered_box(g, K, f.box));
}

// Fourth joint cumulant from filtered moments (used by the Favre expansion).
inline Field cumulant4(const Grid& g, const Field& a, const Field& b, const Field& c,
                       const Field& d, const FilterKernel& K, const Box& out) {
    const Field* F[4] = {&a, &b, &c, &d};
    Field bar[4] = {coarse_grain(g, a, K, out), coarse_grain(g, b, K, out),
                    coarse_grain(g, c, K, out), coarse_grain(g, d, K, out)};
    auto c2 = [&](int i, int j) { return cumulant2(g, *F[i], *F[j], K, out); };
    auto c3 = [&](int i, int j, int k) { return cumulant3(g, *F[i], *F[j], *F[k], K, out); };
    Field m4 = coarse_grain(g, product(product(a, b), product(c, d)), K, out);
    // subtract every partition of {a,b,c,d} except the connected one
    const int singles[4][4] = {{0, 1, 2, 3}, {1, 0, 2, 3}, {2, 0, 1, 3}, {3, 0, 1, 2}};
    Field r = m4;
    for (auto& s : singles) {
        Field t = c3(s[1], s[2], s[3]);
        for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] -= bar[s[0]].a[i] * t.a[i];
    }
    const int pairs[3][4] = {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2}};
    for (auto& pr : pairs) {
        Field t1 = c2(pr[0], pr[1]), t2 = c2(pr[2], pr[3]);
        for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] -= t1.a[i] * t2.a[i];
    }
    const int two_singles[6][4] = {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2},
                                   {1, 2, 0, 3}, {1, 3, 0, 2}, {2, 3, 0, 1}};
    for (auto& ts : two_singles) {
        Field t = c2(ts[2], ts[3]);
        for (std::size_t i = 0; i < r.a.size(); ++i)
            r.a[i] -= bar[ts[0]].a[i] * bar[ts[1]].a[i] * t.a[i];
    }
    for (std::size_t i = 0; i < r.a.size(); ++i)
        r.a[i] -= bar[0].a[i] * bar[1].a[i] * bar[2].a[i] * bar[3].a[i];
    return r;
}

// ---------------------------------------------------------------------------
// Increment representation (verification mode): cumulants of the difference
// fields delta f(R; X) averaged over R with the kernel weights.
// ---------------------------------------------------------------------------

namespace detail {

template <int N>
inline void increment_cumulant(const Grid& g, const FilterKernel& K,
                               const std::array<const Field*, N>& F, const Box& out,
                               Field& result) {
    std::array<PaddedField, N> pads;
    for (int i = 0; i < N; ++i) pads[i] = pad_for_kernel(g, *F[i], K, out);
    for_each_cell(out, [&](int ix, int iy, int it) {
        double base[N], m1[N] = {0}, m2[N][N] = {{0}}, m3 = 0;
        for (int i = 0; i < N; ++i) base[i] = pads[i].data.at(ix, iy, it);
        for (const auto& tap : K.taps) {
            double d[N];
            for (int i = 0; i < N; ++i)
                d[i] = pads[i].data.at(ix + tap.rx, iy + tap.ry, it + tap.rt) - base[i];
            for (int i = 0; i < N; ++i) m1[i] += tap.w * d[i];
            for (int i = 0; i < N; ++i)
                for (int j = i; j < N; ++j) m2[i][j] += tap.w * d[i] * d[j];
            if constexpr (N == 3) m3 += tap.w * d[0] * d[1] * d[2];
        }
        double v;
        if constexpr (N == 2) {
            v = m2[0][1] - m1[0] * m1[1];
        } else {
            double c01 = m2[0][1] - m1[0] * m1[1];
            double c02 = m2[0][2] - m1[0] * m1[2];
            double c12 = m2[1][2] - m1[1] * m1[2];
            v = m3 - m1[0] * c12 - m1[1] * c02 - m1[2] * c01 - m1[0] * m1[1] * m1[2];
        }
        result.at(ix, iy, it) = v;
    });
}

}  // namespace detail

inline Field cumulant2_via_increments(const Grid& g, const Field& f, const Field& h,
                                      const FilterKernel& K, const Box& out) {
    Field r(out);
    detail::increment_cumulant<2>(g, K, {&f, &h}, out, r);
    return r;
}

inline Field cumulant3_via_increments(const Grid& g, const Field& f, const Field& h,
                                      const Field& m, const FilterKernel& K, const Box& out) {
    Field r(out);
    detail::increment_cumulant<3>(g, K, {&f, &h, &m}, out, r);
    return r;
}

// ---------------------------------------------------------------------------
// Favre cumulants: route (i) density-weighted moments; route (ii) expansion
// in unweighted cumulants. The two must agree to 1e-10 relative.
// ---------------------------------------------------------------------------

inline Field favre_cumulant2(const Grid& g, const Field& f, const Field& h,
                             const Field& rho, const FilterKernel& K, const Box& out) {
    Field r = favre(g, product(f, h), rho, K, out);
    Field tf = favre(g, f, rho, K, out), th = favre(g, h, rho, K, out);
    for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] -= tf.a[i] * th.a[i];
    return r;
}

inline Field favre_cumulant2_expanded(const Grid& g, const Field& f, const Field& h,
                                      const Field& rho, const FilterKernel& K,
                                      const Box& out) {
    Field r = cumulant2(g, f, h, K, out);
    Field br = coarse_grain(g, rho, K, out);
    Field t3 = cumulant3(g, rho, f, h, K, out);
    Field trf = cumulant2(g, rho, f, K, out), trh = cumulant2(g, rho, h, K, out);
    for (std::size_t i = 0; i < r.a.size(); ++i)
        r.a[i] += t3.a[i] / br.a[i] - trf.a[i] * trh.a[i] / (br.a[i] * br.a[i]);
    return r;
}

inline Field favre_cumulant3(const Grid& g, const Field& f, const Field& h, const Field& m,
                             const Field& rho, const FilterKernel& K, const Box& out) {
    Field r = favre(g, product(product(f, h), m), rho, K, out);
    Field tf = favre(g, f, rho, K, out), th = favre(g, h, rho, K, out),
          tm = favre(g, m, rho, K, out);
    Field c_fh = favre_cumulant2(g, f, h, rho, K, out),
          c_fm = favre_cumulant2(g, f, m, rho, K, out),
          c_hm = favre_cumulant2(g, h, m, rho, K, out);
    for (std::size_t i = 0; i < r.a.size(); ++i)
        r.a[i] -= tf.a[i] * c_hm.a[i] + th.a[i] * c_fm.a[i] + tm.a[i] * c_fh.a[i] +
                  tf.a[i] * th.a[i] * tm.a[i];
    return r;
}

inline Field favre_cumulant3_expanded(const Grid& g, const Field& f, const Field& h,
                                      const Field& m, const Field& rho,
                                      const FilterKernel& K, const Box& out) {
    Field r = cumulant3(g, f, h, m, K, out);
    Field br = coarse_grain(g, rho, K, out);
    Field t4 = cumulant4(g, rho, f, h, m, K, out);
    Field trf = cumulant2(g, rho, f, K, out), trh = cumulant2(g, rho, h, K, out),
          trm = cumulant2(g, rho, m, K, out);
    Field t_rhm = cumulant3(g, rho, h, m, K, out), t_rfm = cumulant3(g, rho, f, m, K, out),
          t_rfh = cumulant3(g, rho, f, h, K, out);
    for (std::size_t i = 0; i < r.a.size(); ++i) {
        double b = br.a[i], b2 = b * b, b3 = b2 * b;
        r.a[i] += t4.a[i] / b
                  - (trf.a[i] * t_rhm.a[i] + trh.a[i] * t_rfm.a[i] + trm.a[i] * t_rfh.a[i]) / b2
                  + 2.0 * trf.a[i] * trh.a[i] * trm.a[i] / b3;
    }
    return r;
}

// f'_ell = f - bar(f) on the valid box.
inline Field fluctuation(const Grid& g, const Field& f, const FilterKernel& K,
                         const Box& out) {
    Field r = coarse_grain(g, f, K, out);
    for_each_cell(out, [&](int ix, int iy, int it) {
        r.at(ix, iy, it) = f.at(ix, iy, it) - r.at(ix, iy, it);
    });
    return r;
}
inline Field fluctuation(const Grid& g, const Field& f, const FilterKernel& K) {
    return fluctuation(g, f, K, filtered_box(g, K, f.box));
}

// Delta_ell h = bar(h(f,g)) - h(bar f, bar g) for a smooth two-argument h.
// h is evaluated both at raw and at filtered states, so an h that rejects
// states outside its validity region enforces the precondition itself.
inline Field composite_defect(const Grid& g,
                              const std::function<double(double, double)>& h,
                              const Field& f, const Field& fb, const FilterKernel& K,
                              const Box& out) {
    Field hf(f.box);
    for (std::size_t i = 0; i < hf.a.size(); ++i) hf.a[i] = h(f.a[i], fb.a[i]);
    Field r = coarse_grain(g, hf, K, out);
    Field barf = coarse_grain(g, f, K, out), barb = coarse_grain(g, fb, K, out);
    for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] -= h(barf.a[i], barb.a[i]);
    return r;
}

// Convenience bundle: plain and Favre filtered copies of named fields plus
// second/third cumulants, on the shared valid box.
struct FilteredSet {
    Box valid;
    std::map<std::string, Field> bar;
    std::map<std::string, Field> tilde;
    std::map<std::string, Field> cumulants;
};

inline FilteredSet filter_set(const FieldBlock& blk, const FilterKernel& K) {
    const Grid& g = blk.grid;
    FilteredSet s;
    s.valid = filtered_box(g, K, blk.box());
    s.bar["rho"] = coarse_grain(g, blk.rho, K, s.valid);
    s.bar["u"] = coarse_grain(g, blk.u, K, s.valid);
    s.tilde["u"] = favre(g, blk.u, blk.rho, K, s.valid);
    for (int c = 0; c < g.d; ++c) {
        std::string n = c == 0 ? "vx" : "vy";
        s.bar[n] = coarse_grain(g, blk.v[c], K, s.valid);
        s.tilde[n] = favre(g, blk.v[c], blk.rho, K, s.valid);
        s.cumulants["tau(rho," + n + ")"] = cumulant2(g, blk.rho, blk.v[c], K, s.valid);
        s.cumulants["ftau(" + n + "," + n + ")"] =
            favre_cumulant2(g, blk.v[c], blk.v[c], blk.rho, K, s.valid);
    }
    return s;
}

}  // namespace onsager
