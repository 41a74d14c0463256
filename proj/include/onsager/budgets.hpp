#pragma once
// Coarse-grained balance budgets: every term of the resolved/unresolved
// kinetic-energy, internal-energy and entropy balances, pointwise viscous
// dissipation fields, filtered conservation-law residuals, and smearing
// against compactly supported test functions.
//
// Filtered quantities are carried as value-plus-gradient bundles (Fv). All
// gradients of raw filtered moments come from the kernel-derivative stencils;
// gradients of products, quotients and thermodynamic compositions are then
// assembled by exact discrete product/chain rules, which is what makes the
// algebraic identities between budgets hold to rounding.

#include "onsager/filter.hpp"

#include <optional>

namespace onsager {

// ---------------------------------------------------------------------------
// Test functions
// ---------------------------------------------------------------------------

struct TestFunction {
    std::string name;
    Box support;
    Field values;     // on the support box; vanishes with all derivatives at its edge
    double integral;  // plain quadrature of phi
};

// Tensor-product bump centered at fractional position `center` of `region`
// with half-widths `halfwidth` (fractions of the region extent per axis).
inline TestFunction make_bump(const Grid& g, const Box& region, const std::string& name,
                              std::array<double, 3> center, std::array<double, 3> halfwidth) {
    TestFunction tf;
    tf.name = name;
    double c[3], h[3];
    for (int a = 0; a < 3; ++a) {
        double lo = region.lo[a], ext = region.extent(a);
        c[a] = lo + center[a] * ext;
        h[a] = halfwidth[a] * ext;
        if (!(h[a] > 0)) throw ConfigError("test function halfwidth must be positive");
    }
    Box supp;
    for (int a = 0; a < 3; ++a) {
        supp.lo[a] = std::max(region.lo[a], int(std::ceil(c[a] - h[a])));
        supp.hi[a] = std::min(region.hi[a], int(std::floor(c[a] + h[a])) + 1);
    }
    if (g.d == 1) {
        supp.lo[1] = region.lo[1];
        supp.hi[1] = region.hi[1];
    }
    if (supp.empty()) throw ConfigError("test function support is empty");
    tf.support = supp;
    tf.values = Field(supp);
    auto bump1 = [](double z) {
        double z2 = z * z;
        return z2 < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - z2)) : 0.0;
    };
    for_each_cell(supp, [&](int ix, int iy, int it) {
        double v = bump1((ix - c[0]) / h[0]) * bump1((it - c[2]) / h[2]);
        if (g.d == 2) v *= bump1((iy - c[1]) / h[1]);
        tf.values.at(ix, iy, it) = v;
    });
    tf.integral = 0;
    for (double v : tf.values.a) tf.integral += v;
    tf.integral *= g.cell_measure();
    return tf;
}

// Three independent default bumps inside `region`, each half the region wide.
inline std::vector<TestFunction> default_test_functions(const Grid& g, const Box& region) {
    return {make_bump(g, region, "phi0", {0.5, 0.5, 0.5}, {0.25, 0.25, 0.25}),
            make_bump(g, region, "phi1", {0.42, 0.5, 0.4}, {0.25, 0.25, 0.25}),
            make_bump(g, region, "phi2", {0.58, 0.5, 0.6}, {0.25, 0.25, 0.25})};
}

// Test function pinned in physical coordinates (x, y, t), so the same bump
// can be materialized on the analysis grid of every filter scale.
struct BumpSpec {
    std::string name;
    std::array<double, 3> center{0, 0, 0};     // physical (x, y, t)
    std::array<double, 3> halfwidth{1, 1, 1};  // physical half extents
};

inline double bump_profile(double z) {
    double z2 = z * z;
    return z2 < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - z2)) : 0.0;
}

inline TestFunction materialize_bump(const Grid& g, const BumpSpec& spec) {
    TestFunction tf;
    tf.name = spec.name;
    // truncating a bump against the grid would silently change the smearing
    // functional between scales, so out-of-range supports are an error
    auto index_range = [&](double c, double h, double origin, double step, int n, int axis) {
        int lo = int(std::ceil((c - h - origin) / step));
        int hi = int(std::floor((c + h - origin) / step)) + 1;
        if (lo < 0 || hi > n)
            throw SupportExceedsValidRegion("test function " + spec.name +
                                            " leaves the grid on axis " +
                                            std::to_string(axis));
        return std::pair{lo, hi};
    };
    auto [xlo, xhi] = index_range(spec.center[0], spec.halfwidth[0], g.x0[0], g.dx[0],
                                  g.nx[0], 0);
    auto [tlo, thi] =
        index_range(spec.center[2], spec.halfwidth[2], g.t0, g.dt, g.nt, 2);
    Box supp{{xlo, 0, tlo}, {xhi, 1, thi}};
    if (g.d == 2) {
        auto [ylo, yhi] = index_range(spec.center[1], spec.halfwidth[1], g.x0[1], g.dx[1],
                                      g.nx[1], 1);
        supp.lo[1] = ylo;
        supp.hi[1] = yhi;
    }
    if (supp.empty()) throw ConfigError("test function " + spec.name + " has empty support");
    tf.support = supp;
    tf.values = Field(supp);
    for_each_cell(supp, [&](int ix, int iy, int it) {
        double v = bump_profile((g.x(ix) - spec.center[0]) / spec.halfwidth[0]) *
                   bump_profile((g.t(it) - spec.center[2]) / spec.halfwidth[2]);
        if (g.d == 2) v *= bump_profile((g.y(iy) - spec.center[1]) / spec.halfwidth[1]);
        tf.values.at(ix, iy, it) = v;
    });
    tf.integral = 0;
    for (double v : tf.values.a) tf.integral += v;
    tf.integral *= g.cell_measure();
    return tf;
}

// Analytic time-line integral of the bump along x = x0 (d = 1), by composite
// Simpson quadrature of the exact profile; grid-independent oracle for the
// point-source limits of steady shocks.
inline double bump_time_column(const BumpSpec& spec, double x0, int nquad = 4000) {
    double fx = bump_profile((x0 - spec.center[0]) / spec.halfwidth[0]);
    if (fx == 0.0) return 0.0;
    double a = spec.center[2] - spec.halfwidth[2];
    double b = spec.center[2] + spec.halfwidth[2];
    double h = (b - a) / nquad;
    double acc = 0.0;  // endpoints vanish
    for (int k = 1; k < nquad; ++k)
        acc += (k % 2 ? 4.0 : 2.0) *
               bump_profile((a + k * h - spec.center[2]) / spec.halfwidth[2]);
    return fx * acc * h / 3.0;
}

inline double smear(const Grid& g, const Field& f, const TestFunction& phi) {
    if (!f.box.contains(phi.support))
        throw SupportExceedsValidRegion("test function support " + phi.name +
                                        " not inside field box");
    double acc = 0;
    for_each_cell(phi.support, [&](int ix, int iy, int it) {
        acc += phi.values.at(ix, iy, it) * f.at(ix, iy, it);
    });
    return acc * g.cell_measure();
}

// ---------------------------------------------------------------------------
// Pointwise viscous fields (centered differences on the unfiltered grid)
// ---------------------------------------------------------------------------

struct DissipationFields {
    Box box;
    Field Q_eta, Q_zeta, Q, Sigma_eta, Sigma_zeta, Sigma_kappa, Sigma;
    Field Theta, temperature, pressure;
    std::array<std::array<Field, 2>, 2> stress;  // viscous stress tensor T_ij
    std::array<Field, 2> heat_flux;              // q_k
};

namespace detail {

// centered difference along a spatial axis; valid box shrinks on
// non-periodic axes (one-sided edges are excluded, never used)
inline double cdiff(const Grid& g, const Field& f, int ix, int iy, int it, int axis) {
    int n = g.nx[axis];
    int i = axis == 0 ? ix : iy;
    int ip = i + 1, im = i - 1;
    if (g.periodic[axis]) {
        ip = wrap(ip, n);
        im = wrap(im, n);
    }
    double fp = axis == 0 ? f.at(ip, iy, it) : f.at(ix, ip, it);
    double fm = axis == 0 ? f.at(im, iy, it) : f.at(ix, im, it);
    return (fp - fm) / (2.0 * g.dx[axis]);
}

inline Box interior_spatial(const Grid& g, const Box& b) {
    Box r = b;
    if (!g.periodic[0]) {
        r.lo[0] += 1;
        r.hi[0] -= 1;
    }
    if (g.d == 2 && !g.periodic[1]) {
        r.lo[1] += 1;
        r.hi[1] -= 1;
    }
    return r;
}

}  // namespace detail

inline DissipationFields dissipation_fields(const FieldBlock& blk, const EosSpec& eos,
                                            const TransportModel& tm) {
    if (!(blk.eps > 0) || !(tm.eps > 0))
        throw RequiresViscousData("dissipation fields need eps > 0 data");
    const Grid& g = blk.grid;
    const int d = g.d;
    Box box = detail::interior_spatial(g, blk.box());
    DissipationFields r;
    r.box = box;
    for (Field* f : {&r.Q_eta, &r.Q_zeta, &r.Q, &r.Sigma_eta, &r.Sigma_zeta,
                     &r.Sigma_kappa, &r.Sigma, &r.Theta, &r.temperature, &r.pressure})
        *f = Field(box);
    for (int i = 0; i < d; ++i) {
        r.heat_flux[i] = Field(box);
        for (int j = 0; j < d; ++j) r.stress[i][j] = Field(box);
    }
    // temperature first (its gradient is needed)
    for_each_cell(box, [&](int ix, int iy, int it) {
        auto ev = eval_derivs(eos, {blk.u.at(ix, iy, it), blk.rho.at(ix, iy, it)});
        r.temperature.at(ix, iy, it) = ev.T;
        r.pressure.at(ix, iy, it) = ev.p;
    });
    Box core = detail::interior_spatial(g, box);
    for_each_cell(core, [&](int ix, int iy, int it) {
        ThermoState st{blk.u.at(ix, iy, it), blk.rho.at(ix, iy, it)};
        TransportEval tr = transport(tm, eos, st);
        double grad_v[2][2] = {{0, 0}, {0, 0}};
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                grad_v[i][j] = detail::cdiff(g, blk.v[j], ix, iy, it, i);
        double theta = 0;
        for (int i = 0; i < d; ++i) theta += grad_v[i][i];
        double S[2][2] = {{0, 0}, {0, 0}};
        double S2 = 0;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                S[i][j] = 0.5 * (grad_v[i][j] + grad_v[j][i]) -
                          (i == j ? theta / d : 0.0);
                S2 += S[i][j] * S[i][j];
            }
        double T = r.temperature.at(ix, iy, it);
        double q_eta = 2.0 * tr.eta * S2;
        double q_zeta = tr.zeta * theta * theta;
        double gT2 = 0;
        for (int i = 0; i < d; ++i) {
            double gT = detail::cdiff(g, r.temperature, ix, iy, it, i);
            gT2 += gT * gT;
            r.heat_flux[i].at(ix, iy, it) = -tr.kappa * gT;
        }
        r.Theta.at(ix, iy, it) = theta;
        r.Q_eta.at(ix, iy, it) = q_eta;
        r.Q_zeta.at(ix, iy, it) = q_zeta;
        r.Q.at(ix, iy, it) = q_eta + q_zeta;
        r.Sigma_eta.at(ix, iy, it) = q_eta / T;
        r.Sigma_zeta.at(ix, iy, it) = q_zeta / T;
        r.Sigma_kappa.at(ix, iy, it) = tr.kappa * gT2 / (T * T);
        r.Sigma.at(ix, iy, it) = (q_eta + q_zeta) / T + tr.kappa * gT2 / (T * T);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                r.stress[i][j].at(ix, iy, it) =
                    -2.0 * tr.eta * S[i][j] - (i == j ? tr.zeta * theta : 0.0);
    });
    r.box = core;  // one extra ring was needed for grad T
    for (Field* f : {&r.Q_eta, &r.Q_zeta, &r.Q, &r.Sigma_eta, &r.Sigma_zeta,
                     &r.Sigma_kappa, &r.Sigma, &r.Theta, &r.temperature, &r.pressure}) {
        Field c(core);
        for_each_cell(core, [&](int ix, int iy, int it) { c.at(ix, iy, it) = f->at(ix, iy, it); });
        *f = std::move(c);
    }
    for (int i = 0; i < d; ++i) {
        Field c(core);
        for_each_cell(core, [&](int ix, int iy, int it) { c.at(ix, iy, it) = r.heat_flux[i].at(ix, iy, it); });
        r.heat_flux[i] = std::move(c);
        for (int j = 0; j < d; ++j) {
            Field cc(core);
            for_each_cell(core, [&](int ix, int iy, int it) { cc.at(ix, iy, it) = r.stress[i][j].at(ix, iy, it); });
            r.stress[i][j] = std::move(cc);
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Fv: filtered value with its kernel-derivative gradients.
// grad slots: [0], [1] spatial, [2] time (actual d/dt).
// ---------------------------------------------------------------------------

struct Fv {
    Field v;
    std::array<Field, 3> g;
};

namespace fvops {

inline std::vector<int> axes(const Grid& g) {
    return g.d == 2 ? std::vector<int>{0, 1, 2} : std::vector<int>{0, 2};
}

inline Fv make(const Grid& gr, const Field& raw, const FilterKernel& K, const Box& out) {
    PaddedField p = pad_for_kernel(gr, raw, K, out);
    Fv r;
    r.v = apply_weights(gr, K, p, out);
    for (int a : axes(gr)) r.g[a] = apply_derivative(gr, K, p, out, a);
    return r;
}

inline Fv make_strided(const Grid& fine, const Field& raw, const FilterKernel& K,
                       const StridedLayout& lay) {
    PaddedField p = pad_for_layout(fine, raw, K, lay);
    Fv r;
    r.v = detail::apply_taps_strided(K, p, lay, -1);
    for (int a : axes(lay.coarse)) r.g[a] = detail::apply_taps_strided(K, p, lay, a);
    return r;
}

inline Fv constant(const Grid& gr, const Box& out, double c) {
    Fv r;
    r.v = Field(out, c);
    for (int a : axes(gr)) r.g[a] = Field(out, 0.0);
    return r;
}

inline Fv add(const Grid& gr, const Fv& a, const Fv& b) {
    Fv r = a;
    r.v += b.v;
    for (int ax : axes(gr)) r.g[ax] += b.g[ax];
    return r;
}
inline Fv sub(const Grid& gr, const Fv& a, const Fv& b) {
    Fv r = a;
    r.v -= b.v;
    for (int ax : axes(gr)) r.g[ax] -= b.g[ax];
    return r;
}
inline Fv scale(const Grid& gr, const Fv& a, double c) {
    Fv r = a;
    r.v *= c;
    for (int ax : axes(gr)) r.g[ax] *= c;
    return r;
}
inline Fv mul(const Grid& gr, const Fv& a, const Fv& b) {
    Fv r;
    r.v = product(a.v, b.v);
    for (int ax : axes(gr)) {
        Field t = product(a.g[ax], b.v);
        Field t2 = product(a.v, b.g[ax]);
        t += t2;
        r.g[ax] = std::move(t);
    }
    return r;
}
inline Fv div(const Grid& gr, const Fv& a, const Fv& b) {
    Fv r;
    r.v = a.v;
    for (std::size_t i = 0; i < r.v.a.size(); ++i) r.v.a[i] /= b.v.a[i];
    for (int ax : axes(gr)) {
        Field t(a.v.box);
        for (std::size_t i = 0; i < t.a.size(); ++i)
            t.a[i] = (a.g[ax].a[i] - r.v.a[i] * b.g[ax].a[i]) / b.v.a[i];
        r.g[ax] = std::move(t);
    }
    return r;
}

}  // namespace fvops

// ---------------------------------------------------------------------------
// FilteredState: every filtered moment a budget needs, on one common box.
// ---------------------------------------------------------------------------

struct FilteredState {
    Grid grid;  // analysis grid: the data grid, or the strided coarse grid
    FilterKernel kernel;
    Box out;
    bool viscous = false;
    double eps = 0.0;
    bool strided = false;
    StridedLayout layout;  // meaningful when strided

    Fv rho, u, p, E;
    std::array<Fv, 2> j, vbar, rvvv, hv, uv, pv, q, Tv;
    std::array<std::array<Fv, 2>, 2> rvv, stress;
    Fv Qbar, pTheta;  // viscous only

    // derived, value-only
    Field theta_bar;  // div of bar v via kernel derivatives
};

// Builds the filtered state. The data box may be shrunk by `exclude_cells`
// on non-periodic spatial axes (sponge exclusion) before filtering; `request`
// further restricts the output box (to a test-function neighborhood). With a
// stride > 1 the filtered fields are evaluated on a thinned sublattice and
// all downstream analysis runs on the implied coarse grid.
inline FilteredState build_filtered_state(const FieldBlock& blk, const EosSpec& eos,
                                          const TransportModel& tm, const FilterKernel& K,
                                          const std::optional<Box>& request = std::nullopt,
                                          int exclude_cells = 0,
                                          std::array<int, 3> stride = {1, 1, 1}) {
    const Grid& g = blk.grid;
    const int d = g.d;
    FilteredState fs;
    fs.grid = g;
    fs.kernel = K;
    fs.eps = blk.eps;
    fs.viscous = blk.eps > 0 && tm.eps > 0;
    fs.strided = stride[0] > 1 || stride[1] > 1 || stride[2] > 1;

    Box data = blk.box();
    if (exclude_cells > 0) {
        if (!g.periodic[0]) {
            data.lo[0] += exclude_cells;
            data.hi[0] -= exclude_cells;
        }
        if (d == 2 && !g.periodic[1]) {
            data.lo[1] += exclude_cells;
            data.hi[1] -= exclude_cells;
        }
    }

    std::optional<DissipationFields> dis;
    if (fs.viscous) {
        dis = dissipation_fields(blk, eos, tm);
        data = data.intersect(dis->box);
    }

    // pointwise fields on the final data box
    Field pw_p(data), pw_E(data), pw_h(data);
    for_each_cell(data, [&](int ix, int iy, int it) {
        auto ev = eval_derivs(eos, {blk.u.at(ix, iy, it), blk.rho.at(ix, iy, it)});
        pw_p.at(ix, iy, it) = ev.p;
        pw_E.at(ix, iy, it) = blk.total_energy(ix, iy, it);
        pw_h.at(ix, iy, it) = blk.u.at(ix, iy, it) + ev.p;
    });

    Box out = filtered_box(g, K, data);
    if (request) {
        out = out.intersect(*request);
        if (out.empty()) throw ScaleExceedsMargin("requested analysis box not reachable");
    }
    if (fs.strided) {
        fs.layout = make_strided_layout(g, out, stride);
        fs.grid = fs.layout.coarse;
        fs.out = fs.layout.box;
    } else {
        fs.out = out;
    }

    auto restrict_to = [&](const Field& f) {
        if (f.box == data) return f;
        Field r(data);
        for_each_cell(data, [&](int ix, int iy, int it) { r.at(ix, iy, it) = f.at(ix, iy, it); });
        return r;
    };
    auto moment = [&](const Field& f) {
        return fs.strided ? fvops::make_strided(g, restrict_to(f), K, fs.layout)
                          : fvops::make(g, restrict_to(f), K, out);
    };

    fs.rho = moment(blk.rho);
    fs.u = moment(blk.u);
    fs.p = moment(pw_p);
    fs.E = moment(pw_E);
    for (int c = 0; c < d; ++c) {
        fs.j[c] = moment(product(blk.rho, blk.v[c]));
        fs.vbar[c] = moment(blk.v[c]);
        fs.uv[c] = moment(product(blk.u, blk.v[c]));
        fs.pv[c] = moment(product(pw_p, restrict_to(blk.v[c])));
        fs.hv[c] = moment(product(pw_h, restrict_to(blk.v[c])));
        for (int cc = c; cc < d; ++cc)
            fs.rvv[c][cc] = moment(product(product(blk.rho, blk.v[c]), blk.v[cc]));
        Field v2(blk.box());
        for_each_cell(blk.box(), [&](int ix, int iy, int it) {
            double k2 = 0;
            for (int a = 0; a < d; ++a) k2 += blk.v[a].at(ix, iy, it) * blk.v[a].at(ix, iy, it);
            v2.at(ix, iy, it) = blk.rho.at(ix, iy, it) * k2 * blk.v[c].at(ix, iy, it);
        });
        fs.rvvv[c] = moment(v2);
    }
    for (int c = 0; c < d; ++c)
        for (int cc = 0; cc < c; ++cc) fs.rvv[c][cc] = fs.rvv[cc][c];

    if (fs.viscous) {
        fs.Qbar = moment(dis->Q);
        fs.pTheta = moment(product(dis->pressure, dis->Theta));
        for (int c = 0; c < d; ++c) {
            fs.q[c] = moment(dis->heat_flux[c]);
            Field tv(dis->box);
            for_each_cell(dis->box, [&](int ix, int iy, int it) {
                double s = 0;
                for (int a = 0; a < d; ++a)
                    s += dis->stress[c][a].at(ix, iy, it) * blk.v[a].at(ix, iy, it);
                tv.at(ix, iy, it) = s;
            });
            fs.Tv[c] = moment(tv);
            for (int cc = 0; cc < d; ++cc) fs.stress[c][cc] = moment(dis->stress[c][cc]);
        }
    }

    fs.theta_bar = Field(fs.out, 0.0);
    for (int c = 0; c < d; ++c) fs.theta_bar += fs.vbar[c].g[c];
    return fs;
}

}  // namespace onsager
namespace onsager {

// ---------------------------------------------------------------------------
// Thermodynamic functions evaluated at coarse-grained fields (under-bar
// quantities), with gradients by the chain rule through s(u, rho).
// ---------------------------------------------------------------------------

struct UnderbarThermo {
    Fv s, beta, lambda, p, T;
};

inline UnderbarThermo underbar_thermo(const Grid& g, const EosSpec& eos, const Fv& u,
                                      const Fv& rho) {
    const Box& out = u.v.box;
    UnderbarThermo r;
    for (Fv* f : {&r.s, &r.beta, &r.lambda, &r.p, &r.T}) {
        f->v = Field(out);
        for (int a : fvops::axes(g)) f->g[a] = Field(out);
    }
    Field cu(out), cr(out), cuu(out), cur(out), crr(out), cpu(out), cpr(out);
    for (std::size_t i = 0; i < u.v.a.size(); ++i) {
        ThermoDerivs d = eval_derivs(eos, {u.v.a[i], rho.v.a[i]});
        r.s.v.a[i] = d.s;
        r.beta.v.a[i] = d.s_u;
        r.lambda.v.a[i] = -d.s_r;
        r.p.v.a[i] = d.p;
        r.T.v.a[i] = d.T;
        cu.a[i] = d.s_u;
        cr.a[i] = d.s_r;
        cuu.a[i] = d.s_uu;
        cur.a[i] = d.s_ur;
        crr.a[i] = d.s_rr;
        cpu.a[i] = d.p_u;
        cpr.a[i] = d.p_r;
    }
    for (int a : fvops::axes(g)) {
        for (std::size_t i = 0; i < u.v.a.size(); ++i) {
            double gu = u.g[a].a[i], gr = rho.g[a].a[i];
            r.s.g[a].a[i] = cu.a[i] * gu + cr.a[i] * gr;
            r.beta.g[a].a[i] = cuu.a[i] * gu + cur.a[i] * gr;
            r.lambda.g[a].a[i] = -(cur.a[i] * gu + crr.a[i] * gr);
            r.p.g[a].a[i] = cpu.a[i] * gu + cpr.a[i] * gr;
            r.T.g[a].a[i] = -(cuu.a[i] * gu + cur.a[i] * gr) / (cu.a[i] * cu.a[i]);
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Budget reports
// ---------------------------------------------------------------------------

struct BudgetReport {
    std::string equation;
    Box domain;
    std::vector<std::pair<std::string, Field>> terms;

    const Field* find(const std::string& name) const {
        for (const auto& t : terms)
            if (t.first == name) return &t.second;
        return nullptr;
    }
    bool has(const std::string& name) const { return find(name) != nullptr; }
};

struct SmearRow {
    std::string equation, term, test_fn;
    double value;
};

inline std::vector<SmearRow> smear_report(const Grid& g, const BudgetReport& rep,
                                          const std::vector<TestFunction>& tfs) {
    std::vector<SmearRow> rows;
    for (const auto& t : rep.terms)
        for (const auto& tf : tfs)
            rows.push_back({rep.equation, t.first, tf.name, smear(g, t.second, tf)});
    return rows;
}

struct BudgetSet {
    Box domain;
    std::vector<BudgetReport> reports;

    const BudgetReport& by_equation(const std::string& eq) const {
        for (const auto& r : reports)
            if (r.equation == eq) return r;
        throw Error("no budget report for equation " + eq);
    }
};

// Assembles every coarse-grained balance from one filtered state.
// Equations whose terms are a-priori undefined on weak (eps = 0) data are
// emitted only for viscous blocks.
inline BudgetSet all_budgets(const FilteredState& fs, const EosSpec& eos) {
    const Grid& g = fs.grid;
    const int d = g.d;
    const Box out = fs.out;
    namespace fo = fvops;
    auto axes = fo::axes(g);

    auto value_mul = [&](const Field& a, const Field& b) { return product(a, b); };
    auto divergence = [&](const std::array<Fv, 2>& J) {
        Field r(out, 0.0);
        for (int c = 0; c < d; ++c) r += J[c].g[c];
        return r;
    };

    // Favre velocity and cumulants via exact Fv algebra
    std::array<Fv, 2> vt;
    for (int c = 0; c < d; ++c) vt[c] = fo::div(g, fs.j[c], fs.rho);
    std::array<std::array<Fv, 2>, 2> ftau;  // Favre tau(v_i, v_j)
    for (int c = 0; c < d; ++c)
        for (int cc = c; cc < d; ++cc) {
            ftau[c][cc] = fo::sub(g, fo::div(g, fs.rvv[c][cc], fs.rho),
                                  fo::mul(g, vt[c], vt[cc]));
            if (cc != c) ftau[cc][c] = ftau[c][cc];
        }
    Fv ftau_tr = ftau[0][0];
    if (d == 2) ftau_tr = fo::add(g, ftau_tr, ftau[1][1]);

    // k = 1/2 bar(rho) ftau(v_i, v_i)
    Fv k_sgs = fo::scale(g, fo::mul(g, fs.rho, ftau_tr), 0.5);
    // resolved kinetic energy 1/2 |bar j|^2 / bar rho
    Fv jj = fo::mul(g, fs.j[0], fs.j[0]);
    if (d == 2) jj = fo::add(g, jj, fo::mul(g, fs.j[1], fs.j[1]));
    Fv res_ke = fo::scale(g, fo::div(g, jj, fs.rho), 0.5);

    // tau(rho, v), tau(u, v), tau(p, v), tau(h, v)
    std::array<Fv, 2> tau_rv, tau_uv, tau_pv, tau_hv;
    Fv hbar = fo::add(g, fs.u, fs.p);
    for (int c = 0; c < d; ++c) {
        tau_rv[c] = fo::sub(g, fs.j[c], fo::mul(g, fs.rho, fs.vbar[c]));
        tau_uv[c] = fo::sub(g, fs.uv[c], fo::mul(g, fs.u, fs.vbar[c]));
        tau_pv[c] = fo::sub(g, fs.pv[c], fo::mul(g, fs.p, fs.vbar[c]));
        tau_hv[c] = fo::sub(g, fs.hv[c], fo::mul(g, hbar, fs.vbar[c]));
    }

    // Favre third cumulant contracted on the first two slots:
    // ftau3[c] = tilde(v_i v_i v_c) - 2 vt_i ftau(i,c) - vt_c ftau_tr - vt_c |vt|^2
    Fv vt2 = fo::mul(g, vt[0], vt[0]);
    if (d == 2) vt2 = fo::add(g, vt2, fo::mul(g, vt[1], vt[1]));
    std::array<Fv, 2> ftau3;
    for (int c = 0; c < d; ++c) {
        Fv t = fo::div(g, fs.rvvv[c], fs.rho);
        for (int i = 0; i < d; ++i)
            t = fo::sub(g, t, fo::scale(g, fo::mul(g, vt[i], ftau[i][c]), 2.0));
        t = fo::sub(g, t, fo::mul(g, vt[c], ftau_tr));
        t = fo::sub(g, t, fo::mul(g, vt[c], vt2));
        ftau3[c] = t;
    }

    // under-bar thermodynamics at (bar u, bar rho)
    UnderbarThermo ub = underbar_thermo(g, eos, fs.u, fs.rho);

    // pressure dilatation pieces
    Field p_bar_theta_bar = value_mul(fs.p.v, fs.theta_bar);
    Field tau_p_theta;  // viscous only: bar(p Theta) - bar p * div bar v
    if (fs.viscous) {
        tau_p_theta = fs.pTheta.v;
        tau_p_theta -= p_bar_theta_bar;
    }

    // Q_flux = grad(bar p)/bar rho . tau(rho, v) - bar rho grad(vt) : ftau
    Field q_flux(out, 0.0);
    for (int c = 0; c < d; ++c) {
        for (std::size_t i = 0; i < q_flux.a.size(); ++i)
            q_flux.a[i] += fs.p.g[c].a[i] / fs.rho.v.a[i] * tau_rv[c].v.a[i];
        for (int cc = 0; cc < d; ++cc)
            for (std::size_t i = 0; i < q_flux.a.size(); ++i)
                q_flux.a[i] -= fs.rho.v.a[i] * vt[cc].g[c].a[i] * ftau[c][cc].v.a[i];
    }

    // D_v = D_k = -grad(vt) : bar T
    Field d_v(out, 0.0);
    if (fs.viscous)
        for (int c = 0; c < d; ++c)
            for (int cc = 0; cc < d; ++cc)
                for (std::size_t i = 0; i < d_v.a.size(); ++i)
                    d_v.a[i] -= vt[cc].g[c].a[i] * fs.stress[c][cc].v.a[i];

    BudgetSet set;
    set.domain = out;

    // ---- resolved kinetic energy ----
    {
        std::array<Fv, 2> Jv;
        for (int c = 0; c < d; ++c) {
            Fv t = fo::mul(g, fo::add(g, res_ke, fs.p), vt[c]);
            Fv adv = fo::mul(g, vt[0], ftau[0][c]);
            if (d == 2) adv = fo::add(g, adv, fo::mul(g, vt[1], ftau[1][c]));
            t = fo::add(g, t, fo::mul(g, fs.rho, adv));
            t = fo::sub(g, t, fo::mul(g, fo::div(g, fs.p, fs.rho), tau_rv[c]));
            if (fs.viscous) {
                Fv tv = fo::mul(g, vt[0], fs.stress[0][c]);
                if (d == 2) tv = fo::add(g, tv, fo::mul(g, vt[1], fs.stress[1][c]));
                t = fo::add(g, t, tv);
            }
            Jv[c] = t;
        }
        BudgetReport rep;
        rep.equation = "resolved_kinetic_energy";
        rep.domain = out;
        Field div_jv = divergence(Jv);
        Field resid = res_ke.g[2];
        resid += div_jv;
        resid -= p_bar_theta_bar;
        resid += q_flux;
        resid += d_v;
        rep.terms.push_back({"resolved_ke", res_ke.v});
        rep.terms.push_back({"dt_resolved_ke", res_ke.g[2]});
        rep.terms.push_back({"div_J_v", div_jv});
        rep.terms.push_back({"p_bar_theta_bar", p_bar_theta_bar});
        rep.terms.push_back({"Q_flux", q_flux});
        rep.terms.push_back({"D_v", d_v});
        if (fs.viscous) {
            Field q_inert = q_flux;
            q_inert += tau_p_theta;
            rep.terms.push_back({"tau_p_theta", tau_p_theta});
            rep.terms.push_back({"Q_inert", q_inert});
            rep.terms.push_back({"filtered_p_theta", fs.pTheta.v});
        }
        rep.terms.push_back({"residual", resid});
        set.reports.push_back(std::move(rep));
    }

    // ---- unresolved (subscale) kinetic energy ----
    std::array<Fv, 2> Jk_inert, Jk_full;
    {
        for (int c = 0; c < d; ++c) {
            Fv t = fo::mul(g, k_sgs, vt[c]);
            t = fo::add(g, t, tau_pv[c]);
            t = fo::add(g, t, fo::scale(g, fo::mul(g, fs.rho, ftau3[c]), 0.5));
            Jk_inert[c] = t;
            if (fs.viscous) {
                t = fo::add(g, t, fs.Tv[c]);
                Fv tv = fo::mul(g, fs.stress[c][0], vt[0]);
                if (d == 2) tv = fo::add(g, tv, fo::mul(g, fs.stress[c][1], vt[1]));
                t = fo::sub(g, t, tv);
            }
            Jk_full[c] = t;
        }
        BudgetReport rep;
        rep.equation = "unresolved_kinetic_energy";
        rep.domain = out;
        rep.terms.push_back({"k_sgs", k_sgs.v});
        rep.terms.push_back({"dt_k_sgs", k_sgs.g[2]});
        rep.terms.push_back({"Q_flux", q_flux});
        // exact decomposition check: 1/2 bar rho |vt|^2 + k = 1/2 bar(rho |v|^2)
        Field ke_identity = res_ke.v;
        ke_identity += k_sgs.v;
        Field half_rvv = fs.rvv[0][0].v;
        if (d == 2) half_rvv += fs.rvv[1][1].v;
        half_rvv *= 0.5;
        ke_identity -= half_rvv;
        rep.terms.push_back({"identity_ke_decomposition", ke_identity});
        if (fs.viscous) {
            Field div_jk = divergence(Jk_full);
            Field resid = k_sgs.g[2];
            resid += div_jk;
            // rhs: (tau(p,Theta) - bar Q) + Q_flux + D_k
            for (std::size_t i = 0; i < resid.a.size(); ++i)
                resid.a[i] -= tau_p_theta.a[i] - fs.Qbar.v.a[i] + q_flux.a[i] + d_v.a[i];
            rep.terms.push_back({"div_J_k", div_jk});
            rep.terms.push_back({"D_k", d_v});
            rep.terms.push_back({"residual", resid});
        } else {
            rep.terms.push_back({"div_J_k", divergence(Jk_inert)});
        }
        set.reports.push_back(std::move(rep));
    }

    // ---- resolved internal energy (viscous data only) ----
    if (fs.viscous) {
        std::array<Fv, 2> Ju;
        for (int c = 0; c < d; ++c) Ju[c] = fo::add(g, fs.uv[c], fs.q[c]);
        BudgetReport rep;
        rep.equation = "resolved_internal_energy";
        rep.domain = out;
        Field div_ju = divergence(Ju);
        Field resid = fs.u.g[2];
        resid += div_ju;
        resid -= fs.Qbar.v;
        resid += fs.pTheta.v;
        rep.terms.push_back({"u_bar", fs.u.v});
        rep.terms.push_back({"dt_u_bar", fs.u.g[2]});
        rep.terms.push_back({"div_J_u", div_ju});
        rep.terms.push_back({"Q_bar", fs.Qbar.v});
        rep.terms.push_back({"filtered_p_theta", fs.pTheta.v});
        rep.terms.push_back({"residual", resid});
        set.reports.push_back(std::move(rep));
    }

    // ---- intrinsic resolved internal energy ----
    Fv u_star = fo::add(g, fs.u, k_sgs);
    {
        std::array<Fv, 2> Jus;
        for (int c = 0; c < d; ++c) {
            Fv t = fo::mul(g, fs.u, fs.vbar[c]);
            t = fo::add(g, t, tau_hv[c]);
            t = fo::add(g, t, fo::mul(g, k_sgs, vt[c]));
            t = fo::add(g, t, fo::scale(g, fo::mul(g, fs.rho, ftau3[c]), 0.5));
            if (fs.viscous) {
                t = fo::add(g, t, fs.q[c]);
                t = fo::add(g, t, fs.Tv[c]);
                Fv tv = fo::mul(g, fs.stress[c][0], vt[0]);
                if (d == 2) tv = fo::add(g, tv, fo::mul(g, fs.stress[c][1], vt[1]));
                t = fo::sub(g, t, tv);
            }
            Jus[c] = t;
        }
        BudgetReport rep;
        rep.equation = "intrinsic_internal_energy";
        rep.domain = out;
        Field div_jus = divergence(Jus);
        Field resid = u_star.g[2];
        resid += div_jus;
        resid -= q_flux;
        resid += p_bar_theta_bar;
        resid -= d_v;
        // defining relation bar E = 1/2 bar rho |vt|^2 + bar u*
        Field id_e = fs.E.v;
        id_e -= res_ke.v;
        id_e -= u_star.v;
        rep.terms.push_back({"u_star", u_star.v});
        rep.terms.push_back({"dt_u_star", u_star.g[2]});
        rep.terms.push_back({"div_J_u_star", div_jus});
        rep.terms.push_back({"Q_flux", q_flux});
        rep.terms.push_back({"p_bar_theta_bar", p_bar_theta_bar});
        rep.terms.push_back({"D_k", d_v});
        rep.terms.push_back({"identity_total_energy", id_e});
        rep.terms.push_back({"residual", resid});
        set.reports.push_back(std::move(rep));
    }

    // ---- entropy balances ----
    // I_flux, Sigma_flux, D_s are shared between the resolved and intrinsic forms
    Field i_flux(out);
    for (std::size_t i = 0; i < i_flux.a.size(); ++i)
        i_flux.a[i] = ub.beta.v.a[i] * (fs.p.v.a[i] - ub.p.v.a[i]) * fs.theta_bar.a[i];
    Field sigma_flux(out, 0.0);
    for (int c = 0; c < d; ++c)
        for (std::size_t i = 0; i < sigma_flux.a.size(); ++i)
            sigma_flux.a[i] += ub.beta.g[c].a[i] * tau_uv[c].v.a[i] -
                               ub.lambda.g[c].a[i] * tau_rv[c].v.a[i];
    Field d_s(out, 0.0);
    if (fs.viscous)
        for (int c = 0; c < d; ++c)
            for (std::size_t i = 0; i < d_s.a.size(); ++i)
                d_s.a[i] -= fs.q[c].v.a[i] * ub.T.g[c].a[i] /
                            (ub.T.v.a[i] * ub.T.v.a[i]);

    std::array<Fv, 2> Js;
    for (int c = 0; c < d; ++c) {
        Fv t = fo::mul(g, ub.s, fs.vbar[c]);
        Fv inner = tau_uv[c];
        if (fs.viscous) inner = fo::add(g, inner, fs.q[c]);
        t = fo::add(g, t, fo::mul(g, ub.beta, inner));
        t = fo::sub(g, t, fo::mul(g, ub.lambda, tau_rv[c]));
        Js[c] = t;
    }

    if (fs.viscous) {
        BudgetReport rep;
        rep.equation = "resolved_entropy";
        rep.domain = out;
        Field div_js = divergence(Js);
        Field heating(out);
        for (std::size_t i = 0; i < heating.a.size(); ++i)
            heating.a[i] = (fs.Qbar.v.a[i] - tau_p_theta.a[i]) * ub.beta.v.a[i];
        Field resid = ub.s.g[2];
        resid += div_js;
        resid -= heating;
        resid += i_flux;
        resid -= sigma_flux;
        resid -= d_s;
        rep.terms.push_back({"s_under", ub.s.v});
        rep.terms.push_back({"dt_s_under", ub.s.g[2]});
        rep.terms.push_back({"div_J_s", div_js});
        rep.terms.push_back({"heating_over_T", heating});
        rep.terms.push_back({"I_flux", i_flux});
        rep.terms.push_back({"Sigma_flux", sigma_flux});
        rep.terms.push_back({"D_s", d_s});
        rep.terms.push_back({"residual", resid});
        set.reports.push_back(std::move(rep));
    }

    {
        Fv s_star = fo::add(g, ub.s, fo::mul(g, ub.beta, k_sgs));
        // dual definition: beta (u* + p_under) - lambda bar rho
        Field s_star_dual(out);
        for (std::size_t i = 0; i < s_star_dual.a.size(); ++i)
            s_star_dual.a[i] = ub.beta.v.a[i] * (u_star.v.a[i] + ub.p.v.a[i]) -
                               ub.lambda.v.a[i] * fs.rho.v.a[i];
        Field id_dual = s_star.v;
        id_dual -= s_star_dual;

        std::array<Fv, 2> Jss;
        for (int c = 0; c < d; ++c)
            Jss[c] = fo::add(g, Js[c], fo::mul(g, ub.beta, Jk_full[c]));

        auto sigma_flux_star_with = [&](const std::array<Fv, 2>& Jk) {
            Field r = sigma_flux;
            for (std::size_t i = 0; i < r.a.size(); ++i)
                r.a[i] += ub.beta.v.a[i] * q_flux.a[i] +
                          ub.beta.g[2].a[i] * k_sgs.v.a[i];
            for (int c = 0; c < d; ++c)
                for (std::size_t i = 0; i < r.a.size(); ++i)
                    r.a[i] += ub.beta.g[c].a[i] * Jk[c].v.a[i];
            return r;
        };
        Field sigma_flux_star_full = sigma_flux_star_with(Jk_full);
        Field sigma_flux_star_inert = sigma_flux_star_with(Jk_inert);
        Field sigma_inert_star = sigma_flux_star_inert;
        sigma_inert_star -= i_flux;

        BudgetReport rep;
        rep.equation = "intrinsic_entropy";
        rep.domain = out;
        Field div_jss = divergence(Jss);
        Field resid = s_star.g[2];
        resid += div_jss;
        resid += i_flux;
        resid -= sigma_flux_star_full;
        resid -= d_s;
        for (std::size_t i = 0; i < resid.a.size(); ++i)
            resid.a[i] -= ub.beta.v.a[i] * d_v.a[i];
        rep.terms.push_back({"s_star", s_star.v});
        rep.terms.push_back({"dt_s_star", s_star.g[2]});
        rep.terms.push_back({"div_J_s_star", div_jss});
        rep.terms.push_back({"I_flux", i_flux});
        rep.terms.push_back({"Sigma_flux_star", sigma_flux_star_full});
        rep.terms.push_back({"Sigma_inert_star", sigma_inert_star});
        rep.terms.push_back({"D_s", d_s});
        rep.terms.push_back({"identity_s_star_dual", id_dual});
        rep.terms.push_back({"residual", resid});
        set.reports.push_back(std::move(rep));
    }

    // ---- filtered conservation laws (coarse-grained solution test) ----
    {
        BudgetReport rep;
        rep.equation = "filtered_mass";
        rep.domain = out;
        Field resid = fs.rho.g[2];
        resid += divergence(fs.j);
        rep.terms.push_back({"dt_rho_bar", fs.rho.g[2]});
        rep.terms.push_back({"residual", resid});
        set.reports.push_back(std::move(rep));
    }
    for (int c = 0; c < d; ++c) {
        BudgetReport rep;
        rep.equation = c == 0 ? "filtered_momentum_x" : "filtered_momentum_y";
        rep.domain = out;
        Field resid = fs.j[c].g[2];
        for (int cc = 0; cc < d; ++cc) {
            resid += fs.rvv[c][cc].g[cc];
            if (fs.viscous) resid += fs.stress[c][cc].g[cc];
        }
        resid += fs.p.g[c];
        rep.terms.push_back({"dt_j_bar", fs.j[c].g[2]});
        rep.terms.push_back({"residual", resid});
        set.reports.push_back(std::move(rep));
    }
    {
        BudgetReport rep;
        rep.equation = "filtered_total_energy";
        rep.domain = out;
        Field resid = fs.E.g[2];
        for (int c = 0; c < d; ++c) {
            // bar((E+p) v) = bar(h v) + 1/2 bar(rho |v|^2 v)
            resid += fs.hv[c].g[c];
            Field half = fs.rvvv[c].g[c];
            half *= 0.5;
            resid += half;
            if (fs.viscous) {
                resid += fs.Tv[c].g[c];
                resid += fs.q[c].g[c];
            }
        }
        rep.terms.push_back({"dt_E_bar", fs.E.g[2]});
        rep.terms.push_back({"residual", resid});
        set.reports.push_back(std::move(rep));
    }
    return set;
}

// ---------------------------------------------------------------------------
// Spec-level convenience operations
// ---------------------------------------------------------------------------

inline BudgetSet all_budgets(const FieldBlock& blk, const EosSpec& eos,
                             const TransportModel& tm, const FilterKernel& K,
                             const std::optional<Box>& request = std::nullopt,
                             int exclude_cells = 0) {
    return all_budgets(build_filtered_state(blk, eos, tm, K, request, exclude_cells), eos);
}

inline BudgetReport kinetic_budget(const FieldBlock& blk, const EosSpec& eos,
                                   const TransportModel& tm, const FilterKernel& K) {
    return all_budgets(blk, eos, tm, K).by_equation("resolved_kinetic_energy");
}

inline BudgetReport subscale_ke_budget(const FieldBlock& blk, const EosSpec& eos,
                                       const TransportModel& tm, const FilterKernel& K,
                                       bool require_residual = false) {
    if (require_residual && !(blk.eps > 0))
        throw RequiresViscousData("subscale KE residual needs eps > 0 data");
    return all_budgets(blk, eos, tm, K).by_equation("unresolved_kinetic_energy");
}

// resolved (viscous only) and intrinsic internal-energy budgets
inline std::vector<BudgetReport> internal_budgets(const FieldBlock& blk, const EosSpec& eos,
                                                  const TransportModel& tm,
                                                  const FilterKernel& K) {
    BudgetSet s = all_budgets(blk, eos, tm, K);
    std::vector<BudgetReport> r;
    for (auto& rep : s.reports)
        if (rep.equation == "resolved_internal_energy" ||
            rep.equation == "intrinsic_internal_energy")
            r.push_back(std::move(rep));
    return r;
}

inline std::vector<BudgetReport> entropy_budgets(const FieldBlock& blk, const EosSpec& eos,
                                                 const TransportModel& tm,
                                                 const FilterKernel& K) {
    BudgetSet s = all_budgets(blk, eos, tm, K);
    std::vector<BudgetReport> r;
    for (auto& rep : s.reports)
        if (rep.equation == "resolved_entropy" || rep.equation == "intrinsic_entropy")
            r.push_back(std::move(rep));
    return r;
}

struct PressureDilatation {
    Box box;
    Field resolved;                 // bar p * div(bar v)
    std::optional<Field> filtered;  // bar(p Theta), eps > 0 only
    std::optional<Field> defect;    // tau(p, Theta)
};

inline PressureDilatation pressure_dilatation(const FilteredState& fs) {
    PressureDilatation r;
    r.box = fs.out;
    r.resolved = product(fs.p.v, fs.theta_bar);
    if (fs.viscous) {
        r.filtered = fs.pTheta.v;
        Field d = fs.pTheta.v;
        d -= r.resolved;
        r.defect = std::move(d);
    }
    return r;
}

inline std::vector<BudgetReport> cg_solution_residuals(const FieldBlock& blk,
                                                       const EosSpec& eos,
                                                       const TransportModel& tm,
                                                       const FilterKernel& K) {
    BudgetSet s = all_budgets(blk, eos, tm, K);
    std::vector<BudgetReport> r;
    for (auto& rep : s.reports)
        if (rep.equation.rfind("filtered_", 0) == 0) r.push_back(std::move(rep));
    return r;
}

}  // namespace onsager
