#pragma once
// Admissible data generation: the exact Rankine-Hugoniot jump oracle, the
// steady viscous shock-profile ODE solved by manifold shooting, a 1-D
// compressible Navier-Stokes-Fourier integrator (Rusanov + centered viscous
// fluxes, SSP-RK3), and isentropic simple-wave initial data.

#include "onsager/fields.hpp"

#include <algorithm>

namespace onsager {

// ---------------------------------------------------------------------------
// Rankine-Hugoniot jump
// ---------------------------------------------------------------------------

enum class ShockFrame { ShockStationary, Lab };

struct ShockSetup {
    ThermoState upstream{2.5, 1.0};  // (u, rho)
    double mach = 2.0;
    ShockFrame frame = ShockFrame::ShockStationary;
};

struct RhSide {
    double rho, v, u, p, T, s_m, c;
};

struct RankineHugoniot {
    RhSide upstream, downstream;  // shock-stationary frame values
    double mass_flux;             // j = rho v
    double momentum_flux;         // P = p + j v
    double total_enthalpy;        // H = v^2/2 + (u+p)/rho
    double anomaly_entropy;       // a_s = j (s_m+ - s_m-)
    double anomaly_ke;            // total Q of the constant-enthalpy profile
    double p_circ_theta;          // (p- + p+)/2 * (v+ - v-)
    double p_star_theta;          // integral of p dv along the constant-H path
    double frame_shift = 0.0;     // subtract from v for lab-frame fields
};

namespace detail {

// solve p(u, rho) = target for u at fixed rho (p is increasing in u)
inline double solve_u_of_p(const EosSpec& eos, double rho, double p_target, double u_guess) {
    if (eos.kind == EosKind::IdealGas) return eos.alpha * p_target;
    double u = u_guess;
    for (int it = 0; it < 100; ++it) {
        ThermoDerivs d = eval_derivs(eos, {u, rho});
        double f = d.p - p_target;
        if (std::abs(f) <= 1e-14 * std::max(1.0, std::abs(p_target))) return u;
        u -= f / d.p_u;
        if (!(u > 0)) u = 1e-8;
    }
    throw NoAdmissibleSolution("EOS inversion p(u,rho) = p did not converge");
}

// solve (u + p(u,rho))/rho = h_target for u at fixed rho
inline double solve_u_of_h(const EosSpec& eos, double rho, double h_target, double u_guess) {
    double u = u_guess;
    for (int it = 0; it < 100; ++it) {
        ThermoDerivs d = eval_derivs(eos, {u, rho});
        double f = (u + d.p) / rho - h_target;
        if (std::abs(f) <= 1e-14 * std::max(1.0, std::abs(h_target))) return u;
        u -= f * rho / (1.0 + d.p_u);
        if (!(u > 0)) u = 1e-8;
    }
    throw NoAdmissibleSolution("EOS inversion h(u,rho) = h did not converge");
}

}  // namespace detail

inline RankineHugoniot rh_jump(const ShockSetup& setup, const EosSpec& eos) {
    if (!(setup.mach > 1.0))
        throw NoAdmissibleSolution("upstream Mach must exceed 1, got " +
                                   format_double(setup.mach));
    ThermoEval em = eval_thermo(eos, setup.upstream);
    RankineHugoniot rh{};
    RhSide& up = rh.upstream;
    up.rho = setup.upstream.rho;
    up.u = setup.upstream.u;
    up.p = em.p;
    up.T = em.T;
    up.s_m = em.s_m;
    up.c = em.sound_speed;
    up.v = setup.mach * em.sound_speed;

    const double j = up.rho * up.v;
    const double P = up.p + j * up.v;
    const double H = 0.5 * up.v * up.v + (up.u + up.p) / up.rho;
    rh.mass_flux = j;
    rh.momentum_flux = P;
    rh.total_enthalpy = H;

    // downstream density from the three jump conditions: g(rho) = 0
    auto eval_g = [&](double rho) {
        double v = j / rho;
        double p = P - j * v;
        double u = detail::solve_u_of_p(eos, rho, p, up.u * rho / up.rho);
        return 0.5 * v * v + (u + p) / rho - H;
    };
    double lo = up.rho * (1.0 + 1e-10);
    double hi = up.rho * 1.01;
    double g_lo = eval_g(lo);
    double rho_max = eos.kind == EosKind::VanDerWaals ? 0.999 / eos.b : up.rho * 1e4;
    bool bracketed = false;
    while (hi < rho_max) {
        double g_hi;
        try {
            g_hi = eval_g(hi);
        } catch (const Error&) {
            break;
        }
        if (g_lo * g_hi < 0) {
            bracketed = true;
            break;
        }
        lo = hi;
        g_lo = g_hi;
        hi *= 1.2;
    }
    if (!bracketed) throw NoAdmissibleSolution("no downstream state on the Hugoniot");
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        double gm = eval_g(mid);
        if (g_lo * gm <= 0)
            hi = mid;
        else {
            lo = mid;
            g_lo = gm;
        }
        if ((hi - lo) <= 1e-15 * hi) break;
    }
    RhSide& dn = rh.downstream;
    dn.rho = 0.5 * (lo + hi);
    dn.v = j / dn.rho;
    dn.p = P - j * dn.v;
    dn.u = detail::solve_u_of_p(eos, dn.rho, dn.p, up.u * dn.rho / up.rho);
    ThermoEval ep = eval_thermo(eos, {dn.u, dn.rho});
    dn.T = ep.T;
    dn.s_m = ep.s_m;
    dn.c = ep.sound_speed;

    rh.anomaly_entropy = j * (dn.s_m - up.s_m);
    if (!(rh.anomaly_entropy > 0))
        throw NoAdmissibleSolution("entropy-decreasing root rejected");

    rh.p_circ_theta = 0.5 * (up.p + dn.p) * (dn.v - up.v);
    // p * Theta along the constant-total-enthalpy profile: integral of p dv
    // with h_m(v) = H - v^2/2, rho = j/v (composite Simpson on v)
    {
        const int n = 2000;
        double a = up.v, b = dn.v, h = (b - a) / n;
        auto p_of_v = [&](double v) {
            double rho = j / v;
            double u = detail::solve_u_of_h(eos, rho, H - 0.5 * v * v,
                                            up.u * rho / up.rho);
            return eval_derivs(eos, {u, rho}).p;
        };
        double acc = p_of_v(a) + p_of_v(b);
        for (int k = 1; k < n; ++k) acc += (k % 2 ? 4.0 : 2.0) * p_of_v(a + k * h);
        rh.p_star_theta = acc * h / 3.0;
    }
    rh.anomaly_ke = rh.p_star_theta - rh.p_circ_theta;
    rh.frame_shift = setup.frame == ShockFrame::Lab ? up.v : 0.0;
    return rh;
}

// Residual of the three flux-equality conditions, for oracle self-checks.
inline double rh_flux_residual(const RankineHugoniot& rh) {
    const RhSide &a = rh.upstream, &b = rh.downstream;
    double m = std::abs(a.rho * a.v - b.rho * b.v);
    double mo = std::abs((a.p + a.rho * a.v * a.v) - (b.p + b.rho * b.v * b.v));
    double en = std::abs((0.5 * a.rho * a.v * a.v + a.u + a.p) * a.v -
                         (0.5 * b.rho * b.v * b.v + b.u + b.p) * b.v);
    double scale = std::max({a.rho * a.v, a.p + a.rho * a.v * a.v,
                             (0.5 * a.rho * a.v * a.v + a.u + a.p) * a.v});
    return std::max({m, mo, en}) / scale;
}

// Exact step data for the (possibly lab-frame) planar shock on a block.
// In the shock-stationary frame the jump sits at x = xs0 for all t; with a
// frame shift V the jump moves at speed -V and velocities shift by -V.
inline FieldBlock make_step_block(const Grid& g, const RankineHugoniot& rh, double xs0) {
    FieldBlock b(g);
    b.eps = 0.0;
    const double V = rh.frame_shift;
    for_each_cell(b.box(), [&](int ix, int iy, int it) {
        bool up = g.x(ix) + V * g.t(it) < xs0;
        const RhSide& s = up ? rh.upstream : rh.downstream;
        b.rho.at(ix, iy, it) = s.rho;
        b.u.at(ix, iy, it) = s.u;
        b.v[0].at(ix, iy, it) = s.v - V;
    });
    return b;
}

// ---------------------------------------------------------------------------
// Becker-type steady shock profile (traveling-wave ODE, manifold shooting)
// ---------------------------------------------------------------------------

struct BeckerProfile {
    RankineHugoniot rh;
    double eps;
    // cell-centered fields on the requested 1-D grid (stationary frame)
    std::vector<double> x, rho, v, u;
    double width_10_90;       // physical width of the 10-90% density rise
    double integrated_Q;      // total viscous heating across the profile
    double integrated_Sigma;  // total entropy production across the profile
};

// Transport model satisfying the constant-total-enthalpy (Becker) condition
// kappa = (alpha+1) k_B * mu_long for the 1-D reduction, where mu_long = zeta.
inline TransportModel becker_transport(const EosSpec& eos, double mu_long, double eps) {
    TransportModel tm;
    tm.eps = eps;
    tm.eta.value = mu_long;
    tm.zeta.value = mu_long;
    tm.kappa.value = (eos.alpha + 1.0) * eos.k_B * mu_long;
    return tm;
}

namespace detail {

struct OdePoint {
    double xi, v, T, dv, dT, iQ, iS;
};

// unit-eps ODE right-hand side in the stretched coordinate xi = x / eps
struct ShockOde {
    const EosSpec* eos;
    const TransportModel* tm;  // evaluated with eps = 1
    double j, P, H;

    // state y = (v, T, integral Q, integral Sigma)
    void rhs(const double y[4], double dy[4]) const {
        double v = y[0], T = y[1];
        double rho = j / v;
        double u = eos->kind == EosKind::IdealGas
                       ? eos->alpha * eos->k_B * rho * T
                       : rho * (eos->alpha * eos->k_B * T - eos->a * rho);
        ThermoDerivs d = eval_derivs(*eos, {u, rho});
        TransportModel unit = *tm;
        unit.eps = 1.0;
        TransportEval tr = transport(unit, *eos, {u, rho});
        double mu = longitudinal_viscosity(tr, 1);
        double dv = (j * v + d.p - P) / mu;
        double h_m = (u + d.p) / rho;
        double dT = (j * (0.5 * v * v + h_m - H) - mu * dv * v) / tr.kappa;
        dy[0] = dv;
        dy[1] = dT;
        dy[2] = mu * dv * dv;                          // Q integrand (per unit xi)
        dy[3] = mu * dv * dv / T + tr.kappa * dT * dT / (T * T);  // Sigma integrand
    }
};

inline void rk4_step(const ShockOde& ode, double h, double y[4]) {
    double k1[4], k2[4], k3[4], k4[4], t[4];
    ode.rhs(y, k1);
    for (int i = 0; i < 4; ++i) t[i] = y[i] + 0.5 * h * k1[i];
    ode.rhs(t, k2);
    for (int i = 0; i < 4; ++i) t[i] = y[i] + 0.5 * h * k2[i];
    ode.rhs(t, k3);
    for (int i = 0; i < 4; ++i) t[i] = y[i] + h * k3[i];
    ode.rhs(t, k4);
    for (int i = 0; i < 4; ++i) y[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
}

// 2x2 eigen decomposition of the phase-plane Jacobian at a fixed point,
// by finite differences of (dv, dT).
struct Eigen2 {
    double lam[2];
    double vec[2][2];  // vec[k] = eigenvector for lam[k]
    int n_real = 0;
};

inline Eigen2 fixed_point_eigen(const ShockOde& ode, double v, double T) {
    double J[2][2];
    double d = 1e-7 * std::max({std::abs(v), std::abs(T), 1.0});
    for (int c = 0; c < 2; ++c) {
        double yp[4] = {v, T, 0, 0}, ym[4] = {v, T, 0, 0};
        yp[c] += d;
        ym[c] -= d;
        double fp[4], fm[4];
        ode.rhs(yp, fp);
        ode.rhs(ym, fm);
        J[0][c] = (fp[0] - fm[0]) / (2 * d);
        J[1][c] = (fp[1] - fm[1]) / (2 * d);
    }
    Eigen2 e;
    double tr = J[0][0] + J[1][1];
    double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
    double disc = tr * tr / 4 - det;
    if (disc < 0) return e;  // complex pair: handled by the caller as failure
    double sq = std::sqrt(disc);
    e.lam[0] = tr / 2 + sq;
    e.lam[1] = tr / 2 - sq;
    e.n_real = 2;
    for (int k = 0; k < 2; ++k) {
        // (J - lam I) vec = 0
        double a = J[0][0] - e.lam[k], b = J[0][1];
        double c = J[1][0], dd = J[1][1] - e.lam[k];
        if (std::abs(a) + std::abs(b) > std::abs(c) + std::abs(dd)) {
            e.vec[k][0] = -b;
            e.vec[k][1] = a;
        } else {
            e.vec[k][0] = -dd;
            e.vec[k][1] = c;
        }
        double n = std::hypot(e.vec[k][0], e.vec[k][1]);
        e.vec[k][0] /= n;
        e.vec[k][1] /= n;
    }
    return e;
}

}  // namespace detail

// Solves the steady shock-structure two-point connection problem by shooting
// along the one-dimensional invariant manifold (forward from the upstream
// point when it has a single unstable direction, otherwise backward from the
// downstream point along its single stable direction), then samples the
// profile onto a uniform grid with the 50% density point at x = x_mid.
inline BeckerProfile becker_profile(const ShockSetup& setup, const EosSpec& eos,
                                    const TransportModel& tm, double eps, int nx,
                                    double dx, double x_mid_frac = 0.5) {
    if (!(eps > 0)) throw ShootingFailed("becker profile needs eps > 0");
    BeckerProfile prof;
    prof.rh = rh_jump(setup, eos);
    prof.eps = eps;
    const RhSide &up = prof.rh.upstream, &dn = prof.rh.downstream;

    detail::ShockOde ode{&eos, &tm, prof.rh.mass_flux, prof.rh.momentum_flux,
                         prof.rh.total_enthalpy};
    detail::Eigen2 e_up = detail::fixed_point_eigen(ode, up.v, up.T);
    detail::Eigen2 e_dn = detail::fixed_point_eigen(ode, dn.v, dn.T);

    int dir = +1;  // integration direction in xi
    double start[2], target_v, target_T;
    const double dv_scale = std::abs(up.v - dn.v), dT_scale = std::abs(up.T - dn.T) + 1e-30;
    auto pick = [&](const detail::Eigen2& e, double want_sign) -> const double* {
        // eigenvector with eigenvalue of the wanted sign; nullptr if not unique
        int count = 0, idx = -1;
        for (int k = 0; k < e.n_real; ++k)
            if (e.lam[k] * want_sign > 1e-12) {
                ++count;
                idx = k;
            }
        return count == 1 ? e.vec[idx] : nullptr;
    };
    const double* v_up_unstable = pick(e_up, +1.0);
    const double* v_dn_stable = pick(e_dn, -1.0);
    const double delta = 1e-9;
    if (v_up_unstable) {
        dir = +1;
        double s = v_up_unstable[0] < 0 ? +1.0 : -1.0;  // move toward decreasing v
        start[0] = up.v + s * delta * dv_scale * v_up_unstable[0];
        start[1] = up.T + s * delta * dv_scale * v_up_unstable[1];
        target_v = dn.v;
        target_T = dn.T;
    } else if (v_dn_stable) {
        dir = -1;
        double s = v_dn_stable[0] > 0 ? +1.0 : -1.0;  // move toward increasing v
        start[0] = dn.v + s * delta * dv_scale * v_dn_stable[0];
        start[1] = dn.T + s * delta * dv_scale * v_dn_stable[1];
        target_v = up.v;
        target_T = up.T;
    } else {
        throw ShootingFailed(
            "no one-dimensional connecting manifold at either end point "
            "(eigenvalues up: " +
            format_double(e_up.n_real ? e_up.lam[0] : 0) + "," +
            format_double(e_up.n_real ? e_up.lam[1] : 0) + ")");
    }

    std::vector<detail::OdePoint> path;
    double y[4] = {start[0], start[1], 0.0, 0.0};
    double xi = 0.0;
    // initial step from the local rate of the slowest eigenvalue
    double lam_ref = std::abs(v_up_unstable ? e_up.lam[0] : e_dn.lam[1]);
    for (int k = 0; k < (v_up_unstable ? e_up.n_real : e_dn.n_real); ++k) {
        double l = std::abs((v_up_unstable ? e_up : e_dn).lam[k]);
        if (l > 1e-12) lam_ref = std::min(lam_ref, l);
    }
    double h = dir * 0.02 / std::max(lam_ref, 1e-12);
    const double h_cap = std::abs(h) * 200.0;
    const long max_steps = 400000;
    double dy0[4];
    ode.rhs(y, dy0);
    path.push_back({xi, y[0], y[1], dy0[0], dy0[1], y[2], y[3]});
    for (long step = 0;; ++step) {
        if (step >= max_steps)
            throw ShootingFailed("profile integration did not reach the far state; "
                                 "|v-target| = " +
                                 format_double(std::abs(y[0] - target_v)));
        // step doubling control
        double y1[4], y2[4];
        std::copy(y, y + 4, y1);
        detail::rk4_step(ode, h, y1);
        std::copy(y, y + 4, y2);
        detail::rk4_step(ode, 0.5 * h, y2);
        detail::rk4_step(ode, 0.5 * h, y2);
        double err = std::max(std::abs(y1[0] - y2[0]) / dv_scale,
                              std::abs(y1[1] - y2[1]) / dT_scale);
        if (err > 1e-11 && std::abs(h) > 1e-12 / std::max(lam_ref, 1e-12)) {
            h *= 0.5;
            continue;
        }
        std::copy(y2, y2 + 4, y);
        xi += h;
        double dy[4];
        ode.rhs(y, dy);
        path.push_back({xi, y[0], y[1], dy[0], dy[1], y[2], y[3]});
        if (err < 1e-13 && std::abs(h) < h_cap) h *= 1.5;
        bool close = std::abs(y[0] - target_v) <= 1e-11 * dv_scale &&
                     std::abs(y[1] - target_T) <= 1e-8 * std::max(dT_scale, up.T);
        if (close) break;
        if (!(y[0] > 0) || !(y[1] > 0))
            throw ShootingFailed("trajectory left the physical region");
        double overshoot = dir > 0 ? (target_v - y[0]) : (y[0] - target_v);
        if (overshoot > 0.05 * dv_scale)
            throw ShootingFailed("trajectory overshot the far state");
    }
    if (dir < 0) {
        std::reverse(path.begin(), path.end());
        // re-origin integrals so they accumulate from the upstream side
        double iQ0 = path.front().iQ, iS0 = path.front().iS;
        for (auto& p : path) {
            p.iQ -= iQ0;
            p.iS -= iS0;
        }
    }
    prof.integrated_Q = path.back().iQ - path.front().iQ;
    prof.integrated_Sigma = path.back().iS - path.front().iS;

    // locate xi of a given v by monotone interpolation along the path
    auto xi_of_v = [&](double v_val) {
        for (std::size_t i = 1; i < path.size(); ++i) {
            double v0 = path[i - 1].v, v1 = path[i].v;
            if ((v0 - v_val) * (v1 - v_val) <= 0 && v0 != v1) {
                double w = (v_val - v0) / (v1 - v0);
                return path[i - 1].xi + w * (path[i].xi - path[i - 1].xi);
            }
        }
        throw ShootingFailed("value not bracketed along the profile");
    };
    auto rho_of_v = [&](double v_val) { return prof.rh.mass_flux / v_val; };
    // width from the 10% and 90% points of the density rise
    double rho_lo = up.rho + 0.1 * (dn.rho - up.rho);
    double rho_hi = up.rho + 0.9 * (dn.rho - up.rho);
    double xi_10 = xi_of_v(prof.rh.mass_flux / rho_lo);
    double xi_90 = xi_of_v(prof.rh.mass_flux / rho_hi);
    prof.width_10_90 = eps * std::abs(xi_90 - xi_10);
    double xi_mid = xi_of_v(prof.rh.mass_flux / (0.5 * (up.rho + dn.rho)));

    // sample onto the grid by cubic Hermite interpolation
    prof.x.resize(nx);
    prof.rho.resize(nx);
    prof.v.resize(nx);
    prof.u.resize(nx);
    const double x_mid = nx * dx * x_mid_frac;
    std::size_t seg = 1;
    for (int i = 0; i < nx; ++i) {
        double x = (i + 0.5) * dx;
        prof.x[i] = x;
        double xi_q = (x - x_mid) / eps + xi_mid;
        double v_val, T_val;
        if (xi_q <= path.front().xi) {
            v_val = up.v;
            T_val = up.T;
        } else if (xi_q >= path.back().xi) {
            v_val = dn.v;
            T_val = dn.T;
        } else {
            while (seg < path.size() - 1 && path[seg].xi < xi_q) ++seg;
            const auto &p0 = path[seg - 1], &p1 = path[seg];
            double hseg = p1.xi - p0.xi;
            double t = (xi_q - p0.xi) / hseg;
            double t2 = t * t, t3 = t2 * t;
            auto hermite = [&](double f0, double f1, double d0, double d1) {
                return (2 * t3 - 3 * t2 + 1) * f0 + (t3 - 2 * t2 + t) * hseg * d0 +
                       (-2 * t3 + 3 * t2) * f1 + (t3 - t2) * hseg * d1;
            };
            v_val = hermite(p0.v, p1.v, p0.dv, p1.dv);
            T_val = hermite(p0.T, p1.T, p0.dT, p1.dT);
        }
        double rho = rho_of_v(v_val);
        prof.rho[i] = rho;
        prof.v[i] = v_val - prof.rh.frame_shift;
        prof.u[i] = eos.kind == EosKind::IdealGas
                        ? eos.alpha * eos.k_B * rho * T_val
                        : rho * (eos.alpha * eos.k_B * T_val - eos.a * rho);
    }
    return prof;
}

}  // namespace onsager
namespace onsager {

// ---------------------------------------------------------------------------
// 1-D compressible Navier-Stokes-Fourier integrator
// ---------------------------------------------------------------------------

enum class SolverBc { Periodic, InflowOutflow };

struct NsConfig {
    EosSpec eos;
    TransportModel transport;  // transport.eps is the run's eps
    int nx = 256;
    double x_min = 0.0, x_max = 1.0;
    SolverBc bc = SolverBc::Periodic;
    int sponge_cells = 16;
    double cfl = 0.4;
    double visc_safety = 0.4;
    double c_ref = 0.0;  // 0: use the max initial sound speed

    void validate() const {
        eos.validate();
        transport.validate();
        if (nx < 8) throw ConfigError("solver grid needs nx >= 8");
        if (!(x_max > x_min)) throw ConfigError("x_max must exceed x_min");
        if (!(cfl > 0) || !(cfl < 1)) throw ConfigError("cfl must lie in (0,1)");
    }
};

struct InitialData {
    std::vector<double> rho, v, u;  // size nx, cell centers
};

struct RunDiagnostics {
    double mass_drift_rel = 0, momentum_drift_abs = 0, energy_drift_rel = 0;
    double min_entropy_increment = 0;  // most negative step change of total entropy
    long steps = 0;
    double dt_min = 0, dt_max = 0;
};

namespace detail {

struct Cons {
    double rho, j, E;
};

struct PrimCache {
    double v, u, p, c, T;
};

inline PrimCache primitives(const EosSpec& eos, const Cons& c) {
    if (!(c.rho > 0)) throw NegativeDensityOrPressure("rho = " + format_double(c.rho));
    double v = c.j / c.rho;
    double u = c.E - 0.5 * c.rho * v * v;
    PTc e;
    try {
        e = eval_pTc(eos, {u, c.rho});
    } catch (const StateOutsideValidity& ex) {
        throw NegativeDensityOrPressure("state left the EOS validity region (rho = " +
                                        format_double(c.rho) + ", u = " +
                                        format_double(u) + "): " + ex.what());
    }
    if (eos.kind == EosKind::IdealGas && !(e.p > 0))
        throw NegativeDensityOrPressure("p = " + format_double(e.p));
    return {v, u, e.p, e.c, e.T};
}

inline double minmod(double a, double b) {
    return a * b <= 0 ? 0.0 : (std::abs(a) < std::abs(b) ? a : b);
}

}  // namespace detail

// Explicit method-of-lines integration from t_begin to t_end with snapshots
// on the uniform times t_k = t_begin + k * (t_end-t_begin)/(nt-1). The shock
// is resolved, not captured: callers must resolve the viscous scale.
inline FieldBlock integrate(const NsConfig& cfg, const InitialData& init, double t_begin,
                            double t_end, int nt_snapshots, RunDiagnostics* diag = nullptr,
                            const InitialData* pin_states = nullptr) {
    cfg.validate();
    const int n = cfg.nx;
    if (int(init.rho.size()) != n || int(init.v.size()) != n || int(init.u.size()) != n)
        throw ConfigError("initial data size mismatch");
    if (nt_snapshots < 2) throw ConfigError("need at least two snapshots");
    if (!(t_end > t_begin)) throw ConfigError("t_end must exceed t_begin");
    const double dx = (cfg.x_max - cfg.x_min) / n;
    const bool periodic = cfg.bc == SolverBc::Periodic;
    const double eps = cfg.transport.eps;

    std::vector<detail::Cons> U(n), U1(n), U2(n);
    for (int i = 0; i < n; ++i) {
        double E = 0.5 * init.rho[i] * init.v[i] * init.v[i] + init.u[i];
        U[i] = {init.rho[i], init.rho[i] * init.v[i], E};
    }
    const detail::Cons pin_lo =
        pin_states ? detail::Cons{pin_states->rho.front(),
                                  pin_states->rho.front() * pin_states->v.front(),
                                  0.5 * pin_states->rho.front() * pin_states->v.front() *
                                          pin_states->v.front() +
                                      pin_states->u.front()}
                   : U.front();
    const detail::Cons pin_hi =
        pin_states ? detail::Cons{pin_states->rho.back(),
                                  pin_states->rho.back() * pin_states->v.back(),
                                  0.5 * pin_states->rho.back() * pin_states->v.back() *
                                          pin_states->v.back() +
                                      pin_states->u.back()}
                   : U.back();

    std::vector<detail::PrimCache> W(n);
    auto update_prims = [&](const std::vector<detail::Cons>& Uv) {
        for (int i = 0; i < n; ++i) W[i] = detail::primitives(cfg.eos, Uv[i]);
    };

    // max signal speed and max diffusivity for time-step control
    auto stable_dt = [&]() {
        double a_max = 0, d_max = 0;
        for (int i = 0; i < n; ++i) {
            a_max = std::max(a_max, std::abs(W[i].v) + W[i].c);
            if (eps > 0) {
                TransportEval tr = transport(cfg.transport, cfg.eos,
                                             {W[i].u, U[i].rho});
                double mu = longitudinal_viscosity(tr, 1);
                double c_v = cfg.eos.alpha * cfg.eos.k_B;  // per unit mass
                d_max = std::max(d_max, std::max(mu / U[i].rho,
                                                 tr.kappa / (U[i].rho * c_v)));
            }
        }
        double dt = cfg.cfl * dx / a_max;
        if (d_max > 0) dt = std::min(dt, cfg.visc_safety * dx * dx / (2 * d_max));
        return dt;
    };

    auto cons_at = [&](const std::vector<detail::Cons>& Uv, int i) -> detail::Cons {
        if (periodic) return Uv[(i % n + n) % n];
        if (i < 0) return pin_lo;
        if (i >= n) return pin_hi;
        return Uv[i];
    };

    std::vector<detail::Cons> rhs(n);
    auto compute_rhs = [&](const std::vector<detail::Cons>& Uv) {
        update_prims(Uv);
        auto prim_at = [&](int i) -> detail::PrimCache {
            if (periodic) return W[(i % n + n) % n];
            if (i < 0) return detail::primitives(cfg.eos, pin_lo);
            if (i >= n) return detail::primitives(cfg.eos, pin_hi);
            return W[i];
        };
        // face fluxes F[f] at x_{f-1/2}, f = 0..n; Rusanov on minmod-limited
        // linear reconstructions (second order on smooth data, first at jumps)
        static thread_local std::vector<detail::Cons> F;
        F.assign(n + 1, {0, 0, 0});
        auto rec = [&](double um, double u0, double up, double s) {
            return u0 + 0.5 * s * detail::minmod(u0 - um, up - u0);
        };
        for (int f = 0; f <= n; ++f) {
            detail::Cons Umm = cons_at(Uv, f - 2), Um = cons_at(Uv, f - 1);
            detail::Cons Up = cons_at(Uv, f), Upp = cons_at(Uv, f + 1);
            detail::Cons UL{rec(Umm.rho, Um.rho, Up.rho, +1.0),
                            rec(Umm.j, Um.j, Up.j, +1.0),
                            rec(Umm.E, Um.E, Up.E, +1.0)};
            detail::Cons UR{rec(Um.rho, Up.rho, Upp.rho, -1.0),
                            rec(Um.j, Up.j, Upp.j, -1.0),
                            rec(Um.E, Up.E, Upp.E, -1.0)};
            detail::PrimCache WL = detail::primitives(cfg.eos, UL);
            detail::PrimCache WR = detail::primitives(cfg.eos, UR);
            double a = std::max(std::abs(WL.v) + WL.c, std::abs(WR.v) + WR.c);
            detail::Cons FL{UL.j, UL.j * WL.v + WL.p, (UL.E + WL.p) * WL.v};
            detail::Cons FR{UR.j, UR.j * WR.v + WR.p, (UR.E + WR.p) * WR.v};
            F[f].rho = 0.5 * (FL.rho + FR.rho) - 0.5 * a * (UR.rho - UL.rho);
            F[f].j = 0.5 * (FL.j + FR.j) - 0.5 * a * (UR.j - UL.j);
            F[f].E = 0.5 * (FL.E + FR.E) - 0.5 * a * (UR.E - UL.E);
            if (eps > 0) {
                detail::PrimCache Wm = prim_at(f - 1), Wp = prim_at(f);
                TransportEval trL =
                    transport(cfg.transport, cfg.eos, {Wm.u, Um.rho});
                TransportEval trR = transport(cfg.transport, cfg.eos, {Wp.u, Up.rho});
                double mu = 0.5 * (longitudinal_viscosity(trL, 1) +
                                   longitudinal_viscosity(trR, 1));
                double kap = 0.5 * (trL.kappa + trR.kappa);
                double dvdx = (Wp.v - Wm.v) / dx;
                double dTdx = (Wp.T - Wm.T) / dx;
                double v_face = 0.5 * (Wm.v + Wp.v);
                F[f].j += -mu * dvdx;
                F[f].E += -mu * dvdx * v_face - kap * dTdx;
            }
        }
        for (int i = 0; i < n; ++i) {
            rhs[i].rho = -(F[i + 1].rho - F[i].rho) / dx;
            rhs[i].j = -(F[i + 1].j - F[i].j) / dx;
            rhs[i].E = -(F[i + 1].E - F[i].E) / dx;
        }
    };

    // sponge ramp toward the pinned states (non-periodic runs)
    std::vector<double> sponge_w(n, 0.0);
    if (!periodic && cfg.sponge_cells > 0) {
        for (int i = 0; i < n; ++i) {
            int edge = std::min(i, n - 1 - i);
            if (edge < cfg.sponge_cells) {
                double z = 1.0 - double(edge) / cfg.sponge_cells;
                sponge_w[i] = 0.25 * z * z;
            }
        }
    }

    auto totals = [&](const std::vector<detail::Cons>& Uv) {
        double m = 0, mo = 0, en = 0, s = 0;
        for (int i = 0; i < n; ++i) {
            m += Uv[i].rho;
            mo += Uv[i].j;
            en += Uv[i].E;
            double v = Uv[i].j / Uv[i].rho;
            s += entropy(cfg.eos, {Uv[i].E - 0.5 * Uv[i].rho * v * v, Uv[i].rho});
        }
        return std::array<double, 4>{m * dx, mo * dx, en * dx, s * dx};
    };
    auto tot0 = totals(U);

    Grid grid;
    grid.d = 1;
    grid.nx = {n, 1};
    grid.dx = {dx, 1.0};
    grid.nt = nt_snapshots;
    grid.dt = (t_end - t_begin) / (nt_snapshots - 1);
    grid.periodic = {periodic, false};
    grid.x0[0] = cfg.x_min + 0.5 * dx;
    grid.t0 = t_begin;
    update_prims(U);
    double c_ref = cfg.c_ref;
    if (!(c_ref > 0))
        for (int i = 0; i < n; ++i) c_ref = std::max(c_ref, W[i].c);
    grid.c_ref = c_ref;
    grid.validate();

    FieldBlock block(grid);
    block.eps = eps;
    auto store = [&](int k) {
        update_prims(U);
        for (int i = 0; i < n; ++i) {
            block.rho.at(i, 0, k) = U[i].rho;
            block.v[0].at(i, 0, k) = W[i].v;
            block.u.at(i, 0, k) = W[i].u;
        }
    };
    store(0);

    RunDiagnostics dg;
    dg.dt_min = std::numeric_limits<double>::infinity();
    double t = t_begin;
    double prev_entropy = tot0[3];
    for (int k = 1; k < nt_snapshots; ++k) {
        const double t_target = t_begin + k * grid.dt;
        while (t < t_target - 1e-13 * (t_end - t_begin)) {
            update_prims(U);
            double dt = std::min(stable_dt(), t_target - t);
            if (!(dt > 1e-14 * (t_end - t_begin)))
                throw CflViolation("time step collapsed at t = " + format_double(t));
            // SSP-RK3 (Shu-Osher)
            compute_rhs(U);
            for (int i = 0; i < n; ++i)
                U1[i] = {U[i].rho + dt * rhs[i].rho, U[i].j + dt * rhs[i].j,
                         U[i].E + dt * rhs[i].E};
            compute_rhs(U1);
            for (int i = 0; i < n; ++i)
                U2[i] = {0.75 * U[i].rho + 0.25 * (U1[i].rho + dt * rhs[i].rho),
                         0.75 * U[i].j + 0.25 * (U1[i].j + dt * rhs[i].j),
                         0.75 * U[i].E + 0.25 * (U1[i].E + dt * rhs[i].E)};
            compute_rhs(U2);
            for (int i = 0; i < n; ++i)
                U[i] = {U[i].rho / 3.0 + 2.0 / 3.0 * (U2[i].rho + dt * rhs[i].rho),
                        U[i].j / 3.0 + 2.0 / 3.0 * (U2[i].j + dt * rhs[i].j),
                        U[i].E / 3.0 + 2.0 / 3.0 * (U2[i].E + dt * rhs[i].E)};
            if (!periodic)
                for (int i = 0; i < n; ++i)
                    if (sponge_w[i] > 0) {
                        const detail::Cons& ref = i < n / 2 ? pin_lo : pin_hi;
                        U[i].rho += sponge_w[i] * (ref.rho - U[i].rho);
                        U[i].j += sponge_w[i] * (ref.j - U[i].j);
                        U[i].E += sponge_w[i] * (ref.E - U[i].E);
                    }
            t += dt;
            ++dg.steps;
            dg.dt_min = std::min(dg.dt_min, dt);
            dg.dt_max = std::max(dg.dt_max, dt);
            if (periodic && eps > 0) {
                auto tt = totals(U);
                dg.min_entropy_increment =
                    std::min(dg.min_entropy_increment, tt[3] - prev_entropy);
                prev_entropy = tt[3];
            }
        }
        t = t_target;
        store(k);
    }
    if (diag) {
        auto tt = totals(U);
        dg.mass_drift_rel = std::abs(tt[0] - tot0[0]) / std::abs(tot0[0]);
        dg.momentum_drift_abs = std::abs(tt[1] - tot0[1]);
        dg.energy_drift_rel = std::abs(tt[2] - tot0[2]) / std::abs(tot0[2]);
        *diag = dg;
    }
    return block;
}

// ---------------------------------------------------------------------------
// Isentropic simple-wave initial data
// ---------------------------------------------------------------------------

struct SmoothWave {
    InitialData init;
    double shock_time;    // characteristic-crossing estimate
    double rho0, p0, c0;  // background state
    EosSpec eos;
    double amplitude, wavelength, x_min, x_max;

    double lambda_plus(double x) const {  // v + c of the initial profile
        double gamma = eos.gamma();
        double rho = rho0 * (1.0 + amplitude * std::sin(2.0 * M_PI * x / wavelength));
        double c = c0 * std::pow(rho / rho0, 0.5 * (gamma - 1.0));
        double v = 2.0 * (c - c0) / (gamma - 1.0);
        return v + c;
    }
    // exact pre-shock solution by tracing characteristics (Newton on the foot point)
    void sample(double x, double t, double& rho, double& v, double& u) const {
        double gamma = eos.gamma();
        double xi = x;
        for (int it = 0; it < 200; ++it) {
            double f = xi + lambda_plus(xi) * t - x;
            double dxi = 1e-7 * wavelength;
            double fp = (lambda_plus(xi + dxi) - lambda_plus(xi - dxi)) / (2 * dxi) * t + 1.0;
            double step = f / fp;
            xi -= step;
            if (std::abs(step) < 1e-14 * wavelength) break;
        }
        rho = rho0 * (1.0 + amplitude * std::sin(2.0 * M_PI * xi / wavelength));
        double c = c0 * std::pow(rho / rho0, 0.5 * (gamma - 1.0));
        v = 2.0 * (c - c0) / (gamma - 1.0);
        double p = p0 * std::pow(rho / rho0, gamma);
        u = eos.alpha * p;
    }
};

// Right-moving simple wave: constant Riemann invariant and specific entropy.
inline SmoothWave smooth_wave_ic(const EosSpec& eos, double amplitude, double wavelength,
                                 double rho0, double p0, int nx, double x_min, double x_max,
                                 double run_window) {
    if (eos.kind != EosKind::IdealGas)
        throw ConfigError("simple-wave data is generated for the ideal gas");
    if (!(amplitude >= 0) || amplitude >= 0.5)
        throw ConfigError("wave amplitude must lie in [0, 0.5)");
    SmoothWave w;
    w.eos = eos;
    w.rho0 = rho0;
    w.p0 = p0;
    w.amplitude = amplitude;
    w.wavelength = wavelength;
    w.x_min = x_min;
    w.x_max = x_max;
    w.c0 = eval_thermo(eos, {eos.alpha * p0, rho0}).sound_speed;
    // shock-formation time from the steepest compression of v + c
    double min_slope = 0.0;
    const int scan = 4096;
    for (int i = 0; i < scan; ++i) {
        double x = x_min + (x_max - x_min) * (i + 0.5) / scan;
        double d = 1e-6 * wavelength;
        double slope = (w.lambda_plus(x + d) - w.lambda_plus(x - d)) / (2 * d);
        min_slope = std::min(min_slope, slope);
    }
    w.shock_time = min_slope < 0 ? -1.0 / min_slope : INFINITY;
    if (run_window >= 0.9 * w.shock_time)
        throw WouldShockInWindow("window " + format_double(run_window) +
                                 " reaches the shock-formation time " +
                                 format_double(w.shock_time));
    const double dx = (x_max - x_min) / nx;
    w.init.rho.resize(nx);
    w.init.v.resize(nx);
    w.init.u.resize(nx);
    for (int i = 0; i < nx; ++i) {
        double rho, v, u;
        w.sample(x_min + (i + 0.5) * dx, 0.0, rho, v, u);
        w.init.rho[i] = rho;
        w.init.v[i] = v;
        w.init.u[i] = u;
    }
    return w;
}

// Exact simple-wave space-time block (pre-shock), for refinement oracles.
inline FieldBlock exact_simple_wave_block(const SmoothWave& w, int nx, int nt, double t_end) {
    Grid g;
    g.d = 1;
    g.nx = {nx, 1};
    g.dx = {(w.x_max - w.x_min) / nx, 1.0};
    g.nt = nt;
    g.dt = t_end / (nt - 1);
    g.periodic = {true, false};
    g.x0[0] = w.x_min + 0.5 * g.dx[0];
    g.c_ref = w.c0;
    g.validate();
    FieldBlock b(g);
    b.eps = 0.0;
    for_each_cell(b.box(), [&](int ix, int iy, int it) {
        double rho, v, u;
        w.sample(g.x(ix), g.t(it), rho, v, u);
        b.rho.at(ix, iy, it) = rho;
        b.v[0].at(ix, iy, it) = v;
        b.u.at(ix, iy, it) = u;
    });
    return b;
}

// L1 distance between a block's final snapshot and the RH step (x_s at the
// 50% density crossing), used by the eps-scan convergence check.
inline double l1_distance_to_step(const FieldBlock& blk, const RankineHugoniot& rh) {
    const Grid& g = blk.grid;
    const int n = g.nx[0], it = g.nt - 1;
    double rho_mid = 0.5 * (rh.upstream.rho + rh.downstream.rho);
    double xs = g.x(n - 1);
    for (int i = 0; i + 1 < n; ++i) {
        double a = blk.rho.at(i, 0, it), b = blk.rho.at(i + 1, 0, it);
        if ((a - rho_mid) * (b - rho_mid) <= 0 && a != b) {
            xs = g.x(i) + (rho_mid - a) / (b - a) * g.dx[0];
            break;
        }
    }
    double acc = 0;
    for (int i = 0; i < n; ++i) {
        bool up = g.x(i) < xs;
        const RhSide& s = up ? rh.upstream : rh.downstream;
        acc += std::abs(blk.rho.at(i, 0, it) - s.rho) +
               std::abs(blk.v[0].at(i, 0, it) - (s.v - rh.frame_shift)) +
               std::abs(blk.u.at(i, 0, it) - s.u);
    }
    return acc * g.dx[0];
}

}  // namespace onsager
