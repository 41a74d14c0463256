#pragma once
// The acceptance experiments: a fixed battery of desk-scale runs checking
// the exact shock oracles, the viscosity and filter-scale limits, the
// machine-precision identity suite, and the commutator scaling laws. Every
// tolerance is pinned here; the CLI `report` command and the acceptance test
// binary both run this battery.

#include "onsager/config.hpp"
#include "onsager/scans.hpp"

#include <sstream>

namespace onsager {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::vector<std::pair<std::string, double>> metrics;
    std::string note;

    void metric(const std::string& k, double v) { metrics.push_back({k, v}); }
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!note.empty()) note += "; ";
            note += what;
        }
    }
};

struct AcceptanceOptions {
    int threads = 1;
    std::uint64_t seed = 20260808ULL;
};

struct AcceptanceReport {
    std::vector<CriterionResult> criteria;
    EllScanResult shock_scan;   // criterion 3/4 table, for serialization
    EpsScanResult eps_scan;     // criterion 6 table
    bool all_pass() const {
        for (const auto& c : criteria)
            if (!c.pass) return false;
        return !criteria.empty();
    }
};

namespace acceptance {

inline EosSpec lab_eos() {
    EosSpec eos;
    eos.alpha = 2.5;  // gamma = 1.4
    return eos;
}

inline ShockSetup lab_setup() {
    ShockSetup s;
    s.upstream = {2.5, 1.0};  // p = 1, c = sqrt(1.4)
    s.mach = 2.0;
    return s;
}

// ---- criterion 1: Rankine-Hugoniot oracle exactness ----
inline CriterionResult criterion1() {
    CriterionResult c;
    c.id = 1;
    c.name = "Rankine-Hugoniot oracle exactness";
    c.pass = true;
    RankineHugoniot rh = rh_jump(lab_setup(), lab_eos());
    double r_rho = rh.downstream.rho / rh.upstream.rho;
    double r_p = rh.downstream.p / rh.upstream.p;
    double flux = rh_flux_residual(rh);
    c.metric("rho_ratio", r_rho);
    c.metric("p_ratio", r_p);
    c.metric("flux_residual", flux);
    c.require(std::abs(r_rho - 8.0 / 3.0) <= 1e-12 * (8.0 / 3.0), "rho ratio != 8/3");
    c.require(std::abs(r_p - 4.5) <= 1e-12 * 4.5, "p ratio != 4.5");
    c.require(flux <= 1e-12, "cross-jump flux equality above 1e-12");
    return c;
}

// ---- criterion 2: viscous profile <-> RH consistency ----
inline CriterionResult criterion2() {
    CriterionResult c;
    c.id = 2;
    c.name = "Becker profile consistent with Rankine-Hugoniot";
    c.pass = true;
    EosSpec eos = lab_eos();
    ShockSetup setup = lab_setup();
    const double eps = 0.01;
    TransportModel tm = becker_transport(eos, 1.0, eps);
    BeckerProfile prof = becker_profile(setup, eos, tm, eps, 1024, 1.0 / 1024);
    const RankineHugoniot& rh = prof.rh;
    double end_up = std::abs(prof.rho.front() - rh.upstream.rho) / rh.upstream.rho;
    double end_dn = std::abs(prof.rho.back() - rh.downstream.rho) / rh.downstream.rho;
    double sig_err = std::abs(prof.integrated_Sigma - rh.anomaly_entropy) /
                     rh.anomaly_entropy;
    double q_err = std::abs(prof.integrated_Q - rh.anomaly_ke) / rh.anomaly_ke;
    c.metric("endpoint_up_rel", end_up);
    c.metric("endpoint_dn_rel", end_dn);
    c.metric("sigma_integral_rel_err", sig_err);
    c.metric("q_integral_rel_err", q_err);
    c.require(end_up <= 1e-8 && end_dn <= 1e-8, "profile endpoints off the RH states");
    c.require(sig_err <= 1e-6, "integrated Sigma differs from j*ds");
    c.require(q_err <= 1e-6, "integrated Q differs from the RH kinetic anomaly");
    return c;
}

// one decade of filter scales for the shock laboratory, placed well above
// the viscous width and well below the test-function support
inline std::vector<double> lab_scales() {
    std::vector<double> s;
    for (int i = 0; i < 9; ++i) s.push_back(0.011 * std::pow(10.0, i / 8.0));
    return s;
}

// ---- shared steady-shock laboratory for criteria 3, 4 and 5a ----
struct ShockLab {
    EosSpec eos;
    TransportModel tm;
    RankineHugoniot rh;
    FieldBlock block;
    double eps = 0.0, x_shock = 0.0, t_mid = 0.0, width = 0.0;
    std::vector<double> ells;
    std::vector<BumpSpec> bumps;
    EllScanResult scan;
    double smeared_Q_phi0 = 0.0;

    ShockLab() : block(Grid{}) {}
};

inline ShockLab make_shock_lab(int threads) {
    ShockLab lab;
    lab.eos = lab_eos();
    ShockSetup setup = lab_setup();
    lab.rh = rh_jump(setup, lab.eos);
    lab.eps = 0.002;
    // unit coefficients (not the Becker ratio): the scan observables are
    // transport-independent or data-internal, and the smaller conductivity
    // keeps the explicit viscous time step affordable
    lab.tm.eps = lab.eps;

    const int nx = 3072;
    const double dx = 1.0 / nx;
    const double c_ref = lab.rh.upstream.c;
    lab.ells = lab_scales();
    const double ell_min = lab.ells.front(), ell_max = lab.ells.back();
    const double dt_snap = ell_min / (4.0 * c_ref);
    const double t_pad = ell_max / c_ref;
    const double bump_ht = 0.24, bump_shift = 0.05;
    const double T = 2.0 * (t_pad + 0.02) + 2.0 * (bump_ht + bump_shift);
    const int nt = int(std::ceil(T / dt_snap)) + 1;

    BeckerProfile prof = becker_profile(setup, lab.eos, lab.tm, lab.eps, nx, dx, 0.5);
    lab.width = prof.width_10_90;
    if (prof.width_10_90 / dx < 8.0)
        throw UnresolvedRun("acceptance shock run underresolved");
    NsConfig ns;
    ns.eos = lab.eos;
    ns.transport = lab.tm;
    ns.nx = nx;
    ns.bc = SolverBc::InflowOutflow;
    InitialData init{prof.rho, prof.v, prof.u};
    ns.c_ref = c_ref;
    lab.block = integrate(ns, init, 0.0, (nt - 1) * dt_snap, nt);
    lab.x_shock = 0.5;
    lab.t_mid = 0.5 * (nt - 1) * dt_snap;

    lab.bumps = {
        {"phi0", {0.5, 0.0, lab.t_mid}, {0.32, 1.0, bump_ht}},
        {"phi1", {0.5, 0.0, lab.t_mid - bump_shift}, {0.32, 1.0, bump_ht}},
        {"phi2", {0.5, 0.0, lab.t_mid + bump_shift}, {0.32, 1.0, bump_ht}}};

    EllScanConfig sc;
    sc.ells = lab.ells;
    sc.stride = {0, 1, 0};  // per-scale automatic thinning
    sc.exclude_cells = 18;
    sc.bumps = lab.bumps;
    sc.threads = threads;
    sc.limits_against_inverse_scale = true;
    lab.scan = scan_ell(lab.block, lab.eos, lab.tm, sc);

    DissipationFields dis = dissipation_fields(lab.block, lab.eos, lab.tm);
    TestFunction phi0 = materialize_bump(lab.block.grid, lab.bumps[0]);
    lab.smeared_Q_phi0 = smear(lab.block.grid, dis.Q, phi0);
    return lab;
}

// ---- criterion 3: entropy anomaly limit on the shock ----
inline CriterionResult criterion3(const ShockLab& lab) {
    CriterionResult c;
    c.id = 3;
    c.name = "inertial entropy production extrapolates to j*ds*int(phi)";
    c.pass = true;
    for (const auto& spec : lab.bumps) {
        const ColumnLimit* cl =
            find_limit(lab.scan, "intrinsic_entropy", "Sigma_inert_star", spec.name);
        c.require(cl && cl->ok, "no extrapolated limit for " + spec.name);
        if (!cl || !cl->ok) continue;
        double target = lab.rh.anomaly_entropy * bump_time_column(spec, lab.x_shock);
        double rel = std::abs(cl->limit.y_inf - target) / std::abs(target);
        c.metric("rel_err_" + spec.name, rel);
        c.require(rel <= 0.02, spec.name + " limit misses j*ds by more than 2%");
    }
    return c;
}

// ---- criterion 4: Q = tau(p, Theta) for the stationary shock ----
inline CriterionResult criterion4(const ShockLab& lab) {
    CriterionResult c;
    c.id = 4;
    c.name = "Q_flux vanishes while tau(p,Theta) carries the dissipation";
    c.pass = true;
    const std::string phi = "phi0";
    double q_ref = lab.smeared_Q_phi0;
    c.metric("smeared_Q", q_ref);
    const ColumnLimit* tpt =
        find_limit(lab.scan, "resolved_kinetic_energy", "tau_p_theta", phi);
    c.require(tpt && tpt->ok, "no tau(p,Theta) limit");
    {
        std::vector<double> vals;
        double bound = 0.0;
        for (double ell : lab.ells) {
            vals.push_back(
                smeared_value(lab.scan, ell, "resolved_kinetic_energy", "Q_flux", phi));
            bound = std::max(bound, std::abs(vals.back()));
        }
        double estimate = bound;
        try {
            estimate = std::abs(extrapolate_limit(lab.ells, vals, 0.05).y_inf);
            c.metric("Q_flux_limit", estimate);
        } catch (const Error&) {
            // series pinned at zero within noise: bound it by the window max
            c.metric("Q_flux_window_bound", bound);
        }
        c.require(estimate <= 0.05 * std::abs(q_ref),
                  "Q_flux limit above 5% of the smeared Q");
    }
    if (tpt && tpt->ok) {
        c.metric("tau_p_theta_limit", tpt->limit.y_inf);
        double rel = std::abs(tpt->limit.y_inf - q_ref) / std::abs(q_ref);
        c.metric("tau_vs_Q_rel", rel);
        c.require(rel <= 0.05, "tau(p,Theta) limit misses the smeared Q by more than 5%");
    }
    return c;
}

}  // namespace acceptance

}  // namespace onsager
namespace onsager {
namespace acceptance {

namespace detail_acc {

inline std::vector<double> geoscales(double lo, double hi, int n) {
    std::vector<double> s(n);
    for (int i = 0; i < n; ++i) s[i] = lo * std::pow(hi / lo, double(i) / (n - 1));
    return s;
}

// midpoint-displacement field with a planted exponent (duplicated from the
// test helpers so the report battery is self-contained)
inline std::vector<double> fractional_profile(int levels, double H, std::uint64_t seed) {
    int n = 1 << levels;
    std::vector<double> f(n + 1, 0.0);
    Rng rng(seed);
    f[0] = rng.uniform(-0.3, 0.3);
    f[n] = f[0];
    for (int level = 0; level < levels; ++level) {
        int step = n >> level;
        double amp = std::pow(0.5, (level + 1) * H);
        for (int start = 0; start < n; start += step) {
            int mid = start + step / 2;
            if (mid == start) continue;
            f[mid] = 0.5 * (f[start] + f[start + step]) + amp * rng.uniform(-1.0, 1.0);
        }
    }
    f.pop_back();
    return f;
}

inline Grid analysis_grid(int nx, int nt) {
    Grid g;
    g.d = 1;
    g.nx = {nx, 1};
    g.dx = {1.0 / nx, 1.0};
    g.nt = nt;
    g.dt = 1.0 / nx;  // time resolved like space, c_ref = 1
    g.periodic = {true, false};
    g.c_ref = 1.0;
    g.validate();
    return g;
}

inline Field steady_field(const Grid& g, const std::vector<double>& profile) {
    Field r(Box::full(g));
    for_each_cell(r.box, [&](int ix, int iy, int it) {
        r.at(ix, iy, it) = profile[std::size_t(ix) % profile.size()];
    });
    return r;
}

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(y[i] > 0)) continue;
        double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 3) throw InsufficientScalingRange("not enough positive values for a slope");
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace detail_acc

// ---- criterion 5: Besov sharpness at p = 3 ----
inline CriterionResult criterion5(const ShockLab& lab, int threads) {
    (void)threads;
    CriterionResult c;
    c.id = 5;
    c.name = "Besov exponents: shock at 1/3 (critical), smooth wave regular";
    c.pass = true;

    // shock data: the inviscid-limit step itself, the field of the sharpness
    // statement (the viscous profile converges to it in the eps -> 0 limit)
    {
        const int snx = 1024, snt = 96;
        Grid sg;
        sg.d = 1;
        sg.nx = {snx, 1};
        sg.dx = {1.0 / snx, 1.0};
        sg.nt = snt;
        sg.dt = 0.005;
        sg.periodic = {false, false};
        sg.c_ref = lab.rh.upstream.c;
        sg.validate();
        FieldBlock step = make_step_block(sg, lab.rh, 0.5);
        Box O{{snx / 2 - snx / 5, 0, snt / 3}, {snx / 2 + snx / 5, 1, 2 * snt / 3}};
        double margin = metric_margin(sg, Box::full(sg), O);
        auto ells = detail_acc::geoscales(8.0 / snx, 0.45 * margin, 14);
        BesovScanConfig bc;
        bc.ells = ells;
        bc.p_values = {3.0};
        bc.domain = O;
        bc.fit_lo = ells.front();
        bc.fit_hi = ells.back();
        bc.critical_tol = 0.05;
        bc.shift_stride = {1, 1, 1};
        bc.compare_spacetime = false;
        BesovScanResult br = besov_scan(step, bc);
        std::array<double, 3> sig{};
        for (const auto& fr : br.fields) {
            double s = fr.fit_spacetime.sigma;
            if (fr.field_id == "u") sig[0] = s;
            if (fr.field_id == "rho") sig[1] = s;
            if (fr.field_id == "v") sig[2] = s;
            c.metric("sigma3_" + fr.field_id, s);
            c.require(std::abs(s - 1.0 / 3.0) <= 0.05,
                      "sigma3(" + fr.field_id + ") off 1/3 by more than 0.05");
        }
        auto cond = br.conditions.at(3.0);
        for (int i = 0; i < 3; ++i) {
            c.metric("margin_" + std::to_string(i + 1), cond.margin[i]);
            c.require(std::abs(cond.margin[i]) <= 0.05,
                      "exponent-condition margin " + std::to_string(i + 1) +
                          " not critical");
        }
    }

    // smooth simple wave: regular exponents and vanishing energy flux
    {
        EosSpec eos = lab_eos();
        SmoothWave w = smooth_wave_ic(eos, 0.05, 1.0, 1.0, 1.0, 512, 0.0, 1.0, 0.6);
        FieldBlock sb = exact_simple_wave_block(w, 512, 96, 0.6);
        const Grid& sg = sb.grid;
        Box O{{0, 0, 32}, {512, 1, 64}};
        auto ells = detail_acc::geoscales(8.0 / 512, 0.11, 10);
        auto sf = structure_function(sg, sb.v[0], O, 3.0, ells,
                                     StructureMode::SpaceTime, "v");
        auto fit = fit_exponent(sf, ells.front(), ells.back());
        c.metric("sigma3_smooth_v", fit.sigma);
        c.require(fit.sigma >= 0.95, "smooth-wave sigma3 below 0.95");

        EllScanConfig sc;
        sc.ells = detail_acc::geoscales(0.03, 0.15, 8);
        sc.stride = {2, 1, 1};
        sc.threads = 1;
        TransportModel tm0;
        tm0.eps = 0.0;
        EllScanResult es = scan_ell(sb, eos, tm0, sc);
        std::vector<double> mags;
        for (double ell : sc.ells)
            mags.push_back(std::abs(smeared_value(es, ell, "resolved_kinetic_energy",
                                                  "Q_flux", "phi0")));
        double slope = detail_acc::loglog_slope(sc.ells, mags);
        c.metric("Q_flux_slope_smooth", slope);
        c.require(slope >= 1.5, "smooth-wave Q_flux slope below 1.5");
        double q_scale = *std::max_element(mags.begin(), mags.end());
        const ColumnLimit* cl = find_limit(es, "resolved_kinetic_energy", "Q_flux", "phi0");
        if (cl && cl->ok) {
            c.metric("Q_flux_limit_smooth", cl->limit.y_inf);
            c.require(std::abs(cl->limit.y_inf) <= 0.05 * q_scale,
                      "smooth-wave Q_flux limit does not vanish");
        } else {
            // a clean power-law decay to zero may defeat the three-parameter
            // fit; fall back to the smallest measured value
            c.metric("Q_flux_smallest_smooth", mags.back());
            c.require(mags.back() <= 0.05 * q_scale,
                      "smooth-wave Q_flux does not vanish");
        }
    }
    return c;
}

// ---- criterion 6: strong eps -> 0 convergence ----
inline CriterionResult criterion6(int threads, EpsScanResult* scan_out = nullptr) {
    CriterionResult c;
    c.id = 6;
    c.name = "eps scan: L1 slope ~ 1, Cauchy dissipation, filtered residual order";
    c.pass = true;
    EosSpec eos = lab_eos();
    EpsScanConfig ec;
    ec.eps_list = {0.024, 0.012, 0.006, 0.003};
    ec.setup = lab_setup();
    ec.kappa_over_mu = 1.0;
    ec.nx = 0;  // per-eps resolution at fixed cells per width
    ec.cells_per_width = 14.0;
    ec.settle_time = 0.45;
    ec.t_end = 0.18;
    ec.nt_snapshots = 25;
    ec.threads = threads;
    EpsScanResult es = scan_eps(eos, ec);
    if (scan_out) *scan_out = es;
    c.metric("l1_slope", es.l1_slope);
    c.require(std::abs(es.l1_slope - 1.0) <= 0.15, "L1 distance slope off 1 by > 0.15");
    for (const auto& [obs, worst] : es.max_cauchy_rel) {
        if (obs == "p_theta") continue;  // reported, not gated
        c.metric("cauchy_" + obs, worst);
        c.require(worst <= 0.02, obs + " not Cauchy within 2%");
    }

    // filtered-Euler residual order on exact smooth-limit data
    {
        SmoothWave w = smooth_wave_ic(eos, 0.05, 1.0, 1.0, 1.0, 512, 0.0, 1.0, 0.5);
        auto resid_norm = [&](int n) {
            FieldBlock b = exact_simple_wave_block(w, n, n / 2, 0.5);
            FilterKernel K = build_kernel({}, 0.12, b.grid);
            TransportModel tm0;
            tm0.eps = 0.0;
            BudgetSet set = all_budgets(b, eos, tm0, K);
            double worst = 0.0;
            for (const char* eq :
                 {"filtered_mass", "filtered_momentum_x", "filtered_total_energy"}) {
                const Field& r = *set.by_equation(eq).find("residual");
                worst = std::max(worst, lp_norm(b.grid, r, r.box, 2.0));
            }
            return worst;
        };
        double r1 = resid_norm(128), r2 = resid_norm(256);
        c.metric("cg_residual_coarse", r1);
        c.metric("cg_residual_fine", r2);
        c.metric("cg_residual_ratio", r1 / r2);
        c.require(r1 / r2 >= 3.5, "filtered-Euler residual ratio below 3.5 per halving");
    }
    return c;
}

// ---- criterion 7: machine-precision identity suite ----
inline CriterionResult criterion7(std::uint64_t seed) {
    CriterionResult c;
    c.id = 7;
    c.name = "algebraic identity suite at 1e-10";
    c.pass = true;
    EosSpec eos = lab_eos();
    double worst_all = 0.0;

    auto check_block = [&](const Grid& g, std::uint64_t sd, double eps) {
        Rng rng(sd);
        FieldBlock b(g);
        b.eps = eps;
        for (double& x : b.rho.a) x = rng.uniform(0.6, 1.8);
        for (double& x : b.u.a) x = rng.uniform(1.5, 3.0);
        for (double& x : b.v[0].a) x = rng.uniform(-0.5, 0.5);
        if (g.d == 2)
            for (double& x : b.v[1].a) x = rng.uniform(-0.5, 0.5);
        TransportModel tm;
        tm.eps = eps;
        double ell = g.d == 2 ? 0.3 : 0.28;
        FilterKernel K = build_kernel({}, ell, g);
        Box out = filtered_box(g, K, b.box());

        double worst = 0.0;
        auto track = [&](double v) { worst = std::max(worst, v); };

        // cumulant equivalence: moment route vs increment averages
        auto reldiff = [&](const Field& a, const Field& bb) {
            double m = 0;
            for (std::size_t i = 0; i < a.a.size(); ++i)
                m = std::max(m, std::abs(a.a[i] - bb.a[i]) /
                                    std::max({1.0, std::abs(a.a[i])}));
            return m;
        };
        track(reldiff(cumulant2(g, b.u, b.v[0], K, out),
                      cumulant2_via_increments(g, b.u, b.v[0], K, out)));
        track(reldiff(cumulant3(g, b.rho, b.u, b.v[0], K, out),
                      cumulant3_via_increments(g, b.rho, b.u, b.v[0], K, out)));
        // Favre dual routes
        track(reldiff(favre_cumulant2(g, b.u, b.v[0], b.rho, K, out),
                      favre_cumulant2_expanded(g, b.u, b.v[0], b.rho, K, out)));
        track(reldiff(favre_cumulant3(g, b.v[0], b.v[0], b.v[0], b.rho, K, out),
                      favre_cumulant3_expanded(g, b.v[0], b.v[0], b.v[0], b.rho, K, out)));
        // budget identities
        BudgetSet set = all_budgets(b, eos, tm, K);
        auto max_abs = [](const Field& f) {
            double m = 0;
            for (double v : f.a) m = std::max(m, std::abs(v));
            return m;
        };
        const auto& sub = set.by_equation("unresolved_kinetic_energy");
        const auto& ie = set.by_equation("intrinsic_internal_energy");
        const auto& se = set.by_equation("intrinsic_entropy");
        track(max_abs(*sub.find("identity_ke_decomposition")) /
              (max_abs(*set.by_equation("resolved_kinetic_energy").find("resolved_ke")) + 1.0));
        track(max_abs(*ie.find("identity_total_energy")) /
              (max_abs(*ie.find("u_star")) + 1.0));
        track(max_abs(*se.find("identity_s_star_dual")) /
              (max_abs(*se.find("s_star")) + 1.0));
        // Sigma_inert_star decomposition (inviscid form is definitional;
        // recompute with independent grouping on inviscid blocks)
        if (!(eps > 0)) {
            const Field& si = *se.find("Sigma_inert_star");
            const Field& fi = *se.find("I_flux");
            const Field& sf = *se.find("Sigma_flux_star");
            double m = 0;
            for (std::size_t i = 0; i < si.a.size(); ++i)
                m = std::max(m, std::abs(si.a[i] - (sf.a[i] - fi.a[i])) /
                                    (std::abs(si.a[i]) + 1.0));
            track(m);
        }
        // energy-budget telescoping
        {
            const Field& r_ke = *set.by_equation("resolved_kinetic_energy").find("residual");
            const Field& r_ie = *ie.find("residual");
            const Field& r_te = *set.by_equation("filtered_total_energy").find("residual");
            double m = 0;
            for (std::size_t i = 0; i < r_ke.a.size(); ++i)
                m = std::max(m, std::abs(r_ke.a[i] + r_ie.a[i] - r_te.a[i]) /
                                    std::max(1.0, std::abs(r_te.a[i])));
            track(m);
        }
        return worst;
    };

    {
        Grid g1;
        g1.d = 1;
        g1.nx = {32, 1};
        g1.dx = {1.0 / 32, 1.0};
        g1.nt = 16;
        g1.dt = 1.0 / 16;
        g1.periodic = {true, false};
        g1.c_ref = 1.0;
        Grid g2 = g1;
        g2.d = 2;
        g2.nx = {24, 24};
        g2.dx = {1.0 / 24, 1.0 / 24};
        g2.periodic = {true, true};
        worst_all = std::max(worst_all, check_block(g1, seed + 1, 0.0));
        worst_all = std::max(worst_all, check_block(g1, seed + 2, 0.02));
        worst_all = std::max(worst_all, check_block(g2, seed + 3, 0.0));
        worst_all = std::max(worst_all, check_block(g2, seed + 4, 0.015));
    }
    // Gibbs residuals over random states
    {
        Rng rng(seed + 9);
        double worst = 0;
        for (int i = 0; i < 1000; ++i) {
            double u = rng.uniform(0.3, 8.0), r = rng.uniform(0.2, 4.0);
            auto e = eval_thermo(lab_eos(), {u, r});
            double resid = std::abs(e.T * e.s - (u + e.p - e.mu * r));
            double scale = std::max({std::abs(u), std::abs(e.p), std::abs(e.T * e.s)});
            worst = std::max(worst, resid / scale);
        }
        c.metric("gibbs_worst", worst);
        worst_all = std::max(worst_all, worst);
    }
    c.metric("worst_rel_violation", worst_all);
    c.require(worst_all <= 1e-10, "identity suite exceeded 1e-10");
    return c;
}

// ---- criterion 8: commutator scaling laws ----
inline CriterionResult criterion8(std::uint64_t seed) {
    CriterionResult c;
    c.id = 8;
    c.name = "commutator scaling laws within 0.1";
    c.pass = true;
    using namespace detail_acc;

    const int nx = 2048, nt = 212;
    Grid g = analysis_grid(nx, nt);
    auto ells = geoscales(10.0 / nx, 100.0 / nx, 9);

    // constructed-exponent fields: a step (sigma_p = 1/p) and a smooth wave
    // (sigma = 1); checked at p = 4 for the pair laws, p = 3 for fluctuations
    Field step(Box::full(g)), step2(Box::full(g)), smooth(Box::full(g)),
        smooth2(Box::full(g));
    for_each_cell(Box::full(g), [&](int ix, int iy, int it) {
        double x = g.x(ix);
        step.at(ix, iy, it) = x < 0.5 ? 0.0 : 1.0;
        step2.at(ix, iy, it) = x < 0.5 ? 0.3 : -0.9;
        smooth.at(ix, iy, it) = std::sin(2 * M_PI * x);
        smooth2.at(ix, iy, it) = std::cos(2 * M_PI * x + 0.7);
    });
    Field frac = steady_field(g, fractional_profile(11, 0.5, seed + 5));
    Field frac08 = steady_field(g, fractional_profile(11, 0.8, seed + 6));

    auto norm_series = [&](const std::function<Field(const FilterKernel&, const Box&)>& make,
                           double p) {
        std::vector<double> vals;
        for (double ell : ells) {
            FilterKernel K = build_kernel({}, ell, g);
            Box out = filtered_box(g, K, Box::full(g));
            // fixed interior window, independent of ell
            Box O{{nx / 4, 0, nt / 2 - 2}, {3 * nx / 4, 1, nt / 2 + 2}};
            O = O.intersect(out);
            Field f = make(K, O);
            vals.push_back(lp_norm(g, f, O, p));
        }
        return vals;
    };
    auto check_slope = [&](const char* name, const std::vector<double>& vals,
                           double target, double tol) {
        double slope = loglog_slope(ells, vals);
        c.metric(name, slope);
        c.require(std::abs(slope - target) <= tol,
                  std::string(name) + " off " + format_double(target) + " by > " +
                      format_double(tol));
    };

    // pair cumulant, p/2-norm: slope sigma_f + sigma_g
    check_slope("tau_step_p2", norm_series([&](const FilterKernel& K, const Box& out) {
                    return cumulant2(g, step, step2, K, out);
                }, 2.0),
                0.5, 0.1);
    check_slope("tau_smooth_p2", norm_series([&](const FilterKernel& K, const Box& out) {
                    return cumulant2(g, smooth, smooth2, K, out);
                }, 2.0),
                2.0, 0.1);
    // cumulant derivative: slope sigma_f + sigma_g - 1
    check_slope("dtau_step_p2", norm_series([&](const FilterKernel& K, const Box& out) {
                    PaddedField pf = pad_for_kernel(g, product(step, step2), K, out);
                    Field m = apply_weights(g, K, pf, out);
                    // d/dx of tau = d/dx bar(fg) - product rule on bar f bar g
                    Field dm = apply_derivative(g, K, pf, out, 0);
                    PaddedField p1 = pad_for_kernel(g, step, K, out);
                    PaddedField p2 = pad_for_kernel(g, step2, K, out);
                    Field b1 = apply_weights(g, K, p1, out), d1 = apply_derivative(g, K, p1, out, 0);
                    Field b2 = apply_weights(g, K, p2, out), d2 = apply_derivative(g, K, p2, out, 0);
                    for (std::size_t i = 0; i < dm.a.size(); ++i)
                        dm.a[i] -= d1.a[i] * b2.a[i] + b1.a[i] * d2.a[i];
                    (void)m;
                    return dm;
                }, 2.0),
                -0.5, 0.1);
    // fluctuation: slope sigma at p = 3
    check_slope("fluct_step_p3", norm_series([&](const FilterKernel& K, const Box& out) {
                    return fluctuation(g, step, K, out);
                }, 3.0),
                1.0 / 3.0, 0.1);
    check_slope("fluct_frac_p3", norm_series([&](const FilterKernel& K, const Box& out) {
                    return fluctuation(g, frac, K, out);
                }, 3.0),
                0.5, 0.1);
    check_slope("fluct_frac08_p3", norm_series([&](const FilterKernel& K, const Box& out) {
                    return fluctuation(g, frac08, K, out);
                }, 3.0),
                0.8, 0.1);
    // composite defect with a genuinely nonlinear h: slope 2 min(sigma)
    auto h_nl = [](double a, double b) { return a * a + 0.5 * a * b; };
    check_slope("defect_step_p2", norm_series([&](const FilterKernel& K, const Box& out) {
                    return composite_defect(g, h_nl, step, step2, K, out);
                }, 2.0),
                0.5, 0.1);
    check_slope("defect_smooth_p2", norm_series([&](const FilterKernel& K, const Box& out) {
                    return composite_defect(g, h_nl, smooth, smooth2, K, out);
                }, 2.0),
                2.0, 0.1);
    return c;
}

inline AcceptanceReport run_acceptance(const AcceptanceOptions& opt) {
    AcceptanceReport rep;
    auto guarded = [&](int id, const std::string& name,
                       const std::function<CriterionResult()>& fn) {
        CriterionResult c;
        try {
            c = fn();
        } catch (const std::exception& e) {
            c.id = id;
            c.name = name;
            c.pass = false;
            c.note = std::string("aborted: ") + e.what();
        }
        rep.criteria.push_back(std::move(c));
    };
    guarded(1, "Rankine-Hugoniot oracle exactness", [] { return criterion1(); });
    guarded(2, "Becker profile consistent with Rankine-Hugoniot",
            [] { return criterion2(); });
    bool lab_ok = false;
    ShockLab lab;
    try {
        lab = make_shock_lab(opt.threads);
        lab_ok = true;
        rep.shock_scan = lab.scan;
    } catch (const std::exception& e) {
        CriterionResult c;
        c.id = 3;
        c.name = "shock laboratory";
        c.pass = false;
        c.note = std::string("shock run aborted: ") + e.what();
        rep.criteria.push_back(c);
    }
    if (lab_ok) {
        guarded(3, "inertial entropy production limit", [&] { return criterion3(lab); });
        guarded(4, "pressure-dilatation defect carries Q", [&] { return criterion4(lab); });
        guarded(5, "Besov sharpness", [&] { return criterion5(lab, opt.threads); });
    }
    guarded(6, "eps scan convergence", [&] { return criterion6(opt.threads, &rep.eps_scan); });
    guarded(7, "algebraic identity suite", [&] { return criterion7(opt.seed); });
    guarded(8, "commutator scaling laws", [&] { return criterion8(opt.seed); });
    std::sort(rep.criteria.begin(), rep.criteria.end(),
              [](const CriterionResult& a, const CriterionResult& b) { return a.id < b.id; });
    return rep;
}

}  // namespace acceptance
}  // namespace onsager
