#pragma once
// Scan drivers: smeared budget terms against the filter scale, viscosity
// scans with Cauchy diagnostics, and Besov analysis bundles. These are the
// cores of the CLI subcommands; they produce plain row tables plus
// extrapolated limits.

#include "onsager/besov.hpp"
#include "onsager/budgets.hpp"
#include "onsager/solver.hpp"

#include <map>

namespace onsager {

// ---------------------------------------------------------------------------
// ell scan
// ---------------------------------------------------------------------------

struct EllScanConfig {
    std::vector<double> ells;
    MollifierSpec kernel;
    // evaluation stride of the filtered fields; zero entries pick the
    // per-scale automatic stride of about `points_per_ell` samples per ell
    std::array<int, 3> stride{1, 1, 1};
    int points_per_ell = 12;
    int exclude_cells = 0;
    std::vector<BumpSpec> bumps;  // empty: three defaults placed in the ell_max box
    int threads = 1;
    double flat_tol = 2e-3;
    // Extrapolate columns against 1/ell instead of ell. On viscous data the
    // plain ell -> 0 limit of the inert observables is zero (every cumulant
    // vanishes on smooth fields); the double limit (eps -> 0 before ell -> 0)
    // appears as the inertial plateau, reached by removing the first-order
    // viscous-deficit in 1/ell.
    bool limits_against_inverse_scale = false;
};

struct ScanRow {
    double ell;
    std::string equation, term, test_fn;
    double value;
};

struct ColumnLimit {
    std::string equation, term, test_fn;
    std::string variable = "ell";  // control parameter of the extrapolation
    bool ok = false;
    std::string error;
    LimitExtrapolation limit;
};

struct EllScanResult {
    std::vector<ScanRow> rows;
    std::vector<ColumnLimit> limits;
    std::vector<BumpSpec> bumps;  // the bump parameters actually used
};

// Physical box of the filtered data at the largest scale, for bump placement.
inline std::array<std::array<double, 2>, 3> physical_valid_region(
    const FieldBlock& blk, const FilterKernel& K, int exclude_cells) {
    const Grid& g = blk.grid;
    Box data = blk.box();
    if (!g.periodic[0]) {
        data.lo[0] += exclude_cells;
        data.hi[0] -= exclude_cells;
    }
    if (blk.eps > 0) data = detail::interior_spatial(g, detail::interior_spatial(g, data));
    Box fb = filtered_box(g, K, data);
    return {{{g.x(fb.lo[0]), g.x(fb.hi[0] - 1)},
             {g.d == 2 ? g.y(fb.lo[1]) : 0.0, g.d == 2 ? g.y(fb.hi[1] - 1) : 0.0},
             {g.t(fb.lo[2]), g.t(fb.hi[2] - 1)}}};
}

// Default bumps: half the valid region wide, shifted against each other.
inline std::vector<BumpSpec> default_bumps_for_region(
    const std::array<std::array<double, 2>, 3>& r) {
    auto lerp = [&](int a, double f) { return r[a][0] + f * (r[a][1] - r[a][0]); };
    auto width = [&](int a, double f) { return f * (r[a][1] - r[a][0]); };
    std::vector<BumpSpec> b(3);
    b[0] = {"phi0",
            {lerp(0, 0.5), lerp(1, 0.5), lerp(2, 0.5)},
            {width(0, 0.25), std::max(width(1, 0.25), 1e-12), width(2, 0.25)}};
    b[1] = {"phi1",
            {lerp(0, 0.42), lerp(1, 0.5), lerp(2, 0.4)},
            {width(0, 0.25), std::max(width(1, 0.25), 1e-12), width(2, 0.25)}};
    b[2] = {"phi2",
            {lerp(0, 0.58), lerp(1, 0.5), lerp(2, 0.6)},
            {width(0, 0.25), std::max(width(1, 0.25), 1e-12), width(2, 0.25)}};
    return b;
}

inline Box fine_request_for_bumps(const Grid& g, const std::vector<BumpSpec>& bumps) {
    double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300, tlo = 1e300,
           thi = -1e300;
    for (const auto& b : bumps) {
        xlo = std::min(xlo, b.center[0] - b.halfwidth[0]);
        xhi = std::max(xhi, b.center[0] + b.halfwidth[0]);
        ylo = std::min(ylo, b.center[1] - b.halfwidth[1]);
        yhi = std::max(yhi, b.center[1] + b.halfwidth[1]);
        tlo = std::min(tlo, b.center[2] - b.halfwidth[2]);
        thi = std::max(thi, b.center[2] + b.halfwidth[2]);
    }
    Box r;
    r.lo[0] = int(std::floor((xlo - g.x0[0]) / g.dx[0])) - 1;
    r.hi[0] = int(std::ceil((xhi - g.x0[0]) / g.dx[0])) + 2;
    if (g.d == 2) {
        r.lo[1] = int(std::floor((ylo - g.x0[1]) / g.dx[1])) - 1;
        r.hi[1] = int(std::ceil((yhi - g.x0[1]) / g.dx[1])) + 2;
    } else {
        r.lo[1] = 0;
        r.hi[1] = 1;
    }
    r.lo[2] = int(std::floor((tlo - g.t0) / g.dt)) - 1;
    r.hi[2] = int(std::ceil((thi - g.t0) / g.dt)) + 2;
    return r;
}

inline EllScanResult scan_ell(const FieldBlock& blk, const EosSpec& eos,
                              const TransportModel& tm, const EllScanConfig& cfg) {
    if (cfg.ells.empty()) throw ConfigError("ell scan needs at least one scale");
    const Grid& g = blk.grid;
    EllScanResult res;
    double ell_max = *std::max_element(cfg.ells.begin(), cfg.ells.end());
    FilterKernel Kmax = build_kernel(cfg.kernel, ell_max, g);
    res.bumps = cfg.bumps.empty()
                    ? default_bumps_for_region(
                          physical_valid_region(blk, Kmax, cfg.exclude_cells))
                    : cfg.bumps;
    Box request = fine_request_for_bumps(g, res.bumps);

    std::vector<std::vector<ScanRow>> per_ell(cfg.ells.size());
    parallel_for(cfg.ells.size(), cfg.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            FilterKernel K = build_kernel(cfg.kernel, cfg.ells[i], g);
            std::array<int, 3> stride = cfg.stride;
            for (int a = 0; a < 3; ++a)
                if (stride[a] <= 0) {
                    double step = a == 2 ? g.c_ref * g.dt : g.dx[a];
                    stride[a] = std::max(
                        1, int(std::floor(cfg.ells[i] / (cfg.points_per_ell * step))));
                }
            FilteredState fs = build_filtered_state(blk, eos, tm, K, request,
                                                    cfg.exclude_cells, stride);
            BudgetSet set = all_budgets(fs, eos);
            std::vector<TestFunction> tfs;
            for (const auto& spec : res.bumps)
                tfs.push_back(materialize_bump(fs.grid, spec));
            for (const auto& rep : set.reports)
                for (const auto& row : smear_report(fs.grid, rep, tfs))
                    per_ell[i].push_back(
                        {cfg.ells[i], row.equation, row.term, row.test_fn, row.value});
        }
    });
    for (auto& rows : per_ell)
        res.rows.insert(res.rows.end(), rows.begin(), rows.end());

    // extrapolate each (equation, term, test function) column toward ell -> 0
    std::map<std::array<std::string, 3>, std::vector<std::pair<double, double>>> cols;
    for (const auto& r : res.rows)
        cols[{r.equation, r.term, r.test_fn}].push_back({r.ell, r.value});
    for (auto& [key, series] : cols) {
        ColumnLimit cl;
        cl.equation = key[0];
        cl.term = key[1];
        cl.test_fn = key[2];
        cl.variable = cfg.limits_against_inverse_scale ? "inverse_ell" : "ell";
        std::vector<double> xs, ys;
        for (auto& [x, y] : series) {
            xs.push_back(cfg.limits_against_inverse_scale ? 1.0 / x : x);
            ys.push_back(y);
        }
        try {
            cl.limit = extrapolate_limit(xs, ys, cfg.flat_tol);
            cl.ok = true;
        } catch (const Error& err) {
            cl.ok = false;
            cl.error = err.what();
        }
        res.limits.push_back(std::move(cl));
    }
    return res;
}

inline const ColumnLimit* find_limit(const EllScanResult& res, const std::string& eq,
                                     const std::string& term, const std::string& tf) {
    for (const auto& l : res.limits)
        if (l.equation == eq && l.term == term && l.test_fn == tf) return &l;
    return nullptr;
}

inline double smeared_value(const EllScanResult& res, double ell, const std::string& eq,
                            const std::string& term, const std::string& tf) {
    for (const auto& r : res.rows)
        if (r.ell == ell && r.equation == eq && r.term == term && r.test_fn == tf)
            return r.value;
    throw Error("scan row not found: " + eq + "/" + term + "/" + tf);
}

// ---------------------------------------------------------------------------
// eps scan
// ---------------------------------------------------------------------------

struct EpsScanConfig {
    std::vector<double> eps_list;
    ShockSetup setup;
    double mu_long = 1.0;
    double kappa_over_mu = 0.0;  // 0: Becker-condition conductivity
    int nx = 0;                  // 0: per-eps automatic (cells_per_width across the jump)
    int nx_max = 4096;
    double cells_per_width = 12.0;
    double x_min = 0.0, x_max = 1.0;
    double settle_time = 0.0;    // run-in before the analysis window opens
    double t_end = 0.2;          // analysis window length
    int nt_snapshots = 33;
    double cfl = 0.4;
    int sponge_cells = 16;
    std::vector<BumpSpec> bumps;  // empty: defaults in the interior window
    int threads = 1;
};

struct EpsRow {
    double eps;
    std::string observable, test_fn;
    double value;
};

struct EpsScanResult {
    std::vector<EpsRow> rows;
    std::vector<double> l1_distance;       // per eps, to the RH step
    std::vector<double> width_cells;       // resolved-profile preflight record
    double l1_slope = 0.0;                 // log-log slope of l1 vs eps
    std::vector<ColumnLimit> limits;       // per (observable, test fn), vs eps
    std::map<std::string, double> max_cauchy_rel;  // per observable
    std::vector<BumpSpec> bumps;
    RankineHugoniot rh;
};

inline EpsScanResult scan_eps(const EosSpec& eos, const EpsScanConfig& cfg) {
    if (cfg.eps_list.size() < 2)
        throw InsufficientScan("eps scan needs at least two viscosity values");
    EpsScanResult res;
    res.rh = rh_jump(cfg.setup, eos);
    const int n_eps = int(cfg.eps_list.size());

    res.bumps = cfg.bumps;
    const double t_lo = cfg.settle_time, t_hi = cfg.settle_time + cfg.t_end;
    if (res.bumps.empty()) {
        double L = cfg.x_max - cfg.x_min;
        double xc = cfg.x_min + 0.5 * L;
        double tc = 0.5 * (t_lo + t_hi), th = 0.5 * (t_hi - t_lo);
        res.bumps = {{"phi0", {xc, 0.0, tc}, {0.3 * L, 1.0, 0.8 * th}},
                     {"phi1", {xc, 0.0, tc - 0.1 * th}, {0.25 * L, 1.0, 0.64 * th}},
                     {"phi2", {xc, 0.0, tc + 0.1 * th}, {0.25 * L, 1.0, 0.64 * th}}};
    }

    struct PerEps {
        std::vector<EpsRow> rows;
        double l1 = 0.0, width_cells = 0.0;
    };
    std::vector<PerEps> acc(n_eps);
    parallel_for(n_eps, cfg.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            double eps = cfg.eps_list[i];
            TransportModel tm;
            if (cfg.kappa_over_mu > 0) {
                tm.eps = eps;
                tm.eta.value = cfg.mu_long;
                tm.zeta.value = cfg.mu_long;
                tm.kappa.value = cfg.kappa_over_mu * cfg.mu_long;
            } else {
                tm = becker_transport(eos, cfg.mu_long, eps);
            }
            const double L = cfg.x_max - cfg.x_min;
            int nx = cfg.nx;
            if (nx <= 0) {
                // probe the profile width on a coarse grid, then resolve it
                BeckerProfile pw = becker_profile(cfg.setup, eos, tm, eps, 256, L / 256, 0.5);
                double want = cfg.cells_per_width * L / pw.width_10_90;
                nx = 256;
                while (nx < want && nx < cfg.nx_max) nx *= 2;
                nx = std::min(nx, cfg.nx_max);
            }
            const double dx = L / nx;
            BeckerProfile prof = becker_profile(cfg.setup, eos, tm, eps, nx, dx, 0.5);
            acc[i].width_cells = prof.width_10_90 / dx;
            if (acc[i].width_cells < 8.0)
                throw UnresolvedRun("eps = " + format_double(eps) + " resolved by only " +
                                    format_double(acc[i].width_cells) + " cells");
            NsConfig ns;
            ns.eos = eos;
            ns.transport = tm;
            ns.nx = nx;
            ns.x_min = cfg.x_min;
            ns.x_max = cfg.x_max;
            ns.bc = SolverBc::InflowOutflow;
            ns.sponge_cells = cfg.sponge_cells;
            ns.cfl = cfg.cfl;
            InitialData init{prof.rho, prof.v, prof.u};
            const InitialData pin = init;  // far states stay the RH values
            if (cfg.settle_time > 0) {
                FieldBlock settled =
                    integrate(ns, init, 0.0, cfg.settle_time, 2, nullptr, &pin);
                const int last = settled.grid.nt - 1;
                for (int ix = 0; ix < nx; ++ix) {
                    init.rho[ix] = settled.rho.at(ix, 0, last);
                    init.v[ix] = settled.v[0].at(ix, 0, last);
                    init.u[ix] = settled.u.at(ix, 0, last);
                }
            }
            FieldBlock blk =
                integrate(ns, init, t_lo, t_hi, cfg.nt_snapshots, nullptr, &pin);
            acc[i].l1 = l1_distance_to_step(blk, res.rh);
            DissipationFields dis = dissipation_fields(blk, eos, tm);
            Field p_theta = product(dis.pressure, dis.Theta);
            for (const auto& spec : res.bumps) {
                TestFunction tf = materialize_bump(blk.grid, spec);
                acc[i].rows.push_back({eps, "Q", spec.name, smear(blk.grid, dis.Q, tf)});
                acc[i].rows.push_back(
                    {eps, "Sigma", spec.name, smear(blk.grid, dis.Sigma, tf)});
                acc[i].rows.push_back(
                    {eps, "p_theta", spec.name, smear(blk.grid, p_theta, tf)});
            }
        }
    });
    for (int i = 0; i < n_eps; ++i) {
        res.rows.insert(res.rows.end(), acc[i].rows.begin(), acc[i].rows.end());
        res.l1_distance.push_back(acc[i].l1);
        res.width_cells.push_back(acc[i].width_cells);
    }

    // L1-to-step slope in log-log
    {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int i = 0; i < n_eps; ++i) {
            double lx = std::log(cfg.eps_list[i]), ly = std::log(res.l1_distance[i]);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        res.l1_slope = (n_eps * sxy - sx * sy) / (n_eps * sxx - sx * sx);
    }

    // limits and Cauchy diagnostics per observable/test function
    std::map<std::array<std::string, 2>, std::vector<std::pair<double, double>>> cols;
    for (const auto& r : res.rows) cols[{r.observable, r.test_fn}].push_back({r.eps, r.value});
    for (auto& [key, series] : cols) {
        std::sort(series.begin(), series.end(),
                  [](auto& a, auto& b) { return a.first > b.first; });
        double scale = std::abs(series.back().second) + 1e-300;
        double worst = 0;
        for (std::size_t i = 1; i < series.size(); ++i)
            worst = std::max(worst,
                             std::abs(series[i].second - series[i - 1].second) / scale);
        auto& m = res.max_cauchy_rel[key[0]];
        m = std::max(m, worst);
        ColumnLimit cl;
        cl.equation = "pointwise";
        cl.term = key[0];
        cl.test_fn = key[1];
        std::vector<double> xs, ys;
        for (auto& [x, y] : series) {
            xs.push_back(x);
            ys.push_back(y);
        }
        try {
            cl.limit = extrapolate_limit(xs, ys, 5e-3);
            cl.ok = true;
        } catch (const Error& err) {
            cl.ok = false;
            cl.error = err.what();
        }
        res.limits.push_back(std::move(cl));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Besov bundle
// ---------------------------------------------------------------------------

struct BesovScanConfig {
    std::vector<double> ells;
    std::vector<double> p_values{3.0, 4.0, 6.0};
    Box domain;             // subdomain O in grid indices
    double fit_lo = 0.0, fit_hi = 0.0;  // 0: default window
    double critical_tol = 0.05;
    std::array<int, 3> shift_stride{0, 0, 0};  // 0: automatic thinning
    bool compare_spacetime = true;
};

struct BesovFieldResult {
    std::string field_id;
    double p;
    StructureFunction sf_spacetime, sf_space;
    ExponentFit fit_spacetime, fit_space;
};

struct BesovScanResult {
    std::vector<BesovFieldResult> fields;              // 3 fields x |p_values|
    std::map<double, OnsagerConditions> conditions;    // per p (space-time fits)
    std::vector<SpaceTimeComparison> comparison_p3;    // space vs space-time check at p = 3
};

inline BesovScanResult besov_scan(const FieldBlock& blk, const BesovScanConfig& cfg) {
    const Grid& g = blk.grid;
    BesovScanResult res;
    double margin = metric_margin(g, blk.box(), cfg.domain);
    auto [w_lo, w_hi] = default_fit_window(g, margin);
    double fit_lo = cfg.fit_lo > 0 ? cfg.fit_lo : w_lo;
    double fit_hi = cfg.fit_hi > 0 ? cfg.fit_hi : w_hi;

    const Field* fields[3] = {&blk.u, &blk.rho, &blk.v[0]};
    const char* names[3] = {"u", "rho", "v"};
    for (double p : cfg.p_values) {
        std::array<double, 3> sig{};
        for (int k = 0; k < 3; ++k) {
            BesovFieldResult fr;
            fr.field_id = names[k];
            fr.p = p;
            fr.sf_spacetime =
                structure_function(g, *fields[k], cfg.domain, p, cfg.ells,
                                   StructureMode::SpaceTime, names[k], cfg.shift_stride);
            fr.sf_space =
                structure_function(g, *fields[k], cfg.domain, p, cfg.ells,
                                   StructureMode::SpaceOnly, names[k], cfg.shift_stride);
            fr.fit_spacetime = fit_exponent(fr.sf_spacetime, fit_lo, fit_hi);
            fr.fit_space = fit_exponent(fr.sf_space, fit_lo, fit_hi);
            sig[k] = std::clamp(fr.fit_spacetime.sigma, 0.0, 1.0);
            res.fields.push_back(std::move(fr));
        }
        res.conditions.emplace(p, onsager_conditions(sig[0], sig[1], sig[2],
                                                     cfg.critical_tol));
    }
    bool has_p3 = false;
    for (double p : cfg.p_values) has_p3 = has_p3 || p == 3.0;
    if (has_p3 && cfg.compare_spacetime)
        res.comparison_p3 = spacetime_vs_space(g, blk, cfg.domain, 3.0, cfg.ells, fit_lo,
                                               fit_hi, cfg.shift_stride);
    return res;
}

}  // namespace onsager
