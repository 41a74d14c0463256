#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "onsager/budgets.hpp"
#include "onsager/solver.hpp"
#include "synthetic.hpp"

#include <cmath>
#include <set>

using namespace onsager;

namespace {

Grid grid_1d(int nx, double dx, int nt, double dt, bool periodic, double c_ref = 1.0) {
    Grid g;
    g.d = 1;
    g.nx = {nx, 1};
    g.dx = {dx, 1.0};
    g.nt = nt;
    g.dt = dt;
    g.periodic = {periodic, false};
    g.c_ref = c_ref;
    g.validate();
    return g;
}

Grid grid_2d(int n, int nt) {
    Grid g;
    g.d = 2;
    g.nx = {n, n};
    g.dx = {1.0 / n, 1.0 / n};
    g.nt = nt;
    g.dt = 1.0 / nt;
    g.periodic = {true, true};
    g.c_ref = 1.0;
    g.validate();
    return g;
}

EosSpec ideal_gamma_1_4() {
    EosSpec e;
    e.alpha = 2.5;
    return e;
}

FieldBlock constant_block(const Grid& g, double rho, double u, double vx, double eps = 0.0) {
    FieldBlock b(g);
    b.eps = eps;
    for (double& x : b.rho.a) x = rho;
    for (double& x : b.u.a) x = u;
    for (double& x : b.v[0].a) x = vx;
    if (g.d == 2)
        for (double& x : b.v[1].a) x = 0.3 * vx;
    return b;
}

FieldBlock random_block(const Grid& g, std::uint64_t seed, double eps = 0.0) {
    Rng rng(seed);
    FieldBlock b(g);
    b.eps = eps;
    for (double& x : b.rho.a) x = rng.uniform(0.6, 1.8);
    for (double& x : b.u.a) x = rng.uniform(1.5, 3.0);
    for (double& x : b.v[0].a) x = rng.uniform(-0.5, 0.5);
    if (g.d == 2)
        for (double& x : b.v[1].a) x = rng.uniform(-0.5, 0.5);
    return b;
}

// exact weak Euler solution: entropy wave advected at constant speed with
// uniform pressure and velocity
FieldBlock entropy_wave_block(const Grid& g, double v0, double p0, const EosSpec& eos) {
    FieldBlock b(g);
    b.eps = 0.0;
    for_each_cell(b.box(), [&](int ix, int iy, int it) {
        double xi = g.x(ix) - v0 * g.t(it);
        double rho = 1.0 + 0.3 * std::sin(2.0 * M_PI * xi);
        b.rho.at(ix, iy, it) = rho;
        b.u.at(ix, iy, it) = eos.alpha * p0;
        b.v[0].at(ix, iy, it) = v0;
    });
    return b;
}

double max_abs(const Field& f) {
    double m = 0;
    for (double v : f.a) m = std::max(m, std::abs(v));
    return m;
}

double l2_box(const Grid& g, const Field& f) { return lp_norm(g, f, f.box, 2.0); }

TransportModel constant_transport(double eps, double eta = 1.0, double zeta = 1.0,
                                  double kappa = 1.0) {
    TransportModel tm;
    tm.eps = eps;
    tm.eta.value = eta;
    tm.zeta.value = zeta;
    tm.kappa.value = kappa;
    return tm;
}

}  // namespace

TEST_CASE("constant state: every balance term and residual vanishes") {
    Grid g = grid_1d(48, 1.0 / 48, 24, 1.0 / 24, true);
    EosSpec eos = ideal_gamma_1_4();
    const std::set<std::string> state_values = {"resolved_ke", "u_bar", "u_star",
                                                "s_under", "s_star"};
    for (double eps : {0.0, 0.01}) {
        FieldBlock b = constant_block(g, 1.2, 2.0, 0.7, eps);
        BudgetSet set = all_budgets(b, eos, constant_transport(eps), build_kernel({}, 0.2, g));
        for (const auto& rep : set.reports)
            for (const auto& [name, field] : rep.terms) {
                if (state_values.count(name)) continue;
                INFO(rep.equation << " / " << name << " eps=" << eps);
                CHECK(max_abs(field) <= 1e-10);
            }
    }
}

TEST_CASE("exact algebraic identities hold to rounding on random blocks") {
    auto run = [&](const Grid& g, std::uint64_t seed, double eps, double ell) {
        EosSpec eos = ideal_gamma_1_4();
        FieldBlock b = random_block(g, seed, eps);
        FilterKernel K = build_kernel({}, ell, g);
        BudgetSet set = all_budgets(b, eos, constant_transport(eps), K);

        const auto& sub = set.by_equation("unresolved_kinetic_energy");
        const auto& ie = set.by_equation("intrinsic_internal_energy");
        const auto& se = set.by_equation("intrinsic_entropy");

        // scale references
        double ke_scale = max_abs(*set.by_equation("resolved_kinetic_energy").find("resolved_ke")) + 1.0;
        double e_scale = max_abs(*ie.find("u_star")) + 1.0;
        double s_scale = max_abs(*se.find("s_star")) + 1.0;

        CHECK(max_abs(*sub.find("identity_ke_decomposition")) <= 1e-10 * ke_scale);
        CHECK(max_abs(*ie.find("identity_total_energy")) <= 1e-10 * e_scale);
        CHECK(max_abs(*se.find("identity_s_star_dual")) <= 1e-10 * s_scale);

        // the KE + intrinsic-IE residuals telescope to the total-energy residual
        const Field& r_ke = *set.by_equation("resolved_kinetic_energy").find("residual");
        const Field& r_ie = *ie.find("residual");
        const Field& r_te = *set.by_equation("filtered_total_energy").find("residual");
        double m = 0, scale = 0;
        for (std::size_t i = 0; i < r_ke.a.size(); ++i) {
            m = std::max(m, std::abs(r_ke.a[i] + r_ie.a[i] - r_te.a[i]));
            scale = std::max({scale, std::abs(r_ke.a[i]), std::abs(r_ie.a[i]), 1.0});
        }
        CHECK(m <= 1e-10 * scale);

        // inertial production decomposition: Sigma_inert_star = -I_flux + Sigma_flux_star
        if (!(eps > 0)) {
            const Field& si = *se.find("Sigma_inert_star");
            const Field& fi = *se.find("I_flux");
            const Field& sf = *se.find("Sigma_flux_star");
            for (std::size_t i = 0; i < si.a.size(); ++i)
                CHECK(std::abs(si.a[i] - (sf.a[i] - fi.a[i])) <=
                      1e-10 * (std::abs(si.a[i]) + 1.0));
        }
    };
    SUBCASE("1d inviscid") { run(grid_1d(32, 1.0 / 32, 16, 1.0 / 16, true), 2025, 0.0, 0.25); }
    SUBCASE("1d viscous") { run(grid_1d(32, 1.0 / 32, 16, 1.0 / 16, true), 77, 0.02, 0.25); }
    SUBCASE("2d inviscid") { run(grid_2d(24, 12), 311, 0.0, 0.3); }
    SUBCASE("2d viscous") { run(grid_2d(24, 12), 312, 0.015, 0.3); }
}

TEST_CASE("dissipation fields") {
    EosSpec eos = ideal_gamma_1_4();
    SUBCASE("uniform flow dissipates nothing") {
        Grid g = grid_1d(32, 1.0 / 32, 8, 1.0 / 8, true);
        FieldBlock b = constant_block(g, 1.0, 2.5, 0.4, 0.05);
        auto dis = dissipation_fields(b, eos, constant_transport(0.05));
        CHECK(max_abs(dis.Q) <= 1e-13);
        CHECK(max_abs(dis.Sigma) <= 1e-13);
    }
    SUBCASE("pure dilation in 1d: deviatoric part vanishes, zeta carries Q") {
        Grid g = grid_1d(64, 1.0 / 64, 8, 1.0 / 8, false);
        FieldBlock b(g);
        b.eps = 0.1;
        const double c = 0.8;
        for_each_cell(b.box(), [&](int ix, int iy, int it) {
            b.rho.at(ix, iy, it) = 1.0;
            b.u.at(ix, iy, it) = 2.5;  // T = u/(alpha rho) constant
            b.v[0].at(ix, iy, it) = c * g.x(ix);
        });
        auto tm = constant_transport(0.1, 3.0, 2.0, 1.0);
        auto dis = dissipation_fields(b, eos, tm);
        for (double v : dis.Q_eta.a) CHECK(std::abs(v) <= 1e-12);
        for (double v : dis.Q_zeta.a)
            CHECK(v == doctest::Approx(0.1 * 2.0 * c * c).epsilon(1e-10));
        for (double v : dis.Sigma_kappa.a) CHECK(std::abs(v) <= 1e-12);  // isothermal
    }
    SUBCASE("nonnegativity and the Sigma >= Q/max(T) bound on random data") {
        Grid g = grid_1d(48, 1.0 / 48, 8, 1.0 / 8, true);
        FieldBlock b = random_block(g, 99, 0.03);
        auto dis = dissipation_fields(b, eos, constant_transport(0.03));
        double maxT = max_abs(dis.temperature);
        for (std::size_t i = 0; i < dis.Q.a.size(); ++i) {
            CHECK(dis.Q.a[i] >= 0.0);
            CHECK(dis.Sigma.a[i] >= 0.0);
            CHECK(dis.Sigma.a[i] + 1e-15 >= dis.Q.a[i] / maxT);
        }
    }
    SUBCASE("inviscid data is rejected") {
        Grid g = grid_1d(32, 1.0 / 32, 8, 1.0 / 8, true);
        FieldBlock b = constant_block(g, 1.0, 2.0, 0.0, 0.0);
        CHECK_THROWS_AS((void)dissipation_fields(b, eos, constant_transport(0.0)),
                        RequiresViscousData);
    }
}

TEST_CASE("smearing against test functions") {
    Grid g = grid_1d(128, 1.0 / 128, 64, 1.0 / 64, false);
    Box region{{10, 0, 6}, {118, 1, 58}};
    TestFunction phi = make_bump(g, region, "phi", {0.5, 0.5, 0.5}, {0.4, 0.4, 0.4});
    SUBCASE("unit-integral bump on a constant field returns the constant") {
        Field f(Box::full(g), 3.7);
        CHECK(smear(g, f, phi) / phi.integral == doctest::Approx(3.7).epsilon(1e-13));
    }
    SUBCASE("antisymmetric field against the symmetric bump cancels") {
        double xc = g.x(region.lo[0]) + 0.5 * (region.extent(0)) * g.dx[0];
        Field f(Box::full(g));
        for_each_cell(f.box, [&](int ix, int iy, int it) {
            f.at(ix, iy, it) = g.x(ix) - xc;
        });
        CHECK(std::abs(smear(g, f, phi)) <= 1e-12);
    }
    SUBCASE("support outside the field box is rejected") {
        Field small(Box{{32, 0, 16}, {96, 1, 48}});
        CHECK_THROWS_AS((void)smear(g, small, phi), SupportExceedsValidRegion);
    }
    SUBCASE("quadrature self-convergence under grid refinement") {
        auto quad = [](int n) {
            Grid gg = grid_1d(n, 1.0 / n, n, 1.0 / n, false);
            Box region{{n / 8, 0, n / 8}, {7 * n / 8, 1, 7 * n / 8}};
            TestFunction p = make_bump(gg, region, "p", {0.5, 0.5, 0.5}, {0.45, 0.45, 0.45});
            Field f(Box::full(gg));
            for_each_cell(f.box, [&](int ix, int iy, int it) {
                f.at(ix, iy, it) = std::sin(3.0 * gg.x(ix)) * std::cos(2.0 * gg.t(it));
            });
            return smear(gg, f, p);
        };
        double i1 = quad(128), i2 = quad(256);
        CHECK(std::abs(i1 - i2) <= 1e-8 * std::max(1.0, std::abs(i2)));
    }
}

TEST_CASE("budget residuals converge at second order on an exact entropy wave") {
    EosSpec eos = ideal_gamma_1_4();
    auto residual_norms = [&](int n) {
        Grid g = grid_1d(n, 1.0 / n, n / 2, 2.0 / n, true);
        FieldBlock b = entropy_wave_block(g, 0.4, 1.0, eos);
        FilterKernel K = build_kernel({}, 0.22, g);
        BudgetSet set = all_budgets(b, eos, constant_transport(0.0), K);
        std::map<std::string, double> norms;
        for (const auto& rep : set.reports)
            if (rep.find("residual")) norms[rep.equation] = l2_box(g, *rep.find("residual"));
        return norms;
    };
    auto n1 = residual_norms(64), n2 = residual_norms(128);
    for (const auto& [eq, r1] : n1) {
        double r2 = n2.at(eq);
        INFO(eq << " r1=" << r1 << " r2=" << r2);
        if (r1 < 1e-12) {
            CHECK(r2 < 1e-12);  // identically satisfied (e.g. mass with exact data)
        } else {
            CHECK(r1 / r2 >= 3.0);  // ~ second order
        }
    }
}

TEST_CASE("corrupted data produces order-one conservation residuals") {
    EosSpec eos = ideal_gamma_1_4();
    Grid g = grid_1d(64, 1.0 / 64, 32, 2.0 / 64, true);
    FieldBlock b = entropy_wave_block(g, 0.4, 1.0, eos);
    for (double& v : b.v[0].a) v = 0.0;  // zero the momentum, keep the moving density
    FilterKernel K = build_kernel({}, 0.22, g);
    auto reps = cg_solution_residuals(b, eos, constant_transport(0.0), K);
    double m = 0;
    for (const auto& rep : reps)
        if (rep.equation == "filtered_mass") m = max_abs(*rep.find("residual"));
    CHECK(m > 0.1);
}

TEST_CASE("pressure dilatation on an exact stationary shock step") {
    // frozen Rankine-Hugoniot state for gamma = 1.4, M = 2
    const double rho_m = 1.0, p_m = 1.0, v_m = 2.366431913239846417;
    const double rho_p = 8.0 / 3.0, p_p = 4.5, v_p = 0.88741196746494240639;
    EosSpec eos = ideal_gamma_1_4();

    Grid g = grid_1d(512, 1.0 / 512, 64, 1.0 / (64 * 1.18321595661992), false,
                     1.18321595661992);  // c_ref = upstream sound speed
    FieldBlock b(g);
    b.eps = 0.0;
    const double xs = g.x(256);
    for_each_cell(b.box(), [&](int ix, int iy, int it) {
        bool up = g.x(ix) < xs;
        b.rho.at(ix, iy, it) = up ? rho_m : rho_p;
        b.u.at(ix, iy, it) = eos.alpha * (up ? p_m : p_p);
        b.v[0].at(ix, iy, it) = up ? v_m : v_p;
    });

    auto smear_ptb = [&](MollifierProfile prof) {
        MollifierSpec spec;
        spec.profile = prof;
        FilterKernel K = build_kernel(spec, 0.08, g);
        FilteredState fs = build_filtered_state(b, eos, constant_transport(0.0), K);
        auto pd = pressure_dilatation(fs);
        Box region = fs.out;
        TestFunction phi = make_bump(g, region, "phi", {0.5, 0.5, 0.5}, {0.45, 0.45, 0.45});
        // oracle: p o Theta concentrates at the shock with weight (p-+p+)/2 * dv
        double column = 0;
        for (int it = phi.support.lo[2]; it < phi.support.hi[2]; ++it)
            column += phi.values.at(256, 0, it) * g.dt;
        double oracle = 0.5 * (p_m + p_p) * (v_p - v_m) * column;
        return std::pair{smear(g, pd.resolved, phi), oracle};
    };
    auto [sm_smooth, oracle] = smear_ptb(MollifierProfile::SmoothBump);
    auto [sm_poly, oracle2] = smear_ptb(MollifierProfile::PolynomialBump);
    CHECK(sm_smooth == doctest::Approx(oracle).epsilon(0.02));
    CHECK(sm_poly == doctest::Approx(oracle2).epsilon(0.02));
    // mollifier independence of the limit: the two profiles agree closely
    CHECK(sm_smooth == doctest::Approx(sm_poly).epsilon(0.01));
}

TEST_CASE("subscale residual request on inviscid data is rejected") {
    Grid g = grid_1d(32, 1.0 / 32, 16, 1.0 / 16, true);
    EosSpec eos = ideal_gamma_1_4();
    FieldBlock b = random_block(g, 5, 0.0);
    FilterKernel K = build_kernel({}, 0.25, g);
    CHECK_THROWS_AS((void)subscale_ke_budget(b, eos, constant_transport(0.0), K, true),
                    RequiresViscousData);
}

TEST_CASE("strided evaluation agrees with the full lattice at common points") {
    Grid g = grid_1d(96, 1.0 / 96, 48, 1.0 / 48, false);
    EosSpec eos = ideal_gamma_1_4();
    FieldBlock b = random_block(g, 1234, 0.0);
    // smooth the random data a little so gradients are sane
    FieldBlock bs = b;
    for_each_cell(Box{{1, 0, 1}, {95, 1, 47}}, [&](int ix, int iy, int it) {
        auto avg = [&](const Field& f) {
            return 0.25 * (2 * f.at(ix, iy, it) + f.at(ix - 1, iy, it) +
                           f.at(ix + 1, iy, it));
        };
        bs.rho.at(ix, iy, it) = avg(b.rho);
        bs.u.at(ix, iy, it) = avg(b.u);
        bs.v[0].at(ix, iy, it) = avg(b.v[0]);
    });
    FilterKernel K = build_kernel({}, 0.2, g);
    TransportModel tm = constant_transport(0.0);

    FilteredState full = build_filtered_state(bs, eos, tm, K);
    FilteredState thin =
        build_filtered_state(bs, eos, tm, K, std::nullopt, 0, {3, 1, 2});
    BudgetSet set_full = all_budgets(full, eos);
    BudgetSet set_thin = all_budgets(thin, eos);

    const Field& si_full = *set_full.by_equation("intrinsic_entropy").find("Sigma_inert_star");
    const Field& si_thin = *set_thin.by_equation("intrinsic_entropy").find("Sigma_inert_star");
    const auto& lay = thin.layout;
    for_each_cell(si_thin.box, [&](int ix, int iy, int it) {
        double vt = si_thin.at(ix, iy, it);
        double vf = si_full.at(lay.fine_index(0, ix), lay.fine_index(1, iy),
                               lay.fine_index(2, it));
        CHECK(vt == doctest::Approx(vf).epsilon(1e-12));
    });
}

TEST_CASE("ideal-gas pressure is linear in u, so I_flux vanishes identically") {
    Grid g = grid_1d(40, 1.0 / 40, 20, 1.0 / 20, true);
    EosSpec eos = ideal_gamma_1_4();
    FieldBlock b = random_block(g, 314, 0.0);
    FilterKernel K = build_kernel({}, 0.25, g);
    BudgetSet set = all_budgets(b, eos, constant_transport(0.0), K);
    const Field& iflux = *set.by_equation("intrinsic_entropy").find("I_flux");
    for (double v : iflux.a) CHECK(std::abs(v) <= 1e-12);
}

TEST_CASE("causal kernels also satisfy the filtered balances on exact data") {
    EosSpec eos = ideal_gamma_1_4();
    MollifierSpec causal;
    causal.causal_in_time = true;
    auto residual_norm = [&](int n) {
        Grid g = grid_1d(n, 1.0 / n, n, 2.0 / n, true);
        FieldBlock b = entropy_wave_block(g, 0.4, 1.0, eos);
        FilterKernel K = build_kernel(causal, 0.22, g);
        BudgetSet set = all_budgets(b, eos, constant_transport(0.0), K);
        double worst = 0;
        for (const char* eq : {"filtered_mass", "filtered_momentum_x",
                               "filtered_total_energy", "intrinsic_entropy"}) {
            const Field& r = *set.by_equation(eq).find("residual");
            worst = std::max(worst, l2_box(g, r));
        }
        return worst;
    };
    double r1 = residual_norm(96), r2 = residual_norm(192);
    INFO("r1=" << r1 << " r2=" << r2);
    CHECK(r2 < r1);
    CHECK(r1 / r2 >= 2.5);  // near second order with the one-sided stencil
}

TEST_CASE("viscous budget residuals converge on a smooth solver run") {
    EosSpec eos = ideal_gamma_1_4();
    auto worst_residual = [&](int nx) {
        NsConfig cfg;
        cfg.eos = eos;
        cfg.transport = becker_transport(eos, 0.5, 0.02);
        cfg.nx = nx;
        cfg.bc = SolverBc::Periodic;
        SmoothWave w = smooth_wave_ic(eos, 0.04, 1.0, 1.0, 1.0, nx, 0.0, 1.0, 0.5);
        FieldBlock b = integrate(cfg, w.init, 0.0, 0.5, nx / 4);
        FilterKernel K = build_kernel({}, 0.3, b.grid);
        BudgetSet set = all_budgets(b, eos, cfg.transport, K);
        double worst = 0;
        for (const char* eq :
             {"resolved_kinetic_energy", "unresolved_kinetic_energy",
              "resolved_internal_energy", "intrinsic_internal_energy",
              "resolved_entropy", "intrinsic_entropy"}) {
            const Field& r = *set.by_equation(eq).find("residual");
            worst = std::max(worst, l2_box(b.grid, r));
        }
        return worst;
    };
    double r1 = worst_residual(96), r2 = worst_residual(192);
    INFO("r1=" << r1 << " r2=" << r2);
    CHECK(r1 / r2 >= 2.0);  // at least first order on solver data, second expected
}

TEST_CASE("flux terms scale with the planted regularity of synthetic fields") {
    EosSpec eos = ideal_gamma_1_4();
    const int nx = 1024;
    // steady profiles: the time axis only needs to resolve the kernels
    Grid g = grid_1d(nx, 1.0 / nx, 40, 4.0 / 1024, true);
    auto frac = [&](double H, std::uint64_t seed) {
        auto prof = onsager::testing::midpoint_displacement(10, H, seed);
        Field f(Box::full(g));
        for_each_cell(f.box, [&](int ix, int iy, int it) {
            f.at(ix, iy, it) = prof[std::size_t(ix) % prof.size()];
        });
        return f;
    };
    for (double sigma : {0.4, 0.6}) {
        FieldBlock b(g);
        b.eps = 0.0;
        Field fu = frac(sigma, 11), fr = frac(sigma, 23), fv = frac(sigma, 37);
        for (std::size_t i = 0; i < b.rho.a.size(); ++i) {
            b.u.a[i] = 2.5 + 0.8 * fu.a[i];
            b.rho.a[i] = 1.2 + 0.4 * fr.a[i];
            b.v[0].a[i] = 0.5 * fv.a[i];
        }
        std::vector<double> ells, q_norm, s_norm;
        for (int k = 0; k < 7; ++k)
            ells.push_back(8.0 / nx * std::pow(8.0, k / 6.0));
        for (double ell : ells) {
            FilterKernel K = build_kernel({}, ell, g);
            Box out = filtered_box(g, K, b.box());
            Box O{{0, 0, 18}, {nx, 1, 22}};
            O = O.intersect(out);
            BudgetSet set = all_budgets(
                build_filtered_state(b, eos, constant_transport(0.0), K, O), eos);
            q_norm.push_back(lp_norm(
                g, *set.by_equation("resolved_kinetic_energy").find("Q_flux"), O, 1.0));
            s_norm.push_back(lp_norm(
                g, *set.by_equation("intrinsic_entropy").find("Sigma_inert_star"), O, 1.0));
        }
        auto slope = [&](const std::vector<double>& v) {
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            int n = int(v.size());
            for (int i = 0; i < n; ++i) {
                double lx = std::log(ells[i]), ly = std::log(v[i]);
                sx += lx;
                sy += ly;
                sxx += lx * lx;
                sxy += lx * ly;
            }
            return (n * sxy - sx * sy) / (n * sxx - sx * sx);
        };
        INFO("sigma=" << sigma << " q_slope=" << slope(q_norm)
                      << " s_slope=" << slope(s_norm));
        CHECK(std::abs(slope(q_norm) - (3 * sigma - 1)) <= 0.15);
        CHECK(std::abs(slope(s_norm) - (3 * sigma - 1)) <= 0.15);
    }
}
