#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "onsager/fields.hpp"

#include <cmath>

using namespace onsager;

namespace {

Grid grid_1d(int nx, double dx, int nt, double dt, bool periodic) {
    Grid g;
    g.d = 1;
    g.nx = {nx, 1};
    g.dx = {dx, 1.0};
    g.nt = nt;
    g.dt = dt;
    g.periodic = {periodic, false};
    g.c_ref = 1.0;
    g.validate();
    return g;
}

Field fill(const Grid& g, const std::function<double(double, double)>& f) {
    Field r(Box::full(g));
    for_each_cell(r.box, [&](int ix, int iy, int it) {
        r.at(ix, iy, it) = f(g.x(ix), g.t(it));
    });
    return r;
}

}  // namespace

TEST_CASE("increment of a constant field vanishes") {
    Grid g = grid_1d(16, 0.1, 4, 0.1, true);
    Field f = fill(g, [](double, double) { return 3.25; });
    auto inc = increment(g, f, {2, 0, 1}, {Box::full(g)});
    for (double v : inc.payload.a) CHECK(v == 0.0);
}

TEST_CASE("increment of a linear field on a periodic axis") {
    Grid g = grid_1d(16, 0.5, 2, 1.0, true);
    Field f = fill(g, [](double x, double) { return x; });
    auto inc = increment(g, f, {1, 0, 0}, {Box::full(g)});
    const double L = 16 * 0.5;
    for_each_cell(inc.payload.box, [&](int ix, int iy, int it) {
        double expect = (ix == 15) ? 0.5 - L : 0.5;
        CHECK(inc.payload.at(ix, iy, it) == doctest::Approx(expect).epsilon(1e-14));
    });
}

TEST_CASE("increment of a unit step is the indicator of the swept band") {
    // 64-cell non-periodic grid, step at cell 32, shift r = 5 cells
    Grid g = grid_1d(64, 1.0, 2, 1.0, false);
    const int jump = 32, r = 5;
    Field f = fill(g, [&](double x, double) { return x >= jump ? 1.0 : 0.0; });
    Box O{{8, 0, 0}, {56, 1, 2}};
    auto inc = increment(g, f, {r, 0, 0}, {O});
    for_each_cell(inc.payload.box, [&](int ix, int iy, int it) {
        double expect = (ix >= jump - r && ix < jump) ? 1.0 : 0.0;
        CHECK(inc.payload.at(ix, iy, it) == expect);
    });
}

TEST_CASE("increment shift past a non-periodic margin throws") {
    Grid g = grid_1d(16, 1.0, 4, 1.0, false);
    Field f = fill(g, [](double x, double) { return x; });
    Box O{{1, 0, 0}, {15, 1, 4}};
    CHECK_THROWS_AS((void)increment(g, f, {0, 0, 4}, {O}), ShiftExceedsMargin);
}

TEST_CASE("increments compose additively under shift composition") {
    Grid g = grid_1d(32, 0.25, 4, 0.5, true);
    Field f = fill(g, [&](double x, double t) {
        return std::sin(x) + 0.3 * t + 0.1 * std::cos(3 * x * t);
    });
    Box O{{0, 0, 0}, {32, 1, 2}};
    Shift r1{3, 0, 1}, r2{5, 0, 1}, r12{r1.rx + r2.rx, 0, r1.rt + r2.rt};
    auto total = increment(g, f, r12, {O});
    auto second = increment(g, f, r2, {O});
    for_each_cell(total.payload.box, [&](int ix, int iy, int it) {
        // delta f(R1+R2; X) = delta f(R1; X+R2) + delta f(R2; X)
        double d1_shifted = sample_shifted(g, f, ix, iy, it, r12) -
                            sample_shifted(g, f, ix, iy, it, r2);
        double rhs = d1_shifted + second.payload.at(ix, iy, it);
        CHECK(total.payload.at(ix, iy, it) == doctest::Approx(rhs).epsilon(1e-12));
    });
}

TEST_CASE("lp_norm of a constant is c * measure^(1/p)") {
    Grid g = grid_1d(3, 0.5, 2, 1.0, false);  // measure = 3*0.5 * 2*1 = 3
    Field f = fill(g, [](double, double) { return 2.0; });
    CHECK(lp_norm(g, f, Box::full(g), 2.0) ==
          doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(1e-14));
}

TEST_CASE("lp_norm of an indicator is measure(support)^(1/p)") {
    // step occupying half of a measure-2 domain: ||f||_3 = (1*1)^(1/3) = 1
    Grid g = grid_1d(8, 0.25, 4, 0.25, false);  // measure = 2*1 = 2
    Field f = fill(g, [&](double x, double) { return x >= 8 * 0.25 / 2 ? 1.0 : 0.0; });
    CHECK(lp_norm(g, f, Box::full(g), 3.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("lp_norm with p = infinity returns the max") {
    Grid g = grid_1d(8, 1.0, 2, 1.0, false);
    Field f = fill(g, [](double, double) { return 0.5; });
    f.at(5, 0, 1) = 7.0;
    CHECK(lp_norm(g, f, Box::full(g), INFINITY) == 7.0);
}

TEST_CASE("lp_norm is monotone in p after measure normalization") {
    Grid g = grid_1d(32, 0.125, 4, 0.25, false);
    Rng rng(13);
    Field f(Box::full(g));
    for (double& v : f.a) v = rng.uniform(-2.0, 2.0);
    Box O = Box::full(g);
    double meas = box_measure(g, O);
    double prev = 0.0;
    for (double p : {1.0, 2.0, 3.0, 6.0}) {
        double np = lp_norm(g, f, O, p) / std::pow(meas, 1.0 / p);
        CHECK(np >= prev - 1e-12);
        prev = np;
    }
}

TEST_CASE("shrinking the domain never increases the p-th power integral") {
    Grid g = grid_1d(24, 0.25, 6, 0.25, false);
    Rng rng(17);
    Field f(Box::full(g));
    for (double& v : f.a) v = rng.uniform(-1.0, 1.0);
    Box big = Box::full(g);
    Box small{{4, 0, 1}, {20, 1, 5}};
    for (double p : {1.0, 2.0, 4.0}) {
        CHECK(std::pow(lp_norm(g, f, small, p), p) <=
              std::pow(lp_norm(g, f, big, p), p) + 1e-13);
    }
}

TEST_CASE("essential range hull") {
    Grid g = grid_1d(16, 1.0, 2, 1.0, false);
    FieldBlock blk(g);
    SUBCASE("constant state gives a degenerate box") {
        for (double& v : blk.rho.a) v = 2.0;
        for (double& v : blk.u.a) v = 3.0;
        auto h = essential_range_hull(blk);
        CHECK(h.u_min == 3.0);
        CHECK(h.u_max == 3.0);
        CHECK(h.rho_min == 2.0);
        CHECK(h.rho_max == 2.0);
    }
    SUBCASE("two-state shock data spans the box of the two states") {
        for_each_cell(blk.box(), [&](int ix, int iy, int it) {
            bool up = ix < 8;
            blk.rho.at(ix, iy, it) = up ? 1.0 : 8.0 / 3.0;
            blk.u.at(ix, iy, it) = up ? 2.5 : 11.25;
        });
        auto h = essential_range_hull(blk);
        CHECK(h.u_min == 2.5);
        CHECK(h.u_max == 11.25);
        CHECK(h.rho_min == 1.0);
        CHECK(h.rho_max == doctest::Approx(8.0 / 3.0));
    }
    SUBCASE("hull contains every sampled value") {
        Rng rng(23);
        for (double& v : blk.rho.a) v = rng.uniform(0.5, 2.0);
        for (double& v : blk.u.a) v = rng.uniform(1.0, 4.0);
        auto h = essential_range_hull(blk);
        for (std::size_t i = 0; i < blk.u.a.size(); ++i) {
            CHECK(h.contains(blk.u.a[i], blk.rho.a[i]));
        }
    }
}

TEST_CASE("subdomain margin accounts for non-periodic axes only") {
    Grid g = grid_1d(32, 0.5, 8, 0.25, false);
    Box data = Box::full(g);
    Subdomain O{{{4, 0, 2}, {28, 1, 6}}};
    // x margin = 4*0.5 = 2, t margin = 2*0.25*c_ref = 0.5
    CHECK(O.margin(g, data) == doctest::Approx(0.5));
    g.periodic[0] = true;
    CHECK(Subdomain{O.box}.margin(g, data) == doctest::Approx(0.5));
}
