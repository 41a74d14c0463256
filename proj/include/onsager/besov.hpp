#pragma once
// Structure functions over the space-time shift lattice, Besov-exponent
// fits, the Onsager exponent conditions, the space-only versus space-time
// regularity comparison, and power-law limit extrapolation for scale scans.

#include "onsager/fields.hpp"

#include <optional>

namespace onsager {

enum class StructureMode { SpaceTime, SpaceOnly };

struct StructureFunction {
    std::string field_id;
    double p = 3.0;
    Box domain;
    StructureMode mode = StructureMode::SpaceTime;
    std::vector<double> ells;
    std::vector<double> values;          // S_p(ell), same length as ells
    std::array<int, 3> lattice_ball{0, 0, 0};  // lattice radius of the largest ball
    std::array<int, 3> shift_stride{1, 1, 1};  // lattice thinning actually used
};

namespace detail_besov {

// |d|^p for the common exponents without libm pow
inline double abs_pow(double d, double p) {
    double a = std::abs(d);
    if (p == 1.0) return a;
    if (p == 2.0) return a * a;
    if (p == 3.0) return a * a * a;
    if (p == 4.0) {
        double s = a * a;
        return s * s;
    }
    if (p == 6.0) {
        double s = a * a;
        return s * s * s;
    }
    return std::pow(a, p);
}

}  // namespace detail_besov

struct ExponentFit {
    double sigma = 0.0;
    double stderr_sigma = 0.0;
    double r_squared = 0.0;
    double ell_lo = 0.0, ell_hi = 0.0;
    int n_points = 0;
    bool clamped_hint = false;  // outside [0,1]; reported, never silently clamped
};

// S_p(ell) = max over lattice shifts 0 < |R| < ell of ||f(.+R) - f||_{L^p(O)}.
// SpaceOnly takes purely spatial shifts, the slice norm per time level, and
// the max over levels. The shift lattice may be thinned by `shift_stride`
// (0 entries pick an automatic thinning of about 24 shifts per radius);
// the thinning used is recorded on the result.
inline StructureFunction structure_function(const Grid& g, const Field& f, const Box& O,
                                            double p, const std::vector<double>& ells,
                                            StructureMode mode = StructureMode::SpaceTime,
                                            const std::string& field_id = "f",
                                            std::array<int, 3> shift_stride = {1, 1, 1}) {
    if (ells.empty()) throw InsufficientScalingRange("no scales requested");
    StructureFunction sf;
    sf.field_id = field_id;
    sf.p = p;
    sf.domain = O;
    sf.mode = mode;
    sf.ells = ells;
    double ell_max = *std::max_element(ells.begin(), ells.end());
    double margin = metric_margin(g, f.box, O);
    if (ell_max > margin + 1e-12)
        throw ScaleExceedsMargin("max ell " + format_double(ell_max) +
                                 " exceeds subdomain margin " + format_double(margin));

    const int rx_max = int(std::floor(ell_max / g.dx[0]));
    const int ry_max = g.d == 2 ? int(std::floor(ell_max / g.dx[1])) : 0;
    const int rt_max = mode == StructureMode::SpaceTime
                           ? int(std::floor(ell_max / (g.c_ref * g.dt)))
                           : 0;
    sf.lattice_ball = {rx_max, ry_max, rt_max};
    auto auto_stride = [](int r) { return std::max(1, r / 24); };
    for (int a = 0; a < 3; ++a)
        if (shift_stride[a] <= 0)
            shift_stride[a] = auto_stride(a == 0 ? rx_max : a == 1 ? ry_max : rt_max);
    sf.shift_stride = shift_stride;

    const double cell = g.cell_measure();
    const double slice_cell = g.d == 2 ? g.dx[0] * g.dx[1] : g.dx[0];
    const bool use_inf = std::isinf(p);

    // norm of delta f(R) for every sampled shift in the largest ball
    struct ShiftNorm {
        double norm_metric;
        double value;
    };
    std::vector<ShiftNorm> norms;
    for (int rt = -rt_max; rt <= rt_max; ++rt) {
        if (rt % shift_stride[2] != 0) continue;
        for (int ry = -ry_max; ry <= ry_max; ++ry) {
            if (g.d == 2 && ry % shift_stride[1] != 0) continue;
            for (int rx = -rx_max; rx <= rx_max; ++rx) {
                if (rx % shift_stride[0] != 0) continue;
                if (rx == 0 && ry == 0 && rt == 0) continue;
                Shift s{rx, ry, rt};
                double r = s.norm(g);
                if (r >= ell_max) continue;
                double val = 0.0;
                if (mode == StructureMode::SpaceTime) {
                    double acc = 0.0, mx = 0.0;
                    for_each_cell(O, [&](int ix, int iy, int it) {
                        double d = sample_shifted(g, f, ix, iy, it, s) - f.at(ix, iy, it);
                        if (use_inf)
                            mx = std::max(mx, std::abs(d));
                        else
                            acc += detail_besov::abs_pow(d, p);
                    });
                    val = use_inf ? mx : std::pow(acc * cell, 1.0 / p);
                } else {
                    for (int it = O.lo[2]; it < O.hi[2]; ++it) {
                        double acc = 0.0, mx = 0.0;
                        for (int iy = O.lo[1]; iy < O.hi[1]; ++iy)
                            for (int ix = O.lo[0]; ix < O.hi[0]; ++ix) {
                                double d = sample_shifted(g, f, ix, iy, it, s) -
                                           f.at(ix, iy, it);
                                if (use_inf)
                                    mx = std::max(mx, std::abs(d));
                                else
                                    acc += detail_besov::abs_pow(d, p);
                            }
                        double slice = use_inf ? mx : std::pow(acc * slice_cell, 1.0 / p);
                        val = std::max(val, slice);
                    }
                }
                norms.push_back({r, val});
            }
        }
    }
    for (double ell : ells) {
        double m = 0.0;
        for (const auto& n : norms)
            if (n.norm_metric < ell) m = std::max(m, n.value);
        sf.values.push_back(m);
    }
    return sf;
}

// Least-squares slope of log S_p against log ell over [ell_lo, ell_hi].
inline ExponentFit fit_exponent(const StructureFunction& sf, double ell_lo, double ell_hi) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < sf.ells.size(); ++i) {
        if (sf.ells[i] < ell_lo - 1e-14 || sf.ells[i] > ell_hi + 1e-14) continue;
        if (!(sf.values[i] > 0))
            throw InsufficientScalingRange("structure function vanishes at ell = " +
                                           format_double(sf.ells[i]));
        lx.push_back(std::log(sf.ells[i]));
        ly.push_back(std::log(sf.values[i]));
    }
    const int n = int(lx.size());
    if (n < 8) throw InsufficientScalingRange("need at least 8 scale points, have " +
                                              std::to_string(n));
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    double denom = n * sxx - sx * sx;
    ExponentFit fit;
    fit.sigma = (n * sxy - sx * sy) / denom;
    double icpt = (sy - fit.sigma * sx) / n;
    double ss_res = 0, ss_tot = 0, my = sy / n;
    for (int i = 0; i < n; ++i) {
        double e = ly[i] - (icpt + fit.sigma * lx[i]);
        ss_res += e * e;
        ss_tot += (ly[i] - my) * (ly[i] - my);
    }
    fit.stderr_sigma = n > 2 ? std::sqrt(ss_res / (n - 2) / (sxx - sx * sx / n)) : 0.0;
    fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    fit.ell_lo = ell_lo;
    fit.ell_hi = ell_hi;
    fit.n_points = n;
    fit.clamped_hint = fit.sigma < 0.0 || fit.sigma > 1.0;
    return fit;
}

// Default structure-function fit window: above the discretization floor and
// below boundary contamination.
inline std::pair<double, double> default_fit_window(const Grid& g, double margin) {
    return {4.0 * std::max(g.dx[0], g.c_ref * g.dt), margin / 2.0};
}

// ---------------------------------------------------------------------------
// Onsager exponent conditions
// ---------------------------------------------------------------------------

struct OnsagerConditions {
    std::array<double, 3> margin;  // lhs - 1 for each condition
    std::array<bool, 3> holds;     // strict inequalities
    std::array<bool, 3> critical;  // |margin| within tolerance of 0
};

inline OnsagerConditions onsager_conditions(double sigma_u, double sigma_rho,
                                            double sigma_v, double tol = 0.0) {
    for (double s : {sigma_u, sigma_rho, sigma_v})
        if (s < -1e-12 || s > 1.0 + 1e-12)
            throw Error("exponents must lie in [0, 1]");
    OnsagerConditions c{};
    double mn = std::min(sigma_u, sigma_rho);
    c.margin[0] = 2.0 * mn + sigma_v - 1.0;
    c.margin[1] = mn + 2.0 * sigma_v - 1.0;
    c.margin[2] = 3.0 * sigma_v - 1.0;
    for (int i = 0; i < 3; ++i) {
        c.holds[i] = c.margin[i] > 0.0;
        c.critical[i] = std::abs(c.margin[i]) <= tol;
    }
    return c;
}

// ---------------------------------------------------------------------------
// Space-only versus space-time regularity comparison
// ---------------------------------------------------------------------------

struct SpaceTimeComparison {
    std::string field_id;
    ExponentFit space_only, space_time;
    double predicted_min = 0.0;  // minimum of the space exponents feeding this field
    bool consistent = false;     // space_time sigma >= predicted_min - stderr
};

// Predicted space-time exponents: u and v inherit min(sigma_u, sigma_rho,
// sigma_v); rho inherits min(sigma_rho, sigma_v).
inline std::array<double, 3> predicted_spacetime_exponents(double su, double sr, double sv) {
    double m3 = std::min({su, sr, sv});
    return {m3, std::min(sr, sv), m3};  // order: u, rho, v
}

inline std::vector<SpaceTimeComparison> spacetime_vs_space(
    const Grid& g, const FieldBlock& blk, const Box& O, double p,
    const std::vector<double>& ells, double fit_lo, double fit_hi,
    std::array<int, 3> shift_stride = {1, 1, 1}) {
    const Field* fields[3] = {&blk.u, &blk.rho, &blk.v[0]};
    const char* names[3] = {"u", "rho", "v"};
    std::array<ExponentFit, 3> space{}, st{};
    for (int k = 0; k < 3; ++k) {
        auto sf_space = structure_function(g, *fields[k], O, p, ells,
                                           StructureMode::SpaceOnly, names[k], shift_stride);
        auto sf_st = structure_function(g, *fields[k], O, p, ells,
                                        StructureMode::SpaceTime, names[k], shift_stride);
        space[k] = fit_exponent(sf_space, fit_lo, fit_hi);
        st[k] = fit_exponent(sf_st, fit_lo, fit_hi);
    }
    auto pred = predicted_spacetime_exponents(space[0].sigma, space[1].sigma,
                                              space[2].sigma);
    std::vector<SpaceTimeComparison> out;
    for (int k = 0; k < 3; ++k) {
        SpaceTimeComparison c;
        c.field_id = names[k];
        c.space_only = space[k];
        c.space_time = st[k];
        c.predicted_min = pred[k];
        c.consistent =
            st[k].sigma >= pred[k] - 2.0 * (st[k].stderr_sigma + space[k].stderr_sigma) - 0.05;
        out.push_back(c);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Power-law limit extrapolation y = y_inf + C x^q
// ---------------------------------------------------------------------------

struct LimitExtrapolation {
    double y_inf = 0.0;
    double coeff = 0.0;
    double q = 0.0;
    double confidence = 0.0;  // leave-one-out spread of y_inf
    bool flat_series = false; // tail variation below tolerance; y_inf = tail value
    bool clamped_to_richardson_hull = false;
    double hull_lo = 0.0, hull_hi = 0.0;
};

inline LimitExtrapolation extrapolate_limit(const std::vector<double>& xs,
                                            const std::vector<double>& ys,
                                            double flat_tol = 1e-3) {
    const int n = int(xs.size());
    if (n < 5 || int(ys.size()) != n)
        throw NonConvergentSeries("need at least 5 points for extrapolation");
    for (int i = 1; i < n; ++i)
        if (!(xs[i] != xs[i - 1]))
            throw NonConvergentSeries("control parameter values must be distinct");
    // order by decreasing x (extrapolation toward x -> 0)
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return xs[a] > xs[b]; });
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
        x[i] = xs[idx[i]];
        y[i] = ys[idx[i]];
    }
    double y_scale = 0.0;
    for (double v : y) y_scale = std::max(y_scale, std::abs(v));
    y_scale = std::max(y_scale, 1e-300);

    LimitExtrapolation ext;
    // flat-series early exit: converged within tolerance over the tail
    {
        double tail_var = 0.0;
        for (int i = n - 4; i < n - 1; ++i) tail_var += std::abs(y[i + 1] - y[i]);
        if (tail_var <= flat_tol * y_scale) {
            ext.flat_series = true;
            ext.y_inf = y[n - 1];
            ext.q = 0.0;
            ext.coeff = 0.0;
            double mn = y[n - 3], mx = y[n - 3];
            for (int i = n - 3; i < n; ++i) {
                mn = std::min(mn, y[i]);
                mx = std::max(mx, y[i]);
            }
            ext.confidence = mx - mn;
            ext.hull_lo = mn;
            ext.hull_hi = mx;
            return ext;
        }
    }
    // monotone tail requirement on the last 5 points
    {
        int up = 0, down = 0;
        for (int i = n - 5; i < n - 1; ++i) (y[i + 1] > y[i] ? up : down)++;
        if (up > 0 && down > 0)
            throw NonConvergentSeries("tail of the series is not monotone");
        // successive differences must not grow toward the limit
        double d_prev = std::abs(y[n - 4] - y[n - 5]);
        double d_last = std::abs(y[n - 1] - y[n - 2]);
        if (d_last > 2.0 * d_prev + 1e-14 * y_scale)
            throw NonConvergentSeries("successive differences grow toward the limit");
    }

    struct PowerFit {
        double q = 1.0, y_inf = 0.0, coeff = 0.0, sse = 1e301;
    };
    auto ls_for_q = [](const std::vector<double>& xv, const std::vector<double>& yv,
                       double q) {
        PowerFit f;
        f.q = q;
        const int m = int(xv.size());
        double swx = 0, swy = 0, swxx = 0, swxy = 0;
        for (int i = 0; i < m; ++i) {
            double w = std::pow(xv[i], q);
            swx += w;
            swy += yv[i];
            swxx += w * w;
            swxy += w * yv[i];
        }
        double denom = m * swxx - swx * swx;
        if (std::abs(denom) < 1e-300) return f;
        f.coeff = (m * swxy - swx * swy) / denom;
        f.y_inf = (swy - f.coeff * swx) / m;
        f.sse = 0;
        for (int i = 0; i < m; ++i) {
            double e = yv[i] - (f.y_inf + f.coeff * std::pow(xv[i], q));
            f.sse += e * e;
        }
        return f;
    };
    auto fit_power = [&](const std::vector<double>& xv, const std::vector<double>& yv,
                         bool refine) {
        PowerFit best;
        for (double q = 0.1; q <= 3.0001; q += 0.05) {
            PowerFit f = ls_for_q(xv, yv, q);
            if (f.sse < best.sse) best = f;
        }
        if (refine) {
            double a = std::max(0.02, best.q - 0.05), b = std::min(3.2, best.q + 0.05);
            for (int it = 0; it < 60; ++it) {
                double m1 = a + (b - a) * 0.382, m2 = a + (b - a) * 0.618;
                PowerFit f1 = ls_for_q(xv, yv, m1), f2 = ls_for_q(xv, yv, m2);
                if (f1.sse < f2.sse) {
                    b = m2;
                    if (f1.sse < best.sse) best = f1;
                } else {
                    a = m1;
                    if (f2.sse < best.sse) best = f2;
                }
            }
        }
        return best;
    };
    PowerFit main_fit = fit_power(x, y, true);
    ext.q = main_fit.q;
    ext.y_inf = main_fit.y_inf;
    ext.coeff = main_fit.coeff;

    // leave-one-out spread of the extrapolated limit
    double lo_min = ext.y_inf, lo_max = ext.y_inf;
    for (int drop = 0; drop < n; ++drop) {
        std::vector<double> x2, y2;
        for (int i = 0; i < n; ++i)
            if (i != drop) {
                x2.push_back(x[i]);
                y2.push_back(y[i]);
            }
        PowerFit f = fit_power(x2, y2, false);
        lo_min = std::min(lo_min, f.y_inf);
        lo_max = std::max(lo_max, f.y_inf);
    }
    ext.confidence = lo_max - lo_min;

    // Richardson extrapolants from consecutive tail triples (geometric-ish x)
    std::vector<double> rich;
    for (int i = n - 3; i >= std::max(0, n - 5); --i) {
        double d1 = y[i + 1] - y[i], d2 = y[i + 2] - y[i + 1];
        if (std::abs(d1) < 1e-300 || d2 * d1 <= 0) continue;
        double r = d2 / d1;
        if (r > 0 && r < 1) rich.push_back(y[i + 2] + d2 * r / (1.0 - r));
    }
    if (!rich.empty()) {
        double lo = *std::min_element(rich.begin(), rich.end());
        double hi = *std::max_element(rich.begin(), rich.end());
        double pad = 0.25 * (hi - lo) + 1e-12 * y_scale +
                     0.5 * std::abs(y[n - 1] - y[n - 2]);
        ext.hull_lo = lo - pad;
        ext.hull_hi = hi + pad;
        if (ext.y_inf < ext.hull_lo || ext.y_inf > ext.hull_hi) {
            ext.y_inf = std::clamp(ext.y_inf, ext.hull_lo, ext.hull_hi);
            ext.clamped_to_richardson_hull = true;
        }
    } else {
        ext.hull_lo = ext.y_inf - ext.confidence;
        ext.hull_hi = ext.y_inf + ext.confidence;
    }
    return ext;
}

}  // namespace onsager
