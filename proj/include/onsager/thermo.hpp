#pragma once
// Equations of state and pointwise thermodynamics. Everything is derived
// analytically from the fundamental equation s(u, rho); pressure comes from
// the homogeneous Gibbs relation T s = u + p - mu rho.

#include "onsager/core.hpp"

namespace onsager {

enum class EosKind { IdealGas, VanDerWaals };

struct EosSpec {
    EosKind kind = EosKind::IdealGas;
    double alpha = 1.5;  // f/2
    double k_B = 1.0;
    double s_0 = 0.0;
    double a = 0.0;  // vdW attraction (energy*volume/mass^2)
    double b = 0.0;  // vdW covolume (volume/mass)
    double rho_floor = 1e-12;

    void validate() const {
        if (!(alpha > 0)) throw ConfigError("eos.alpha must be positive");
        if (!(k_B > 0)) throw ConfigError("eos.k_B must be positive");
        if (kind == EosKind::VanDerWaals && (!(a > 0) || !(b > 0)))
            throw ConfigError("van der Waals eos requires a > 0 and b > 0");
    }
    double gamma() const { return (alpha + 1.0) / alpha; }
};

struct ThermoState {
    double u = 1.0;    // internal energy density
    double rho = 1.0;  // mass density
};

struct ThermoEval {
    double p, T, mu, s, s_m, beta, lambda, h, sound_speed;
};

// s and its first and second partial derivatives in (u, rho), plus the
// pressure and its partials. All analytic.
struct ThermoDerivs {
    double s, s_u, s_r, s_uu, s_ur, s_rr;
    double p, p_u, p_r;
    double T;  // 1/s_u
};

namespace detail {

inline void check_state(const EosSpec& eos, const ThermoState& st) {
    if (!(st.rho >= eos.rho_floor))
        throw StateOutsideValidity("density " + format_double(st.rho) +
                                   " below floor " + format_double(eos.rho_floor));
    if (!std::isfinite(st.u) || !std::isfinite(st.rho))
        throw StateOutsideValidity("non-finite state");
}

}  // namespace detail

inline ThermoDerivs eval_derivs(const EosSpec& eos, const ThermoState& st) {
    detail::check_state(eos, st);
    const double u = st.u, r = st.rho, kB = eos.k_B, al = eos.alpha;
    ThermoDerivs d{};
    if (eos.kind == EosKind::IdealGas) {
        if (!(u > 0)) throw StateOutsideValidity("ideal gas requires u > 0");
        const double lg = std::log(u / std::pow(r, 1.0 + 1.0 / al));
        d.s = al * kB * r * (lg + eos.s_0);
        d.s_u = al * kB * r / u;
        d.s_r = d.s / r - (al + 1.0) * kB;
        d.s_uu = -al * kB * r / (u * u);
        d.s_ur = al * kB / u;
        d.s_rr = -(al + 1.0) * kB / r;
        d.T = u / (al * kB * r);
        d.p = u / al;
        d.p_u = 1.0 / al;
        d.p_r = 0.0;
    } else {
        const double V = 1.0 / r - eos.b;          // covolume-corrected specific volume
        const double w = u / r + eos.a * r;        // shifted specific internal energy
        if (!(V > 0)) throw StateOutsideValidity("van der Waals: rho >= 1/b");
        if (!(w > 0)) throw StateOutsideValidity("van der Waals: T <= 0");
        d.s = al * kB * r * (std::log(V) / al + std::log(w) + eos.s_0);
        d.s_u = al * kB / w;
        const double w_r = eos.a - u / (r * r);  // d w / d rho
        d.s_r = d.s / r - kB / (r * V) + al * kB * r * w_r / w;
        d.s_uu = -al * kB / (w * w * r);
        d.s_ur = -al * kB * w_r / (w * w);
        // d/d rho of s_r, using d(s/r)/dr = (s_r - s/r)/r and V' = -1/r^2
        d.s_rr = (-kB / (r * V) + al * kB * r * w_r / w) / r
                 - kB * eos.b / (r * V * r * V)
                 + al * kB * w_r / w
                 + al * kB * r * (2.0 * u / (r * r * r) / w - w_r * w_r / (w * w));
        d.T = w / (al * kB);
        d.p = kB * d.T / V - eos.a * r * r;
        d.p_u = 1.0 / (al * V * r);
        d.p_r = w_r / (al * V) + kB * d.T / (r * V * r * V) - 2.0 * eos.a * r;
        // raw entropy surface must be concave here (no phase transition)
        const double scale = std::abs(d.s_uu) + std::abs(d.s_rr) + std::abs(d.s_ur);
        const double det = d.s_uu * d.s_rr - d.s_ur * d.s_ur;
        if (d.s_uu > 1e-12 * scale || det < -1e-12 * scale * scale)
            throw StateOutsideValidity(
                "van der Waals state inside non-concave (phase transition) region");
    }
    if (!(d.T > 0)) throw StateOutsideValidity("T <= 0");
    return d;
}

inline double entropy(const EosSpec& eos, const ThermoState& st) {
    return eval_derivs(eos, st).s;
}

// Pressure, temperature and sound speed only (no logarithms); the inner
// loop of the flux solver lives on this.
struct PTc {
    double p, T, c;
};

inline PTc eval_pTc(const EosSpec& eos, const ThermoState& st) {
    detail::check_state(eos, st);
    const double u = st.u, r = st.rho, kB = eos.k_B, al = eos.alpha;
    double p, T, p_u, p_r;
    if (eos.kind == EosKind::IdealGas) {
        if (!(u > 0)) throw StateOutsideValidity("ideal gas requires u > 0");
        T = u / (al * kB * r);
        p = u / al;
        p_u = 1.0 / al;
        p_r = 0.0;
    } else {
        const double V = 1.0 / r - eos.b;
        const double w = u / r + eos.a * r;
        if (!(V > 0) || !(w > 0)) throw StateOutsideValidity("van der Waals state");
        T = w / (al * kB);
        p = kB * T / V - eos.a * r * r;
        const double w_r = eos.a - u / (r * r);
        p_u = 1.0 / (al * V * r);
        p_r = w_r / (al * V) + kB * T / (r * V * r * V) - 2.0 * eos.a * r;
    }
    double c2 = p_r + (u + p) / r * p_u;
    if (!(T > 0) || !(c2 > 0)) throw StateOutsideValidity("non-hyperbolic state");
    return {p, T, std::sqrt(c2)};
}

inline ThermoEval eval_thermo(const EosSpec& eos, const ThermoState& st) {
    const ThermoDerivs d = eval_derivs(eos, st);
    ThermoEval e{};
    e.s = d.s;
    e.T = d.T;
    e.beta = d.s_u;
    e.lambda = -d.s_r;       // mu/T = -ds/drho
    e.mu = -d.T * d.s_r;
    e.p = d.T * d.s - st.u + e.mu * st.rho;  // homogeneous Gibbs relation
    e.s_m = d.s / st.rho;
    e.h = st.u + e.p;
    const double c2 = d.p_r + (e.h / st.rho) * d.p_u;  // dp/drho at fixed s_m
    if (!(c2 > 0)) throw StateOutsideValidity("non-hyperbolic state: c^2 <= 0");
    e.sound_speed = std::sqrt(c2);
    if (eos.kind == EosKind::IdealGas && !(e.p > 0))
        throw StateOutsideValidity("ideal gas requires p > 0");
    return e;
}

// ---------------------------------------------------------------------------
// Transport coefficients, scaled by the global eps.
// ---------------------------------------------------------------------------

struct TransportCoeff {
    enum class Kind { Constant, PowerLawT } kind = Kind::Constant;
    double value = 1.0;     // constant value, or reference value at T_ref
    double T_ref = 1.0;
    double exponent = 0.5;  // power-law exponent in T

    double eval(double T) const {
        if (kind == Kind::Constant) return value;
        return value * std::pow(T / T_ref, exponent);
    }
};

struct TransportModel {
    TransportCoeff eta, zeta, kappa;
    double eps = 0.0;

    void validate() const {
        if (!(eps >= 0)) throw ConfigError("transport.eps must be >= 0");
        for (const auto* c : {&eta, &zeta, &kappa})
            if (!(c->value > 0) || !(c->T_ref > 0))
                throw ConfigError("transport coefficients must be positive");
    }
};

struct TransportEval {
    double eta, zeta, kappa;  // eps-scaled
};

inline TransportEval transport(const TransportModel& m, const EosSpec& eos,
                               const ThermoState& st) {
    if (m.eps == 0.0) return {0.0, 0.0, 0.0};
    const double T = eval_derivs(eos, st).T;
    return {m.eps * m.eta.eval(T), m.eps * m.zeta.eval(T), m.eps * m.kappa.eval(T)};
}

// 1-D longitudinal viscosity: the deviatoric S vanishes identically at d=1,
// so 2*eta*(1-1/d) contributes nothing and the dissipation is carried by zeta.
inline double longitudinal_viscosity(const TransportEval& t, int d) {
    return 2.0 * t.eta * (1.0 - 1.0 / d) + t.zeta;
}

}  // namespace onsager
