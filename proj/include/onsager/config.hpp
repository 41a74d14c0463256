#pragma once
// Run configuration: JSON schema with strict key checking (unknown keys are
// hard errors), defaults where declared, and a stable content hash for
// provenance stamps.

#include "onsager/budgets.hpp"
#include "onsager/solver.hpp"

#include "json.hpp"

#include <fstream>

namespace onsager {

using json = nlohmann::json;

struct AnalysisConfig {
    std::vector<double> ells;
    std::vector<double> p_values{3.0, 4.0, 6.0};
    MollifierSpec kernel;
    std::array<int, 3> stride{1, 1, 1};
    int exclude_cells = 0;  // sponge exclusion before filtering
    std::vector<BumpSpec> test_functions;  // empty: defaults are placed per run
    bool limits_against_inverse_scale = false;  // extrapolate vs 1/ell
};

struct InitConfig {
    enum class Kind { Uniform, Shock, SmoothWave } kind = Kind::Uniform;
    // uniform
    double rho = 1.0, v = 0.0, u = 2.5;
    // shock
    ShockSetup shock;
    // smooth wave
    double amplitude = 0.05, wavelength = 1.0, rho0 = 1.0, p0 = 1.0;
};

struct RunConfig {
    int schema_version = 1;
    EosSpec eos;
    TransportModel transport;
    NsConfig solver;  // grid/bc/cfl live here; eos/transport copied in
    InitConfig init;
    double t_end = 1.0;
    int nt_snapshots = 65;
    AnalysisConfig analysis;
    std::string output_dir = "out";
    std::uint32_t config_hash = 0;
};

namespace detail_cfg {

inline void check_keys(const json& j, const std::string& path,
                       std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(path + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed)
            if (it.key() == a) ok = true;
        if (!ok) throw ConfigError("unknown config key " + path + "." + it.key());
    }
}

template <class T>
T get_or(const json& j, const char* key, T def) {
    if (!j.contains(key)) return def;
    return j.at(key).get<T>();
}

inline double require_positive(const json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) throw ConfigError("missing config key " + path + "." + key);
    double v = j.at(key).get<double>();
    if (!(v > 0)) throw ConfigError(path + "." + key + " must be positive");
    return v;
}

inline TransportCoeff parse_coeff(const json& j, const std::string& path) {
    check_keys(j, path, {"kind", "value", "T_ref", "exponent"});
    TransportCoeff c;
    std::string kind = get_or<std::string>(j, "kind", "constant");
    if (kind == "constant")
        c.kind = TransportCoeff::Kind::Constant;
    else if (kind == "power_law_T")
        c.kind = TransportCoeff::Kind::PowerLawT;
    else
        throw ConfigError(path + ".kind must be constant or power_law_T");
    c.value = require_positive(j, path, "value");
    c.T_ref = get_or<double>(j, "T_ref", 1.0);
    c.exponent = get_or<double>(j, "exponent", 0.5);
    return c;
}

}  // namespace detail_cfg

inline RunConfig parse_run_config(const json& j) {
    using namespace detail_cfg;
    check_keys(j, "config",
               {"schema_version", "eos", "transport", "grid", "bc", "cfl", "init", "time",
                "analysis", "output_dir"});
    RunConfig rc;
    if (!j.contains("schema_version"))
        throw ConfigError("missing config key config.schema_version");
    rc.schema_version = j.at("schema_version").get<int>();
    if (rc.schema_version != 1) throw ConfigError("unsupported schema_version");

    // eos
    {
        const json& e = j.at("eos");
        check_keys(e, "eos", {"kind", "alpha", "k_B", "s_0", "a", "b", "rho_floor"});
        std::string kind = get_or<std::string>(e, "kind", "ideal_gas");
        if (kind == "ideal_gas")
            rc.eos.kind = EosKind::IdealGas;
        else if (kind == "van_der_waals")
            rc.eos.kind = EosKind::VanDerWaals;
        else
            throw ConfigError("eos.kind must be ideal_gas or van_der_waals");
        rc.eos.alpha = require_positive(e, "eos", "alpha");
        rc.eos.k_B = get_or<double>(e, "k_B", 1.0);
        rc.eos.s_0 = get_or<double>(e, "s_0", 0.0);
        rc.eos.a = get_or<double>(e, "a", 0.0);
        rc.eos.b = get_or<double>(e, "b", 0.0);
        rc.eos.rho_floor = get_or<double>(e, "rho_floor", 1e-12);
        rc.eos.validate();
    }
    // transport
    {
        const json& t = j.at("transport");
        check_keys(t, "transport", {"eps", "eta", "zeta", "kappa", "becker_mu"});
        rc.transport.eps = t.at("eps").get<double>();
        if (!(rc.transport.eps >= 0)) throw ConfigError("transport.eps must be >= 0");
        if (t.contains("becker_mu")) {
            double mu = require_positive(t, "transport", "becker_mu");
            rc.transport = becker_transport(rc.eos, mu, rc.transport.eps);
        } else {
            if (t.contains("eta")) rc.transport.eta = parse_coeff(t.at("eta"), "transport.eta");
            if (t.contains("zeta"))
                rc.transport.zeta = parse_coeff(t.at("zeta"), "transport.zeta");
            if (t.contains("kappa"))
                rc.transport.kappa = parse_coeff(t.at("kappa"), "transport.kappa");
        }
        rc.transport.validate();
    }
    // grid / solver
    {
        const json& g = j.at("grid");
        check_keys(g, "grid", {"nx", "x_min", "x_max", "c_ref"});
        rc.solver.nx = int(require_positive(g, "grid", "nx"));
        rc.solver.x_min = get_or<double>(g, "x_min", 0.0);
        rc.solver.x_max = get_or<double>(g, "x_max", 1.0);
        if (!(rc.solver.x_max > rc.solver.x_min))
            throw ConfigError("grid.x_max must exceed grid.x_min");
        rc.solver.c_ref = get_or<double>(g, "c_ref", 0.0);
    }
    if (j.contains("bc")) {
        const json& b = j.at("bc");
        check_keys(b, "bc", {"kind", "sponge_cells"});
        std::string kind = get_or<std::string>(b, "kind", "periodic");
        if (kind == "periodic")
            rc.solver.bc = SolverBc::Periodic;
        else if (kind == "inflow_outflow")
            rc.solver.bc = SolverBc::InflowOutflow;
        else
            throw ConfigError("bc.kind must be periodic or inflow_outflow");
        rc.solver.sponge_cells = get_or<int>(b, "sponge_cells", 16);
    }
    rc.solver.cfl = get_or<double>(j, "cfl", 0.4);
    rc.solver.eos = rc.eos;
    rc.solver.transport = rc.transport;
    // init
    {
        const json& i = j.at("init");
        check_keys(i, "init",
                   {"kind", "rho", "v", "u", "mach", "upstream", "frame", "amplitude",
                    "wavelength", "rho0", "p0"});
        std::string kind = i.at("kind").get<std::string>();
        if (kind == "uniform") {
            rc.init.kind = InitConfig::Kind::Uniform;
            rc.init.rho = require_positive(i, "init", "rho");
            rc.init.v = get_or<double>(i, "v", 0.0);
            rc.init.u = require_positive(i, "init", "u");
        } else if (kind == "shock") {
            rc.init.kind = InitConfig::Kind::Shock;
            rc.init.shock.mach = require_positive(i, "init", "mach");
            const json& up = i.at("upstream");
            check_keys(up, "init.upstream", {"rho", "p", "u"});
            double rho = require_positive(up, "init.upstream", "rho");
            double u;
            if (up.contains("u"))
                u = require_positive(up, "init.upstream", "u");
            else {
                double p = require_positive(up, "init.upstream", "p");
                u = detail::solve_u_of_p(rc.eos, rho, p, rc.eos.alpha * p);
            }
            rc.init.shock.upstream = {u, rho};
            std::string frame = get_or<std::string>(i, "frame", "shock_stationary");
            if (frame == "shock_stationary")
                rc.init.shock.frame = ShockFrame::ShockStationary;
            else if (frame == "lab")
                rc.init.shock.frame = ShockFrame::Lab;
            else
                throw ConfigError("init.frame must be shock_stationary or lab");
        } else if (kind == "smooth_wave") {
            rc.init.kind = InitConfig::Kind::SmoothWave;
            rc.init.amplitude = i.at("amplitude").get<double>();
            rc.init.wavelength = require_positive(i, "init", "wavelength");
            rc.init.rho0 = get_or<double>(i, "rho0", 1.0);
            rc.init.p0 = get_or<double>(i, "p0", 1.0);
        } else {
            throw ConfigError("init.kind must be uniform, shock or smooth_wave");
        }
    }
    // time
    {
        const json& t = j.at("time");
        check_keys(t, "time", {"t_end", "nt_snapshots"});
        rc.t_end = require_positive(t, "time", "t_end");
        rc.nt_snapshots = get_or<int>(t, "nt_snapshots", 65);
        if (rc.nt_snapshots < 2) throw ConfigError("time.nt_snapshots must be >= 2");
    }
    // analysis
    if (j.contains("analysis")) {
        const json& a = j.at("analysis");
        check_keys(a, "analysis",
                   {"ells", "p_values", "kernel", "stride", "exclude_cells",
                    "test_functions", "limit_variable"});
        if (a.contains("limit_variable")) {
            std::string lv = a.at("limit_variable").get<std::string>();
            if (lv == "inverse_ell")
                rc.analysis.limits_against_inverse_scale = true;
            else if (lv != "ell")
                throw ConfigError("analysis.limit_variable must be ell or inverse_ell");
        }
        if (a.contains("ells")) rc.analysis.ells = a.at("ells").get<std::vector<double>>();
        if (a.contains("p_values"))
            rc.analysis.p_values = a.at("p_values").get<std::vector<double>>();
        if (a.contains("kernel")) {
            const json& k = a.at("kernel");
            check_keys(k, "analysis.kernel", {"profile", "causal"});
            std::string prof = get_or<std::string>(k, "profile", "smooth_bump");
            if (prof == "smooth_bump")
                rc.analysis.kernel.profile = MollifierProfile::SmoothBump;
            else if (prof == "polynomial_bump")
                rc.analysis.kernel.profile = MollifierProfile::PolynomialBump;
            else
                throw ConfigError("analysis.kernel.profile must be smooth_bump or polynomial_bump");
            rc.analysis.kernel.causal_in_time = get_or<bool>(k, "causal", false);
        }
        if (a.contains("stride")) {
            const json& s = a.at("stride");
            check_keys(s, "analysis.stride", {"x", "y", "t"});
            rc.analysis.stride = {get_or<int>(s, "x", 1), get_or<int>(s, "y", 1),
                                  get_or<int>(s, "t", 1)};
        }
        rc.analysis.exclude_cells = get_or<int>(a, "exclude_cells", 0);
        if (a.contains("test_functions")) {
            for (const auto& tf : a.at("test_functions")) {
                check_keys(tf, "analysis.test_functions[]", {"name", "center", "halfwidth"});
                BumpSpec b;
                b.name = tf.at("name").get<std::string>();
                auto c = tf.at("center").get<std::vector<double>>();
                auto h = tf.at("halfwidth").get<std::vector<double>>();
                if (c.size() != 2 || h.size() != 2)
                    throw ConfigError("test_functions center/halfwidth must be [x, t]");
                b.center = {c[0], 0.0, c[1]};
                b.halfwidth = {h[0], 0.0, h[1]};
                rc.analysis.test_functions.push_back(b);
            }
        }
    }
    rc.output_dir = get_or<std::string>(j, "output_dir", "out");

    rc.config_hash = crc32(j.dump().data(), j.dump().size());
    return rc;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return parse_run_config(j);
}

}  // namespace onsager
