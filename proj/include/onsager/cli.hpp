#pragma once
// Command-line front end: simulate, scan-ell, scan-eps, besov, oracle rh,
// report. Exit codes: 0 success, 2 config error, 3 numerical failure,
// 4 acceptance-check failure.

#include "onsager/report.hpp"
#include "onsager/snapshot.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace onsager::cli {

constexpr const char* kCodeVersion = "0.1.0";

struct Provenance {
    std::uint32_t config_hash = 0;
    std::uint64_t seed = 0;

    std::string hash_hex() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%08x", config_hash);
        return buf;
    }
    json to_json() const {
        return json{{"config_hash", hash_hex()},
                    {"code_version", kCodeVersion},
                    {"seed", seed}};
    }
};

inline void write_text(const std::string& path, const std::string& content) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << content;
    if (!f) throw IoError("write failed for " + path);
}

inline std::string scan_rows_csv(std::vector<ScanRow> rows, const Provenance& prov) {
    std::sort(rows.begin(), rows.end(), [](const ScanRow& a, const ScanRow& b) {
        return std::tie(a.ell, a.equation, a.term, a.test_fn) <
               std::tie(b.ell, b.equation, b.term, b.test_fn);
    });
    std::string out = "ell,equation,term,test_fn,value,config_hash\n";
    for (const auto& r : rows)
        out += format_double(r.ell) + "," + r.equation + "," + r.term + "," + r.test_fn +
               "," + format_double(r.value) + "," + prov.hash_hex() + "\n";
    return out;
}

inline json limits_json(const std::vector<ColumnLimit>& limits) {
    json arr = json::array();
    for (const auto& l : limits) {
        json e{{"equation", l.equation}, {"term", l.term}, {"test_fn", l.test_fn},
               {"ok", l.ok}};
        e["variable"] = l.variable;
        if (l.ok) {
            e["y_inf"] = l.limit.y_inf;
            e["q"] = l.limit.q;
            e["coeff"] = l.limit.coeff;
            e["confidence"] = l.limit.confidence;
            e["flat_series"] = l.limit.flat_series;
            e["clamped_to_richardson_hull"] = l.limit.clamped_to_richardson_hull;
        } else {
            e["error"] = l.error;
        }
        arr.push_back(e);
    }
    return arr;
}

// Build initial data from the run config; returns far-state pin data too.
inline InitialData build_initial(const RunConfig& rc, double* t_shock_out = nullptr) {
    const int nx = rc.solver.nx;
    InitialData init;
    if (rc.init.kind == InitConfig::Kind::Uniform) {
        init.rho.assign(nx, rc.init.rho);
        init.v.assign(nx, rc.init.v);
        init.u.assign(nx, rc.init.u);
    } else if (rc.init.kind == InitConfig::Kind::Shock) {
        double dx = (rc.solver.x_max - rc.solver.x_min) / nx;
        if (rc.transport.eps > 0) {
            BeckerProfile prof = becker_profile(rc.init.shock, rc.eos, rc.transport,
                                                rc.transport.eps, nx, dx, 0.5);
            // the shock is resolved, never captured
            if (prof.width_10_90 / dx < 8.0)
                throw UnresolvedRun("viscous shock resolved by only " +
                                    format_double(prof.width_10_90 / dx) +
                                    " cells; need at least 8 (refine grid.nx or "
                                    "raise transport.eps)");
            init = InitialData{prof.rho, prof.v, prof.u};
        } else {
            RankineHugoniot rh = rh_jump(rc.init.shock, rc.eos);
            init.rho.resize(nx);
            init.v.resize(nx);
            init.u.resize(nx);
            double x_mid = rc.solver.x_min + 0.5 * (rc.solver.x_max - rc.solver.x_min);
            for (int i = 0; i < nx; ++i) {
                bool up = rc.solver.x_min + (i + 0.5) * dx < x_mid;
                const RhSide& s = up ? rh.upstream : rh.downstream;
                init.rho[i] = s.rho;
                init.v[i] = s.v - rh.frame_shift;
                init.u[i] = s.u;
            }
        }
    } else {
        SmoothWave w = smooth_wave_ic(rc.eos, rc.init.amplitude, rc.init.wavelength,
                                      rc.init.rho0, rc.init.p0, nx, rc.solver.x_min,
                                      rc.solver.x_max, rc.t_end);
        init = w.init;
        if (t_shock_out) *t_shock_out = w.shock_time;
    }
    return init;
}

inline FieldBlock run_simulation(const RunConfig& rc, RunDiagnostics* diag) {
    NsConfig ns = rc.solver;
    if (rc.init.kind == InitConfig::Kind::Shock && ns.bc == SolverBc::Periodic)
        ns.bc = SolverBc::InflowOutflow;
    double t_shock = INFINITY;
    InitialData init = build_initial(rc, &t_shock);
    return integrate(ns, init, 0.0, rc.t_end, rc.nt_snapshots, diag);
}

inline json diagnostics_json(const RunDiagnostics& dg) {
    return json{{"mass_drift_rel", dg.mass_drift_rel},
                {"momentum_drift_abs", dg.momentum_drift_abs},
                {"energy_drift_rel", dg.energy_drift_rel},
                {"min_entropy_increment", dg.min_entropy_increment},
                {"steps", dg.steps},
                {"dt_min", dg.dt_min},
                {"dt_max", dg.dt_max}};
}

inline int cmd_simulate(const RunConfig& rc, const std::string& out_dir,
                        const Provenance& prov) {
    RunDiagnostics dg;
    FieldBlock blk = run_simulation(rc, &dg);
    std::filesystem::create_directories(out_dir);
    osgf::write(out_dir + "/run.osgf", blk, rc.eos);
    json meta{{"provenance", prov.to_json()},
              {"eps", rc.transport.eps},
              {"grid", {{"nx", blk.grid.nx[0]}, {"dx", blk.grid.dx[0]},
                        {"nt", blk.grid.nt}, {"dt", blk.grid.dt},
                        {"c_ref", blk.grid.c_ref}}},
              {"eos", {{"kind", rc.eos.kind == EosKind::IdealGas ? "ideal_gas"
                                                                 : "van_der_waals"},
                       {"alpha", rc.eos.alpha}, {"k_B", rc.eos.k_B}, {"s_0", rc.eos.s_0}}},
              {"transport_note",
               "d=1 longitudinal coefficient folds 2*eta*(1-1/d)+zeta (= zeta)"},
              {"conservation", diagnostics_json(dg)}};
    write_text(out_dir + "/metadata.json", meta.dump(2) + "\n");
    std::cout << "wrote " << out_dir << "/run.osgf (" << blk.grid.nx[0] << " x "
              << blk.grid.nt << " snapshots)\n";
    return 0;
}

inline FieldBlock load_or_simulate(const RunConfig& rc, const std::string& data_path,
                                   EosSpec* eos_out) {
    if (!data_path.empty()) {
        auto rr = osgf::read(data_path);
        if (eos_out) *eos_out = rr.eos;
        return std::move(rr.block);
    }
    if (eos_out) *eos_out = rc.eos;
    return run_simulation(rc, nullptr);
}

inline int cmd_scan_ell(const RunConfig& rc, const std::string& data_path,
                        const std::string& out_dir, int threads, const Provenance& prov) {
    EosSpec eos = rc.eos;
    FieldBlock blk = load_or_simulate(rc, data_path, &eos);
    EllScanConfig sc;
    sc.ells = rc.analysis.ells;
    if (sc.ells.empty()) throw ConfigError("analysis.ells is required for scan-ell");
    sc.kernel = rc.analysis.kernel;
    sc.stride = rc.analysis.stride;
    sc.exclude_cells = rc.analysis.exclude_cells;
    sc.bumps = rc.analysis.test_functions;
    sc.threads = threads;
    sc.limits_against_inverse_scale = rc.analysis.limits_against_inverse_scale;
    EllScanResult res = scan_ell(blk, eos, rc.transport, sc);
    std::filesystem::create_directories(out_dir);
    write_text(out_dir + "/scan_ell.csv", scan_rows_csv(res.rows, prov));
    json j{{"provenance", prov.to_json()}, {"limits", limits_json(res.limits)}};
    json bumps = json::array();
    for (const auto& b : res.bumps)
        bumps.push_back({{"name", b.name},
                         {"center", {b.center[0], b.center[2]}},
                         {"halfwidth", {b.halfwidth[0], b.halfwidth[2]}}});
    j["test_functions"] = bumps;
    write_text(out_dir + "/scan_ell.json", j.dump(2) + "\n");
    std::cout << "wrote " << out_dir << "/scan_ell.csv with " << res.rows.size()
              << " rows\n";
    return 0;
}

inline int cmd_scan_eps(const RunConfig& rc, const std::vector<double>& eps_list,
                        const std::string& out_dir, int threads, const Provenance& prov) {
    if (rc.init.kind != InitConfig::Kind::Shock)
        throw ConfigError("scan-eps requires init.kind = shock");
    EpsScanConfig ec;
    ec.eps_list = eps_list;
    ec.setup = rc.init.shock;
    ec.mu_long = longitudinal_viscosity(
        TransportEval{rc.transport.eta.value, rc.transport.zeta.value,
                      rc.transport.kappa.value},
        1);
    ec.nx = rc.solver.nx;
    ec.x_min = rc.solver.x_min;
    ec.x_max = rc.solver.x_max;
    ec.t_end = rc.t_end;
    ec.nt_snapshots = rc.nt_snapshots;
    ec.cfl = rc.solver.cfl;
    ec.sponge_cells = rc.solver.sponge_cells;
    ec.bumps = rc.analysis.test_functions;
    ec.threads = threads;
    EpsScanResult res = scan_eps(rc.eos, ec);

    std::filesystem::create_directories(out_dir);
    std::string csv = "eps,observable,test_fn,value,config_hash\n";
    std::vector<EpsRow> rows = res.rows;
    std::sort(rows.begin(), rows.end(), [](const EpsRow& a, const EpsRow& b) {
        return std::tie(a.eps, a.observable, a.test_fn) <
               std::tie(b.eps, b.observable, b.test_fn);
    });
    for (const auto& r : rows)
        csv += format_double(r.eps) + "," + r.observable + "," + r.test_fn + "," +
               format_double(r.value) + "," + prov.hash_hex() + "\n";
    write_text(out_dir + "/scan_eps.csv", csv);
    json j{{"provenance", prov.to_json()},
           {"l1_slope", res.l1_slope},
           {"l1_distance", res.l1_distance},
           {"width_cells", res.width_cells},
           {"eps", eps_list},
           {"cauchy_rel", res.max_cauchy_rel},
           {"limits", limits_json(res.limits)}};
    write_text(out_dir + "/scan_eps.json", j.dump(2) + "\n");
    std::cout << "wrote " << out_dir << "/scan_eps.csv; L1 slope "
              << format_double(res.l1_slope) << "\n";
    return 0;
}

inline int cmd_besov(const RunConfig& rc, const std::string& data_path,
                     const std::string& out_dir, const Provenance& prov) {
    EosSpec eos = rc.eos;
    FieldBlock blk = load_or_simulate(rc, data_path, &eos);
    const Grid& g = blk.grid;
    BesovScanConfig bc;
    bc.ells = rc.analysis.ells;
    if (bc.ells.empty()) throw ConfigError("analysis.ells is required for besov");
    bc.p_values = rc.analysis.p_values;
    double ell_max = *std::max_element(bc.ells.begin(), bc.ells.end());
    Box O = Box::full(g);
    int mx = int(std::ceil(ell_max / g.dx[0])) + rc.analysis.exclude_cells;
    int mt = int(std::ceil(ell_max / (g.c_ref * g.dt)));
    if (!g.periodic[0]) {
        O.lo[0] += mx;
        O.hi[0] -= mx;
    }
    O.lo[2] += mt;
    O.hi[2] -= mt;
    if (O.empty()) throw ScaleExceedsMargin("besov domain empty after margins");
    bc.domain = O;
    bc.fit_lo = bc.ells.front();
    bc.fit_hi = bc.ells.back();
    BesovScanResult res = besov_scan(blk, bc);

    std::filesystem::create_directories(out_dir);
    std::string csv = "field,p,mode,ell,S_p,config_hash\n";
    for (const auto& fr : res.fields) {
        for (std::size_t i = 0; i < fr.sf_spacetime.ells.size(); ++i)
            csv += fr.field_id + "," + format_double(fr.p) + ",spacetime," +
                   format_double(fr.sf_spacetime.ells[i]) + "," +
                   format_double(fr.sf_spacetime.values[i]) + "," + prov.hash_hex() + "\n";
        for (std::size_t i = 0; i < fr.sf_space.ells.size(); ++i)
            csv += fr.field_id + "," + format_double(fr.p) + ",space," +
                   format_double(fr.sf_space.ells[i]) + "," +
                   format_double(fr.sf_space.values[i]) + "," + prov.hash_hex() + "\n";
    }
    write_text(out_dir + "/structure_functions.csv", csv);

    json fits = json::array();
    for (const auto& fr : res.fields)
        fits.push_back({{"field", fr.field_id},
                        {"p", fr.p},
                        {"sigma_spacetime", fr.fit_spacetime.sigma},
                        {"stderr_spacetime", fr.fit_spacetime.stderr_sigma},
                        {"sigma_space", fr.fit_space.sigma},
                        {"stderr_space", fr.fit_space.stderr_sigma},
                        {"r_squared", fr.fit_spacetime.r_squared},
                        {"outside_unit_interval", fr.fit_spacetime.clamped_hint}});
    json conds = json::array();
    for (const auto& [p, cond] : res.conditions) {
        json c{{"p", p}};
        for (int i = 0; i < 3; ++i) {
            c["margin_" + std::to_string(i + 1)] = cond.margin[i];
            c["holds_" + std::to_string(i + 1)] = cond.holds[i];
            c["critical_" + std::to_string(i + 1)] = cond.critical[i];
        }
        conds.push_back(c);
    }
    json cmp = json::array();
    for (const auto& cc : res.comparison_p3)
        cmp.push_back({{"field", cc.field_id},
                       {"sigma_space", cc.space_only.sigma},
                       {"sigma_spacetime", cc.space_time.sigma},
                       {"predicted_min", cc.predicted_min},
                       {"consistent", cc.consistent}});
    json j{{"provenance", prov.to_json()},
           {"fits", fits},
           {"onsager_conditions", conds},
           {"spacetime_comparison", cmp},
           {"lattice_note",
            "sup over shifts realized as a max over the lattice ball; "
            "ball radii recorded per structure function"}};
    write_text(out_dir + "/besov.json", j.dump(2) + "\n");
    std::cout << "wrote " << out_dir << "/besov.json\n";
    return 0;
}

inline json rh_to_json(const RankineHugoniot& rh) {
    auto side = [](const RhSide& s) {
        return json{{"rho", s.rho}, {"v", s.v},     {"u", s.u}, {"p", s.p},
                    {"T", s.T},     {"s_m", s.s_m}, {"c", s.c}};
    };
    return json{{"upstream", side(rh.upstream)},
                {"downstream", side(rh.downstream)},
                {"mass_flux", rh.mass_flux},
                {"momentum_flux", rh.momentum_flux},
                {"total_enthalpy", rh.total_enthalpy},
                {"anomaly_entropy", rh.anomaly_entropy},
                {"anomaly_ke", rh.anomaly_ke},
                {"p_circ_theta", rh.p_circ_theta},
                {"p_star_theta", rh.p_star_theta},
                {"flux_residual", rh_flux_residual(rh)},
                {"frame_shift", rh.frame_shift}};
}

inline int cmd_oracle_rh(const RunConfig& rc, const std::string& out_dir) {
    if (rc.init.kind != InitConfig::Kind::Shock)
        throw ConfigError("oracle rh requires init.kind = shock");
    RankineHugoniot rh = rh_jump(rc.init.shock, rc.eos);
    json j = rh_to_json(rh);
    std::cout << j.dump(2) << "\n";
    if (!out_dir.empty()) write_text(out_dir + "/oracle_rh.json", j.dump(2) + "\n");
    return 0;
}

inline int cmd_report(const std::string& out_dir, int threads, std::uint64_t seed,
                      bool check, const Provenance& prov) {
    AcceptanceOptions opt;
    opt.threads = threads;
    opt.seed = seed;
    AcceptanceReport rep = acceptance::run_acceptance(opt);
    json arr = json::array();
    for (const auto& cr : rep.criteria) {
        std::cout << (cr.pass ? "[PASS] " : "[FAIL] ") << "criterion " << cr.id << ": "
                  << cr.name;
        if (!cr.pass) std::cout << " -- " << cr.note;
        std::cout << "\n";
        json metrics = json::object();
        for (const auto& [k, v] : cr.metrics) metrics[k] = v;
        arr.push_back({{"id", cr.id},
                       {"name", cr.name},
                       {"pass", cr.pass},
                       {"metrics", metrics},
                       {"note", cr.note}});
    }
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        json j{{"provenance", prov.to_json()},
               {"criteria", arr},
               {"all_pass", rep.all_pass()}};
        write_text(out_dir + "/report.json", j.dump(2) + "\n");
        write_text(out_dir + "/shock_scan_ell.csv", scan_rows_csv(rep.shock_scan.rows, prov));
    }
    std::cout << (rep.all_pass() ? "all criteria passed\n" : "some criteria FAILED\n");
    if (check && !rep.all_pass()) return 4;
    return 0;
}

inline int run(int argc, const char* const* argv) {
    CLI::App app{"coarse-graining laboratory for compressible flow"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", data_path, eps_csv;
    int threads = 0;
    std::uint64_t seed = 0;
    bool check = false;
    app.add_option("--config", config_path, "run configuration JSON");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--threads", threads, "worker threads (default: env or 1)");
    app.add_option("--seed", seed, "seed recorded in provenance");

    CLI::App* c_sim = app.add_subcommand("simulate", "run the solver, write snapshots");
    CLI::App* c_ell = app.add_subcommand("scan-ell", "budget terms against filter scale");
    c_ell->add_option("--data", data_path, "snapshot file (default: simulate)");
    CLI::App* c_eps = app.add_subcommand("scan-eps", "viscosity scan with Cauchy checks");
    c_eps->add_option("--eps", eps_csv, "comma-separated eps list")->required();
    CLI::App* c_bes = app.add_subcommand("besov", "structure functions and exponents");
    c_bes->add_option("--data", data_path, "snapshot file (default: simulate)");
    CLI::App* c_orc = app.add_subcommand("oracle", "exact oracles");
    CLI::App* c_orh = c_orc->add_subcommand("rh", "Rankine-Hugoniot jump");
    CLI::App* c_rep = app.add_subcommand("report", "full acceptance battery");
    c_rep->add_flag("--check", check, "exit 4 if any criterion fails");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (threads <= 0) {
        const char* env = std::getenv("ONSAGER_LAB_THREADS");
        threads = env ? std::atoi(env) : 1;
        if (threads <= 0) threads = 1;
    }

    try {
        Provenance prov;
        prov.seed = seed;
        RunConfig rc;
        bool need_config = c_sim->parsed() || c_ell->parsed() || c_eps->parsed() ||
                           c_bes->parsed() || c_orc->parsed();
        if (need_config) {
            if (config_path.empty()) throw ConfigError("--config is required");
            rc = load_run_config(config_path);
            prov.config_hash = rc.config_hash;
            if (out_dir == "out" && !rc.output_dir.empty()) out_dir = rc.output_dir;
        }
        if (c_sim->parsed()) return cmd_simulate(rc, out_dir, prov);
        if (c_ell->parsed()) return cmd_scan_ell(rc, data_path, out_dir, threads, prov);
        if (c_eps->parsed()) {
            std::vector<double> eps_list;
            std::stringstream ss(eps_csv);
            std::string tok;
            while (std::getline(ss, tok, ',')) eps_list.push_back(std::stod(tok));
            return cmd_scan_eps(rc, eps_list, out_dir, threads, prov);
        }
        if (c_bes->parsed()) return cmd_besov(rc, data_path, out_dir, prov);
        if (c_orc->parsed()) {
            if (!c_orh->parsed()) throw ConfigError("oracle requires a subcommand (rh)");
            return cmd_oracle_rh(rc, out_dir);
        }
        if (c_rep->parsed()) return cmd_report(out_dir, threads, seed, check, prov);
        throw ConfigError("no subcommand given");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace onsager::cli
