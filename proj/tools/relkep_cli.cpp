// relkep: command-line front end.
//
// Exit codes: 0 success, 2 domain / hypothesis / argument error, 3 search ran but found nothing.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "relkep/io.hpp"
#include "relkep/relkep.hpp"

namespace fs = std::filesystem;
using namespace relkep;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 2;
constexpr int kExitEmpty = 3;

struct Globals {
    std::optional<double> m, c, alpha, rel_tol, abs_tol;
    std::string out;
    std::string format = "json";
    int jobs = 1;
    std::string config_path;
};

/// Everything a command needs after merging the config file with command-line flags.
struct RunConfig {
    PhysParams params;
    IntegratorConfig integrator;
    bool tolerances_given = false;
    std::optional<PerturbationSpec> perturbation;
    std::string format = "json";
    std::string out;
    SearchConfig search;
};

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ArgumentError("'" + path + "' is not valid JSON: " + e.what());
    }
}

RunConfig make_run_config(const Globals& g) {
    RunConfig rc;
    fs::path base;
    if (!g.config_path.empty()) {
        const Json cfg = read_json_file(g.config_path);
        base = fs::path(g.config_path).parent_path();
        if (cfg.contains("params")) {
            const Json& p = cfg["params"];
            rc.params.m = p.value("m", rc.params.m);
            rc.params.c = p.value("c", rc.params.c);
            rc.params.alpha = p.value("alpha", rc.params.alpha);
        }
        if (cfg.contains("integrator")) {
            const Json& i = cfg["integrator"];
            if (i.contains("rel_tol") || i.contains("abs_tol")) rc.tolerances_given = true;
            rc.integrator.rel_tol = i.value("rel_tol", rc.integrator.rel_tol);
            rc.integrator.abs_tol = i.value("abs_tol", rc.integrator.abs_tol);
            rc.integrator.max_step = i.value("max_step", rc.integrator.max_step);
            rc.integrator.min_radius_guard = i.value("min_radius_guard", rc.integrator.min_radius_guard);
        }
        if (cfg.contains("perturbation")) rc.perturbation = perturbation_from_json(cfg["perturbation"], base);
        if (cfg.contains("output")) {
            rc.format = cfg["output"].value("format", rc.format);
            rc.out = cfg["output"].value("path", rc.out);
        }
        if (cfg.contains("search")) {
            const Json& s = cfg["search"];
            rc.search.n_omega = s.value("n_omega", rc.search.n_omega);
            rc.search.n_tau = s.value("n_tau", rc.search.n_tau);
            rc.search.max_closeness = s.value("max_closeness", rc.search.max_closeness);
        }
    }
    if (g.m) rc.params.m = *g.m;
    if (g.c) rc.params.c = *g.c;
    if (g.alpha) rc.params.alpha = *g.alpha;
    if (g.rel_tol) rc.integrator.rel_tol = *g.rel_tol, rc.tolerances_given = true;
    if (g.abs_tol) rc.integrator.abs_tol = *g.abs_tol, rc.tolerances_given = true;
    if (!g.out.empty()) rc.out = g.out;
    if (!g.format.empty()) rc.format = g.format;
    if (rc.format != "json" && rc.format != "csv") throw ArgumentError("--format must be json or csv");
    rc.params.validate();
    rc.integrator.validate();
    rc.search.jobs = g.jobs;
    if (rc.tolerances_given) {
        rc.search.shooting.rel_tol = rc.integrator.rel_tol;
        rc.search.shooting.abs_tol = rc.integrator.abs_tol;
        rc.search.verify_rel_tol = std::max(rc.integrator.rel_tol * 0.1, 1e-14);
    }
    rc.search.shooting.max_step = rc.integrator.max_step;
    rc.search.shooting.min_radius_guard = rc.integrator.min_radius_guard;
    return rc;
}

void flatten(const Json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& rows) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it)
            flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), rows);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "[" + std::to_string(i) + "]", rows);
    } else if (j.is_number_float()) {
        rows.emplace_back(prefix, format_double(j.get<double>()));
    } else if (j.is_string()) {
        rows.emplace_back(prefix, j.get<std::string>());
    } else {
        rows.emplace_back(prefix, j.dump());
    }
}

std::string render(const Json& report, const std::string& format) {
    if (format == "json") return to_json_text(report);
    std::vector<std::pair<std::string, std::string>> rows;
    flatten(report, "", rows);
    std::string out = "key,value\n";
    for (const auto& [k, v] : rows) out += k + "," + v + "\n";
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ArgumentError("cannot write '" + path.string() + "'");
    os << text;
}

/// Report to --out if given, stdout otherwise.
void emit(const Json& report, const RunConfig& rc) {
    const std::string text = render(report, rc.format);
    if (rc.out.empty()) std::cout << text;
    else write_text(rc.out, text);
}

std::string trajectory_csv(const Trajectory& traj) {
    std::ostringstream os;
    write_trajectory_csv(os, traj);
    return os.str();
}

Json classification_json(double h, double L, const PhysParams& params) {
    const OrbitClass cls = classify(h, L, params);
    Json j{{"h", h}, {"L", L}, {"params", to_json(params)}, {"class", std::string(to_string(cls.tag))}};
    if (cls.witness) {
        j["witness"] = Json{{"r_star", cls.witness->r_star}, {"r_min", cls.witness->r_min}, {"r_max", cls.witness->r_max}};
    }
    j["conditions"] = to_json(closed_orbit_conditions(h, L, params));
    return j;
}

int cmd_classify(const RunConfig& rc, double h, double L) {
    emit(classification_json(h, L, rc.params), rc);
    return kExitOk;
}

Json actions_json(const Actions& I, const PhysParams& params) {
    const Vec2 g = grad_K0(I, params);
    const Mat2 H = hess_K0(I, params);
    return Json{{"I1", I.I1},
                {"I2", I.I2},
                {"K0", K0(I, params)},
                {"grad_K0", Json::array({g[0], g[1]})},
                {"hess_K0", Json::array({Json::array({H(0, 0), H(0, 1)}), Json::array({H(1, 0), H(1, 1)})})},
                {"det_hess_K0", det_hess_K0(I, params)}};
}

int cmd_torus(const RunConfig& rc, double T, int n, int k, int sign) {
    const TorusLabel tor = make_torus(T, n, k, sign, rc.params);
    const Actions I = actions_from(tor.h, tor.L, rc.params);
    const Vec2 res = T * grad_K0(I, rc.params) / kTwoPi;
    Json j{{"torus", to_json(tor)},
           {"params", to_json(rc.params)},
           {"t_star", t_star(n, rc.params)},
           {"k_star", k_star(T, n, rc.params)},
           {"radial_period", period_radial(tor.h, rc.params)},
           {"actions", actions_json(I, rc.params)},
           {"resonance", Json::array({res[0], res[1]})}};
    emit(j, rc);
    return kExitOk;
}

int cmd_actions(const RunConfig& rc, std::optional<double> h, std::optional<double> L, std::optional<double> I1,
                std::optional<double> I2) {
    Actions I;
    if (h && L) I = actions_from(*h, *L, rc.params);
    else if (I1 && I2) I = Actions{*I1, *I2};
    else throw ArgumentError("actions needs either --h and --L or --I1 and --I2");
    Json j = actions_json(I, rc.params);
    const EnergyMomentum hl = hL_from_actions(I, rc.params);
    j["h"] = hl.h;
    j["L"] = hl.L;
    emit(j, rc);
    return kExitOk;
}

struct OrbitArgs {
    std::optional<double> h, L, T;
    std::optional<int> n, k;
    int sign = 1;
    int samples = 721;
};

int cmd_orbit(const RunConfig& rc, const OrbitArgs& a) {
    const PhysParams& P = rc.params;
    double h = 0.0, L = 0.0;
    int n = 1, k = 1;
    bool commensurable = false;
    if (a.T && a.n && a.k) {
        const TorusLabel tor = make_torus(*a.T, *a.n, *a.k, a.sign, P);
        h = tor.h, L = tor.L, n = *a.n, k = *a.k;
        commensurable = true;
    } else if (a.h && a.n && a.k) {
        h = *a.h, L = a.sign * commensurable_L(*a.n, *a.k, P), n = *a.n, k = *a.k;
        commensurable = true;
    } else if (a.h && a.L) {
        h = *a.h, L = *a.L;
    } else {
        throw ArgumentError("orbit needs --h with --L, --h with --n --k, or --T --n --k");
    }
    if (a.samples < 2) throw ArgumentError("--samples must be at least 2");

    const OrbitClass cls = classify(h, L, P);
    if (cls.tag != OrbitTag::ClosedNonCircular && cls.tag != OrbitTag::Circular) {
        throw InvalidRegimeError("orbit: (h, L) is not in the closed-orbit regime (" +
                                     std::string(to_string(cls.tag)) + ")",
                                 closed_orbit_conditions(h, L, P));
    }
    const PolarOrbit po = polar_orbit(h, L, 0.0, P);
    const double Th = period_radial(h, P);
    const double span_theta = commensurable ? kTwoPi * k : kTwoPi / po.frequency;
    const double span_t = commensurable ? n * Th : Th;

    std::ostringstream rho_csv;
    rho_csv << "theta,rho\n";
    for (int i = 0; i < a.samples; ++i) {
        const double th = span_theta * i / (a.samples - 1);
        rho_csv << format_double(th) << ',' << format_double(po(th)) << '\n';
    }

    const double r0 = cls.tag == OrbitTag::Circular ? cls.witness->r_star : radial_bounds(h, L, P).r_min;
    const CartesianState z0 = to_cartesian(PolarState{r0, 0.0, 0.0, L});
    const Trajectory traj = integrate(z0, 0.0, span_t, System{P, 0.0, PerturbationSpec::none()}, rc.integrator);
    double gap = 0.0;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double r = traj.states[i].head<2>().norm();
        // The closed-form curve is even in theta; clockwise orbits sweep it backwards.
        gap = std::max(gap, std::abs(r - po(std::abs(traj.theta[i]))));
    }

    Json j{{"h", h},
           {"L", L},
           {"params", to_json(P)},
           {"class", std::string(to_string(cls.tag))},
           {"rho", Json{{"amplitude", po.amplitude}, {"offset", po.offset}, {"frequency", po.frequency}}},
           {"radial_period", Th},
           {"time_span", span_t},
           {"theta_span", span_theta},
           {"sup_gap_integrated_vs_closed_form", gap}};
    if (commensurable) {
        j["n"] = n;
        j["k"] = k;
        const double rs = r_star(h, L, P);
        const CrossingReport cr = count_crossings(traj, rs);
        j["r_star"] = rs;
        j["crossings"] = cr.count;
        j["winding_turns"] = winding_turns(traj);
    }
    if (rc.out.empty()) {
        std::cout << render(j, rc.format);
    } else {
        const fs::path dir(rc.out);
        write_text(dir / "orbit_rho.csv", rho_csv.str());
        write_text(dir / "trajectory.csv", trajectory_csv(traj));
        write_text(dir / (rc.format == "json" ? "orbit.json" : "orbit.csv"), render(j, rc.format));
    }
    return kExitOk;
}

PerturbationSpec perturbation_or_default(const RunConfig& rc, const std::string& kind, std::optional<double> amplitude,
                                         double T) {
    if (!kind.empty()) {
        Json j{{"kind", kind}, {"amplitude", amplitude.value_or(1.0)}, {"period", T}};
        if (kind == "custom-table") throw ArgumentError("custom-table perturbations must come from --config");
        return perturbation_from_json(j);
    }
    if (rc.perturbation) {
        PerturbationSpec p = *rc.perturbation;
        if (amplitude) p.amplitude = *amplitude;
        return p;
    }
    return PerturbationSpec::dipole_cos(amplitude.value_or(1.0), T);
}

struct FindArgs {
    double T = 0.0;
    int n = 1, k = 2, sign = 1;
    double eps = 0.0;
    std::string kind;
    std::optional<double> amplitude;
    std::optional<int> n_omega, n_tau;
    std::optional<double> max_closeness;
};

SearchConfig search_config(const RunConfig& rc, const FindArgs& a) {
    SearchConfig cfg = rc.search;
    if (a.n_omega) cfg.n_omega = *a.n_omega;
    if (a.n_tau) cfg.n_tau = *a.n_tau;
    if (a.max_closeness) cfg.max_closeness = *a.max_closeness;
    return cfg;
}

int cmd_find_periodic(const RunConfig& rc, const FindArgs& a) {
    const PerturbationSpec pert = perturbation_or_default(rc, a.kind, a.amplitude, a.T);
    const FindResult res = find_periodic(a.T, a.n, a.k, a.sign, a.eps, pert, rc.params, search_config(rc, a));
    Json j = to_json(res);
    j["params"] = to_json(rc.params);
    if (rc.out.empty()) {
        std::cout << to_json_text(j);
    } else {
        const fs::path dir(rc.out);
        write_text(dir / "result.json", to_json_text(j));
        for (std::size_t i = 0; i < res.solutions.size(); ++i) {
            char name[64];
            std::snprintf(name, sizeof name, "solution_%03zu.csv", i);
            write_text(dir / name, trajectory_csv(res.solutions[i].trajectory));
        }
    }
    std::cerr << res.solutions.size() << " verified solution(s)"
              << (res.degenerate ? " [degenerate (unperturbed continuum)]" : "") << "\n";
    return res.solutions.empty() ? kExitEmpty : kExitOk;
}

int cmd_sweep(const RunConfig& rc, const std::string& spec_path) {
    const Json spec = read_json_file(spec_path);
    const double T = spec.at("T").get<double>();
    RunConfig local = rc;
    if (spec.contains("perturbation"))
        local.perturbation = perturbation_from_json(spec["perturbation"], fs::path(spec_path).parent_path());
    FindArgs base;
    base.T = T;
    if (spec.contains("n_omega")) base.n_omega = spec["n_omega"].get<int>();
    if (spec.contains("n_tau")) base.n_tau = spec["n_tau"].get<int>();
    if (spec.contains("max_closeness")) base.max_closeness = spec["max_closeness"].get<double>();
    const PerturbationSpec pert = perturbation_or_default(local, "", std::nullopt, T);
    const Json grid = spec.value("grid", Json::object());
    auto list = [&](const char* key, Json fallback) { return grid.value(key, fallback); };
    const Json ns = list("n", Json::array()), ks = list("k", Json::array());
    const Json signs = list("sign", Json::array({1, -1})), epss = list("eps", Json::array());

    std::ostringstream csv;
    csv << "n,k,sign,eps,found,min_residual,max_closeness,status\n";
    for (const auto& n : ns)
        for (const auto& k : ks)
            for (const auto& sign : signs)
                for (const auto& eps : epss) {
                    FindArgs a = base;
                    a.n = n.get<int>();
                    a.k = k.get<int>();
                    a.sign = sign.get<int>();
                    a.eps = eps.get<double>();
                    std::string status = "ok";
                    std::size_t found = 0;
                    double min_res = std::numeric_limits<double>::quiet_NaN();
                    double max_close = std::numeric_limits<double>::quiet_NaN();
                    try {
                        const FindResult res =
                            find_periodic(a.T, a.n, a.k, a.sign, a.eps, pert, local.params, search_config(local, a));
                        found = res.solutions.size();
                        for (const auto& s : res.solutions) {
                            min_res = std::isnan(min_res) ? s.residual : std::min(min_res, s.residual);
                            max_close = std::isnan(max_close) ? s.closeness : std::max(max_close, s.closeness);
                        }
                        if (found == 0) status = "empty";
                    } catch (const HypothesisError& e) {
                        status = "hypothesis: " + e.condition();
                    } catch (const std::exception& e) {
                        status = std::string("error: ") + e.what();
                    }
                    for (char& ch : status)
                        if (ch == ',' || ch == '\n') ch = ';';
                    csv << a.n << ',' << a.k << ',' << a.sign << ',' << format_double(a.eps) << ',' << found << ','
                        << format_double(min_res) << ',' << format_double(max_close) << ',' << status << '\n';
                }
    if (rc.out.empty()) std::cout << csv.str();
    else write_text(rc.out, csv.str());
    return kExitOk;
}

int report_error(const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Relativistic Kepler problem: orbit classification, periods, action variables and\n"
                 "T-periodic solutions of the time-periodically perturbed problem."};
    app.require_subcommand(1);
    // "-h" would collide with the energy option --h.
    app.set_help_flag("--help", "print this help message and exit");
    // global flags are accepted after the subcommand too
    app.fallthrough();
    Globals g;
    auto* gopts = &app;
    gopts->add_option("--m", g.m, "mass m > 0 (default 1)");
    gopts->add_option("--c", g.c, "speed of light c > 0 (default 1)");
    gopts->add_option("--alpha", g.alpha, "coupling alpha > 0 (default 1)");
    gopts->add_option("--rel-tol", g.rel_tol, "integrator relative tolerance (default 1e-10; shooting 1e-12)");
    gopts->add_option("--abs-tol", g.abs_tol, "integrator absolute tolerance (default 1e-12; shooting 1e-14)");
    gopts->add_option("--out", g.out, "output file (reports, sweep) or directory (orbit, find-periodic)");
    gopts->add_option("--format", g.format, "report format: json or csv")->check(CLI::IsMember({"json", "csv"}));
    gopts->add_option("--jobs", g.jobs, "worker threads for shooting")->check(CLI::PositiveNumber);
    gopts->add_option("--config", g.config_path,
                      "JSON config {params:{m,c,alpha}, integrator:{rel_tol,abs_tol,max_step,min_radius_guard}, "
                      "perturbation:{kind,amplitude,period,table_path}, output:{format,path}, "
                      "search:{n_omega,n_tau,max_closeness}}");

    double h = 0.0, L = 0.0;
    auto* classify_cmd = app.add_subcommand(
        "classify", "Classify (h, L): ClosedNonCircular iff 0 < h < mc^2 and alpha^2/c^2 < L^2 < "
                    "alpha^2 m^2 c^2/(m^2 c^4 - h^2); reports r* = (alpha^2 - L^2 c^2)/(-alpha h) and r_m, r_M");
    classify_cmd->add_option("--h", h, "energy")->required();
    classify_cmd->add_option("--L", L, "angular momentum")->required();

    double T = 0.0;
    int n = 1, k = 2, sign = 1;
    auto* torus_cmd = app.add_subcommand(
        "torus", "Resonant torus of period T: h_{T,n} with n T_h = T, L_{n,k} = (alpha/c)/sqrt(1 - n^2/k^2), "
                 "k* = floor(mc^2 n/h) + 1, r*, actions, T grad K0/(2 pi) and det hess K0. Needs "
                 "T > 2 pi n alpha/(m c^3), gcd(n,k) = 1, k >= k*");
    torus_cmd->add_option("--T", T, "period")->required();
    torus_cmd->add_option("--n", n, "radial periods per T")->required();
    torus_cmd->add_option("--k", k, "winding number")->required();
    torus_cmd->add_option("--sign", sign, "orientation +1 or -1")->check(CLI::IsMember({1, -1}));

    OrbitArgs oa;
    auto* orbit_cmd = app.add_subcommand(
        "orbit", "Polar orbit rho(theta) = 1/(A cos(nu (theta - theta0)) + alpha h/(c^2 L^2 - alpha^2)) and the "
                 "integrated trajectory from pericenter; writes orbit_rho.csv, trajectory.csv and a summary");
    orbit_cmd->add_option("--h", oa.h, "energy");
    orbit_cmd->add_option("--L", oa.L, "angular momentum");
    orbit_cmd->add_option("--T", oa.T, "period of a resonant torus (with --n --k)");
    orbit_cmd->add_option("--n", oa.n, "radial periods");
    orbit_cmd->add_option("--k", oa.k, "winding number");
    orbit_cmd->add_option("--sign", oa.sign, "orientation +1 or -1")->check(CLI::IsMember({1, -1}));
    orbit_cmd->add_option("--samples", oa.samples, "theta samples of rho");

    std::optional<double> ah, aL, aI1, aI2;
    auto* actions_cmd = app.add_subcommand(
        "actions", "Actions I1 = A(h,L)/(2 pi) + L, I2 = L and K0(I) = mc^2 S/sqrt(S^2 + alpha^2/c^2) with its "
                   "gradient, Hessian and Hessian determinant");
    actions_cmd->add_option("--h", ah, "energy");
    actions_cmd->add_option("--L", aL, "angular momentum");
    actions_cmd->add_option("--I1", aI1, "first action");
    actions_cmd->add_option("--I2", aI2, "second action");

    FindArgs fa;
    auto* find_cmd = app.add_subcommand(
        "find-periodic", "Newton shooting for T-periodic solutions of the perturbed problem near the (T, n, k, sign) "
                         "torus; writes result.json and solution_NNN.csv. Exit 3 when none is found");
    find_cmd->add_option("--T", fa.T, "period")->required();
    find_cmd->add_option("--n", fa.n, "radial periods per T")->required();
    find_cmd->add_option("--k", fa.k, "winding number")->required();
    find_cmd->add_option("--sign", fa.sign, "orientation +1 or -1")->check(CLI::IsMember({1, -1}));
    find_cmd->add_option("--eps", fa.eps, "perturbation strength >= 0")->required();
    find_cmd->add_option("--kind", fa.kind, "none, dipole-cos or radial-cos (default: config, else dipole-cos)");
    find_cmd->add_option("--amplitude", fa.amplitude, "perturbation amplitude A (default 1)");
    find_cmd->add_option("--n-omega", fa.n_omega, "seed rotations (default 12)")->check(CLI::PositiveNumber);
    find_cmd->add_option("--n-tau", fa.n_tau, "seed time shifts (default 12)")->check(CLI::PositiveNumber);
    find_cmd->add_option("--max-closeness", fa.max_closeness, "closeness bound for verification (default 0.5)");

    std::string sweep_spec;
    auto* sweep_cmd = app.add_subcommand(
        "sweep", "Run find-periodic over a grid from a JSON spec {T, perturbation?, n_omega?, n_tau?, "
                 "grid:{n:[], k:[], sign:[], eps:[]}}; writes n,k,sign,eps,found,min_residual,max_closeness,status");
    sweep_cmd->add_option("spec", sweep_spec, "sweep spec file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitDomain;
    }

    try {
        const RunConfig rc = make_run_config(g);
        if (*classify_cmd) return cmd_classify(rc, h, L);
        if (*torus_cmd) return cmd_torus(rc, T, n, k, sign);
        if (*orbit_cmd) return cmd_orbit(rc, oa);
        if (*actions_cmd) return cmd_actions(rc, ah, aL, aI1, aI2);
        if (*find_cmd) return cmd_find_periodic(rc, fa);
        if (*sweep_cmd) return cmd_sweep(rc, sweep_spec);
    } catch (const HypothesisError& e) {
        return report_error(e);
    } catch (const InvalidRegimeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        for (const auto& c : e.checks())
            std::cerr << "  " << (c.holds ? "holds:    " : "violated: ") << c.expression << " (" << format_double(c.lhs)
                      << " vs " << format_double(c.rhs) << ")\n";
        return kExitDomain;
    } catch (const std::exception& e) {
        return report_error(e);
    }
    return kExitDomain;
}
