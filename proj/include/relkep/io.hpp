// Serialization: fixed 17-digit float formatting, JSON documents, CSV exports,
// perturbation configs and custom potential tables.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "relkep/errors.hpp"
#include "relkep/integrator.hpp"
#include "relkep/periodic_finder.hpp"
#include "relkep/perturbation.hpp"
#include "relkep/phase_space.hpp"
#include "relkep/unperturbed.hpp"

namespace relkep {

using Json = nlohmann::ordered_json;

/// 17 significant digits, '.' separator, no locale; "nan", "inf", "-inf" for non-finite values.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

namespace detail {

inline void write_json(std::ostream& os, const Json& j, int indent, int depth) {
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
    switch (j.type()) {
        case Json::value_t::object: {
            if (j.empty()) {
                os << "{}";
                return;
            }
            os << "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) os << ",\n";
                first = false;
                os << pad << Json(it.key()).dump() << ": ";
                write_json(os, it.value(), indent, depth + 1);
            }
            os << "\n" << close_pad << "}";
            return;
        }
        case Json::value_t::array: {
            if (j.empty()) {
                os << "[]";
                return;
            }
            // Arrays of numbers stay on one line.
            bool flat = true;
            for (const auto& e : j) flat = flat && e.is_number();
            if (flat) {
                os << "[";
                for (std::size_t i = 0; i < j.size(); ++i) {
                    if (i) os << ", ";
                    write_json(os, j[i], indent, depth + 1);
                }
                os << "]";
                return;
            }
            os << "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) os << ",\n";
                os << pad;
                write_json(os, j[i], indent, depth + 1);
            }
            os << "\n" << close_pad << "]";
            return;
        }
        case Json::value_t::number_float: {
            const double v = j.get<double>();
            os << (std::isfinite(v) ? format_double(v) : "null");
            return;
        }
        default: os << j.dump(); return;
    }
}

}  // namespace detail

/// Pretty-printed JSON with floats at 17 significant digits and non-finite values as null.
inline std::string to_json_text(const Json& j) {
    std::ostringstream os;
    detail::write_json(os, j, 2, 0);
    os << "\n";
    return os.str();
}

inline Json to_json(const Vec4& z) { return Json::array({z[0], z[1], z[2], z[3]}); }

inline Json to_json(const PhysParams& p) { return Json{{"m", p.m}, {"c", p.c}, {"alpha", p.alpha}}; }

inline Json to_json(const TorusLabel& t) {
    return Json{{"T", t.T}, {"n", t.n}, {"k", t.k}, {"sign", t.sign}, {"h", t.h}, {"L", t.L}, {"r_star", t.r_star}};
}

inline Json to_json(const PerturbationSpec& p) {
    Json j{{"kind", std::string(to_string(p.kind))}, {"amplitude", p.amplitude}, {"period", p.period}};
    if (p.kind == PerturbationKind::CustomTable) j["table_path"] = p.table_path;
    return j;
}

inline Json to_json(const std::vector<Inequality>& checks) {
    Json arr = Json::array();
    for (const auto& c : checks)
        arr.push_back(Json{{"expression", c.expression}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"holds", c.holds}});
    return arr;
}

inline Json to_json(const PeriodicSolution& s) {
    return Json{{"z0", to_json(s.z0.packed())},
                {"residual", s.residual},
                {"verified_residual", s.verified_residual},
                {"winding", s.winding},
                {"crossings", s.crossings},
                {"min_crossing_slope", s.min_crossing_slope},
                {"closeness", s.closeness},
                {"iterations", s.iterations}};
}

/// The result document of one find_periodic call.
inline Json to_json(const FindResult& r) {
    Json sols = Json::array();
    for (const auto& s : r.solutions) sols.push_back(to_json(s));
    Json j{{"torus", to_json(r.torus)},
           {"eps", r.eps},
           {"perturbation", to_json(r.pert)},
           {"solutions", sols},
           {"seeds_tried", r.seeds_tried},
           {"converged", r.converged},
           {"deduplicated", r.deduplicated},
           {"rejected", r.rejected},
           {"near_duplicate_pairs", r.near_duplicate_pairs}};
    if (r.degenerate) j["note"] = "degenerate (unperturbed continuum)";
    return j;
}

/// CSV header and rows t,x1,x2,p1,p2,r,theta_unwrapped,H0,L0 at every integration step.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << "t,x1,x2,p1,p2,r,theta_unwrapped,H0,L0\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const CartesianState s = CartesianState::unpack(traj.states[i]);
        os << format_double(traj.times[i]) << ',' << format_double(s.x[0]) << ',' << format_double(s.x[1]) << ','
           << format_double(s.p[0]) << ',' << format_double(s.p[1]) << ',' << format_double(s.x.norm()) << ','
           << format_double(traj.theta[i]) << ',' << format_double(hamiltonian_h0(s, traj.params)) << ','
           << format_double(angular_momentum(s)) << '\n';
    }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ArgumentError(where + ": cannot parse number '" + s + "'");
    return v;
}

}  // namespace detail

/// Load a custom potential table from CSV with header t,r,theta,U. Rows may come in any order
/// but must cover the full (t, r, theta) grid exactly once.
inline std::shared_ptr<const CustomTable> load_custom_table(const std::string& path, double period) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open custom table '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ArgumentError("custom table '" + path + "' is empty");
    const auto header = detail::split_csv_line(line);
    if (header != std::vector<std::string>{"t", "r", "theta", "U"})
        throw ArgumentError("custom table '" + path + "': header must be t,r,theta,U");
    struct Row {
        double t, r, th, u;
    };
    std::vector<Row> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = detail::split_csv_line(line);
        const std::string where = path + ":" + std::to_string(lineno);
        if (cells.size() != 4) throw ArgumentError(where + ": expected 4 columns");
        rows.push_back({detail::parse_double(cells[0], where), detail::parse_double(cells[1], where),
                        detail::parse_double(cells[2], where), detail::parse_double(cells[3], where)});
    }
    auto unique_sorted = [&](auto key) {
        std::vector<double> v;
        for (const auto& r : rows) v.push_back(key(r));
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    };
    const auto ts = unique_sorted([](const Row& r) { return r.t; });
    const auto rs = unique_sorted([](const Row& r) { return r.r; });
    const auto ths = unique_sorted([](const Row& r) { return r.th; });
    if (rows.size() != ts.size() * rs.size() * ths.size())
        throw ArgumentError("custom table '" + path + "' does not cover a full grid");
    std::vector<double> values(rows.size(), std::numeric_limits<double>::quiet_NaN());
    auto index_of = [](const std::vector<double>& v, double x) {
        return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
    };
    for (const auto& r : rows) {
        const std::size_t idx = (index_of(ts, r.t) * rs.size() + index_of(rs, r.r)) * ths.size() + index_of(ths, r.th);
        if (!std::isnan(values[idx])) throw ArgumentError("custom table '" + path + "' has duplicate grid points");
        values[idx] = r.u;
    }
    return std::make_shared<const CustomTable>(period, ts, rs, ths, std::move(values));
}

/// PerturbationSpec from {kind, amplitude, period, table_path?}; relative table paths are
/// resolved against base_dir.
inline PerturbationSpec perturbation_from_json(const Json& j, const std::filesystem::path& base_dir = {}) {
    if (!j.is_object()) throw ArgumentError("perturbation config must be a JSON object");
    const PerturbationKind kind = perturbation_kind_from_string(j.value("kind", std::string("none")));
    const double amplitude = j.value("amplitude", 1.0);
    PerturbationSpec spec;
    switch (kind) {
        case PerturbationKind::None: spec = PerturbationSpec::none(j.value("period", kTwoPi)); break;
        case PerturbationKind::DipoleCos:
        case PerturbationKind::RadialCos: {
            if (!j.contains("period")) throw ArgumentError("perturbation config needs 'period'");
            const double period = j.at("period").get<double>();
            spec = kind == PerturbationKind::DipoleCos ? PerturbationSpec::dipole_cos(amplitude, period)
                                                       : PerturbationSpec::radial_cos(amplitude, period);
            break;
        }
        case PerturbationKind::CustomTable: {
            if (!j.contains("table_path") || !j.contains("period"))
                throw ArgumentError("custom-table perturbation needs 'table_path' and 'period'");
            std::filesystem::path p = j.at("table_path").get<std::string>();
            const std::string given = p.string();
            if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
            spec = PerturbationSpec::custom(load_custom_table(p.string(), j.at("period").get<double>()), given);
            spec.amplitude = amplitude;
            break;
        }
    }
    spec.validate();
    return spec;
}

}  // namespace relkep
