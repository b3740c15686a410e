#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "relkep/io.hpp"
#include "relkep/relkep.hpp"

using namespace relkep;
namespace fs = std::filesystem;

namespace {

const PhysParams P1{};

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("relkep_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path write(const std::string& name, const std::string& text) const {
        std::ofstream(path / name) << text;
        return path / name;
    }
};

double U_node(double t, double r, double th) { return r * std::cos(th) + 0.5 * std::cos(t); }

/// A 4 x 5 x 8 table over t in [0, 2 pi), r in [0.5, 2.5], theta in [0, 2 pi).
std::string table_text(bool shuffle = false) {
    std::vector<std::string> rows;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 5; ++j)
            for (int l = 0; l < 8; ++l) {
                const double t = kTwoPi * i / 4.0, r = 0.5 + 0.5 * j, th = kTwoPi * l / 8.0;
                rows.push_back(format_double(t) + "," + format_double(r) + "," + format_double(th) + "," +
                               format_double(U_node(t, r, th)));
            }
    if (shuffle) std::reverse(rows.begin(), rows.end());
    std::string out = "t,r,theta,U\n";
    for (const auto& r : rows) out += r + "\n";
    return out;
}

}  // namespace

TEST(FormatDouble, RoundTripsAndIsLocaleFree) {
    auto g = oracle::rng(31);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (int i = 0; i < 2000; ++i) {
        const double v = std::ldexp(u(g), static_cast<int>(u(g)));
        EXPECT_EQ(std::stod(format_double(v)), v);
    }
    EXPECT_EQ(format_double(0.5), "0.5");
    EXPECT_EQ(format_double(-2.0), "-2");
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(format_double(1e-300).find(','), std::string::npos);
    EXPECT_EQ(format_double(std::nan("")), "nan");
    EXPECT_EQ(format_double(INFINITY), "inf");
    EXPECT_EQ(format_double(-INFINITY), "-inf");
}

TEST(JsonText, FixedDigitsAndNullForNonFinite) {
    Json j{{"a", 0.1}, {"b", INFINITY}, {"c", Json::array({1.0, std::nan("")})}, {"d", 3}, {"e", "x"}};
    const std::string s = to_json_text(j);
    EXPECT_NE(s.find("\"a\": 0.10000000000000001"), std::string::npos);
    EXPECT_NE(s.find("\"b\": null"), std::string::npos);
    EXPECT_NE(s.find("[1, null]"), std::string::npos);
    EXPECT_NE(s.find("\"d\": 3"), std::string::npos);
    // Parses back, key order kept.
    const Json back = Json::parse(s);
    EXPECT_EQ(back.begin().key(), "a");
    EXPECT_EQ(back["a"].get<double>(), 0.1);
    EXPECT_TRUE(back["b"].is_null());
    EXPECT_EQ(to_json_text(j), s);
}

TEST(JsonText, ResultDocumentShape) {
    FindResult r;
    r.torus = make_torus(20.0 * oracle::kPi, 1, 2, 1, P1);
    r.eps = 0.0;
    r.pert = PerturbationSpec::dipole_cos(1.0, r.torus.T);
    r.degenerate = true;
    PeriodicSolution s;
    s.z0 = CartesianState{Vec2(1, 2), Vec2(3, 4)};
    s.winding = 2;
    s.crossings = 2;
    r.solutions.push_back(s);
    r.seeds_tried = 1;
    const Json j = Json::parse(to_json_text(to_json(r)));
    for (const char* key : {"torus", "eps", "perturbation", "solutions", "seeds_tried", "converged", "deduplicated"})
        EXPECT_TRUE(j.contains(key)) << key;
    for (const char* key : {"T", "n", "k", "sign", "h", "L", "r_star"}) EXPECT_TRUE(j["torus"].contains(key)) << key;
    for (const char* key : {"z0", "residual", "winding", "crossings", "closeness"})
        EXPECT_TRUE(j["solutions"][0].contains(key)) << key;
    EXPECT_EQ(j["solutions"][0]["z0"][3].get<double>(), 4.0);
    EXPECT_EQ(j["perturbation"]["kind"], "dipole-cos");
    EXPECT_EQ(j["note"], "degenerate (unperturbed continuum)");
}

TEST(TrajectoryCsv, HeaderAndRows) {
    const System sys{P1, 0.0, PerturbationSpec::none()};
    const Trajectory tr = integrate(to_cartesian(PolarState{0.36203, 0.0, 0.0, 1.2}), 0.0, 3.0, sys);
    std::ostringstream os;
    write_trajectory_csv(os, tr);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "t,x1,x2,p1,p2,r,theta_unwrapped,H0,L0");
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        const auto cells = detail::split_csv_line(line);
        ASSERT_EQ(cells.size(), 9u);
        EXPECT_NEAR(std::stod(cells[8]), 1.2, 1e-9);
        ++rows;
    }
    EXPECT_EQ(rows, tr.times.size());
}

TEST(CustomTableIo, LoadsAndInterpolatesNodes) {
    TempDir d;
    for (bool shuffle : {false, true}) {
        const fs::path p = d.write("u.csv", table_text(shuffle));
        const auto table = load_custom_table(p.string(), kTwoPi);
        EXPECT_DOUBLE_EQ(table->r_min(), 0.5);
        EXPECT_DOUBLE_EQ(table->r_max(), 2.5);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 5; ++j)
                for (int l = 0; l < 8; l += 3) {
                    const double t = kTwoPi * i / 4.0, r = 0.5 + 0.5 * j, th = kTwoPi * l / 8.0;
                    EXPECT_NEAR(table->value(t, Vec2(r * std::cos(th), r * std::sin(th))), U_node(t, r, th), 1e-12);
                }
    }
}

TEST(CustomTableIo, Errors) {
    TempDir d;
    EXPECT_THROW(load_custom_table((d.path / "missing.csv").string(), kTwoPi), ArgumentError);
    EXPECT_THROW(load_custom_table(d.write("e.csv", "").string(), kTwoPi), ArgumentError);
    EXPECT_THROW(load_custom_table(d.write("h.csv", "t,r,U\n0,1,2\n").string(), kTwoPi), ArgumentError);
    EXPECT_THROW(load_custom_table(d.write("n.csv", "t,r,theta,U\n0,1,0,abc\n").string(), kTwoPi), ArgumentError);
    EXPECT_THROW(load_custom_table(d.write("c.csv", "t,r,theta,U\n0,1,0\n").string(), kTwoPi), ArgumentError);
    // Drop one row: not a full grid.
    std::string text = table_text();
    text.erase(text.rfind('\n', text.size() - 2) + 1);
    EXPECT_THROW(load_custom_table(d.write("g.csv", text).string(), kTwoPi), ArgumentError);
    // Wrong period for the t nodes.
    EXPECT_THROW(load_custom_table(d.write("p.csv", table_text()).string(), 5.0), DomainError);
}

TEST(PerturbationJson, Kinds) {
    TempDir d;
    d.write("u.csv", table_text());
    const PerturbationSpec a = perturbation_from_json(Json{{"kind", "dipole-cos"}, {"amplitude", 2.0}, {"period", 7.0}});
    EXPECT_EQ(a.kind, PerturbationKind::DipoleCos);
    EXPECT_EQ(a.amplitude, 2.0);
    EXPECT_EQ(a.period, 7.0);
    EXPECT_EQ(perturbation_from_json(Json{{"kind", "none"}}).kind, PerturbationKind::None);
    const PerturbationSpec c =
        perturbation_from_json(Json{{"kind", "custom-table"}, {"period", kTwoPi}, {"table_path", "u.csv"}}, d.path);
    EXPECT_EQ(c.kind, PerturbationKind::CustomTable);
    EXPECT_EQ(c.table_path, "u.csv");
    EXPECT_NEAR(perturbation_value(0.0, Vec2(1.0, 0.0), c), U_node(0.0, 1.0, 0.0), 1e-12);
    EXPECT_THROW(perturbation_from_json(Json{{"kind", "radial-cos"}}), ArgumentError);
    EXPECT_THROW(perturbation_from_json(Json{{"kind", "custom-table"}, {"period", 1.0}}), ArgumentError);
    EXPECT_THROW(perturbation_from_json(Json{{"kind", "bogus"}}), DomainError);
    EXPECT_THROW(perturbation_from_json(Json::array()), ArgumentError);
}

TEST(PerturbationJson, RoundTrip) {
    const PerturbationSpec a = PerturbationSpec::radial_cos(0.25, 3.0);
    const PerturbationSpec b = perturbation_from_json(Json::parse(to_json_text(to_json(a))));
    EXPECT_EQ(b.kind, a.kind);
    EXPECT_EQ(b.amplitude, a.amplitude);
    EXPECT_EQ(b.period, a.period);
}
