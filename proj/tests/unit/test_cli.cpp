// Runs the relkep binary as a subprocess and checks its reports, files and exit codes.
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct CliRun {
    int code = -1;
    std::string out, err;
};

fs::path scratch() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    fs::path p = fs::temp_directory_path() / (std::string("relkep_cli_") + info->test_suite_name() + "_" + info->name());
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

CliRun relkep(const std::string& args) {
    const fs::path dir = scratch();
    fs::create_directories(dir);
    const fs::path o = dir / "stdout.txt", e = dir / "stderr.txt";
    const std::string cmd = std::string("\"") + RELKEP_CLI_PATH + "\" " + args + " >\"" + o.string() + "\" 2>\"" +
                            e.string() + "\"";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
}

class Cli : public ::testing::Test {
protected:
    fs::path dir;
    void SetUp() override {
        dir = scratch();
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    std::string q(const fs::path& p) const { return "\"" + p.string() + "\""; }
};

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream is(line);
        while (std::getline(is, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

const char* kT20pi = "62.831853071795862";

}  // namespace

TEST_F(Cli, HelpListsSubcommands) {
    const CliRun r = relkep("--help");
    EXPECT_EQ(r.code, 0);
    for (const char* s : {"classify", "torus", "orbit", "actions", "find-periodic", "sweep", "--rel-tol", "--jobs",
                          "--config", "--format", "--out"})
        EXPECT_NE(r.out.find(s), std::string::npos) << s;
    EXPECT_EQ(r.out.find("Eq."), std::string::npos);
}

TEST_F(Cli, ParseErrorsExitTwo) {
    EXPECT_EQ(relkep("").code, 2);
    EXPECT_EQ(relkep("classify --h 0.7").code, 2);
    EXPECT_EQ(relkep("classify --h abc --L 1").code, 2);
    EXPECT_EQ(relkep("frobnicate").code, 2);
    EXPECT_EQ(relkep("--format xml classify --h 0.7 --L 1.2").code, 2);
}

TEST_F(Cli, ClassifyReferenceOrbit) {
    const CliRun r = relkep("classify --h 0.7 --L 1.2");
    ASSERT_EQ(r.code, 0) << r.err;
    const Json j = Json::parse(r.out);
    EXPECT_EQ(j["class"], "ClosedNonCircular");
    EXPECT_NEAR(j["witness"]["r_star"].get<double>(), 0.628571, 1e-6);
    EXPECT_NEAR(j["witness"]["r_min"].get<double>(), 0.36203, 1e-5);
    EXPECT_NEAR(j["witness"]["r_max"].get<double>(), 2.38307, 1e-5);
    ASSERT_EQ(j["conditions"].size(), 4u);
    for (const auto& c : j["conditions"]) EXPECT_TRUE(c["holds"].get<bool>());
}

TEST_F(Cli, ClassifyOtherRegimes) {
    CliRun r = relkep("classify --h 0 --L 1");
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(Json::parse(r.out)["class"], "NoMotion");
    r = relkep("classify --h 1.5 --L 2");
    ASSERT_EQ(r.code, 0);
    const Json j = Json::parse(r.out);
    EXPECT_EQ(j["class"], "NoClosedOrbit");
    EXPECT_FALSE(j.contains("witness"));
    EXPECT_FALSE(j["conditions"][1]["holds"].get<bool>());
    EXPECT_EQ(relkep("--m -1 classify --h 0.7 --L 1.2").code, 2);
}

TEST_F(Cli, CsvFormatAndOutFile) {
    const fs::path f = dir / "c.csv";
    const CliRun r = relkep("classify --h 0.7 --L 1.2 --format csv --out " + q(f));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(r.out.empty());
    const auto rows = read_csv(f);
    ASSERT_FALSE(rows.empty());
    EXPECT_EQ(rows[0], (std::vector<std::string>{"key", "value"}));
    bool seen = false;
    for (const auto& row : rows)
        if (row[0] == "witness.r_star") {
            seen = true;
            EXPECT_NEAR(std::stod(row[1]), 0.628571, 1e-6);
        }
    EXPECT_TRUE(seen);
}

TEST_F(Cli, ConfigFileSetsParameters) {
    const fs::path cfg = dir / "cfg.json";
    std::ofstream(cfg) << R"({"params": {"m": 2, "c": 1, "alpha": 5}})";
    const CliRun r = relkep("--config " + q(cfg) + " torus --T 100 --n 3 --k 5");
    ASSERT_EQ(r.code, 0) << r.err;
    const Json j = Json::parse(r.out);
    EXPECT_EQ(j["params"]["m"].get<double>(), 2.0);
    // t*_3 = 2 pi n alpha / (m c^3) = 15 pi
    EXPECT_NEAR(j["t_star"].get<double>(), 15.0 * M_PI, 1e-12);
    // Command-line flags override the file.
    const CliRun o = relkep("--config " + q(cfg) + " --alpha 1 classify --h 0.7 --L 1.2");
    EXPECT_EQ(Json::parse(o.out)["params"]["alpha"].get<double>(), 1.0);
    std::ofstream(dir / "bad.json") << "{not json";
    EXPECT_EQ(relkep("--config " + q(dir / "bad.json") + " classify --h 0.7 --L 1.2").code, 2);
}

TEST_F(Cli, TorusReport) {
    const CliRun r = relkep("torus --T 62.8319 --n 1 --k 2");
    ASSERT_EQ(r.code, 0) << r.err;
    const Json j = Json::parse(r.out);
    EXPECT_NEAR(j["torus"]["h"].get<double>(), 0.885752, 1e-6);
    EXPECT_EQ(j["k_star"].get<int>(), 2);
    EXPECT_NEAR(j["resonance"][0].get<double>(), 1.0, 1e-8);
    EXPECT_NEAR(j["resonance"][1].get<double>(), 1.0, 1e-8);
    EXPECT_GT(j["actions"]["det_hess_K0"].get<double>(), 0.0);
    EXPECT_NEAR(j["torus"]["L"].get<double>(), 2.0 / std::sqrt(3.0), 1e-12);
}

TEST_F(Cli, TorusHypothesisGates) {
    CliRun r = relkep("torus --T 6.0 --n 1 --k 2");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("T > T*_n"), std::string::npos) << r.err;
    r = relkep("torus --T 62.8319 --n 2 --k 4");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("gcd(n,k) = 1"), std::string::npos) << r.err;
    r = relkep("torus --T 62.8319 --n 1 --k 2 --sign 0");
    EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, ActionsBothWays) {
    CliRun r = relkep("actions --h 0.7 --L 1.2");
    ASSERT_EQ(r.code, 0) << r.err;
    Json j = Json::parse(r.out);
    EXPECT_NEAR(j["I1"].get<double>(), 1.516871, 1e-6);
    EXPECT_NEAR(j["grad_K0"][0].get<double>(), 0.364213, 1e-6);
    EXPECT_NEAR(j["det_hess_K0"].get<double>(), 0.681610, 1e-6);
    r = relkep("actions --I1 " + std::to_string(j["I1"].get<double>()) + " --I2 1.2");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(Json::parse(r.out)["h"].get<double>(), 0.7, 1e-6);
    EXPECT_EQ(relkep("actions --h 0.7").code, 2);
    EXPECT_EQ(relkep("actions --I1 1 --I2 0.5").code, 2);
}

TEST_F(Cli, OrbitFilesReproduceTheClosedForm) {
    const CliRun r = relkep("orbit --h 0.7 --n 1 --k 2 --out " + q(dir));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rho = read_csv(dir / "orbit_rho.csv");
    ASSERT_EQ(rho[0], (std::vector<std::string>{"theta", "rho"}));
    ASSERT_EQ(rho.size(), 722u);
    for (std::size_t i = 1; i < rho.size(); ++i) {
        const double th = std::stod(rho[i][0]);
        EXPECT_NEAR(std::stod(rho[i][1]), 1.0 / (1.69706 * std::cos(th / 2.0) + 2.1), 1e-4) << th;
    }
    EXPECT_NEAR(std::stod(rho.back()[0]), 4.0 * M_PI, 1e-12);
    const Json j = Json::parse(slurp(dir / "orbit.json"));
    EXPECT_LT(j["sup_gap_integrated_vs_closed_form"].get<double>(), 1e-5);
    EXPECT_EQ(j["crossings"].get<int>(), 2);
    EXPECT_NEAR(j["winding_turns"].get<double>(), 2.0, 1e-6);
    EXPECT_NEAR(j["r_star"].get<double>(), 0.47619, 1e-5);
    const auto traj = read_csv(dir / "trajectory.csv");
    EXPECT_EQ(traj[0][0], "t");
    EXPECT_GT(traj.size(), 10u);
}

TEST_F(Cli, OrbitCircularIsConstant) {
    // L^2 = 1/0.51 at h = 0.7 is the circular orbit.
    const CliRun r = relkep("orbit --h 0.7 --L 1.4002800840280099 --samples 50 --out " + q(dir));
    ASSERT_EQ(r.code, 0) << r.err;
    const Json j = Json::parse(slurp(dir / "orbit.json"));
    EXPECT_EQ(j["class"], "Circular");
    const auto rho = read_csv(dir / "orbit_rho.csv");
    ASSERT_EQ(rho.size(), 51u);
    const double r0 = std::stod(rho[1][1]);
    for (std::size_t i = 1; i < rho.size(); ++i) EXPECT_NEAR(std::stod(rho[i][1]), r0, 1e-9);
    // the critical radius (L^2 c^2 - alpha^2)/(alpha h)
    EXPECT_NEAR(r0, (1.0 / 0.51 - 1.0) / 0.7, 1e-9);
    EXPECT_LT(j["sup_gap_integrated_vs_closed_form"].get<double>(), 1e-6);
}

TEST_F(Cli, OrbitRegimeErrorNamesTheViolation) {
    const CliRun r = relkep("orbit --h 1.5 --L 2");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("violated:"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("h < m c^2"), std::string::npos) << r.err;
}

TEST_F(Cli, FindPeriodicDegenerate) {
    const CliRun r =
        relkep(std::string("find-periodic --T ") + kT20pi + " --n 1 --k 2 --eps 0 --n-omega 2 --n-tau 2 --out " + q(dir));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("4 verified solution(s)"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("degenerate (unperturbed continuum)"), std::string::npos);
    const Json j = Json::parse(slurp(dir / "result.json"));
    EXPECT_EQ(j["solutions"].size(), 4u);
    EXPECT_EQ(j["seeds_tried"].get<int>(), 4);
    EXPECT_EQ(j["note"], "degenerate (unperturbed continuum)");
    for (int i = 0; i < 4; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "solution_%03d.csv", i);
        EXPECT_TRUE(fs::exists(dir / name)) << name;
    }
}

TEST_F(Cli, FindPeriodicEmptyExitsThree) {
    const CliRun r = relkep(std::string("find-periodic --T ") + kT20pi +
                         " --n 1 --k 2 --eps 1e-3 --n-omega 1 --n-tau 1 --max-closeness 1e-9");
    EXPECT_EQ(r.code, 3) << r.err;
    const Json j = Json::parse(r.out);
    EXPECT_TRUE(j["solutions"].empty());
    EXPECT_NE(r.err.find("0 verified solution(s)"), std::string::npos);
}

TEST_F(Cli, FindPeriodicGates) {
    CliRun r = relkep(std::string("find-periodic --T ") + kT20pi + " --n 1 --k 1 --eps 1e-3");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("k >= k*_{T,n}"), std::string::npos) << r.err;
    r = relkep(std::string("find-periodic --T ") + kT20pi + " --n 1 --k 2 --eps 1e-3 --kind custom-table");
    EXPECT_EQ(r.code, 2);
    r = relkep(std::string("find-periodic --T ") + kT20pi + " --n 1 --k 2 --eps -1");
    EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, SweepEmptyGrid) {
    const fs::path spec = dir / "s.json";
    std::ofstream(spec) << R"({"T": 62.831853071795862, "grid": {"n": [], "k": [2], "eps": [0.001]}})";
    const CliRun r = relkep("sweep " + q(spec));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "n,k,sign,eps,found,min_residual,max_closeness,status\n");
}

TEST_F(Cli, SweepMatchesSingleRunsAndClosenessGrowsWithEps) {
    const fs::path spec = dir / "s.json";
    std::ofstream(spec) << R"({"T": 62.831853071795862, "n_omega": 2, "n_tau": 2,
        "grid": {"n": [1], "k": [2, 4], "sign": [1], "eps": [0.0001, 0.001]}})";
    const CliRun r = relkep("sweep " + q(spec) + " --out " + q(dir / "sweep.csv"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = read_csv(dir / "sweep.csv");
    ASSERT_EQ(rows.size(), 5u);
    // (1, 2) cells
    const auto& lo = rows[1];
    const auto& hi = rows[2];
    ASSERT_EQ(lo[7], "ok");
    ASSERT_EQ(hi[7], "ok");
    EXPECT_LT(std::stod(lo[6]), std::stod(hi[6]));
    // (1, 4): k* = 2 here so this one runs too; the status column is always filled.
    EXPECT_FALSE(rows[3][7].empty());
    // Single-run consistency for the eps = 1e-3 cell.
    const CliRun s = relkep(std::string("find-periodic --T ") + kT20pi + " --n 1 --k 2 --eps 0.001 --n-omega 2 --n-tau 2");
    ASSERT_EQ(s.code, 0) << s.err;
    const Json j = Json::parse(s.out);
    ASSERT_EQ(std::to_string(j["solutions"].size()), hi[4]);
    double min_res = INFINITY, max_close = 0.0;
    for (const auto& sol : j["solutions"]) {
        min_res = std::min(min_res, sol["residual"].get<double>());
        max_close = std::max(max_close, sol["closeness"].get<double>());
    }
    EXPECT_EQ(min_res, std::stod(hi[5]));
    EXPECT_EQ(max_close, std::stod(hi[6]));
}

TEST_F(Cli, SweepRecordsPerCellFailures) {
    const fs::path spec = dir / "s.json";
    std::ofstream(spec) << R"({"T": 62.831853071795862, "grid": {"n": [2], "k": [4], "sign": [1], "eps": [0.001]}})";
    const CliRun r = relkep("sweep " + q(spec));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("2,4,1,0.001,0,nan,nan,hypothesis: gcd(n;k) = 1"), std::string::npos) << r.out;
}

TEST_F(Cli, OutputsAreByteIdentical) {
    for (const char* sub : {"a", "b"}) {
        const CliRun r = relkep("orbit --T 62.8319 --n 2 --k 3 --out " + q(dir / sub));
        ASSERT_EQ(r.code, 0) << r.err;
    }
    for (const char* f : {"orbit_rho.csv", "trajectory.csv", "orbit.json"})
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    const std::string args = std::string("find-periodic --T ") + kT20pi + " --n 1 --k 2 --eps 1e-3 --n-omega 2 --n-tau 2";
    const CliRun one = relkep(args + " --jobs 1 --out " + q(dir / "j1"));
    const CliRun two = relkep(args + " --jobs 2 --out " + q(dir / "j2"));
    ASSERT_EQ(one.code, 0) << one.err;
    ASSERT_EQ(two.code, 0) << two.err;
    for (const auto& e : fs::directory_iterator(dir / "j1"))
        EXPECT_EQ(slurp(e.path()), slurp(dir / "j2" / e.path().filename())) << e.path().filename();
}
