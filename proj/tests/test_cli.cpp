#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = std::string(TTMEP_CLI_PATH) + " " + args + " 2>&1";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    while (std::size_t got = std::fread(buf, 1, sizeof buf, p)) r.out.append(buf, got);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
protected:
    fs::path dir;
    void SetUp() override {
        dir = fs::temp_directory_path() / ("ttmep_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    std::string at(const std::string& name) const { return (dir / name).string(); }
    void generate(const std::string& name, int m, int n, int seed, double shift = 0.0) {
        const auto r = run("generate --m " + std::to_string(m) + " --n " + std::to_string(n) + " --seed " +
                           std::to_string(seed) + " --shift " + std::to_string(shift) + " --out " + at(name));
        ASSERT_EQ(r.code, 0) << r.out;
    }
};

} // namespace

TEST_F(Cli, GenerateIsDeterministic) {
    generate("a.json", 3, 4, 11);
    generate("b.json", 3, 4, 11);
    EXPECT_EQ(slurp(at("a.json")), slurp(at("b.json")));
    generate("c.json", 3, 4, 12);
    EXPECT_NE(slurp(at("a.json")), slurp(at("c.json")));
}

TEST_F(Cli, SolveWritesReportCsvAndSidecar) {
    generate("p.json", 2, 4, 5, 10.0);
    const auto r = run("solve " + at("p.json") + " --b 2 --sweeps 100 --seed 1 --out " + at("run"));
    ASSERT_EQ(r.code, 0) << r.out;
    const auto rep = nlohmann::json::parse(slurp(at("run.json")));
    EXPECT_EQ(rep["config"]["sweeps"], 100);
    EXPECT_EQ(rep["config"]["b"], 2);
    const std::string csv = slurp(at("run.csv"));
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), rep["tuples"].size() + 1);
    EXPECT_TRUE(fs::exists(at("run.vectors.bin")));
}

TEST_F(Cli, EmptyRunExitsZeroWithWarning) {
    generate("p.json", 2, 3, 6);
    const auto r = run("solve " + at("p.json") + " --b 1 --sweeps 0 --out " + at("run"));
    ASSERT_EQ(r.code, 0) << r.out;
    const auto rep = nlohmann::json::parse(slurp(at("run.json")));
    EXPECT_TRUE(rep["tuples"].empty());
    EXPECT_FALSE(rep["warnings"].empty());
}

TEST_F(Cli, SolveIsDeterministicApartFromTimings) {
    generate("p.json", 2, 4, 7);
    ASSERT_EQ(run("solve " + at("p.json") + " --b 2 --sweeps 3 --seed 4 --out " + at("x")).code, 0);
    ASSERT_EQ(run("solve " + at("p.json") + " --b 2 --sweeps 3 --seed 4 --out " + at("y")).code, 0);
    auto strip = [](nlohmann::json j) {
        j.erase("timings");
        j.erase("vectors_file");
        for (auto& s : j["steps"]) {
            s.erase("wall_ms");
            s.erase("phases");
        }
        return j.dump();
    };
    EXPECT_EQ(strip(nlohmann::json::parse(slurp(at("x.json")))), strip(nlohmann::json::parse(slurp(at("y.json")))));
    EXPECT_EQ(slurp(at("x.csv")), slurp(at("y.csv")));
    EXPECT_EQ(slurp(at("x.vectors.bin")), slurp(at("y.vectors.bin")));
}

TEST_F(Cli, OracleAndCompare) {
    generate("p.json", 2, 4, 8, 10.0);
    const auto o = run("oracle " + at("p.json") + " --count 16 --out " + at("o.csv"));
    ASSERT_EQ(o.code, 0) << o.out;
    EXPECT_NE(o.out.find("skipped singular"), std::string::npos);
    ASSERT_EQ(run("oracle " + at("p.json") + " --count 16 --out " + at("o2.csv")).code, 0);
    EXPECT_EQ(slurp(at("o.csv")), slurp(at("o2.csv")));

    ASSERT_EQ(run("solve " + at("p.json") + " --b 2 --sweeps 10 --seed 2 --out " + at("run")).code, 0);
    const auto c = run("compare " + at("run.json") + " " + at("o.csv") + " --out " + at("match.csv"));
    ASSERT_EQ(c.code, 0) << c.out;
    const auto summary = nlohmann::json::parse(c.out);
    EXPECT_EQ(summary["spurious"], 0);
    EXPECT_EQ(summary["wanted_considered"], 16);
    const std::string table = slurp(at("match.csv"));
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 17);
}

TEST_F(Cli, OracleCapRefusal) {
    generate("p.json", 2, 4, 9);
    const auto r = run("oracle " + at("p.json") + " --cap 10 --out " + at("o.csv"));
    EXPECT_EQ(r.code, 4) << r.out;
    EXPECT_NE(r.out.find("16"), std::string::npos) << r.out;
}

TEST_F(Cli, ValidationErrors) {
    EXPECT_EQ(run("solve " + at("missing.json") + " --out " + at("x")).code, 2);
    EXPECT_EQ(run("generate --m 1 --n 3 --out " + at("g.json")).code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
    std::ofstream(at("bad.json")) << "{\"m\": 2}";
    EXPECT_EQ(run("solve " + at("bad.json") + " --out " + at("x")).code, 2);
    generate("p.json", 2, 3, 1);
    EXPECT_EQ(run("solve " + at("p.json") + " --b 3 --max-rank 2 --out " + at("x")).code, 2);
    EXPECT_EQ(run("solve " + at("p.json") + " --ritz-rule sideways --out " + at("x")).code, 2);
    EXPECT_EQ(run("oracle " + at("bad.json") + " --out " + at("o.csv")).code, 2);
}

TEST_F(Cli, ThreadsAndRitzRuleAccepted) {
    generate("p.json", 2, 3, 2);
    const auto r = run("--threads 1 solve " + at("p.json") + " --b 1 --sweeps 1 --ritz-rule positive-imag --no-round --out " + at("x"));
    ASSERT_EQ(r.code, 0) << r.out;
    const auto rep = nlohmann::json::parse(slurp(at("x.json")));
    EXPECT_EQ(rep["config"]["ritz_rule"], "positive-imag");
    EXPECT_EQ(rep["config"]["round_delta"], false);
}

TEST_F(Cli, BenchWritesFixedSchema) {
    const auto r = run("bench --m 2 3 --n 4 --b 2 --out " + at("bench.csv"));
    ASSERT_EQ(r.code, 0) << r.out;
    const std::string csv = slurp(at("bench.csv"));
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "param,phase,rounded,seconds");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 2 * 6);
}
