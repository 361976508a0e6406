#pragma once

// Subcommand implementations shared by the ttmep executable and the tests.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ttmep/ttmep.hpp"

namespace ttmep::cli {

enum ExitCode : int { kOk = 0, kValidation = 2, kNumerical = 3, kCap = 4 };

struct GenerateArgs {
    Index m = 3;
    Index n = 10;
    std::uint64_t seed = 0;
    double shift = 0.0;
    std::string out;
};

inline void cmd_generate(const GenerateArgs& a) {
    auto g = generate_random_mep(a.m, a.n, a.seed);
    if (a.shift != 0.0) g = shifted(g, a.shift);
    write_text_file(a.out, generated_to_json(g).dump(1) + "\n");
}

struct SolveArgs {
    std::string problem;
    double target = 0.0;
    SolverConfig config;
    std::string out; ///< prefix: <out>.json, <out>.csv, <out>.vectors.bin
};

inline SolveReport cmd_solve(const SolveArgs& a) {
    const MEProblem p = problem_from_json(read_json_file(a.problem));
    SolveReport r = solve(p, a.target, a.config);
    const std::string vectors = a.out + ".vectors.bin";
    write_vectors_sidecar(vectors, r.tuples);
    write_text_file(a.out + ".json", report_to_json(r, vectors).dump(1) + "\n");
    write_text_file(a.out + ".csv", solve_csv(r));
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    return r;
}

struct OracleArgs {
    std::string problem;
    double target = 0.0;
    Index count = 20;
    Index cap = kDenseCap;
    std::string out;
};

inline OracleResult cmd_oracle(const OracleArgs& a) {
    const auto g = generated_from_json(read_json_file(a.problem));
    if (!g) throw ValidationError("oracle: " + a.problem + " has no generator metadata");
    OracleResult o = oracle_eigenvalues(*g, a.count, a.target, a.cap);
    write_text_file(a.out, oracle_csv(o, a.target));
    std::cerr << "systems solved: " << o.systems << ", skipped singular: " << o.skipped_singular << '\n';
    return o;
}

struct CompareArgs {
    std::string report;
    std::string oracle;
    double tol = 1e-6;
    Index wanted = 20;
    std::string out; ///< per-row table; summary goes to stdout
};

/// lambda_m values (real part) of the tuples in a report.
inline std::vector<double> report_lambda_m(const nlohmann::json& report) {
    std::vector<double> out;
    try {
        for (const auto& t : report.at("tuples")) out.push_back(t.at("lambda").back().at(0).get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("report: ") + e.what());
    }
    return out;
}

inline nlohmann::json cmd_compare(const CompareArgs& a) {
    const auto found = report_lambda_m(read_json_file(a.report));
    std::ifstream in(a.oracle);
    if (!in) throw ValidationError("cannot open " + a.oracle);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto rows = parse_oracle_csv(text);
    const auto s = compare_found(found, rows, a.tol, a.wanted);
    std::ostringstream table;
    table << "rank_index,lambda_m,found_flag,found_lambda_m\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
        table << rows[r].rank_index << ',' << detail::fmt(rows[r].lambda.back()) << ',' << s.found_flag[r] << ',';
        if (s.found_flag[r]) table << detail::fmt(s.matched_lambda_m[r]);
        table << '\n';
    }
    if (!a.out.empty()) write_text_file(a.out, table.str());
    return {{"wanted_considered", s.wanted_considered},
            {"found_among_wanted", s.found_among_wanted},
            {"spurious", s.spurious},
            {"found_total", s.found_total}};
}

struct BenchArgs {
    std::vector<Index> ms{3};
    std::vector<Index> ns{10};
    std::uint64_t seed = 0;
    SolverConfig config;
    std::string out;
};

struct BenchRow {
    std::string param; ///< "m=<m>;n=<n>"
    Index m = 0, n = 0;
    std::string phase;
    bool rounded = false;
    double seconds = 0.0;
};

inline std::vector<BenchRow> run_bench(const BenchArgs& a) {
    std::vector<BenchRow> rows;
    for (Index m : a.ms)
        for (Index n : a.ns) {
            const auto g = generate_random_mep(m, n, a.seed);
            for (bool rounded : {false, true}) {
                SolverConfig c = a.config;
                c.round_delta = rounded;
                const SolveReport r = solve(g.problem, 0.0, c);
                const std::string param = "m=" + std::to_string(m) + ";n=" + std::to_string(n);
                auto row = [&](const std::string& phase, double s) { rows.push_back({param, m, n, phase, rounded, s}); };
                row("delta_build", r.delta_build_seconds);
                row("projection", r.phases.projection);
                row("eigensolve", r.phases.eigensolve);
                row("selection", r.phases.selection);
                row("update", r.phases.update);
                row("total", r.total_seconds);
            }
        }
    return rows;
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream os;
    os << "param,phase,rounded,seconds\n";
    for (const auto& r : rows) os << r.param << ',' << r.phase << ',' << (r.rounded ? 1 : 0) << ',' << detail::fmt(r.seconds) << '\n';
    return os.str();
}

inline double bench_value(const std::vector<BenchRow>& rows, Index m, Index n, const std::string& phase, bool rounded) {
    for (const auto& r : rows)
        if (r.m == m && r.n == n && r.phase == phase && r.rounded == rounded) return r.seconds;
    return std::nan("");
}

/// Soft expectations on bench timings; each violated one yields a message.
inline std::vector<std::string> bench_warnings(const std::vector<BenchRow>& rows) {
    std::vector<std::string> w;
    std::vector<std::pair<Index, Index>> seen;
    for (const auto& r : rows)
        if (std::find(seen.begin(), seen.end(), std::pair{r.m, r.n}) == seen.end()) seen.emplace_back(r.m, r.n);
    for (auto [m, n] : seen) {
        const std::string tag = "m=" + std::to_string(m) + " n=" + std::to_string(n);
        for (bool rounded : {false, true}) {
            const double eig = bench_value(rows, m, n, "eigensolve", rounded);
            for (const char* other : {"projection", "selection", "update"})
                if (bench_value(rows, m, n, other, rounded) > eig)
                    w.push_back(tag + (rounded ? " rounded" : " unrounded") + ": " + other + " exceeds eigensolve");
        }
        if (m >= 7 && bench_value(rows, m, n, "projection", true) > bench_value(rows, m, n, "projection", false))
            w.push_back(tag + ": rounding increased projection time");
    }
    return w;
}

inline std::vector<BenchRow> cmd_bench(const BenchArgs& a) {
    const auto rows = run_bench(a);
    write_text_file(a.out, bench_csv(rows));
    for (const auto& w : bench_warnings(rows)) std::cerr << "warning: " << w << '\n';
    return rows;
}

/// Runs `f`, mapping library exceptions to exit codes.
template <class F>
int guarded(F&& f) {
    try {
        f();
        return kOk;
    } catch (const CapExceeded& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kCap;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumerical;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    }
}

} // namespace ttmep::cli
