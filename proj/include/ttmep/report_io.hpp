#pragma once

// Run reports, tuple sidecars and CSV tables.
//
// A tuple's eigenvector x_1 (x) ... (x) x_m is stored in the sidecar as two
// real TT vectors (real part, then imaginary part) of rank <= 2, built from
// the 2x2 real representation [[Re z, -Im z], [Im z, Re z]] of each entry.
// Record 2t and 2t+1 of the sidecar belong to tuple t.

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "ttmep/generator.hpp"
#include "ttmep/solver.hpp"
#include "ttmep/tt_io.hpp"

namespace ttmep {

/// Real and imaginary parts of x_1 (x) ... (x) x_m as TT vectors.
inline std::pair<TTVector, TTVector> complex_rank_one_tt(const std::vector<CVector>& x) {
    const Index m = static_cast<Index>(x.size());
    detail::require_shape(m >= 1, "complex_rank_one_tt: empty tuple");
    std::pair<TTVector, TTVector> out;
    for (int part = 0; part < 2; ++part) {
        std::vector<TensorCore> cores;
        for (Index k = 0; k < m; ++k) {
            const CVector& v = x[static_cast<std::size_t>(k)];
            const Index n = v.size();
            const Index l = k == 0 ? 1 : 2, r = k + 1 == m ? 1 : 2;
            TensorCore c(l, n, r);
            for (Index i = 0; i < n; ++i) {
                const double re = v(i).real(), im = v(i).imag();
                const double M[2][2] = {{re, -im}, {im, re}};
                for (Index a = 0; a < l; ++a)
                    for (Index b = 0; b < r; ++b) {
                        // first core selects row `part`, last core selects column 0
                        const Index row = k == 0 ? part : a;
                        const Index col = k + 1 == m ? 0 : b;
                        c(a, i, b) = M[row][col];
                    }
            }
            cores.push_back(std::move(c));
        }
        (part == 0 ? out.first : out.second) = TTVector(std::move(cores));
    }
    return out;
}

namespace detail {

inline nlohmann::json complex_json(const Complex& z) { return std::vector<double>{z.real(), z.imag()}; }

inline nlohmann::json phases_json(const PhaseTimes& p) {
    return {{"projection", p.projection}, {"eigensolve", p.eigensolve}, {"selection", p.selection}, {"update", p.update}};
}

} // namespace detail

inline nlohmann::json config_json(const SolverConfig& c) {
    return {{"b", c.block_size},
            {"kick", c.kick},
            {"max_rank", c.rank()},
            {"sweeps", c.sweeps},
            {"eps", c.eps},
            {"eps1", c.eps1},
            {"xi", c.xi},
            {"cos_threshold", c.cos_threshold},
            {"keep_found", c.found_capacity()},
            {"round_delta", c.round_delta},
            {"round_tol", c.round_tol},
            {"seed", c.seed},
            {"ritz_rule", c.ritz_rule == RitzRule::PositiveReal ? "positive-real" : "positive-imag"},
            {"no_progress_window", c.no_progress_window}};
}

/// The run report; `vectors_file` names the sidecar written next to it.
inline nlohmann::json report_to_json(const SolveReport& r, const std::string& vectors_file) {
    nlohmann::json j;
    j["config"] = config_json(r.config);
    j["target"] = r.target;
    j["sweeps_done"] = r.sweeps_done;
    j["stop_reason"] = r.stop_reason;
    j["delta_ranks"] = {{"delta_m", r.delta_m_ranks}, {"delta_0", r.delta_0_ranks}};
    j["timings"] = {{"delta_build", r.delta_build_seconds}, {"total", r.total_seconds}, {"phases", detail::phases_json(r.phases)}};
    j["steps"] = nlohmann::json::array();
    for (const auto& s : r.steps)
        j["steps"].push_back({{"sweep", s.sweep},
                              {"mode", s.mode + 1},
                              {"direction", s.direction},
                              {"projected_size", s.projected_size},
                              {"n_candidates", s.n_candidates},
                              {"n_selected", s.n_selected},
                              {"n_random", s.n_random},
                              {"n_converged_new", s.n_converged_new},
                              {"padded", s.padded},
                              {"wall_ms", s.wall_ms},
                              {"phases", detail::phases_json(s.phases)},
                              {"ranks", s.ranks}});
    j["vectors_file"] = vectors_file;
    j["tuples"] = nlohmann::json::array();
    for (std::size_t t = 0; t < r.tuples.size(); ++t) {
        nlohmann::json lam = nlohmann::json::array();
        for (Index i = 0; i < r.tuples[t].lambda.size(); ++i) lam.push_back(detail::complex_json(r.tuples[t].lambda(i)));
        j["tuples"].push_back({{"lambda", lam}, {"residual", r.tuples[t].residual_norm}, {"vectors_ref", {2 * t, 2 * t + 1}}});
    }
    j["warnings"] = r.warnings;
    return j;
}

/// Report JSON without wall-clock fields, for reproducibility checks.
inline nlohmann::json strip_timings(nlohmann::json j) {
    j.erase("timings");
    for (auto& s : j["steps"]) {
        s.erase("wall_ms");
        s.erase("phases");
    }
    return j;
}

inline void write_vectors_sidecar(const std::string& path, const std::vector<EigenTuple>& tuples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path);
    for (const auto& t : tuples) {
        const auto [re, im] = complex_rank_one_tt(t.vectors);
        write_binary(out, re);
        write_binary(out, im);
    }
    if (!out) throw ValidationError("write failed: " + path);
}

inline std::vector<TTVector> read_vectors_sidecar(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path);
    std::vector<TTVector> out;
    while (in.peek() != std::char_traits<char>::eof()) out.push_back(read_binary_vector(in));
    return out;
}

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

} // namespace detail

/// rank_index,lambda_m_real,lambda_m_imag,residual,found_flag
inline std::string solve_csv(const SolveReport& r) {
    std::ostringstream os;
    os << "rank_index,lambda_m_real,lambda_m_imag,residual,found_flag\n";
    for (std::size_t t = 0; t < r.tuples.size(); ++t) {
        const auto& tu = r.tuples[t];
        const Complex l = tu.lambda(tu.order() - 1);
        os << t + 1 << ',' << detail::fmt(l.real()) << ',' << detail::fmt(l.imag()) << ','
           << detail::fmt(tu.residual_norm) << ",1\n";
    }
    return os.str();
}

/// rank_index,lambda_1..lambda_m,distance,residual,index_1..index_m (1-based)
inline std::string oracle_csv(const OracleResult& o, double target) {
    std::ostringstream os;
    const Index m = o.tuples.empty() ? 0 : o.tuples.front().tuple.order();
    os << "rank_index";
    for (Index i = 0; i < m; ++i) os << ",lambda_" << i + 1;
    os << ",distance,residual";
    for (Index i = 0; i < m; ++i) os << ",index_" << i + 1;
    os << '\n';
    for (std::size_t t = 0; t < o.tuples.size(); ++t) {
        const auto& ot = o.tuples[t];
        os << t + 1;
        for (Index i = 0; i < m; ++i) os << ',' << detail::fmt(ot.tuple.lambda(i).real());
        os << ',' << detail::fmt(std::abs(ot.tuple.lambda(m - 1).real() - target)) << ',' << detail::fmt(ot.tuple.residual_norm);
        for (Index i : ot.index) os << ',' << i + 1;
        os << '\n';
    }
    return os.str();
}

struct OracleRow {
    Index rank_index = 0;
    std::vector<double> lambda;
};

inline std::vector<OracleRow> parse_oracle_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw ValidationError("oracle csv: empty file");
    Index m = 0;
    {
        std::istringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ','))
            if (cell.rfind("lambda_", 0) == 0) ++m;
    }
    if (m == 0) throw ValidationError("oracle csv: no lambda columns");
    std::vector<OracleRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        OracleRow r;
        try {
            std::getline(ls, cell, ',');
            r.rank_index = std::stol(cell);
            for (Index i = 0; i < m; ++i) {
                if (!std::getline(ls, cell, ',')) throw ValidationError("oracle csv: short row");
                r.lambda.push_back(std::stod(cell));
            }
        } catch (const std::logic_error&) {
            throw ValidationError("oracle csv: malformed row: " + line);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

struct CompareSummary {
    Index wanted_considered = 0;
    Index found_among_wanted = 0;
    Index spurious = 0;
    Index found_total = 0;
    std::vector<int> found_flag;           ///< per oracle row
    std::vector<double> matched_lambda_m;  ///< NaN when not found
};

/// Matches found lambda_m values to oracle rows within `tol`; a found value
/// matching no oracle row is spurious.
inline CompareSummary compare_found(const std::vector<double>& found_lambda_m, const std::vector<OracleRow>& oracle,
                                    double tol, Index wanted = 20) {
    CompareSummary s;
    s.found_total = static_cast<Index>(found_lambda_m.size());
    s.wanted_considered = std::min<Index>(wanted, static_cast<Index>(oracle.size()));
    s.found_flag.assign(oracle.size(), 0);
    s.matched_lambda_m.assign(oracle.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<bool> used(oracle.size(), false);
    for (double f : found_lambda_m) {
        std::optional<std::size_t> best;
        for (std::size_t r = 0; r < oracle.size(); ++r) {
            if (used[r]) continue;
            const double err = std::abs(oracle[r].lambda.back() - f);
            if (err <= tol && (!best || err < std::abs(oracle[*best].lambda.back() - f))) best = r;
        }
        if (!best) {
            ++s.spurious;
            continue;
        }
        used[*best] = true;
        s.found_flag[*best] = 1;
        s.matched_lambda_m[*best] = f;
    }
    for (Index r = 0; r < s.wanted_considered; ++r) s.found_among_wanted += s.found_flag[static_cast<std::size_t>(r)];
    return s;
}

} // namespace ttmep
