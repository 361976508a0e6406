#pragma once

// MEProblem files:
//   {"m": 3, "sizes": [n_1, ...],
//    "A": [A_1, ...], "B": [[B_11, ..., B_1m], ...],
//    "generator": {"style", "seed", "shift", "a", "b", "U", "Z"}}   (optional)
// Matrices are arrays of rows. In "generator", "a" and "b" hold one vector per
// equation (b holds the nodes whose powers give the B_ij diagonals).

#include <fstream>
#include <string>

#include <json.hpp>

#include "ttmep/generator.hpp"

namespace ttmep {

namespace detail {

inline nlohmann::json matrix_json(const Matrix& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(M.cols()));
        for (Index j = 0; j < M.cols(); ++j) r[static_cast<std::size_t>(j)] = M(i, j);
        rows.push_back(std::move(r));
    }
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, Index n, const std::string& what) {
    if (!j.is_array() || static_cast<Index>(j.size()) != n) throw ValidationError(what + ": expected " + std::to_string(n) + " rows");
    Matrix M(n, n);
    for (Index i = 0; i < n; ++i) {
        const auto row = j[static_cast<std::size_t>(i)].get<std::vector<double>>();
        if (static_cast<Index>(row.size()) != n) throw ValidationError(what + ": row " + std::to_string(i) + " has wrong length");
        for (Index c = 0; c < n; ++c) M(i, c) = row[static_cast<std::size_t>(c)];
    }
    if (!M.allFinite()) throw ValidationError(what + ": non-finite entry");
    return M;
}

inline nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vector_from_json(const nlohmann::json& j, Index n, const std::string& what) {
    const auto v = j.get<std::vector<double>>();
    if (static_cast<Index>(v.size()) != n) throw ValidationError(what + ": wrong length");
    return Eigen::Map<const Vector>(v.data(), n);
}

} // namespace detail

inline nlohmann::json problem_to_json(const MEProblem& p) {
    p.validate();
    nlohmann::json j;
    j["m"] = p.m;
    j["sizes"] = p.sizes;
    j["A"] = nlohmann::json::array();
    j["B"] = nlohmann::json::array();
    for (Index i = 0; i < p.m; ++i) {
        j["A"].push_back(detail::matrix_json(p.a(i)));
        nlohmann::json row = nlohmann::json::array();
        for (Index c = 0; c < p.m; ++c) row.push_back(detail::matrix_json(p.b(i, c)));
        j["B"].push_back(std::move(row));
    }
    return j;
}

inline nlohmann::json generated_to_json(const GeneratedProblem& g) {
    nlohmann::json j = problem_to_json(g.problem);
    nlohmann::json gen;
    gen["style"] = "listing";
    gen["seed"] = g.seed;
    gen["shift"] = g.shift;
    for (Index i = 0; i < g.problem.m; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        gen["a"].push_back(detail::vector_json(g.a[ii]));
        gen["b"].push_back(detail::vector_json(g.nodes[ii]));
        gen["U"].push_back(detail::matrix_json(g.U[ii]));
        gen["Z"].push_back(detail::matrix_json(g.Z[ii]));
    }
    j["generator"] = std::move(gen);
    return j;
}

inline MEProblem problem_from_json(const nlohmann::json& j) {
    try {
        MEProblem p;
        p.m = j.at("m").get<Index>();
        if (p.m < 1) throw ValidationError("problem: m must be positive");
        p.sizes = j.at("sizes").get<std::vector<Index>>();
        if (static_cast<Index>(p.sizes.size()) != p.m) throw ValidationError("problem: sizes must have m entries");
        const auto& A = j.at("A");
        const auto& B = j.at("B");
        if (static_cast<Index>(A.size()) != p.m || static_cast<Index>(B.size()) != p.m)
            throw ValidationError("problem: A and B must have m entries");
        for (Index i = 0; i < p.m; ++i) {
            const Index n = p.size(i);
            if (n < 1) throw ValidationError("problem: sizes must be positive");
            p.A.push_back(detail::matrix_from_json(A[static_cast<std::size_t>(i)], n, "A_" + std::to_string(i + 1)));
            const auto& row = B[static_cast<std::size_t>(i)];
            if (static_cast<Index>(row.size()) != p.m) throw ValidationError("problem: each B row must have m matrices");
            std::vector<Matrix> bs;
            for (Index c = 0; c < p.m; ++c)
                bs.push_back(detail::matrix_from_json(row[static_cast<std::size_t>(c)], n,
                                                      "B_" + std::to_string(i + 1) + std::to_string(c + 1)));
            p.B.push_back(std::move(bs));
        }
        p.validate();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("problem json: ") + e.what());
    } catch (const ShapeError& e) {
        throw ValidationError(e.what());
    }
}

/// The generator metadata of a problem file, when present.
inline std::optional<GeneratedProblem> generated_from_json(const nlohmann::json& j) {
    if (!j.contains("generator")) return std::nullopt;
    GeneratedProblem g;
    g.problem = problem_from_json(j);
    try {
        const auto& gen = j.at("generator");
        g.seed = gen.at("seed").get<std::uint64_t>();
        g.shift = gen.value("shift", 0.0);
        const Index m = g.problem.m;
        for (Index i = 0; i < m; ++i) {
            const auto ii = static_cast<std::size_t>(i);
            const Index n = g.problem.size(i);
            g.a.push_back(detail::vector_from_json(gen.at("a").at(ii), n, "generator.a"));
            g.nodes.push_back(detail::vector_from_json(gen.at("b").at(ii), n, "generator.b"));
            g.U.push_back(detail::matrix_from_json(gen.at("U").at(ii), n, "generator.U"));
            g.Z.push_back(detail::matrix_from_json(gen.at("Z").at(ii), n, "generator.Z"));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("generator metadata: ") + e.what());
    }
    return g;
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path);
    out << text;
    if (!out) throw ValidationError("write failed: " + path);
}

} // namespace ttmep
