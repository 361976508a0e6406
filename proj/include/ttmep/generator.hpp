#pragma once

// Random mEPs with a known spectrum: A_i = U_i diag(a_i) Z_i and
// B_ij = U_i diag(b_i^(j-1)) Z_i, so every tuple comes from an m x m system
// [b_k(i_k)^(j-1)]_kj lambda = [a_k(i_k)]_k over all multi-indices.

#include <cstdint>
#include <numbers>
#include <random>

#include "ttmep/problem.hpp"

namespace ttmep {

using Rng = std::mt19937_64;

struct GeneratedProblem {
    MEProblem problem;
    std::vector<Matrix> U;     ///< left factors
    std::vector<Matrix> Z;     ///< right factors
    std::vector<Vector> a;     ///< diagonal of A_i
    std::vector<Vector> nodes; ///< b_i; the B_ij diagonal is nodes[i]^(j-1)
    std::uint64_t seed = 0;
    double shift = 0.0;        ///< eta already applied to `problem` (A_i += eta B_im)

    /// b_ij as a vector, j 0-based (power j).
    Vector b_diag(Index i, Index j) const {
        return nodes[static_cast<std::size_t>(i)].array().pow(static_cast<double>(j));
    }
};

/// Chebyshev-Gauss-Lobatto points cos(pi k / (n-1)), k = 0..n-1.
inline Vector chebyshev_points(Index n) {
    Vector x(n);
    if (n == 1) {
        x(0) = 1.0;
        return x;
    }
    for (Index k = 0; k < n; ++k) x(k) = std::cos(std::numbers::pi * static_cast<double>(k) / static_cast<double>(n - 1));
    return x;
}

namespace detail {

inline MEProblem assemble(Index m, Index n, const std::vector<Matrix>& U, const std::vector<Matrix>& Z,
                          const std::vector<Vector>& a, const std::vector<Vector>& nodes) {
    MEProblem p;
    p.m = m;
    p.sizes.assign(static_cast<std::size_t>(m), n);
    for (Index i = 0; i < m; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        p.A.push_back(U[ii] * a[ii].asDiagonal() * Z[ii]);
        std::vector<Matrix> row;
        for (Index j = 0; j < m; ++j) {
            const Vector d = nodes[ii].array().pow(static_cast<double>(j));
            row.push_back(U[ii] * d.asDiagonal() * Z[ii]);
        }
        p.B.push_back(std::move(row));
    }
    return p;
}

} // namespace detail

/// Draw order: for each i the right factor Z_i then the left factor U_i
/// (uniform, filled column by column), then a = -5 * normal(n, m) column by column.
inline GeneratedProblem generate_random_mep(Index m, Index n, std::uint64_t seed) {
    detail::require_valid(m >= 2 && n >= 2, "generate_random_mep: need m >= 2 and n >= 2");
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto perturbed_identity = [&] {
        Matrix M(n, n);
        for (Index c = 0; c < n; ++c)
            for (Index r = 0; r < n; ++r) M(r, c) = 0.3 * unif(rng);
        M += Matrix::Identity(n, n);
        return M;
    };
    GeneratedProblem g;
    g.seed = seed;
    for (Index i = 0; i < m; ++i) {
        g.Z.push_back(perturbed_identity());
        g.U.push_back(perturbed_identity());
    }
    const Vector x = chebyshev_points(n);
    // 2m+1 equispaced points on [-1.9, 2]; the last one is unused
    std::vector<double> limit(static_cast<std::size_t>(2 * m));
    for (Index l = 0; l < 2 * m; ++l) limit[static_cast<std::size_t>(l)] = -1.9 + 3.9 * static_cast<double>(l) / static_cast<double>(2 * m);
    for (Index i = 0; i < m; ++i) {
        Vector ai(n);
        for (Index r = 0; r < n; ++r) ai(r) = -5.0 * gauss(rng);
        g.a.push_back(ai);
    }
    for (Index i = 0; i < m; ++i) {
        const double lo = limit[static_cast<std::size_t>(2 * i)], hi = limit[static_cast<std::size_t>(2 * i + 1)];
        g.nodes.push_back((x.array() * (hi - lo) / 2.0 + (lo + hi) / 2.0).matrix());
    }
    g.problem = detail::assemble(m, n, g.U, g.Z, g.a, g.nodes);
    return g;
}

/// Same factors with A_i + eta B_im.
inline GeneratedProblem shifted(const GeneratedProblem& g, double eta) {
    GeneratedProblem s = g;
    const Index m = g.problem.m;
    for (Index i = 0; i < m; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        s.a[ii] = g.a[ii] + eta * g.b_diag(i, m - 1);
    }
    s.problem = detail::assemble(m, g.problem.size(0), s.U, s.Z, s.a, s.nodes);
    s.shift = g.shift + eta;
    return s;
}

struct OracleTuple {
    EigenTuple tuple;
    std::vector<Index> index; ///< (i_1, ..., i_m), 0-based
};

struct OracleResult {
    std::vector<OracleTuple> tuples; ///< sorted by |lambda_m - target|, then index
    Index systems = 0;
    Index skipped_singular = 0;
};

namespace detail {

inline bool next_multi_index(std::vector<Index>& idx, Index n) {
    for (Index k = static_cast<Index>(idx.size()) - 1; k >= 0; --k) {
        auto& v = idx[static_cast<std::size_t>(k)];
        if (++v < n) return true;
        v = 0;
    }
    return false;
}

inline std::optional<Vector> solve_index_system(const GeneratedProblem& g, const std::vector<Index>& idx) {
    const Index m = g.problem.m;
    Matrix S(m, m);
    Vector rhs(m);
    for (Index k = 0; k < m; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        const double node = g.nodes[kk](idx[kk]);
        for (Index j = 0; j < m; ++j) S(k, j) = std::pow(node, static_cast<double>(j));
        rhs(k) = g.a[kk](idx[kk]);
    }
    return solve_linear<double>(S, rhs, 1e-14);
}

} // namespace detail

/// All n^m tuples from the diagonal systems, the `how_many` closest to
/// `target` in lambda_m returned with vectors x_k = Z_k^{-1} e_{i_k}.
inline OracleResult oracle_eigenvalues(const GeneratedProblem& g, Index how_many, double target = 0.0,
                                       Index cap = kDenseCap) {
    const Index m = g.problem.m, n = g.problem.size(0);
    detail::checked_product(std::vector<Index>(static_cast<std::size_t>(m), n), cap, "oracle_eigenvalues");
    OracleResult out;
    struct Key {
        double dist;
        std::vector<Index> idx;
    };
    std::vector<Key> keys;
    std::vector<Index> idx(static_cast<std::size_t>(m), 0);
    do {
        ++out.systems;
        const auto lam = detail::solve_index_system(g, idx);
        if (!lam) {
            ++out.skipped_singular;
            continue;
        }
        keys.push_back({std::abs((*lam)(m - 1) - target), idx});
    } while (detail::next_multi_index(idx, n));

    auto less = [](const Key& x, const Key& y) { return x.dist != y.dist ? x.dist < y.dist : x.idx < y.idx; };
    const auto keep = static_cast<std::size_t>(std::clamp<Index>(how_many, 0, static_cast<Index>(keys.size())));
    std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(keep), keys.end(), less);
    keys.resize(keep);

    std::vector<Eigen::PartialPivLU<Matrix>> zlu;
    for (Index k = 0; k < m; ++k) zlu.emplace_back(g.Z[static_cast<std::size_t>(k)]);
    for (const auto& key : keys) {
        OracleTuple t;
        t.index = key.idx;
        t.tuple.lambda = detail::solve_index_system(g, key.idx)->cast<Complex>();
        for (Index k = 0; k < m; ++k) {
            Vector v = zlu[static_cast<std::size_t>(k)].solve(Vector::Unit(n, key.idx[static_cast<std::size_t>(k)]));
            t.tuple.vectors.push_back((v / v.norm()).cast<Complex>());
        }
        t.tuple.residual_norm = residual_tuple(g.problem, t.tuple).max_norm;
        out.tuples.push_back(std::move(t));
    }
    return out;
}

} // namespace ttmep
