#pragma once

// Operator determinants of an mEP in TT form.
//
// The determinant of an m x m matrix factors as a product of matrices
// D_{1,m}(row_1) D_{2,m}(row_2) ... D_{m,m}(row_m), with D_{k,m} of shape
// C(m, k-1) x C(m, k) and linear in its row argument. Replacing each scalar
// entry of the row by the matching entry pair (i, j) of the mEP matrices gives
// the cores of Delta_0 and Delta_i directly.

#include <optional>

#include "ttmep/problem.hpp"
#include "ttmep/tt_tensor.hpp"

namespace ttmep {

inline Index binomial(Index n, Index k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    Index r = 1;
    for (Index i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

/// D_{k,n}(a), 1 <= k <= n.
inline Matrix determinant_factor(Index k, Index n, const Vector& a) {
    detail::require_valid(n >= 1 && k >= 1 && k <= n, "determinant_factor: need 1 <= k <= n");
    detail::require_shape(a.size() == n, "determinant_factor: row length must be n");
    if (k == 1) return a.transpose();
    if (k == n) {
        Matrix d(n, 1);
        for (Index i = 0; i < n; ++i) d(i, 0) = ((i % 2 == 0) ? 1.0 : -1.0) * a(n - 1 - i);
        return d;
    }
    const Vector tail = a.tail(n - 1);
    const Matrix top = determinant_factor(k - 1, n - 1, tail); // C(n-1,k-2) x C(n-1,k-1)
    const Matrix bottom = determinant_factor(k, n - 1, tail);  // C(n-1,k-1) x C(n-1,k)
    Matrix d = Matrix::Zero(top.rows() + bottom.rows(), top.cols() + bottom.cols());
    d.topLeftCorner(top.rows(), top.cols()) = top;
    const double sign = (k % 2 == 1) ? 1.0 : -1.0; // (-1)^(k-1)
    d.bottomLeftCorner(bottom.rows(), top.cols()) = sign * a(0) * Matrix::Identity(bottom.rows(), top.cols());
    d.bottomRightCorner(bottom.rows(), bottom.cols()) = bottom;
    return d;
}

struct DeltaOptions {
    bool round = true;
    double round_tol = 1e-13;
};

namespace detail {

/// Core k of the operator determinant whose column `replaced` (if any) holds A.
inline OperatorCore delta_core(const MEProblem& prob, Index k, std::optional<Index> replaced) {
    const Index m = prob.m, n = prob.size(k);
    // D_{k+1,m} is linear in its argument: precompute the image of each unit row
    std::vector<Matrix> basis;
    for (Index l = 0; l < m; ++l) basis.push_back(determinant_factor(k + 1, m, Vector::Unit(m, l)));
    const Index rl = basis[0].rows(), rr = basis[0].cols();
    OperatorCore core(rl, n, rr);
    for (Index l = 0; l < m; ++l) {
        const Matrix& E = replaced && *replaced == l ? prob.a(k) : prob.b(k, l);
        const Matrix& D = basis[static_cast<std::size_t>(l)];
        for (Index a = 0; a < rl; ++a)
            for (Index b = 0; b < rr; ++b) {
                const double d = D(a, b);
                if (d == 0.0) continue;
                for (Index i = 0; i < n; ++i)
                    for (Index j = 0; j < n; ++j) core(a, i, j, b) += d * E(i, j);
            }
    }
    return core;
}

inline TTOperator build_delta(const MEProblem& prob, std::optional<Index> replaced, const DeltaOptions& opt) {
    prob.validate();
    std::vector<OperatorCore> cores;
    for (Index k = 0; k < prob.m; ++k) cores.push_back(delta_core(prob, k, replaced));
    TTOperator D(std::move(cores));
    if (opt.round) D = tt_round_operator(D, opt.round_tol);
    return D;
}

} // namespace detail

/// Delta_0 = sum over permutations s of sgn(s) B_{1 s1} (x) ... (x) B_{m sm}.
inline TTOperator build_delta0(const MEProblem& prob, const DeltaOptions& opt = {}) {
    return detail::build_delta(prob, std::nullopt, opt);
}

/// Delta_i (i is 1-based): Delta_0 with column i of the determinant replaced by the A_k.
inline TTOperator build_delta_i(const MEProblem& prob, Index i, const DeltaOptions& opt = {}) {
    detail::require_valid(i >= 1 && i <= prob.m, "build_delta_i: i must be in 1..m");
    return detail::build_delta(prob, i - 1, opt);
}

/// A_i <- A_i + eta B_im: lambda_m moves to lambda_m + eta, the others stay.
inline MEProblem apply_shift(const MEProblem& prob, double eta) {
    prob.validate();
    MEProblem out = prob;
    if (eta == 0.0) return out;
    for (Index i = 0; i < prob.m; ++i) out.A[static_cast<std::size_t>(i)] += eta * prob.b(i, prob.m - 1);
    return out;
}

} // namespace ttmep
