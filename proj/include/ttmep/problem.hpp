#pragma once

// Multiparameter eigenvalue problems
//
//   A_i x_i = (lambda_1 B_i1 + ... + lambda_m B_im) x_i,   i = 1..m,
//
// with eigenvalue-tuples, residuals and tuple refinement.

#include <optional>
#include <vector>

#include "ttmep/dense.hpp"
#include "ttmep/tt_tensor.hpp"

namespace ttmep {

struct MEProblem {
    Index m = 0;
    std::vector<Index> sizes;
    std::vector<Matrix> A;              ///< A[i], size n_i x n_i
    std::vector<std::vector<Matrix>> B; ///< B[i][j], size n_i x n_i

    Index size(Index i) const { return sizes[static_cast<std::size_t>(i)]; }
    const Matrix& a(Index i) const { return A[static_cast<std::size_t>(i)]; }
    const Matrix& b(Index i, Index j) const {
        return B[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }

    void validate() const {
        detail::require_shape(m >= 1, "MEProblem: m must be positive");
        detail::require_shape(static_cast<Index>(sizes.size()) == m && static_cast<Index>(A.size()) == m &&
                                  static_cast<Index>(B.size()) == m,
                              "MEProblem: expected m sizes, m A-matrices and m rows of B-matrices");
        for (Index i = 0; i < m; ++i) {
            const Index n = size(i);
            detail::require_shape(n >= 1, "MEProblem: sizes must be positive");
            detail::require_shape(a(i).rows() == n && a(i).cols() == n, "MEProblem: A_i must be n_i x n_i");
            detail::require_shape(static_cast<Index>(B[static_cast<std::size_t>(i)].size()) == m,
                                  "MEProblem: each row of B must hold m matrices");
            for (Index j = 0; j < m; ++j)
                detail::require_shape(b(i, j).rows() == n && b(i, j).cols() == n, "MEProblem: B_ij must be n_i x n_i");
        }
    }

    /// A_i - sum_j lambda_j B_ij
    CMatrix pencil(Index i, const CVector& lambda) const {
        CMatrix M = a(i).cast<Complex>();
        for (Index j = 0; j < m; ++j) M -= lambda(j) * b(i, j).cast<Complex>();
        return M;
    }

    /// The problem with every matrix transposed; its tuples are left tuples of this one.
    MEProblem transposed() const {
        MEProblem t = *this;
        for (Index i = 0; i < m; ++i) {
            t.A[static_cast<std::size_t>(i)] = a(i).transpose();
            for (Index j = 0; j < m; ++j) t.B[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = b(i, j).transpose();
        }
        return t;
    }
};

struct EigenTuple {
    CVector lambda;
    std::vector<CVector> vectors;
    double residual_norm = std::numeric_limits<double>::infinity();
    /// Solutions of the transposed problem; the duplicate test uses the
    /// bilinear form y^T Delta_0 x with these.
    std::vector<CVector> left_vectors;

    bool has_left() const { return !left_vectors.empty(); }
    Index order() const { return lambda.size(); }
};

struct TupleResidual {
    std::vector<CVector> per_equation;
    double max_norm = 0.0; ///< infinity norm of the stacked residual
};

inline void check_tuple_shape(const MEProblem& prob, const CVector& lambda, const std::vector<CVector>& x) {
    detail::require_shape(lambda.size() == prob.m && static_cast<Index>(x.size()) == prob.m,
                          "tuple: expected m eigenvalues and m vectors");
    for (Index i = 0; i < prob.m; ++i)
        detail::require_shape(x[static_cast<std::size_t>(i)].size() == prob.size(i), "tuple: vector length != n_i");
}

inline TupleResidual residual_tuple(const MEProblem& prob, const CVector& lambda, const std::vector<CVector>& x) {
    check_tuple_shape(prob, lambda, x);
    TupleResidual r;
    for (Index i = 0; i < prob.m; ++i) {
        CVector ri = prob.pencil(i, lambda) * x[static_cast<std::size_t>(i)];
        if (ri.size() > 0) r.max_norm = std::max(r.max_norm, ri.cwiseAbs().maxCoeff());
        r.per_equation.push_back(std::move(ri));
    }
    return r;
}

inline TupleResidual residual_tuple(const MEProblem& prob, const EigenTuple& t) {
    return residual_tuple(prob, t.lambda, t.vectors);
}

/// Solves [x_i^* B_ij x_i]_ij lambda = [x_i^* A_i x_i]_i.
inline CVector tensor_rayleigh_quotient(const MEProblem& prob, const std::vector<CVector>& x) {
    detail::require_shape(static_cast<Index>(x.size()) == prob.m, "tensor_rayleigh_quotient: expected m vectors");
    const Index m = prob.m;
    CMatrix S(m, m);
    CVector rhs(m);
    for (Index i = 0; i < m; ++i) {
        const CVector& xi = x[static_cast<std::size_t>(i)];
        detail::require_shape(xi.size() == prob.size(i), "tensor_rayleigh_quotient: vector length != n_i");
        if (xi.norm() == 0.0) throw ValidationError("tensor_rayleigh_quotient: zero vector");
        rhs(i) = xi.dot(prob.a(i).cast<Complex>() * xi);
        for (Index j = 0; j < m; ++j) S(i, j) = xi.dot(prob.b(i, j).cast<Complex>() * xi);
    }
    const Eigen::PartialPivLU<CMatrix> lu(S);
    const double rc = lu.rcond();
    if (!(rc > 1e-14)) throw NumericalError("tensor_rayleigh_quotient: singular system, rcond = " + std::to_string(rc));
    return lu.solve(rhs);
}

struct TrqiOptions {
    int max_iter = 10;
    double tol = 1e-12;
};

struct TrqiResult {
    EigenTuple tuple;
    int iterations = 0;
    bool failed = false;
};

namespace detail {

inline std::vector<CVector> normalized(std::vector<CVector> x) {
    for (auto& v : x) {
        const double nv = v.norm();
        if (nv > 0.0) v /= nv;
    }
    return x;
}

} // namespace detail

/// Alternates tensor Rayleigh quotients with one inverse-iteration step per
/// equation, x_i <- (A_i - sum_j lambda_j B_ij + delta I)^{-1} B_im x_i.
/// Returns the iterate with the smallest residual seen (never worse than the
/// input).
inline TrqiResult trqi_refine(const MEProblem& prob, const EigenTuple& start, const TrqiOptions& opt = {}) {
    TrqiResult best;
    best.tuple = start;
    best.tuple.vectors = detail::normalized(start.vectors);
    best.tuple.residual_norm = residual_tuple(prob, best.tuple).max_norm;
    if (best.tuple.residual_norm < opt.tol) return best;

    std::vector<CVector> x = best.tuple.vectors;
    const Index m = prob.m;
    for (int it = 1; it <= opt.max_iter; ++it) {
        CVector lambda;
        try {
            lambda = tensor_rayleigh_quotient(prob, x);
        } catch (const NumericalError&) {
            best.failed = true;
            return best;
        }
        const double res = residual_tuple(prob, lambda, x).max_norm;
        if (res < best.tuple.residual_norm) {
            best.tuple.lambda = lambda;
            best.tuple.vectors = x;
            best.tuple.residual_norm = res;
            best.iterations = it;
        }
        if (res < opt.tol) break;
        for (Index i = 0; i < m; ++i) {
            const Index n = prob.size(i);
            const double delta = 1e-12 * std::max(prob.a(i).norm(), 1.0);
            CMatrix M = prob.pencil(i, lambda);
            M.diagonal().array() += delta;
            const CVector rhs = prob.b(i, m - 1).cast<Complex>() * x[static_cast<std::size_t>(i)];
            const Eigen::PartialPivLU<CMatrix> lu(M);
            CVector y = lu.solve(rhs);
            const double ny = y.norm();
            if (!std::isfinite(ny) || ny == 0.0 || n == 0) {
                best.failed = true;
                return best;
            }
            x[static_cast<std::size_t>(i)] = y / ny;
        }
        const double after = [&] {
            try {
                const CVector l2 = tensor_rayleigh_quotient(prob, x);
                const double r2 = residual_tuple(prob, l2, x).max_norm;
                if (r2 < best.tuple.residual_norm) {
                    best.tuple.lambda = l2;
                    best.tuple.vectors = x;
                    best.tuple.residual_norm = r2;
                    best.iterations = it;
                }
                return r2;
            } catch (const NumericalError&) {
                return std::numeric_limits<double>::infinity();
            }
        }();
        if (after < opt.tol) break;
    }
    return best;
}

/// Left tuple: TRQI on the transposed problem started from the right vectors.
inline std::optional<std::vector<CVector>> left_eigenvector_tuple(const MEProblem& prob, const EigenTuple& t,
                                                                  const TrqiOptions& opt = {}) {
    const MEProblem tp = prob.transposed();
    EigenTuple seed = t;
    seed.left_vectors.clear();
    const auto r = trqi_refine(tp, seed, opt);
    if (r.failed && r.tuple.residual_norm > 1e-6) return std::nullopt;
    return r.tuple.vectors;
}

/// w_1^T ... w_m^T applied to Delta, applied to v_1 (x) ... (x) v_m, contracted core by core.
inline Complex bilinear_rank_one(const TTOperator& Delta, const std::vector<CVector>& w, const std::vector<CVector>& v) {
    const Index m = Delta.order();
    detail::require_shape(static_cast<Index>(w.size()) == m && static_cast<Index>(v.size()) == m,
                          "bilinear_rank_one: expected m vectors on each side");
    CMatrix acc = CMatrix::Ones(1, 1);
    for (Index k = 0; k < m; ++k) {
        const OperatorCore& G = Delta.core(k);
        const CVector& wk = w[static_cast<std::size_t>(k)];
        const CVector& vk = v[static_cast<std::size_t>(k)];
        detail::require_shape(wk.size() == G.mode_size() && vk.size() == G.mode_size(), "bilinear_rank_one: length mismatch");
        CMatrix M = CMatrix::Zero(G.left_rank(), G.right_rank());
        for (Index a = 0; a < G.left_rank(); ++a)
            for (Index i = 0; i < G.mode_size(); ++i)
                for (Index j = 0; j < G.mode_size(); ++j) {
                    const Complex c = wk(i) * vk(j);
                    for (Index b = 0; b < G.right_rank(); ++b) M(a, b) += c * G(a, i, j, b);
                }
        acc = acc * M;
    }
    return acc(0, 0);
}

struct DuplicateVerdict {
    bool accept = true;
    double max_ratio = 0.0;
    bool degenerate = false; ///< some found tuple had a vanishing denominator
};

/// Accepts `candidate` when |y_p^T D0 x| / |y_p^T D0 x_p| < xi for every found p.
inline DuplicateVerdict duplicate_check(const std::vector<CVector>& candidate, const std::vector<EigenTuple>& found,
                                        const TTOperator& Delta0, double xi) {
    DuplicateVerdict v;
    const auto xhat = detail::normalized(candidate);
    for (const auto& f : found) {
        detail::require_valid(f.has_left(), "duplicate_check: found tuple has no left vectors");
        const auto y = detail::normalized(f.left_vectors);
        const double den = std::abs(bilinear_rank_one(Delta0, y, detail::normalized(f.vectors)));
        const double num = std::abs(bilinear_rank_one(Delta0, y, xhat));
        double scale = 1.0;
        for (Index k = 0; k < Delta0.order(); ++k) scale *= std::max(Delta0.core(k).fused().frobenius_norm(), 1e-300);
        if (den <= 1e-14 * scale) {
            v.accept = false;
            v.degenerate = true;
            continue;
        }
        v.max_ratio = std::max(v.max_ratio, num / den);
    }
    if (v.max_ratio >= xi) v.accept = false;
    return v;
}

} // namespace ttmep
