#pragma once

// Small dense kernels shared by the tensor-train code and the solver.
//
// All dense matrices are Eigen column-major matrices.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ttmep/error.hpp"

namespace ttmep {

using Index = Eigen::Index;
using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SvdResult {
    Matrix U;
    Vector S; ///< descending
    Matrix V;
};

struct QrResult {
    Matrix Q; ///< orthonormal columns
    Matrix R; ///< upper triangular, nonnegative diagonal
};

namespace detail {

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& a) {
    return a.allFinite();
}

} // namespace detail

/// Thin SVD, A = U diag(S) V^T with S descending.
inline SvdResult svd(const Matrix& A) {
    if (!detail::all_finite(A)) throw NumericalError("svd: non-finite input");
    if (A.rows() == 0 || A.cols() == 0) return {Matrix(A.rows(), 0), Vector(0), Matrix(A.cols(), 0)};
    Eigen::BDCSVD<Matrix> dec(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

/// Thin Householder QR with the sign of each column of Q chosen so that
/// diag(R) >= 0. Q has min(rows, cols) columns.
inline QrResult thin_qr(const Matrix& A) {
    const Index k = std::min(A.rows(), A.cols());
    Eigen::HouseholderQR<Matrix> qr(A);
    Matrix Q = qr.householderQ() * Matrix::Identity(A.rows(), k);
    Matrix R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    for (Index i = 0; i < k; ++i) {
        if (R(i, i) < 0) {
            R.row(i) *= -1.0;
            Q.col(i) *= -1.0;
        }
    }
    return {std::move(Q), std::move(R)};
}

/// Solves A x = b by partial-pivot LU; empty when A is numerically singular.
template <typename Scalar>
std::optional<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>
solve_linear(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& A,
             const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b, double min_rcond = 1e-15) {
    detail::require_shape(A.rows() == A.cols() && A.rows() == b.size(), "solve_linear: shape mismatch");
    Eigen::PartialPivLU<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> lu(A);
    if (!(lu.rcond() > min_rcond)) return std::nullopt;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x = lu.solve(b);
    if (!x.allFinite()) return std::nullopt;
    return x;
}

/// |<u,v>| / (|u| |v|), invariant under sign and phase of either vector.
template <typename DerivedU, typename DerivedV>
double principal_cosine(const Eigen::MatrixBase<DerivedU>& u, const Eigen::MatrixBase<DerivedV>& v) {
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu == 0.0 || nv == 0.0) throw ValidationError("principal_cosine: zero vector");
    detail::require_shape(u.size() == v.size(), "principal_cosine: length mismatch");
    const double c = std::abs(u.dot(v)) / (nu * nv);
    return std::clamp(c, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Generalized nonsymmetric eigenproblem M x = lambda N x

enum class PencilMethod {
    Auto, ///< reduce to N^{-1} M when N is well conditioned, otherwise QZ
    QZ,   ///< always the QZ algorithm
};

struct GeneralizedEigOptions {
    bool want_left = false;
    PencilMethod method = PencilMethod::Auto;
    double min_rcond = 1e-10;         ///< Auto: below this rcond(N) the QZ path is used
    double infinite_tol = 1e-14;      ///< |beta| <= infinite_tol * scale => infinite
    bool verify = false;              ///< compute max_relative_residual
};

struct GeneralizedEigenResult {
    std::vector<Complex> values;   ///< lambda; +inf for flagged infinite eigenvalues
    std::vector<bool> infinite;
    CMatrix right;                 ///< unit-norm right eigenvectors, column j <-> values[j]
    CMatrix left;                  ///< unit-norm left eigenvectors y^H M = lambda y^H N (if requested)
    bool has_left = false;
    double scale = 0.0;            ///< max(|M|_F, |N|_F)
    double rcond_N = 0.0;          ///< reciprocal condition estimate of N (Auto path)
    bool used_qz = false;
    double max_relative_residual = 0.0; ///< filled when verify is set

    Index size() const { return static_cast<Index>(values.size()); }
    bool is_finite(Index j) const { return !infinite[static_cast<std::size_t>(j)]; }
};

namespace detail {

inline void normalize_columns(CMatrix& V) {
    for (Index j = 0; j < V.cols(); ++j) {
        const double nrm = V.col(j).norm();
        if (nrm > 0) V.col(j) /= nrm;
    }
}

inline void fill_residual(const Matrix& M, const Matrix& N, GeneralizedEigenResult& res) {
    double worst = 0.0;
    const double nM = M.norm();
    const double nN = N.norm();
    for (Index j = 0; j < res.size(); ++j) {
        if (!res.is_finite(j)) continue;
        const Complex lam = res.values[static_cast<std::size_t>(j)];
        const CVector x = res.right.col(j);
        const CVector r = M.cast<Complex>() * x - lam * (N.cast<Complex>() * x);
        const double denom = (nM + std::abs(lam) * nN) * x.norm();
        if (denom > 0) worst = std::max(worst, r.norm() / denom);
    }
    res.max_relative_residual = worst;
}

struct QzValues {
    std::vector<Complex> values;
    std::vector<bool> infinite;
    CMatrix vectors;
};

inline QzValues qz_values(const Matrix& M, const Matrix& N, double tiny) {
    Eigen::GeneralizedEigenSolver<Matrix> ges(M, N, true);
    if (ges.info() != Eigen::Success) throw NumericalError("generalized_eig: QZ did not converge");
    const Index n = M.rows();
    QzValues q;
    q.values.resize(static_cast<std::size_t>(n));
    q.infinite.resize(static_cast<std::size_t>(n));
    const auto alphas = ges.alphas();
    const auto betas = ges.betas();
    for (Index j = 0; j < n; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        const Complex alpha = alphas(j);
        const double beta = betas(j);
        if (std::abs(beta) <= tiny) {
            if (std::abs(alpha) <= tiny) throw NumericalError("generalized_eig: singular pencil (alpha = beta = 0)");
            q.infinite[jj] = true;
            q.values[jj] = Complex(std::numeric_limits<double>::infinity(), 0.0);
        } else {
            q.infinite[jj] = false;
            q.values[jj] = alpha / beta;
        }
    }
    q.vectors = ges.eigenvectors();
    normalize_columns(q.vectors);
    return q;
}

inline GeneralizedEigenResult pencil_qz(const Matrix& M, const Matrix& N, const GeneralizedEigOptions& opt) {
    GeneralizedEigenResult res;
    res.used_qz = true;
    res.scale = std::max(M.norm(), N.norm());
    const double tiny = opt.infinite_tol * std::max(res.scale, 1e-300);
    auto right = qz_values(M, N, tiny);
    res.values = std::move(right.values);
    res.infinite = std::move(right.infinite);
    res.right = std::move(right.vectors);
    if (opt.want_left) {
        // y^H M = lambda y^H N  <=>  M^T conj(y) = lambda N^T conj(y) for real M, N
        const auto left = qz_values(M.transpose(), N.transpose(), tiny);
        const Index n = M.rows();
        res.left.resize(n, n);
        std::vector<bool> used(static_cast<std::size_t>(n), false);
        for (Index j = 0; j < n; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            Index best = -1;
            double dist = std::numeric_limits<double>::infinity();
            for (Index i = 0; i < n; ++i) {
                const auto ii = static_cast<std::size_t>(i);
                if (used[ii] || left.infinite[ii] != res.infinite[jj]) continue;
                const double d = res.infinite[jj] ? 0.0 : std::abs(left.values[ii] - res.values[jj]);
                if (d < dist) {
                    dist = d;
                    best = i;
                }
            }
            if (best < 0) throw NumericalError("generalized_eig: left and right spectra do not pair up");
            used[static_cast<std::size_t>(best)] = true;
            res.left.col(j) = left.vectors.col(best).conjugate();
        }
        res.has_left = true;
    }
    return res;
}

} // namespace detail

/// Full spectrum of the pencil (M, N) with unit right (and optionally left)
/// eigenvectors. Infinite eigenvalues are flagged and stored as +inf.
inline GeneralizedEigenResult generalized_eig(const Matrix& M, const Matrix& N,
                                              const GeneralizedEigOptions& opt = {}) {
    detail::require_shape(M.rows() == M.cols() && N.rows() == N.cols() && M.rows() == N.rows(),
                          "generalized_eig: M and N must be square and of equal size");
    if (!detail::all_finite(M) || !detail::all_finite(N))
        throw NumericalError("generalized_eig: non-finite input");
    const Index n = M.rows();
    if (n == 0) return {};

    GeneralizedEigenResult res;
    bool done = false;
    if (opt.method == PencilMethod::Auto && !opt.want_left) {
        Eigen::PartialPivLU<Matrix> lu(N);
        const double rc = lu.rcond();
        if (rc > opt.min_rcond) {
            const Matrix C = lu.solve(M);
            Eigen::EigenSolver<Matrix> es(C, true);
            if (es.info() == Eigen::Success && C.allFinite()) {
                const auto ev = es.eigenvalues();
                res.values.assign(ev.data(), ev.data() + n);
                res.infinite.assign(static_cast<std::size_t>(n), false);
                res.right = es.eigenvectors();
                detail::normalize_columns(res.right);
                res.scale = std::max(M.norm(), N.norm());
                res.rcond_N = rc;
                done = true;
            }
        }
    }
    if (!done) res = detail::pencil_qz(M, N, opt);
    if (opt.verify) detail::fill_residual(M, N, res);
    return res;
}

// ---------------------------------------------------------------------------
// Ritz value selection

enum class RitzRule {
    PositiveReal, ///< smallest modulus among Re(lambda) > 0
    PositiveImag, ///< smallest modulus among Im(lambda) > 0
};

struct RitzSelection {
    std::vector<Index> indices; ///< into GeneralizedEigenResult::values, in selection order
    bool padded = false;        ///< fewer than `count` values satisfied the rule
};

/// Picks up to `count` finite eigenvalues. Order: modulus ascending, then real
/// part ascending, then positive imaginary part first. When fewer than `count`
/// satisfy the rule, the remainder is filled with the smallest-modulus finite
/// values that do not, and `padded` is set.
inline RitzSelection select_ritz(const GeneralizedEigenResult& res, Index count,
                                 RitzRule rule = RitzRule::PositiveReal) {
    auto before = [&](Index a, Index b) {
        const Complex la = res.values[static_cast<std::size_t>(a)];
        const Complex lb = res.values[static_cast<std::size_t>(b)];
        const double ma = std::abs(la), mb = std::abs(lb);
        if (ma != mb) return ma < mb;
        if (la.real() != lb.real()) return la.real() < lb.real();
        if (la.imag() != lb.imag()) return la.imag() > lb.imag();
        return a < b;
    };
    std::vector<Index> eligible, rest;
    for (Index j = 0; j < res.size(); ++j) {
        if (!res.is_finite(j)) continue;
        const Complex l = res.values[static_cast<std::size_t>(j)];
        const bool ok = rule == RitzRule::PositiveReal ? l.real() > 0.0 : l.imag() > 0.0;
        (ok ? eligible : rest).push_back(j);
    }
    std::sort(eligible.begin(), eligible.end(), before);
    std::sort(rest.begin(), rest.end(), before);

    RitzSelection sel;
    const auto want = static_cast<std::size_t>(std::max<Index>(count, 0));
    for (Index j : eligible) {
        if (sel.indices.size() == want) break;
        sel.indices.push_back(j);
    }
    if (sel.indices.size() < want) {
        sel.padded = true;
        for (Index j : rest) {
            if (sel.indices.size() == want) break;
            sel.indices.push_back(j);
        }
    }
    return sel;
}

} // namespace ttmep
