#pragma once

// Tensor-train vectors and operators.
//
// Index convention: a multi-index (i_1, ..., i_m) is linearized with i_1
// slowest and i_m fastest, i.e. the dense vector of x_1 (x) ... (x) x_m is the
// ordinary Kronecker product kron(x_1, kron(x_2, ...)). Every densify-based
// comparison in the library and its tests uses this one ordering.
//
// Core storage is row-major: a vector core G_k of shape (r_{k-1}, n_k, r_k)
// stores G(a, i, b) at ((a * n_k) + i) * r_k + b, so its left unfolding
// ((a,i) x b) and right unfolding (a x (i,b)) are plain row-major views of the
// same buffer. Operator cores (r_{k-1}, n_k, n_k, r_k) use
// (((a * n_k) + i) * n_k + j) * r_k + b with i the row and j the column index;
// fusing (i, j) into one mode of size n_k^2 gives exactly a vector core.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ttmep/dense.hpp"
#include "ttmep/error.hpp"

namespace ttmep {

/// Dense fallbacks refuse to materialize more entries than this.
inline constexpr Index kDenseCap = 10'000'000;

/// Third-order TT core of shape (left, size, right).
class TensorCore {
public:
    TensorCore() = default;
    TensorCore(Index left, Index size, Index right)
        : left_(left), size_(size), right_(right), data_(static_cast<std::size_t>(left * size * right), 0.0) {
        detail::require_shape(left > 0 && size > 0 && right > 0, "TensorCore: dimensions must be positive");
    }

    /// Core whose left unfolding ((left*size) x right) equals `unfolding`.
    static TensorCore from_left_unfolding(const Matrix& unfolding, Index left, Index size) {
        detail::require_shape(unfolding.rows() == left * size, "from_left_unfolding: row count mismatch");
        TensorCore c(left, size, unfolding.cols());
        Eigen::Map<RowMajorMatrix>(c.data_.data(), left * size, unfolding.cols()) = unfolding;
        return c;
    }

    /// Core whose right unfolding (left x (size*right)) equals `unfolding`.
    static TensorCore from_right_unfolding(const Matrix& unfolding, Index size, Index right) {
        detail::require_shape(unfolding.cols() == size * right, "from_right_unfolding: column count mismatch");
        TensorCore c(unfolding.rows(), size, right);
        Eigen::Map<RowMajorMatrix>(c.data_.data(), unfolding.rows(), size * right) = unfolding;
        return c;
    }

    Index left_rank() const { return left_; }
    Index mode_size() const { return size_; }
    Index right_rank() const { return right_; }
    Index numel() const { return left_ * size_ * right_; }

    double& operator()(Index a, Index i, Index b) { return data_[offset(a, i, b)]; }
    double operator()(Index a, Index i, Index b) const { return data_[offset(a, i, b)]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    /// G(i) as a left x right matrix.
    Matrix slice(Index i) const {
        Matrix s(left_, right_);
        for (Index a = 0; a < left_; ++a)
            for (Index b = 0; b < right_; ++b) s(a, b) = (*this)(a, i, b);
        return s;
    }

    Matrix left_unfolding() const {
        return Eigen::Map<const RowMajorMatrix>(data_.data(), left_ * size_, right_);
    }
    Matrix right_unfolding() const {
        return Eigen::Map<const RowMajorMatrix>(data_.data(), left_, size_ * right_);
    }

    double frobenius_norm() const {
        double s = 0;
        for (double v : data_) s += v * v;
        return std::sqrt(s);
    }

    bool operator==(const TensorCore&) const = default;

private:
    std::size_t offset(Index a, Index i, Index b) const {
        return static_cast<std::size_t>((a * size_ + i) * right_ + b);
    }

    Index left_ = 0;
    Index size_ = 0;
    Index right_ = 0;
    std::vector<double> data_;
};

/// Fourth-order operator core of shape (left, n, n, right).
class OperatorCore {
public:
    OperatorCore() = default;
    OperatorCore(Index left, Index n, Index right) : n_(n), fused_(left, n * n, right) {}
    /// View a fused-mode core (mode size n*n) as an operator core.
    OperatorCore(TensorCore fused, Index n) : n_(n), fused_(std::move(fused)) {
        detail::require_shape(fused_.mode_size() == n * n, "OperatorCore: fused mode size must be n*n");
    }

    Index left_rank() const { return fused_.left_rank(); }
    Index mode_size() const { return n_; }
    Index right_rank() const { return fused_.right_rank(); }

    double& operator()(Index a, Index i, Index j, Index b) { return fused_(a, i * n_ + j, b); }
    double operator()(Index a, Index i, Index j, Index b) const { return fused_(a, i * n_ + j, b); }

    /// G(i, j) as a left x right matrix.
    Matrix slice(Index i, Index j) const { return fused_.slice(i * n_ + j); }

    const TensorCore& fused() const { return fused_; }
    TensorCore& fused() { return fused_; }

    bool operator==(const OperatorCore&) const = default;

private:
    Index n_ = 0;
    TensorCore fused_;
};

namespace detail {

template <typename Core>
void check_chain(const std::vector<Core>& cores, const char* what) {
    require_shape(!cores.empty(), std::string(what) + ": needs at least one core");
    require_shape(cores.front().left_rank() == 1, std::string(what) + ": r_0 must be 1");
    require_shape(cores.back().right_rank() == 1, std::string(what) + ": r_m must be 1");
    for (std::size_t k = 0; k + 1 < cores.size(); ++k)
        require_shape(cores[k].right_rank() == cores[k + 1].left_rank(),
                      std::string(what) + ": adjacent ranks do not match at core " + std::to_string(k));
}

inline Index checked_product(const std::vector<Index>& sizes, Index cap, const char* what) {
    double p = 1.0;
    for (Index n : sizes) p *= static_cast<double>(n);
    if (p > static_cast<double>(cap))
        throw CapExceeded(std::string(what) + ": " + std::to_string(static_cast<long double>(p)) +
                          " entries exceed cap " + std::to_string(cap));
    return static_cast<Index>(p);
}

} // namespace detail

/// A vector in R^{n_1 ... n_m} as a train of third-order cores.
class TTVector {
public:
    TTVector() = default;
    explicit TTVector(std::vector<TensorCore> cores) : cores_(std::move(cores)) {
        detail::check_chain(cores_, "TTVector");
    }

    /// x_1 (x) ... (x) x_m with all ranks 1.
    static TTVector rank_one(const std::vector<Vector>& factors) {
        std::vector<TensorCore> cores;
        for (const auto& f : factors) {
            TensorCore c(1, f.size(), 1);
            for (Index i = 0; i < f.size(); ++i) c(0, i, 0) = f(i);
            cores.push_back(std::move(c));
        }
        return TTVector(std::move(cores));
    }

    Index order() const { return static_cast<Index>(cores_.size()); }
    std::vector<Index> mode_sizes() const {
        std::vector<Index> n;
        for (const auto& c : cores_) n.push_back(c.mode_size());
        return n;
    }
    std::vector<Index> ranks() const {
        std::vector<Index> r{1};
        for (const auto& c : cores_) r.push_back(c.right_rank());
        return r;
    }

    const TensorCore& core(Index k) const { return cores_.at(static_cast<std::size_t>(k)); }
    TensorCore& core(Index k) { return cores_.at(static_cast<std::size_t>(k)); }
    const std::vector<TensorCore>& cores() const { return cores_; }
    std::vector<TensorCore>& cores() { return cores_; }

    bool operator==(const TTVector&) const = default;

private:
    std::vector<TensorCore> cores_;
};

/// A matrix on R^{n_1 ... n_m} as a train of fourth-order cores.
class TTOperator {
public:
    TTOperator() = default;
    explicit TTOperator(std::vector<OperatorCore> cores) : cores_(std::move(cores)) {
        detail::check_chain(cores_, "TTOperator");
    }

    /// M_1 (x) ... (x) M_m with all ranks 1.
    static TTOperator kronecker(const std::vector<Matrix>& factors) {
        std::vector<OperatorCore> cores;
        for (const auto& f : factors) {
            detail::require_shape(f.rows() == f.cols(), "TTOperator::kronecker: factors must be square");
            OperatorCore c(1, f.rows(), 1);
            for (Index i = 0; i < f.rows(); ++i)
                for (Index j = 0; j < f.cols(); ++j) c(0, i, j, 0) = f(i, j);
            cores.push_back(std::move(c));
        }
        return TTOperator(std::move(cores));
    }

    static TTOperator identity(const std::vector<Index>& sizes) {
        std::vector<Matrix> f;
        for (Index n : sizes) f.push_back(Matrix::Identity(n, n));
        return kronecker(f);
    }

    Index order() const { return static_cast<Index>(cores_.size()); }
    std::vector<Index> mode_sizes() const {
        std::vector<Index> n;
        for (const auto& c : cores_) n.push_back(c.mode_size());
        return n;
    }
    std::vector<Index> ranks() const {
        std::vector<Index> r{1};
        for (const auto& c : cores_) r.push_back(c.right_rank());
        return r;
    }

    const OperatorCore& core(Index k) const { return cores_.at(static_cast<std::size_t>(k)); }
    OperatorCore& core(Index k) { return cores_.at(static_cast<std::size_t>(k)); }
    const std::vector<OperatorCore>& cores() const { return cores_; }

    /// Same train with each core's (i, j) fused into one mode of size n^2.
    TTVector fused() const {
        std::vector<TensorCore> c;
        for (const auto& oc : cores_) c.push_back(oc.fused());
        return TTVector(std::move(c));
    }
    static TTOperator from_fused(const TTVector& v, const std::vector<Index>& sizes) {
        detail::require_shape(static_cast<Index>(sizes.size()) == v.order(), "from_fused: order mismatch");
        std::vector<OperatorCore> c;
        for (Index k = 0; k < v.order(); ++k) c.emplace_back(v.core(k), sizes[static_cast<std::size_t>(k)]);
        return TTOperator(std::move(c));
    }

    bool operator==(const TTOperator&) const = default;

private:
    std::vector<OperatorCore> cores_;
};

// ---------------------------------------------------------------------------
// Evaluation and densification

inline double evaluate(const TTVector& v, std::span<const Index> index) {
    detail::require_shape(static_cast<Index>(index.size()) == v.order(), "evaluate: index length != order");
    RowMajorMatrix acc = RowMajorMatrix::Ones(1, 1);
    for (Index k = 0; k < v.order(); ++k) {
        const Index i = index[static_cast<std::size_t>(k)];
        if (i < 0 || i >= v.core(k).mode_size())
            throw std::out_of_range("evaluate: index " + std::to_string(i) + " out of range in mode " +
                                    std::to_string(k));
        acc = acc * v.core(k).slice(i);
    }
    return acc(0, 0);
}

inline double evaluate(const TTOperator& A, std::span<const Index> row, std::span<const Index> col) {
    detail::require_shape(static_cast<Index>(row.size()) == A.order() && static_cast<Index>(col.size()) == A.order(),
                          "evaluate: index length != order");
    RowMajorMatrix acc = RowMajorMatrix::Ones(1, 1);
    for (Index k = 0; k < A.order(); ++k) {
        const Index i = row[static_cast<std::size_t>(k)], j = col[static_cast<std::size_t>(k)];
        const Index n = A.core(k).mode_size();
        if (i < 0 || i >= n || j < 0 || j >= n) throw std::out_of_range("evaluate: operator index out of range");
        acc = acc * A.core(k).slice(i, j);
    }
    return acc(0, 0);
}

/// Dense vector of length n_1...n_m (i_1 slowest).
inline Vector densify(const TTVector& v, Index cap = kDenseCap) {
    detail::checked_product(v.mode_sizes(), cap, "densify");
    // acc is (prefix length) x r_k, row-major so that appending a mode is a reshape.
    RowMajorMatrix acc = RowMajorMatrix::Ones(1, 1);
    for (const auto& c : v.cores()) {
        RowMajorMatrix next = acc * c.right_unfolding();
        const Index rows = next.rows() * c.mode_size();
        acc = Eigen::Map<RowMajorMatrix>(next.data(), rows, c.right_rank());
    }
    return Eigen::Map<Vector>(acc.data(), acc.size());
}

/// Dense matrix of size (n_1...n_m)^2; the cap applies to the entry count.
inline Matrix densify(const TTOperator& A, Index cap = kDenseCap) {
    std::vector<Index> sq;
    for (Index n : A.mode_sizes()) sq.push_back(n * n);
    detail::checked_product(sq, cap, "densify(operator)");
    const Vector fused = densify(A.fused(), cap);
    // fused index order is (i_1 j_1 i_2 j_2 ...); regroup to rows (i_1..i_m), cols (j_1..j_m)
    const auto sizes = A.mode_sizes();
    Index N = 1;
    for (Index n : sizes) N *= n;
    Matrix out(N, N);
    const Index m = A.order();
    std::vector<Index> digits(static_cast<std::size_t>(2 * m), 0);
    for (Index f = 0; f < fused.size(); ++f) {
        Index rem = f;
        for (Index k = m - 1; k >= 0; --k) {
            const Index n = sizes[static_cast<std::size_t>(k)];
            digits[static_cast<std::size_t>(2 * k + 1)] = rem % n;
            rem /= n;
            digits[static_cast<std::size_t>(2 * k)] = rem % n;
            rem /= n;
        }
        Index r = 0, c = 0;
        for (Index k = 0; k < m; ++k) {
            const Index n = sizes[static_cast<std::size_t>(k)];
            r = r * n + digits[static_cast<std::size_t>(2 * k)];
            c = c * n + digits[static_cast<std::size_t>(2 * k + 1)];
        }
        out(r, c) = fused(f);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Arithmetic

/// Z = A v with core-wise G^Z(i) = sum_j G^A(i,j) (x) G^v(j); ranks multiply.
inline TTVector tt_matvec(const TTOperator& A, const TTVector& v) {
    detail::require_shape(A.mode_sizes() == v.mode_sizes(), "tt_matvec: mode sizes differ");
    std::vector<TensorCore> out;
    for (Index k = 0; k < v.order(); ++k) {
        const auto& a = A.core(k);
        const auto& x = v.core(k);
        const Index ra0 = a.left_rank(), ra1 = a.right_rank(), rx0 = x.left_rank(), rx1 = x.right_rank();
        const Index n = x.mode_size();
        TensorCore z(ra0 * rx0, n, ra1 * rx1);
        for (Index al = 0; al < ra0; ++al)
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < n; ++j)
                    for (Index be = 0; be < ra1; ++be) {
                        const double aij = a(al, i, j, be);
                        if (aij == 0.0) continue;
                        for (Index p = 0; p < rx0; ++p)
                            for (Index q = 0; q < rx1; ++q) z(al * rx0 + p, i, be * rx1 + q) += aij * x(p, j, q);
                    }
        out.push_back(std::move(z));
    }
    return TTVector(std::move(out));
}

/// Euclidean inner product of two TT vectors with equal mode sizes.
inline double dot(const TTVector& x, const TTVector& y) {
    detail::require_shape(x.mode_sizes() == y.mode_sizes(), "dot: mode sizes differ");
    Matrix env = Matrix::Ones(1, 1);
    for (Index k = 0; k < x.order(); ++k) {
        const auto& cx = x.core(k);
        const auto& cy = y.core(k);
        Matrix next = Matrix::Zero(cx.right_rank(), cy.right_rank());
        for (Index i = 0; i < cx.mode_size(); ++i) next += cx.slice(i).transpose() * env * cy.slice(i);
        env = std::move(next);
    }
    return env(0, 0);
}

inline double norm(const TTVector& x) { return std::sqrt(std::max(0.0, dot(x, x))); }

// ---------------------------------------------------------------------------
// Orthonormalization

/// Makes core k left-orthonormal (sum_i G(i)^T G(i) = I) via a thin QR of its
/// left unfolding. Returns R (new_rank x old right rank); the caller must
/// absorb it into core k+1 (see absorb_into_next) to keep the tensor intact.
inline Matrix left_orthonormalize_core(std::vector<TensorCore>& cores, Index k) {
    detail::require_shape(k >= 0 && k < static_cast<Index>(cores.size()), "left_orthonormalize_core: bad k");
    auto& c = cores[static_cast<std::size_t>(k)];
    auto qr = thin_qr(c.left_unfolding());
    c = TensorCore::from_left_unfolding(qr.Q, c.left_rank(), c.mode_size());
    return qr.R;
}

/// Makes core k right-orthonormal (sum_i G(i) G(i)^T = I). Returns L
/// (old left rank x new_rank) with old core = L * new core; absorb it into
/// core k-1 with absorb_into_prev.
inline Matrix right_orthonormalize_core(std::vector<TensorCore>& cores, Index k) {
    detail::require_shape(k >= 0 && k < static_cast<Index>(cores.size()), "right_orthonormalize_core: bad k");
    auto& c = cores[static_cast<std::size_t>(k)];
    auto qr = thin_qr(c.right_unfolding().transpose());
    c = TensorCore::from_right_unfolding(qr.Q.transpose(), c.mode_size(), c.right_rank());
    return qr.R.transpose();
}

/// core(k) <- R * core(k) (acting on the left rank).
inline void absorb_left_factor(TensorCore& core, const Matrix& R) {
    detail::require_shape(R.cols() == core.left_rank(), "absorb_left_factor: rank mismatch");
    core = TensorCore::from_right_unfolding(R * core.right_unfolding(), core.mode_size(), core.right_rank());
}

/// core(k) <- core(k) * L (acting on the right rank).
inline void absorb_right_factor(TensorCore& core, const Matrix& L) {
    detail::require_shape(L.rows() == core.right_rank(), "absorb_right_factor: rank mismatch");
    core = TensorCore::from_left_unfolding(core.left_unfolding() * L, core.left_rank(), core.mode_size());
}

inline void absorb_into_next(std::vector<TensorCore>& cores, Index k, const Matrix& R) {
    detail::require_shape(k + 1 < static_cast<Index>(cores.size()), "absorb_into_next: no next core");
    absorb_left_factor(cores[static_cast<std::size_t>(k + 1)], R);
}

inline void absorb_into_prev(std::vector<TensorCore>& cores, Index k, const Matrix& L) {
    detail::require_shape(k >= 1, "absorb_into_prev: no previous core");
    absorb_right_factor(cores[static_cast<std::size_t>(k - 1)], L);
}

inline bool is_left_orthonormal(const TensorCore& c, double tol = 1e-12) {
    const Matrix U = c.left_unfolding();
    return (U.transpose() * U - Matrix::Identity(U.cols(), U.cols())).cwiseAbs().maxCoeff() <= tol;
}

inline bool is_right_orthonormal(const TensorCore& c, double tol = 1e-12) {
    const Matrix W = c.right_unfolding();
    return (W * W.transpose() - Matrix::Identity(W.rows(), W.rows())).cwiseAbs().maxCoeff() <= tol;
}

// ---------------------------------------------------------------------------
// Rounding

/// Singular values at or below this fraction of the largest are always dropped.
inline constexpr double kRelativeSingularFloor = 1e-14;

namespace detail {

/// Smallest rank t with sqrt(sum_{j >= t} s_j^2) <= delta, s_j > floor*s_0, t <= cap.
inline Index truncation_rank(const Vector& s, double delta, std::optional<Index> cap) {
    const Index n = s.size();
    if (n == 0) return 0;
    Index t = n;
    double tail = 0.0;
    while (t > 1) {
        const double next = tail + s(t - 1) * s(t - 1);
        if (std::sqrt(next) > delta && s(t - 1) > kRelativeSingularFloor * s(0)) break;
        tail = next;
        --t;
    }
    if (cap) t = std::min(t, std::max<Index>(1, *cap));
    return std::max<Index>(t, 1);
}

} // namespace detail

/// Rounds `v` to lower ranks with relative Frobenius error at most `tol`
/// (per-bond truncation at tol / sqrt(m-1)) and optional rank cap. With
/// tol == 0 only numerically zero singular values are dropped.
inline TTVector tt_round(const TTVector& v, double tol, std::optional<Index> max_rank = std::nullopt) {
    detail::require_valid(tol >= 0.0, "tt_round: tol must be nonnegative");
    auto cores = v.cores();
    const Index m = static_cast<Index>(cores.size());
    if (m == 1) return TTVector(std::move(cores));
    for (Index k = m - 1; k >= 1; --k) {
        const Matrix L = right_orthonormalize_core(cores, k);
        absorb_into_prev(cores, k, L);
    }
    const double total = cores.front().frobenius_norm();
    const double delta = tol / std::sqrt(static_cast<double>(m - 1)) * total;
    for (Index k = 0; k + 1 < m; ++k) {
        auto& c = cores[static_cast<std::size_t>(k)];
        const auto dec = svd(c.left_unfolding());
        const Index t = detail::truncation_rank(dec.S, delta, max_rank);
        c = TensorCore::from_left_unfolding(dec.U.leftCols(t), c.left_rank(), c.mode_size());
        const Matrix carry = dec.S.head(t).asDiagonal() * dec.V.leftCols(t).transpose();
        absorb_into_next(cores, k, carry);
    }
    return TTVector(std::move(cores));
}

/// tt_round on the fused (n_k^2) modes of an operator.
inline TTOperator tt_round_operator(const TTOperator& A, double tol, std::optional<Index> max_rank = std::nullopt) {
    return TTOperator::from_fused(tt_round(A.fused(), tol, max_rank), A.mode_sizes());
}

} // namespace ttmep
