#pragma once

// Frame matrices X_{!=k} = X^{<k} (x) I_{n_k} (x) (X^{>k})^T and block-TT
// iterates.
//
// The frame is never formed. Products X_{!=k}^T A X_{!=k} go through
// "environments": E^{<k}(a, alpha, a') is the contraction of cores 1..k-1 of
// the frame (bra and ket) with operator cores 1..k-1, and E^{>k}(b, beta, b')
// the same from the right. Both are stored flat as ((a * r_A) + alpha) * r + a'.

#include <random>
#include <vector>

#include "ttmep/tt_tensor.hpp"

namespace ttmep {

/// Partial contraction <X| A |X> over a contiguous set of modes.
struct Environment {
    Index bra = 1;
    Index op = 1;
    Index ket = 1;
    std::vector<double> data{1.0};

    static Environment boundary() { return {}; }

    double operator()(Index a, Index alpha, Index ap) const {
        return data[static_cast<std::size_t>((a * op + alpha) * ket + ap)];
    }
    double& operator()(Index a, Index alpha, Index ap) {
        return data[static_cast<std::size_t>((a * op + alpha) * ket + ap)];
    }
    /// Slice alpha as a bra x ket matrix.
    Matrix slice(Index alpha) const {
        Matrix s(bra, ket);
        for (Index a = 0; a < bra; ++a)
            for (Index ap = 0; ap < ket; ++ap) s(a, ap) = (*this)(a, alpha, ap);
        return s;
    }
};

/// E^{<k+1} from E^{<k}, frame core X_k and operator core A_k.
inline Environment extend_left(const Environment& E, const TensorCore& X, const OperatorCore& A) {
    const Index ra = X.left_rank(), n = X.mode_size(), rb = X.right_rank();
    const Index ral = A.left_rank(), rbe = A.right_rank();
    detail::require_shape(E.bra == ra && E.ket == ra && E.op == ral && A.mode_size() == n,
                          "extend_left: incompatible environment/core/operator");
    const Matrix Xr = X.right_unfolding(); // ra x (n rb)
    // T2[a, i, beta, b'] = sum_{alpha, j} A[alpha,i,j,beta] (E_alpha X)[a, j, b']
    std::vector<double> t2(static_cast<std::size_t>(ra * n * rbe * rb), 0.0);
    for (Index al = 0; al < ral; ++al) {
        const RowMajorMatrix t1 = E.slice(al) * Xr; // ra x (n rb), entry (a, j*rb + b')
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                for (Index be = 0; be < rbe; ++be) {
                    const double c = A(al, i, j, be);
                    if (c == 0.0) continue;
                    for (Index a = 0; a < ra; ++a) {
                        double* dst = &t2[static_cast<std::size_t>(((a * n + i) * rbe + be) * rb)];
                        const double* src = t1.data() + a * n * rb + j * rb;
                        for (Index bp = 0; bp < rb; ++bp) dst[bp] += c * src[bp];
                    }
                }
    }
    const Eigen::Map<const RowMajorMatrix> T2(t2.data(), ra * n, rbe * rb);
    const RowMajorMatrix out = X.left_unfolding().transpose() * T2; // rb x (rbe rb)
    Environment res{rb, rbe, rb, std::vector<double>(out.data(), out.data() + out.size())};
    return res;
}

/// E^{>k-1} from E^{>k}, frame core X_k and operator core A_k.
inline Environment extend_right(const Environment& E, const TensorCore& X, const OperatorCore& A) {
    const Index ra = X.left_rank(), n = X.mode_size(), rb = X.right_rank();
    const Index ral = A.left_rank(), rbe = A.right_rank();
    detail::require_shape(E.bra == rb && E.ket == rb && E.op == rbe && A.mode_size() == n,
                          "extend_right: incompatible environment/core/operator");
    // T1[(a', j), (b, beta)] = sum_b' X[a', j, b'] E[b, beta, b']
    const Eigen::Map<const RowMajorMatrix> Em(E.data.data(), rb * rbe, rb); // ((b,beta), b')
    const RowMajorMatrix t1 = X.left_unfolding() * Em.transpose();       // (ra n) x (rb rbe)
    // T2[alpha, i, b, a'] = sum_{j, beta} A[alpha,i,j,beta] T1[a', j, b, beta]
    std::vector<double> t2(static_cast<std::size_t>(ral * n * rb * ra), 0.0);
    for (Index al = 0; al < ral; ++al)
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                for (Index be = 0; be < rbe; ++be) {
                    const double c = A(al, i, j, be);
                    if (c == 0.0) continue;
                    for (Index b = 0; b < rb; ++b) {
                        double* dst = &t2[static_cast<std::size_t>(((al * n + i) * rb + b) * ra)];
                        for (Index ap = 0; ap < ra; ++ap) dst[ap] += c * t1(ap * n + j, b * rbe + be);
                    }
                }
    // E'[a, alpha, a'] = sum_{i,b} X[a,i,b] T2[alpha, (i,b), a']
    const Matrix Xr = X.right_unfolding(); // ra x (n rb)
    Environment res{ra, ral, ra, std::vector<double>(static_cast<std::size_t>(ra * ral * ra), 0.0)};
    for (Index al = 0; al < ral; ++al) {
        const Eigen::Map<const RowMajorMatrix> T(t2.data() + al * n * rb * ra, n * rb, ra);
        const Matrix s = Xr * T; // ra x ra
        for (Index a = 0; a < ra; ++a)
            for (Index ap = 0; ap < ra; ++ap) res(a, al, ap) = s(a, ap);
    }
    return res;
}

/// (X_{!=k}^T A X_{!=k}) y for a local vector y indexed (a', j, b').
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> local_apply(const Environment& L, const OperatorCore& A,
                                                      const Environment& R,
                                                      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& y) {
    const Index ra = L.bra, n = A.mode_size(), rb = R.bra;
    const Index ral = A.left_rank(), rbe = A.right_rank();
    detail::require_shape(L.op == ral && R.op == rbe && y.size() == L.ket * n * R.ket,
                          "local_apply: incompatible sizes");
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Map<const Mat> Y(y.data(), L.ket, n * R.ket);
    std::vector<Scalar> t2(static_cast<std::size_t>(ra * n * rbe * R.ket), Scalar(0));
    for (Index al = 0; al < ral; ++al) {
        const Mat t1 = L.slice(al).template cast<Scalar>() * Y; // ra x (n ket)
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                for (Index be = 0; be < rbe; ++be) {
                    const double c = A(al, i, j, be);
                    if (c == 0.0) continue;
                    for (Index a = 0; a < ra; ++a) {
                        Scalar* dst = &t2[static_cast<std::size_t>(((a * n + i) * rbe + be) * R.ket)];
                        const Scalar* src = t1.data() + a * n * R.ket + j * R.ket;
                        for (Index bp = 0; bp < R.ket; ++bp) dst[bp] += c * src[bp];
                    }
                }
    }
    const Eigen::Map<const Mat> T2(t2.data(), ra * n, rbe * R.ket);
    const Eigen::Map<const RowMajorMatrix> Rm(R.data.data(), rb, rbe * R.ket);
    const Mat out = T2 * Rm.transpose().template cast<Scalar>(); // (ra n) x rb
    return Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(out.data(), out.size());
}

/// Explicit X_{!=k}^T A X_{!=k}, rows (a, i, b), columns (a', j, b').
inline Matrix local_project(const Environment& L, const OperatorCore& A, const Environment& R) {
    const Index ra = L.bra, rap = L.ket, n = A.mode_size(), rb = R.bra, rbp = R.ket;
    const Index ral = A.left_rank(), rbe = A.right_rank();
    detail::require_shape(L.op == ral && R.op == rbe, "local_project: incompatible sizes");
    // S[(a,a'), (i,j,beta)] = sum_alpha L[a,alpha,a'] A[alpha, i, j, beta]
    RowMajorMatrix Lm(ra * rap, ral);
    for (Index a = 0; a < ra; ++a)
        for (Index al = 0; al < ral; ++al)
            for (Index ap = 0; ap < rap; ++ap) Lm(a * rap + ap, al) = L(a, al, ap);
    const Eigen::Map<const RowMajorMatrix> Am(A.fused().data().data(), ral, n * n * rbe);
    const RowMajorMatrix S = Lm * Am;
    // Rm[beta, (b, b')]
    RowMajorMatrix Rm(rbe, rb * rbp);
    for (Index b = 0; b < rb; ++b)
        for (Index be = 0; be < rbe; ++be)
            for (Index bp = 0; bp < rbp; ++bp) Rm(be, b * rbp + bp) = R(b, be, bp);
    Matrix P(ra * n * rb, rap * n * rbp);
    for (Index a = 0; a < ra; ++a)
        for (Index ap = 0; ap < rap; ++ap) {
            const Eigen::Map<const RowMajorMatrix> Sa(S.data() + (a * rap + ap) * n * n * rbe, n * n, rbe);
            const RowMajorMatrix blk = Sa * Rm; // ((i,j), (b,b'))
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < n; ++j)
                    for (Index b = 0; b < rb; ++b)
                        for (Index bp = 0; bp < rbp; ++bp)
                            P((a * n + i) * rb + b, (ap * n + j) * rbp + bp) = blk(i * n + j, b * rbp + bp);
        }
    return P;
}

/// The frame X_{!=k} defined by the cores of a train other than core k.
/// Cores before k must be left-orthonormal and cores after k
/// right-orthonormal for the frame to have orthonormal columns.
struct FrameContext {
    const std::vector<TensorCore>* cores = nullptr;
    Index k = 0;

    Index order() const { return static_cast<Index>(cores->size()); }
    const TensorCore& core(Index j) const { return (*cores)[static_cast<std::size_t>(j)]; }
    Index left_rank() const { return k == 0 ? 1 : core(k - 1).right_rank(); }
    Index right_rank() const { return k + 1 == order() ? 1 : core(k + 1).left_rank(); }
    Index mode_size() const { return core(k).mode_size(); }
    Index local_size() const { return left_rank() * mode_size() * right_rank(); }

    Environment left_environment(const TTOperator& A) const {
        Environment E = Environment::boundary();
        for (Index j = 0; j < k; ++j) E = extend_left(E, core(j), A.core(j));
        return E;
    }
    Environment right_environment(const TTOperator& A) const {
        Environment E = Environment::boundary();
        for (Index j = order() - 1; j > k; --j) E = extend_right(E, core(j), A.core(j));
        return E;
    }
};

inline void check_frame_operator(const FrameContext& F, const TTOperator& A) {
    detail::require_shape(F.cores != nullptr && F.k >= 0 && F.k < F.order(), "frame: invalid index k");
    detail::require_shape(A.order() == F.order(), "frame: operator order mismatch");
    for (Index j = 0; j < F.order(); ++j)
        detail::require_shape(A.core(j).mode_size() == F.core(j).mode_size(), "frame: mode size mismatch");
}

/// X_{!=k}^T A X_{!=k} y, computed core by core.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> frame_apply(const FrameContext& F, const TTOperator& A,
                                                      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& y) {
    check_frame_operator(F, A);
    detail::require_shape(y.size() == F.local_size(), "frame_apply: vector length != r_{k-1} n_k r_k");
    return local_apply<Scalar>(F.left_environment(A), A.core(F.k), F.right_environment(A), y);
}

/// Explicit projected matrix; refuses when it would exceed `cap` entries.
inline Matrix frame_project(const FrameContext& F, const TTOperator& A, Index cap = kDenseCap) {
    check_frame_operator(F, A);
    const Index N = F.local_size();
    if (static_cast<double>(N) * static_cast<double>(N) > static_cast<double>(cap))
        throw CapExceeded("frame_project: projected size " + std::to_string(N) + "^2 exceeds cap");
    return local_project(F.left_environment(A), A.core(F.k), F.right_environment(A));
}

// ---------------------------------------------------------------------------
// Block-TT

/// Block core of shape (left, n, b, right), stored at (((a*n + i)*b + c)*right + beta).
class BlockCore {
public:
    BlockCore() = default;
    BlockCore(Index left, Index size, Index cols, Index right)
        : left_(left), size_(size), cols_(cols), right_(right),
          data_(static_cast<std::size_t>(left * size * cols * right), 0.0) {
        detail::require_shape(left > 0 && size > 0 && cols > 0 && right > 0, "BlockCore: dimensions must be positive");
    }

    Index left_rank() const { return left_; }
    Index mode_size() const { return size_; }
    Index block_size() const { return cols_; }
    Index right_rank() const { return right_; }
    Index local_size() const { return left_ * size_ * right_; }

    double& operator()(Index a, Index i, Index c, Index b) { return data_[offset(a, i, c, b)]; }
    double operator()(Index a, Index i, Index c, Index b) const { return data_[offset(a, i, c, b)]; }

    /// Column c as a local vector indexed (a, i, b).
    Vector column(Index c) const {
        Vector v(local_size());
        for (Index a = 0; a < left_; ++a)
            for (Index i = 0; i < size_; ++i)
                for (Index b = 0; b < right_; ++b) v((a * size_ + i) * right_ + b) = (*this)(a, i, c, b);
        return v;
    }
    void set_column(Index c, const Vector& v) {
        detail::require_shape(v.size() == local_size(), "BlockCore::set_column: length mismatch");
        for (Index a = 0; a < left_; ++a)
            for (Index i = 0; i < size_; ++i)
                for (Index b = 0; b < right_; ++b) (*this)(a, i, c, b) = v((a * size_ + i) * right_ + b);
    }
    TensorCore column_core(Index c) const {
        TensorCore t(left_, size_, right_);
        for (Index a = 0; a < left_; ++a)
            for (Index i = 0; i < size_; ++i)
                for (Index b = 0; b < right_; ++b) t(a, i, b) = (*this)(a, i, c, b);
        return t;
    }
    /// All columns as a local_size x b matrix.
    Matrix columns() const {
        Matrix M(local_size(), cols_);
        for (Index c = 0; c < cols_; ++c) M.col(c) = column(c);
        return M;
    }
    static BlockCore from_columns(const Matrix& cols, Index left, Index size, Index right) {
        BlockCore bc(left, size, cols.cols(), right);
        for (Index c = 0; c < cols.cols(); ++c) bc.set_column(c, cols.col(c));
        return bc;
    }

private:
    std::size_t offset(Index a, Index i, Index c, Index b) const {
        return static_cast<std::size_t>(((a * size_ + i) * cols_ + c) * right_ + b);
    }

    Index left_ = 0, size_ = 0, cols_ = 0, right_ = 0;
    std::vector<double> data_;
};

/// b vectors sharing every core except the block core at index k.
class BlockTT {
public:
    BlockTT() = default;
    /// `cores` holds all m cores; the entry at `k` is ignored and replaced by
    /// a placeholder with matching ranks.
    BlockTT(std::vector<TensorCore> cores, BlockCore block, Index k)
        : cores_(std::move(cores)), block_(std::move(block)), k_(k) {
        const Index m = static_cast<Index>(cores_.size());
        detail::require_shape(k >= 0 && k < m, "BlockTT: block index out of range");
        cores_[static_cast<std::size_t>(k)] = TensorCore(block_.left_rank(), block_.mode_size(), block_.right_rank());
        detail::check_chain(cores_, "BlockTT");
    }

    Index order() const { return static_cast<Index>(cores_.size()); }
    Index block_index() const { return k_; }
    Index block_size() const { return block_.block_size(); }
    const BlockCore& block() const { return block_; }
    BlockCore& block() { return block_; }
    const std::vector<TensorCore>& cores() const { return cores_; }
    std::vector<TensorCore>& cores() { return cores_; }
    std::vector<Index> ranks() const {
        std::vector<Index> r{1};
        for (const auto& c : cores_) r.push_back(c.right_rank());
        return r;
    }
    std::vector<Index> mode_sizes() const {
        std::vector<Index> n;
        for (const auto& c : cores_) n.push_back(c.mode_size());
        return n;
    }

    FrameContext frame() const { return {&cores_, k_}; }

    /// Column c as an ordinary TT vector.
    TTVector column(Index c) const {
        auto cores = cores_;
        cores[static_cast<std::size_t>(k_)] = block_.column_core(c);
        return TTVector(std::move(cores));
    }

    /// Replace the block core (same left/right ranks, any block size).
    void set_block(BlockCore block) {
        detail::require_shape(block.left_rank() == block_.left_rank() && block.right_rank() == block_.right_rank() &&
                                  block.mode_size() == block_.mode_size(),
                              "BlockTT::set_block: shape mismatch");
        block_ = std::move(block);
    }

    /// Internal: used by shift_block_core.
    void reset(std::vector<TensorCore> cores, BlockCore block, Index k) { *this = BlockTT(std::move(cores), std::move(block), k); }

private:
    std::vector<TensorCore> cores_;
    BlockCore block_;
    Index k_ = 0;
};

struct ShiftOptions {
    Index target_rank = 6;     ///< cap on the retained SVD rank
    Index kick = 0;            ///< random orthonormal directions appended
    double singular_floor = 1e-14; ///< absolute; singular values at or below are dropped
};

namespace detail {

/// p orthonormal columns orthogonal to the columns of U (U has orthonormal columns).
inline Matrix random_complement(const Matrix& U, Index p, std::mt19937_64& rng) {
    if (p <= 0) return Matrix(U.rows(), 0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix G(U.rows(), p);
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < U.rows(); ++i) G(i, j) = gauss(rng);
    for (int pass = 0; pass < 2; ++pass) G -= U * (U.transpose() * G);
    auto qr = thin_qr(G);
    return qr.Q;
}

inline Index numerical_rank(const Vector& s, double floor) {
    Index t = 0;
    while (t < s.size() && s(t) > floor) ++t;
    return std::max<Index>(t, 1);
}

} // namespace detail

/// Moves the block index of X one step in `direction` (+1 or -1): the block
/// core is unfolded, SVD-truncated to rank min(target_rank, numerical rank),
/// optionally enlarged by `kick` random orthonormal directions (with zero
/// coefficients), and the coefficient factor is pushed into the neighbouring
/// core, which becomes the new block core. The core left behind is left-
/// (direction +1) or right-orthonormal (direction -1).
inline void shift_block_core(BlockTT& X, int direction, const ShiftOptions& opt, std::mt19937_64& rng) {
    const Index m = X.order();
    const Index k = X.block_index();
    detail::require_valid(direction == 1 || direction == -1, "shift_block_core: direction must be +1 or -1");
    detail::require_shape(k + direction >= 0 && k + direction < m, "shift_block_core: cannot move past the boundary");
    const BlockCore& B = X.block();
    const Index ra = B.left_rank(), n = B.mode_size(), b = B.block_size(), rb = B.right_rank();
    auto cores = X.cores();

    if (direction == 1) {
        // rows (a, i), columns (c, beta): this is the raw storage order
        Matrix W(ra * n, b * rb);
        for (Index a = 0; a < ra; ++a)
            for (Index i = 0; i < n; ++i)
                for (Index c = 0; c < b; ++c)
                    for (Index be = 0; be < rb; ++be) W(a * n + i, c * rb + be) = B(a, i, c, be);
        const auto dec = svd(W);
        const Index t = std::min(opt.target_rank, detail::numerical_rank(dec.S, opt.singular_floor));
        const Index p = std::clamp<Index>(opt.kick, 0, W.rows() - t);
        Matrix U(W.rows(), t + p);
        U.leftCols(t) = dec.U.leftCols(t);
        if (p > 0) U.rightCols(p) = detail::random_complement(dec.U.leftCols(t), p, rng);
        Matrix Z = Matrix::Zero(t + p, b * rb);
        Z.topRows(t) = dec.S.head(t).asDiagonal() * dec.V.leftCols(t).transpose();

        cores[static_cast<std::size_t>(k)] = TensorCore::from_left_unfolding(U, ra, n);
        const TensorCore& next = cores[static_cast<std::size_t>(k + 1)];
        const Matrix nextR = next.right_unfolding(); // rb x (n' r')
        const Index n2 = next.mode_size(), r2 = next.right_rank();
        BlockCore nb(t + p, n2, b, r2);
        for (Index c = 0; c < b; ++c) {
            const Matrix prod = Z.middleCols(c * rb, rb) * nextR; // (t+p) x (n' r')
            for (Index j = 0; j < t + p; ++j)
                for (Index i = 0; i < n2; ++i)
                    for (Index be = 0; be < r2; ++be) nb(j, i, c, be) = prod(j, i * r2 + be);
        }
        cores[static_cast<std::size_t>(k + 1)] = TensorCore(t + p, n2, r2);
        X.reset(std::move(cores), std::move(nb), k + 1);
    } else {
        // rows (a, c), columns (i, beta)
        Matrix W(ra * b, n * rb);
        for (Index a = 0; a < ra; ++a)
            for (Index i = 0; i < n; ++i)
                for (Index c = 0; c < b; ++c)
                    for (Index be = 0; be < rb; ++be) W(a * b + c, i * rb + be) = B(a, i, c, be);
        const auto dec = svd(W);
        const Index t = std::min(opt.target_rank, detail::numerical_rank(dec.S, opt.singular_floor));
        const Index p = std::clamp<Index>(opt.kick, 0, W.cols() - t);
        Matrix V(W.cols(), t + p);
        V.leftCols(t) = dec.V.leftCols(t);
        if (p > 0) V.rightCols(p) = detail::random_complement(dec.V.leftCols(t), p, rng);
        Matrix Z = Matrix::Zero(ra * b, t + p);
        Z.leftCols(t) = dec.U.leftCols(t) * dec.S.head(t).asDiagonal();

        cores[static_cast<std::size_t>(k)] = TensorCore::from_right_unfolding(V.transpose(), n, rb);
        const TensorCore& prev = cores[static_cast<std::size_t>(k - 1)];
        const Matrix prevL = prev.left_unfolding(); // (r0 n0) x ra
        const Index r0 = prev.left_rank(), n0 = prev.mode_size();
        BlockCore nb(r0, n0, b, t + p);
        for (Index c = 0; c < b; ++c) {
            Matrix Zc(ra, t + p);
            for (Index a = 0; a < ra; ++a) Zc.row(a) = Z.row(a * b + c);
            const Matrix prod = prevL * Zc; // (r0 n0) x (t+p)
            for (Index al = 0; al < r0; ++al)
                for (Index i = 0; i < n0; ++i)
                    for (Index j = 0; j < t + p; ++j) nb(al, i, c, j) = prod(al * n0 + i, j);
        }
        cores[static_cast<std::size_t>(k - 1)] = TensorCore(r0, n0, t + p);
        X.reset(std::move(cores), std::move(nb), k - 1);
    }
}

} // namespace ttmep
