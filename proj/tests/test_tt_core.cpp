#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace ttmep;

namespace {

/// Orthonormal frame: cores before k left-, after k right-orthonormal.
std::vector<TensorCore> orthonormal_frame(oracle::Gen& g, const std::vector<Index>& sizes,
                                          const std::vector<Index>& ranks, Index k) {
    auto cores = g.tt(sizes, ranks).cores();
    for (Index j = 0; j < k; ++j) left_orthonormalize_core(cores, j);
    for (Index j = static_cast<Index>(cores.size()) - 1; j > k; --j) right_orthonormalize_core(cores, j);
    return cores;
}

double gram_deviation(const Matrix& F) {
    return oracle::max_abs(F.transpose() * F - Matrix::Identity(F.cols(), F.cols()));
}

} // namespace

TEST(Evaluate, ScalarOnes) {
    std::vector<TensorCore> cores;
    for (int k = 0; k < 3; ++k) {
        TensorCore c(1, 1, 1);
        c(0, 0, 0) = 1.0;
        cores.push_back(c);
    }
    const std::vector<Index> idx{0, 0, 0};
    EXPECT_EQ(evaluate(TTVector(cores), idx), 1.0);
}

TEST(Evaluate, RankOneKronecker) {
    const auto v = TTVector::rank_one({Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 4)});
    const std::vector<Index> idx{1, 0};
    EXPECT_EQ(evaluate(v, idx), 6.0);
}

TEST(Evaluate, OutOfRangeThrows) {
    const auto v = TTVector::rank_one({Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 4)});
    const std::vector<Index> idx{2, 0};
    EXPECT_ANY_THROW(evaluate(v, idx));
}

TEST(Evaluate, RandomMatchesDenseSum) {
    oracle::Gen g(11);
    const auto v = g.tt({2, 3, 2}, {3, 2});
    EXPECT_LE(oracle::max_abs(densify(v) - oracle::densify_by_evaluation(v)), 1e-14 * densify(v).norm());
}

TEST(Densify, LeftKroneckerOrdering) {
    const auto v = TTVector::rank_one({Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)});
    Vector expect(4);
    expect << 0, 1, 0, 0;
    EXPECT_EQ(densify(v), expect);
}

TEST(Densify, MatchesEvaluateEverywhere) {
    oracle::Gen g(12);
    for (const auto& sizes : std::vector<std::vector<Index>>{{2, 2, 2}, {3, 3, 3}, {2, 3, 2, 3}}) {
        std::vector<Index> ranks;
        for (std::size_t k = 0; k + 1 < sizes.size(); ++k) ranks.push_back(g.integer(1, 4));
        const auto v = g.tt(sizes, ranks);
        const Vector d = densify(v);
        std::vector<Index> idx(sizes.size(), 0);
        Index lin = 0;
        do {
            EXPECT_EQ(d(lin++), evaluate(v, idx));
        } while (oracle::next_index(idx, sizes));
    }
}

TEST(Densify, RefusesAboveCap) {
    const auto v = TTVector::rank_one({Vector::Ones(100), Vector::Ones(100), Vector::Ones(100)});
    EXPECT_THROW(densify(v, 1000), CapExceeded);
}

TEST(TtMatvec, IdentityOperator) {
    oracle::Gen g(13);
    const auto v = g.tt({3, 2, 4}, {2, 3});
    const auto w = tt_matvec(TTOperator::identity({3, 2, 4}), v);
    EXPECT_EQ(densify(w), densify(v));
}

TEST(TtMatvec, KroneckerOfRankOne) {
    oracle::Gen g(14);
    const Matrix B1 = g.matrix(3, 3), B2 = g.matrix(2, 2);
    const Vector x1 = g.vector(3), x2 = g.vector(2);
    const auto w = tt_matvec(TTOperator::kronecker({B1, B2}), TTVector::rank_one({x1, x2}));
    EXPECT_LE(oracle::max_abs(densify(w) - oracle::kron_vec({B1 * x1, B2 * x2})), 1e-13);
}

TEST(TtMatvec, RandomAgainstDenseAndRankLaw) {
    oracle::Gen g(15);
    for (int t = 0; t < 10; ++t) {
        const auto A = g.tt_operator({3, 3, 3}, {g.integer(1, 4), g.integer(1, 4)});
        const auto v = g.tt({3, 3, 3}, {g.integer(1, 4), g.integer(1, 4)});
        const auto w = tt_matvec(A, v);
        const Vector ref = densify(A) * densify(v);
        EXPECT_LE((densify(w) - ref).norm(), 1e-12 * ref.norm());
        const auto ra = A.ranks(), rv = v.ranks(), rw = w.ranks();
        for (std::size_t k = 0; k < rw.size(); ++k) EXPECT_EQ(rw[k], ra[k] * rv[k]);
    }
}

TEST(TtMatvec, ModeMismatchThrows) {
    oracle::Gen g(16);
    EXPECT_THROW(tt_matvec(TTOperator::identity({2, 3}), g.tt({2, 2}, {1})), ShapeError);
}

TEST(DensifyOperator, MatchesEntrywiseEvaluation) {
    oracle::Gen g(17);
    const auto A = g.tt_operator({2, 3}, {3});
    const Matrix D = densify(A);
    for (Index i1 = 0; i1 < 2; ++i1)
        for (Index i2 = 0; i2 < 3; ++i2)
            for (Index j1 = 0; j1 < 2; ++j1)
                for (Index j2 = 0; j2 < 3; ++j2) {
                    const std::vector<Index> row{i1, i2}, col{j1, j2};
                    EXPECT_NEAR(D(i1 * 3 + i2, j1 * 3 + j2), evaluate(A, row, col), 1e-14);
                }
}

TEST(Orthonormalize, AlreadyOrthonormalGivesIdentity) {
    oracle::Gen g(18);
    auto cores = g.tt({3, 4, 3}, {3, 3}).cores();
    left_orthonormalize_core(cores, 1);
    const Matrix R = left_orthonormalize_core(cores, 1);
    EXPECT_LE(oracle::max_abs(R - Matrix::Identity(R.rows(), R.cols())), 1e-13);
}

TEST(Orthonormalize, LeftAndRightConditionsAndAbsorb) {
    oracle::Gen g(19);
    const auto v = g.tt({3, 4, 3}, {3, 4});
    const Vector before = densify(v);

    auto cores = v.cores();
    const Matrix R = left_orthonormalize_core(cores, 0);
    Matrix G = Matrix::Zero(cores[0].right_rank(), cores[0].right_rank());
    for (Index i = 0; i < 3; ++i) G += cores[0].slice(i).transpose() * cores[0].slice(i);
    EXPECT_LE(oracle::max_abs(G - Matrix::Identity(G.rows(), G.cols())), 1e-13);
    absorb_into_next(cores, 0, R);
    EXPECT_LE((densify(TTVector(cores)) - before).norm(), 1e-12 * before.norm());

    const Matrix L = right_orthonormalize_core(cores, 2);
    EXPECT_TRUE(is_right_orthonormal(cores[2], 1e-13));
    absorb_into_prev(cores, 2, L);
    EXPECT_LE((densify(TTVector(cores)) - before).norm(), 1e-12 * before.norm());
}

TEST(TtRound, ZeroToleranceIsLossless) {
    oracle::Gen g(20);
    const auto v = g.tt({3, 3, 3, 3}, {4, 5, 4});
    const auto w = tt_round(v, 0.0);
    const Vector a = densify(v), b = densify(w);
    EXPECT_LE((a - b).norm(), 1e-13 * a.norm());
    // exact minimal ranks of a random train: min(r_k, prod of sizes on either side)
    EXPECT_EQ(w.ranks(), (std::vector<Index>{1, 3, 5, 3, 1}));
}

TEST(TtRound, InflatedRankOneCollapses) {
    oracle::Gen g(21);
    const auto x = TTVector::rank_one({g.vector(3), g.vector(4), g.vector(2)});
    // [x1 x1] diag(x2, x2) / 2 [x3; x3] is x again, with ranks 2
    TensorCore c0(1, 3, 2), c1(2, 4, 2), c2(2, 2, 1);
    for (Index i = 0; i < 3; ++i) c0(0, i, 0) = c0(0, i, 1) = x.core(0)(0, i, 0);
    for (Index i = 0; i < 4; ++i) c1(0, i, 0) = c1(1, i, 1) = 0.5 * x.core(1)(0, i, 0);
    for (Index i = 0; i < 2; ++i) c2(0, i, 0) = c2(1, i, 0) = x.core(2)(0, i, 0);
    const TTVector inflated({c0, c1, c2});
    EXPECT_LE((densify(inflated) - densify(x)).norm(), 1e-14);
    const auto r = tt_round(inflated, 1e-12);
    EXPECT_EQ(r.ranks(), (std::vector<Index>{1, 1, 1, 1}));
    EXPECT_LE((densify(r) - densify(x)).norm(), 1e-12 * densify(x).norm());
}

TEST(TtRound, ErrorBoundHolds) {
    oracle::Gen g(22);
    for (double tol : {1e-1, 1e-2, 1e-4}) {
        const auto v = g.tt({4, 4, 4, 4}, {4, 6, 4});
        const auto w = tt_round(v, tol);
        const Vector a = densify(v);
        EXPECT_LE((a - densify(w)).norm(), tol * a.norm());
        const auto rv = v.ranks(), rw = w.ranks();
        for (std::size_t k = 0; k < rv.size(); ++k) EXPECT_LE(rw[k], rv[k]);
    }
}

TEST(TtRound, RankCap) {
    oracle::Gen g(23);
    const auto w = tt_round(g.tt({4, 4, 4}, {4, 4}), 0.0, 2);
    for (Index r : w.ranks()) EXPECT_LE(r, 2);
}

TEST(TtRoundOperator, InflatedIdentity) {
    OperatorCore a(1, 2, 2), b(2, 3, 1);
    for (Index i = 0; i < 2; ++i) a(0, i, i, 0) = a(0, i, i, 1) = 1.0;
    for (Index i = 0; i < 3; ++i) b(0, i, i, 0) = b(1, i, i, 0) = 0.5;
    const TTOperator inflated({a, b});
    const auto r = tt_round_operator(inflated, 1e-14);
    EXPECT_EQ(r.ranks(), (std::vector<Index>{1, 1, 1}));
    EXPECT_LE(oracle::max_abs(densify(r) - Matrix::Identity(6, 6)), 1e-14);
}

TEST(FrameApply, IdentityOperatorIsIdentity) {
    oracle::Gen g(24);
    const auto cores = orthonormal_frame(g, {3, 3, 3}, {2, 2}, 1);
    const FrameContext F{&cores, 1};
    const Vector y = g.vector(F.local_size());
    EXPECT_LE(oracle::max_abs(frame_apply<double>(F, TTOperator::identity({3, 3, 3}), y) - y), 1e-13);
}

TEST(FrameApply, MatchesDenseProduct) {
    oracle::Gen g(25);
    for (Index k = 0; k < 3; ++k) {
        const auto cores = orthonormal_frame(g, {3, 3, 3}, {2, 2}, k);
        const auto A = g.tt_operator({3, 3, 3}, {3, 2});
        const FrameContext F{&cores, k};
        const Matrix X = oracle::dense_frame(cores, k);
        const Vector y = g.vector(F.local_size());
        const Vector ref = X.transpose() * densify(A) * X * y;
        EXPECT_LE(oracle::max_abs(frame_apply<double>(F, A, y) - ref), 1e-12 * std::max(1.0, ref.norm()));
        EXPECT_LE(gram_deviation(X), 1e-12);
    }
}

TEST(FrameApply, Linearity) {
    oracle::Gen g(26);
    const auto cores = orthonormal_frame(g, {3, 4, 3}, {3, 2}, 1);
    const auto A = g.tt_operator({3, 4, 3}, {2, 2});
    const FrameContext F{&cores, 1};
    const Vector y = g.vector(F.local_size()), z = g.vector(F.local_size());
    const double al = 0.7, be = -1.3;
    const Vector lhs = frame_apply<double>(F, A, Vector(al * y + be * z));
    const Vector rhs = al * frame_apply<double>(F, A, y) + be * frame_apply<double>(F, A, z);
    EXPECT_LE(oracle::max_abs(lhs - rhs), 1e-13 * std::max(1.0, rhs.norm()));
}

TEST(FrameApply, ComplexAgreesWithRealParts) {
    oracle::Gen g(27);
    const auto cores = orthonormal_frame(g, {2, 3, 2}, {2, 2}, 1);
    const auto A = g.tt_operator({2, 3, 2}, {2, 2});
    const FrameContext F{&cores, 1};
    const CVector y = g.cvector(F.local_size());
    const CVector c = frame_apply<Complex>(F, A, y);
    EXPECT_LE(oracle::max_abs(c.real() - frame_apply<double>(F, A, Vector(y.real()))), 1e-13);
    EXPECT_LE(oracle::max_abs(c.imag() - frame_apply<double>(F, A, Vector(y.imag()))), 1e-13);
}

TEST(FrameApply, ShapeMismatchThrows) {
    oracle::Gen g(28);
    const auto cores = orthonormal_frame(g, {3, 3, 3}, {2, 2}, 1);
    const FrameContext F{&cores, 1};
    EXPECT_THROW(frame_apply<double>(F, TTOperator::identity({3, 3, 3}), Vector(g.vector(5))), ShapeError);
    EXPECT_THROW(frame_apply<double>(F, TTOperator::identity({3, 2, 3}), Vector(g.vector(12))), ShapeError);
}

TEST(FrameProject, IdentityAndSymmetryAndColumns) {
    oracle::Gen g(29);
    const auto cores = orthonormal_frame(g, {3, 3, 3}, {2, 3}, 1);
    const FrameContext F{&cores, 1};
    const Matrix I = frame_project(F, TTOperator::identity({3, 3, 3}));
    EXPECT_LE(oracle::max_abs(I - Matrix::Identity(F.local_size(), F.local_size())), 1e-13);

    // symmetric cores: every slice pair (i, j) equals (j, i)
    auto A = g.tt_operator({3, 3, 3}, {2, 2});
    std::vector<OperatorCore> sym;
    for (Index k = 0; k < 3; ++k) {
        OperatorCore c = A.core(k);
        for (Index a = 0; a < c.left_rank(); ++a)
            for (Index i = 0; i < 3; ++i)
                for (Index j = 0; j < i; ++j)
                    for (Index b = 0; b < c.right_rank(); ++b) c(a, j, i, b) = c(a, i, j, b);
        sym.push_back(c);
    }
    const TTOperator S(sym);
    const Matrix P = frame_project(F, S);
    EXPECT_LE(oracle::max_abs(P - P.transpose()), 1e-12 * P.norm());

    const Matrix Q = frame_project(F, A);
    for (Index c = 0; c < F.local_size(); ++c)
        EXPECT_LE(oracle::max_abs(Q.col(c) - frame_apply<double>(F, A, Vector(Vector::Unit(F.local_size(), c)))), 1e-13 * Q.norm());
    EXPECT_THROW(frame_project(F, A, 10), CapExceeded);
}

TEST(ShiftBlockCore, RankOneColumnPreserved) {
    oracle::Gen g(30);
    auto cores = orthonormal_frame(g, {3, 3, 3}, {2, 2}, 0);
    // block column = x0 (x) e, so the unfolding has rank one
    BlockCore B(1, 3, 1, 2);
    const Vector x0 = g.vector(3), e = g.vector(2);
    for (Index i = 0; i < 3; ++i)
        for (Index b = 0; b < 2; ++b) B(0, i, 0, b) = x0(i) * e(b);
    BlockTT X(cores, B, 0);
    const Vector before = densify(X.column(0));
    std::mt19937_64 rng(1);
    shift_block_core(X, 1, {6, 0, 1e-14}, rng);
    EXPECT_EQ(X.block_index(), 1);
    EXPECT_EQ(X.ranks()[1], 1);
    EXPECT_LE((densify(X.column(0)) - before).norm(), 1e-12 * before.norm());
}

TEST(ShiftBlockCore, FrameStaysOrthonormalBothDirections) {
    oracle::Gen g(31);
    for (Index kick : {0, 1, 2}) {
        auto cores = orthonormal_frame(g, {3, 3, 3}, {3, 3}, 1);
        const FrameContext F0{&cores, 1};
        BlockCore B = BlockCore::from_columns(g.matrix(F0.local_size(), 3), 3, 3, 3);
        BlockTT X(cores, B, 1);
        std::vector<Vector> before;
        for (Index c = 0; c < 3; ++c) before.push_back(densify(X.column(c)));
        std::mt19937_64 rng(2);
        for (int d : {1, -1, -1, 1}) {
            shift_block_core(X, d, {9, kick, 1e-14}, rng);
            EXPECT_LE(gram_deviation(oracle::dense_frame(X.cores(), X.block_index())), 1e-12);
            if (kick == 0)
                for (Index c = 0; c < 3; ++c) EXPECT_LE((densify(X.column(c)) - before[static_cast<std::size_t>(c)]).norm(), 1e-11 * before[static_cast<std::size_t>(c)].norm());
        }
    }
}

TEST(ShiftBlockCore, KickAddsOrthonormalDirections) {
    oracle::Gen g(32);
    auto cores = orthonormal_frame(g, {4, 4, 4}, {2, 2}, 0);
    BlockCore B = BlockCore::from_columns(g.matrix(8, 2), 1, 4, 2);
    BlockTT X(cores, B, 0);
    std::mt19937_64 rng(3);
    shift_block_core(X, 1, {3, 1, 1e-14}, rng);
    // the 4 x 4 unfolding has rank 4, capped at 3, plus one kick direction
    EXPECT_EQ(X.ranks()[1], 4);
    EXPECT_TRUE(is_left_orthonormal(X.cores()[0], 1e-13));
}

TEST(ShiftBlockCore, KickCountWhenRankDeficient) {
    oracle::Gen g(33);
    auto cores = orthonormal_frame(g, {4, 4, 4}, {3, 2}, 1);
    BlockCore B(3, 4, 1, 2);
    const Vector l = g.vector(3), x = g.vector(4), r = g.vector(2);
    for (Index a = 0; a < 3; ++a)
        for (Index i = 0; i < 4; ++i)
            for (Index b = 0; b < 2; ++b) B(a, i, 0, b) = l(a) * x(i) * r(b);
    BlockTT X(cores, B, 1);
    std::mt19937_64 rng(4);
    shift_block_core(X, -1, {5, 1, 1e-14}, rng);
    EXPECT_EQ(X.block_index(), 0);
    EXPECT_EQ(X.ranks()[1], 2); // numerical rank 1 + kick 1
    EXPECT_TRUE(is_right_orthonormal(X.cores()[1], 1e-13));
}

TEST(ShiftBlockCore, BoundaryViolationThrows) {
    oracle::Gen g(34);
    auto cores = orthonormal_frame(g, {2, 2}, {2}, 1);
    BlockTT X(cores, BlockCore(2, 2, 1, 1), 1);
    std::mt19937_64 rng(5);
    EXPECT_THROW(shift_block_core(X, 1, {}, rng), ShapeError);
}
