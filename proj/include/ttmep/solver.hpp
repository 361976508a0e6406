#pragma once

// Alternating block-TT subspace iteration for the tuples of an mEP with the
// smallest |lambda_m - target|.
//
// Each step at block index k projects the pencil (Delta_m, Delta_0) on the
// frame X_{!=k}, picks b Ritz vectors by the selection heuristic below, and
// moves the block index one mode on. Convergence is detected per Ritz pair
// by walking single-pair frames over all modes and finishing with TRQI.

#include <chrono>
#include <cstdint>
#include <limits>
#include <random>
#include <string>

#include "ttmep/delta.hpp"
#include "ttmep/problem.hpp"
#include "ttmep/tt_frame.hpp"

namespace ttmep {

struct SolverConfig {
    Index block_size = 5;
    Index kick = 1;
    std::optional<Index> max_rank;  ///< default block_size + 1
    int sweeps = 20;
    double eps = 1e-6;              ///< tuple residual (infinity norm)
    double eps1 = 1e-8;             ///< projected residual along the walk
    double xi = 1e-4;               ///< duplicate threshold
    double cos_threshold = 0.99;
    std::optional<Index> keep_found; ///< default 4 * block_size
    bool round_delta = true;
    double round_tol = 1e-13;
    std::uint64_t seed = 0;
    RitzRule ritz_rule = RitzRule::PositiveReal;
    int no_progress_window = 5;     ///< sweeps without a new tuple (once any is found); 0 disables
    double singular_floor = 1e-14;
    Index projected_cap = kDenseCap;
    TrqiOptions trqi{};

    Index rank() const { return max_rank.value_or(block_size + 1); }
    Index found_capacity() const { return keep_found.value_or(4 * block_size); }

    void validate() const {
        detail::require_valid(block_size >= 1, "SolverConfig: b must be >= 1");
        detail::require_valid(rank() >= block_size, "SolverConfig: max rank must be >= b");
        detail::require_valid(kick >= 0, "SolverConfig: kick must be >= 0");
        detail::require_valid(sweeps >= 0, "SolverConfig: sweeps must be >= 0");
        detail::require_valid(eps > 0 && eps1 > 0 && xi > 0, "SolverConfig: tolerances must be positive");
        detail::require_valid(cos_threshold > 0 && cos_threshold <= 1, "SolverConfig: cos threshold must be in (0, 1]");
        detail::require_valid(found_capacity() >= 1, "SolverConfig: keep_found must be >= 1");
        detail::require_valid(round_tol >= 0, "SolverConfig: round tol must be >= 0");
        detail::require_valid(no_progress_window >= 0, "SolverConfig: no-progress window must be >= 0");
    }
};

/// The pencil (Delta_m, Delta_0) of a problem, built once.
struct DeltaPair {
    TTOperator Dm;
    TTOperator D0;

    static DeltaPair build(const MEProblem& prob, const SolverConfig& cfg) {
        const DeltaOptions opt{cfg.round_delta, cfg.round_tol};
        return {build_delta_i(prob, prob.m, opt), build_delta0(prob, opt)};
    }
};

/// Cached environments of one operator for a frame with block index k:
/// left[j] covers cores 0..j-1 (valid for j <= k), right[j] covers cores
/// j+1..m-1 (valid for j >= k).
struct OperatorEnvironments {
    std::vector<Environment> left;
    std::vector<Environment> right;

    static OperatorEnvironments build(const std::vector<TensorCore>& cores, Index k, const TTOperator& A) {
        const Index m = static_cast<Index>(cores.size());
        OperatorEnvironments e;
        e.left.assign(static_cast<std::size_t>(m), Environment::boundary());
        e.right.assign(static_cast<std::size_t>(m), Environment::boundary());
        for (Index j = 0; j < k; ++j) e.left[static_cast<std::size_t>(j + 1)] = extend_left(e.left[static_cast<std::size_t>(j)], cores[static_cast<std::size_t>(j)], A.core(j));
        for (Index j = m - 1; j > k; --j) e.right[static_cast<std::size_t>(j - 1)] = extend_right(e.right[static_cast<std::size_t>(j)], cores[static_cast<std::size_t>(j)], A.core(j));
        return e;
    }

    /// After the block moved from `from` in `direction`, absorb the core left behind.
    void advance(const std::vector<TensorCore>& cores, Index from, int direction, const TTOperator& A) {
        const auto f = static_cast<std::size_t>(from);
        if (direction > 0) left[f + 1] = extend_left(left[f], cores[f], A.core(from));
        else right[f - 1] = extend_right(right[f], cores[f], A.core(from));
    }

    const Environment& L(Index k) const { return left[static_cast<std::size_t>(k)]; }
    const Environment& R(Index k) const { return right[static_cast<std::size_t>(k)]; }
};

struct SweepState {
    BlockTT X;
    std::vector<CVector> estimates; ///< transported mode vectors for the current block index
    std::vector<EigenTuple> found;  ///< in the shifted coordinates used by the sweep
    int sweep = 0;
    int direction = 1;
    Index new_found_this_sweep = 0;
    Rng rng;
    std::optional<OperatorEnvironments> env_m, env_0;

    Index block_index() const { return X.block_index(); }

    void build_environments(const DeltaPair& ops) {
        env_m = OperatorEnvironments::build(X.cores(), X.block_index(), ops.Dm);
        env_0 = OperatorEnvironments::build(X.cores(), X.block_index(), ops.D0);
    }
};

struct PhaseTimes {
    double projection = 0.0; ///< forming the projected pencil
    double eigensolve = 0.0; ///< dense generalized eigensolve
    double selection = 0.0;  ///< residual estimates, convergence walks, selection
    double update = 0.0;     ///< block core shift and environment update

    PhaseTimes& operator+=(const PhaseTimes& o) {
        projection += o.projection;
        eigensolve += o.eigensolve;
        selection += o.selection;
        update += o.update;
        return *this;
    }
    double total() const { return projection + eigensolve + selection + update; }
};

struct StepRecord {
    int sweep = 0;
    Index mode = 0; ///< 0-based block index of the step
    int direction = 1;
    Index projected_size = 0;
    Index n_candidates = 0;
    Index n_selected = 0;
    Index n_random = 0;
    Index n_converged_new = 0;
    bool padded = false;
    double wall_ms = 0.0;
    PhaseTimes phases; ///< seconds
    std::vector<Index> ranks;
};

// ---------------------------------------------------------------------------
// Iterate set-up

inline SweepState init_iterate(const std::vector<Index>& sizes, const SolverConfig& cfg) {
    cfg.validate();
    const Index m = static_cast<Index>(sizes.size());
    detail::require_valid(m >= 1, "init_iterate: need at least one mode");
    for (Index n : sizes) detail::require_valid(n >= 1, "init_iterate: sizes must be positive");
    SweepState s;
    s.rng.seed(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<Index> ranks(static_cast<std::size_t>(m + 1), 1);
    for (Index k = 1; k < m; ++k) {
        double left = 1.0, right = 1.0;
        for (Index j = 0; j < k; ++j) left *= static_cast<double>(sizes[static_cast<std::size_t>(j)]);
        for (Index j = k; j < m; ++j) right *= static_cast<double>(sizes[static_cast<std::size_t>(j)]);
        ranks[static_cast<std::size_t>(k)] =
            static_cast<Index>(std::min({static_cast<double>(cfg.rank()), left, right}));
    }
    std::vector<TensorCore> cores;
    for (Index k = 0; k < m; ++k) {
        TensorCore c(ranks[static_cast<std::size_t>(k)], sizes[static_cast<std::size_t>(k)], ranks[static_cast<std::size_t>(k + 1)]);
        for (double& v : c.data()) v = gauss(s.rng);
        cores.push_back(std::move(c));
    }
    for (Index k = m - 1; k >= 1; --k) right_orthonormalize_core(cores, k);
    BlockCore block(1, sizes[0], cfg.block_size, ranks[1]);
    for (Index a = 0; a < sizes[0]; ++a)
        for (Index c = 0; c < cfg.block_size; ++c)
            for (Index b = 0; b < ranks[1]; ++b) block(0, a, c, b) = gauss(s.rng);
    s.X = BlockTT(std::move(cores), std::move(block), 0);
    return s;
}

// ---------------------------------------------------------------------------
// Rank-one approximation of a local vector seen as a (left, n, right) tensor

struct RankOneFactors {
    CVector left, middle, right; ///< unit vectors
    Complex scale{0.0, 0.0};
    double error = 0.0;          ///< Frobenius norm of the approximation error
};

namespace detail {

inline CVector leading_left_singular(const CMatrix& M, CVector* right = nullptr, double* sigma = nullptr) {
    Eigen::JacobiSVD<CMatrix> dec(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (right) *right = dec.matrixV().col(0);
    if (sigma) *sigma = dec.singularValues()(0);
    return dec.matrixU().col(0);
}

/// T(a, i, b) stored at (a*n + i)*right + b.
inline Complex trilinear(const CVector& T, const CVector& u, const CVector& v, const CVector& w) {
    const Index L = u.size(), n = v.size(), R = w.size();
    Complex s(0.0, 0.0);
    for (Index a = 0; a < L; ++a)
        for (Index i = 0; i < n; ++i)
            for (Index b = 0; b < R; ++b) s += std::conj(u(a) * v(i) * w(b)) * T((a * n + i) * R + b);
    return s;
}

} // namespace detail

/// Two rank-one SVD truncations followed by at most five alternating
/// passes; a pass is kept only if it does not increase the error.
inline RankOneFactors rank_one_factor(const CVector& x, Index left, Index n, Index right) {
    detail::require_shape(x.size() == left * n * right, "rank_one_factor: length != left * n * right");
    const double nx = x.norm();
    if (nx == 0.0) throw ValidationError("rank_one_factor: zero vector");
    // first split: left | (n, right)
    const Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> T1(x.data(), left, n * right);
    CVector rest;
    RankOneFactors f;
    f.left = detail::leading_left_singular(T1, &rest);
    // rest holds conj of the right singular vector in the (n, right) layout
    const CVector restc = rest.conjugate();
    const Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> T2(restc.data(), n, right);
    CVector w;
    f.middle = detail::leading_left_singular(T2, &w);
    f.right = w.conjugate();
    f.scale = detail::trilinear(x, f.left, f.middle, f.right);
    auto error_of = [&](const Complex& s) { return std::sqrt(std::max(0.0, nx * nx - std::norm(s))); };
    f.error = error_of(f.scale);

    for (int pass = 0; pass < 5; ++pass) {
        RankOneFactors g = f;
        // update each factor with the other two fixed
        CVector u = CVector::Zero(left), v = CVector::Zero(n), wv = CVector::Zero(right);
        for (Index a = 0; a < left; ++a)
            for (Index i = 0; i < n; ++i)
                for (Index b = 0; b < right; ++b)
                    u(a) += std::conj(g.middle(i) * g.right(b)) * x((a * n + i) * right + b);
        if (u.norm() == 0.0) break;
        g.left = u / u.norm();
        for (Index a = 0; a < left; ++a)
            for (Index i = 0; i < n; ++i)
                for (Index b = 0; b < right; ++b)
                    v(i) += std::conj(g.left(a) * g.right(b)) * x((a * n + i) * right + b);
        if (v.norm() == 0.0) break;
        g.middle = v / v.norm();
        for (Index a = 0; a < left; ++a)
            for (Index i = 0; i < n; ++i)
                for (Index b = 0; b < right; ++b)
                    wv(b) += std::conj(g.left(a) * g.middle(i)) * x((a * n + i) * right + b);
        if (wv.norm() == 0.0) break;
        g.right = wv / wv.norm();
        g.scale = detail::trilinear(x, g.left, g.middle, g.right);
        g.error = error_of(g.scale);
        if (g.error > f.error) break;
        const bool stalled = f.error - g.error <= 1e-15 * nx;
        f = g;
        if (stalled) break;
    }
    return f;
}

// ---------------------------------------------------------------------------
// Single-pair frames

namespace detail {

inline bool is_real_vector(const CVector& x) { return x.imag().cwiseAbs().maxCoeff() == 0.0; }

/// Columns Re(x) and, when x is not real, Im(x).
inline BlockCore realified_block(const CVector& x, Index left, Index n, Index right) {
    Matrix cols(x.size(), is_real_vector(x) ? 1 : 2);
    cols.col(0) = x.real();
    if (cols.cols() == 2) cols.col(1) = x.imag();
    return BlockCore::from_columns(cols, left, n, right);
}

inline CVector block_vector(const BlockCore& B) {
    CVector v = B.column(0).cast<Complex>();
    if (B.block_size() > 1) v += Complex(0.0, 1.0) * B.column(1).cast<Complex>();
    return v;
}

/// A copy of the iterate holding one pair, with its environments.
struct Walker {
    BlockTT X;
    OperatorEnvironments em, e0;
};

inline Walker make_walker(const SweepState& s, const CVector& x) {
    Walker w{s.X, *s.env_m, *s.env_0};
    const BlockCore& B = s.X.block();
    w.X.set_block(realified_block(x, B.left_rank(), B.mode_size(), B.right_rank()));
    return w;
}

/// Moves the pair one mode on. No rank cap: the pair stays exactly
/// representable, so its projected residual never exceeds the full one.
inline void walk(Walker& w, int direction, const DeltaPair& ops, const SolverConfig& cfg, Rng& rng) {
    const Index from = w.X.block_index();
    shift_block_core(w.X, direction, {std::numeric_limits<Index>::max(), 0, cfg.singular_floor}, rng);
    w.em.advance(w.X.cores(), from, direction, ops.Dm);
    w.e0.advance(w.X.cores(), from, direction, ops.D0);
}

/// || P_m x - mu P_0 x || with P the pencil projected on the walker's frame, x normalized.
inline double projected_residual(const Walker& w, Complex mu, CVector x, const DeltaPair& ops) {
    const double nx = x.norm();
    if (nx == 0.0) throw ValidationError("projected residual: zero vector");
    x /= nx;
    const Index k = w.X.block_index();
    const CVector am = local_apply<Complex>(w.em.L(k), ops.Dm.core(k), w.em.R(k), x);
    const CVector a0 = local_apply<Complex>(w.e0.L(k), ops.D0.core(k), w.e0.R(k), x);
    return (am - mu * a0).norm();
}

} // namespace detail


struct ResidualEstimate {
    double residual = 0.0;
    Index next_mode = 0;
    CVector next_local;  ///< the pair's coefficients in the next frame
    CVector next_vector; ///< rank-one middle factor of next_local
};

/// Residual of (mu, x) projected on the frame built from this pair alone at
/// mode k + direction.
inline ResidualEstimate estimate_residual(Complex mu, const CVector& x, const SweepState& s, int direction,
                                          const DeltaPair& ops, const SolverConfig& cfg) {
    detail::require_valid(s.env_m && s.env_0, "estimate_residual: environments not built");
    detail::require_shape(x.size() == s.X.block().local_size(), "estimate_residual: vector length mismatch");
    if (x.norm() == 0.0) throw ValidationError("estimate_residual: zero vector");
    auto w = detail::make_walker(s, x / x.norm());
    Rng scratch(0);
    detail::walk(w, direction, ops, cfg, scratch);
    ResidualEstimate e;
    const BlockCore& B = w.X.block();
    e.next_mode = w.X.block_index();
    e.next_local = detail::block_vector(B);
    e.residual = detail::projected_residual(w, mu, e.next_local, ops);
    e.next_vector = rank_one_factor(e.next_local, B.left_rank(), B.mode_size(), B.right_rank()).middle;
    return e;
}

struct ConvergenceOutcome {
    double first_estimate = 0.0;
    Index modes_estimated = 0;
    bool walk_passed = false; ///< every projected residual below eps1
    bool converged = false;   ///< refined tuple residual below eps
    bool duplicate = false;
    bool admitted = false;
    std::optional<EigenTuple> tuple;
};

namespace detail {

inline void admit(SweepState& s, EigenTuple t, Index capacity, ConvergenceOutcome& out) {
    const Index m = t.order();
    auto key = [m](const EigenTuple& e) { return std::abs(e.lambda(m - 1)); };
    if (static_cast<Index>(s.found.size()) < capacity) {
        s.found.push_back(std::move(t));
        out.admitted = true;
    } else {
        auto worst = std::max_element(s.found.begin(), s.found.end(),
                                      [&](const EigenTuple& a, const EigenTuple& b) { return key(a) < key(b); });
        if (key(t) < key(*worst)) {
            *worst = std::move(t);
            out.admitted = true;
        }
    }
    if (out.admitted) ++s.new_found_this_sweep;
}

} // namespace detail

/// Walks single-pair frames from the block index k over all modes: first in
/// `direction` up to the boundary, then from k the other way, stopping at the
/// first projected residual that is not below eps1. If every mode passes, the
/// mode vectors are refined by TRQI and the tuple is admitted into s.found
/// when it converged, is new, and ranks among the best kept.
inline ConvergenceOutcome check_convergence(Complex mu, const CVector& x, SweepState& s, int direction,
                                            const DeltaPair& ops, const MEProblem& prob, const SolverConfig& cfg) {
    detail::require_valid(s.env_m && s.env_0, "check_convergence: environments not built");
    const Index m = s.X.order();
    const Index k = s.X.block_index();
    const CVector x0 = x / x.norm();
    const BlockCore& B = s.X.block();

    std::vector<CVector> modes(static_cast<std::size_t>(m));
    modes[static_cast<std::size_t>(k)] = rank_one_factor(x0, B.left_rank(), B.mode_size(), B.right_rank()).middle;
    Index collected = 1;
    ConvergenceOutcome out;
    Rng scratch(0);
    bool passed = true;
    bool first = true;
    int d = direction;
    auto w = detail::make_walker(s, x0);
    while (collected < m) {
        const Index at = w.X.block_index();
        if (at + d < 0 || at + d >= m) {
            d = -d;
            w = detail::make_walker(s, x0);
        }
        detail::walk(w, d, ops, cfg, scratch);
        const BlockCore& W = w.X.block();
        const CVector local = detail::block_vector(W);
        const double r = detail::projected_residual(w, mu, local, ops);
        if (first) {
            out.first_estimate = r;
            first = false;
        }
        modes[static_cast<std::size_t>(w.X.block_index())] =
            rank_one_factor(local, W.left_rank(), W.mode_size(), W.right_rank()).middle;
        ++collected;
        if (!(r < cfg.eps1)) {
            passed = false;
            break;
        }
    }
    out.modes_estimated = collected;
    out.walk_passed = passed && collected == m;
    if (!out.walk_passed) return out;

    EigenTuple t;
    t.vectors = modes;
    try {
        t.lambda = tensor_rayleigh_quotient(prob, t.vectors);
    } catch (const NumericalError&) {
        return out;
    }
    t = trqi_refine(prob, t, cfg.trqi).tuple;
    out.converged = t.residual_norm < cfg.eps;
    if (!out.converged) return out;

    const auto verdict = duplicate_check(t.vectors, s.found, ops.D0, cfg.xi);
    if (!verdict.accept) {
        out.duplicate = true;
        out.tuple = std::move(t);
        return out;
    }
    auto left = left_eigenvector_tuple(prob, t, cfg.trqi);
    if (!left) return out;
    t.left_vectors = std::move(*left);
    out.tuple = t;
    detail::admit(s, std::move(t), cfg.found_capacity(), out);
    return out;
}

// ---------------------------------------------------------------------------
// Selection

struct Candidate {
    Complex mu;
    CVector local;       ///< unit Ritz vector in the current frame
    CVector mode_vector; ///< rank-one middle factor at the current mode
    CVector next_vector; ///< rank-one middle factor after moving one mode on
    double estimate = 0.0;
    bool converged = false;
    bool matched = false;
    Index width = 1;     ///< block columns it occupies (2 when complex)
};

struct Selection {
    std::vector<Index> chosen; ///< into the candidate list, in selection order
    Index columns = 0;
    Index random_columns = 0;
};

/// Converged pairs are never chosen. Pairs matching a transported estimate
/// come first, by smallest estimated residual; the rest of the b columns go
/// to the remaining pairs by smallest estimated residual; whatever is still
/// missing is left to random columns.
inline Selection select_eigenpairs(const std::vector<Candidate>& cands, Index b) {
    std::vector<Index> matched, others;
    for (Index i = 0; i < static_cast<Index>(cands.size()); ++i) {
        const auto& c = cands[static_cast<std::size_t>(i)];
        if (c.converged) continue;
        (c.matched ? matched : others).push_back(i);
    }
    auto by_estimate = [&](Index a, Index c) {
        const double ea = cands[static_cast<std::size_t>(a)].estimate;
        const double ec = cands[static_cast<std::size_t>(c)].estimate;
        return ea != ec ? ea < ec : a < c;
    };
    std::sort(matched.begin(), matched.end(), by_estimate);
    std::sort(others.begin(), others.end(), by_estimate);

    Selection sel;
    auto conjugate_taken = [&](const Candidate& c) {
        if (c.width != 2) return false;
        for (Index j : sel.chosen) {
            const Complex o = cands[static_cast<std::size_t>(j)].mu;
            if (std::abs(o - std::conj(c.mu)) <= 1e-12 * std::max(1.0, std::abs(c.mu))) return true;
        }
        return false;
    };
    for (const auto* pool : {&matched, &others})
        for (Index i : *pool) {
            const auto& c = cands[static_cast<std::size_t>(i)];
            if (sel.columns + c.width > b || conjugate_taken(c)) continue;
            sel.chosen.push_back(i);
            sel.columns += c.width;
        }
    sel.random_columns = b - sel.columns;
    return sel;
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline double max_cosine(const CVector& v, const std::vector<CVector>& refs) {
    double best = 0.0;
    for (const auto& r : refs)
        if (r.size() == v.size()) best = std::max(best, principal_cosine(v, r));
    return best;
}

} // namespace detail

/// One step at the current block index k: project the pencil, solve it,
/// select b columns, write them into the block core and move the block to
/// k + direction.
inline StepRecord sweep_step(SweepState& s, int direction, const DeltaPair& ops, const MEProblem& prob,
                             const SolverConfig& cfg) {
    using detail::Clock;
    const auto t_start = Clock::now();
    const Index k = s.X.block_index();
    const Index m = s.X.order();
    detail::require_shape(direction == 1 || direction == -1, "sweep_step: direction must be +1 or -1");
    detail::require_shape(k + direction >= 0 && k + direction < m, "sweep_step: cannot move past the boundary");
    if (!s.env_m || !s.env_0) s.build_environments(ops);
    const Index b = cfg.block_size;
    StepRecord rec;
    rec.sweep = s.sweep;
    rec.mode = k;
    rec.direction = direction;

    auto t0 = Clock::now();
    const BlockCore& B = s.X.block();
    const Index N = B.local_size();
    rec.projected_size = N;
    if (static_cast<double>(N) * static_cast<double>(N) > static_cast<double>(cfg.projected_cap))
        throw CapExceeded("sweep_step: projected size " + std::to_string(N) + "^2 exceeds cap");
    const Matrix Pm = local_project(s.env_m->L(k), ops.Dm.core(k), s.env_m->R(k));
    const Matrix P0 = local_project(s.env_0->L(k), ops.D0.core(k), s.env_0->R(k));
    rec.phases.projection = detail::seconds_since(t0);

    t0 = Clock::now();
    const auto eig = generalized_eig(Pm, P0);
    const auto ritz = select_ritz(eig, 2 * b + static_cast<Index>(s.found.size()), cfg.ritz_rule);
    rec.padded = ritz.padded;
    rec.phases.eigensolve = detail::seconds_since(t0);

    t0 = Clock::now();
    std::vector<Candidate> cands;
    for (Index idx : ritz.indices) {
        Candidate c;
        c.mu = eig.values[static_cast<std::size_t>(idx)];
        c.local = eig.right.col(idx);
        const double nl = c.local.norm();
        if (!(nl > 0.0) || !std::isfinite(nl)) continue;
        c.local /= nl;
        c.width = detail::is_real_vector(c.local) ? 1 : 2;
        const auto est = estimate_residual(c.mu, c.local, s, direction, ops, cfg);
        c.estimate = est.residual;
        c.next_vector = est.next_vector;
        c.mode_vector = rank_one_factor(c.local, B.left_rank(), B.mode_size(), B.right_rank()).middle;
        c.matched = !s.estimates.empty() && detail::max_cosine(c.mode_vector, s.estimates) > cfg.cos_threshold;
        if (c.estimate < cfg.eps1) {
            const auto outcome = check_convergence(c.mu, c.local, s, direction, ops, prob, cfg);
            c.converged = outcome.converged;
            if (outcome.admitted) ++rec.n_converged_new;
        }
        cands.push_back(std::move(c));
    }
    rec.n_candidates = static_cast<Index>(cands.size());
    const Selection sel = select_eigenpairs(cands, b);
    rec.n_selected = static_cast<Index>(sel.chosen.size());
    rec.n_random = sel.random_columns;

    Matrix cols(N, b);
    Index col = 0;
    std::vector<CVector> transported;
    for (Index i : sel.chosen) {
        const auto& c = cands[static_cast<std::size_t>(i)];
        cols.col(col++) = c.local.real();
        if (c.width == 2) cols.col(col++) = c.local.imag();
        transported.push_back(c.next_vector);
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (; col < b; ++col)
        for (Index r = 0; r < N; ++r) cols(r, col) = gauss(s.rng);
    rec.phases.selection = detail::seconds_since(t0);

    t0 = Clock::now();
    s.X.set_block(BlockCore::from_columns(cols, B.left_rank(), B.mode_size(), B.right_rank()));
    shift_block_core(s.X, direction, {cfg.rank(), cfg.kick, cfg.singular_floor}, s.rng);
    s.env_m->advance(s.X.cores(), k, direction, ops.Dm);
    s.env_0->advance(s.X.cores(), k, direction, ops.D0);
    s.estimates = std::move(transported);
    rec.phases.update = detail::seconds_since(t0);
    rec.ranks = s.X.ranks();
    rec.wall_ms = 1e3 * detail::seconds_since(t_start);
    return rec;
}

// ---------------------------------------------------------------------------
// Driver

struct SolveReport {
    std::vector<EigenTuple> tuples; ///< sorted by |lambda_m - target|
    std::vector<StepRecord> steps;
    int sweeps_done = 0;
    std::string stop_reason;
    double target = 0.0;
    SolverConfig config;
    std::vector<Index> delta_m_ranks, delta_0_ranks;
    double delta_build_seconds = 0.0;
    double total_seconds = 0.0;
    PhaseTimes phases;
    std::vector<std::string> warnings;
};

/// Restores the unshifted lambda_m and recomputes residuals on `prob`.
inline std::vector<EigenTuple> unshift_tuples(const MEProblem& prob, std::vector<EigenTuple> found, double target) {
    const Index m = prob.m;
    for (auto& t : found) {
        t.lambda(m - 1) += target;
        t.residual_norm = residual_tuple(prob, t).max_norm;
    }
    std::sort(found.begin(), found.end(), [&](const EigenTuple& a, const EigenTuple& b) {
        const double da = std::abs(a.lambda(m - 1) - target), db = std::abs(b.lambda(m - 1) - target);
        if (da != db) return da < db;
        return a.lambda(m - 1).real() < b.lambda(m - 1).real();
    });
    return found;
}

/// Tuples with lambda_m closest to `target`: the problem is shifted by
/// -target, swept until the sweep cap or until `no_progress_window` full
/// sweeps pass without a new tuple (counted once something was found), and
/// the results are shifted back.
inline SolveReport solve(const MEProblem& prob, double target, const SolverConfig& cfg) {
    using detail::Clock;
    const auto t_start = Clock::now();
    prob.validate();
    cfg.validate();
    detail::require_valid(prob.m >= 2, "solve: need m >= 2");
    SolveReport rep;
    rep.target = target;
    rep.config = cfg;

    const MEProblem shifted = apply_shift(prob, -target);
    auto t0 = Clock::now();
    const DeltaPair ops = DeltaPair::build(shifted, cfg);
    rep.delta_build_seconds = detail::seconds_since(t0);
    rep.delta_m_ranks = ops.Dm.ranks();
    rep.delta_0_ranks = ops.D0.ranks();

    SweepState s = init_iterate(prob.sizes, cfg);
    s.build_environments(ops);
    int idle = 0;
    rep.stop_reason = "sweep cap";
    for (int sweep = 0; sweep < cfg.sweeps; ++sweep) {
        s.sweep = sweep;
        s.new_found_this_sweep = 0;
        for (int d : {1, -1}) {
            s.direction = d;
            s.estimates.clear();
            while (s.X.block_index() + d >= 0 && s.X.block_index() + d < prob.m) {
                rep.steps.push_back(sweep_step(s, d, ops, shifted, cfg));
                rep.phases += rep.steps.back().phases;
            }
        }
        ++rep.sweeps_done;
        if (s.new_found_this_sweep > 0) idle = 0;
        else if (!s.found.empty()) ++idle;
        if (cfg.no_progress_window > 0 && idle >= cfg.no_progress_window) {
            rep.stop_reason = "no new tuples in " + std::to_string(idle) + " sweeps";
            break;
        }
    }
    rep.tuples = unshift_tuples(prob, s.found, target);
    if (rep.tuples.empty()) rep.warnings.push_back("no converged tuples found");
    rep.total_seconds = detail::seconds_since(t_start);
    return rep;
}

} // namespace ttmep
