#pragma once

// Column subset selection on a sensitivity matrix chi (n x p, n >= p).
//
// Each algorithm returns a pivoted QR  chi * P = Q * R  whose first k permuted
// columns are the identifiable parameters and whose last p - k are the
// unidentifiable ones:
//   B1     moves columns aligned with the smallest right singular vectors to the back,
//   B4     moves columns aligned with the dominant right singular vector to the front,
//   B3     moves the column of largest norm in the dominant right singular subspace to the front,
//   SRRQR  swaps column pairs while that grows |det(R11)| by more than a factor f.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "idcss/defaults.hpp"
#include "idcss/dense.hpp"
#include "idcss/errors.hpp"

namespace idcss {

enum class Algorithm { B1, B4, B3, Srrqr };

inline constexpr Algorithm kAllAlgorithms[] = {Algorithm::B1, Algorithm::B4, Algorithm::B3, Algorithm::Srrqr};

inline std::string_view to_string(Algorithm a) {
    switch (a) {
        case Algorithm::B1: return "b1";
        case Algorithm::B4: return "b4";
        case Algorithm::B3: return "b3";
        case Algorithm::Srrqr: return "srrqr";
    }
    return "?";
}

inline Algorithm parse_algorithm(std::string_view name) {
    for (Algorithm a : kAllAlgorithms)
        if (to_string(a) == name) return a;
    throw InputDomainError("unknown algorithm '" + std::string(name) + "' (expected b1, b4, b3 or srrqr)");
}

struct RankPolicy {
    enum class Mode { Fixed, Absolute, Relative, Gap };

    Mode mode = Mode::Gap;
    Index k = 0;
    double eta = 0.0;

    static RankPolicy fixed(Index k) { return {Mode::Fixed, k, 0.0}; }
    static RankPolicy absolute(double eta) { return {Mode::Absolute, 0, eta}; }
    static RankPolicy relative(double eta) { return {Mode::Relative, 0, eta}; }
    static RankPolicy gap() { return {Mode::Gap, 0, 0.0}; }
};

struct RankSelection {
    Index k = 1;
    // No singular value passed the threshold; k was forced to 1.
    bool degenerate = false;
    // Every singular value passed the threshold; k was clamped from p down to p - 1.
    bool full_rank = false;
};

/// Picks k in [1, p-1] from descending singular values.
template <typename Scalar>
RankSelection select_k(const Vec<Scalar>& sigma, const RankPolicy& policy) {
    const Index p = sigma.size();
    if (p == 0) throw InputDomainError("select_k: empty singular value list");
    if (p < 2) throw InputDomainError("select_k: need at least two singular values");
    for (Index j = 0; j < p; ++j) {
        if (!(sigma(j) >= Scalar(0)) || !std::isfinite(double(sigma(j))))
            throw InputDomainError("select_k: singular values must be finite and nonnegative");
        if (j > 0 && sigma(j) > sigma(j - 1)) throw InputDomainError("select_k: singular values must be descending");
    }
    if (policy.eta < 0.0) throw InputDomainError("select_k: eta must be nonnegative");

    RankSelection sel;
    auto count_above = [&](Scalar threshold) {
        Index k = 0;
        while (k < p && sigma(k) > threshold) ++k;
        return k;
    };
    auto clamp = [&](Index k) {
        if (k == 0) {
            sel.degenerate = true;
            return Index{1};
        }
        if (k == p) {
            sel.full_rank = true;
            return p - 1;
        }
        return k;
    };

    switch (policy.mode) {
        case RankPolicy::Mode::Fixed:
            if (policy.k < 1 || policy.k >= p)
                throw InputDomainError("select_k: fixed k must lie in [1, p), got " + std::to_string(policy.k));
            sel.k = policy.k;
            break;
        case RankPolicy::Mode::Absolute:
            sel.k = clamp(count_above(Scalar(policy.eta)));
            break;
        case RankPolicy::Mode::Relative:
            sel.k = clamp(count_above(Scalar(policy.eta) * sigma(0)));
            break;
        case RankPolicy::Mode::Gap: {
            if (sigma(0) == Scalar(0)) {
                sel.degenerate = true;
                sel.k = 1;
                break;
            }
            Index best = 1;
            Scalar best_ratio = Scalar(-1);
            for (Index k = 1; k < p; ++k) {
                const Scalar hi = sigma(k - 1);
                const Scalar lo = sigma(k);
                Scalar ratio;
                if (hi == Scalar(0))
                    ratio = Scalar(0);
                else if (lo == Scalar(0))
                    ratio = std::numeric_limits<Scalar>::infinity();
                else
                    ratio = hi / lo;
                if (ratio > best_ratio) {
                    best_ratio = ratio;
                    best = k;
                }
            }
            sel.k = best;
            break;
        }
    }
    return sel;
}

struct SrrqrConfig {
    double f = defaults::kSrrqrF;
    double tie_slack = defaults::kSrrqrTieSlack;
    int max_swaps = defaults::kSrrqrMaxSwaps;  // 0: 4 k (p - k)
};

template <typename Scalar>
struct CssResult {
    Algorithm algorithm = Algorithm::B1;
    Index k = 0;
    QrFactors<Scalar> factors;
    std::vector<Index> identifiable;
    std::vector<Index> unidentifiable;
    int swap_count = 0;
    // False only when SRRQR ran out of swaps.
    bool converged = true;
    // ||V11^{-1}||_2 for B3, measured on the final R.
    std::optional<Scalar> v11_inverse_norm;
    // log|det R11| before the first swap and after every swap (SRRQR only).
    std::vector<Scalar> log_det_history;
    // run_css only: rank-selection diagnostics.
    bool rank_degenerate = false;
    bool full_rank_bypass = false;
};

namespace detail {

template <typename Scalar>
void require_css_input(const Mat<Scalar>& chi, Index k, const char* what) {
    require_tall(chi, what);
    require_finite(chi, what);
    const Index p = chi.cols();
    if (k < 1 || k >= p)
        throw InputDomainError(std::string(what) + ": k must satisfy 1 <= k < p, got k=" + std::to_string(k) +
                               ", p=" + std::to_string(p));
}

template <typename Scalar>
CssResult<Scalar> finish(Algorithm algorithm, Index k, QrFactors<Scalar> factors) {
    CssResult<Scalar> out;
    out.algorithm = algorithm;
    out.k = k;
    const Index p = factors.perm.size();
    for (Index j = 0; j < p; ++j) (j < k ? out.identifiable : out.unidentifiable).push_back(factors.perm[j]);
    out.factors = std::move(factors);
    return out;
}

// Index of the magnitude-largest entry; the lowest index wins ties.
template <typename Derived>
Index argmax_abs(const Eigen::MatrixBase<Derived>& v) {
    Index best = 0;
    for (Index i = 1; i < v.size(); ++i)
        if (std::abs(v(i)) > std::abs(v(best))) best = i;
    return best;
}

// Swaps columns `offset` and `offset + m` of the trailing block starting at `offset`,
// permutes the rows above it to match, and re-triangularizes the trailing block.
template <typename Scalar>
void pivot_trailing_block(QrFactors<Scalar>& f, Index offset, Index m) {
    const Index p = f.r.cols();
    const Index size = p - offset;
    if (m == 0) return;
    f.r.col(offset).swap(f.r.col(offset + m));
    f.perm.swap(offset, offset + m);
    const QrFactors<Scalar> t = qr_unpivoted(f.r.bottomRightCorner(size, size));
    f.q.rightCols(size) = (f.q.rightCols(size) * t.q).eval();
    f.r.bottomRightCorner(size, size) = t.r;
}

}  // namespace detail

/// Algorithm B1 (Chan's RRQR): for l = p..k+1, the column carrying the largest
/// component of the smallest right singular vector of the leading l x l block is
/// moved to position l.
template <typename Derived>
CssResult<typename Derived::Scalar> css_b1(const Eigen::MatrixBase<Derived>& chi_in, Index k) {
    using Scalar = typename Derived::Scalar;
    const Mat<Scalar> chi = chi_in;
    detail::require_css_input(chi, k, "css_b1");
    const Index p = chi.cols();

    QrFactors<Scalar> f = qr_unpivoted(chi);
    for (Index l = p; l > k; --l) {
        Mat<Scalar> lead = f.r.topLeftCorner(l, l);
        const SvdFactors<Scalar> s = svd(lead);
        const Index m = detail::argmax_abs(s.v.col(l - 1));
        if (m == l - 1) continue;
        lead.col(m).swap(lead.col(l - 1));
        f.perm.swap(m, l - 1);
        const QrFactors<Scalar> t = qr_unpivoted(lead);
        f.q.leftCols(l) = (f.q.leftCols(l) * t.q).eval();
        if (l < p) f.r.topRightCorner(l, p - l) = (t.q.transpose() * f.r.topRightCorner(l, p - l)).eval();
        f.r.topLeftCorner(l, l) = t.r;
    }
    return detail::finish(Algorithm::B1, k, std::move(f));
}

/// Algorithm B4: for l = 1..k, the column carrying the largest component of the
/// dominant right singular vector of the trailing block is moved to its front.
template <typename Derived>
CssResult<typename Derived::Scalar> css_b4(const Eigen::MatrixBase<Derived>& chi_in, Index k) {
    using Scalar = typename Derived::Scalar;
    const Mat<Scalar> chi = chi_in;
    detail::require_css_input(chi, k, "css_b4");
    const Index p = chi.cols();

    QrFactors<Scalar> f = qr_unpivoted(chi);
    for (Index s = 0; s < k; ++s) {
        const Index size = p - s;
        const SvdFactors<Scalar> sv = svd(f.r.bottomRightCorner(size, size));
        detail::pivot_trailing_block(f, s, detail::argmax_abs(sv.v.col(0)));
    }
    return detail::finish(Algorithm::B4, k, std::move(f));
}

/// Algorithm B3: for l = 1..k, W holds the k - l + 1 dominant right singular
/// vectors of the trailing block (as rows); its largest-norm column goes to the front.
template <typename Derived>
CssResult<typename Derived::Scalar> css_b3(const Eigen::MatrixBase<Derived>& chi_in, Index k) {
    using Scalar = typename Derived::Scalar;
    const Mat<Scalar> chi = chi_in;
    detail::require_css_input(chi, k, "css_b3");
    const Index p = chi.cols();

    QrFactors<Scalar> f = qr_unpivoted(chi);
    for (Index s = 0; s < k; ++s) {
        const Index size = p - s;
        const SvdFactors<Scalar> sv = svd(f.r.bottomRightCorner(size, size));
        // Column norms of W = V1^T are the row norms of V1.
        const Vec<Scalar> norms = sv.v.leftCols(k - s).rowwise().squaredNorm();
        Index m = 0;
        for (Index i = 1; i < size; ++i)
            if (norms(i) > norms(m)) m = i;
        detail::pivot_trailing_block(f, s, m);
    }

    CssResult<Scalar> out = detail::finish(Algorithm::B3, k, std::move(f));
    const SvdFactors<Scalar> whole = svd(out.factors.r);
    const Vec<Scalar> v11 = singular_values(Mat<Scalar>(whole.v.topLeftCorner(k, k)));
    const Scalar smin = v11(k - 1);
    out.v11_inverse_norm = smin > Scalar(0) ? Scalar(1) / smin : std::numeric_limits<Scalar>::infinity();
    return out;
}

/// Squared row norms of a p x (p - k) block with orthonormal columns.
template <typename Derived>
Vec<typename Derived::Scalar> leverage_scores(const Eigen::MatrixBase<Derived>& v_sub) {
    using Scalar = typename Derived::Scalar;
    require_finite(v_sub, "leverage_scores");
    if (v_sub.cols() == 0 || v_sub.rows() < v_sub.cols())
        throw InputDomainError("leverage_scores: need a tall block with at least one column");
    const Mat<Scalar> gram = v_sub.transpose() * v_sub;
    if ((gram - Mat<Scalar>::Identity(gram.rows(), gram.cols())).norm() > Scalar(1e-8))
        throw InputDomainError("leverage_scores: columns are not orthonormal");
    return v_sub.rowwise().squaredNorm();
}

namespace detail {

template <typename Scalar>
void require_rho_input(const Mat<Scalar>& r, Index k) {
    if (r.rows() != r.cols()) throw InputDomainError("srrqr_rho: R must be square");
    if (k < 1 || k >= r.cols()) throw InputDomainError("srrqr_rho: k must satisfy 1 <= k < p");
    for (Index i = 0; i < k; ++i)
        if (r(i, i) == Scalar(0)) throw NumericalFailure("srrqr_rho: leading block R11 is singular");
}

}  // namespace detail

/// Every ratio det(R11 after swapping columns i and k+j) / det(R11), as a k x (p-k) matrix.
template <typename Derived>
Mat<typename Derived::Scalar> srrqr_rho_matrix(const Eigen::MatrixBase<Derived>& r_in, Index k) {
    using Scalar = typename Derived::Scalar;
    const Mat<Scalar> r = r_in;
    detail::require_rho_input(r, k);
    const Index p = r.cols();

    const auto r11 = r.topLeftCorner(k, k).template triangularView<Eigen::Upper>();
    const Mat<Scalar> coupling = r11.solve(r.topRightCorner(k, p - k));
    const Mat<Scalar> r11_inv = r11.solve(Mat<Scalar>::Identity(k, k));
    const Vec<Scalar> inv_row_norms = r11_inv.rowwise().norm();
    const Vec<Scalar> tail_col_norms = r.bottomRightCorner(p - k, p - k).colwise().norm().transpose();

    Mat<Scalar> rho(k, p - k);
    for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < p - k; ++j) rho(i, j) = std::hypot(coupling(i, j), tail_col_norms(j) * inv_row_norms(i));
    return rho;
}

/// Single ratio; i in [0, k), j in [0, p - k).
template <typename Derived>
typename Derived::Scalar srrqr_rho(const Eigen::MatrixBase<Derived>& r, Index k, Index i, Index j) {
    if (i < 0 || i >= k || j < 0 || j >= r.cols() - k) throw InputDomainError("srrqr_rho: index out of range");
    return srrqr_rho_matrix(r, k)(i, j);
}

/// Algorithm SRRQR (Gu-Eisenstat): start from column-pivoted QR, then swap
/// columns i and k+j while some ratio exceeds f * (1 + tie_slack).
template <typename Derived>
CssResult<typename Derived::Scalar> css_srrqr(const Eigen::MatrixBase<Derived>& chi_in, Index k,
                                              const SrrqrConfig& cfg = {}, const Tolerances& tol = {}) {
    using Scalar = typename Derived::Scalar;
    const Mat<Scalar> chi = chi_in;
    detail::require_css_input(chi, k, "css_srrqr");
    if (!(cfg.f >= 1.0)) throw InputDomainError("css_srrqr: f must be >= 1");
    if (cfg.tie_slack < 0.0) throw InputDomainError("css_srrqr: tie slack must be >= 0");
    if (cfg.max_swaps < 0) throw InputDomainError("css_srrqr: max_swaps must be positive");
    const Index p = chi.cols();

    QrFactors<Scalar> f = qr_col_pivoted(chi);
    const Scalar floor = Scalar(tol.rank_for(chi.rows())) * f.r(0, 0);
    if (f.r(0, 0) == Scalar(0) || f.r(k - 1, k - 1) <= floor)
        throw NumericalFailure("css_srrqr: leading " + std::to_string(k) + "x" + std::to_string(k) +
                               " block of the pivoted QR is numerically singular; reduce k");

    const long cap = cfg.max_swaps > 0 ? cfg.max_swaps : 4L * static_cast<long>(k) * static_cast<long>(p - k);
    const Scalar threshold = Scalar(cfg.f) * (Scalar(1) + Scalar(cfg.tie_slack));
    auto log_det = [&] {
        Scalar acc = 0;
        for (Index i = 0; i < k; ++i) acc += std::log(std::abs(f.r(i, i)));
        return acc;
    };

    std::vector<Scalar> history{log_det()};
    int swaps = 0;
    bool converged = false;
    for (;;) {
        const Mat<Scalar> rho = srrqr_rho_matrix(f.r, k);
        Index bi = 0, bj = 0;
        for (Index i = 0; i < k; ++i)
            for (Index j = 0; j < p - k; ++j)
                if (rho(i, j) > rho(bi, bj)) {
                    bi = i;
                    bj = j;
                }
        if (!(rho(bi, bj) > threshold)) {
            converged = true;
            break;
        }
        if (swaps >= cap) break;

        f.r.col(bi).swap(f.r.col(k + bj));
        f.perm.swap(bi, k + bj);
        const QrFactors<Scalar> t = qr_unpivoted(f.r);
        f.q = (f.q * t.q).eval();
        f.r = t.r;
        ++swaps;
        history.push_back(log_det());
    }

    CssResult<Scalar> out = detail::finish(Algorithm::Srrqr, k, std::move(f));
    out.swap_count = swaps;
    out.converged = converged;
    out.log_det_history = std::move(history);
    return out;
}

/// Chooses k with `policy`, then runs `algorithm`. When the policy keeps every
/// singular value (numerically full column rank), CSS is bypassed: k = p and
/// all columns are identifiable, ordered by column-pivoted QR.
template <typename Derived>
CssResult<typename Derived::Scalar> run_css(const Eigen::MatrixBase<Derived>& chi_in, Algorithm algorithm,
                                            const RankPolicy& policy, const SrrqrConfig& cfg = {},
                                            const Tolerances& tol = {}) {
    using Scalar = typename Derived::Scalar;
    const Mat<Scalar> chi = chi_in;
    detail::require_tall(chi, "run_css");
    require_finite(chi, "run_css");
    const RankSelection sel = select_k(singular_values(chi), policy);

    CssResult<Scalar> out;
    if (sel.full_rank) {
        out = detail::finish(algorithm, chi.cols(), qr_col_pivoted(chi));
    } else {
        switch (algorithm) {
            case Algorithm::B1: out = css_b1(chi, sel.k); break;
            case Algorithm::B4: out = css_b4(chi, sel.k); break;
            case Algorithm::B3: out = css_b3(chi, sel.k); break;
            case Algorithm::Srrqr: out = css_srrqr(chi, sel.k, cfg, tol); break;
        }
    }
    out.rank_degenerate = sel.degenerate;
    out.full_rank_bypass = sel.full_rank;
    return out;
}

}  // namespace idcss
