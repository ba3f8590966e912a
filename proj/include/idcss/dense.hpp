#pragma once

// Dense primitives: Householder QR (plain and column pivoted), SVD through a
// preliminary QR, residual norms and condition numbers.
//
// All factorizations follow one sign convention: the diagonal of R is nonnegative.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "idcss/defaults.hpp"
#include "idcss/errors.hpp"

namespace idcss {

using Index = Eigen::Index;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = Mat<double>;
using Vector = Vec<double>;

/// Column permutation stored by image: column j of A*P is column image[j] of A.
class Permutation {
public:
    Permutation() = default;

    static Permutation identity(Index p) {
        Permutation perm;
        perm.image_.resize(static_cast<std::size_t>(p));
        std::iota(perm.image_.begin(), perm.image_.end(), Index{0});
        return perm;
    }

    static Permutation from_image(std::vector<Index> image) {
        Permutation perm;
        perm.image_ = std::move(image);
        if (!perm.is_bijection()) throw InputDomainError("permutation image is not a bijection");
        return perm;
    }

    Index size() const { return static_cast<Index>(image_.size()); }
    Index operator[](Index j) const { return image_[static_cast<std::size_t>(j)]; }
    const std::vector<Index>& image() const { return image_; }

    void swap(Index a, Index b) { std::swap(image_[static_cast<std::size_t>(a)], image_[static_cast<std::size_t>(b)]); }

    bool is_bijection() const {
        std::vector<char> seen(image_.size(), 0);
        for (Index j : image_) {
            if (j < 0 || j >= size() || seen[static_cast<std::size_t>(j)]) return false;
            seen[static_cast<std::size_t>(j)] = 1;
        }
        return true;
    }

    /// A*P, i.e. the columns of `a` in permuted order.
    template <typename Derived>
    Mat<typename Derived::Scalar> apply(const Eigen::MatrixBase<Derived>& a) const {
        Mat<typename Derived::Scalar> out(a.rows(), size());
        for (Index j = 0; j < size(); ++j) out.col(j) = a.col((*this)[j]);
        return out;
    }

    friend bool operator==(const Permutation&, const Permutation&) = default;

private:
    std::vector<Index> image_;
};

template <typename Scalar>
struct QrFactors {
    Permutation perm;
    Mat<Scalar> q;  // n x p, orthonormal columns
    Mat<Scalar> r;  // p x p, upper triangular, nonnegative diagonal
};

template <typename Scalar>
struct SvdFactors {
    Mat<Scalar> u;      // n x p
    Vec<Scalar> sigma;  // descending
    Mat<Scalar> v;      // p x p
    int sweeps = 0;
};

struct Tolerances {
    double orth = defaults::kTolOrth;
    double recon = defaults::kTolRecon;
    double rank = -1.0;  // negative: rows * eps

    double rank_for(Index rows) const { return rank >= 0.0 ? rank : defaults::tol_rank(static_cast<long>(rows)); }
};

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& a, const char* what) {
    if (!a.allFinite()) throw InputDomainError(std::string(what) + ": matrix has non-finite entries");
}

namespace detail {

template <typename Derived>
void require_tall(const Eigen::MatrixBase<Derived>& a, const char* what) {
    if (a.rows() < 1 || a.cols() < 1) throw InputDomainError(std::string(what) + ": empty matrix");
    if (a.rows() < a.cols())
        throw InputDomainError(std::string(what) + ": need rows >= cols, got " + std::to_string(a.rows()) + "x" +
                               std::to_string(a.cols()));
}

template <typename Scalar>
QrFactors<Scalar> householder_qr(Mat<Scalar> work, bool pivot) {
    const Index n = work.rows();
    const Index p = work.cols();
    Permutation perm = Permutation::identity(p);
    Vec<Scalar> tau(p);
    Vec<Scalar> scratch(p);

    for (Index j = 0; j < p; ++j) {
        if (pivot) {
            // Greedy max trailing-column norm; strict '>' keeps the lowest index on ties.
            Index best = j;
            Scalar best_norm = work.col(j).tail(n - j).squaredNorm();
            for (Index c = j + 1; c < p; ++c) {
                const Scalar norm = work.col(c).tail(n - j).squaredNorm();
                if (norm > best_norm) {
                    best_norm = norm;
                    best = c;
                }
            }
            if (best != j) {
                work.col(j).swap(work.col(best));
                perm.swap(j, best);
            }
        }
        Scalar beta;
        auto column = work.col(j).tail(n - j);
        column.makeHouseholderInPlace(tau(j), beta);
        work(j, j) = beta;
        if (j + 1 < p) {
            work.bottomRightCorner(n - j, p - j - 1)
                .applyHouseholderOnTheLeft(work.col(j).tail(n - j - 1), tau(j), scratch.data());
        }
    }

    QrFactors<Scalar> out;
    out.perm = std::move(perm);
    out.r = work.topRows(p).template triangularView<Eigen::Upper>();
    out.q = Mat<Scalar>::Identity(n, p);
    for (Index j = p - 1; j >= 0; --j) {
        out.q.bottomRightCorner(n - j, p - j)
            .applyHouseholderOnTheLeft(work.col(j).tail(n - j - 1), tau(j), scratch.data());
    }
    for (Index j = 0; j < p; ++j) {
        if (out.r(j, j) < Scalar(0)) {
            out.r.row(j) *= Scalar(-1);
            out.q.col(j) *= Scalar(-1);
        }
    }
    return out;
}

// Gram-Schmidt (twice) against the nonzero columns of `basis` for the columns flagged in `missing`.
template <typename Scalar>
void complete_orthonormal(Mat<Scalar>& basis, const std::vector<bool>& missing) {
    const Index n = basis.rows();
    for (Index j = 0; j < basis.cols(); ++j) {
        if (!missing[static_cast<std::size_t>(j)]) continue;
        Vec<Scalar> best;
        Scalar best_norm = Scalar(-1);
        for (Index e = 0; e < n; ++e) {
            Vec<Scalar> cand = Vec<Scalar>::Unit(n, e);
            for (int pass = 0; pass < 2; ++pass) {
                for (Index c = 0; c < basis.cols(); ++c) {
                    if (c == j || (missing[static_cast<std::size_t>(c)] && c > j)) continue;
                    cand -= basis.col(c).dot(cand) * basis.col(c);
                }
            }
            const Scalar norm = cand.norm();
            if (norm > best_norm) {
                best_norm = norm;
                best = cand;
            }
        }
        basis.col(j) = best / best_norm;
    }
}

}  // namespace detail

/// Householder QR without pivoting; P is the identity.
template <typename Derived>
QrFactors<typename Derived::Scalar> qr_unpivoted(const Eigen::MatrixBase<Derived>& a) {
    detail::require_tall(a, "qr_unpivoted");
    require_finite(a, "qr_unpivoted");
    return detail::householder_qr<typename Derived::Scalar>(a.eval(), false);
}

/// Householder QR with classical max-column-norm pivoting (ties to the lowest index).
template <typename Derived>
QrFactors<typename Derived::Scalar> qr_col_pivoted(const Eigen::MatrixBase<Derived>& a) {
    detail::require_tall(a, "qr_col_pivoted");
    require_finite(a, "qr_col_pivoted");
    return detail::householder_qr<typename Derived::Scalar>(a.eval(), true);
}

/// Thin SVD. The matrix is first reduced by a column-pivoted QR, then the
/// transposed triangular factor goes through one-sided Jacobi sweeps.
template <typename Derived>
SvdFactors<typename Derived::Scalar> svd(const Eigen::MatrixBase<Derived>& a,
                                         int max_sweeps = defaults::kSvdMaxSweeps) {
    using Scalar = typename Derived::Scalar;
    detail::require_tall(a, "svd");
    require_finite(a, "svd");

    const QrFactors<Scalar> qr = detail::householder_qr<Scalar>(a.eval(), true);
    const Index p = a.cols();
    const Scalar eps = std::numeric_limits<Scalar>::epsilon();
    const Scalar tol = eps * std::sqrt(Scalar(p));

    // X J = Y with orthogonal J, so R = J Y^T: left vectors of R are J, right vectors are Y's columns.
    Mat<Scalar> x = qr.r.transpose();
    Mat<Scalar> rot = Mat<Scalar>::Identity(p, p);
    int sweep = 0;
    bool converged = (p == 1);
    while (!converged) {
        if (sweep == max_sweeps)
            throw NumericalFailure("svd: Jacobi sweeps did not converge after " + std::to_string(sweep), sweep);
        ++sweep;
        bool rotated = false;
        for (Index i = 0; i + 1 < p; ++i) {
            for (Index j = i + 1; j < p; ++j) {
                const Scalar alpha = x.col(i).squaredNorm();
                const Scalar beta = x.col(j).squaredNorm();
                const Scalar gamma = x.col(i).dot(x.col(j));
                if (gamma == Scalar(0) || std::abs(gamma) <= tol * std::sqrt(alpha) * std::sqrt(beta)) continue;
                rotated = true;
                const Scalar zeta = (beta - alpha) / (Scalar(2) * gamma);
                const Scalar t = (zeta >= Scalar(0) ? Scalar(1) : Scalar(-1)) /
                                 (std::abs(zeta) + std::sqrt(Scalar(1) + zeta * zeta));
                const Scalar c = Scalar(1) / std::sqrt(Scalar(1) + t * t);
                const Scalar s = c * t;
                Eigen::JacobiRotation<Scalar> g(c, s);
                x.applyOnTheRight(i, j, g);
                rot.applyOnTheRight(i, j, g);
            }
        }
        converged = !rotated;
    }

    Vec<Scalar> sigma(p);
    std::vector<bool> zero_col(static_cast<std::size_t>(p), false);
    for (Index j = 0; j < p; ++j) {
        sigma(j) = x.col(j).norm();
        if (sigma(j) > std::numeric_limits<Scalar>::min()) {
            x.col(j) /= sigma(j);
        } else {
            sigma(j) = Scalar(0);
            zero_col[static_cast<std::size_t>(j)] = true;
        }
    }
    if (std::find(zero_col.begin(), zero_col.end(), true) != zero_col.end()) detail::complete_orthonormal(x, zero_col);

    std::vector<Index> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index l, Index r) { return sigma(l) > sigma(r); });

    SvdFactors<Scalar> out;
    out.sweeps = sweep;
    out.sigma.resize(p);
    out.u.resize(a.rows(), p);
    out.v.resize(p, p);
    const Mat<Scalar> qu = qr.q * rot;
    for (Index j = 0; j < p; ++j) {
        const Index src = order[static_cast<std::size_t>(j)];
        out.sigma(j) = sigma(src);
        out.u.col(j) = qu.col(src);
        // A P = (Q J) S W^T  =>  V = P W.
        for (Index i = 0; i < p; ++i) out.v(qr.perm[i], j) = x(i, src);
    }
    return out;
}

template <typename Derived>
Vec<typename Derived::Scalar> singular_values(const Eigen::MatrixBase<Derived>& a) {
    if (a.rows() == 0 || a.cols() == 0) return {};
    if (a.rows() < a.cols()) return svd(a.transpose()).sigma;
    return svd(a).sigma;
}

/// Largest singular value; zero for an empty matrix.
template <typename Derived>
typename Derived::Scalar spectral_norm(const Eigen::MatrixBase<Derived>& a) {
    if (a.rows() == 0 || a.cols() == 0) return 0;
    return singular_values(a)(0);
}

/// ||(I - A1 A1^+) A2||_2 with the pseudo-inverse taken from a truncated SVD of A1.
template <typename D1, typename D2>
typename D1::Scalar residual_norm(const Eigen::MatrixBase<D1>& a1, const Eigen::MatrixBase<D2>& a2,
                                  const Tolerances& tol = {}) {
    using Scalar = typename D1::Scalar;
    if (a1.rows() != a2.rows()) throw InputDomainError("residual_norm: row counts differ");
    require_finite(a1, "residual_norm");
    require_finite(a2, "residual_norm");
    if (a2.cols() == 0) return Scalar(0);

    const SvdFactors<Scalar> f = svd(a1);
    const Scalar cutoff = Scalar(tol.rank_for(a1.rows())) * f.sigma(0);
    Index rank = 0;
    while (rank < f.sigma.size() && f.sigma(rank) > cutoff) ++rank;

    const Mat<Scalar> basis = f.u.leftCols(rank);
    const Mat<Scalar> resid = a2 - basis * (basis.transpose() * a2);
    return spectral_norm(resid);
}

/// sigma_1 / sigma_p, or +infinity when sigma_p is at or below the rank tolerance.
template <typename Derived>
typename Derived::Scalar condition_number(const Eigen::MatrixBase<Derived>& a, const Tolerances& tol = {}) {
    using Scalar = typename Derived::Scalar;
    const Vec<Scalar> s = svd(a).sigma;
    const Scalar smin = s(s.size() - 1);
    if (s(0) == Scalar(0) || smin <= Scalar(tol.rank_for(a.rows())) * s(0))
        return std::numeric_limits<Scalar>::infinity();
    return s(0) / smin;
}

/// Number of singular values strictly above eta * sigma_1 (no clamping).
template <typename Scalar>
Index numerical_rank(const Vec<Scalar>& sigma, Scalar eta) {
    Index k = 0;
    while (k < sigma.size() && sigma(k) > eta * sigma(0)) ++k;
    return k;
}

}  // namespace idcss
