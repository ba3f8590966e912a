#pragma once

// Test-only reference computations. Nothing here calls into the library's
// factorizations, so they stay independent of the code they check.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix gaussian(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix a(n, p);
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index i = 0; i < n; ++i) a(i, j) = dist(gen);
    return a;
}

// Singular values (descending) from the eigenvalues of the Gram matrix.
// Only meaningful for well-conditioned test matrices.
inline Vector gram_singular_values(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(a.transpose() * a, Eigen::EigenvaluesOnly);
    Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    std::sort(ev.data(), ev.data() + ev.size(), std::greater<double>());
    return ev;
}

// Singular values from Eigen's two-sided Jacobi SVD (high relative accuracy on small matrices).
inline Vector jacobi_singular_values(const Matrix& a) {
    Eigen::JacobiSVD<Matrix> s(a);
    return s.singularValues();
}

// |det| of the leading k x k block of R after a Householder QR of A (Eigen's own implementation).
inline double leading_abs_det(const Matrix& a, Eigen::Index k) {
    Eigen::HouseholderQR<Matrix> qr(a);
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    double det = 1.0;
    for (Eigen::Index i = 0; i < k; ++i) det *= std::abs(r(i, i));
    return det;
}

// Random matrix U diag(sigma) V^T with log-uniform singular values in [10^lo, 10^hi].
inline Matrix with_spectrum(Eigen::Index n, Eigen::Index p, double lo, double hi, std::uint64_t seed,
                            Vector* sigma_out = nullptr) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> exponent(lo, hi);
    Vector sigma(p);
    for (Eigen::Index j = 0; j < p; ++j) sigma(j) = std::pow(10.0, exponent(gen));
    std::sort(sigma.data(), sigma.data() + p, std::greater<double>());
    Eigen::HouseholderQR<Matrix> qu(gaussian(n, p, seed ^ 0x9e3779b97f4a7c15ULL));
    Eigen::HouseholderQR<Matrix> qv(gaussian(p, p, seed ^ 0xbf58476d1ce4e5b9ULL));
    const Matrix u = qu.householderQ() * Matrix::Identity(n, p);
    const Matrix v = qv.householderQ();
    if (sigma_out) *sigma_out = sigma;
    return u * sigma.asDiagonal() * v.transpose();
}

}  // namespace oracle
