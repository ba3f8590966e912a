#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "idcss/dense.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace idcss;

namespace {

Matrix caution_matrix() { return fixture::duplicated_columns(); }
Matrix gram_demo_matrix() { return fixture::gram_loss(); }

void check_qr_contract(const Matrix& a, const QrFactors<double>& f) {
    const Index p = a.cols();
    CHECK(f.perm.is_bijection());
    CHECK((f.q.transpose() * f.q - Matrix::Identity(p, p)).norm() <= 1e-12);
    for (Index j = 0; j < p; ++j) {
        CHECK(f.r(j, j) >= 0.0);
        for (Index i = j + 1; i < p; ++i) CHECK(f.r(i, j) == 0.0);
    }
    CHECK((f.perm.apply(a) - f.q * f.r).norm() <= 1e-12 * a.norm());
}

}  // namespace

TEST_CASE("qr_unpivoted: identity and a single column") {
    const Matrix eye = Matrix::Identity(3, 3);
    const auto f = qr_unpivoted(eye);
    CHECK(f.perm == Permutation::identity(3));
    CHECK((f.q - eye).norm() == doctest::Approx(0.0));
    CHECK((f.r - eye).norm() == doctest::Approx(0.0));

    Matrix col(2, 1);
    col << 3, 4;
    const auto g = qr_unpivoted(col);
    CHECK(g.r(0, 0) == doctest::Approx(5.0));
    CHECK(g.q(0, 0) == doctest::Approx(0.6));
    CHECK(g.q(1, 0) == doctest::Approx(0.8));
}

TEST_CASE("qr_unpivoted: seeded 8x5 residuals") {
    const Matrix a = oracle::gaussian(8, 5, 11);
    const auto f = qr_unpivoted(a);
    CHECK(f.perm == Permutation::identity(5));
    check_qr_contract(a, f);
}

TEST_CASE("qr: input-domain errors") {
    Matrix wide(2, 3);
    wide.setOnes();
    CHECK_THROWS_AS(qr_unpivoted(wide), InputDomainError);
    Matrix bad = Matrix::Identity(3, 3);
    bad(1, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(qr_unpivoted(bad), InputDomainError);
    CHECK_THROWS_AS(qr_col_pivoted(bad), InputDomainError);
    bad(1, 2) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(svd(bad), InputDomainError);
}

TEST_CASE("qr_col_pivoted: max-norm pivoting") {
    const auto f = qr_col_pivoted(Matrix(Matrix::Identity(3, 3)));
    for (Index j = 0; j < 3; ++j) CHECK(std::abs(f.r(j, j)) == doctest::Approx(1.0));

    Matrix a(2, 2);
    a << 1, 2, 0, 0;
    const auto g = qr_col_pivoted(a);
    CHECK(g.perm[0] == 1);
    CHECK(g.r(0, 0) == doctest::Approx(2.0));

    const Matrix demo = gram_demo_matrix();
    const auto h = qr_col_pivoted(demo);
    CHECK(h.r(0, 0) > 0.0);
    CHECK(std::abs(h.r(1, 1)) >= 1e-10);
    CHECK(std::abs(h.r(1, 1)) <= 1e-8);
    // Oracle: sigma_2 from the closed form of [[1,1],[d,0],[0,d]] is d.
    CHECK(singular_values(demo)(1) == doctest::Approx(1e-9).epsilon(1e-6));
}

TEST_CASE("qr_col_pivoted: diagonal nonincreasing and contract on random inputs") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        std::mt19937_64 gen(seed);
        const Index p = 1 + static_cast<Index>(gen() % 12);
        const Index n = p + static_cast<Index>(gen() % 10);
        const Matrix a = oracle::gaussian(n, p, seed);
        const auto f = qr_col_pivoted(a);
        check_qr_contract(a, f);
        for (Index j = 1; j < p; ++j) CHECK(f.r(j, j) <= f.r(j - 1, j - 1) * (1 + 1e-14));
    }
}

TEST_CASE("qr_col_pivoted: ties break to the lowest index") {
    Matrix a = Matrix::Identity(4, 4);
    const auto f = qr_col_pivoted(a);
    CHECK(f.perm == Permutation::identity(4));
}

TEST_CASE("svd: padded diagonal and the duplicated-column matrix") {
    Matrix a = Matrix::Zero(4, 3);
    a(0, 0) = 3;
    a(1, 1) = 2;
    a(2, 2) = 1;
    const auto s = svd(a);
    CHECK(s.sigma(0) == doctest::Approx(3.0));
    CHECK(s.sigma(1) == doctest::Approx(2.0));
    CHECK(s.sigma(2) == doctest::Approx(1.0));

    const auto c = svd(caution_matrix());
    CHECK(c.sigma(0) == doctest::Approx(std::sqrt(2.0)));
    CHECK(c.sigma(1) == doctest::Approx(std::sqrt(2.0)));
    CHECK(c.sigma(2) <= 1e-15);
    CHECK(c.sigma(3) <= 1e-15);
    CHECK((c.u.transpose() * c.u - Matrix::Identity(4, 4)).norm() <= 1e-12);
    CHECK((c.v.transpose() * c.v - Matrix::Identity(4, 4)).norm() <= 1e-12);
}

TEST_CASE("svd: matches the Gram-eigenvalue oracle on a seeded 10x6") {
    const Matrix a = oracle::gaussian(10, 6, 5);
    const Vector got = svd(a).sigma;
    const Vector want = oracle::gram_singular_values(a);
    for (Index j = 0; j < 6; ++j) {
        if (want(j) <= 1e-6 * want(0)) continue;
        CHECK(std::abs(got(j) - want(j)) <= 1e-8 * want(j));
    }
}

TEST_CASE("svd: exact zero matrix gets a completed orthonormal basis") {
    const Matrix z = Matrix::Zero(5, 3);
    const auto s = svd(z);
    CHECK(s.sigma.norm() == 0.0);
    CHECK((s.u.transpose() * s.u - Matrix::Identity(3, 3)).norm() <= 1e-12);
    CHECK((s.v.transpose() * s.v - Matrix::Identity(3, 3)).norm() <= 1e-12);
}

TEST_CASE("svd: sweep cap raises NumericalFailure with the iteration count") {
    const Matrix a = oracle::gaussian(6, 6, 3);
    try {
        (void)svd(a, 1);
        FAIL("expected NumericalFailure");
    } catch (const NumericalFailure& e) {
        CHECK(e.iterations() == 1);
    }
}

TEST_CASE("property: svd reconstructs 1000 random matrices up to 50x30") {
    std::mt19937_64 gen(2024);
    int failures = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const Index p = 1 + static_cast<Index>(gen() % 30);
        const Index n = p + static_cast<Index>(gen() % (51 - p));
        const Matrix a = (trial % 3 == 0) ? oracle::with_spectrum(n, p, -8, 2, gen())
                                          : oracle::gaussian(n, p, gen());
        const auto s = svd(a);
        bool ok = true;
        for (Index j = 1; j < p; ++j) ok &= s.sigma(j) <= s.sigma(j - 1);
        ok &= s.sigma(p - 1) >= 0.0;
        ok &= (s.u.transpose() * s.u - Matrix::Identity(p, p)).norm() <= 1e-12;
        ok &= (s.v.transpose() * s.v - Matrix::Identity(p, p)).norm() <= 1e-12;
        const Matrix recon = s.u * s.sigma.asDiagonal() * s.v.transpose();
        ok &= oracle::jacobi_singular_values(a - recon)(0) <= 1e-12 * s.sigma(0);
        if (!ok) ++failures;
    }
    CHECK(failures == 0);
}

TEST_CASE("property: QR contract on random seeded inputs") {
    std::mt19937_64 gen(77);
    for (int trial = 0; trial < 200; ++trial) {
        const Index p = 1 + static_cast<Index>(gen() % 20);
        const Index n = p + static_cast<Index>(gen() % 20);
        const Matrix a = oracle::with_spectrum(n, p, -6, 3, gen());
        check_qr_contract(a, qr_unpivoted(a));
        check_qr_contract(a, qr_col_pivoted(a));
    }
}

TEST_CASE("residual_norm") {
    const Matrix eye = Matrix::Identity(3, 3);
    CHECK(residual_norm(eye, oracle::gaussian(3, 2, 1)) == doctest::Approx(0.0));

    const Matrix c = caution_matrix();
    CHECK(residual_norm(c.leftCols(2), c.rightCols(2)) <= 1e-15);

    Matrix a1(2, 1), a2(2, 1);
    a1 << 1, 0;
    a2 << 0, 1;
    CHECK(residual_norm(a1, a2) == doctest::Approx(1.0));

    CHECK_THROWS_AS(residual_norm(Matrix(Matrix::Identity(3, 2)), Matrix(Matrix::Identity(2, 2))), InputDomainError);
}

TEST_CASE("condition_number") {
    CHECK(condition_number(Matrix(Matrix::Identity(4, 4))) == doctest::Approx(1.0));
    CHECK(std::isinf(condition_number(caution_matrix())));
}

TEST_CASE("property: interlacing and block identities on pivoted QR splits") {
    std::mt19937_64 gen(99);
    for (int trial = 0; trial < 100; ++trial) {
        const Index p = 2 + static_cast<Index>(gen() % 15);
        const Index n = p + static_cast<Index>(gen() % 10);
        const Matrix a = oracle::with_spectrum(n, p, -2, 1, gen());
        const auto f = qr_col_pivoted(a);
        const Vector sigma = svd(a).sigma;
        const double slack = 1e-10 * sigma(0);
        for (Index k = 1; k < p; ++k) {
            const Vector s11 = singular_values(Matrix(f.r.topLeftCorner(k, k)));
            const Vector s22 = singular_values(Matrix(f.r.bottomRightCorner(p - k, p - k)));
            for (Index j = 0; j < k; ++j) CHECK(s11(j) <= sigma(j) + slack);
            for (Index j = 0; j < p - k; ++j) CHECK(s22(j) >= sigma(k + j) - slack);

            const Matrix permuted = f.perm.apply(a);
            const Vector s_chi1 = singular_values(Matrix(permuted.leftCols(k)));
            for (Index j = 0; j < k; ++j) CHECK(std::abs(s_chi1(j) - s11(j)) <= 1e-10 * s11(0));
            const double resid = residual_norm(permuted.leftCols(k), permuted.rightCols(p - k));
            CHECK(std::abs(resid - s22(0)) <= 1e-10 * s22(0));
        }
    }
}
