#include "idcss/adversarial.hpp"

#include <cmath>
#include <numbers>

#include "idcss/errors.hpp"

namespace idcss {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

Matrix haar_orthonormal(Index n, Index p, Rng& rng) {
    if (p < 1 || n < p) throw InputDomainError("haar_orthonormal: need n >= p >= 1");
    Matrix g(n, p);
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < n; ++i) g(i, j) = rng.gaussian();
    // The nonnegative-diagonal convention of qr_unpivoted is the sign correction
    // that makes Q Haar distributed.
    return qr_unpivoted(g).q;
}

Matrix haar_orthonormal(Index n, Index p, std::uint64_t seed) {
    Rng rng(seed);
    return haar_orthonormal(n, p, rng);
}

Matrix orthogonal_complement(const Matrix& basis) {
    const Index p = basis.rows();
    const Index k = basis.cols();
    if (k == p) return Matrix(p, 0);
    Eigen::HouseholderQR<Matrix> qr(basis);
    const Matrix full = qr.householderQ();
    return full.rightCols(p - k);
}

namespace {

void require_zeta(double zeta) {
    if (!(zeta > 0.0 && zeta < 1.0)) throw InputDomainError("zeta must lie in (0, 1)");
}

}  // namespace

Matrix gen_kahan(Index n, double zeta) {
    require_zeta(zeta);
    if (n < 1) throw InputDomainError("gen_kahan: n must be positive");
    const double phi = std::sqrt(1.0 - zeta * zeta);
    Matrix a = Matrix::Zero(n, n);
    double scale = 1.0;
    for (Index i = 0; i < n; ++i) {
        a(i, i) = scale;
        for (Index j = i + 1; j < n; ++j) a(i, j) = -phi * scale;
        scale *= zeta;
    }
    return a;
}

double gu_eisenstat_mu(Index n, double zeta) {
    require_zeta(zeta);
    if (n < 5) throw InputDomainError("gen_gu_eisenstat: n must be at least 5");
    const Index m = n - 3;
    const Matrix dk = gen_kahan(m, zeta);
    const Matrix inv = dk.triangularView<Eigen::Upper>().solve(Matrix::Identity(m, m));
    const double min_inv_row = 1.0 / inv.rowwise().norm().maxCoeff();
    return min_inv_row / std::sqrt(static_cast<double>(n - 2));
}

Matrix gen_gu_eisenstat(Index n, double zeta) {
    const double mu = gu_eisenstat_mu(n, zeta);
    const Index m = n - 3;
    const double phi = std::sqrt(1.0 - zeta * zeta);
    Matrix a = Matrix::Zero(n, n);
    a.topLeftCorner(m, m) = gen_kahan(m, zeta);
    double scale = 1.0;
    for (Index i = 0; i < m; ++i) {
        a(i, n - 1) = -phi * scale;
        scale *= zeta;
    }
    for (Index i = m; i < n; ++i) a(i, i) = mu;
    return a;
}

void SpectrumSpec::validate(Index p) const {
    if (k < 1 || k >= p) throw InputDomainError("spectrum: k must satisfy 1 <= k < p");
    if (!(leading_lo > 0.0 && leading_lo <= leading_hi && trailing_lo > 0.0 && trailing_lo <= trailing_hi))
        throw InputDomainError("spectrum: ranges must be positive with lo <= hi");
}

Vector sample_spectrum(Index p, const SpectrumSpec& spec, Rng& rng) {
    spec.validate(p);
    Vector sigma(p);
    auto fill = [&](Index offset, Index count, double lo, double hi) {
        for (Index i = 0; i < count; ++i) {
            if (spec.spacing == Spacing::UniformRandom) {
                sigma(offset + i) = rng.uniform(lo, hi);
            } else {
                const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
                sigma(offset + i) = std::pow(10.0, std::log10(hi) + t * (std::log10(lo) - std::log10(hi)));
            }
        }
    };
    fill(0, spec.k, spec.leading_lo, spec.leading_hi);
    fill(spec.k, p - spec.k, spec.trailing_lo, spec.trailing_hi);
    return sigma;
}

namespace {

SyntheticMatrix compose(Matrix u, Vector sigma, Matrix v, Index k) {
    SyntheticMatrix out;
    out.s = u * sigma.asDiagonal() * v.transpose();
    out.u = std::move(u);
    out.sigma = std::move(sigma);
    out.v = std::move(v);
    out.k = k;
    return out;
}

void require_shape(Index n, Index p, const SpectrumSpec& spec, const char* what) {
    if (p < 2 || n < p) throw InputDomainError(std::string(what) + ": need n >= p >= 2");
    spec.validate(p);
}

}  // namespace

Matrix correlation_block(Index size, double rho) {
    Matrix block = Matrix::Constant(size, size, rho);
    block.diagonal().setOnes();
    return block;
}

SyntheticMatrix gen_jolliffe(Index n, Index p, Index block_size, double rho_lo, double rho_hi,
                             const SpectrumSpec& spec, std::uint64_t seed) {
    if (block_size < 1 || p % block_size != 0)
        throw InputDomainError("gen_jolliffe: p must be divisible by the block size");
    if (!(rho_lo <= rho_hi) || rho_lo < -1.0 || rho_hi > 1.0) throw InputDomainError("gen_jolliffe: bad rho range");
    require_shape(n, p, spec, "gen_jolliffe");

    Rng rng(seed);
    Vector sigma = sample_spectrum(p, spec, rng);
    Matrix u = haar_orthonormal(n, p, rng);
    Matrix lambda = Matrix::Zero(p, p);
    for (Index b = 0; b < p / block_size; ++b)
        lambda.block(b * block_size, b * block_size, block_size, block_size) =
            correlation_block(block_size, rng.uniform(rho_lo, rho_hi));
    Matrix v = qr_unpivoted(lambda).q;
    return compose(std::move(u), std::move(sigma), std::move(v), spec.k);
}

Matrix sorensen_embree_pattern(Index p, Index k) {
    Matrix l = Matrix::Zero(p, k);
    for (Index j = 0; j < k; ++j) {
        l(j, j) = 1.0;
        for (Index i = j + 1; i < p; ++i) l(i, j) = -1.0;
    }
    return l;
}

SyntheticMatrix gen_sorensen_embree(Index n, Index p, const SpectrumSpec& spec, std::uint64_t seed) {
    require_shape(n, p, spec, "gen_sorensen_embree");
    const Index k = spec.k;
    Rng rng(seed);
    Vector sigma = sample_spectrum(p, spec, rng);
    Matrix u = haar_orthonormal(n, p, rng);
    Matrix v(p, p);
    v.leftCols(k) = qr_unpivoted(sorensen_embree_pattern(p, k)).q;
    v.rightCols(p - k) = orthogonal_complement(v.leftCols(k));
    return compose(std::move(u), std::move(sigma), std::move(v), k);
}

Matrix ships_leading_block(Index k) {
    Matrix t = Matrix::Identity(k, k);
    for (Index i = 0; i < k; ++i)
        for (Index j = i + 1; j < k; ++j) t(i, j) = -1.0;
    return t / (2.0 * spectral_norm(t));
}

SyntheticMatrix gen_ships(Index n, Index p, const SpectrumSpec& spec, std::uint64_t seed) {
    require_shape(n, p, spec, "gen_ships");
    const Index k = spec.k;
    if (p - k < k) throw InputDomainError("gen_ships: need p - k >= k for the Haar block");
    Rng rng(seed);
    Vector sigma = sample_spectrum(p, spec, rng);
    Matrix u = haar_orthonormal(n, p, rng);
    const Matrix v11 = ships_leading_block(k);
    const Matrix haar_block = haar_orthonormal(p - k, k, rng);
    // (I - V11^T V11)^{1/2}; the transpose is what makes V_k orthonormal.
    const Matrix gram = Matrix::Identity(k, k) - v11.transpose() * v11;
    const Matrix root = Eigen::SelfAdjointEigenSolver<Matrix>(gram).operatorSqrt();
    Matrix v(p, p);
    v.topLeftCorner(k, k) = v11;
    v.bottomLeftCorner(p - k, k) = haar_block * root;
    v.rightCols(p - k) = orthogonal_complement(v.leftCols(k));
    return compose(std::move(u), std::move(sigma), std::move(v), k);
}

}  // namespace idcss
