#pragma once

// Seeded generators for adversarial test matrices.
//
// Random streams: one std::mt19937_64 per generator call, seeded with the
// caller's seed. Uniform draws use the top 53 bits of one engine output;
// Gaussian draws use Box-Muller on two uniforms. Within a generator the draw
// order is fixed: spectrum first, then U, then the remaining random pieces
// (block correlations for Jolliffe, the Haar block for SHIPS).

#include <cstdint>
#include <random>
#include <string>

#include "idcss/defaults.hpp"
#include "idcss/dense.hpp"

namespace idcss {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform();  // [0, 1)
    double uniform(double lo, double hi);
    double gaussian();

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// n x p matrix with Haar-distributed orthonormal columns.
Matrix haar_orthonormal(Index n, Index p, Rng& rng);
Matrix haar_orthonormal(Index n, Index p, std::uint64_t seed);

/// Orthonormal basis of the complement of range(basis); basis has orthonormal columns.
Matrix orthogonal_complement(const Matrix& basis);

/// D_n K_n; designated k = n - 1.
Matrix gen_kahan(Index n, double zeta);

/// min_i ||e_i^T (D K)^{-1}||^{-1} / sqrt(n - 2) for the leading (n-3) Kahan block.
double gu_eisenstat_mu(Index n, double zeta);
/// Gu-Eisenstat example matrix; designated k = n - 2.
Matrix gen_gu_eisenstat(Index n, double zeta);

enum class Spacing { UniformRandom, Logarithmic };

struct SpectrumSpec {
    Index k = 0;
    double leading_lo = defaults::kLeadingLo;
    double leading_hi = defaults::kLeadingHi;
    double trailing_lo = defaults::kTrailingLo;
    double trailing_hi = defaults::kTrailingHi;
    Spacing spacing = Spacing::UniformRandom;

    void validate(Index p) const;
};

/// Diagonal of Sigma: k leading entries then p - k trailing ones. Logarithmic
/// spacing is deterministic and descending within each group.
Vector sample_spectrum(Index p, const SpectrumSpec& spec, Rng& rng);

/// S = U diag(sigma) V^T together with its factors.
struct SyntheticMatrix {
    Matrix s;
    Matrix u;
    Vector sigma;
    Matrix v;
    Index k = 0;
};

/// Equicorrelation block (1 - rho) I + rho 1 1^T.
Matrix correlation_block(Index size, double rho);

SyntheticMatrix gen_jolliffe(Index n, Index p, Index block_size, double rho_lo, double rho_hi,
                             const SpectrumSpec& spec, std::uint64_t seed);

/// p x k pattern: 1 on the diagonal, -1 strictly below it.
Matrix sorensen_embree_pattern(Index p, Index k);
SyntheticMatrix gen_sorensen_embree(Index n, Index p, const SpectrumSpec& spec, std::uint64_t seed);

/// V11 = T / (2 ||T||_2), T unit upper triangular with -1 above the diagonal.
Matrix ships_leading_block(Index k);
SyntheticMatrix gen_ships(Index n, Index p, const SpectrumSpec& spec, std::uint64_t seed);

}  // namespace idcss
