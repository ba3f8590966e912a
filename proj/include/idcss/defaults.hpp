#pragma once

// Numeric defaults shared by the library and the command-line tool.
// Every value here can be overridden per call (library) or per flag (CLI).

#include <cmath>
#include <cstdint>
#include <limits>

namespace idcss::defaults {

// dense-core
inline constexpr double kTolOrth = 1e-12;
inline constexpr double kTolRecon = 1e-12;
// Rank tolerance is rows * machine epsilon, relative to the largest singular value.
inline double tol_rank(long rows) { return static_cast<double>(rows) * std::numeric_limits<double>::epsilon(); }
inline constexpr int kSvdMaxSweeps = 80;

// css
inline constexpr double kSrrqrF = 1.0;
inline constexpr double kSrrqrTieSlack = 1e-12;
// 0 means 4 * k * (p - k).
inline constexpr int kSrrqrMaxSwaps = 0;

// adversarial
inline constexpr double kZetaLo = 0.9;
inline constexpr double kZetaHi = 0.99999;
inline constexpr double kRhoLo = 0.9;
inline constexpr double kRhoHi = 0.99999;
inline constexpr double kLeadingLo = 1e2;
inline constexpr double kLeadingHi = 1e3;
inline constexpr double kTrailingLo = 1e-10;
inline const double kTrailingHi = std::pow(10.0, 1.9);

// ode-sens
inline constexpr double kPopulation = 1e5;
inline constexpr double kInitialInfected = 10.0;
inline constexpr int kObservations = 31;  // t = 0, 1, ..., 30 days
inline constexpr double kFinalDay = 30.0;
inline constexpr int kSubsteps = 100;
inline constexpr double kComplexStep = 1e-20;
inline const double kFdRelativeStep = std::cbrt(std::numeric_limits<double>::epsilon());

// bench
inline constexpr int kRealizations = 100;
inline constexpr std::uint64_t kBaseSeed = 1;

}  // namespace idcss::defaults
