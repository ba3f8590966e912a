#pragma once

// The `idcss` command-line tool, callable in-process.
//
//   analyze     CSS on a matrix file, metrics and bound checks as JSON
//   generate    adversarial or synthetic matrix plus a JSON sidecar
//   bench       multi-realization experiment from a JSON spec
//   svir        SVIR sensitivity matrix plus a JSON sidecar
//   verify-dyn  check the prescribed-sensitivity linear system for an SVD
//   gram-demo   rank through fl(chi^T chi) versus rank through CSS
//
// Every long flag --some-flag can also be set through IDCSS_SOME_FLAG; the
// command line wins when both are present.

#include <iosfwd>
#include <string>
#include <vector>

namespace idcss::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace idcss::cli
