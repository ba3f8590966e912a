#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "idcss/dense.hpp"

namespace idcss {

enum class MatrixFormat { Csv, MatrixMarket };

// Values are written with 17 significant digits, which round-trips binary64 exactly.
void write_csv(std::ostream& out, const Matrix& a);
Matrix read_csv(std::istream& in);

// `%%MatrixMarket matrix array real general`, column-major value order.
void write_matrix_market(std::ostream& out, const Matrix& a);
Matrix read_matrix_market(std::istream& in);

/// Format from the file extension: .mtx/.mm -> MatrixMarket, anything else -> CSV.
MatrixFormat format_for_path(const std::filesystem::path& path);
MatrixFormat parse_format(const std::string& name);

void save_matrix(const std::filesystem::path& path, const Matrix& a, MatrixFormat format);
void save_matrix(const std::filesystem::path& path, const Matrix& a);
Matrix load_matrix(const std::filesystem::path& path);

std::string format_double(double value);

}  // namespace idcss
