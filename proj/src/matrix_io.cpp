#include "idcss/matrix_io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace idcss {

namespace {

double parse_number(const std::string& token, std::size_t line) {
    const char* begin = token.c_str();
    char* end = nullptr;
    const double value = std::strtod(begin, &end);
    while (end && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
    if (end == begin || (end && *end != '\0'))
        throw InputDomainError("line " + std::to_string(line) + ": not a number: '" + token + "'");
    // ERANGE is ignored: it also fires on subnormals, and overflow shows up as inf.
    if (!std::isfinite(value)) throw InputDomainError("line " + std::to_string(line) + ": non-finite value");
    return value;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

void write_csv(std::ostream& out, const Matrix& a) {
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index j = 0; j < a.cols(); ++j) {
            if (j) out << ',';
            out << format_double(a(i, j));
        }
        out << '\n';
    }
}

Matrix read_csv(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream fields(line);
        std::string token;
        while (std::getline(fields, token, ',')) row.push_back(parse_number(trim(token), line_no));
        if (!rows.empty() && row.size() != rows.front().size())
            throw InputDomainError("line " + std::to_string(line_no) + ": ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty() || rows.front().empty()) throw InputDomainError("csv: no data");
    Matrix a(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j) a(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return a;
}

void write_matrix_market(std::ostream& out, const Matrix& a) {
    out << "%%MatrixMarket matrix array real general\n";
    out << a.rows() << ' ' << a.cols() << '\n';
    for (Index j = 0; j < a.cols(); ++j)
        for (Index i = 0; i < a.rows(); ++i) out << format_double(a(i, j)) << '\n';
}

Matrix read_matrix_market(std::istream& in) {
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw InputDomainError("matrix market: empty file");
    std::stringstream banner(line);
    std::string tag, object, format, field, symmetry;
    banner >> tag >> object >> format >> field >> symmetry;
    if (tag != "%%MatrixMarket" || object != "matrix" || format != "array" || field != "real" || symmetry != "general")
        throw InputDomainError("matrix market: only 'matrix array real general' is supported");

    long rows = -1, cols = -1;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '%') continue;
        std::stringstream dims(line);
        if (!(dims >> rows >> cols) || rows < 1 || cols < 1) throw InputDomainError("matrix market: bad size line");
        break;
    }
    if (rows < 1) throw InputDomainError("matrix market: missing size line");

    Matrix a(rows, cols);
    Index count = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '%') continue;
        if (count == a.size()) throw InputDomainError("matrix market: too many values");
        a(count % rows, count / rows) = parse_number(line, line_no);
        ++count;
    }
    if (count != a.size()) throw InputDomainError("matrix market: expected " + std::to_string(a.size()) + " values");
    return a;
}

MatrixFormat format_for_path(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    return (ext == ".mtx" || ext == ".mm") ? MatrixFormat::MatrixMarket : MatrixFormat::Csv;
}

MatrixFormat parse_format(const std::string& name) {
    if (name == "csv") return MatrixFormat::Csv;
    if (name == "matrixmarket" || name == "mm" || name == "mtx") return MatrixFormat::MatrixMarket;
    throw InputDomainError("unknown matrix format '" + name + "'");
}

void save_matrix(const std::filesystem::path& path, const Matrix& a, MatrixFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputDomainError("cannot open '" + path.string() + "' for writing");
    if (format == MatrixFormat::Csv)
        write_csv(out, a);
    else
        write_matrix_market(out, a);
    if (!out) throw InputDomainError("write failed: '" + path.string() + "'");
}

void save_matrix(const std::filesystem::path& path, const Matrix& a) { save_matrix(path, a, format_for_path(path)); }

Matrix load_matrix(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputDomainError("cannot open '" + path.string() + "'");
    // Sniff the banner rather than trusting the extension.
    const int first = in.peek();
    if (first == '%') return read_matrix_market(in);
    return read_csv(in);
}

}  // namespace idcss
