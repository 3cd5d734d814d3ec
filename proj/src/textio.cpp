#include "binattn/textio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace binattn {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_matrix_csv(const std::filesystem::path& path, const DenseMatrix& m) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) os << ',';
            os << format_double(m(i, j));
        }
        os << '\n';
    }
    os.flush();
    if (!os) throw IoError("write failed: " + path.string());
}

void write_pgm_rowmax(const std::filesystem::path& path, const DenseMatrix& m) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << "P5\n" << m.cols() << ' ' << m.rows() << "\n255\n";
    std::vector<unsigned char> row(m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double rmax = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) rmax = std::max(rmax, m(i, j));
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const double norm = rmax > 0.0 ? m(i, j) / rmax : 0.0;
            const double clamped = std::clamp(norm, 0.0, 1.0);
            row[j] = static_cast<unsigned char>(std::lround(255.0 * clamped));
        }
        os.write(reinterpret_cast<const char*>(row.data()),
                 static_cast<std::streamsize>(row.size()));
    }
    os.flush();
    if (!os) throw IoError("write failed: " + path.string());
}

} // namespace binattn
