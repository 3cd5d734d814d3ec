#pragma once

#include <filesystem>
#include <string>

#include "binattn/tensor.hpp"

namespace binattn {

// Shortest round-trippable decimal form; identical across runs.
std::string format_double(double v);

// Comma-separated rows, one line per matrix row, %.17g entries.
void write_matrix_csv(const std::filesystem::path& path, const DenseMatrix& m);

// Binary 8-bit portable graymap (P5), each row scaled by its own maximum so
// the most attended column is white. Byte-for-byte reproducible.
void write_pgm_rowmax(const std::filesystem::path& path, const DenseMatrix& m);

} // namespace binattn
