#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "binattn/bitops.hpp"
#include "binattn/tensor.hpp"

namespace binattn {

// Scaled 1-bit representation: dequantized entry = scale * sign, with a
// single nonnegative scale per matrix chosen to minimize L2 reconstruction
// error (mean of absolute values).
struct ScaledBinary {
    BitMatrix bits;
    double scale = 0.0;
};

// Unsigned 8-bit attention coefficients with the static scale 1/255.
class QuantizedCoeffs {
public:
    static constexpr double kScale = 1.0 / 255.0;

    QuantizedCoeffs(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::span<const std::uint8_t> data() const { return data_; }
    std::uint8_t operator()(std::size_t i, std::size_t j) const {
        return data_[i * cols_ + j];
    }

    bool operator==(const QuantizedCoeffs& other) const = default;

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<std::uint8_t> data_;
};

// Rounding used by every quantizer in the pipeline: half away from zero.
inline double round_half_away(double x) { return std::round(x); }

// 1-bit quantization with the L2-optimal scalar scale (mean of |entries|).
ScaledBinary binary_quantize(const DenseMatrix& m);

// Reconstructs scale * sign pattern.
DenseMatrix dequantize_binary(const ScaledBinary& sb);

// Coefficients in [0,1] (tolerance 1e-9, clamped) -> round(P*255).
QuantizedCoeffs quantize_coeffs(const DenseMatrix& p);

DenseMatrix dequantize_coeffs(const QuantizedCoeffs& q);

// Channel-wise symmetric int8: scale[c] = max_i |V[i,c]| / 127 (1 for an
// all-zero column), entries round(V/scale) in [-127, 127].
QuantizedValues quantize_values(const DenseMatrix& v);

DenseMatrix dequantize_values(const QuantizedValues& q);

} // namespace binattn
