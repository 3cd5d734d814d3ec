#include "binattn/quantize.hpp"

#include <cmath>

#include "binattn/ops_count.hpp"

namespace binattn {

QuantizedCoeffs::QuantizedCoeffs(std::size_t rows, std::size_t cols,
                                 std::vector<std::uint8_t> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw ShapeError("QuantizedCoeffs: data length != rows*cols");
}

ScaledBinary binary_quantize(const DenseMatrix& m) {
    if (m.size() == 0) throw ShapeError("binary_quantize: empty matrix");
    double sum_abs = 0.0;
    for (double v : m.data()) sum_abs += std::fabs(v);
    const double mu = sum_abs / static_cast<double>(m.size());
    count_pre_flops(2 * static_cast<std::uint64_t>(m.size()) + 1);
    return ScaledBinary{pack_signs(m), mu};
}

DenseMatrix dequantize_binary(const ScaledBinary& sb) {
    const std::size_t rows = sb.bits.rows();
    const std::size_t cols = sb.bits.logical_cols();
    std::vector<double> data(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t c = 0; c < cols; ++c)
            data[i * cols + c] = sb.scale * sb.bits.sign(i, c);
    return DenseMatrix(rows, cols, std::move(data));
}

QuantizedCoeffs quantize_coeffs(const DenseMatrix& p) {
    constexpr double kTol = 1e-9;
    std::vector<std::uint8_t> q(p.size());
    const std::span<const double> in = p.data();
    for (std::size_t k = 0; k < in.size(); ++k) {
        const double v = in[k];
        if (v < -kTol || v > 1.0 + kTol)
            throw RangeError("quantize_coeffs: entry outside [0,1]");
        const double clamped = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        q[k] = static_cast<std::uint8_t>(round_half_away(clamped * 255.0));
    }
    count_pre_flops(2 * static_cast<std::uint64_t>(p.size()));
    return QuantizedCoeffs(p.rows(), p.cols(), std::move(q));
}

DenseMatrix dequantize_coeffs(const QuantizedCoeffs& q) {
    std::vector<double> data(q.rows() * q.cols());
    for (std::size_t k = 0; k < data.size(); ++k)
        data[k] = static_cast<double>(q.data()[k]) * QuantizedCoeffs::kScale;
    return DenseMatrix(q.rows(), q.cols(), std::move(data));
}

QuantizedValues quantize_values(const DenseMatrix& v) {
    const std::size_t rows = v.rows();
    const std::size_t cols = v.cols();
    std::vector<double> scales(cols, 1.0);
    for (std::size_t c = 0; c < cols; ++c) {
        double amax = 0.0;
        for (std::size_t i = 0; i < rows; ++i)
            amax = std::max(amax, std::fabs(v(i, c)));
        if (amax > 0.0) scales[c] = amax / 127.0;
    }
    std::vector<std::int8_t> data(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t c = 0; c < cols; ++c)
            data[i * cols + c] =
                static_cast<std::int8_t>(round_half_away(v(i, c) / scales[c]));
    count_pre_flops(4 * static_cast<std::uint64_t>(rows) * cols + cols);
    return QuantizedValues(rows, cols, std::move(data), std::move(scales));
}

DenseMatrix dequantize_values(const QuantizedValues& q) {
    const std::size_t rows = q.rows();
    const std::size_t cols = q.cols();
    std::vector<double> data(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t c = 0; c < cols; ++c)
            data[i * cols + c] = q.scale(c) * static_cast<double>(q(i, c));
    return DenseMatrix(rows, cols, std::move(data));
}

} // namespace binattn
