#include "binattn/tensor.hpp"

#include <cmath>

namespace binattn {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols,
                         std::vector<double> data, Dtype storage)
    : rows_(rows), cols_(cols), storage_(storage), data_(std::move(data)) {
    if (storage_ != Dtype::f32 && storage_ != Dtype::f64)
        throw ValidationError("DenseMatrix storage must be f32 or f64");
    if (data_.size() != rows_ * cols_)
        throw ShapeError("DenseMatrix: data length != rows*cols");
    for (double& v : data_) {
        if (!std::isfinite(v))
            throw ValidationError("DenseMatrix: non-finite entry");
        if (storage_ == Dtype::f32) v = static_cast<double>(static_cast<float>(v));
    }
}

DenseMatrix DenseMatrix::zeros(std::size_t rows, std::size_t cols, Dtype storage) {
    return DenseMatrix(rows, cols, std::vector<double>(rows * cols, 0.0), storage);
}

BitMatrix::BitMatrix(std::size_t rows, std::size_t logical_cols,
                     std::vector<std::uint64_t> words)
    : rows_(rows),
      logical_cols_(logical_cols),
      words_per_row_(words_needed(logical_cols)),
      words_(std::move(words)) {
    if (words_.size() != rows_ * words_per_row_)
        throw ShapeError("BitMatrix: word count != rows*words_per_row");
    if (logical_cols_ % 64 != 0 && words_per_row_ > 0) {
        const std::uint64_t mask = tail_mask();
        for (std::size_t r = 0; r < rows_; ++r) {
            if (words_[r * words_per_row_ + words_per_row_ - 1] & ~mask)
                throw ValidationError("BitMatrix: nonzero pad bits");
        }
    }
}

QuantizedValues::QuantizedValues(std::size_t rows, std::size_t cols,
                                 std::vector<std::int8_t> data,
                                 std::vector<double> channel_scales)
    : rows_(rows),
      cols_(cols),
      data_(std::move(data)),
      channel_scales_(std::move(channel_scales)) {
    if (data_.size() != rows_ * cols_)
        throw ShapeError("QuantizedValues: data length != rows*cols");
    if (channel_scales_.size() != cols_)
        throw ShapeError("QuantizedValues: scale count != cols");
    for (std::int8_t v : data_) {
        if (v == -128)
            throw ValidationError("QuantizedValues: -128 is not a valid level");
    }
    for (double s : channel_scales_) {
        if (!(s > 0.0) || !std::isfinite(s))
            throw ValidationError("QuantizedValues: channel scale must be positive finite");
    }
}

} // namespace binattn
