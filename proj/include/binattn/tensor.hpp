#pragma once

#include <cstdint>
#include <cstddef>
#include <span>
#include <vector>

#include "binattn/errors.hpp"

namespace binattn {

// On-disk / logical element types. Values match the tensor file dtype codes.
enum class Dtype : std::uint8_t {
    f32 = 0,
    f64 = 1,
    i8 = 2,
    u8 = 3,
    packed_bit = 4,
};

// Row-major real matrix. Storage precision is tagged (f32 entries are
// snapped to float on construction so serialization round-trips exactly);
// arithmetic throughout the library runs in double regardless of the tag.
// Immutable after construction.
class DenseMatrix {
public:
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                Dtype storage = Dtype::f64);

    static DenseMatrix zeros(std::size_t rows, std::size_t cols,
                             Dtype storage = Dtype::f64);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    Dtype storage() const { return storage_; }

    double operator()(std::size_t i, std::size_t j) const {
        return data_[i * cols_ + j];
    }
    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }
    std::span<const double> data() const { return data_; }

    bool operator==(const DenseMatrix& other) const = default;

private:
    std::size_t rows_;
    std::size_t cols_;
    Dtype storage_;
    std::vector<double> data_;
};

// Sign-packed matrix: 64 signs per word, bit 1 <-> +1, bit 0 <-> -1.
// Each row is padded to a word boundary; pad bits are zero (canonical form).
class BitMatrix {
public:
    BitMatrix(std::size_t rows, std::size_t logical_cols,
              std::vector<std::uint64_t> words);

    std::size_t rows() const { return rows_; }
    std::size_t logical_cols() const { return logical_cols_; }
    std::size_t words_per_row() const { return words_per_row_; }

    std::span<const std::uint64_t> row(std::size_t i) const {
        return {words_.data() + i * words_per_row_, words_per_row_};
    }
    std::span<const std::uint64_t> words() const { return words_; }

    // Sign at (i, c) as +1/-1.
    int sign(std::size_t i, std::size_t c) const {
        const std::uint64_t w = words_[i * words_per_row_ + c / 64];
        return (w >> (c % 64)) & 1u ? 1 : -1;
    }

    // Mask selecting the valid bits of the final word of a row.
    std::uint64_t tail_mask() const {
        const std::size_t rem = logical_cols_ % 64;
        return rem == 0 ? ~std::uint64_t{0} : ((std::uint64_t{1} << rem) - 1);
    }

    bool operator==(const BitMatrix& other) const = default;

    static std::size_t words_needed(std::size_t logical_cols) {
        return (logical_cols + 63) / 64;
    }

private:
    std::size_t rows_;
    std::size_t logical_cols_;
    std::size_t words_per_row_;
    std::vector<std::uint64_t> words_;
};

// Channel-wise symmetric int8 matrix: data[i,c] in [-127, 127] with a strictly
// positive per-column scale. Dequantized entry = channel_scales[c] * data[i,c].
class QuantizedValues {
public:
    QuantizedValues(std::size_t rows, std::size_t cols,
                    std::vector<std::int8_t> data,
                    std::vector<double> channel_scales);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::span<const std::int8_t> data() const { return data_; }
    std::span<const double> channel_scales() const { return channel_scales_; }

    std::int8_t operator()(std::size_t i, std::size_t c) const {
        return data_[i * cols_ + c];
    }
    double scale(std::size_t c) const { return channel_scales_[c]; }

    bool operator==(const QuantizedValues& other) const = default;

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<std::int8_t> data_;
    std::vector<double> channel_scales_;
};

} // namespace binattn
