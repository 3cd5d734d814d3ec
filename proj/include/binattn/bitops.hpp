#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "binattn/tensor.hpp"

namespace binattn {

// Row-major int32 matrix; holds binary/int8 GEMM results.
struct Int32Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::int32_t> data;

    std::int32_t operator()(std::size_t i, std::size_t j) const {
        return data[i * cols + j];
    }
    bool operator==(const Int32Matrix& other) const = default;
};

// Packs signs of M: bit (i,c) = 1 iff M[i,c] >= 0. Pad bits are zero.
BitMatrix pack_signs(const DenseMatrix& m);

// Inverse of pack_signs up to sign: +1/-1 entries as a DenseMatrix.
DenseMatrix unpack_signs(const BitMatrix& b);

// Dot product of two +-1 rows of width d, computed as
// 2*popcount(XNOR masked to d bits) - d. Spans must hold ceil(d/64) words
// in canonical (zero-padded) form.
std::int64_t xnor_popcount_dot(std::span<const std::uint64_t> a,
                               std::span<const std::uint64_t> b, std::size_t d);
std::int64_t xnor_popcount_dot(const BitMatrix& a, std::size_t i,
                               const BitMatrix& b, std::size_t j);

// Number of differing signs: popcount(XOR masked to d bits).
// Satisfies dot = d - 2*hamming.
std::uint64_t hamming_distance(std::span<const std::uint64_t> a,
                               std::span<const std::uint64_t> b, std::size_t d);
std::uint64_t hamming_distance(const BitMatrix& a, std::size_t i,
                               const BitMatrix& b, std::size_t j);

// All-pairs +-1 dot products: entry (i,j) = xnor_popcount_dot(S row i, T row j).
// May parallelize over output rows; deterministic for any thread count.
Int32Matrix binary_gemm(const BitMatrix& s, const BitMatrix& t);

} // namespace binattn
