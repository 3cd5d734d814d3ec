#pragma once

#include <filesystem>
#include <variant>

#include "binattn/quantize.hpp"
#include "binattn/tensor.hpp"

namespace binattn {

// Bit-exact tensor interchange format.
//
// Layout (all integers little-endian):
//   magic   "BATF"                      4 bytes
//   version u32                         currently 1
//   dtype   u8                          0=f32 1=f64 2=int8 3=uint8 4=packed-bit
//   ndim    u8                          always 2
//   dims    ndim x u64
//   payload row-major:
//     f32 / f64    rows*cols IEEE-754 values
//     int8         rows*cols int8, then cols f64 channel scales
//     uint8        rows*cols uint8
//     packed-bit   rows x ceil(cols/64) u64 words, pad bits zero
inline constexpr std::uint32_t kTensorFileVersion = 1;

using TensorVariant =
    std::variant<DenseMatrix, BitMatrix, QuantizedValues, QuantizedCoeffs>;

void write_tensor(const std::filesystem::path& path, const DenseMatrix& m);
void write_tensor(const std::filesystem::path& path, const BitMatrix& m);
void write_tensor(const std::filesystem::path& path, const QuantizedValues& m);
void write_tensor(const std::filesystem::path& path, const QuantizedCoeffs& m);

TensorVariant read_tensor(const std::filesystem::path& path);

} // namespace binattn
