#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "binattn/quantize.hpp"
#include "binattn/tensor.hpp"

namespace binattn {

// Additive pre-softmax bias. Declarative so position-based variants stay
// O(sqrt(N)) in storage; materialization always yields a dense N x N table.
struct DenseBias {
    DenseMatrix table; // N x N
};
struct Relative1dBias {
    std::vector<double> offsets; // length 2N-1, b_ij = offsets[i - j + N - 1]
};
struct Relative2dBias {
    // Tokens on a g x g grid, g = sqrt(N), row-major.
    // b_ij = row_offsets[dr + g - 1] + col_offsets[dc + g - 1].
    std::vector<double> row_offsets; // length 2g-1
    std::vector<double> col_offsets; // length 2g-1
};
using BiasSpec = std::variant<std::monostate, DenseBias, Relative1dBias, Relative2dBias>;

struct AttentionConfig {
    std::size_t seq_len = 0;  // N
    std::size_t head_dim = 0; // d
    double temperature = 1.0; // tau; defaults to sqrt(d)
    std::size_t block_rows = 64; // B_r (query block)
    std::size_t block_cols = 64; // B_v (key/value block)
    bool quantize_pv = true;
    BiasSpec bias;
    std::uint64_t seed = 0;

    // Canonical config: tau = sqrt(d), blocks clipped to the sequence length.
    static AttentionConfig make(std::size_t n, std::size_t d);
};

struct AttentionOutput {
    DenseMatrix output;           // Y, N x d
    std::vector<double> row_max;  // m
    std::vector<double> row_sum;  // l (softmax denominators)
    std::optional<DenseMatrix> probs; // P, pre-quantization, when requested
};

// Expands a bias spec into its dense N x N table (zeros for monostate).
DenseMatrix materialize_bias(const BiasSpec& spec, std::size_t n);

// Full-precision softmax attention in real64 with max-subtraction.
AttentionOutput reference_attention(const DenseMatrix& q, const DenseMatrix& k,
                                    const DenseMatrix& v, const AttentionConfig& cfg,
                                    bool with_probs = false);

// Binary-score attention, materialized in one pass:
// S = mu_q * mu_k * (s . t) / tau + bias, P = row softmax,
// then either P*V in real64 or the u8 x s8 integer aggregation.
AttentionOutput binary_attention_unfused(const DenseMatrix& q, const DenseMatrix& k,
                                         const DenseMatrix& v, const AttentionConfig& cfg,
                                         bool with_probs = false);

// Tiled streaming variant: blocks of B_r query rows against B_v key/value
// columns with a running row max, running denominator and rescaled
// accumulator. With quantize_pv, each block's unnormalized exp(S - m) is
// rounded to u8 and multiplied against int8 values in integer arithmetic.
AttentionOutput binary_attention_fused(const DenseMatrix& q, const DenseMatrix& k,
                                       const DenseMatrix& v, const AttentionConfig& cfg,
                                       bool with_probs = false);

} // namespace binattn
