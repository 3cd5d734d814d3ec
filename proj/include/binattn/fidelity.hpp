#pragma once

#include <cstdint>

#include "binattn/attention.hpp"
#include "binattn/tensor.hpp"

namespace binattn {

// Attention-pattern agreement between two row-stochastic matrices.
struct FidelityReport {
    double cos_sim = 0.0;        // flattened-vector cosine, in [-1, 1]
    double relative_l1 = 0.0;    // ||ref - other||_1 / ||ref||_1
    double rmse = 0.0;           // sqrt(mean squared difference)
    double precision_at_k = 0.0; // mean per-row top-k overlap / k'
    std::size_t k = 0;           // requested k (k' = min(k, N) applied per row)
};

// Operation counts for one attention call, following the fused kernel.
// Binary and int8 multiply-accumulates each count as 2 ops in their own
// category; the total folds binary ops at 1/64 and int8 ops at 1/2.
// Quantization pre/post-processing is itemized separately and excluded
// from the headline total unless requested.
struct OpsReport {
    std::uint64_t bops = 0;
    std::uint64_t int8_ops = 0;
    std::uint64_t flops = 0;
    std::uint64_t pre_flops = 0;
    bool include_preprocessing = false;

    double total_ops() const {
        double t = static_cast<double>(bops) / 64.0 +
                   static_cast<double>(int8_ops) / 2.0 + static_cast<double>(flops);
        if (include_preprocessing) t += static_cast<double>(pre_flops);
        return t;
    }
};

// Compares two attention matrices whose rows are probability vectors
// (validated to 1e-6). Top-k ties break toward the lower column index.
FidelityReport attention_fidelity(const DenseMatrix& p_ref, const DenseMatrix& p_other,
                                  std::size_t k);

// Analytic operation counts for one fused binary-attention call with this
// config. Matches the instrumented kernel counters exactly for every
// (N, d, B_r, B_v).
OpsReport count_ops(const AttentionConfig& cfg, bool include_preprocessing = false);

} // namespace binattn
