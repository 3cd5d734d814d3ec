#include "binattn/fidelity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace binattn {

namespace {

void check_row_stochastic(const DenseMatrix& p, const char* name) {
    for (std::size_t i = 0; i < p.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < p.cols(); ++j) {
            const double v = p(i, j);
            if (v < -1e-6)
                throw ValidationError(std::string(name) + ": negative attention weight");
            sum += v;
        }
        if (std::fabs(sum - 1.0) > 1e-6)
            throw ValidationError(std::string(name) + ": row does not sum to 1");
    }
}

// Indices of the k largest entries, ties broken toward lower index.
void topk_indices(const double* row, std::size_t n, std::size_t k,
                  std::vector<std::size_t>& idx, std::vector<std::size_t>& out) {
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [row](std::size_t a, std::size_t b) {
                          if (row[a] != row[b]) return row[a] > row[b];
                          return a < b;
                      });
    out.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
}

} // namespace

FidelityReport attention_fidelity(const DenseMatrix& p_ref, const DenseMatrix& p_other,
                                  std::size_t k) {
    if (p_ref.rows() != p_other.rows() || p_ref.cols() != p_other.cols())
        throw ShapeError("attention_fidelity: shape mismatch");
    if (k == 0) throw ValidationError("attention_fidelity: k must be >= 1");
    check_row_stochastic(p_ref, "P_ref");
    check_row_stochastic(p_other, "P_other");

    const std::size_t n = p_ref.rows();
    const std::size_t cols = p_ref.cols();
    const std::size_t count = n * cols;

    double dot = 0.0, na = 0.0, nb = 0.0, l1_diff = 0.0, l1_ref = 0.0, sq = 0.0;
    for (std::size_t t = 0; t < count; ++t) {
        const double a = p_ref.data()[t];
        const double b = p_other.data()[t];
        dot += a * b;
        na += a * a;
        nb += b * b;
        l1_diff += std::fabs(a - b);
        l1_ref += std::fabs(a);
        sq += (a - b) * (a - b);
    }

    FidelityReport rep;
    rep.k = k;
    rep.cos_sim = dot / (std::sqrt(na) * std::sqrt(nb));
    rep.relative_l1 = l1_diff / l1_ref;
    rep.rmse = std::sqrt(sq / static_cast<double>(count));

    const std::size_t keff = std::min(k, cols);
    std::vector<std::size_t> scratch, top_a, top_b;
    std::vector<char> in_a(cols);
    double prec_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        topk_indices(p_ref.data().data() + i * cols, cols, keff, scratch, top_a);
        topk_indices(p_other.data().data() + i * cols, cols, keff, scratch, top_b);
        std::fill(in_a.begin(), in_a.end(), 0);
        for (std::size_t t : top_a) in_a[t] = 1;
        std::size_t hits = 0;
        for (std::size_t t : top_b) hits += in_a[t];
        prec_sum += static_cast<double>(hits) / static_cast<double>(keff);
    }
    rep.precision_at_k = prec_sum / static_cast<double>(n);
    return rep;
}

OpsReport count_ops(const AttentionConfig& cfg, bool include_preprocessing) {
    const std::uint64_t n = cfg.seq_len;
    const std::uint64_t d = cfg.head_dim;
    const bool has_bias = !std::holds_alternative<std::monostate>(cfg.bias);

    OpsReport rep;
    rep.include_preprocessing = include_preprocessing;

    // Q.K^T as XNOR/popcount multiply-accumulates.
    rep.bops = 2 * n * n * d;

    // Score scaling (mu product, 1/tau) and optional bias add.
    rep.flops = (2 + (has_bias ? 1u : 0u)) * n * n;
    // Softmax core: one exp and one running-sum add per score.
    rep.flops += 2 * n * n;
    // Final denominator divide per output entry.
    rep.flops += n * d;

    if (cfg.quantize_pv) {
        rep.int8_ops = 2 * n * n * d;
    } else {
        rep.flops += 2 * n * n * d;
    }

    // Itemized pre/post-processing: Q and K binary quantization (abs + sum
    // per entry, one divide), value quantization (abs + max compare per
    // entry, one divide per channel, divide + round per entry), coefficient
    // rounding (scale + round per score), output dequantization.
    rep.pre_flops = 2 * (2 * n * d + 1);
    if (cfg.quantize_pv) {
        rep.pre_flops += 4 * n * d + d;
        rep.pre_flops += 2 * n * n;
        rep.pre_flops += 2 * n * d;
    }
    return rep;
}

} // namespace binattn
