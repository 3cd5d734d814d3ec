#include "binattn/attention.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "binattn/bitops.hpp"
#include "binattn/ops_count.hpp"
#include "binattn/parallel.hpp"

namespace binattn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_shapes(const DenseMatrix& q, const DenseMatrix& k, const DenseMatrix& v,
                  const AttentionConfig& cfg) {
    const std::size_t n = cfg.seq_len;
    const std::size_t d = cfg.head_dim;
    if (q.rows() != n || q.cols() != d) throw ShapeError("attention: Q must be N x d");
    if (k.rows() != n || k.cols() != d) throw ShapeError("attention: K must be N x d");
    if (v.rows() != n || v.cols() != d) throw ShapeError("attention: V must be N x d");
    if (!(cfg.temperature > 0.0))
        throw ValidationError("attention: temperature must be positive");
    if (cfg.block_rows < 1 || cfg.block_rows > n || cfg.block_cols < 1 ||
        cfg.block_cols > n)
        throw ValidationError("attention: block sizes must be in [1, N]");
}

// One pre-softmax score. Both binary paths evaluate scores through this
// exact expression so the single-block fused result is bit-identical to
// the unfused one.
inline double binary_score(std::int64_t dot, double mu_prod, double tau, double bias) {
    return mu_prod * static_cast<double>(dot) / tau + bias;
}

std::optional<DenseMatrix> maybe_bias(const BiasSpec& spec, std::size_t n) {
    if (std::holds_alternative<std::monostate>(spec)) return std::nullopt;
    return materialize_bias(spec, n);
}

} // namespace

AttentionConfig AttentionConfig::make(std::size_t n, std::size_t d) {
    AttentionConfig cfg;
    cfg.seq_len = n;
    cfg.head_dim = d;
    cfg.temperature = std::sqrt(static_cast<double>(d));
    cfg.block_rows = std::min<std::size_t>(64, n);
    cfg.block_cols = std::min<std::size_t>(64, n);
    return cfg;
}

DenseMatrix materialize_bias(const BiasSpec& spec, std::size_t n) {
    if (std::holds_alternative<std::monostate>(spec))
        return DenseMatrix::zeros(n, n);

    if (const auto* dense = std::get_if<DenseBias>(&spec)) {
        if (dense->table.rows() != n || dense->table.cols() != n)
            throw ShapeError("bias: dense table must be N x N");
        return dense->table;
    }

    if (const auto* rel = std::get_if<Relative1dBias>(&spec)) {
        if (rel->offsets.size() != 2 * n - 1)
            throw ShapeError("bias: relative-1d offsets must have length 2N-1");
        std::vector<double> data(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                data[i * n + j] =
                    rel->offsets[static_cast<std::size_t>(
                        static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(j) +
                        static_cast<std::ptrdiff_t>(n) - 1)];
        return DenseMatrix(n, n, std::move(data));
    }

    const auto& rel2 = std::get<Relative2dBias>(spec);
    std::size_t g = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n))));
    if (g * g != n)
        throw ShapeError("bias: relative-2d requires N to be a perfect square");
    if (rel2.row_offsets.size() != 2 * g - 1 || rel2.col_offsets.size() != 2 * g - 1)
        throw ShapeError("bias: relative-2d tables must have length 2*sqrt(N)-1");
    std::vector<double> data(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::ptrdiff_t ri = static_cast<std::ptrdiff_t>(i / g);
        const std::ptrdiff_t ci = static_cast<std::ptrdiff_t>(i % g);
        for (std::size_t j = 0; j < n; ++j) {
            const std::ptrdiff_t rj = static_cast<std::ptrdiff_t>(j / g);
            const std::ptrdiff_t cj = static_cast<std::ptrdiff_t>(j % g);
            data[i * n + j] =
                rel2.row_offsets[static_cast<std::size_t>(ri - rj + static_cast<std::ptrdiff_t>(g) - 1)] +
                rel2.col_offsets[static_cast<std::size_t>(ci - cj + static_cast<std::ptrdiff_t>(g) - 1)];
        }
    }
    return DenseMatrix(n, n, std::move(data));
}

AttentionOutput reference_attention(const DenseMatrix& q, const DenseMatrix& k,
                                    const DenseMatrix& v, const AttentionConfig& cfg,
                                    bool with_probs) {
    check_shapes(q, k, v, cfg);
    const std::size_t n = cfg.seq_len;
    const std::size_t d = cfg.head_dim;
    const double tau = cfg.temperature;
    const std::optional<DenseMatrix> bias = maybe_bias(cfg.bias, n);

    std::vector<double> ydata(n * d, 0.0);
    std::vector<double> m(n), l(n);
    std::vector<double> pdata(with_probs ? n * n : 0);

    parallel_for(n, 4, [&](std::size_t b, std::size_t e) {
        std::vector<double> srow(n);
        for (std::size_t i = b; i < e; ++i) {
            const std::span<const double> qi = q.row(i);
            for (std::size_t j = 0; j < n; ++j) {
                const std::span<const double> kj = k.row(j);
                double dot = 0.0;
                for (std::size_t c = 0; c < d; ++c) dot += qi[c] * kj[c];
                srow[j] = dot / tau + (bias ? (*bias)(i, j) : 0.0);
            }
            double mi = kNegInf;
            for (std::size_t j = 0; j < n; ++j) mi = std::max(mi, srow[j]);
            double li = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                srow[j] = std::exp(srow[j] - mi);
                li += srow[j];
            }
            for (std::size_t j = 0; j < n; ++j) srow[j] /= li;
            double* yrow = ydata.data() + i * d;
            for (std::size_t j = 0; j < n; ++j) {
                const double p = srow[j];
                const std::span<const double> vj = v.row(j);
                for (std::size_t c = 0; c < d; ++c) yrow[c] += p * vj[c];
            }
            m[i] = mi;
            l[i] = li;
            if (with_probs)
                std::memcpy(pdata.data() + i * n, srow.data(), n * sizeof(double));
        }
    });

    AttentionOutput out{DenseMatrix(n, d, std::move(ydata)), std::move(m),
                        std::move(l), std::nullopt};
    if (with_probs) out.probs = DenseMatrix(n, n, std::move(pdata));
    return out;
}

AttentionOutput binary_attention_unfused(const DenseMatrix& q, const DenseMatrix& k,
                                         const DenseMatrix& v, const AttentionConfig& cfg,
                                         bool with_probs) {
    check_shapes(q, k, v, cfg);
    const std::size_t n = cfg.seq_len;
    const std::size_t d = cfg.head_dim;
    const double tau = cfg.temperature;

    const ScaledBinary sq = binary_quantize(q);
    const ScaledBinary sk = binary_quantize(k);
    const double mu_prod = sq.scale * sk.scale;
    const Int32Matrix g = binary_gemm(sq.bits, sk.bits);
    const std::optional<DenseMatrix> bias = maybe_bias(cfg.bias, n);

    std::vector<double> s(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            s[i * n + j] = binary_score(g(i, j), mu_prod, tau,
                                        bias ? (*bias)(i, j) : 0.0);
    count_flops((2 + (bias ? 1 : 0)) * static_cast<std::uint64_t>(n) * n);

    std::vector<double> m(n), l(n);

    // Rows become exp(S - m) in place.
    parallel_for(n, 16, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            double* row = s.data() + i * n;
            double mi = kNegInf;
            for (std::size_t j = 0; j < n; ++j) mi = std::max(mi, row[j]);
            double li = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                row[j] = std::exp(row[j] - mi);
                li += row[j];
            }
            m[i] = mi;
            l[i] = li;
        }
    });
    count_flops(2 * static_cast<std::uint64_t>(n) * n);

    std::vector<double> ydata(n * d, 0.0);
    AttentionOutput out{DenseMatrix::zeros(0, 0), std::move(m), std::move(l),
                        std::nullopt};

    if (!cfg.quantize_pv) {
        parallel_for(n, 4, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                const double* row = s.data() + i * n;
                double* yrow = ydata.data() + i * d;
                for (std::size_t j = 0; j < n; ++j) {
                    const double p = row[j];
                    const std::span<const double> vj = v.row(j);
                    for (std::size_t c = 0; c < d; ++c) yrow[c] += p * vj[c];
                }
                const double li = out.row_sum[i];
                for (std::size_t c = 0; c < d; ++c) yrow[c] /= li;
            }
        });
        count_flops(2 * static_cast<std::uint64_t>(n) * n * d +
                    static_cast<std::uint64_t>(n) * d);
        if (with_probs) {
            std::vector<double> pdata(n * n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    pdata[i * n + j] = s[i * n + j] / out.row_sum[i];
            out.probs = DenseMatrix(n, n, std::move(pdata));
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            double* row = s.data() + i * n;
            const double li = out.row_sum[i];
            for (std::size_t j = 0; j < n; ++j) row[j] /= li;
        }
        count_flops(static_cast<std::uint64_t>(n) * n);
        DenseMatrix p(n, n, std::move(s));
        const QuantizedCoeffs pq = quantize_coeffs(p);
        const QuantizedValues qv = quantize_values(v);
        parallel_for(n, 4, [&](std::size_t b, std::size_t e) {
            std::vector<std::int32_t> acc(d);
            for (std::size_t i = b; i < e; ++i) {
                std::fill(acc.begin(), acc.end(), 0);
                for (std::size_t j = 0; j < n; ++j) {
                    const std::int32_t p8 = pq(i, j);
                    const std::int8_t* vq = qv.data().data() + j * d;
                    for (std::size_t c = 0; c < d; ++c)
                        acc[c] += p8 * static_cast<std::int32_t>(vq[c]);
                }
                double* yrow = ydata.data() + i * d;
                for (std::size_t c = 0; c < d; ++c)
                    yrow[c] = static_cast<double>(acc[c]) * qv.scale(c) / 255.0;
            }
        });
        count_int8_ops(2 * static_cast<std::uint64_t>(n) * n * d);
        count_pre_flops(2 * static_cast<std::uint64_t>(n) * d);
        if (with_probs) out.probs = std::move(p);
    }

    out.output = DenseMatrix(n, d, std::move(ydata));
    return out;
}

AttentionOutput binary_attention_fused(const DenseMatrix& q, const DenseMatrix& k,
                                       const DenseMatrix& v, const AttentionConfig& cfg,
                                       bool with_probs) {
    check_shapes(q, k, v, cfg);
    const std::size_t n = cfg.seq_len;
    const std::size_t d = cfg.head_dim;
    const double tau = cfg.temperature;
    const std::size_t br_max = cfg.block_rows;
    const std::size_t bv = cfg.block_cols;
    const std::size_t t_r = (n + br_max - 1) / br_max;
    const std::size_t t_v = (n + bv - 1) / bv;

    const ScaledBinary sq = binary_quantize(q);
    const ScaledBinary sk = binary_quantize(k);
    const double mu_prod = sq.scale * sk.scale;
    std::optional<QuantizedValues> qv;
    if (cfg.quantize_pv) qv = quantize_values(v);
    const std::optional<DenseMatrix> bias = maybe_bias(cfg.bias, n);

    std::vector<double> ydata(n * d);
    std::vector<double> m(n, kNegInf), l(n, 0.0);
    std::vector<double> sfull(with_probs ? n * n : 0);

    parallel_for(t_r, 1, [&](std::size_t tb0, std::size_t tb1) {
        std::vector<double> sblk(br_max * bv);
        std::vector<double> o(br_max * d);
        std::vector<std::int32_t> acc(cfg.quantize_pv ? d : 0);

        for (std::size_t ib = tb0; ib < tb1; ++ib) {
            const std::size_t r0 = ib * br_max;
            const std::size_t r1 = std::min(n, r0 + br_max);
            const std::size_t br = r1 - r0;
            std::fill(o.begin(), o.begin() + static_cast<std::ptrdiff_t>(br * d), 0.0);

            for (std::size_t jb = 0; jb < t_v; ++jb) {
                const std::size_t c0 = jb * bv;
                const std::size_t c1 = std::min(n, c0 + bv);
                const std::size_t bc = c1 - c0;

                for (std::size_t r = 0; r < br; ++r) {
                    const auto srow = sq.bits.row(r0 + r);
                    double* out_row = sblk.data() + r * bc;
                    for (std::size_t j = 0; j < bc; ++j) {
                        const std::int64_t dot =
                            xnor_popcount_dot(srow, sk.bits.row(c0 + j), d);
                        out_row[j] = binary_score(dot, mu_prod, tau,
                                                  bias ? (*bias)(r0 + r, c0 + j) : 0.0);
                    }
                }
                count_flops((2 + (bias ? 1 : 0)) * static_cast<std::uint64_t>(br) * bc);
                if (with_probs) {
                    for (std::size_t r = 0; r < br; ++r)
                        std::memcpy(sfull.data() + (r0 + r) * n + c0,
                                    sblk.data() + r * bc, bc * sizeof(double));
                }

                for (std::size_t r = 0; r < br; ++r) {
                    double* row = sblk.data() + r * bc;
                    double bm = kNegInf;
                    for (std::size_t j = 0; j < bc; ++j) bm = std::max(bm, row[j]);
                    const double m_old = m[r0 + r];
                    const double m_new = std::max(m_old, bm);
                    const double rescale = std::exp(m_old - m_new);

                    double rs = 0.0;
                    for (std::size_t j = 0; j < bc; ++j) {
                        row[j] = std::exp(row[j] - m_new);
                        rs += row[j];
                    }
                    l[r0 + r] = rescale * l[r0 + r] + rs;
                    m[r0 + r] = m_new;

                    double* orow = o.data() + r * d;
                    if (rescale != 1.0)
                        for (std::size_t c = 0; c < d; ++c) orow[c] *= rescale;

                    if (!cfg.quantize_pv) {
                        for (std::size_t j = 0; j < bc; ++j) {
                            const double p = row[j];
                            const std::span<const double> vj = v.row(c0 + j);
                            for (std::size_t c = 0; c < d; ++c) orow[c] += p * vj[c];
                        }
                    } else {
                        std::fill(acc.begin(), acc.end(), 0);
                        for (std::size_t j = 0; j < bc; ++j) {
                            const std::int32_t p8 = static_cast<std::int32_t>(
                                round_half_away(row[j] * 255.0));
                            const std::int8_t* vq = qv->data().data() + (c0 + j) * d;
                            for (std::size_t c = 0; c < d; ++c)
                                acc[c] += p8 * static_cast<std::int32_t>(vq[c]);
                        }
                        for (std::size_t c = 0; c < d; ++c)
                            orow[c] += static_cast<double>(acc[c]);
                    }
                }
                count_flops(2 * static_cast<std::uint64_t>(br) * bc);
                if (!cfg.quantize_pv) {
                    count_flops(2 * static_cast<std::uint64_t>(br) * bc * d);
                } else {
                    count_int8_ops(2 * static_cast<std::uint64_t>(br) * bc * d);
                    count_pre_flops(2 * static_cast<std::uint64_t>(br) * bc);
                }
            }

            for (std::size_t r = 0; r < br; ++r) {
                const double* orow = o.data() + r * d;
                double* yrow = ydata.data() + (r0 + r) * d;
                const double li = l[r0 + r];
                if (!cfg.quantize_pv) {
                    for (std::size_t c = 0; c < d; ++c) yrow[c] = orow[c] / li;
                } else {
                    for (std::size_t c = 0; c < d; ++c)
                        yrow[c] = orow[c] / li / 255.0 * qv->scale(c);
                }
            }
            count_flops(static_cast<std::uint64_t>(br) * d);
            if (cfg.quantize_pv)
                count_pre_flops(2 * static_cast<std::uint64_t>(br) * d);
        }
    });

    AttentionOutput out{DenseMatrix(n, d, std::move(ydata)), std::move(m),
                        std::move(l), std::nullopt};
    if (with_probs) {
        std::vector<double> pdata(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                pdata[i * n + j] =
                    std::exp(sfull[i * n + j] - out.row_max[i]) / out.row_sum[i];
        out.probs = DenseMatrix(n, n, std::move(pdata));
    }
    return out;
}

} // namespace binattn
