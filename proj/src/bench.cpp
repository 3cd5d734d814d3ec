#include "binattn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "binattn/attention.hpp"
#include "binattn/bitops.hpp"
#include "binattn/errors.hpp"
#include "binattn/fidelity.hpp"
#include "binattn/parallel.hpp"
#include "binattn/rng.hpp"

namespace binattn {

namespace {

constexpr std::size_t kWarmups = 2;

std::vector<float> random_floats(std::size_t count, std::mt19937_64& rng) {
    std::vector<float> out(count);
    GaussianSource gauss(rng);
    for (float& v : out) v = static_cast<float>(gauss());
    return out;
}

std::vector<std::int8_t> random_int8(std::size_t count, std::mt19937_64& rng) {
    std::vector<std::int8_t> out(count);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = static_cast<std::int8_t>(static_cast<std::int64_t>(rng() % 255) - 127);
    return out;
}

DenseMatrix random_dense(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::vector<double> data(rows * cols);
    GaussianSource gauss(rng);
    for (double& v : data) v = gauss();
    return DenseMatrix(rows, cols, std::move(data));
}

// Baseline: plain triple-loop real32 GEMM over row-major operands,
// C[n x m] = A[n x d] * B[m x d]^T.
void naive_f32_gemm(const float* a, const float* b, float* c, std::size_t n,
                    std::size_t m, std::size_t d) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            float acc = 0.0f;
            const float* ai = a + i * d;
            const float* bj = b + j * d;
            for (std::size_t k = 0; k < d; ++k) acc += ai[k] * bj[k];
            c[i * m + j] = acc;
        }
    }
}

void int8_gemm(const std::int8_t* a, const std::int8_t* b, std::int32_t* c,
               std::size_t n, std::size_t m, std::size_t d) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            std::int32_t acc = 0;
            const std::int8_t* ai = a + i * d;
            const std::int8_t* bj = b + j * d;
            for (std::size_t k = 0; k < d; ++k)
                acc += static_cast<std::int32_t>(ai[k]) * static_cast<std::int32_t>(bj[k]);
            c[i * m + j] = acc;
        }
    }
}

double time_median_ns(std::size_t reps, const std::function<void()>& fn) {
    for (std::size_t w = 0; w < kWarmups; ++w) fn();
    std::vector<double> times(reps);
    for (std::size_t r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        times[r] = static_cast<double>(
            std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

// The benchmarked kernels are the same code paths the test suites exercise;
// this re-derives their outputs from independent loops on one small
// instance per run and refuses to time anything on a mismatch.
void verify_kernels(std::uint64_t seed) {
    std::mt19937_64 rng = make_rng(seed, 999);
    const std::size_t n = 24, m = 20, d = 96;

    const DenseMatrix qa = random_dense(n, d, rng);
    const DenseMatrix qb = random_dense(m, d, rng);
    const BitMatrix sa = pack_signs(qa);
    const BitMatrix sb = pack_signs(qb);
    const Int32Matrix g = binary_gemm(sa, sb);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            std::int64_t ref = 0;
            for (std::size_t c = 0; c < d; ++c) {
                const int x = qa(i, c) >= 0.0 ? 1 : -1;
                const int y = qb(j, c) >= 0.0 ? 1 : -1;
                ref += x * y;
            }
            if (ref != g(i, j)) throw NumericalError("bench: binary_gemm checksum failed");
        }
    }

    std::vector<std::int8_t> ia = random_int8(n * d, rng);
    std::vector<std::int8_t> ib = random_int8(m * d, rng);
    std::vector<std::int32_t> ic(n * m);
    int8_gemm(ia.data(), ib.data(), ic.data(), n, m, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            std::int64_t ref = 0;
            for (std::size_t c = 0; c < d; ++c)
                ref += static_cast<std::int64_t>(ia[i * d + c]) * ib[j * d + c];
            if (ref != ic[i * m + j]) throw NumericalError("bench: int8_gemm checksum failed");
        }
    }

    const std::size_t an = 32, ad = 16;
    const DenseMatrix q = random_dense(an, ad, rng);
    const DenseMatrix k = random_dense(an, ad, rng);
    const DenseMatrix v = random_dense(an, ad, rng);
    AttentionConfig cfg = AttentionConfig::make(an, ad);
    cfg.quantize_pv = false;
    const DenseMatrix yf = binary_attention_fused(q, k, v, cfg).output;
    const DenseMatrix yu = binary_attention_unfused(q, k, v, cfg).output;
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < yf.size(); ++t) {
        num += (yf.data()[t] - yu.data()[t]) * (yf.data()[t] - yu.data()[t]);
        den += yu.data()[t] * yu.data()[t];
    }
    if (std::sqrt(num) > 1e-12 * std::sqrt(den))
        throw NumericalError("bench: fused attention checksum failed");

    const AttentionOutput ref = reference_attention(q, k, v, cfg, /*with_probs=*/true);
    for (std::size_t i = 0; i < an; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < an; ++j) sum += (*ref.probs)(i, j);
        if (std::fabs(sum - 1.0) > 1e-9)
            throw NumericalError("bench: reference attention checksum failed");
    }
}

double folded_gemm_ops(const std::string& kernel, const BenchShape& s) {
    const double macs2 = 2.0 * static_cast<double>(s.n) * static_cast<double>(s.m) *
                         static_cast<double>(s.d);
    if (kernel == "binary_gemm") return macs2 / 64.0;
    if (kernel == "int8_gemm") return macs2 / 2.0;
    return macs2;
}

} // namespace

std::vector<BenchResult> run_bench(const std::string& suite,
                                   const std::vector<BenchShape>& shapes,
                                   std::size_t reps, std::uint64_t seed,
                                   bool allow_parallel) {
    if (suite != "gemm" && suite != "attention")
        throw ConfigError("run_bench: unknown suite '" + suite + "'");
    if (reps < 5) throw ConfigError("run_bench: reps must be >= 5");
    for (const BenchShape& s : shapes)
        if (s.n == 0 || s.m == 0 || s.d == 0)
            throw ConfigError("run_bench: shape dimensions must be >= 1");

    verify_kernels(seed);

    const int saved_threads = max_threads();
    std::vector<BenchResult> results;

    const auto push = [&](const std::string& kernel, const BenchShape& s, double ops,
                          const std::function<void()>& fn) {
        BenchResult r;
        r.kernel = kernel;
        r.shape = s;
        r.reps = reps;
        r.warmups = kWarmups;
        r.median_ns = time_median_ns(reps, fn);
        r.ops = ops;
        r.ops_per_sec = ops / (r.median_ns * 1e-9);
        results.push_back(r);
    };

    std::mt19937_64 rng = make_rng(seed);

    if (suite == "gemm") {
        set_max_threads(1);
        for (const BenchShape& s : shapes) {
            {
                std::vector<float> a = random_floats(s.n * s.d, rng);
                std::vector<float> b = random_floats(s.m * s.d, rng);
                std::vector<float> c(s.n * s.m);
                push("naive_f32_gemm", s, folded_gemm_ops("naive_f32_gemm", s),
                     [&] { naive_f32_gemm(a.data(), b.data(), c.data(), s.n, s.m, s.d); });
            }
            {
                std::vector<std::int8_t> a = random_int8(s.n * s.d, rng);
                std::vector<std::int8_t> b = random_int8(s.m * s.d, rng);
                std::vector<std::int32_t> c(s.n * s.m);
                push("int8_gemm", s, folded_gemm_ops("int8_gemm", s),
                     [&] { int8_gemm(a.data(), b.data(), c.data(), s.n, s.m, s.d); });
            }
            {
                const BitMatrix a = pack_signs(random_dense(s.n, s.d, rng));
                const BitMatrix b = pack_signs(random_dense(s.m, s.d, rng));
                push("binary_gemm", s, folded_gemm_ops("binary_gemm", s),
                     [&] { Int32Matrix c = binary_gemm(a, b); (void)c; });
            }
        }
        set_max_threads(saved_threads);
    } else {
        set_max_threads(allow_parallel ? saved_threads : 1);
        for (const BenchShape& s : shapes) {
            const DenseMatrix q = random_dense(s.n, s.d, rng);
            const DenseMatrix k = random_dense(s.n, s.d, rng);
            const DenseMatrix v = random_dense(s.n, s.d, rng);
            AttentionConfig cfg = AttentionConfig::make(s.n, s.d);

            AttentionConfig ref_cfg = cfg;
            ref_cfg.quantize_pv = false;
            // Full-precision call: both matmuls are flops, plus the softmax.
            const double nn = static_cast<double>(s.n) * static_cast<double>(s.n);
            const double ref_ops = 4.0 * nn * static_cast<double>(s.d) + 4.0 * nn;
            push("reference_attention", s, ref_ops,
                 [&] { AttentionOutput o = reference_attention(q, k, v, ref_cfg); (void)o; });

            OpsReport bin_ops = count_ops(cfg);
            push("binary_attention_fused", s, bin_ops.total_ops(),
                 [&] { AttentionOutput o = binary_attention_fused(q, k, v, cfg); (void)o; });
        }
        set_max_threads(saved_threads);
    }

    return results;
}

} // namespace binattn
