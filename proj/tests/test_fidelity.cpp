#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "binattn/fidelity.hpp"
#include "binattn/ops_count.hpp"
#include "oracles.hpp"

using namespace binattn;

namespace {

DenseMatrix random_row_stochastic(std::size_t n, std::size_t cols,
                                  std::mt19937_64& rng) {
    std::vector<double> data(n * cols);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            data[i * cols + j] = uniform01(rng);
            sum += data[i * cols + j];
        }
        for (std::size_t j = 0; j < cols; ++j) data[i * cols + j] /= sum;
    }
    return DenseMatrix(n, cols, std::move(data));
}

// Brute-force per-row top-k intersection with lower-index tie-breaks.
double brute_precision(const DenseMatrix& a, const DenseMatrix& b, std::size_t k) {
    const std::size_t n = a.rows(), cols = a.cols();
    const std::size_t keff = std::min(k, cols);
    const auto topk = [&](const DenseMatrix& m, std::size_t i) {
        std::vector<std::size_t> picked;
        std::set<std::size_t> used;
        for (std::size_t t = 0; t < keff; ++t) {
            std::size_t best = cols;
            for (std::size_t j = 0; j < cols; ++j) {
                if (used.count(j)) continue;
                if (best == cols || m(i, j) > m(i, best)) best = j;
            }
            used.insert(best);
            picked.push_back(best);
        }
        return picked;
    };
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto ta = topk(a, i);
        const auto tb = topk(b, i);
        const std::set<std::size_t> sa(ta.begin(), ta.end());
        std::size_t hits = 0;
        for (std::size_t j : tb) hits += sa.count(j);
        total += static_cast<double>(hits) / static_cast<double>(keff);
    }
    return total / static_cast<double>(n);
}

DenseMatrix one_hot_rows(std::size_t n, std::size_t hot) {
    std::vector<double> data(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) data[i * n + hot] = 1.0;
    return DenseMatrix(n, n, std::move(data));
}

DenseMatrix uniform_rows(std::size_t n) {
    return DenseMatrix(n, n, std::vector<double>(n * n, 1.0 / n));
}

} // namespace

TEST_CASE("self comparison is (1, 0, 0, 1)") {
    std::mt19937_64 rng = make_rng(61);
    const DenseMatrix p = random_row_stochastic(6, 6, rng);
    const FidelityReport r = attention_fidelity(p, p, 3);
    CHECK(r.cos_sim == 1.0);
    CHECK(r.relative_l1 == 0.0);
    CHECK(r.rmse == 0.0);
    CHECK(r.precision_at_k == 1.0);
}

TEST_CASE("uniform-vs-one-hot tie break: hot index 0 hits, 2 misses") {
    const std::size_t n = 4;
    const DenseMatrix uni = uniform_rows(n);
    const FidelityReport hit = attention_fidelity(one_hot_rows(n, 0), uni, 1);
    CHECK(hit.precision_at_k == 1.0);
    const FidelityReport miss = attention_fidelity(one_hot_rows(n, 2), uni, 1);
    CHECK(miss.precision_at_k == 0.0);
}

TEST_CASE("random pair matches brute-force oracles, N=8 k=3") {
    std::mt19937_64 rng = make_rng(62);
    const DenseMatrix a = random_row_stochastic(8, 8, rng);
    const DenseMatrix b = random_row_stochastic(8, 8, rng);
    const FidelityReport r = attention_fidelity(a, b, 3);

    CHECK(r.precision_at_k == brute_precision(a, b, 3));

    double dot = 0, na = 0, nb = 0, l1d = 0, l1a = 0, sq = 0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        dot += a.data()[t] * b.data()[t];
        na += a.data()[t] * a.data()[t];
        nb += b.data()[t] * b.data()[t];
        l1d += std::fabs(a.data()[t] - b.data()[t]);
        l1a += std::fabs(a.data()[t]);
        sq += (a.data()[t] - b.data()[t]) * (a.data()[t] - b.data()[t]);
    }
    CHECK(r.cos_sim == doctest::Approx(dot / std::sqrt(na * nb)).epsilon(1e-12));
    CHECK(r.relative_l1 == doctest::Approx(l1d / l1a).epsilon(1e-12));
    CHECK(r.rmse == doctest::Approx(std::sqrt(sq / a.size())).epsilon(1e-12));
}

TEST_CASE("k larger than N clamps to k' = N") {
    std::mt19937_64 rng = make_rng(63);
    const DenseMatrix a = random_row_stochastic(4, 4, rng);
    const DenseMatrix b = random_row_stochastic(4, 4, rng);
    const FidelityReport r = attention_fidelity(a, b, 100);
    CHECK(r.precision_at_k == 1.0); // both top-4 sets cover all columns
    CHECK(r.k == 100);
}

TEST_CASE("rmse is symmetric; relative_l1 normalizes by the first argument") {
    std::mt19937_64 rng = make_rng(64);
    const DenseMatrix a = random_row_stochastic(5, 7, rng);
    const DenseMatrix b = random_row_stochastic(5, 7, rng);
    const FidelityReport ab = attention_fidelity(a, b, 2);
    const FidelityReport ba = attention_fidelity(b, a, 2);
    CHECK(ab.rmse == ba.rmse);
    double l1d = 0, l1a = 0, l1b = 0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        l1d += std::fabs(a.data()[t] - b.data()[t]);
        l1a += std::fabs(a.data()[t]);
        l1b += std::fabs(b.data()[t]);
    }
    CHECK(ab.relative_l1 == doctest::Approx(l1d / l1a).epsilon(1e-12));
    CHECK(ba.relative_l1 == doctest::Approx(l1d / l1b).epsilon(1e-12));
}

TEST_CASE("precision is invariant under strictly monotone row transforms") {
    std::mt19937_64 rng = make_rng(65);
    const DenseMatrix a = random_row_stochastic(6, 9, rng);
    const DenseMatrix b = random_row_stochastic(6, 9, rng);
    const double base = attention_fidelity(a, b, 4).precision_at_k;

    const auto transform = [&](const DenseMatrix& m, auto fn) {
        std::vector<double> data(m.size());
        for (std::size_t i = 0; i < m.rows(); ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < m.cols(); ++j) {
                data[i * m.cols() + j] = fn(m(i, j));
                sum += data[i * m.cols() + j];
            }
            for (std::size_t j = 0; j < m.cols(); ++j) data[i * m.cols() + j] /= sum;
        }
        return DenseMatrix(m.rows(), m.cols(), std::move(data));
    };
    const auto expfn = [](double x) { return std::exp(x); };
    const auto affine = [](double x) { return 0.5 * x + 0.1; };
    CHECK(attention_fidelity(transform(a, expfn), transform(b, expfn), 4).precision_at_k ==
          base);
    CHECK(attention_fidelity(transform(a, affine), transform(b, affine), 4).precision_at_k ==
          base);
}

TEST_CASE("validates shapes and row-stochastic inputs") {
    std::mt19937_64 rng = make_rng(66);
    const DenseMatrix a = random_row_stochastic(4, 4, rng);
    CHECK_THROWS_AS(attention_fidelity(a, random_row_stochastic(5, 5, rng), 2),
                    ShapeError);
    CHECK_THROWS_AS(attention_fidelity(a, DenseMatrix(4, 4, std::vector<double>(16, 0.5)), 2),
                    ValidationError);
}

TEST_CASE("count_ops unit case N=1 d=1") {
    AttentionConfig cfg = AttentionConfig::make(1, 1);
    cfg.quantize_pv = true;
    const OpsReport on = count_ops(cfg);
    CHECK(on.bops == 2);
    CHECK(on.int8_ops == 2);
    CHECK(on.flops == 2 + 2 + 1); // score scale, exp+sum, normalize
    cfg.quantize_pv = false;
    const OpsReport off = count_ops(cfg);
    CHECK(off.int8_ops == 0);
    CHECK(off.flops == on.flops + 2);
}

TEST_CASE("count_ops at N=196 d=64 reproduces the QK numbers") {
    const AttentionConfig cfg = AttentionConfig::make(196, 64);
    const OpsReport r = count_ops(cfg);
    CHECK(r.bops == 4917248ULL);
    CHECK(static_cast<double>(r.bops) / 64.0 == 76832.0);
}

TEST_CASE("accounting conservation between quantize_pv modes") {
    AttentionConfig cfg = AttentionConfig::make(37, 12);
    cfg.quantize_pv = true;
    const OpsReport on = count_ops(cfg);
    cfg.quantize_pv = false;
    const OpsReport off = count_ops(cfg);
    CHECK(on.bops == off.bops);
    CHECK(on.int8_ops == 2ULL * 37 * 37 * 12);
    CHECK(off.int8_ops == 0);
    CHECK(off.flops - on.flops == on.int8_ops); // the PV MACs swap categories
}

TEST_CASE("include_preprocessing folds pre_flops into the total") {
    const AttentionConfig cfg = AttentionConfig::make(8, 4);
    const OpsReport base = count_ops(cfg, false);
    const OpsReport with = count_ops(cfg, true);
    CHECK(with.total_ops() ==
          base.total_ops() + static_cast<double>(base.pre_flops));
}

TEST_CASE("instrumented counters equal analytic formulas over a sweep") {
    std::mt19937_64 rng = make_rng(67);
    for (int trial = 0; trial < 12; ++trial) {
        const std::size_t n = 1 + rng() % 48;
        const std::size_t d = 1 + rng() % 24;
        AttentionConfig cfg = AttentionConfig::make(n, d);
        cfg.block_rows = 1 + rng() % n;
        cfg.block_cols = 1 + rng() % n;
        cfg.quantize_pv = (rng() & 1) != 0;
        if ((rng() & 3) == 0)
            cfg.bias = BiasSpec{DenseBias{oracle::random_dense(n, n, rng, 0.3)}};
        const DenseMatrix q = oracle::random_dense(n, d, rng);
        const DenseMatrix k = oracle::random_dense(n, d, rng);
        const DenseMatrix v = oracle::random_dense(n, d, rng);

        op_counters().reset();
        set_op_counting(true);
        binary_attention_fused(q, k, v, cfg);
        set_op_counting(false);

        const OpsReport want = count_ops(cfg);
        REQUIRE(op_counters().bops.load() == want.bops);
        REQUIRE(op_counters().int8_ops.load() == want.int8_ops);
        REQUIRE(op_counters().flops.load() == want.flops);
        REQUIRE(op_counters().pre_flops.load() == want.pre_flops);
    }
}

TEST_CASE("unfused path hits the same headline counters when unquantized") {
    std::mt19937_64 rng = make_rng(68);
    const std::size_t n = 19, d = 8;
    AttentionConfig cfg = AttentionConfig::make(n, d);
    cfg.quantize_pv = false;
    const DenseMatrix q = oracle::random_dense(n, d, rng);
    const DenseMatrix k = oracle::random_dense(n, d, rng);
    const DenseMatrix v = oracle::random_dense(n, d, rng);
    op_counters().reset();
    set_op_counting(true);
    binary_attention_unfused(q, k, v, cfg);
    set_op_counting(false);
    const OpsReport want = count_ops(cfg);
    CHECK(op_counters().bops.load() == want.bops);
    CHECK(op_counters().flops.load() == want.flops);
    CHECK(op_counters().pre_flops.load() == want.pre_flops);
}
