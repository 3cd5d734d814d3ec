// Command-line front end: self-tests, statistical verification of the sign
// correlation law, attention fidelity reports, microbenchmarks, and a demo
// that renders attention maps as CSV / PGM files.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "binattn/attention.hpp"
#include "binattn/bench.hpp"
#include "binattn/bitops.hpp"
#include "binattn/fidelity.hpp"
#include "binattn/ops_count.hpp"
#include "binattn/parallel.hpp"
#include "binattn/qat.hpp"
#include "binattn/quantize.hpp"
#include "binattn/rng.hpp"
#include "binattn/tensor_file.hpp"
#include "binattn/textio.hpp"
#include "binattn/theory.hpp"

namespace fs = std::filesystem;
using namespace binattn;

namespace {

std::uint64_t default_seed() {
    if (const char* env = std::getenv("BINATTN_SEED"))
        return std::strtoull(env, nullptr, 10);
    return 0;
}

DenseMatrix random_dense(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                         double scale = 1.0) {
    std::vector<double> data(rows * cols);
    GaussianSource gauss(rng);
    for (double& v : data) v = scale * gauss();
    return DenseMatrix(rows, cols, std::move(data));
}

BiasSpec make_bias(const std::string& kind, std::size_t n, std::mt19937_64& rng) {
    if (kind == "none") return BiasSpec{};
    GaussianSource gauss(rng);
    if (kind == "dense") {
        return BiasSpec{DenseBias{random_dense(n, n, rng, 0.5)}};
    }
    if (kind == "rel1d") {
        std::vector<double> offsets(2 * n - 1);
        for (double& v : offsets) v = 0.5 * gauss();
        return BiasSpec{Relative1dBias{std::move(offsets)}};
    }
    if (kind == "rel2d") {
        const auto g = static_cast<std::size_t>(std::lround(std::sqrt(double(n))));
        if (g * g != n)
            throw ConfigError("bias rel2d requires --n to be a perfect square");
        std::vector<double> ro(2 * g - 1), co(2 * g - 1);
        for (double& v : ro) v = 0.5 * gauss();
        for (double& v : co) v = 0.5 * gauss();
        return BiasSpec{Relative2dBias{std::move(ro), std::move(co)}};
    }
    throw ConfigError("unknown bias kind: " + kind);
}

// ---------------------------------------------------------------------------
// selftest

struct CheckRunner {
    int passed = 0;
    int failed = 0;

    void run(const std::string& name, const std::function<bool(std::string&)>& fn) {
        std::string detail;
        bool ok = false;
        try {
            ok = fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        if (ok) {
            ++passed;
            std::cout << "ok " << name;
            if (!detail.empty()) std::cout << " (" << detail << ")";
            std::cout << "\n";
        } else {
            ++failed;
            std::cout << "FAIL " << name;
            if (!detail.empty()) std::cout << ": " << detail;
            std::cout << "\n";
        }
    }
};

double rel_l2(const DenseMatrix& a, const DenseMatrix& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        const double diff = a.data()[t] - b.data()[t];
        num += diff * diff;
        den += b.data()[t] * b.data()[t];
    }
    return den > 0.0 ? std::sqrt(num) / std::sqrt(den) : std::sqrt(num);
}

int run_selftest(std::uint64_t seed, bool force_fail) {
    CheckRunner checks;
    std::mt19937_64 rng = make_rng(seed);

    checks.run("tensor_roundtrip", [&](std::string&) {
        const fs::path dir =
            fs::temp_directory_path() /
            ("binattn-selftest-" + std::to_string(::getpid()));
        fs::create_directories(dir);
        const DenseMatrix m32 = random_dense(7, 65, rng);
        const DenseMatrix m32f(m32.rows(), m32.cols(),
                               {m32.data().begin(), m32.data().end()}, Dtype::f32);
        write_tensor(dir / "a.batf", m32f);
        const bool ok_a = std::get<DenseMatrix>(read_tensor(dir / "a.batf")) == m32f;
        const BitMatrix bits = pack_signs(random_dense(5, 130, rng));
        write_tensor(dir / "b.batf", bits);
        const bool ok_b = std::get<BitMatrix>(read_tensor(dir / "b.batf")) == bits;
        const QuantizedValues qv = quantize_values(random_dense(9, 4, rng));
        write_tensor(dir / "c.batf", qv);
        const bool ok_c = std::get<QuantizedValues>(read_tensor(dir / "c.batf")) == qv;
        fs::remove_all(dir);
        return ok_a && ok_b && ok_c;
    });

    checks.run("pack_signs_oracle", [&](std::string&) {
        const DenseMatrix m = random_dense(3, 130, rng);
        const BitMatrix b = pack_signs(m);
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t c = 0; c < m.cols(); ++c)
                if (b.sign(i, c) != (m(i, c) >= 0.0 ? 1 : -1)) return false;
        return true;
    });

    checks.run("hamming_identity", [&](std::string&) {
        for (std::size_t d = 1; d <= 5; ++d) {
            const std::uint64_t lim = std::uint64_t{1} << d;
            for (std::uint64_t wa = 0; wa < lim; ++wa)
                for (std::uint64_t wb = 0; wb < lim; ++wb) {
                    const BitMatrix a(1, d, {wa});
                    const BitMatrix b(1, d, {wb});
                    const std::int64_t dot = xnor_popcount_dot(a, 0, b, 0);
                    const std::uint64_t h = hamming_distance(a, 0, b, 0);
                    if (dot != static_cast<std::int64_t>(d) -
                                   2 * static_cast<std::int64_t>(h))
                        return false;
                }
        }
        for (std::size_t d : {63u, 64u, 65u, 200u, 1024u}) {
            const BitMatrix a = pack_signs(random_dense(1, d, rng));
            const BitMatrix b = pack_signs(random_dense(1, d, rng));
            const std::int64_t dot = xnor_popcount_dot(a, 0, b, 0);
            const std::uint64_t h = hamming_distance(a, 0, b, 0);
            if (dot !=
                static_cast<std::int64_t>(d) - 2 * static_cast<std::int64_t>(h))
                return false;
        }
        return true;
    });

    checks.run("binary_gemm_oracle", [&](std::string&) {
        const DenseMatrix qa = random_dense(8, 96, rng);
        const DenseMatrix qb = random_dense(8, 96, rng);
        const Int32Matrix g = binary_gemm(pack_signs(qa), pack_signs(qb));
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = 0; j < 8; ++j) {
                std::int32_t ref = 0;
                for (std::size_t c = 0; c < 96; ++c)
                    ref += (qa(i, c) >= 0 ? 1 : -1) * (qb(j, c) >= 0 ? 1 : -1);
                if (ref != g(i, j)) return false;
            }
        return true;
    });

    checks.run("sign_scale_invariance", [&](std::string&) {
        const DenseMatrix m = random_dense(4, 70, rng);
        std::vector<double> scaled(m.data().begin(), m.data().end());
        for (double& v : scaled) v *= 3.7;
        return pack_signs(m) == pack_signs(DenseMatrix(4, 70, std::move(scaled)));
    });

    checks.run("quantizer_bounds", [&](std::string&) {
        const DenseMatrix v = random_dense(32, 8, rng);
        const QuantizedValues qv = quantize_values(v);
        const DenseMatrix back = dequantize_values(qv);
        for (std::size_t i = 0; i < v.rows(); ++i)
            for (std::size_t c = 0; c < v.cols(); ++c)
                if (std::fabs(back(i, c) - v(i, c)) > qv.scale(c) / 2 + 1e-15)
                    return false;
        std::vector<double> pdata(64);
        for (double& x : pdata) x = uniform01(rng);
        const DenseMatrix p(8, 8, std::move(pdata));
        const QuantizedCoeffs pq = quantize_coeffs(p);
        for (std::size_t t = 0; t < p.size(); ++t)
            if (std::fabs(pq.data()[t] / 255.0 - p.data()[t]) > 1.0 / 510.0 + 1e-15)
                return false;
        const DenseMatrix m = random_dense(16, 64, rng);
        const ScaledBinary sb = binary_quantize(m);
        double best = 0.0;
        for (std::size_t t = 0; t < m.size(); ++t) {
            const double diff = std::fabs(m.data()[t]) - sb.scale;
            best += diff * diff;
        }
        for (int trial = 0; trial < 100; ++trial) {
            const double c = uniform(rng, 0.0, 3.0);
            double err = 0.0;
            for (std::size_t t = 0; t < m.size(); ++t) {
                const double diff = std::fabs(m.data()[t]) - c;
                err += diff * diff;
            }
            if (err < best - 1e-12) return false;
        }
        return true;
    });

    checks.run("online_softmax_exactness", [&](std::string& detail) {
        const std::size_t n = 64, d = 16;
        const DenseMatrix q = random_dense(n, d, rng);
        const DenseMatrix k = random_dense(n, d, rng);
        const DenseMatrix v = random_dense(n, d, rng);
        AttentionConfig cfg = AttentionConfig::make(n, d);
        cfg.quantize_pv = false;
        const DenseMatrix yu = binary_attention_unfused(q, k, v, cfg).output;
        double worst = 0.0;
        for (std::size_t b : {std::size_t{1}, std::size_t{3}, std::size_t{16}, n}) {
            cfg.block_rows = b;
            cfg.block_cols = b;
            worst = std::max(worst, rel_l2(binary_attention_fused(q, k, v, cfg).output, yu));
        }
        cfg.block_rows = n;
        cfg.block_cols = n;
        const DenseMatrix y1 = binary_attention_fused(q, k, v, cfg).output;
        detail = "max rel dev " + format_double(worst);
        return worst <= 1e-12 && y1 == yu;
    });

    checks.run("softmax_shift_invariance", [&](std::string&) {
        const std::size_t n = 16, d = 8;
        const DenseMatrix q = random_dense(n, d, rng);
        const DenseMatrix k = random_dense(n, d, rng);
        const DenseMatrix v = random_dense(n, d, rng);
        AttentionConfig cfg = AttentionConfig::make(n, d);
        cfg.quantize_pv = false;
        const DenseMatrix y0 = binary_attention_unfused(q, k, v, cfg).output;
        cfg.bias = BiasSpec{Relative1dBias{std::vector<double>(2 * n - 1, 2.25)}};
        const DenseMatrix y1 = binary_attention_unfused(q, k, v, cfg).output;
        return rel_l2(y1, y0) <= 1e-12;
    });

    checks.run("positive_scale_invariance", [&](std::string&) {
        const std::size_t n = 12, d = 24;
        const DenseMatrix q = random_dense(n, d, rng);
        const DenseMatrix k = random_dense(n, d, rng);
        std::vector<double> scaled(q.data().begin(), q.data().end());
        for (double& x : scaled) x *= 5.0;
        const DenseMatrix q5(n, d, std::move(scaled));
        const ScaledBinary a = binary_quantize(q);
        const ScaledBinary b = binary_quantize(q5);
        if (!(a.bits == b.bits)) return false;
        return std::fabs(b.scale - 5.0 * a.scale) <= 1e-12 * b.scale;
    });

    checks.run("fidelity_self_comparison", [&](std::string&) {
        AttentionConfig cfg = AttentionConfig::make(8, 4);
        const DenseMatrix q = random_dense(8, 4, rng);
        const DenseMatrix k = random_dense(8, 4, rng);
        const DenseMatrix v = random_dense(8, 4, rng);
        const DenseMatrix p = *reference_attention(q, k, v, cfg, true).probs;
        const FidelityReport r = attention_fidelity(p, p, 3);
        return r.cos_sim == 1.0 && r.relative_l1 == 0.0 && r.rmse == 0.0 &&
               r.precision_at_k == 1.0;
    });

    checks.run("ops_instrumented_vs_analytic", [&](std::string&) {
        for (const auto& [n, d, br, bc] :
             {std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>{13, 8, 4, 5},
              {32, 16, 32, 7},
              {21, 4, 1, 21}}) {
            for (bool qpv : {false, true}) {
                AttentionConfig cfg = AttentionConfig::make(n, d);
                cfg.block_rows = br;
                cfg.block_cols = bc;
                cfg.quantize_pv = qpv;
                const DenseMatrix q = random_dense(n, d, rng);
                const DenseMatrix k = random_dense(n, d, rng);
                const DenseMatrix v = random_dense(n, d, rng);
                op_counters().reset();
                set_op_counting(true);
                binary_attention_fused(q, k, v, cfg);
                set_op_counting(false);
                const OpsReport want = count_ops(cfg);
                if (op_counters().bops.load() != want.bops) return false;
                if (op_counters().int8_ops.load() != want.int8_ops) return false;
                if (op_counters().flops.load() != want.flops) return false;
                if (op_counters().pre_flops.load() != want.pre_flops) return false;
            }
        }
        return true;
    });

    checks.run("ste_backward", [&](std::string&) {
        const DenseMatrix up = random_dense(6, 5, rng);
        const DenseMatrix x = random_dense(6, 5, rng);
        const DenseMatrix g = ste_backward(up, x, SteConfig{1.0});
        for (std::size_t t = 0; t < g.size(); ++t) {
            const double want =
                std::fabs(x.data()[t]) <= 1.0 ? up.data()[t] : 0.0;
            if (g.data()[t] != want) return false;
        }
        return true;
    });

    checks.run("distillation_grad_fd", [&](std::string& detail) {
        const DenseMatrix s = random_dense(8, 4, rng);
        const DenseMatrix t = random_dense(8, 4, rng);
        const DistillationLoss loss = distillation_loss(s, t);
        const double eps = 1e-6;
        double worst = 0.0;
        for (std::size_t idx = 0; idx < s.size(); ++idx) {
            std::vector<double> pert(s.data().begin(), s.data().end());
            pert[idx] += eps;
            const double lp = distillation_loss(DenseMatrix(8, 4, pert), t).value;
            pert[idx] -= 2 * eps;
            const double lm = distillation_loss(DenseMatrix(8, 4, pert), t).value;
            const double fd = (lp - lm) / (2 * eps);
            const double g = loss.gradient.data()[idx];
            worst = std::max(worst,
                             std::fabs(g - fd) / std::max({std::fabs(g), std::fabs(fd), 1e-9}));
        }
        detail = "max rel dev " + format_double(worst);
        return worst <= 1e-7;
    });

    checks.run("bias_grad_fd", [&](std::string& detail) {
        const std::size_t n = 3, d = 2;
        AttentionConfig cfg = AttentionConfig::make(n, d);
        cfg.quantize_pv = false;
        const DenseMatrix q = random_dense(n, d, rng);
        const DenseMatrix k = random_dense(n, d, rng);
        const DenseMatrix v = random_dense(n, d, rng);
        const double dev =
            grad_check_bias(q, k, v, DenseBias{random_dense(n, n, rng, 0.3)}, cfg, 1e-5);
        detail = "max rel dev " + format_double(dev);
        return dev <= 1e-4;
    });

    checks.run("theorem1_quick", [&](std::string& detail) {
        const double rho = 0.5;
        const JointGaussianSpec spec(1, {1.0, rho, rho, 1.0});
        const std::size_t m = 200000;
        const DenseMatrix emp = monte_carlo_sign_covariance(spec, m, seed + 17);
        const double dev = std::fabs(emp(0, 0) - 1.0 / 3.0);
        detail = "deviation " + format_double(dev);
        if (dev > 4.0 / std::sqrt(static_cast<double>(m))) return false;
        const DenseMatrix ends =
            arcsine_correlation(DenseMatrix(1, 3, {-1.0, 0.0, 1.0}));
        return ends(0, 0) == -1.0 && ends(0, 1) == 0.0 && ends(0, 2) == 1.0;
    });

    checks.run("geometry_identities", [&](std::string& detail) {
        const DenseMatrix q = random_dense(64, 32, rng);
        const DenseMatrix k = random_dense(64, 32, rng);
        const GeometryReport rep = verify_geometry_identities(q, k, 1000, seed + 5);
        const double worst =
            std::max({rep.max_dev_euclidean, rep.max_dev_cosine, rep.max_dev_hamming,
                      rep.max_dev_binary_cosine});
        detail = "max dev " + format_double(worst);
        return worst < 1e-9;
    });

    if (force_fail) {
        checks.run("forced_failure", [&](std::string& detail) {
            detail = "injected by --force-fail";
            return false;
        });
    }

    std::cout << "selftest: " << checks.passed << "/" << (checks.passed + checks.failed)
              << " checks passed\n";
    return checks.failed == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// verify-theorem1

int run_verify_theorem1(std::size_t dim, double rho, std::size_t samples,
                        std::uint64_t seed) {
    if (dim == 0) throw ConfigError("--dim must be >= 1");
    if (std::fabs(rho) > 1.0) throw ConfigError("--rho must be in [-1, 1]");
    const std::size_t n = 2 * dim;
    std::vector<double> sigma(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) sigma[i * n + i] = 1.0;
    for (std::size_t i = 0; i < dim; ++i) {
        sigma[i * n + (dim + i)] = rho;
        sigma[(dim + i) * n + i] = rho;
    }
    const JointGaussianSpec spec(dim, std::move(sigma));
    const DenseMatrix analytic = arcsine_correlation(spec.correlation());
    const DenseMatrix empirical = monte_carlo_sign_covariance(spec, samples, seed);

    double max_dev = 0.0;
    for (std::size_t t = 0; t < analytic.size(); ++t)
        max_dev = std::max(max_dev,
                           std::fabs(analytic.data()[t] - empirical.data()[t]));
    const double tol = 4.0 / std::sqrt(static_cast<double>(samples));

    std::cout << "empirical E[s t^T]:\n";
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < dim; ++j)
            std::cout << (j ? " " : "  ") << format_double(empirical(i, j));
        std::cout << "\n";
    }
    std::cout << "analytic (2/pi) asin(C):\n";
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < dim; ++j)
            std::cout << (j ? " " : "  ") << format_double(analytic(i, j));
        std::cout << "\n";
    }
    std::cout << "max deviation: " << format_double(max_dev) << " (tolerance "
              << format_double(tol) << ", " << samples << " samples)\n";
    if (max_dev > tol) {
        std::cout << "verify-theorem1: FAIL\n";
        return 1;
    }
    std::cout << "verify-theorem1: PASS\n";
    return 0;
}

// ---------------------------------------------------------------------------
// fidelity

void print_fidelity(const FidelityReport& f) {
    std::cout << "  cos_sim         " << format_double(f.cos_sim) << "\n"
              << "  relative_l1     " << format_double(f.relative_l1) << "\n"
              << "  rmse            " << format_double(f.rmse) << "\n"
              << "  precision_at_k  " << format_double(f.precision_at_k)
              << "  (k=" << f.k << ")\n";
}

void print_ops(const OpsReport& o) {
    std::cout << "  bops            " << o.bops << "\n"
              << "  int8_ops        " << o.int8_ops << "\n"
              << "  flops           " << o.flops << "\n"
              << "  pre_flops       " << o.pre_flops << " (excluded from total)\n"
              << "  total_ops       " << format_double(o.total_ops()) << "\n";
}

int run_fidelity(std::size_t n, std::size_t d, const std::string& bias_kind,
                 std::uint64_t seed, std::size_t k, const std::string& csv_path) {
    std::mt19937_64 rng = make_rng(seed);
    const DenseMatrix q = random_dense(n, d, rng);
    const DenseMatrix kk = random_dense(n, d, rng);
    const DenseMatrix v = random_dense(n, d, rng);
    AttentionConfig cfg = AttentionConfig::make(n, d);
    cfg.bias = make_bias(bias_kind, n, rng);
    cfg.seed = seed;

    const DenseMatrix p_ref = *reference_attention(q, kk, v, cfg, true).probs;
    const DenseMatrix p_bin = *binary_attention_unfused(q, kk, v, cfg, true).probs;
    const FidelityReport fid = attention_fidelity(p_ref, p_bin, k);
    const OpsReport ops = count_ops(cfg);

    std::cout << "fidelity (N=" << n << ", d=" << d << ", bias=" << bias_kind
              << ", seed=" << seed << ")\n";
    print_fidelity(fid);
    std::cout << "ops (one binary attention call)\n";
    print_ops(ops);

    if (!csv_path.empty()) {
        std::ofstream os(csv_path, std::ios::trunc);
        if (!os) throw IoError("cannot open for writing: " + csv_path);
        os << "cos_sim,relative_l1,rmse,precision_at_k,k,bops,int8_ops,flops,"
              "pre_flops,total_ops\n";
        os << format_double(fid.cos_sim) << ',' << format_double(fid.relative_l1)
           << ',' << format_double(fid.rmse) << ','
           << format_double(fid.precision_at_k) << ',' << fid.k << ',' << ops.bops
           << ',' << ops.int8_ops << ',' << ops.flops << ',' << ops.pre_flops << ','
           << format_double(ops.total_ops()) << "\n";
        os.flush();
        if (!os) throw IoError("write failed: " + csv_path);
        std::cout << "wrote " << csv_path << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// bench

int run_bench_cmd(const std::string& suite, const std::string& sizes_csv,
                  std::size_t d, std::size_t reps, std::uint64_t seed,
                  const std::string& csv_path, bool parallel) {
    std::vector<BenchShape> shapes;
    std::stringstream ss(sizes_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        const std::size_t n = std::strtoull(tok.c_str(), nullptr, 10);
        if (n == 0) throw ConfigError("bad --sizes entry: " + tok);
        shapes.push_back(BenchShape{n, n, d});
    }
    if (shapes.empty()) throw ConfigError("--sizes produced no shapes");

    const std::vector<BenchResult> results = run_bench(suite, shapes, reps, seed, parallel);

    std::cout << "kernel,N,M,d,median_ns,ops,ops_per_sec\n";
    for (const BenchResult& r : results)
        std::cout << r.kernel << ',' << r.shape.n << ',' << r.shape.m << ','
                  << r.shape.d << ',' << format_double(r.median_ns) << ','
                  << format_double(r.ops) << ',' << format_double(r.ops_per_sec)
                  << "\n";

    if (!csv_path.empty()) {
        std::ofstream os(csv_path, std::ios::trunc);
        if (!os) throw IoError("cannot open for writing: " + csv_path);
        os << "kernel,N,M,d,median_ns,ops,ops_per_sec\n";
        for (const BenchResult& r : results)
            os << r.kernel << ',' << r.shape.n << ',' << r.shape.m << ',' << r.shape.d
               << ',' << format_double(r.median_ns) << ',' << format_double(r.ops)
               << ',' << format_double(r.ops_per_sec) << "\n";
        os.flush();
        if (!os) throw IoError("write failed: " + csv_path);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// demo

int run_demo(std::size_t n, std::size_t d, const std::string& bias_kind,
             std::uint64_t seed, const std::string& out_dir, bool save_tensors) {
    std::mt19937_64 rng = make_rng(seed);
    const DenseMatrix q = random_dense(n, d, rng);
    const DenseMatrix k = random_dense(n, d, rng);
    const DenseMatrix v = random_dense(n, d, rng);
    AttentionConfig cfg = AttentionConfig::make(n, d);
    cfg.bias = make_bias(bias_kind, n, rng);
    cfg.seed = seed;

    const DenseMatrix p_ref = *reference_attention(q, k, v, cfg, true).probs;
    const DenseMatrix p_bin = *binary_attention_unfused(q, k, v, cfg, true).probs;

    const fs::path dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
    fs::create_directories(dir);
    write_matrix_csv(dir / "P_ref.csv", p_ref);
    write_matrix_csv(dir / "P_bin.csv", p_bin);
    write_pgm_rowmax(dir / "P_ref.pgm", p_ref);
    write_pgm_rowmax(dir / "P_bin.pgm", p_bin);
    std::cout << "wrote " << (dir / "P_ref.csv").string() << "\n"
              << "wrote " << (dir / "P_bin.csv").string() << "\n"
              << "wrote " << (dir / "P_ref.pgm").string() << "\n"
              << "wrote " << (dir / "P_bin.pgm").string() << "\n";
    if (save_tensors) {
        write_tensor(dir / "Q.batf", q);
        write_tensor(dir / "K.batf", k);
        write_tensor(dir / "V.batf", v);
        std::cout << "wrote " << (dir / "Q.batf").string() << "\n"
                  << "wrote " << (dir / "K.batf").string() << "\n"
                  << "wrote " << (dir / "V.batf").string() << "\n";
    }

    const FidelityReport fid = attention_fidelity(p_ref, p_bin, std::min<std::size_t>(100, n));
    std::cout << "fidelity (reference vs binary attention map)\n";
    print_fidelity(fid);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"binattn: 1-bit query/key attention on CPU"};
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = default_seed();
    int threads = 0;
    std::string output;
    app.add_option("--seed", seed, "PRNG seed (env BINATTN_SEED as fallback)");
    app.add_option("--threads", threads, "max worker threads (0 = auto)");
    app.add_option("--output", output, "output file or directory");

    CLI::App* selftest = app.add_subcommand("selftest", "run the invariant suite");
    bool force_fail = false;
    selftest->add_flag("--force-fail", force_fail, "inject a failing check");

    CLI::App* theorem = app.add_subcommand(
        "verify-theorem1", "compare empirical sign covariance against (2/pi) asin C");
    std::size_t dim = 1, samples = 1000000;
    double rho = 0.5;
    theorem->add_option("--dim", dim, "per-variable dimension");
    theorem->add_option("--rho", rho, "cross-correlation in [-1, 1]");
    theorem->add_option("--samples", samples, "Monte Carlo samples");

    CLI::App* fidelity = app.add_subcommand(
        "fidelity", "attention-map fidelity of the binary path vs the reference");
    std::size_t fn = 64, fd = 32, fk = 100;
    std::string fbias = "none";
    fidelity->add_option("--n", fn, "sequence length");
    fidelity->add_option("--d", fd, "head dimension");
    fidelity->add_option("--bias", fbias, "bias kind: none|dense|rel1d|rel2d")
        ->check(CLI::IsMember({"none", "dense", "rel1d", "rel2d"}));
    fidelity->add_option("--k", fk, "top-k size for the precision metric");

    CLI::App* bench = app.add_subcommand("bench", "microbenchmarks");
    std::string suite = "gemm", sizes = "512,1024,2048", csv;
    std::size_t bd = 128, reps = 9;
    bool parallel = false;
    bench->add_option("--suite", suite, "gemm|attention")
        ->check(CLI::IsMember({"gemm", "attention"}));
    bench->add_option("--sizes", sizes, "comma-separated N values");
    bench->add_option("--d", bd, "inner/head dimension");
    bench->add_option("--reps", reps, "timed repetitions (>= 5)");
    bench->add_option("--csv", csv, "also write results to this CSV file");
    bench->add_flag("--parallel", parallel, "let attention kernels use threads");

    CLI::App* demo = app.add_subcommand(
        "demo", "write reference and binary attention maps as CSV and PGM");
    std::size_t dn = 64, dd = 32;
    std::string dbias = "none";
    bool save_tensors = false;
    demo->add_option("--n", dn, "sequence length");
    demo->add_option("--d", dd, "head dimension");
    demo->add_option("--bias", dbias, "bias kind: none|dense|rel1d|rel2d")
        ->check(CLI::IsMember({"none", "dense", "rel1d", "rel2d"}));
    demo->add_flag("--save-tensors", save_tensors, "also write Q/K/V tensor files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << "\n";
        return 2;
    }

    try {
        if (*selftest) {
            set_max_threads(threads > 0 ? threads : 1);
            return run_selftest(seed, force_fail);
        }
        set_max_threads(threads); // 0 = hardware concurrency
        if (*theorem) return run_verify_theorem1(dim, rho, samples, seed);
        if (*fidelity) return run_fidelity(fn, fd, fbias, seed, fk, output);
        if (*bench) return run_bench_cmd(suite, sizes, bd, reps, seed, csv, parallel);
        if (*demo) return run_demo(dn, dd, dbias, seed, output, save_tensors);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
