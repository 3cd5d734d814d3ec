#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace binattn {

struct BenchShape {
    std::size_t n = 0;
    std::size_t m = 0;
    std::size_t d = 0;
};

struct BenchResult {
    std::string kernel;
    BenchShape shape;
    std::size_t reps = 0;
    std::size_t warmups = 0;
    double median_ns = 0.0;
    double ops = 0.0; // folded OPs (binary/64, int8/2, flops as-is)
    double ops_per_sec = 0.0;
};

// Known suites: "gemm" (naive_f32_gemm, int8_gemm, binary_gemm) and
// "attention" (reference_attention, binary_attention_fused). Each kernel is
// checked against its oracle on a small instance before any timing, so the
// benchmarked code paths are the tested ones. Kernel benches run
// single-threaded; allow_parallel lets the attention kernels use the
// library's internal parallelism.
std::vector<BenchResult> run_bench(const std::string& suite,
                                   const std::vector<BenchShape>& shapes,
                                   std::size_t reps, std::uint64_t seed,
                                   bool allow_parallel = false);

} // namespace binattn
