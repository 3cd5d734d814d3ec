#pragma once

#include <atomic>
#include <cstdint>

namespace binattn {

// Instrumented operation counters. Kernels increment these when counting is
// enabled; the fidelity module compares the totals against its analytic
// formulas. A multiply-accumulate counts as 2 ops in its native category.
//
// Categories:
//   bops      - binary (XNOR/popcount) multiply-accumulates x2
//   int8_ops  - 8-bit integer multiply-accumulates x2
//   flops     - floating-point ops on the matmul/softmax critical path
//   pre_flops - quantization pre/post-processing (means, scales, rounding,
//               output dequantization); itemized separately and excluded
//               from headline totals by default
//
// Tiling bookkeeping (running-max compares, accumulator rescales) and
// diagnostics-only work are not counted anywhere.
struct OpCounters {
    std::atomic<std::uint64_t> bops{0};
    std::atomic<std::uint64_t> int8_ops{0};
    std::atomic<std::uint64_t> flops{0};
    std::atomic<std::uint64_t> pre_flops{0};

    void reset() {
        bops.store(0, std::memory_order_relaxed);
        int8_ops.store(0, std::memory_order_relaxed);
        flops.store(0, std::memory_order_relaxed);
        pre_flops.store(0, std::memory_order_relaxed);
    }
};

OpCounters& op_counters();
bool op_counting_enabled();
void set_op_counting(bool on);

inline void count_bops(std::uint64_t n) {
    if (op_counting_enabled())
        op_counters().bops.fetch_add(n, std::memory_order_relaxed);
}
inline void count_int8_ops(std::uint64_t n) {
    if (op_counting_enabled())
        op_counters().int8_ops.fetch_add(n, std::memory_order_relaxed);
}
inline void count_flops(std::uint64_t n) {
    if (op_counting_enabled())
        op_counters().flops.fetch_add(n, std::memory_order_relaxed);
}
inline void count_pre_flops(std::uint64_t n) {
    if (op_counting_enabled())
        op_counters().pre_flops.fetch_add(n, std::memory_order_relaxed);
}

} // namespace binattn
