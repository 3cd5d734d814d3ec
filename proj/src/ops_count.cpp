#include "binattn/ops_count.hpp"

namespace binattn {

namespace {
OpCounters g_counters;
std::atomic<bool> g_enabled{false};
}

OpCounters& op_counters() { return g_counters; }

bool op_counting_enabled() { return g_enabled.load(std::memory_order_relaxed); }

void set_op_counting(bool on) { g_enabled.store(on, std::memory_order_relaxed); }

} // namespace binattn
