#pragma once

#include "binattn/attention.hpp"
#include "binattn/tensor.hpp"

namespace binattn {

// Straight-through estimator for the sign quantizer: gradients pass
// unchanged where |x| <= clip_threshold and are zeroed outside (hard-tanh
// surrogate).
struct SteConfig {
    double clip_threshold = 1.0;
};

DenseMatrix ste_backward(const DenseMatrix& upstream, const DenseMatrix& x,
                         const SteConfig& cfg);

// Mean-squared-error distillation against a full-precision teacher output.
struct DistillationLoss {
    double value = 0.0;
    DenseMatrix gradient; // d value / d student, same shape as the outputs
};

DistillationLoss distillation_loss(const DenseMatrix& student_y,
                                   const DenseMatrix& teacher_y);

// Self-distillation objective over the dense bias: the student is the
// binary attention forward with bias table b (quantize_pv off), the teacher
// is the full-precision attention output without bias, held constant.
double distillation_bias_loss(const DenseMatrix& q, const DenseMatrix& k,
                              const DenseMatrix& v, const DenseMatrix& bias_table,
                              const AttentionConfig& cfg);

// Analytic d loss / d b through softmax and value aggregation. The binary
// scores are constant in b (sign has zero gradient a.e.), so this is the
// exact gradient of the smooth path.
DenseMatrix bias_gradient(const DenseMatrix& q, const DenseMatrix& k,
                          const DenseMatrix& v, const DenseMatrix& bias_table,
                          const AttentionConfig& cfg);

// Compares bias_gradient against central finite differences of
// distillation_bias_loss. Returns the max relative deviation; entries below
// eps in magnitude are compared at the eps scale.
double grad_check_bias(const DenseMatrix& q, const DenseMatrix& k, const DenseMatrix& v,
                       const DenseBias& bias, const AttentionConfig& cfg, double eps);

} // namespace binattn
