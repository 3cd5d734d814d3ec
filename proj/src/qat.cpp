#include "binattn/qat.hpp"

#include <cmath>

#include "binattn/parallel.hpp"

namespace binattn {

namespace {

void check_smooth_path(const AttentionConfig& cfg) {
    if (cfg.quantize_pv)
        throw ValidationError("bias gradient path requires quantize_pv off");
}

DenseMatrix teacher_output(const DenseMatrix& q, const DenseMatrix& k,
                           const DenseMatrix& v, const AttentionConfig& cfg) {
    AttentionConfig teacher_cfg = cfg;
    teacher_cfg.bias = BiasSpec{};
    return reference_attention(q, k, v, teacher_cfg).output;
}

AttentionConfig with_bias(const AttentionConfig& cfg, const DenseMatrix& table) {
    AttentionConfig out = cfg;
    out.bias = BiasSpec{DenseBias{table}};
    return out;
}

} // namespace

DenseMatrix ste_backward(const DenseMatrix& upstream, const DenseMatrix& x,
                         const SteConfig& cfg) {
    if (upstream.rows() != x.rows() || upstream.cols() != x.cols())
        throw ShapeError("ste_backward: shape mismatch");
    if (!(cfg.clip_threshold > 0.0))
        throw ValidationError("ste_backward: clip threshold must be positive");
    std::vector<double> grad(upstream.size());
    for (std::size_t t = 0; t < grad.size(); ++t)
        grad[t] = std::fabs(x.data()[t]) <= cfg.clip_threshold ? upstream.data()[t] : 0.0;
    return DenseMatrix(upstream.rows(), upstream.cols(), std::move(grad));
}

DistillationLoss distillation_loss(const DenseMatrix& student_y,
                                   const DenseMatrix& teacher_y) {
    if (student_y.rows() != teacher_y.rows() || student_y.cols() != teacher_y.cols())
        throw ShapeError("distillation_loss: shape mismatch");
    const double count = static_cast<double>(student_y.size());
    double sum = 0.0;
    std::vector<double> grad(student_y.size());
    for (std::size_t t = 0; t < grad.size(); ++t) {
        const double diff = student_y.data()[t] - teacher_y.data()[t];
        sum += diff * diff;
        grad[t] = 2.0 * diff / count;
    }
    return DistillationLoss{sum / count,
                            DenseMatrix(student_y.rows(), student_y.cols(), std::move(grad))};
}

double distillation_bias_loss(const DenseMatrix& q, const DenseMatrix& k,
                              const DenseMatrix& v, const DenseMatrix& bias_table,
                              const AttentionConfig& cfg) {
    check_smooth_path(cfg);
    const DenseMatrix teacher = teacher_output(q, k, v, cfg);
    const AttentionOutput out =
        binary_attention_unfused(q, k, v, with_bias(cfg, bias_table));
    return distillation_loss(out.output, teacher).value;
}

DenseMatrix bias_gradient(const DenseMatrix& q, const DenseMatrix& k,
                          const DenseMatrix& v, const DenseMatrix& bias_table,
                          const AttentionConfig& cfg) {
    check_smooth_path(cfg);
    const std::size_t n = cfg.seq_len;
    const std::size_t d = cfg.head_dim;
    if (bias_table.rows() != n || bias_table.cols() != n)
        throw ShapeError("bias_gradient: bias table must be N x N");

    const DenseMatrix teacher = teacher_output(q, k, v, cfg);
    const AttentionOutput out =
        binary_attention_unfused(q, k, v, with_bias(cfg, bias_table), /*with_probs=*/true);
    const DenseMatrix& p = *out.probs;
    const DistillationLoss loss = distillation_loss(out.output, teacher);

    // dL/dP = U V^T, then the softmax Jacobian per row:
    // dL/dS_ij = P_ij (dL/dP_ij - sum_j' dL/dP_ij' P_ij'), and dL/db = dL/dS.
    std::vector<double> grad(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> dldp(n);
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) acc += loss.gradient(i, c) * v(j, c);
            dldp[j] = acc;
        }
        double inner = 0.0;
        for (std::size_t j = 0; j < n; ++j) inner += dldp[j] * p(i, j);
        for (std::size_t j = 0; j < n; ++j)
            grad[i * n + j] = p(i, j) * (dldp[j] - inner);
    }
    return DenseMatrix(n, n, std::move(grad));
}

double grad_check_bias(const DenseMatrix& q, const DenseMatrix& k, const DenseMatrix& v,
                       const DenseBias& bias, const AttentionConfig& cfg, double eps) {
    check_smooth_path(cfg);
    if (!(eps >= 1e-7 && eps <= 1e-3))
        throw ValidationError("grad_check_bias: eps must be in [1e-7, 1e-3]");
    const std::size_t n = cfg.seq_len;
    if (bias.table.rows() != n || bias.table.cols() != n)
        throw ShapeError("grad_check_bias: bias table must be N x N");

    const DenseMatrix analytic = bias_gradient(q, k, v, bias.table, cfg);

    std::vector<double> base(bias.table.data().begin(), bias.table.data().end());
    std::vector<double> dev(n * n, 0.0);
    parallel_for(n * n, 4, [&](std::size_t b, std::size_t e) {
        std::vector<double> table = base;
        for (std::size_t t = b; t < e; ++t) {
            table[t] = base[t] + eps;
            const double lp =
                distillation_bias_loss(q, k, v, DenseMatrix(n, n, table), cfg);
            table[t] = base[t] - eps;
            const double lm =
                distillation_bias_loss(q, k, v, DenseMatrix(n, n, table), cfg);
            table[t] = base[t];
            const double fd = (lp - lm) / (2.0 * eps);
            const double g = analytic.data()[t];
            dev[t] = std::fabs(g - fd) / std::max({std::fabs(g), std::fabs(fd), eps});
        }
    });

    double max_dev = 0.0;
    for (double x : dev) max_dev = std::max(max_dev, x);
    return max_dev;
}

} // namespace binattn
