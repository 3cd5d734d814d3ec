#pragma once

#include <cstdint>
#include <vector>

#include "binattn/tensor.hpp"

namespace binattn {

// Joint zero-mean Gaussian (q, k) in R^d each, described by the 2d x 2d
// covariance of z = (q, k). Exposes the cross-correlation matrix
// C = Dq^{-1/2} Sigma_qk Dk^{-1/2} used by the arcsine identity.
class JointGaussianSpec {
public:
    // sigma: row-major 2d x 2d, symmetric within 1e-12, eigenvalues >= -1e-10,
    // strictly positive variances on the diagonal.
    JointGaussianSpec(std::size_t dim, std::vector<double> sigma);

    std::size_t dim() const { return dim_; }
    double sigma(std::size_t i, std::size_t j) const { return sigma_[i * 2 * dim_ + j]; }
    const std::vector<double>& sigma_data() const { return sigma_; }

    // C entries, clamped to [-1, 1].
    DenseMatrix correlation() const;

private:
    std::size_t dim_;
    std::vector<double> sigma_; // 2d x 2d
};

// Element-wise (2/pi) * arcsin. Entries must lie in [-1, 1] up to 1e-12
// (clamped); anything further out raises RangeError.
DenseMatrix arcsine_correlation(const DenseMatrix& c);

// Empirical mean of sign(q) sign(k)^T over m samples of z ~ N(0, Sigma),
// drawn through a pivot-tolerant Cholesky factor (diagonal jitter 1e-12 as
// a fallback). Sampling is split into fixed-size chunks with independent
// sub-streams, so results are bit-identical for every thread count.
DenseMatrix monte_carlo_sign_covariance(const JointGaussianSpec& spec,
                                        std::size_t samples, std::uint64_t seed);

// Empirical covariance of z itself; validates the sampler independently of
// the sign statistics.
DenseMatrix monte_carlo_covariance(const JointGaussianSpec& spec,
                                   std::size_t samples, std::uint64_t seed);

struct GeometryReport {
    double max_dev_euclidean = 0.0;     // ||q-k||^2 expansion
    double max_dev_cosine = 0.0;        // normalized dot vs cos(theta)
    double max_dev_hamming = 0.0;       // s.t vs d - 2*hamming (exact: 0)
    double max_dev_binary_cosine = 0.0; // s.t vs d*cos(theta_binary)
    std::size_t pairs_checked = 0;
    std::size_t skipped_zero_norm = 0;
};

// Samples (i, j) pairs and evaluates both sides of the Euclidean expansion,
// the cosine identity, and the binary-domain Hamming/cosine identities.
GeometryReport verify_geometry_identities(const DenseMatrix& q, const DenseMatrix& k,
                                          std::size_t trials, std::uint64_t seed);

} // namespace binattn
