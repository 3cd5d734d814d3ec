#include "binattn/theory.hpp"

#include <cmath>
#include <numbers>

#include "binattn/bitops.hpp"
#include "binattn/parallel.hpp"
#include "binattn/rng.hpp"

namespace binattn {

namespace {

// Lower-triangular factor of a PSD matrix. Zero pivots (singular but valid
// covariances, e.g. q = k almost surely) produce a zero column as long as
// the residual column vanishes with them; a genuinely indefinite matrix
// makes the factorization report failure.
bool cholesky_psd(const std::vector<double>& a, std::size_t n,
                  std::vector<double>& l_out) {
    l_out.assign(n * n, 0.0);
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        max_diag = std::max(max_diag, std::fabs(a[i * n + i]));
    const double tol = 1e-12 * std::max(max_diag, 1.0);

    for (std::size_t k = 0; k < n; ++k) {
        double pivot = a[k * n + k];
        for (std::size_t p = 0; p < k; ++p) pivot -= l_out[k * n + p] * l_out[k * n + p];
        if (pivot > tol) {
            const double lkk = std::sqrt(pivot);
            l_out[k * n + k] = lkk;
            for (std::size_t i = k + 1; i < n; ++i) {
                double v = a[i * n + k];
                for (std::size_t p = 0; p < k; ++p)
                    v -= l_out[i * n + p] * l_out[k * n + p];
                l_out[i * n + k] = v / lkk;
            }
        } else if (pivot >= -tol) {
            // Rank-deficient direction: the whole residual column must vanish.
            l_out[k * n + k] = 0.0;
            for (std::size_t i = k + 1; i < n; ++i) {
                double v = a[i * n + k];
                for (std::size_t p = 0; p < k; ++p)
                    v -= l_out[i * n + p] * l_out[k * n + p];
                if (std::fabs(v) > 1e-7 * std::max(max_diag, 1.0)) return false;
                l_out[i * n + k] = 0.0;
            }
        } else {
            return false;
        }
    }
    return true;
}

std::vector<double> factor_with_jitter(const JointGaussianSpec& spec) {
    const std::size_t n = 2 * spec.dim();
    std::vector<double> l;
    if (cholesky_psd(spec.sigma_data(), n, l)) return l;
    std::vector<double> jittered = spec.sigma_data();
    for (std::size_t i = 0; i < n; ++i) jittered[i * n + i] += 1e-12;
    if (cholesky_psd(jittered, n, l)) return l;
    throw NumericalError("covariance not factorizable even with 1e-12 jitter");
}

constexpr std::size_t kChunk = 65536;

} // namespace

JointGaussianSpec::JointGaussianSpec(std::size_t dim, std::vector<double> sigma)
    : dim_(dim), sigma_(std::move(sigma)) {
    const std::size_t n = 2 * dim_;
    if (dim_ == 0) throw ShapeError("JointGaussianSpec: dimension must be >= 1");
    if (sigma_.size() != n * n)
        throw ShapeError("JointGaussianSpec: covariance must be 2d x 2d");
    for (double v : sigma_)
        if (!std::isfinite(v))
            throw ValidationError("JointGaussianSpec: non-finite covariance entry");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::fabs(sigma_[i * n + j] - sigma_[j * n + i]) > 1e-12)
                throw ValidationError("JointGaussianSpec: covariance not symmetric");
    for (std::size_t i = 0; i < n; ++i)
        if (!(sigma_[i * n + i] > 0.0))
            throw ValidationError("JointGaussianSpec: variances must be positive");
    // Eigenvalues >= -1e-10 <=> Sigma + 1e-10 I is PSD; probe by factorization.
    std::vector<double> shifted = sigma_;
    for (std::size_t i = 0; i < n; ++i) shifted[i * n + i] += 1e-10;
    std::vector<double> scratch;
    if (!cholesky_psd(shifted, n, scratch))
        throw ValidationError("JointGaussianSpec: covariance has eigenvalues below -1e-10");
}

DenseMatrix JointGaussianSpec::correlation() const {
    const std::size_t d = dim_;
    const std::size_t n = 2 * d;
    std::vector<double> c(d * d);
    for (std::size_t i = 0; i < d; ++i) {
        const double sq = std::sqrt(sigma_[i * n + i]);
        for (std::size_t j = 0; j < d; ++j) {
            const double sk = std::sqrt(sigma_[(d + j) * n + (d + j)]);
            double r = sigma_[i * n + (d + j)] / (sq * sk);
            r = std::clamp(r, -1.0, 1.0);
            c[i * d + j] = r;
        }
    }
    return DenseMatrix(d, d, std::move(c));
}

DenseMatrix arcsine_correlation(const DenseMatrix& c) {
    std::vector<double> out(c.size());
    for (std::size_t k = 0; k < c.size(); ++k) {
        double v = c.data()[k];
        if (std::fabs(v) > 1.0 + 1e-12)
            throw RangeError("arcsine_correlation: entry outside [-1, 1]");
        v = std::clamp(v, -1.0, 1.0);
        out[k] = 2.0 / std::numbers::pi * std::asin(v);
    }
    return DenseMatrix(c.rows(), c.cols(), std::move(out));
}

DenseMatrix monte_carlo_sign_covariance(const JointGaussianSpec& spec,
                                        std::size_t samples, std::uint64_t seed) {
    if (samples == 0) throw ValidationError("monte_carlo_sign_covariance: samples must be >= 1");
    const std::size_t d = spec.dim();
    const std::size_t n = 2 * d;
    const std::vector<double> l = factor_with_jitter(spec);

    const std::size_t chunks = (samples + kChunk - 1) / kChunk;
    // Per-chunk integer partials; exact, so reduction order is irrelevant,
    // but we still reduce in chunk order for clarity.
    std::vector<std::int64_t> partial(chunks * d * d, 0);

    parallel_for(chunks, 1, [&](std::size_t cb, std::size_t ce) {
        std::vector<double> g(n), z(n);
        for (std::size_t chunk = cb; chunk < ce; ++chunk) {
            std::mt19937_64 rng = make_rng(seed, chunk);
            GaussianSource gauss(rng);
            std::int64_t* acc = partial.data() + chunk * d * d;
            const std::size_t begin = chunk * kChunk;
            const std::size_t end = std::min(samples, begin + kChunk);
            for (std::size_t s = begin; s < end; ++s) {
                for (std::size_t i = 0; i < n; ++i) g[i] = gauss();
                for (std::size_t i = 0; i < n; ++i) {
                    double v = 0.0;
                    const double* lrow = l.data() + i * n;
                    for (std::size_t j = 0; j <= i; ++j) v += lrow[j] * g[j];
                    z[i] = v;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    const int si = z[i] >= 0.0 ? 1 : -1;
                    for (std::size_t j = 0; j < d; ++j) {
                        const int tj = z[d + j] >= 0.0 ? 1 : -1;
                        acc[i * d + j] += si * tj;
                    }
                }
            }
        }
    });

    std::vector<std::int64_t> total(d * d, 0);
    for (std::size_t chunk = 0; chunk < chunks; ++chunk)
        for (std::size_t k = 0; k < d * d; ++k)
            total[k] += partial[chunk * d * d + k];

    std::vector<double> mean(d * d);
    for (std::size_t k = 0; k < d * d; ++k)
        mean[k] = static_cast<double>(total[k]) / static_cast<double>(samples);
    return DenseMatrix(d, d, std::move(mean));
}

DenseMatrix monte_carlo_covariance(const JointGaussianSpec& spec,
                                   std::size_t samples, std::uint64_t seed) {
    if (samples == 0) throw ValidationError("monte_carlo_covariance: samples must be >= 1");
    const std::size_t n = 2 * spec.dim();
    const std::vector<double> l = factor_with_jitter(spec);

    const std::size_t chunks = (samples + kChunk - 1) / kChunk;
    std::vector<double> partial(chunks * n * n, 0.0);

    parallel_for(chunks, 1, [&](std::size_t cb, std::size_t ce) {
        std::vector<double> g(n), z(n);
        for (std::size_t chunk = cb; chunk < ce; ++chunk) {
            std::mt19937_64 rng = make_rng(seed, chunk);
            GaussianSource gauss(rng);
            double* acc = partial.data() + chunk * n * n;
            const std::size_t begin = chunk * kChunk;
            const std::size_t end = std::min(samples, begin + kChunk);
            for (std::size_t s = begin; s < end; ++s) {
                for (std::size_t i = 0; i < n; ++i) g[i] = gauss();
                for (std::size_t i = 0; i < n; ++i) {
                    double v = 0.0;
                    const double* lrow = l.data() + i * n;
                    for (std::size_t j = 0; j <= i; ++j) v += lrow[j] * g[j];
                    z[i] = v;
                }
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j) acc[i * n + j] += z[i] * z[j];
            }
        }
    });

    // Fixed chunk-order reduction keeps the floating-point sums reproducible.
    std::vector<double> total(n * n, 0.0);
    for (std::size_t chunk = 0; chunk < chunks; ++chunk)
        for (std::size_t k = 0; k < n * n; ++k)
            total[k] += partial[chunk * n * n + k];
    for (double& v : total) v /= static_cast<double>(samples);
    return DenseMatrix(n, n, std::move(total));
}

GeometryReport verify_geometry_identities(const DenseMatrix& q, const DenseMatrix& k,
                                          std::size_t trials, std::uint64_t seed) {
    if (q.cols() != k.cols())
        throw ShapeError("verify_geometry_identities: width mismatch");
    const std::size_t d = q.cols();
    const BitMatrix s = pack_signs(q);
    const BitMatrix t = pack_signs(k);

    std::mt19937_64 rng = make_rng(seed);
    GeometryReport rep;

    for (std::size_t trial = 0; trial < trials; ++trial) {
        const std::size_t i = rng() % q.rows();
        const std::size_t j = rng() % k.rows();
        const std::span<const double> qi = q.row(i);
        const std::span<const double> kj = k.row(j);

        double dot = 0.0, nq = 0.0, nk = 0.0, dist2 = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            dot += qi[c] * kj[c];
            nq += qi[c] * qi[c];
            nk += kj[c] * kj[c];
            const double diff = qi[c] - kj[c];
            dist2 += diff * diff;
        }
        const double scale = std::max({nq, nk, 1.0});
        rep.max_dev_euclidean = std::max(
            rep.max_dev_euclidean, std::fabs(dist2 - (nq + nk - 2.0 * dot)) / scale);

        if (nq > 0.0 && nk > 0.0) {
            double ndot = 0.0;
            const double inv_q = 1.0 / std::sqrt(nq);
            const double inv_k = 1.0 / std::sqrt(nk);
            for (std::size_t c = 0; c < d; ++c) ndot += (qi[c] * inv_q) * (kj[c] * inv_k);
            const double cos_theta = dot / (std::sqrt(nq) * std::sqrt(nk));
            rep.max_dev_cosine = std::max(rep.max_dev_cosine, std::fabs(ndot - cos_theta));
        } else {
            ++rep.skipped_zero_norm;
        }

        const std::int64_t bdot = xnor_popcount_dot(s, i, t, j);
        const std::uint64_t ham = hamming_distance(s, i, t, j);
        rep.max_dev_hamming = std::max(
            rep.max_dev_hamming,
            std::fabs(static_cast<double>(bdot) -
                      (static_cast<double>(d) - 2.0 * static_cast<double>(ham))));

        // Binary cosine: the +-1 vectors both have norm sqrt(d), so the
        // XNOR dot must equal d * cos(theta) with theta measured on the
        // unpacked sign vectors in ordinary real arithmetic.
        double sdot = 0.0, ns = 0.0, nt = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double si = static_cast<double>(s.sign(i, c));
            const double tj = static_cast<double>(t.sign(j, c));
            sdot += si * tj;
            ns += si * si;
            nt += tj * tj;
        }
        const double cos_bin = sdot / (std::sqrt(ns) * std::sqrt(nt));
        rep.max_dev_binary_cosine =
            std::max(rep.max_dev_binary_cosine,
                     std::fabs(static_cast<double>(bdot) - static_cast<double>(d) * cos_bin) /
                         std::max(1.0, std::fabs(static_cast<double>(bdot))));
        ++rep.pairs_checked;
    }
    return rep;
}

} // namespace binattn
