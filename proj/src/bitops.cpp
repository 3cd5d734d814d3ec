#include "binattn/bitops.hpp"

#include <bit>

#include "binattn/ops_count.hpp"
#include "binattn/parallel.hpp"

namespace binattn {

namespace {

inline std::uint64_t width_tail_mask(std::size_t d) {
    const std::size_t rem = d % 64;
    return rem == 0 ? ~std::uint64_t{0} : ((std::uint64_t{1} << rem) - 1);
}

inline void check_same_width(std::size_t da, std::size_t db) {
    if (da != db) throw ShapeError("bitops: logical width mismatch");
}

// Popcount of XNOR over one row pair. Pad bits of canonical rows are zero in
// both operands, so XNOR makes them agree; the final word is re-masked anyway
// so non-canonical input cannot leak into the count.
inline std::uint64_t agree_count(const std::uint64_t* a, const std::uint64_t* b,
                                 std::size_t words, std::uint64_t tail) {
    std::uint64_t agree = 0;
    for (std::size_t w = 0; w + 1 < words; ++w)
        agree += static_cast<std::uint64_t>(std::popcount(~(a[w] ^ b[w])));
    if (words > 0)
        agree += static_cast<std::uint64_t>(
            std::popcount(~(a[words - 1] ^ b[words - 1]) & tail));
    return agree;
}

} // namespace

BitMatrix pack_signs(const DenseMatrix& m) {
    const std::size_t rows = m.rows();
    const std::size_t d = m.cols();
    const std::size_t wpr = BitMatrix::words_needed(d);
    std::vector<std::uint64_t> words(rows * wpr, 0);
    for (std::size_t i = 0; i < rows; ++i) {
        std::uint64_t* out = words.data() + i * wpr;
        for (std::size_t c = 0; c < d; ++c) {
            if (m(i, c) >= 0.0) out[c / 64] |= std::uint64_t{1} << (c % 64);
        }
    }
    return BitMatrix(rows, d, std::move(words));
}

DenseMatrix unpack_signs(const BitMatrix& b) {
    std::vector<double> data(b.rows() * b.logical_cols());
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t c = 0; c < b.logical_cols(); ++c)
            data[i * b.logical_cols() + c] = static_cast<double>(b.sign(i, c));
    return DenseMatrix(b.rows(), b.logical_cols(), std::move(data));
}

std::int64_t xnor_popcount_dot(std::span<const std::uint64_t> a,
                               std::span<const std::uint64_t> b, std::size_t d) {
    const std::size_t words = BitMatrix::words_needed(d);
    if (a.size() != words || b.size() != words)
        throw ShapeError("xnor_popcount_dot: span length != ceil(d/64)");
    const std::uint64_t agree = agree_count(a.data(), b.data(), words, width_tail_mask(d));
    count_bops(2 * static_cast<std::uint64_t>(d));
    return 2 * static_cast<std::int64_t>(agree) - static_cast<std::int64_t>(d);
}

std::int64_t xnor_popcount_dot(const BitMatrix& a, std::size_t i,
                               const BitMatrix& b, std::size_t j) {
    check_same_width(a.logical_cols(), b.logical_cols());
    return xnor_popcount_dot(a.row(i), b.row(j), a.logical_cols());
}

std::uint64_t hamming_distance(std::span<const std::uint64_t> a,
                               std::span<const std::uint64_t> b, std::size_t d) {
    const std::size_t words = BitMatrix::words_needed(d);
    if (a.size() != words || b.size() != words)
        throw ShapeError("hamming_distance: span length != ceil(d/64)");
    const std::uint64_t tail = width_tail_mask(d);
    std::uint64_t diff = 0;
    for (std::size_t w = 0; w + 1 < words; ++w)
        diff += static_cast<std::uint64_t>(std::popcount(a[w] ^ b[w]));
    if (words > 0)
        diff += static_cast<std::uint64_t>(
            std::popcount((a[words - 1] ^ b[words - 1]) & tail));
    return diff;
}

std::uint64_t hamming_distance(const BitMatrix& a, std::size_t i,
                               const BitMatrix& b, std::size_t j) {
    check_same_width(a.logical_cols(), b.logical_cols());
    return hamming_distance(a.row(i), b.row(j), a.logical_cols());
}

Int32Matrix binary_gemm(const BitMatrix& s, const BitMatrix& t) {
    check_same_width(s.logical_cols(), t.logical_cols());
    const std::size_t n = s.rows();
    const std::size_t m = t.rows();
    const std::size_t d = s.logical_cols();
    const std::size_t words = s.words_per_row();
    const std::uint64_t tail = width_tail_mask(d);
    const std::int64_t id = static_cast<std::int64_t>(d);

    Int32Matrix out;
    out.rows = n;
    out.cols = m;
    out.data.assign(n * m, 0);

    // Block over t rows so a stripe of T stays cache-resident while the
    // outer rows stream.
    constexpr std::size_t kColBlock = 64;

    parallel_for(n, 8, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t j0 = 0; j0 < m; j0 += kColBlock) {
            const std::size_t j1 = std::min(m, j0 + kColBlock);
            for (std::size_t i = r0; i < r1; ++i) {
                const std::uint64_t* srow = s.row(i).data();
                std::int32_t* orow = out.data.data() + i * m;
                for (std::size_t j = j0; j < j1; ++j) {
                    const std::uint64_t agree =
                        agree_count(srow, t.row(j).data(), words, tail);
                    orow[j] = static_cast<std::int32_t>(
                        2 * static_cast<std::int64_t>(agree) - id);
                }
            }
        }
    });
    count_bops(2 * static_cast<std::uint64_t>(n) * m * d);
    return out;
}

} // namespace binattn
