#include "binattn/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace binattn {

static_assert(std::endian::native == std::endian::little,
              "tensor file IO assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'B', 'A', 'T', 'F'};

struct Header {
    Dtype dtype;
    std::uint64_t rows;
    std::uint64_t cols;
};

void write_header(std::ostream& os, Dtype dtype, std::uint64_t rows,
                  std::uint64_t cols) {
    os.write(kMagic, 4);
    const std::uint32_t version = kTensorFileVersion;
    os.write(reinterpret_cast<const char*>(&version), 4);
    const std::uint8_t dt = static_cast<std::uint8_t>(dtype);
    const std::uint8_t ndim = 2;
    os.write(reinterpret_cast<const char*>(&dt), 1);
    os.write(reinterpret_cast<const char*>(&ndim), 1);
    const std::uint64_t dims[2] = {rows, cols};
    os.write(reinterpret_cast<const char*>(dims), 16);
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    return os;
}

void finish_write(std::ostream& os, const std::filesystem::path& path) {
    os.flush();
    if (!os) throw IoError("write failed: " + path.string());
}

template <typename T>
void read_exact(std::istream& is, T* out, std::size_t count) {
    is.read(reinterpret_cast<char*>(out), static_cast<std::streamsize>(count * sizeof(T)));
    if (is.gcount() != static_cast<std::streamsize>(count * sizeof(T)))
        throw FormatError("truncated tensor file");
}

Header read_header(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("bad magic");
    std::uint32_t version = 0;
    read_exact(is, &version, 1);
    if (version != kTensorFileVersion) throw FormatError("unsupported version");
    std::uint8_t dt = 0, ndim = 0;
    read_exact(is, &dt, 1);
    read_exact(is, &ndim, 1);
    if (dt > 4) throw FormatError("unknown dtype code");
    if (ndim != 2) throw FormatError("expected a 2-d tensor");
    std::uint64_t dims[2];
    read_exact(is, dims, 2);
    // Guard against absurd headers before allocating.
    if (dims[0] != 0 && dims[1] > std::numeric_limits<std::uint64_t>::max() / dims[0])
        throw FormatError("dimension overflow");
    if (dims[0] * dims[1] > (std::uint64_t{1} << 34))
        throw FormatError("tensor too large");
    return Header{static_cast<Dtype>(dt), dims[0], dims[1]};
}

void expect_eof(std::istream& is) {
    char extra;
    is.read(&extra, 1);
    if (is.gcount() != 0) throw FormatError("trailing bytes after payload");
}

} // namespace

void write_tensor(const std::filesystem::path& path, const DenseMatrix& m) {
    auto os = open_out(path);
    write_header(os, m.storage(), m.rows(), m.cols());
    if (m.storage() == Dtype::f32) {
        std::vector<float> buf(m.size());
        for (std::size_t k = 0; k < buf.size(); ++k)
            buf[k] = static_cast<float>(m.data()[k]);
        os.write(reinterpret_cast<const char*>(buf.data()),
                 static_cast<std::streamsize>(buf.size() * 4));
    } else {
        os.write(reinterpret_cast<const char*>(m.data().data()),
                 static_cast<std::streamsize>(m.size() * 8));
    }
    finish_write(os, path);
}

void write_tensor(const std::filesystem::path& path, const BitMatrix& m) {
    auto os = open_out(path);
    write_header(os, Dtype::packed_bit, m.rows(), m.logical_cols());
    os.write(reinterpret_cast<const char*>(m.words().data()),
             static_cast<std::streamsize>(m.words().size() * 8));
    finish_write(os, path);
}

void write_tensor(const std::filesystem::path& path, const QuantizedValues& m) {
    auto os = open_out(path);
    write_header(os, Dtype::i8, m.rows(), m.cols());
    os.write(reinterpret_cast<const char*>(m.data().data()),
             static_cast<std::streamsize>(m.data().size()));
    os.write(reinterpret_cast<const char*>(m.channel_scales().data()),
             static_cast<std::streamsize>(m.channel_scales().size() * 8));
    finish_write(os, path);
}

void write_tensor(const std::filesystem::path& path, const QuantizedCoeffs& m) {
    auto os = open_out(path);
    write_header(os, Dtype::u8, m.rows(), m.cols());
    os.write(reinterpret_cast<const char*>(m.data().data()),
             static_cast<std::streamsize>(m.data().size()));
    finish_write(os, path);
}

TensorVariant read_tensor(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    const Header h = read_header(is);
    const std::size_t rows = h.rows;
    const std::size_t cols = h.cols;
    const std::size_t count = rows * cols;

    switch (h.dtype) {
        case Dtype::f32: {
            std::vector<float> buf(count);
            read_exact(is, buf.data(), count);
            expect_eof(is);
            std::vector<double> data(count);
            for (std::size_t k = 0; k < count; ++k) {
                if (!std::isfinite(buf[k])) throw FormatError("non-finite payload entry");
                data[k] = static_cast<double>(buf[k]);
            }
            return DenseMatrix(rows, cols, std::move(data), Dtype::f32);
        }
        case Dtype::f64: {
            std::vector<double> data(count);
            read_exact(is, data.data(), count);
            expect_eof(is);
            for (double v : data)
                if (!std::isfinite(v)) throw FormatError("non-finite payload entry");
            return DenseMatrix(rows, cols, std::move(data), Dtype::f64);
        }
        case Dtype::i8: {
            std::vector<std::int8_t> data(count);
            if (count > 0) read_exact(is, data.data(), count);
            std::vector<double> scales(cols);
            if (cols > 0) read_exact(is, scales.data(), cols);
            expect_eof(is);
            try {
                return QuantizedValues(rows, cols, std::move(data), std::move(scales));
            } catch (const Error& e) {
                throw FormatError(std::string("invalid int8 payload: ") + e.what());
            }
        }
        case Dtype::u8: {
            std::vector<std::uint8_t> data(count);
            if (count > 0) read_exact(is, data.data(), count);
            expect_eof(is);
            return QuantizedCoeffs(rows, cols, std::move(data));
        }
        case Dtype::packed_bit: {
            const std::size_t wpr = BitMatrix::words_needed(cols);
            std::vector<std::uint64_t> words(rows * wpr);
            if (!words.empty()) read_exact(is, words.data(), words.size());
            expect_eof(is);
            // Canonical form: reject nonzero pad bits rather than silently masking.
            if (cols % 64 != 0 && wpr > 0) {
                const std::uint64_t mask = (std::uint64_t{1} << (cols % 64)) - 1;
                for (std::size_t r = 0; r < rows; ++r)
                    if (words[r * wpr + wpr - 1] & ~mask)
                        throw FormatError("nonzero pad bits in packed-bit payload");
            }
            return BitMatrix(rows, cols, std::move(words));
        }
    }
    throw FormatError("unknown dtype code");
}

} // namespace binattn
