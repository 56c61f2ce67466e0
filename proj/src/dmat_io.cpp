#include "salr/dmat_io.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "byte_io.hpp"
#include "salr/error.hpp"

namespace salr {

namespace detail {

std::vector<std::uint8_t> read_file(const std::string& path, const char* format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(std::string(format) + ": cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes, const char* format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(std::string(format) + ": cannot create '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError(std::string(format) + ": write failed for '" + path + "'");
}

} // namespace detail

std::vector<std::uint8_t> serialize_dmat(const DenseMatrix& m, DmatDtype dtype) {
    if (m.rows() > UINT32_MAX || m.cols() > UINT32_MAX)
        throw DomainError("DMAT: dimensions exceed u32");
    if (!m.all_finite()) throw DomainError("DMAT: matrix has non-finite entries");
    std::vector<std::uint8_t> out;
    const std::size_t width = dtype == DmatDtype::f32 ? 4 : 8;
    out.reserve(kDmatHeaderBytes + m.size() * width);
    detail::ByteWriter w(out);
    w.put_bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("DMAT"), 4));
    w.put<std::uint16_t>(kDmatVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.cols()));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(dtype));
    for (double v : m.data()) {
        if (dtype == DmatDtype::f32)
            w.put<float>(static_cast<float>(v));
        else
            w.put<double>(v);
    }
    return out;
}

DmatFile parse_dmat(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes, "DMAT");
    auto magic = r.take(4, "header");
    if (std::memcmp(magic.data(), "DMAT", 4) != 0) throw FormatError("DMAT: bad magic in header");
    const auto version = r.get<std::uint16_t>("header");
    if (version != kDmatVersion)
        throw FormatError("DMAT: unsupported version " + std::to_string(version));
    const auto rows = r.get<std::uint32_t>("header");
    const auto cols = r.get<std::uint32_t>("header");
    const auto code = r.get<std::uint8_t>("header");
    if (code > 1) throw FormatError("DMAT: unknown dtype code " + std::to_string(code));
    const auto dtype = static_cast<DmatDtype>(code);
    const std::size_t width = dtype == DmatDtype::f32 ? 4 : 8;
    const std::size_t count = std::size_t{rows} * cols;
    if (count > r.remaining() / width)
        throw FormatError("DMAT: truncated in payload section");

    std::vector<double> data(count);
    for (double& v : data) {
        v = dtype == DmatDtype::f32 ? static_cast<double>(r.get<float>("payload"))
                                    : r.get<double>("payload");
        if (!std::isfinite(v)) throw FormatError("DMAT: non-finite value in payload section");
    }
    if (r.remaining() != 0) throw FormatError("DMAT: trailing bytes after payload section");
    return {DenseMatrix(rows, cols, std::move(data)), dtype};
}

void write_dmat(const std::filesystem::path& path, const DenseMatrix& m, DmatDtype dtype) {
    detail::write_file(path.string(), serialize_dmat(m, dtype), "DMAT");
}

DmatFile read_dmat(const std::filesystem::path& path) {
    const auto bytes = detail::read_file(path.string(), "DMAT");
    return parse_dmat(bytes);
}

} // namespace salr
