#include "salr/container.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "byte_io.hpp"
#include "salr/error.hpp"
#include "salr/prune.hpp"

namespace salr {

namespace {

constexpr std::size_t kFixedHeaderBytes = 4 + 2 + 4 + 4 + 1 + 2;
constexpr std::size_t kAdapterInfoBytes = 4 + 4;
constexpr std::size_t kOffsetBytes = 3 * 8;

void put_matrix_f32(detail::ByteWriter& w, const DenseMatrix& m) {
    for (double v : m.data()) w.put<float>(static_cast<float>(v));
}

DenseMatrix get_matrix_f32(detail::ByteReader& r, std::size_t rows, std::size_t cols) {
    DenseMatrix m(rows, cols);
    for (double& v : m.data()) {
        v = static_cast<double>(r.get<float>("adapters"));
        if (!std::isfinite(v)) throw FormatError("SALR: non-finite value in adapters section");
    }
    return m;
}

} // namespace

std::size_t container_header_bytes(std::size_t n_adapters) noexcept {
    return kFixedHeaderBytes + n_adapters * kAdapterInfoBytes + kOffsetBytes;
}

ContainerSizes container_sizes(std::size_t d_in, std::size_t d_out, std::size_t nnz,
                               std::span<const std::size_t> adapter_ranks) {
    ContainerSizes s;
    s.header = container_header_bytes(adapter_ranks.size());
    s.bitmap = d_in * ((d_out + 7) / 8);
    s.values = nnz * sizeof(float);
    for (std::size_t r : adapter_ranks) s.adapters += r * (d_in + d_out) * sizeof(float);
    return s;
}

std::vector<std::uint8_t> serialize_container(const BitmapSparseMatrix& weight,
                                              std::span<const AdapterPair> adapters) {
    if (weight.rows() > UINT32_MAX || weight.cols() > UINT32_MAX)
        throw DomainError("SALR: dimensions exceed u32");
    if (adapters.size() > UINT16_MAX) throw DomainError("SALR: too many adapters");
    std::vector<std::size_t> ranks;
    for (std::size_t i = 0; i < adapters.size(); ++i) {
        const auto& ad = adapters[i];
        ad.validate();
        if (ad.d_in() != weight.rows() || ad.d_out() != weight.cols())
            throw ShapeError("SALR: adapter " + std::to_string(i) + " does not match weight shape");
        ranks.push_back(ad.rank());
    }
    const ContainerSizes sizes = container_sizes(weight.rows(), weight.cols(), weight.nnz(), ranks);

    std::vector<std::uint8_t> out;
    out.reserve(sizes.total());
    detail::ByteWriter w(out);
    w.put_bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("SALR"), 4));
    w.put<std::uint16_t>(kContainerVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(weight.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(weight.cols()));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(ValueDtype::f32));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(adapters.size()));
    for (const auto& ad : adapters) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(ad.rank()));
        w.put<float>(static_cast<float>(ad.scale));
    }
    const std::uint64_t off_bitmap = sizes.header;
    const std::uint64_t off_values = off_bitmap + sizes.bitmap;
    const std::uint64_t off_adapters = off_values + sizes.values;
    w.put<std::uint64_t>(off_bitmap);
    w.put<std::uint64_t>(off_values);
    w.put<std::uint64_t>(off_adapters);

    w.put_bytes(weight.bitmap());
    for (float v : weight.values()) w.put<float>(v);
    for (const auto& ad : adapters) {
        put_matrix_f32(w, ad.a);
        put_matrix_f32(w, ad.b);
    }
    if (out.size() != sizes.total())
        throw InternalError("SALR: serialized size disagrees with accounting");
    return out;
}

ContainerHeader parse_container_header(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes, "SALR");
    auto magic = r.take(4, "header");
    if (std::memcmp(magic.data(), "SALR", 4) != 0) throw FormatError("SALR: bad magic in header section");
    ContainerHeader h;
    h.version = r.get<std::uint16_t>("header");
    if (h.version != kContainerVersion)
        throw FormatError("SALR: unsupported version " + std::to_string(h.version) + " in header section");
    h.d_in = r.get<std::uint32_t>("header");
    h.d_out = r.get<std::uint32_t>("header");
    const auto dtype = r.get<std::uint8_t>("header");
    if (dtype == static_cast<std::uint8_t>(ValueDtype::f16))
        throw FormatError("SALR: f16 value payloads are reserved but not supported");
    if (dtype != static_cast<std::uint8_t>(ValueDtype::f32))
        throw FormatError("SALR: unknown dtype code " + std::to_string(dtype) + " in header section");
    h.dtype = ValueDtype::f32;
    const auto n = r.get<std::uint16_t>("header");
    h.adapters.resize(n);
    for (auto& info : h.adapters) {
        info.rank = r.get<std::uint32_t>("adapter table");
        info.scale = r.get<float>("adapter table");
        if (!std::isfinite(info.scale)) throw FormatError("SALR: non-finite scale in adapter table section");
    }
    h.offset_bitmap = r.get<std::uint64_t>("offset table");
    h.offset_values = r.get<std::uint64_t>("offset table");
    h.offset_adapters = r.get<std::uint64_t>("offset table");
    return h;
}

SalrContainer parse_container(std::span<const std::uint8_t> bytes) {
    const ContainerHeader h = parse_container_header(bytes);
    const std::size_t header_bytes = container_header_bytes(h.adapters.size());
    const std::size_t bitmap_bytes = std::size_t{h.d_in} * ((std::size_t{h.d_out} + 7) / 8);
    if (h.offset_bitmap != header_bytes)
        throw FormatError("SALR: bitmap section offset does not follow the header");
    if (h.offset_values != h.offset_bitmap + bitmap_bytes)
        throw FormatError("SALR: values section offset overlaps or leaves a gap after the bitmap");
    if (h.offset_adapters < h.offset_values || (h.offset_adapters - h.offset_values) % sizeof(float) != 0)
        throw FormatError("SALR: adapters section offset is not monotone after values");

    detail::ByteReader r(bytes, "SALR");
    r.seek(h.offset_bitmap, "bitmap");
    auto bitmap_span = r.take(bitmap_bytes, "bitmap");
    std::vector<std::uint8_t> bitmap(bitmap_span.begin(), bitmap_span.end());

    std::uint64_t nnz = 0;
    for (auto m : bitmap) nnz += popcount8(m);
    if (h.offset_adapters - h.offset_values != nnz * sizeof(float))
        throw FormatError("SALR: values section length does not match bitmap popcount");
    r.seek(h.offset_values, "values");
    std::vector<float> values(nnz);
    for (float& v : values) v = r.get<float>("values");

    SalrContainer c;
    try {
        c.weight = BitmapSparseMatrix(h.d_in, h.d_out, std::move(bitmap), std::move(values));
    } catch (const CorruptionError& e) {
        throw FormatError(std::string("SALR: invalid bitmap/values sections: ") + e.what());
    }

    r.seek(h.offset_adapters, "adapters");
    for (const auto& info : h.adapters) {
        if (info.rank > std::min(h.d_in, h.d_out))
            throw FormatError("SALR: adapter rank exceeds min(d_in, d_out) in adapter table section");
        AdapterPair ad;
        ad.a = get_matrix_f32(r, h.d_in, info.rank);
        ad.b = get_matrix_f32(r, info.rank, h.d_out);
        ad.scale = static_cast<double>(info.scale);
        c.adapters.push_back(std::move(ad));
    }
    if (r.remaining() != 0) throw FormatError("SALR: trailing bytes after adapters section");
    return c;
}

void write_container(const std::filesystem::path& path, const BitmapSparseMatrix& weight,
                     std::span<const AdapterPair> adapters) {
    detail::write_file(path.string(), serialize_container(weight, adapters), "SALR");
}

SalrContainer read_container(const std::filesystem::path& path) {
    return parse_container(detail::read_file(path.string(), "SALR"));
}

double compression_ratio(std::size_t d, std::size_t k, double p, std::size_t bytes_per_value,
                         std::size_t adapter_params, std::size_t header_bytes) {
    return compression_ratio_for_nnz(d, k, kept_entries(p, d * k), bytes_per_value, adapter_params,
                                     header_bytes);
}

double compression_ratio_for_nnz(std::size_t d, std::size_t k, std::size_t nnz,
                                 std::size_t bytes_per_value, std::size_t adapter_params,
                                 std::size_t header_bytes) {
    if (bytes_per_value == 0) throw DomainError("bytes_per_value must be > 0");
    if (nnz > d * k) throw DomainError("nnz exceeds d*k");
    const double bpv = static_cast<double>(bytes_per_value);
    const double dense = static_cast<double>(d) * static_cast<double>(k) * bpv;
    const double sparse = static_cast<double>(nnz) * bpv + static_cast<double>(d * ((k + 7) / 8)) +
                          static_cast<double>(adapter_params) * bpv +
                          static_cast<double>(header_bytes);
    return dense / sparse;
}

} // namespace salr
