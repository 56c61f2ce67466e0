#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "salr/bitmap.hpp"
#include "salr/residual.hpp"

namespace salr {

// SALR container, little-endian throughout:
//
//   magic "SALR" | version u16 | d_in u32 | d_out u32 | dtype u8 | n_adapters u16
//   n_adapters × (rank u32, scale f32)
//   offset_bitmap u64 | offset_values u64 | offset_adapters u64
//   bitmap:   d_in × ⌈d_out/8⌉ bytes
//   values:   nnz × f32
//   adapters: for each adapter, A (d_in × rank) then B (rank × d_out), f32 row-major
inline constexpr std::uint16_t kContainerVersion = 1;

struct ContainerHeader {
    std::uint16_t version = kContainerVersion;
    std::uint32_t d_in = 0;
    std::uint32_t d_out = 0;
    ValueDtype dtype = ValueDtype::f32;
    struct AdapterInfo {
        std::uint32_t rank = 0;
        float scale = 1.0f;
    };
    std::vector<AdapterInfo> adapters;
    std::uint64_t offset_bitmap = 0;
    std::uint64_t offset_values = 0;
    std::uint64_t offset_adapters = 0;
};

struct SalrContainer {
    BitmapSparseMatrix weight;
    std::vector<AdapterPair> adapters;
};

std::size_t container_header_bytes(std::size_t n_adapters) noexcept;

struct ContainerSizes {
    std::size_t header = 0;
    std::size_t bitmap = 0;
    std::size_t values = 0;
    std::size_t adapters = 0;
    std::size_t total() const noexcept { return header + bitmap + values + adapters; }
};

/// Exact byte accounting of a container with f32 payloads.
ContainerSizes container_sizes(std::size_t d_in, std::size_t d_out, std::size_t nnz,
                               std::span<const std::size_t> adapter_ranks);

/// Adapter factors are stored as f32; values that are not exactly
/// representable are rounded. Throws ShapeError if an adapter does not match
/// the weight's dimensions.
std::vector<std::uint8_t> serialize_container(const BitmapSparseMatrix& weight,
                                              std::span<const AdapterPair> adapters);
/// Throws FormatError naming the offending section on bad magic, version,
/// dtype, offsets or truncation.
SalrContainer parse_container(std::span<const std::uint8_t> bytes);
ContainerHeader parse_container_header(std::span<const std::uint8_t> bytes);

void write_container(const std::filesystem::path& path, const BitmapSparseMatrix& weight,
                     std::span<const AdapterPair> adapters);
SalrContainer read_container(const std::filesystem::path& path);

/// dense_bytes / (nnz·bytes_per_value + d·⌈k/8⌉ + adapter_params·bytes_per_value + header_bytes)
/// with nnz = ⌈(1 − p)·d·k⌉ and dense_bytes = d·k·bytes_per_value.
double compression_ratio(std::size_t d, std::size_t k, double p, std::size_t bytes_per_value,
                         std::size_t adapter_params, std::size_t header_bytes);
/// Same accounting for a measured nonzero count.
double compression_ratio_for_nnz(std::size_t d, std::size_t k, std::size_t nnz,
                                 std::size_t bytes_per_value, std::size_t adapter_params,
                                 std::size_t header_bytes);

} // namespace salr
