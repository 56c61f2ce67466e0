#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "salr/matrix.hpp"

namespace salr {

enum class DmatDtype : std::uint8_t { f32 = 0, f64 = 1 };

// DMAT layout, little-endian:
//   "DMAT" | version u16 = 1 | rows u32 | cols u32 | dtype u8 | row-major payload
inline constexpr std::uint16_t kDmatVersion = 1;
inline constexpr std::size_t kDmatHeaderBytes = 15;

struct DmatFile {
    DenseMatrix matrix;
    DmatDtype dtype = DmatDtype::f32;
};

std::vector<std::uint8_t> serialize_dmat(const DenseMatrix& m, DmatDtype dtype);
DmatFile parse_dmat(std::span<const std::uint8_t> bytes);

void write_dmat(const std::filesystem::path& path, const DenseMatrix& m,
                DmatDtype dtype = DmatDtype::f32);
DmatFile read_dmat(const std::filesystem::path& path);

} // namespace salr
