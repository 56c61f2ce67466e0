#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "salr/matrix.hpp"

namespace salr {

constexpr unsigned popcount8(std::uint8_t m) noexcept { return static_cast<unsigned>(std::popcount(m)); }

/// For each byte mask, entry t is the index of bit t among the set bits of
/// the mask (counting from bit 0), or −1 when bit t is clear.
struct DecodeLut {
    std::array<std::array<std::int8_t, 8>, 256> table{};

    constexpr const std::array<std::int8_t, 8>& operator[](std::uint8_t mask) const noexcept {
        return table[mask];
    }
};

constexpr DecodeLut build_lut() noexcept {
    DecodeLut lut;
    for (unsigned mask = 0; mask < 256; ++mask) {
        std::int8_t next = 0;
        for (unsigned t = 0; t < 8; ++t)
            lut.table[mask][t] = ((mask >> t) & 1u) ? next++ : std::int8_t{-1};
    }
    return lut;
}

inline constexpr DecodeLut kDecodeLut = build_lut();

/// Storage type of the compact value array. Only f32 payloads are written;
/// the f16 code is reserved by the container format.
enum class ValueDtype : std::uint8_t { f32 = 0, f16 = 1 };

/// Bitmap-encoded sparse matrix: one bit per entry (bit t of byte b in row i
/// covers column 8b + t), plus the nonzero values in row-major order.
/// Immutable after construction; per-block nnz offsets are rebuilt on load.
class BitmapSparseMatrix {
public:
    BitmapSparseMatrix() = default;
    /// Validates the structure and builds the block index. Throws
    /// CorruptionError when bitmap and values disagree, padding bits are set,
    /// or a stored value is zero or non-finite.
    BitmapSparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> bitmap,
                       std::vector<float> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t bytes_per_row() const noexcept { return bytes_per_row_; }
    std::size_t nnz() const noexcept { return values_.size(); }
    double density() const noexcept;

    std::span<const std::uint8_t> bitmap() const noexcept { return bitmap_; }
    std::span<const float> values() const noexcept { return values_; }
    std::uint8_t mask(std::size_t row, std::size_t block) const noexcept {
        return bitmap_[row * bytes_per_row_ + block];
    }
    /// Index into values() of the first nonzero of byte block (row, block).
    std::size_t value_offset(std::size_t row, std::size_t block) const noexcept {
        return row_start_[row] + block_start_[row * bytes_per_row_ + block];
    }

    friend bool operator==(const BitmapSparseMatrix& a, const BitmapSparseMatrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.bitmap_ == b.bitmap_ &&
               a.values_ == b.values_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::size_t bytes_per_row_ = 0;
    std::vector<std::uint8_t> bitmap_;
    std::vector<float> values_;
    std::vector<std::uint64_t> row_start_;   // rows + 1
    std::vector<std::uint32_t> block_start_; // rows × bytes_per_row, relative to row start
};

/// Entries are stored as float; an entry is kept iff its float value is
/// nonzero (so −0.0 and float underflow are pruned). Throws DomainError on
/// non-finite input.
BitmapSparseMatrix encode(const DenseMatrix& m);

DenseMatrix decode(const BitmapSparseMatrix& s);

struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const noexcept { return end - begin; }
};

/// Rows [rows.begin, rows.end) and byte blocks [blocks.begin, blocks.end);
/// the tile has columns [8·blocks.begin, min(8·blocks.end, cols)).
DenseMatrix decode_block(const BitmapSparseMatrix& s, IndexRange rows, IndexRange blocks);

/// Same as decode_block, writing into `out` with row stride `stride`.
void decode_block_into(const BitmapSparseMatrix& s, IndexRange rows, IndexRange blocks,
                       std::span<double> out, std::size_t stride);

/// Number of columns covered by the byte blocks in `blocks`.
std::size_t block_columns(const BitmapSparseMatrix& s, IndexRange blocks) noexcept;

} // namespace salr
