#include "salr/bitmap.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "salr/error.hpp"

namespace salr {

namespace {

std::uint8_t padding_mask(std::size_t cols) noexcept {
    const std::size_t used = cols % 8;
    return used == 0 ? std::uint8_t{0} : static_cast<std::uint8_t>(0xFFu << used);
}

void check_ranges(const BitmapSparseMatrix& s, IndexRange rows, IndexRange blocks) {
    if (rows.begin > rows.end || rows.end > s.rows() || blocks.begin > blocks.end ||
        blocks.end > s.bytes_per_row()) {
        throw BoundsError("decode_block: rows [" + std::to_string(rows.begin) + ", " +
                          std::to_string(rows.end) + ") blocks [" + std::to_string(blocks.begin) +
                          ", " + std::to_string(blocks.end) + ") exceed " +
                          std::to_string(s.rows()) + " rows x " +
                          std::to_string(s.bytes_per_row()) + " blocks");
    }
}

} // namespace

BitmapSparseMatrix::BitmapSparseMatrix(std::size_t rows, std::size_t cols,
                                       std::vector<std::uint8_t> bitmap, std::vector<float> values)
    : rows_(rows), cols_(cols), bytes_per_row_((cols + 7) / 8), bitmap_(std::move(bitmap)),
      values_(std::move(values)) {
    if (bitmap_.size() != rows_ * bytes_per_row_)
        throw CorruptionError("bitmap has " + std::to_string(bitmap_.size()) + " bytes, expected " +
                              std::to_string(rows_ * bytes_per_row_));

    const std::uint8_t pad = padding_mask(cols_);
    row_start_.resize(rows_ + 1);
    block_start_.resize(bitmap_.size());
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < rows_; ++i) {
        row_start_[i] = total;
        std::uint32_t in_row = 0;
        for (std::size_t b = 0; b < bytes_per_row_; ++b) {
            const std::uint8_t m = bitmap_[i * bytes_per_row_ + b];
            block_start_[i * bytes_per_row_ + b] = in_row;
            in_row += popcount8(m);
        }
        if (pad != 0 && (bitmap_[i * bytes_per_row_ + bytes_per_row_ - 1] & pad) != 0)
            throw CorruptionError("padding bits set in row " + std::to_string(i));
        total += in_row;
    }
    row_start_[rows_] = total;
    if (total != values_.size())
        throw CorruptionError("bitmap popcount " + std::to_string(total) +
                              " does not match value count " + std::to_string(values_.size()));
    for (float v : values_)
        if (v == 0.0f || !std::isfinite(v))
            throw CorruptionError("stored value is zero or non-finite");
}

double BitmapSparseMatrix::density() const noexcept {
    const double total = static_cast<double>(rows_) * static_cast<double>(cols_);
    return total > 0 ? static_cast<double>(values_.size()) / total : 0.0;
}

BitmapSparseMatrix encode(const DenseMatrix& m) {
    if (!m.all_finite()) throw DomainError("encode: matrix has non-finite entries");
    const std::size_t rows = m.rows();
    const std::size_t cols = m.cols();
    const std::size_t bpr = (cols + 7) / 8;
    std::vector<std::uint8_t> bitmap(rows * bpr, 0);
    std::vector<float> values;
    for (std::size_t i = 0; i < rows; ++i) {
        auto row = m.row(i);
        for (std::size_t j = 0; j < cols; ++j) {
            const float v = static_cast<float>(row[j]);
            if (v == 0.0f) continue;
            bitmap[i * bpr + j / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
            values.push_back(v);
        }
    }
    return BitmapSparseMatrix(rows, cols, std::move(bitmap), std::move(values));
}

std::size_t block_columns(const BitmapSparseMatrix& s, IndexRange blocks) noexcept {
    if (blocks.end <= blocks.begin) return 0;
    return std::min(8 * blocks.end, s.cols()) - 8 * blocks.begin;
}

void decode_block_into(const BitmapSparseMatrix& s, IndexRange rows, IndexRange blocks,
                       std::span<double> out, std::size_t stride) {
    check_ranges(s, rows, blocks);
    const std::size_t ncols = block_columns(s, blocks);
    if (rows.size() > 0 && (stride < ncols || out.size() < (rows.size() - 1) * stride + ncols))
        throw BoundsError("decode_block_into: output buffer too small");

    const float* values = s.values().data();
    for (std::size_t i = rows.begin; i < rows.end; ++i) {
        double* dst = out.data() + (i - rows.begin) * stride;
        for (std::size_t b = blocks.begin; b < blocks.end; ++b) {
            const std::size_t width = std::min<std::size_t>(8, s.cols() - 8 * b);
            double* cell = dst + 8 * (b - blocks.begin);
            const std::uint8_t mask = s.mask(i, b);
            if (mask == 0) {
                std::fill_n(cell, width, 0.0);
                continue;
            }
            const float* seg = values + s.value_offset(i, b);
            const auto& lut = kDecodeLut[mask];
            for (std::size_t t = 0; t < width; ++t) {
                const std::int8_t l = lut[t];
                cell[t] = l >= 0 ? static_cast<double>(seg[l]) : 0.0;
            }
        }
    }
}

DenseMatrix decode_block(const BitmapSparseMatrix& s, IndexRange rows, IndexRange blocks) {
    check_ranges(s, rows, blocks);
    const std::size_t ncols = block_columns(s, blocks);
    DenseMatrix tile(rows.size(), ncols);
    decode_block_into(s, rows, blocks, tile.data(), ncols);
    return tile;
}

DenseMatrix decode(const BitmapSparseMatrix& s) {
    return decode_block(s, {0, s.rows()}, {0, s.bytes_per_row()});
}

} // namespace salr
