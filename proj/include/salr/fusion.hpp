#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "salr/matrix.hpp"
#include "salr/residual.hpp"

namespace salr {

/// n adapters stacked along the rank dimension. Each adapter's scale is
/// folded into its slice of b_cat.
struct FusedAdapters {
    DenseMatrix a_cat;                // d_in × Σ r_i
    DenseMatrix b_cat;                // Σ r_i × d_out
    std::vector<std::size_t> offsets; // first rank column of adapter i

    std::size_t count() const noexcept { return offsets.size(); }
    std::size_t total_rank() const noexcept { return a_cat.cols(); }
    std::size_t d_in() const noexcept { return a_cat.rows(); }
    std::size_t d_out() const noexcept { return b_cat.cols(); }
    std::size_t rank_of(std::size_t i) const;
    /// Slice i as a unit-scale pair.
    AdapterPair adapter(std::size_t i) const;
};

/// Throws DomainError for an empty list, ShapeError on mismatched dimensions.
FusedAdapters fuse(std::span<const AdapterPair> adapters);

/// (x·a_cat)·b_cat: exactly two matmul() calls for any adapter count.
DenseMatrix apply_fused(const DenseMatrix& x, const FusedAdapters& fused);

/// Σ_i scale_i·(x·A_i)·B_i, two matmul() calls per adapter.
DenseMatrix apply_sequential(const DenseMatrix& x, std::span<const AdapterPair> adapters);

/// y = x·w + Δy with Δy from the fused adapters (an empty list adds nothing).
DenseMatrix forward(const DenseMatrix& x, const DenseMatrix& w,
                    std::span<const AdapterPair> adapters);

} // namespace salr
