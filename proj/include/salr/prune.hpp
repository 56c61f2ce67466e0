#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "salr/matrix.hpp"

namespace salr {

enum class PruneMethod {
    static_on_w0,           // mask ranked by |W0|, applied to W0
    dynamic_mask_prune_w0,  // mask ranked by |W0 + Δ|, applied to W0 only
    dynamic_on_u,           // mask ranked by |W0 + Δ|, applied to U = W0 + Δ
    semi_structured_nm,     // n largest |W0| per group of m along a row
};

std::string_view to_string(PruneMethod m) noexcept;
/// Accepts "static", "dynamic-w0", "dynamic-u", "nm". Throws DomainError.
PruneMethod parse_prune_method(std::string_view name);

struct PruneConfig {
    double sparsity = 0.0; // p in [0, 1)
    PruneMethod method = PruneMethod::static_on_w0;
    std::size_t n = 2; // N:M only
    std::size_t m = 4;
    double sigma = 1.0; // std of W0 (closed forms)
    double tau = 0.0;   // std of Δ (closed forms)

    /// Throws DomainError on invalid values; `cols` checks m | cols for N:M.
    void validate(std::size_t cols) const;
};

/// One bit per entry, row-major; 1 means the entry is kept.
class MaskMatrix {
public:
    MaskMatrix() = default;
    MaskMatrix(std::size_t rows, std::size_t cols, bool fill);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool kept(std::size_t i, std::size_t j) const noexcept { return kept_index(i * cols_ + j); }
    bool kept_index(std::size_t idx) const noexcept { return (bits_[idx >> 6] >> (idx & 63)) & 1u; }
    void set(std::size_t i, std::size_t j, bool keep) noexcept;
    std::size_t kept_count() const noexcept;

    friend bool operator==(const MaskMatrix&, const MaskMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint64_t> bits_;
};

/// ⌈(1 − p)·count⌉, computed as count − ⌊p·count⌋ so exact products do not
/// round up.
std::size_t kept_entries(double sparsity, std::size_t count);

/// Builds the keep-mask for `cfg.method`. `delta` is only read by the two
/// dynamic methods; pass an empty matrix otherwise.
MaskMatrix build_mask(const DenseMatrix& w0, const DenseMatrix& delta, const PruneConfig& cfg);

/// Zeroes every entry whose mask bit is clear.
DenseMatrix apply_mask(const DenseMatrix& m, const MaskMatrix& mask);

/// Per-entry squared error of the pruning method measured against
/// U = W0 + Δ: methods that prune W0 only leave Δ intact, dynamic_on_u
/// zeroes U itself.
double apply_mask_and_measure(const DenseMatrix& w0, const DenseMatrix& delta,
                              const MaskMatrix& mask, PruneMethod method);

/// Mean and standard error of the per-entry squared errors above.
struct MaskErrorStats {
    double mean = 0.0;
    double standard_error = 0.0;
};
MaskErrorStats mask_error_stats(const DenseMatrix& w0, const DenseMatrix& delta,
                                const MaskMatrix& mask, PruneMethod method);

} // namespace salr
