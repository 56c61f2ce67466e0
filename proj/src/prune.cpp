#include "salr/prune.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "salr/error.hpp"

namespace salr {

namespace {

// Empty `delta` stands for the zero matrix.
void require_delta_shape(const DenseMatrix& w0, const DenseMatrix& delta, const char* op) {
    if (delta.empty()) return;
    if (delta.rows() != w0.rows() || delta.cols() != w0.cols()) {
        throw ShapeError(std::string(op) + ": delta is " + std::to_string(delta.rows()) + "x" +
                         std::to_string(delta.cols()) + ", w0 is " + std::to_string(w0.rows()) +
                         "x" + std::to_string(w0.cols()));
    }
}

double delta_at(const DenseMatrix& delta, std::size_t idx) {
    return delta.empty() ? 0.0 : delta.data()[idx];
}

// Keeps the `keep` largest keys; equal keys favour the lower index.
MaskMatrix top_k_mask(std::size_t rows, std::size_t cols, const std::vector<double>& key,
                      std::size_t keep) {
    MaskMatrix mask(rows, cols, false);
    const std::size_t n = key.size();
    if (keep == 0) return mask;
    if (keep >= n) return MaskMatrix(rows, cols, true);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto before = [&](std::size_t a, std::size_t b) {
        return key[a] > key[b] || (key[a] == key[b] && a < b);
    };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                     before);
    for (std::size_t i = 0; i < keep; ++i) mask.set(order[i] / cols, order[i] % cols, true);
    return mask;
}

MaskMatrix nm_mask(const DenseMatrix& w0, std::size_t n, std::size_t m) {
    MaskMatrix mask(w0.rows(), w0.cols(), false);
    std::vector<std::size_t> group(m);
    for (std::size_t i = 0; i < w0.rows(); ++i) {
        auto row = w0.row(i);
        for (std::size_t g0 = 0; g0 < w0.cols(); g0 += m) {
            std::iota(group.begin(), group.end(), g0);
            std::partial_sort(group.begin(), group.begin() + static_cast<std::ptrdiff_t>(n),
                              group.end(), [&](std::size_t a, std::size_t b) {
                                  const double ka = std::abs(row[a]);
                                  const double kb = std::abs(row[b]);
                                  return ka > kb || (ka == kb && a < b);
                              });
            for (std::size_t t = 0; t < n; ++t) mask.set(i, group[t], true);
        }
    }
    return mask;
}

double entry_error(const DenseMatrix& w0, const DenseMatrix& delta, std::size_t idx,
                   PruneMethod method) {
    const double w = w0.data()[idx];
    return method == PruneMethod::dynamic_on_u ? w + delta_at(delta, idx) : w;
}

} // namespace

std::string_view to_string(PruneMethod m) noexcept {
    switch (m) {
    case PruneMethod::static_on_w0: return "static";
    case PruneMethod::dynamic_mask_prune_w0: return "dynamic-w0";
    case PruneMethod::dynamic_on_u: return "dynamic-u";
    case PruneMethod::semi_structured_nm: return "nm";
    }
    return "unknown";
}

PruneMethod parse_prune_method(std::string_view name) {
    if (name == "static") return PruneMethod::static_on_w0;
    if (name == "dynamic-w0") return PruneMethod::dynamic_mask_prune_w0;
    if (name == "dynamic-u") return PruneMethod::dynamic_on_u;
    if (name == "nm") return PruneMethod::semi_structured_nm;
    throw DomainError("unknown prune method '" + std::string(name) +
                      "' (expected static, dynamic-w0, dynamic-u or nm)");
}

void PruneConfig::validate(std::size_t cols) const {
    if (method == PruneMethod::semi_structured_nm) {
        if (!(n > 0 && n < m))
            throw DomainError("N:M pruning requires 0 < n < m, got " + std::to_string(n) + ":" +
                              std::to_string(m));
        if (cols % m != 0)
            throw DomainError("N:M pruning requires m | cols, got m=" + std::to_string(m) +
                              " cols=" + std::to_string(cols));
        return;
    }
    if (!(sparsity >= 0.0 && sparsity < 1.0))
        throw DomainError("sparsity must lie in [0, 1), got " + std::to_string(sparsity));
}

MaskMatrix::MaskMatrix(std::size_t rows, std::size_t cols, bool fill)
    : rows_(rows), cols_(cols), bits_((rows * cols + 63) / 64, fill ? ~std::uint64_t{0} : 0) {
    const std::size_t tail = (rows * cols) % 64;
    if (fill && tail != 0) bits_.back() = (std::uint64_t{1} << tail) - 1;
}

void MaskMatrix::set(std::size_t i, std::size_t j, bool keep) noexcept {
    const std::size_t idx = i * cols_ + j;
    const std::uint64_t bit = std::uint64_t{1} << (idx & 63);
    if (keep)
        bits_[idx >> 6] |= bit;
    else
        bits_[idx >> 6] &= ~bit;
}

std::size_t MaskMatrix::kept_count() const noexcept {
    std::size_t c = 0;
    for (auto w : bits_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
}

std::size_t kept_entries(double sparsity, std::size_t count) {
    if (!(sparsity >= 0.0 && sparsity < 1.0))
        throw DomainError("sparsity must lie in [0, 1), got " + std::to_string(sparsity));
    const auto pruned = static_cast<std::size_t>(std::floor(sparsity * static_cast<double>(count)));
    return count - std::min(pruned, count);
}

MaskMatrix build_mask(const DenseMatrix& w0, const DenseMatrix& delta, const PruneConfig& cfg) {
    cfg.validate(w0.cols());
    if (cfg.method == PruneMethod::semi_structured_nm) return nm_mask(w0, cfg.n, cfg.m);

    const bool by_u = cfg.method != PruneMethod::static_on_w0;
    if (by_u) require_delta_shape(w0, delta, "build_mask");
    const std::size_t count = w0.size();
    std::vector<double> key(count);
    for (std::size_t i = 0; i < count; ++i)
        key[i] = std::abs(w0.data()[i] + (by_u ? delta_at(delta, i) : 0.0));
    return top_k_mask(w0.rows(), w0.cols(), key, kept_entries(cfg.sparsity, count));
}

DenseMatrix apply_mask(const DenseMatrix& m, const MaskMatrix& mask) {
    if (m.rows() != mask.rows() || m.cols() != mask.cols())
        throw ShapeError("apply_mask: mask shape differs from matrix");
    DenseMatrix out(m);
    auto d = out.data();
    for (std::size_t i = 0; i < d.size(); ++i)
        if (!mask.kept_index(i)) d[i] = 0.0;
    return out;
}

MaskErrorStats mask_error_stats(const DenseMatrix& w0, const DenseMatrix& delta,
                                const MaskMatrix& mask, PruneMethod method) {
    require_delta_shape(w0, delta, "apply_mask_and_measure");
    if (w0.rows() != mask.rows() || w0.cols() != mask.cols())
        throw ShapeError("apply_mask_and_measure: mask shape differs from w0");
    const std::size_t n = w0.size();
    if (n == 0) return {};
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (mask.kept_index(i)) continue;
        const double e = entry_error(w0, delta, i, method);
        sum += e * e;
        sum_sq += e * e * e * e;
    }
    const double nn = static_cast<double>(n);
    const double mean = sum / nn;
    const double var = n > 1 ? std::max(0.0, (sum_sq - nn * mean * mean) / (nn - 1.0)) : 0.0;
    return {mean, std::sqrt(var / nn)};
}

double apply_mask_and_measure(const DenseMatrix& w0, const DenseMatrix& delta,
                              const MaskMatrix& mask, PruneMethod method) {
    return mask_error_stats(w0, delta, mask, method).mean;
}

} // namespace salr
