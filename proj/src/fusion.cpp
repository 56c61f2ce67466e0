#include "salr/fusion.hpp"

#include <algorithm>
#include <string>

#include "salr/error.hpp"
#include "salr/linalg.hpp"

namespace salr {

std::size_t FusedAdapters::rank_of(std::size_t i) const {
    if (i >= offsets.size()) throw BoundsError("adapter index out of range");
    const std::size_t end = i + 1 < offsets.size() ? offsets[i + 1] : total_rank();
    return end - offsets[i];
}

AdapterPair FusedAdapters::adapter(std::size_t i) const {
    const std::size_t r = rank_of(i);
    return AdapterPair{a_cat.block(0, offsets[i], d_in(), r), b_cat.block(offsets[i], 0, r, d_out()),
                       1.0};
}

FusedAdapters fuse(std::span<const AdapterPair> adapters) {
    if (adapters.empty()) throw DomainError("fuse: adapter list is empty");
    const std::size_t d_in = adapters.front().d_in();
    const std::size_t d_out = adapters.front().d_out();
    std::size_t total = 0;
    for (std::size_t i = 0; i < adapters.size(); ++i) {
        const auto& ad = adapters[i];
        ad.validate();
        if (ad.d_in() != d_in || ad.d_out() != d_out)
            throw ShapeError("fuse: adapter " + std::to_string(i) + " is " +
                             std::to_string(ad.d_in()) + "->" + std::to_string(ad.d_out()) +
                             ", expected " + std::to_string(d_in) + "->" + std::to_string(d_out));
        total += ad.rank();
    }

    FusedAdapters f{DenseMatrix(d_in, total), DenseMatrix(total, d_out), {}};
    f.offsets.reserve(adapters.size());
    std::size_t off = 0;
    for (const auto& ad : adapters) {
        f.offsets.push_back(off);
        const std::size_t r = ad.rank();
        for (std::size_t i = 0; i < d_in; ++i)
            for (std::size_t c = 0; c < r; ++c) f.a_cat(i, off + c) = ad.a(i, c);
        for (std::size_t c = 0; c < r; ++c)
            for (std::size_t j = 0; j < d_out; ++j) f.b_cat(off + c, j) = ad.scale * ad.b(c, j);
        off += r;
    }
    return f;
}

DenseMatrix apply_fused(const DenseMatrix& x, const FusedAdapters& fused) {
    if (x.cols() != fused.d_in())
        throw ShapeError("apply_fused: x has " + std::to_string(x.cols()) + " columns, adapters expect " +
                         std::to_string(fused.d_in()));
    return matmul(matmul(x, fused.a_cat), fused.b_cat);
}

DenseMatrix apply_sequential(const DenseMatrix& x, std::span<const AdapterPair> adapters) {
    if (adapters.empty()) throw DomainError("apply_sequential: adapter list is empty");
    DenseMatrix dy(x.rows(), adapters.front().d_out());
    for (const auto& ad : adapters) {
        ad.validate();
        if (x.cols() != ad.d_in() || ad.d_out() != dy.cols())
            throw ShapeError("apply_sequential: adapter does not conform to x");
        DenseMatrix part = matmul(matmul(x, ad.a), ad.b);
        if (ad.scale != 1.0) part *= ad.scale;
        dy += part;
    }
    return dy;
}

DenseMatrix forward(const DenseMatrix& x, const DenseMatrix& w,
                    std::span<const AdapterPair> adapters) {
    DenseMatrix y = matmul(x, w);
    if (!adapters.empty()) y += apply_fused(x, fuse(adapters));
    return y;
}

} // namespace salr
