#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "helpers.hpp"
#include "salr/error.hpp"
#include "salr/fusion.hpp"
#include "salr/linalg.hpp"

namespace salr {
namespace {

std::vector<AdapterPair> random_adapters(std::mt19937_64& gen, std::size_t n, std::size_t d,
                                         std::size_t k) {
    std::vector<AdapterPair> out;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = 1 + gen() % 4;
        out.push_back({test::random_matrix(gen, d, r), test::random_matrix(gen, r, k),
                       0.5 + static_cast<double>(i)});
    }
    return out;
}

TEST(Fuse, SingleAdapterIsUnchanged) {
    std::mt19937_64 gen(1);
    const AdapterPair a{test::random_matrix(gen, 6, 2), test::random_matrix(gen, 2, 5), 1.0};
    const FusedAdapters f = fuse(std::vector<AdapterPair>{a});
    EXPECT_EQ(f.a_cat, a.a);
    EXPECT_EQ(f.b_cat, a.b);
}

TEST(Fuse, BookkeepingForTwoRankTwoAdapters) {
    std::mt19937_64 gen(2);
    std::vector<AdapterPair> v{
        {test::random_matrix(gen, 6, 2), test::random_matrix(gen, 2, 5), 1.0},
        {test::random_matrix(gen, 6, 2), test::random_matrix(gen, 2, 5), 1.0}};
    const FusedAdapters f = fuse(v);
    EXPECT_EQ(f.total_rank(), 4u);
    EXPECT_EQ(f.offsets, (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(f.rank_of(1), 2u);
}

TEST(Fuse, SlicesRoundTripBitExactly) {
    std::mt19937_64 gen(3);
    std::vector<AdapterPair> v = random_adapters(gen, 4, 7, 5);
    for (auto& a : v) a.scale = 1.0;
    const FusedAdapters f = fuse(v);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const AdapterPair s = f.adapter(i);
        EXPECT_EQ(s.a, v[i].a);
        EXPECT_EQ(s.b, v[i].b);
    }
}

TEST(Fuse, Errors) {
    EXPECT_THROW((void)fuse(std::vector<AdapterPair>{}), DomainError);
    std::mt19937_64 gen(4);
    std::vector<AdapterPair> v{
        {test::random_matrix(gen, 6, 2), test::random_matrix(gen, 2, 5), 1.0},
        {test::random_matrix(gen, 7, 2), test::random_matrix(gen, 2, 5), 1.0}};
    EXPECT_THROW((void)fuse(v), ShapeError);
}

TEST(ApplyFused, CancellingAdaptersGiveZero) {
    std::mt19937_64 gen(5);
    const DenseMatrix a = test::random_matrix(gen, 6, 2);
    const DenseMatrix b = test::random_matrix(gen, 2, 5);
    std::vector<AdapterPair> v{{a, b, 1.0}, {a, -1.0 * b, 1.0}};
    const DenseMatrix x = test::random_matrix(gen, 3, 6);
    EXPECT_LE(apply_fused(x, fuse(v)).max_abs(), 1e-14);
}

TEST(ApplyFused, SingleAdapterEqualsTwoProducts) {
    std::mt19937_64 gen(6);
    const AdapterPair a{test::random_matrix(gen, 6, 3), test::random_matrix(gen, 3, 4), 1.0};
    const DenseMatrix x = test::random_matrix(gen, 5, 6);
    EXPECT_EQ(apply_fused(x, fuse(std::vector<AdapterPair>{a})), matmul(matmul(x, a.a), a.b));
}

TEST(ApplyFused, ZeroBGivesZero) {
    std::mt19937_64 gen(7);
    std::vector<AdapterPair> v = random_adapters(gen, 3, 6, 4);
    for (auto& a : v) a.b = DenseMatrix(a.b.rows(), a.b.cols());
    EXPECT_EQ(apply_fused(test::random_matrix(gen, 2, 6), fuse(v)).max_abs(), 0.0);
}

TEST(ApplyFused, MatchesSequentialSumWithTwoProducts) {
    std::mt19937_64 gen(8);
    for (std::size_t n = 1; n <= 8; ++n) {
        const std::vector<AdapterPair> v = random_adapters(gen, n, 12, 9);
        const DenseMatrix x = test::random_matrix(gen, 5, 12);
        const FusedAdapters f = fuse(v);
        MatmulCounter fused_count;
        const DenseMatrix y = apply_fused(x, f);
        EXPECT_EQ(fused_count.count(), 2u);
        MatmulCounter seq_count;
        const DenseMatrix z = apply_sequential(x, v);
        EXPECT_EQ(seq_count.count(), 2u * n);
        EXPECT_LE(relative_frobenius_error(y, z), 1e-12);
    }
}

TEST(Forward, DegenerateCases) {
    std::mt19937_64 gen(9);
    const DenseMatrix x = test::random_matrix(gen, 3, 6);
    const DenseMatrix w = test::random_matrix(gen, 6, 4);
    EXPECT_EQ(forward(x, w, {}), matmul(x, w));
    const std::vector<AdapterPair> v = random_adapters(gen, 2, 6, 4);
    EXPECT_LE(test::max_abs_diff(forward(x, DenseMatrix(6, 4), v), apply_fused(x, fuse(v))), 1e-14);
}

TEST(Forward, FullStackMatchesDenseOracle) {
    std::mt19937_64 gen(10);
    const DenseMatrix x = test::random_matrix(gen, 4, 16);
    const DenseMatrix w_hat = test::random_matrix(gen, 16, 10);
    const std::vector<AdapterPair> v = random_adapters(gen, 2, 16, 10);
    DenseMatrix merged = w_hat;
    for (const auto& a : v) merged += a.scale * test::naive_matmul(a.a, a.b);
    EXPECT_LE(relative_frobenius_error(forward(x, w_hat, v), test::naive_matmul(x, merged)), 1e-5);
}

} // namespace
} // namespace salr
