#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "salr/error.hpp"
#include "salr/linalg.hpp"
#include "salr/matrix.hpp"

namespace salr {
namespace {

using test::naive_matmul;
using test::random_matrix;

TEST(DenseMatrix, ConstructionAndShapeChecks) {
    const DenseMatrix m = DenseMatrix::from_rows({{1, 2, 3}, {4, 5, 6}});
    EXPECT_EQ(m.rows(), 2u);
    EXPECT_EQ(m.cols(), 3u);
    EXPECT_EQ(m(1, 2), 6.0);
    EXPECT_THROW(DenseMatrix(2, 2, std::vector<double>(3)), ShapeError);
    EXPECT_THROW(DenseMatrix::from_rows({{1, 2}, {3}}), ShapeError);
    EXPECT_THROW(m + DenseMatrix(3, 2), ShapeError);
}

TEST(DenseMatrix, TransposeBlockAndNorms) {
    const DenseMatrix m = DenseMatrix::from_rows({{1, -2}, {3, 4}, {5, 6}});
    const DenseMatrix t = m.transpose();
    EXPECT_EQ(t, DenseMatrix::from_rows({{1, 3, 5}, {-2, 4, 6}}));
    EXPECT_EQ(m.block(1, 1, 2, 1), DenseMatrix::from_rows({{4}, {6}}));
    EXPECT_THROW((void)m.block(2, 0, 2, 1), BoundsError);
    EXPECT_DOUBLE_EQ(m.frobenius_norm_sq(), 1 + 4 + 9 + 16 + 25 + 36);
    EXPECT_EQ(m.max_abs(), 6.0);
}

TEST(DenseMatrix, RoundedToFloat) {
    const DenseMatrix m = DenseMatrix::from_rows({{0.1, 1.0}});
    const DenseMatrix r = m.rounded_to_float();
    EXPECT_EQ(r(0, 0), static_cast<double>(0.1f));
    EXPECT_EQ(r(0, 1), 1.0);
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
    std::mt19937_64 gen(1);
    const DenseMatrix m = random_matrix(gen, 3, 5);
    EXPECT_EQ(matmul(DenseMatrix::identity(3), m), m);
}

TEST(Matmul, HandArithmetic) {
    const DenseMatrix a = DenseMatrix::from_rows({{1, 2}, {3, 4}});
    const DenseMatrix b = DenseMatrix::from_rows({{0}, {1}});
    EXPECT_EQ(matmul(a, b), DenseMatrix::from_rows({{2}, {4}}));
}

TEST(Matmul, MatchesNaiveOracle) {
    std::mt19937_64 gen(2);
    const DenseMatrix a = random_matrix(gen, 17, 5);
    const DenseMatrix b = random_matrix(gen, 5, 9);
    EXPECT_LE(test::max_abs_diff(matmul(a, b), naive_matmul(a, b)), 1e-12);
}

TEST(Matmul, RejectsNonConformingShapes) {
    EXPECT_THROW(matmul(DenseMatrix(2, 3), DenseMatrix(2, 3)), ShapeError);
}

TEST(Matmul, CounterCountsCallsOnThisThread) {
    const MatmulCounter counter;
    const DenseMatrix a(2, 2, 1.0);
    (void)matmul(a, a);
    (void)matmul(a, a);
    EXPECT_EQ(counter.count(), 2u);
}

TEST(Svd, DiagonalMatrix) {
    const std::vector<double> d{3, 2, 1};
    const SvdResult f = svd(DenseMatrix::diagonal(d));
    ASSERT_EQ(f.s.size(), 3u);
    EXPECT_NEAR(f.s[0], 3.0, 1e-14);
    EXPECT_NEAR(f.s[1], 2.0, 1e-14);
    EXPECT_NEAR(f.s[2], 1.0, 1e-14);
}

TEST(Svd, ZeroMatrixHasZeroSpectrumAndOrthonormalFactors) {
    const SvdResult f = svd(DenseMatrix(4, 3));
    for (double s : f.s) EXPECT_EQ(s, 0.0);
    const DenseMatrix utu = matmul(f.u.transpose(), f.u);
    EXPECT_LE(test::max_abs_diff(utu, DenseMatrix::identity(3)), 1e-12);
}

TEST(Svd, RandomWideReconstruction) {
    std::mt19937_64 gen(3);
    const DenseMatrix m = random_matrix(gen, 20, 30);
    const SvdResult f = svd(m);
    EXPECT_EQ(f.u.rows(), 20u);
    EXPECT_EQ(f.vt.cols(), 30u);
    EXPECT_LE((reconstruct(f) - m).frobenius_norm(), 1e-8);
}

TEST(Svd, FactorsAreOrthonormalAndValuesSorted) {
    std::mt19937_64 gen(4);
    for (const auto [r, c] : {std::pair{12, 7}, std::pair{7, 12}, std::pair{9, 9}}) {
        const SvdResult f = svd(random_matrix(gen, r, c));
        const std::size_t q = std::min(r, c);
        EXPECT_LE(test::max_abs_diff(matmul(f.u.transpose(), f.u), DenseMatrix::identity(q)), 1e-12);
        EXPECT_LE(test::max_abs_diff(matmul(f.vt, f.vt.transpose()), DenseMatrix::identity(q)),
                  1e-12);
        EXPECT_TRUE(std::is_sorted(f.s.rbegin(), f.s.rend()));
    }
}

TEST(Svd, RankDeficientInputCompletesOrthonormalBasis) {
    // Rank one: every column is a multiple of (1, 2, 3, 4).
    const DenseMatrix m = DenseMatrix::from_rows({{1, 2, 3}, {2, 4, 6}, {3, 6, 9}, {4, 8, 12}});
    const SvdResult f = svd(m);
    EXPECT_NEAR(f.s[0], std::sqrt(30.0 * 14.0), 1e-12);
    EXPECT_NEAR(f.s[1], 0.0, 1e-12);
    EXPECT_LE(test::max_abs_diff(matmul(f.u.transpose(), f.u), DenseMatrix::identity(3)), 1e-12);
    EXPECT_LE((reconstruct(f) - m).frobenius_norm(), 1e-12);
}

TEST(Svd, SquaredSingularValuesSumToFrobeniusNorm) {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 20; ++trial) {
        const DenseMatrix m = random_matrix(gen, 3 + trial % 11, 2 + trial % 7);
        const SvdResult f = svd(m);
        double sum = 0.0;
        for (double s : f.s) sum += s * s;
        EXPECT_NEAR(sum, m.frobenius_norm_sq(), 1e-12 * m.frobenius_norm_sq());
    }
}

TEST(Svd, RejectsEmptyAndNonFinite) {
    EXPECT_THROW((void)svd(DenseMatrix()), DomainError);
    DenseMatrix m(2, 2);
    m(0, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW((void)svd(m), DomainError);
}

TEST(PowerIteration, IdentityAndScaledIdentity) {
    EXPECT_NEAR(power_iteration_sigma_max(DenseMatrix::identity(5), 100, 1e-12), 1.0, 1e-12);
    EXPECT_NEAR(power_iteration_sigma_max(2.0 * DenseMatrix::identity(5), 100, 1e-12), 2.0, 1e-12);
}

TEST(PowerIteration, MatchesSvdOnRandomMatrix) {
    std::mt19937_64 gen(6);
    const DenseMatrix x = random_matrix(gen, 64, 32);
    const double want = svd(x).s[0];
    EXPECT_NEAR(power_iteration_sigma_max(x, 100, 1e-14), want, 1e-6 * want);
}

TEST(PowerIteration, ZeroMatrixAndBadArguments) {
    EXPECT_EQ(power_iteration_sigma_max(DenseMatrix(3, 3), 10, 1e-8), 0.0);
    EXPECT_THROW((void)power_iteration_sigma_max(DenseMatrix::identity(2), 0, 1e-8), DomainError);
    EXPECT_THROW((void)power_iteration_sigma_max(DenseMatrix::identity(2), 5, 0.0), DomainError);
}

TEST(PowerIteration, NeverExceedsTrueSigmaMax) {
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 10; ++trial) {
        const DenseMatrix x = random_matrix(gen, 10 + trial, 6);
        const double s = svd(x).s[0];
        EXPECT_LE(power_iteration_sigma_max(x, 3, 1e-12), s * (1 + 1e-14));
    }
}

} // namespace
} // namespace salr
