#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "salr/error.hpp"
#include "salr/linalg.hpp"
#include "salr/prune.hpp"
#include "salr/residual.hpp"
#include "salr/rng.hpp"
#include "salr/theory.hpp"

namespace salr {
namespace {

DenseMatrix diag321() {
    const std::vector<double> d{3, 2, 1};
    return DenseMatrix::diagonal(d);
}

DenseMatrix pruned_residual(std::mt19937_64& gen, std::size_t d, std::size_t k, double p) {
    const DenseMatrix w = test::random_matrix(gen, d, k);
    PruneConfig c;
    c.sparsity = p;
    return w - apply_mask(w, build_mask(w, {}, c));
}

TEST(ResidualAdapter, DiagonalRankOneTail) {
    const DenseMatrix e = diag321();
    const AdapterPair a = build_residual_adapter(e, DenseMatrix(3, 3), 1);
    EXPECT_EQ(a.rank(), 1u);
    EXPECT_NEAR((e - a.product()).frobenius_norm_sq(), 5.0, 1e-12);
}

TEST(ResidualAdapter, ZeroResidualGivesZeroAdapter) {
    const DenseMatrix w = DenseMatrix::identity(4);
    const AdapterPair a = build_residual_adapter(w, w, 2);
    EXPECT_EQ(a.a.max_abs(), 0.0);
    EXPECT_EQ(a.b.max_abs(), 0.0);
}

TEST(ResidualAdapter, RankOutOfRange) {
    EXPECT_THROW((void)build_residual_adapter(diag321(), DenseMatrix(3, 3), 0), DomainError);
    EXPECT_THROW((void)build_residual_adapter(diag321(), DenseMatrix(3, 3), 4), DomainError);
    EXPECT_THROW((void)build_residual_adapter(diag321(), DenseMatrix(2, 3), 1), ShapeError);
}

TEST(ResidualAdapter, ReconstructionErrorEqualsSvdTail) {
    std::mt19937_64 gen(1);
    const DenseMatrix e = pruned_residual(gen, 64, 48, 0.5);
    const AdapterPair a = build_residual_adapter(e, DenseMatrix(64, 48), 8);
    const SvdResult f = svd(e);
    double tail = 0.0;
    for (std::size_t i = 8; i < f.s.size(); ++i) tail += f.s[i] * f.s[i];
    EXPECT_NEAR((e - a.product()).frobenius_norm_sq(), tail, 1e-8 * tail);
}

TEST(ResidualAdapter, EckartYoungOptimalityAgainstRandomRankR) {
    // No random rank-r product beats the truncated SVD.
    std::mt19937_64 gen(2);
    const DenseMatrix e = pruned_residual(gen, 20, 16, 0.5);
    const double best = (e - build_residual_adapter(e, DenseMatrix(20, 16), 4).product())
                            .frobenius_norm_sq();
    for (int t = 0; t < 50; ++t) {
        const DenseMatrix a = test::random_matrix(gen, 20, 4);
        const DenseMatrix b = test::random_matrix(gen, 4, 16);
        EXPECT_GE((e - matmul(a, b)).frobenius_norm_sq(), best);
    }
}

TEST(Theorem3, DiagonalHandArithmetic) {
    const Theorem3Check c = verify_theorem3_bound(diag321(), 1);
    EXPECT_NEAR(c.lhs, 5.0 / 9.0, 1e-14);
    EXPECT_NEAR(c.rhs, (2.0 / 3.0) * 14.0 / 9.0, 1e-14);
    EXPECT_TRUE(c.holds);
}

TEST(Theorem3, FlatSpectrumIsTight) {
    const DenseMatrix e = 2.0 * DenseMatrix::identity(5);
    for (std::size_t r = 1; r <= 5; ++r) {
        const Theorem3Check c = verify_theorem3_bound(e, r);
        EXPECT_NEAR(c.lhs, c.rhs, 1e-14);
        EXPECT_TRUE(c.holds);
    }
}

TEST(Theorem3, BoundHoldsForEveryRankOnRandomPrunedResiduals) {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t d = 2 + gen() % 15, k = 2 + gen() % 15;
        const DenseMatrix e = pruned_residual(gen, d, k, 0.3 + 0.6 * (trial % 7) / 7.0);
        if (e.max_abs() == 0.0) continue;
        for (std::size_t r = 1; r <= std::min(d, k); ++r)
            ASSERT_TRUE(verify_theorem3_bound(e, r).holds) << trial << " r=" << r;
    }
}

TEST(Theorem3, PerEntryResidualEnergyNearClosedForm) {
    Rng rng(77);
    const DenseMatrix w = sample_gaussian_matrix(rng, 256, 256, 1.0);
    PruneConfig c;
    c.sparsity = 0.5;
    const MaskMatrix mask = build_mask(w, {}, c);
    const MaskErrorStats st = mask_error_stats(w, {}, mask, PruneMethod::static_on_w0);
    EXPECT_LE(std::abs(st.mean - mse_closed_form(0.5, 1.0)), 3.0 * st.standard_error);
}

TEST(Spectrum, CumulativeOracle) {
    const SpectrumReport s = spectrum(diag321());
    ASSERT_EQ(s.cumulative_energy.size(), 3u);
    EXPECT_NEAR(s.cumulative_energy[0], 9.0 / 14.0, 1e-14);
    EXPECT_NEAR(s.cumulative_energy[1], 13.0 / 14.0, 1e-14);
    EXPECT_EQ(s.cumulative_energy[2], 1.0);
    EXPECT_EQ(s.i99, 3u);
    EXPECT_EQ(s.effective_rank, 3u);
}

TEST(Spectrum, RankOneAndIdentity) {
    const DenseMatrix r1 = DenseMatrix::from_rows({{1, 2}, {2, 4}, {3, 6}});
    const SpectrumReport a = spectrum(r1);
    EXPECT_NEAR(a.cumulative_energy[0], 1.0, 1e-14);
    EXPECT_EQ(a.i99, 1u);
    EXPECT_EQ(a.effective_rank, 1u);

    const SpectrumReport b = spectrum(DenseMatrix::identity(100));
    for (std::size_t i = 0; i < 100; ++i)
        EXPECT_NEAR(b.cumulative_energy[i], (i + 1) / 100.0, 1e-14);
    EXPECT_EQ(b.i99, 99u);
}

TEST(Spectrum, ZeroMatrixRejected) { EXPECT_THROW((void)spectrum(DenseMatrix(3, 3)), DomainError); }

TEST(StepSize, ClosedCases) {
    EXPECT_NEAR(optimal_step_size(DenseMatrix::identity(4), 50), 1.0, 1e-12);
    EXPECT_NEAR(optimal_step_size(2.0 * DenseMatrix::identity(4), 50), 0.25, 1e-12);
    EXPECT_THROW((void)optimal_step_size(DenseMatrix(3, 3), 50), DomainError);
    EXPECT_NEAR(lipschitz_constant(DenseMatrix::identity(3)), 1.0, 1e-14);
    EXPECT_NEAR(lipschitz_constant(3.0 * DenseMatrix::identity(3)), 9.0, 1e-13);
}

TEST(StepSize, MatchesSvdOnRandom) {
    std::mt19937_64 gen(4);
    const DenseMatrix x = test::random_matrix(gen, 128, 64);
    const double s = svd(x).s[0];
    EXPECT_NEAR(optimal_step_size(x, 200), 1.0 / (s * s), 1e-5 / (s * s));
}

TEST(Gradient, ClosedCases) {
    std::mt19937_64 gen(5);
    const DenseMatrix x = test::random_matrix(gen, 6, 4);
    const DenseMatrix m = test::random_matrix(gen, 4, 3);
    EXPECT_LE(residual_gradient(x, m, matmul(x, m)).max_abs(), 1e-13);
    const DenseMatrix r = test::random_matrix(gen, 4, 3);
    EXPECT_LE(test::max_abs_diff(residual_gradient(DenseMatrix::identity(4), m, r), m - r), 1e-15);
}

TEST(Gradient, MatchesCentralDifferences) {
    std::mt19937_64 gen(6);
    const DenseMatrix x = test::random_matrix(gen, 10, 5);
    const DenseMatrix r = test::random_matrix(gen, 10, 3);
    DenseMatrix m = test::random_matrix(gen, 5, 3);
    const DenseMatrix g = residual_gradient(x, m, r);
    DenseMatrix fd(5, 3);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            const double h = 1e-5, v = m(i, j);
            m(i, j) = v + h;
            const double up = residual_loss(x, m, r);
            m(i, j) = v - h;
            const double down = residual_loss(x, m, r);
            m(i, j) = v;
            fd(i, j) = (up - down) / (2 * h);
        }
    EXPECT_LE(relative_frobenius_error(fd, g), 1e-5);
}

TEST(Gradient, LipschitzOnRandomPairs) {
    std::mt19937_64 gen(7);
    const DenseMatrix x = test::random_matrix(gen, 12, 6);
    const DenseMatrix r = test::random_matrix(gen, 12, 4);
    const double lip = lipschitz_constant(x);
    for (int t = 0; t < 100; ++t) {
        const DenseMatrix m1 = test::random_matrix(gen, 6, 4);
        const DenseMatrix m2 = test::random_matrix(gen, 6, 4);
        const double lhs = (residual_gradient(x, m1, r) - residual_gradient(x, m2, r)).frobenius_norm();
        EXPECT_LE(lhs, lip * (m1 - m2).frobenius_norm() * (1 + 1e-12));
    }
}

TEST(TrainResidual, ZeroTargetStaysAtZero) {
    const DenseMatrix x = DenseMatrix::identity(3);
    const DenseMatrix w_hat(3, 2);
    const ResidualTrainResult res =
        train_residual(x, DenseMatrix(3, 2), w_hat, AdapterPair{}, DenseMatrix(3, 2), {});
    EXPECT_EQ(res.m, DenseMatrix(3, 2));
    EXPECT_EQ(res.loss_trace.front(), 0.0);
    EXPECT_TRUE(res.converged);
}

TEST(TrainResidual, IdentityUnitStepConvergesInOneStep) {
    std::mt19937_64 gen(8);
    const DenseMatrix y = test::random_matrix(gen, 4, 3);
    ResidualTrainConfig cfg;
    cfg.max_iters = 1;
    cfg.step = StepSize::fixed(1.0);
    const ResidualTrainResult res = train_residual(DenseMatrix::identity(4), y, DenseMatrix(4, 3),
                                                   AdapterPair{}, DenseMatrix(4, 3), cfg);
    EXPECT_EQ(res.iterations, 1u);
    EXPECT_LE(test::max_abs_diff(res.m, y), 1e-15);
}

TEST(TrainResidual, RejectsUnstableStepBeforeIterating) {
    std::mt19937_64 gen(9);
    const DenseMatrix x = test::random_matrix(gen, 8, 4);
    const double lip = lipschitz_constant(x);
    ResidualTrainConfig cfg;
    cfg.step = StepSize::fixed(2.0 / lip);
    EXPECT_THROW((void)train_residual(x, DenseMatrix(8, 2), DenseMatrix(4, 2), AdapterPair{},
                                      DenseMatrix(4, 2), cfg),
                 ConfigError);
    cfg.step = StepSize::fixed(1.99 / lip);
    cfg.max_iters = 5;
    EXPECT_NO_THROW((void)train_residual(x, DenseMatrix(8, 2), DenseMatrix(4, 2), AdapterPair{},
                                         DenseMatrix(4, 2), cfg));
}

TEST(TrainResidual, OptimalStepMonotoneAndConverges) {
    std::mt19937_64 gen(10);
    const DenseMatrix x = test::random_matrix(gen, 32, 16);
    const DenseMatrix w_hat = test::random_matrix(gen, 16, 8);
    const DenseMatrix target = test::random_matrix(gen, 16, 8);
    const DenseMatrix y = matmul(x, w_hat + target);
    for (const auto step : {StepSize::automatic(), StepSize::automatic_half()}) {
        ResidualTrainConfig cfg;
        cfg.step = step;
        cfg.max_iters = 20000;
        cfg.grad_tol = 5e-7;
        const ResidualTrainResult res =
            train_residual(x, y, w_hat, AdapterPair{}, DenseMatrix(16, 8), cfg);
        for (std::size_t i = 1; i < res.loss_trace.size(); ++i)
            ASSERT_LE(res.loss_trace[i], res.loss_trace[i - 1]) << i;
        EXPECT_LT(res.grad_norm, 1e-6);
        EXPECT_LE(test::max_abs_diff(res.m, target), 1e-6);
    }
}

TEST(TrainResidual, LoraTermEntersTarget) {
    std::mt19937_64 gen(11);
    const DenseMatrix x = test::random_matrix(gen, 10, 4);
    const DenseMatrix w_hat = test::random_matrix(gen, 4, 3);
    AdapterPair lora{test::random_matrix(gen, 4, 1), test::random_matrix(gen, 1, 3), 0.5};
    const DenseMatrix y = test::random_matrix(gen, 10, 3);
    const DenseMatrix r = residual_target(x, y, w_hat, lora);
    const DenseMatrix want = y - matmul(x, w_hat + 0.5 * matmul(lora.a, lora.b));
    EXPECT_LE(test::max_abs_diff(r, want), 1e-13);
}

TEST(TrainResidual, RetruncationProducesRankRAdapter) {
    std::mt19937_64 gen(12);
    const DenseMatrix x = test::random_matrix(gen, 20, 6);
    const DenseMatrix y = test::random_matrix(gen, 20, 5);
    ResidualTrainConfig cfg;
    cfg.retruncate_rank = 2;
    cfg.max_iters = 500;
    const ResidualTrainResult res =
        train_residual(x, y, DenseMatrix(6, 5), AdapterPair{}, DenseMatrix(6, 5), cfg);
    ASSERT_TRUE(res.truncated.has_value());
    EXPECT_EQ(res.truncated->rank(), 2u);
}

TEST(LoraInit, ShapesAndZeroB) {
    Rng rng(3);
    const AdapterPair a = init_lora_adapter(rng, 64, 32, 4);
    EXPECT_EQ(a.a.rows(), 64u);
    EXPECT_EQ(a.b.cols(), 32u);
    EXPECT_EQ(a.b.max_abs(), 0.0);
    EXPECT_GT(a.a.max_abs(), 0.0);
    EXPECT_THROW((void)init_lora_adapter(rng, 4, 4, 5), DomainError);
}

} // namespace
} // namespace salr
