#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "salr/matrix.hpp"
#include "salr/rng.hpp"

namespace salr {

/// Low-rank factor pair contributing scale·(a·b) to a d×k weight.
struct AdapterPair {
    DenseMatrix a; // d × r
    DenseMatrix b; // r × k
    double scale = 1.0;

    std::size_t rank() const noexcept { return a.cols(); }
    std::size_t d_in() const noexcept { return a.rows(); }
    std::size_t d_out() const noexcept { return b.cols(); }

    /// Throws ShapeError unless a.cols == b.rows and rank <= min(d, k).
    void validate() const;
    /// scale·a·b as a dense d×k matrix.
    DenseMatrix product() const;
};

/// Fresh LoRA pair: A ~ N(0, 1/d) entries, B = 0.
AdapterPair init_lora_adapter(Rng& rng, std::size_t d, std::size_t k, std::size_t rank,
                              double scale = 1.0);

/// Truncated SVD of E = w − w_hat: A = U_r·diag(s_r), B = Vt_r, so A·B = E_r.
AdapterPair build_residual_adapter(const DenseMatrix& w, const DenseMatrix& w_hat, std::size_t rank);

struct Theorem3Check {
    double lhs = 0.0;  // ‖E − E_r‖_F² / (dk), measured from the adapter product
    double rhs = 0.0;  // (1 − r/q)·‖E‖_F² / (dk)
    double tail_energy = 0.0; // Σ_{i>r} σ_i²
    double residual_sq = 0.0; // ‖E − E_r‖_F²
    bool holds = false;
};

/// Evaluates the rank-r per-entry bound for a residual matrix `e`.
Theorem3Check verify_theorem3_bound(const DenseMatrix& e, std::size_t rank);

struct SpectrumReport {
    std::vector<double> singular_values;
    std::vector<double> cumulative_energy; // entry i: share of energy in the first i+1 values
    std::size_t i99 = 0;                   // smallest count reaching >= 0.99
    std::size_t effective_rank = 0;        // values above 1e−12·σ_max
};

/// Throws DomainError for a zero matrix.
SpectrumReport spectrum(const DenseMatrix& e);

/// 1/σ_max(x)² with σ_max from power iteration. Throws DomainError for zero x.
double optimal_step_size(const DenseMatrix& x, std::size_t power_iters);

/// σ_max(x)², the Lipschitz constant of M ↦ xᵀ(xM − R).
double lipschitz_constant(const DenseMatrix& x);

/// ½‖xM − r‖_F².
double residual_loss(const DenseMatrix& x, const DenseMatrix& m, const DenseMatrix& r);
/// xᵀ(xM − r).
DenseMatrix residual_gradient(const DenseMatrix& x, const DenseMatrix& m, const DenseMatrix& r);

/// R = Y − X·(Ŵ + scale·A·B).
DenseMatrix residual_target(const DenseMatrix& x, const DenseMatrix& y, const DenseMatrix& w_hat,
                            const AdapterPair& lora);

struct StepSize {
    enum class Mode { automatic, automatic_half, fixed };
    Mode mode = Mode::automatic_half;
    double eta = 0.0; // used when mode == fixed

    static StepSize automatic() { return {Mode::automatic, 0.0}; }
    static StepSize automatic_half() { return {Mode::automatic_half, 0.0}; }
    static StepSize fixed(double eta) { return {Mode::fixed, eta}; }
};

struct ResidualTrainConfig {
    StepSize step = StepSize::automatic_half();
    std::size_t max_iters = 1000;
    double grad_tol = 1e-8;
    std::size_t power_iters = 100;
    std::optional<std::size_t> retruncate_rank; // re-factor M at this rank on exit
};

struct ResidualTrainResult {
    DenseMatrix m;
    std::vector<double> loss_trace; // loss before the first step, then after each step
    double step_size = 0.0;
    double grad_norm = 0.0; // ‖∇L‖_F at the returned M
    std::size_t iterations = 0;
    bool converged = false;
    std::optional<AdapterPair> truncated;
};

/// Gradient descent on L(M) = ½‖XM − R‖_F² with R = Y − X(Ŵ + AB).
/// The step size is fixed for the whole call. A fixed η >= 2/σ_max(X)² is
/// rejected with ConfigError before iterating.
ResidualTrainResult train_residual(const DenseMatrix& x, const DenseMatrix& y,
                                   const DenseMatrix& w_hat, const AdapterPair& lora,
                                   const DenseMatrix& m0, const ResidualTrainConfig& cfg);

} // namespace salr
