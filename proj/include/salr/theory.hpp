#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace salr {

/// Q(t) = Φ(t) − ½ − t·φ(t), the truncated second moment of a standard normal
/// on [0, t]. Requires t >= 0.
double q_function(double t);

/// Standardized threshold t_p = Φ⁻¹((1 + p)/2).
double standardized_threshold(double p);
/// T_p = σ·t_p with P(|W| <= T_p) = p for W ~ N(0, σ²).
double prune_threshold(double p, double sigma);

/// Per-entry MSE of magnitude pruning a N(0, σ²) weight at rate p.
double mse_closed_form(double p, double sigma);

/// Static mask on W0.
double e1_closed(double p, double sigma);
/// Mask ranked by U = W0 + Δ, pruning W0 only.
double e2_closed(double p, double sigma, double tau);
/// Mask ranked by U, pruning U.
double e3_closed(double p, double sigma, double tau);

/// e2 − e3 = τ²/V²·(σ²p − 2(2σ² + τ²)·Q(t_p)), V² = σ² + τ². Negative for
/// large p or large τ/σ, so e3 <= e2 does not hold everywhere.
double e2_minus_e3(double p, double sigma, double tau);

struct TheoryReport {
    double p = 0.0;
    double sigma = 0.0;
    double tau = 0.0;
    std::size_t samples = 0;

    double mse_closed = 0.0;
    double e1_closed = 0.0;
    double e2_closed = 0.0;
    double e3_closed = 0.0;

    double e1_mc = 0.0;
    double e2_mc = 0.0;
    double e3_mc = 0.0;
    double e1_se = 0.0;
    double e2_se = 0.0;
    double e3_se = 0.0;
    // Standard errors of the paired differences e3 − e1 and e2 − e3.
    double e31_se = 0.0;
    double e23_se = 0.0;
};

struct MonteCarloOptions {
    std::size_t samples = 1'000'000;
    std::uint64_t seed = 0;
    // 0 selects std::thread::hardware_concurrency(). Results do not depend on it.
    unsigned threads = 0;
};

/// Closed forms plus paired Monte-Carlo estimates of the three per-entry
/// MSEs. Samples are drawn in fixed-size blocks from independent streams and
/// reduced in block order, so the result is independent of the thread count.
/// Throws DomainError for samples < 10⁴ or invalid (p, σ, τ).
TheoryReport run_theory_report(double p, double sigma, double tau, const MonteCarloOptions& opts);

} // namespace salr
