#pragma once

#include <cstddef>
#include <cstdint>

#include "salr/matrix.hpp"

namespace salr {

/// Counter-based generator: the n-th output is a SplitMix64 finalizer applied
/// to seed + n·γ, so a stream depends only on (seed, position) and is
/// reproducible on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept : seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t position() const noexcept { return counter_; }

    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    /// Standard normal via Box–Muller; both variates of each pair are used.
    double gaussian() noexcept;

    /// Independent child stream keyed by `stream`; does not advance *this.
    Rng split(std::uint64_t stream) const noexcept;

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// i.i.d. N(0, sigma²) entries, row-major, drawn from `rng`.
DenseMatrix sample_gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double sigma);

} // namespace salr
