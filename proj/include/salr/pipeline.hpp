#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>

#include "salr/bitmap.hpp"
#include "salr/fusion.hpp"
#include "salr/matrix.hpp"

namespace salr {

struct PipelineConfig {
    std::size_t tile_rows = 64;      // rows of the sparse weight per tile
    std::size_t tile_col_bytes = 8;  // byte blocks per tile (8 columns each)
    std::size_t ring_capacity = 4;   // tiles in flight
    bool overlap = true;             // decode on a worker thread while the caller multiplies

    /// Throws ConfigError for zero tile dimensions or ring_capacity < 2 with overlap.
    void validate() const;
};

enum class SlotState : int { empty = 0, filled = 1, consumed = 2, poisoned = 3 };

/// Hooks and counters for protocol auditing. Callbacks run on the decoder and
/// compute roles respectively and may sleep or yield to perturb scheduling.
struct PipelineProbe {
    std::function<void(std::size_t tile)> before_decode;
    std::function<void(std::size_t tile)> before_compute;

    std::atomic<std::size_t> produced{0};
    std::atomic<std::size_t> consumed{0};
    std::atomic<std::size_t> violations{0};
};

/// y = x·decode(s), decoding tiles of s and multiplying them in ascending
/// tile order. Every output cell accumulates over the inner index in
/// ascending order, so the result is bitwise independent of the tile shape,
/// ring capacity and overlap flag, and equals matmul(x, decode(s)).
DenseMatrix pipelined_matmul(const DenseMatrix& x, const BitmapSparseMatrix& s,
                             const PipelineConfig& cfg, PipelineProbe* probe = nullptr);

/// pipelined_matmul(x, s) + apply_fused(x, fused). With overlap on, the
/// adapter product runs on the caller thread while the first tiles decode.
/// An empty FusedAdapters (no adapters) contributes nothing.
DenseMatrix pipelined_forward(const DenseMatrix& x, const BitmapSparseMatrix& s,
                              const FusedAdapters& fused, const PipelineConfig& cfg,
                              PipelineProbe* probe = nullptr);

struct BenchResult {
    double serial_ms = 0.0;     // median, overlap off
    double overlapped_ms = 0.0; // median, overlap on
    double speedup = 0.0;       // serial / overlapped
    std::size_t tiles = 0;
    std::size_t repeats = 0;
};

/// Times pipelined_matmul for a seeded batch × s.rows() input with overlap
/// off and on. Outputs of both modes are compared bitwise before timing
/// (VerificationError on mismatch). One warm-up run per mode is excluded.
BenchResult bench(std::size_t batch, const BitmapSparseMatrix& s, const PipelineConfig& cfg,
                  std::size_t repeats, std::uint64_t seed = 0);

/// Number of tiles the configuration splits `s` into.
std::size_t tile_count(const BitmapSparseMatrix& s, const PipelineConfig& cfg);

} // namespace salr
