#include "salr/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "salr/error.hpp"
#include "salr/rng.hpp"

namespace salr {

namespace {

struct TileGeometry {
    std::size_t row_tiles = 0;
    std::size_t col_tiles = 0;
    std::size_t tile_rows = 0;
    std::size_t tile_blocks = 0;

    TileGeometry(const BitmapSparseMatrix& s, const PipelineConfig& cfg)
        : row_tiles((s.rows() + cfg.tile_rows - 1) / cfg.tile_rows),
          col_tiles((s.bytes_per_row() + cfg.tile_col_bytes - 1) / cfg.tile_col_bytes),
          tile_rows(cfg.tile_rows), tile_blocks(cfg.tile_col_bytes) {}

    std::size_t count() const noexcept { return row_tiles * col_tiles; }

    // Column group major, so one column group's tiles run in ascending row order.
    IndexRange rows(const BitmapSparseMatrix& s, std::size_t tile) const noexcept {
        const std::size_t rb = tile % row_tiles;
        return {rb * tile_rows, std::min(s.rows(), (rb + 1) * tile_rows)};
    }
    IndexRange blocks(const BitmapSparseMatrix& s, std::size_t tile) const noexcept {
        const std::size_t cb = tile / row_tiles;
        return {cb * tile_blocks, std::min(s.bytes_per_row(), (cb + 1) * tile_blocks)};
    }
};

struct TileSlot {
    std::size_t tile_id = 0;
    std::vector<double> tile;
    std::atomic<int> state{static_cast<int>(SlotState::empty)};
    // Audit flags: set while a role touches the tile buffer.
    std::atomic<bool> writing{false};
    std::atomic<bool> reading{false};
};

class TileRing {
public:
    TileRing(std::size_t capacity, std::size_t tile_elems)
        : capacity_(capacity), slots_(std::make_unique<TileSlot[]>(capacity)) {
        for (std::size_t i = 0; i < capacity_; ++i) slots_[i].tile.resize(tile_elems);
    }

    TileSlot& slot_for(std::size_t tile) noexcept { return slots_[tile % capacity_]; }

    // Blocks until the slot reaches `want` or the ring is poisoned.
    static SlotState wait_for(TileSlot& slot, SlotState want) noexcept {
        for (;;) {
            const int s = slot.state.load(std::memory_order_acquire);
            if (s == static_cast<int>(want) || s == static_cast<int>(SlotState::poisoned))
                return static_cast<SlotState>(s);
            slot.state.wait(s, std::memory_order_acquire);
        }
    }

    // Returns false if the transition did not start from `from`.
    static bool transition(TileSlot& slot, SlotState from, SlotState to) noexcept {
        int expected = static_cast<int>(from);
        const bool ok = slot.state.compare_exchange_strong(expected, static_cast<int>(to),
                                                           std::memory_order_acq_rel,
                                                           std::memory_order_acquire);
        slot.state.notify_all();
        return ok;
    }

    void poison() noexcept {
        for (std::size_t i = 0; i < capacity_; ++i) {
            slots_[i].state.store(static_cast<int>(SlotState::poisoned), std::memory_order_release);
            slots_[i].state.notify_all();
        }
    }

private:
    std::size_t capacity_;
    std::unique_ptr<TileSlot[]> slots_;
};

void note_violation(PipelineProbe* probe) noexcept {
    if (probe) probe->violations.fetch_add(1, std::memory_order_relaxed);
}

class Engine {
public:
    Engine(const DenseMatrix& x, const BitmapSparseMatrix& s, const PipelineConfig& cfg,
           PipelineProbe* probe)
        : x_(x), s_(s), geo_(s, cfg), probe_(probe), acc_(x.rows(), s.cols()) {}

    DenseMatrix run(bool overlap, std::size_t capacity, const FusedAdapters* fused) {
        const std::size_t elems = geo_.tile_rows * std::min(geo_.tile_blocks * 8, s_.cols());
        if (!overlap) {
            TileSlot slot;
            slot.tile.resize(elems);
            DenseMatrix dy;
            if (fused) dy = apply_fused(x_, *fused);
            for (std::size_t t = 0; t < geo_.count(); ++t) {
                if (probe_ && probe_->before_decode) probe_->before_decode(t);
                decode_tile(t, slot.tile);
                if (probe_) probe_->produced.fetch_add(1, std::memory_order_relaxed);
                if (probe_ && probe_->before_compute) probe_->before_compute(t);
                multiply_tile(t, slot.tile);
                if (probe_) probe_->consumed.fetch_add(1, std::memory_order_relaxed);
            }
            return finish(fused ? &dy : nullptr);
        }

        TileRing ring(capacity, elems);
        std::exception_ptr decoder_error;
        std::exception_ptr compute_error;
        DenseMatrix dy;
        {
            std::jthread decoder([&] {
                try {
                    decode_loop(ring);
                } catch (...) {
                    decoder_error = std::current_exception();
                    ring.poison();
                }
            });
            try {
                if (fused) dy = apply_fused(x_, *fused);
                compute_loop(ring);
            } catch (...) {
                compute_error = std::current_exception();
                ring.poison();
            }
        }
        if (decoder_error) std::rethrow_exception(decoder_error);
        if (compute_error) std::rethrow_exception(compute_error);
        return finish(fused ? &dy : nullptr);
    }

private:
    void decode_tile(std::size_t t, std::vector<double>& buf) const {
        const IndexRange blocks = geo_.blocks(s_, t);
        decode_block_into(s_, geo_.rows(s_, t), blocks, buf, block_columns(s_, blocks));
    }

    void multiply_tile(std::size_t t, const std::vector<double>& buf) {
        const IndexRange rows = geo_.rows(s_, t);
        const IndexRange blocks = geo_.blocks(s_, t);
        const std::size_t ncols = block_columns(s_, blocks);
        const std::size_t c0 = 8 * blocks.begin;
        for (std::size_t n = 0; n < x_.rows(); ++n) {
            double* out = &acc_(n, 0) + c0;
            const double* xn = &x_(n, 0);
            for (std::size_t k = rows.begin; k < rows.end; ++k) {
                const double xv = xn[k];
                const double* w = buf.data() + (k - rows.begin) * ncols;
                for (std::size_t j = 0; j < ncols; ++j) out[j] += xv * w[j];
            }
        }
    }

    void decode_loop(TileRing& ring) {
        for (std::size_t t = 0; t < geo_.count(); ++t) {
            TileSlot& slot = ring.slot_for(t);
            if (TileRing::wait_for(slot, SlotState::empty) == SlotState::poisoned) return;
            if (probe_ && probe_->before_decode) probe_->before_decode(t);
            if (slot.reading.load(std::memory_order_acquire)) note_violation(probe_);
            slot.writing.store(true, std::memory_order_release);
            slot.tile_id = t;
            decode_tile(t, slot.tile);
            slot.writing.store(false, std::memory_order_release);
            if (!TileRing::transition(slot, SlotState::empty, SlotState::filled)) {
                if (slot.state.load() == static_cast<int>(SlotState::poisoned)) return;
                note_violation(probe_);
            }
            if (probe_) probe_->produced.fetch_add(1, std::memory_order_relaxed);
        }
    }

    void compute_loop(TileRing& ring) {
        for (std::size_t t = 0; t < geo_.count(); ++t) {
            TileSlot& slot = ring.slot_for(t);
            if (TileRing::wait_for(slot, SlotState::filled) == SlotState::poisoned)
                throw InternalError("pipeline: decoder stopped before tile " + std::to_string(t));
            if (probe_ && probe_->before_compute) probe_->before_compute(t);
            slot.reading.store(true, std::memory_order_release);
            if (slot.writing.load(std::memory_order_acquire) || slot.tile_id != t)
                note_violation(probe_);
            multiply_tile(t, slot.tile);
            if (slot.writing.load(std::memory_order_acquire) || slot.tile_id != t)
                note_violation(probe_);
            slot.reading.store(false, std::memory_order_release);
            if (!TileRing::transition(slot, SlotState::filled, SlotState::consumed))
                note_violation(probe_);
            if (probe_) probe_->consumed.fetch_add(1, std::memory_order_relaxed);
            if (!TileRing::transition(slot, SlotState::consumed, SlotState::empty))
                note_violation(probe_);
        }
    }

    DenseMatrix finish(const DenseMatrix* dy) {
        if (dy) acc_ += *dy;
        return std::move(acc_);
    }

    const DenseMatrix& x_;
    const BitmapSparseMatrix& s_;
    TileGeometry geo_;
    PipelineProbe* probe_;
    DenseMatrix acc_;
};

void check_conformable(const DenseMatrix& x, const BitmapSparseMatrix& s) {
    if (x.cols() != s.rows())
        throw ShapeError("pipeline: x has " + std::to_string(x.cols()) +
                         " columns, sparse weight has " + std::to_string(s.rows()) + " rows");
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

void PipelineConfig::validate() const {
    if (tile_rows == 0 || tile_col_bytes == 0)
        throw ConfigError("pipeline: tile dimensions must be positive");
    if (ring_capacity == 0 || (overlap && ring_capacity < 2))
        throw ConfigError("pipeline: ring capacity must be >= 2 when overlap is on");
}

std::size_t tile_count(const BitmapSparseMatrix& s, const PipelineConfig& cfg) {
    cfg.validate();
    return TileGeometry(s, cfg).count();
}

DenseMatrix pipelined_matmul(const DenseMatrix& x, const BitmapSparseMatrix& s,
                             const PipelineConfig& cfg, PipelineProbe* probe) {
    cfg.validate();
    check_conformable(x, s);
    return Engine(x, s, cfg, probe).run(cfg.overlap, cfg.ring_capacity, nullptr);
}

DenseMatrix pipelined_forward(const DenseMatrix& x, const BitmapSparseMatrix& s,
                              const FusedAdapters& fused, const PipelineConfig& cfg,
                              PipelineProbe* probe) {
    cfg.validate();
    check_conformable(x, s);
    const bool has_adapters = fused.count() > 0;
    if (has_adapters && (fused.d_in() != s.rows() || fused.d_out() != s.cols()))
        throw ShapeError("pipeline: fused adapters do not match the sparse weight shape");
    return Engine(x, s, cfg, probe).run(cfg.overlap, cfg.ring_capacity,
                                        has_adapters ? &fused : nullptr);
}

BenchResult bench(std::size_t batch, const BitmapSparseMatrix& s, const PipelineConfig& cfg,
                  std::size_t repeats, std::uint64_t seed) {
    if (repeats < 3) throw DomainError("bench: repeats must be >= 3");
    if (batch == 0) throw DomainError("bench: batch must be >= 1");
    PipelineConfig serial = cfg;
    serial.overlap = false;
    PipelineConfig overlapped = cfg;
    overlapped.overlap = true;
    overlapped.validate();

    Rng rng(seed);
    const DenseMatrix x = sample_gaussian_matrix(rng, batch, s.rows(), 1.0);

    // Correctness gate; also serves as the warm-up run of each mode.
    if (pipelined_matmul(x, s, serial) != pipelined_matmul(x, s, overlapped))
        throw VerificationError("bench: serial and overlapped outputs differ");

    auto time_ms = [&](const PipelineConfig& c) {
        const auto t0 = std::chrono::steady_clock::now();
        DenseMatrix y = pipelined_matmul(x, s, c);
        const auto t1 = std::chrono::steady_clock::now();
        if (y.rows() != batch) throw InternalError("bench: unexpected output shape");
        return std::chrono::duration<double, std::milli>(t1 - t0).count();
    };

    std::vector<double> ts;
    std::vector<double> to;
    for (std::size_t i = 0; i < repeats; ++i) {
        ts.push_back(time_ms(serial));
        to.push_back(time_ms(overlapped));
    }
    BenchResult r;
    r.serial_ms = median(ts);
    r.overlapped_ms = median(to);
    r.speedup = r.overlapped_ms > 0.0 ? r.serial_ms / r.overlapped_ms : 0.0;
    r.tiles = tile_count(s, cfg);
    r.repeats = repeats;
    return r;
}

} // namespace salr
