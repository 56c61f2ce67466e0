#include "salr/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "salr/bitmap.hpp"
#include "salr/container.hpp"
#include "salr/dmat_io.hpp"
#include "salr/error.hpp"
#include "salr/linalg.hpp"
#include "salr/pipeline.hpp"
#include "salr/prune.hpp"
#include "salr/residual.hpp"
#include "salr/rng.hpp"
#include "salr/theory.hpp"
#include "salr/verify.hpp"
#include "byte_io.hpp"

namespace salr {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Report {
public:
    explicit Report(std::ostream& out) : out_(out) {}
    void put(const std::string& key, const std::string& v) { out_ << key << '=' << v << '\n'; }
    void put(const std::string& key, double v) { put(key, num(v)); }
    void put(const std::string& key, std::size_t v) { put(key, std::to_string(v)); }
    void put(const std::string& key, int v) { put(key, std::to_string(v)); }
    void put(const std::string& key, bool v) { put(key, std::string(v ? "true" : "false")); }
    void put(const std::string& key, const char* v) { put(key, std::string(v)); }

private:
    std::ostream& out_;
};

DmatDtype parse_dtype(const std::string& s) {
    if (s == "f32") return DmatDtype::f32;
    if (s == "f64") return DmatDtype::f64;
    throw DomainError("--dtype must be f32 or f64, got '" + s + "'");
}

void require_sparsity(double p) {
    if (!(p >= 0.0 && p < 1.0)) throw DomainError("--sparsity must lie in [0, 1), got " + num(p));
}

PruneConfig prune_config(double sparsity, const std::string& method, std::size_t n, std::size_t m,
                         std::size_t cols) {
    require_sparsity(sparsity);
    PruneConfig cfg;
    cfg.sparsity = sparsity;
    try {
        cfg.method = parse_prune_method(method);
    } catch (const DomainError& e) {
        throw DomainError(std::string("--method: ") + e.what());
    }
    cfg.n = n;
    cfg.m = m;
    try {
        cfg.validate(cols);
    } catch (const DomainError& e) {
        throw DomainError(std::string("--n/--m: ") + e.what());
    }
    return cfg;
}

bool is_dynamic(PruneMethod m) {
    return m == PruneMethod::dynamic_mask_prune_w0 || m == PruneMethod::dynamic_on_u;
}

DenseMatrix load_delta(const std::string& path, const DenseMatrix& w0, PruneMethod method) {
    if (path.empty()) {
        if (is_dynamic(method))
            throw DomainError("--delta is required for --method " + std::string(to_string(method)));
        return {};
    }
    DenseMatrix delta = read_dmat(path).matrix;
    if (delta.rows() != w0.rows() || delta.cols() != w0.cols())
        throw ShapeError("--delta shape does not match --input");
    return delta;
}

// Matrix the mask is applied to: U = W0 + Δ for dynamic-u, W0 otherwise.
DenseMatrix pruning_target(const DenseMatrix& w0, const DenseMatrix& delta, PruneMethod method) {
    if (method == PruneMethod::dynamic_on_u) return w0 + delta;
    return w0;
}

struct CompressOutcome {
    BitmapSparseMatrix weight;
    std::vector<AdapterPair> adapters;
};

CompressOutcome compress_matrix(const DenseMatrix& w0, const DenseMatrix& delta,
                                const PruneConfig& cfg, std::size_t rank_residual,
                                std::size_t rank_lora, double lora_scale, std::uint64_t seed,
                                Report& rep) {
    const std::size_t d = w0.rows();
    const std::size_t k = w0.cols();
    const std::size_t q = std::min(d, k);
    if (rank_residual > q)
        throw DomainError("--rank must lie in [0, " + std::to_string(q) + "], got " +
                          std::to_string(rank_residual));
    if (rank_lora > q)
        throw DomainError("--rank-lora must lie in [0, " + std::to_string(q) + "], got " +
                          std::to_string(rank_lora));

    const DenseMatrix target = pruning_target(w0, delta, cfg.method);
    const MaskMatrix mask = build_mask(w0, delta, cfg);
    CompressOutcome out{encode(apply_mask(target, mask)), {}};
    const DenseMatrix w_hat = decode(out.weight);
    const DenseMatrix e = target - w_hat;
    const double dk = static_cast<double>(d) * static_cast<double>(k);
    const double total = e.frobenius_norm_sq();

    rep.put("d_in", d);
    rep.put("d_out", k);
    rep.put("method", std::string(to_string(cfg.method)));
    rep.put("sparsity_target", cfg.sparsity);
    rep.put("sparsity_achieved", 1.0 - static_cast<double>(out.weight.nnz()) / dk);
    rep.put("nnz", out.weight.nnz());
    rep.put("prune_mse", total / dk);
    const double rms = std::sqrt(target.frobenius_norm_sq() / dk);
    if (rms > 0.0) rep.put("prune_mse_closed_at_rms_sigma", mse_closed_form(cfg.sparsity, rms));

    rep.put("rank_residual", rank_residual);
    if (rank_residual > 0) {
        const AdapterPair res = build_residual_adapter(target, w_hat, rank_residual);
        const double left = (e - matmul(res.a, res.b)).frobenius_norm_sq();
        AdapterPair stored{res.a.rounded_to_float(), res.b.rounded_to_float(), 1.0};
        const double left_stored = (e - matmul(stored.a, stored.b)).frobenius_norm_sq();
        const double bound =
            (1.0 - static_cast<double>(rank_residual) / static_cast<double>(q)) * total / dk;
        rep.put("residual_energy_captured", total > 0.0 ? 1.0 - left / total : 1.0);
        rep.put("residual_mse", left / dk);
        rep.put("residual_mse_stored", left_stored / dk);
        rep.put("residual_bound", bound);
        rep.put("residual_bound_holds", left_stored / dk <= bound + 1e-9 * total / dk);
        out.adapters.push_back(res);
    }
    rep.put("rank_lora", rank_lora);
    if (rank_lora > 0) {
        Rng rng(seed);
        out.adapters.push_back(init_lora_adapter(rng, d, k, rank_lora, lora_scale));
    }
    return out;
}

void report_container_file(const std::string& path, const BitmapSparseMatrix& w,
                           std::size_t file_bytes, Report& rep) {
    const double dense = static_cast<double>(w.rows()) * static_cast<double>(w.cols()) * 4.0;
    rep.put("out", path);
    rep.put("file_bytes", file_bytes);
    rep.put("dense_f32_bytes", static_cast<std::size_t>(dense));
    rep.put("ratio_f32", dense / static_cast<double>(file_bytes));
}

std::size_t write_container_file(const std::string& path, const CompressOutcome& c) {
    const auto bytes = serialize_container(c.weight, c.adapters);
    detail::write_file(path, bytes, "SALR");
    return bytes.size();
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::format:
    case ErrorKind::corruption: return kExitFormat;
    case ErrorKind::shape:
    case ErrorKind::domain:
    case ErrorKind::configuration:
    case ErrorKind::bounds: return kExitDomain;
    case ErrorKind::verification: return kExitVerification;
    case ErrorKind::internal: return kExitInternal;
    }
    return kExitInternal;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sparse weights with low-rank residual adapters", "salr"};
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "Seed for every random draw")->envname("SALR_SEED");

    // gen
    auto* gen = app.add_subcommand("gen", "Write a seeded Gaussian matrix as DMAT");
    std::size_t gen_rows = 0, gen_cols = 0;
    double gen_sigma = 1.0;
    std::string gen_dtype = "f32", gen_out;
    gen->add_option("--rows", gen_rows)->required();
    gen->add_option("--cols", gen_cols)->required();
    gen->add_option("--sigma", gen_sigma);
    gen->add_option("--dtype", gen_dtype);
    gen->add_option("--out", gen_out)->required();

    // prune
    auto* prune = app.add_subcommand("prune", "Magnitude-prune a DMAT matrix");
    std::string pr_in, pr_delta, pr_out, pr_method = "static";
    double pr_p = 0.5;
    std::size_t pr_n = 2, pr_m = 4;
    prune->add_option("--input", pr_in)->required();
    prune->add_option("--sparsity", pr_p)->required();
    prune->add_option("--method", pr_method);
    prune->add_option("--n", pr_n);
    prune->add_option("--m", pr_m);
    prune->add_option("--delta", pr_delta);
    prune->add_option("--out", pr_out)->required();

    // encode
    auto* enc = app.add_subcommand("encode", "Prune, build a residual adapter and write SALR");
    std::string en_in, en_delta, en_out, en_method = "static";
    double en_p = 0.5;
    std::size_t en_rank = 0, en_n = 2, en_m = 4;
    enc->add_option("--input", en_in)->required();
    enc->add_option("--sparsity", en_p)->required();
    enc->add_option("--method", en_method);
    enc->add_option("--n", en_n);
    enc->add_option("--m", en_m);
    enc->add_option("--delta", en_delta);
    enc->add_option("--rank", en_rank);
    enc->add_option("--out", en_out)->required();

    // decode
    auto* dec = app.add_subcommand("decode", "Expand a SALR container to DMAT");
    std::string de_in, de_out, de_dtype = "f32";
    bool de_merge = false;
    dec->add_option("--input", de_in)->required();
    dec->add_option("--out", de_out)->required();
    dec->add_option("--dtype", de_dtype);
    dec->add_flag("--merge-adapters", de_merge);

    // compress
    auto* comp = app.add_subcommand("compress", "Prune, add residual and LoRA adapters, write SALR");
    std::string co_in, co_delta, co_out, co_method = "static";
    double co_p = 0.5, co_scale = 1.0;
    std::size_t co_rr = 16, co_rl = 0, co_n = 2, co_m = 4;
    comp->add_option("--input", co_in)->required();
    comp->add_option("--sparsity", co_p)->required();
    comp->add_option("--method", co_method);
    comp->add_option("--n", co_n);
    comp->add_option("--m", co_m);
    comp->add_option("--delta", co_delta);
    comp->add_option("--rank-residual", co_rr);
    comp->add_option("--rank-lora", co_rl);
    comp->add_option("--lora-scale", co_scale);
    comp->add_option("--out", co_out)->required();

    // verify
    auto* ver = app.add_subcommand("verify", "Run a theory verification suite");
    int ve_theorem = 0;
    VerifyParams vp;
    std::string ve_csv;
    ver->add_option("--theorem", ve_theorem)->required();
    ver->add_option("--p", vp.p);
    ver->add_option("--sigma", vp.sigma);
    ver->add_option("--tau", vp.tau);
    ver->add_option("--samples", vp.samples);
    ver->add_option("--grid", vp.grid);
    ver->add_option("--trials", vp.trials);
    ver->add_option("--threads", vp.threads);
    ver->add_option("--csv", ve_csv);

    // spectrum
    auto* spec = app.add_subcommand("spectrum", "Cumulative singular-value energy of a matrix");
    std::string sp_in, sp_out, sp_method = "static";
    std::optional<double> sp_p;
    spec->add_option("--input", sp_in)->required();
    spec->add_option("--out", sp_out);
    spec->add_option("--sparsity", sp_p, "Use the pruning residual at this sparsity");
    spec->add_option("--method", sp_method);

    // stats
    auto* stats = app.add_subcommand("stats", "Section sizes and compression ratios of a SALR file");
    std::string st_in;
    stats->add_option("--input", st_in)->required();

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "Time the decode+matmul pipeline");
    std::string be_in, be_overlap = "on";
    std::size_t be_batch = 8, be_repeats = 5;
    PipelineConfig be_cfg;
    bench_cmd->add_option("--input", be_in)->required();
    bench_cmd->add_option("--batch", be_batch);
    bench_cmd->add_option("--tile-rows", be_cfg.tile_rows);
    bench_cmd->add_option("--tile-col-bytes", be_cfg.tile_col_bytes);
    bench_cmd->add_option("--ring", be_cfg.ring_capacity);
    bench_cmd->add_option("--overlap", be_overlap)->check(CLI::IsMember({"on", "off"}));
    bench_cmd->add_option("--repeats", be_repeats);

    std::vector<const char*> argv{"salr"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    Report rep(out);
    try {
        if (gen->parsed()) {
            if (gen_rows == 0 || gen_cols == 0) throw DomainError("--rows and --cols must be >= 1");
            if (!(gen_sigma >= 0.0) || !std::isfinite(gen_sigma))
                throw DomainError("--sigma must be finite and >= 0, got " + num(gen_sigma));
            const DmatDtype dtype = parse_dtype(gen_dtype);
            Rng rng(seed);
            DenseMatrix m = sample_gaussian_matrix(rng, gen_rows, gen_cols, gen_sigma);
            if (dtype == DmatDtype::f32) m = m.rounded_to_float();
            write_dmat(gen_out, m, dtype);
            rep.put("rows", gen_rows);
            rep.put("cols", gen_cols);
            rep.put("sigma", gen_sigma);
            rep.put("seed", static_cast<std::size_t>(seed));
            rep.put("out", gen_out);
        } else if (prune->parsed()) {
            const DmatFile in = read_dmat(pr_in);
            const PruneConfig cfg = prune_config(pr_p, pr_method, pr_n, pr_m, in.matrix.cols());
            const DenseMatrix delta = load_delta(pr_delta, in.matrix, cfg.method);
            const MaskMatrix mask = build_mask(in.matrix, delta, cfg);
            const DenseMatrix pruned =
                apply_mask(pruning_target(in.matrix, delta, cfg.method), mask);
            write_dmat(pr_out, pruned, in.dtype);
            const double count = static_cast<double>(in.matrix.rows() * in.matrix.cols());
            rep.put("method", std::string(to_string(cfg.method)));
            rep.put("sparsity_target", cfg.sparsity);
            rep.put("kept", mask.kept_count());
            rep.put("sparsity_achieved", 1.0 - static_cast<double>(mask.kept_count()) / count);
            const MaskErrorStats st = mask_error_stats(in.matrix, delta, mask, cfg.method);
            rep.put("mse", st.mean);
            rep.put("mse_se", st.standard_error);
            rep.put("out", pr_out);
        } else if (enc->parsed() || comp->parsed()) {
            const bool is_enc = enc->parsed();
            const std::string& in_path = is_enc ? en_in : co_in;
            const DenseMatrix w0 = read_dmat(in_path).matrix;
            const PruneConfig cfg =
                is_enc ? prune_config(en_p, en_method, en_n, en_m, w0.cols())
                       : prune_config(co_p, co_method, co_n, co_m, w0.cols());
            const DenseMatrix delta = load_delta(is_enc ? en_delta : co_delta, w0, cfg.method);
            if (!std::isfinite(co_scale)) throw DomainError("--lora-scale must be finite");
            const CompressOutcome c =
                compress_matrix(w0, delta, cfg, is_enc ? en_rank : co_rr, is_enc ? 0 : co_rl,
                                co_scale, seed, rep);
            const std::string& out_path = is_enc ? en_out : co_out;
            const std::size_t bytes = write_container_file(out_path, c);
            report_container_file(out_path, c.weight, bytes, rep);
        } else if (dec->parsed()) {
            const DmatDtype dtype = parse_dtype(de_dtype);
            const SalrContainer c = read_container(de_in);
            DenseMatrix w = decode(c.weight);
            if (de_merge)
                for (const auto& a : c.adapters) w += a.product();
            write_dmat(de_out, w, dtype);
            rep.put("rows", w.rows());
            rep.put("cols", w.cols());
            rep.put("adapters_merged", de_merge ? c.adapters.size() : std::size_t{0});
            rep.put("out", de_out);
        } else if (ver->parsed()) {
            if (ve_theorem < 1 || ve_theorem > 4)
                throw DomainError("--theorem must be 1, 2, 3 or 4, got " + std::to_string(ve_theorem));
            vp.seed = seed;
            const VerifyReport r = run_verification(ve_theorem, vp);
            for (const auto& [k, v] : r.values) rep.put(k, v);
            for (const auto& c : r.checks)
                rep.put("check." + c.name, std::string(c.pass ? "pass" : "FAIL"));
            if (!ve_csv.empty()) {
                std::ofstream f(ve_csv, std::ios::binary);
                f << r.csv_header << '\n';
                for (const auto& row : r.csv_rows) f << row << '\n';
                if (!f) throw FormatError("cannot write --csv file " + ve_csv);
            }
            rep.put("passed", r.passed());
            if (const auto bad = r.first_failure()) {
                rep.put("first_failure", *bad);
                err << "verification failed: " << *bad << '\n';
                return kExitVerification;
            }
        } else if (spec->parsed()) {
            DenseMatrix m = read_dmat(sp_in).matrix;
            if (sp_p) {
                const PruneConfig cfg = prune_config(*sp_p, sp_method, 2, 4, m.cols());
                if (is_dynamic(cfg.method))
                    throw DomainError("--method for spectrum must be static or nm");
                m = m - apply_mask(m, build_mask(m, DenseMatrix{}, cfg));
            }
            const SpectrumReport s = spectrum(m);
            rep.put("q", s.singular_values.size());
            rep.put("sigma_max", s.singular_values.front());
            rep.put("effective_rank", s.effective_rank);
            rep.put("i99", s.i99);
            if (!sp_out.empty()) {
                std::ofstream f(sp_out, std::ios::binary);
                f << "index,cumulative_energy\n";
                for (std::size_t i = 0; i < s.cumulative_energy.size(); ++i)
                    f << (i + 1) << ',' << num(s.cumulative_energy[i]) << '\n';
                if (!f) throw FormatError("cannot write --out file " + sp_out);
                rep.put("out", sp_out);
            }
        } else if (stats->parsed()) {
            const auto bytes = detail::read_file(st_in, "SALR");
            const SalrContainer c = parse_container(bytes);
            const std::size_t d = c.weight.rows();
            const std::size_t k = c.weight.cols();
            std::vector<std::size_t> ranks;
            std::size_t adapter_params = 0;
            for (const auto& a : c.adapters) {
                ranks.push_back(a.rank());
                adapter_params += a.rank() * (d + k);
            }
            const ContainerSizes sz = container_sizes(d, k, c.weight.nnz(), ranks);
            const double count = static_cast<double>(d) * static_cast<double>(k);
            rep.put("d_in", d);
            rep.put("d_out", k);
            rep.put("nnz", c.weight.nnz());
            rep.put("sparsity", 1.0 - static_cast<double>(c.weight.nnz()) / count);
            rep.put("adapters", c.adapters.size());
            for (std::size_t i = 0; i < c.adapters.size(); ++i) {
                rep.put("adapter" + std::to_string(i) + ".rank", c.adapters[i].rank());
                rep.put("adapter" + std::to_string(i) + ".scale", c.adapters[i].scale);
            }
            rep.put("header_bytes", sz.header);
            rep.put("bitmap_bytes", sz.bitmap);
            rep.put("values_bytes", sz.values);
            rep.put("adapter_bytes", sz.adapters);
            rep.put("file_bytes", bytes.size());
            rep.put("formula_bytes", sz.total());
            rep.put("size_matches_formula", sz.total() == bytes.size());
            rep.put("ratio_f32_measured", count * 4.0 / static_cast<double>(bytes.size()));
            rep.put("ratio_f16_formula", compression_ratio_for_nnz(d, k, c.weight.nnz(), 2,
                                                                   adapter_params, sz.header));
            rep.put("ratio_f16_values_only",
                    c.weight.nnz() == 0 ? INFINITY : count / static_cast<double>(c.weight.nnz()));
            rep.put("note",
                    "ratio_f16_formula counts one bitmap bit per entry plus adapters and header; "
                    "ratio_f16_values_only ignores the bitmap, which is the only accounting that "
                    "reaches 2x at 50% sparsity");
        } else if (bench_cmd->parsed()) {
            be_cfg.overlap = be_overlap == "on";
            if (be_batch == 0) throw DomainError("--batch must be >= 1");
            be_cfg.validate();
            const SalrContainer c = read_container(be_in);
            const BenchResult b = bench(be_batch, c.weight, be_cfg, be_repeats, seed);
            rep.put("rows", c.weight.rows());
            rep.put("cols", c.weight.cols());
            rep.put("batch", be_batch);
            rep.put("tile_rows", be_cfg.tile_rows);
            rep.put("tile_col_bytes", be_cfg.tile_col_bytes);
            rep.put("ring", be_cfg.ring_capacity);
            rep.put("tiles", b.tiles);
            rep.put("repeats", b.repeats);
            rep.put("outputs_bitwise_equal", true);
            rep.put("serial_ms", b.serial_ms);
            rep.put("overlapped_ms", b.overlapped_ms);
            rep.put("speedup", b.speedup);
            rep.put("overlap", be_overlap);
            rep.put("time_ms", be_cfg.overlap ? b.overlapped_ms : b.serial_ms);
        }
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitOk;
}

} // namespace salr
