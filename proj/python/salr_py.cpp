#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "salr/bitmap.hpp"
#include "salr/cli.hpp"
#include "salr/container.hpp"
#include "salr/dmat_io.hpp"
#include "salr/error.hpp"
#include "salr/fusion.hpp"
#include "salr/linalg.hpp"
#include "salr/pipeline.hpp"
#include "salr/prune.hpp"
#include "salr/residual.hpp"
#include "salr/rng.hpp"
#include "salr/theory.hpp"

namespace py = pybind11;
using namespace salr;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

DenseMatrix to_dense(const Array& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-D array, got " + std::to_string(a.ndim()) + "-D");
    const auto r = static_cast<std::size_t>(a.shape(0)), c = static_cast<std::size_t>(a.shape(1));
    return DenseMatrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

Array to_array(const DenseMatrix& m) {
    Array out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

DenseMatrix optional_dense(const std::optional<Array>& a) { return a ? to_dense(*a) : DenseMatrix{}; }

std::vector<AdapterPair> to_adapters(const std::vector<py::tuple>& items) {
    std::vector<AdapterPair> out;
    for (const auto& t : items) {
        if (t.size() != 2 && t.size() != 3) throw ShapeError("adapter must be (A, B) or (A, B, scale)");
        out.push_back({to_dense(t[0].cast<Array>()), to_dense(t[1].cast<Array>()),
                       t.size() == 3 ? t[2].cast<double>() : 1.0});
    }
    return out;
}

py::tuple from_adapter(const AdapterPair& a) { return py::make_tuple(to_array(a.a), to_array(a.b), a.scale); }

PruneConfig prune_config(double sparsity, const std::string& method, std::size_t n, std::size_t m) {
    PruneConfig cfg;
    cfg.sparsity = sparsity;
    cfg.method = parse_prune_method(method);
    cfg.n = n;
    cfg.m = m;
    return cfg;
}

} // namespace

PYBIND11_MODULE(_salr, mod) {
    mod.doc() = "Sparse weights with low-rank adapters: pruning, residual adapters, bitmap storage.";

    auto base = py::register_exception<Error>(mod, "SalrError", PyExc_RuntimeError);
    py::register_exception<ShapeError>(mod, "ShapeError", base.ptr());
    py::register_exception<DomainError>(mod, "DomainError", base.ptr());
    py::register_exception<ConfigError>(mod, "ConfigError", base.ptr());
    py::register_exception<FormatError>(mod, "FormatError", base.ptr());
    py::register_exception<CorruptionError>(mod, "CorruptionError", base.ptr());
    py::register_exception<BoundsError>(mod, "BoundsError", base.ptr());
    py::register_exception<VerificationError>(mod, "VerificationError", base.ptr());

    // theory
    mod.def("mse_closed_form", &mse_closed_form, py::arg("p"), py::arg("sigma") = 1.0);
    mod.def("e1_closed", &e1_closed, py::arg("p"), py::arg("sigma"));
    mod.def("e2_closed", &e2_closed, py::arg("p"), py::arg("sigma"), py::arg("tau"));
    mod.def("e3_closed", &e3_closed, py::arg("p"), py::arg("sigma"), py::arg("tau"));
    mod.def("e2_minus_e3", &e2_minus_e3, py::arg("p"), py::arg("sigma"), py::arg("tau"));
    mod.def(
        "theory_report",
        [](double p, double sigma, double tau, std::size_t samples, std::uint64_t seed) {
            MonteCarloOptions o;
            o.samples = samples;
            o.seed = seed;
            TheoryReport r;
            {
                py::gil_scoped_release nogil;
                r = run_theory_report(p, sigma, tau, o);
            }
            py::dict d;
            d["p"] = r.p;
            d["sigma"] = r.sigma;
            d["tau"] = r.tau;
            d["samples"] = r.samples;
            d["mse_closed"] = r.mse_closed;
            d["e1_closed"] = r.e1_closed;
            d["e2_closed"] = r.e2_closed;
            d["e3_closed"] = r.e3_closed;
            d["e1_mc"] = r.e1_mc;
            d["e2_mc"] = r.e2_mc;
            d["e3_mc"] = r.e3_mc;
            d["e1_se"] = r.e1_se;
            d["e2_se"] = r.e2_se;
            d["e3_se"] = r.e3_se;
            d["e31_se"] = r.e31_se;
            d["e23_se"] = r.e23_se;
            return d;
        },
        py::arg("p"), py::arg("sigma") = 1.0, py::arg("tau") = 0.0, py::arg("samples") = 1'000'000,
        py::arg("seed") = 0);

    // pruning
    mod.def(
        "prune_mask",
        [](const Array& w0, double sparsity, const std::string& method, std::optional<Array> delta,
           std::size_t n, std::size_t m) {
            const MaskMatrix mask =
                build_mask(to_dense(w0), optional_dense(delta), prune_config(sparsity, method, n, m));
            py::array_t<bool> out({mask.rows(), mask.cols()});
            auto v = out.mutable_unchecked<2>();
            for (std::size_t i = 0; i < mask.rows(); ++i)
                for (std::size_t j = 0; j < mask.cols(); ++j) v(i, j) = mask.kept(i, j);
            return out;
        },
        py::arg("w0"), py::arg("sparsity"), py::arg("method") = "static", py::arg("delta") = py::none(),
        py::arg("n") = 2, py::arg("m") = 4);
    mod.def(
        "prune",
        [](const Array& w0, double sparsity, const std::string& method, std::optional<Array> delta,
           std::size_t n, std::size_t m) {
            const DenseMatrix w = to_dense(w0);
            return to_array(
                apply_mask(w, build_mask(w, optional_dense(delta), prune_config(sparsity, method, n, m))));
        },
        py::arg("w0"), py::arg("sparsity"), py::arg("method") = "static", py::arg("delta") = py::none(),
        py::arg("n") = 2, py::arg("m") = 4);
    mod.def("kept_entries", &kept_entries, py::arg("sparsity"), py::arg("count"));

    // linear algebra
    mod.def("svd", [](const Array& m) {
        const SvdResult f = svd(to_dense(m));
        return py::make_tuple(to_array(f.u), f.s, to_array(f.vt));
    });
    mod.def("matmul", [](const Array& a, const Array& b) { return to_array(matmul(to_dense(a), to_dense(b))); });
    mod.def("matmul_call_count", &matmul_call_count);

    // adapters
    mod.def(
        "residual_adapter",
        [](const Array& w, const Array& w_hat, std::size_t rank) {
            return from_adapter(build_residual_adapter(to_dense(w), to_dense(w_hat), rank));
        },
        py::arg("w"), py::arg("w_hat"), py::arg("rank"));
    mod.def(
        "lora_adapter",
        [](std::size_t d, std::size_t k, std::size_t rank, std::uint64_t seed, double scale) {
            Rng rng(seed);
            return from_adapter(init_lora_adapter(rng, d, k, rank, scale));
        },
        py::arg("d"), py::arg("k"), py::arg("rank"), py::arg("seed") = 0, py::arg("scale") = 1.0);
    mod.def(
        "spectrum",
        [](const Array& e) {
            const SpectrumReport r = spectrum(to_dense(e));
            py::dict d;
            d["singular_values"] = r.singular_values;
            d["cumulative_energy"] = r.cumulative_energy;
            d["effective_rank"] = r.effective_rank;
            return d;
        },
        py::arg("e"));
    mod.def(
        "theorem3_check",
        [](const Array& e, std::size_t rank) {
            const Theorem3Check c = verify_theorem3_bound(to_dense(e), rank);
            return py::make_tuple(c.lhs, c.rhs, c.holds);
        },
        py::arg("e"), py::arg("rank"));
    mod.def("optimal_step_size", [](const Array& x) { return optimal_step_size(to_dense(x), 100); },
            py::arg("x"));
    mod.def(
        "train_residual",
        [](const Array& x, const Array& y, const Array& w_hat, const std::vector<py::tuple>& lora,
           std::optional<double> eta, std::size_t max_iters, double grad_tol) {
            const auto ad = to_adapters(lora);
            if (ad.size() != 1) throw ShapeError("train_residual takes exactly one LoRA adapter");
            const DenseMatrix xm = to_dense(x), wm = to_dense(w_hat);
            ResidualTrainConfig cfg;
            cfg.step = eta ? StepSize::fixed(*eta) : StepSize::automatic_half();
            cfg.max_iters = max_iters;
            cfg.grad_tol = grad_tol;
            const ResidualTrainResult r =
                train_residual(xm, to_dense(y), wm, ad[0], DenseMatrix(wm.rows(), wm.cols()), cfg);
            py::dict d;
            d["m"] = to_array(r.m);
            d["loss_trace"] = r.loss_trace;
            d["step_size"] = r.step_size;
            d["grad_norm"] = r.grad_norm;
            d["iterations"] = r.iterations;
            d["converged"] = r.converged;
            return d;
        },
        py::arg("x"), py::arg("y"), py::arg("w_hat"), py::arg("lora"), py::arg("eta") = py::none(),
        py::arg("max_iters") = 1000, py::arg("grad_tol") = 1e-8);

    // fusion
    mod.def(
        "apply_fused",
        [](const Array& x, const std::vector<py::tuple>& adapters) {
            return to_array(apply_fused(to_dense(x), fuse(to_adapters(adapters))));
        },
        py::arg("x"), py::arg("adapters"));
    mod.def(
        "apply_sequential",
        [](const Array& x, const std::vector<py::tuple>& adapters) {
            return to_array(apply_sequential(to_dense(x), to_adapters(adapters)));
        },
        py::arg("x"), py::arg("adapters"));

    // bitmap storage
    py::class_<BitmapSparseMatrix>(mod, "BitmapSparseMatrix")
        .def_property_readonly("rows", &BitmapSparseMatrix::rows)
        .def_property_readonly("cols", &BitmapSparseMatrix::cols)
        .def_property_readonly("nnz", &BitmapSparseMatrix::nnz)
        .def_property_readonly("density", &BitmapSparseMatrix::density)
        .def_property_readonly("bitmap",
                               [](const BitmapSparseMatrix& s) {
                                   const auto b = s.bitmap();
                                   return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
                               })
        .def_property_readonly("values",
                               [](const BitmapSparseMatrix& s) {
                                   const auto v = s.values();
                                   return py::array_t<float>(static_cast<py::ssize_t>(v.size()), v.data());
                               })
        .def("__eq__", [](const BitmapSparseMatrix& a, const BitmapSparseMatrix& b) { return a == b; });
    mod.def("encode", [](const Array& m) { return encode(to_dense(m)); }, py::arg("m"));
    mod.def("decode", [](const BitmapSparseMatrix& s) { return to_array(decode(s)); }, py::arg("s"));

    mod.def(
        "pipelined_matmul",
        [](const Array& x, const BitmapSparseMatrix& s, std::size_t tile_rows, std::size_t tile_col_bytes,
           std::size_t ring, bool overlap) {
            const DenseMatrix xm = to_dense(x);
            DenseMatrix y;
            {
                py::gil_scoped_release nogil;
                y = pipelined_matmul(xm, s, PipelineConfig{tile_rows, tile_col_bytes, ring, overlap});
            }
            return to_array(y);
        },
        py::arg("x"), py::arg("s"), py::arg("tile_rows") = 64, py::arg("tile_col_bytes") = 8,
        py::arg("ring") = 4, py::arg("overlap") = true);

    // files
    mod.def(
        "write_dmat",
        [](const std::filesystem::path& path, const Array& m, const std::string& dtype) {
            if (dtype != "f32" && dtype != "f64") throw DomainError("dtype must be f32 or f64, got " + dtype);
            write_dmat(path, to_dense(m), dtype == "f32" ? DmatDtype::f32 : DmatDtype::f64);
        },
        py::arg("path"), py::arg("m"), py::arg("dtype") = "f32");
    mod.def("read_dmat", [](const std::filesystem::path& path) { return to_array(read_dmat(path).matrix); },
            py::arg("path"));
    mod.def(
        "write_container",
        [](const std::filesystem::path& path, const BitmapSparseMatrix& w, const std::vector<py::tuple>& adapters) {
            write_container(path, w, to_adapters(adapters));
        },
        py::arg("path"), py::arg("weight"), py::arg("adapters") = std::vector<py::tuple>{});
    mod.def(
        "read_container",
        [](const std::filesystem::path& path) {
            SalrContainer c = read_container(path);
            py::list adapters;
            for (const auto& a : c.adapters) adapters.append(from_adapter(a));
            return py::make_tuple(std::move(c.weight), adapters);
        },
        py::arg("path"));
    mod.def("compression_ratio", &compression_ratio, py::arg("d"), py::arg("k"), py::arg("p"),
            py::arg("bytes_per_value") = 4, py::arg("adapter_params") = 0, py::arg("header_bytes") = 0);

    mod.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release nogil;
                code = run_cli(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"));
}
