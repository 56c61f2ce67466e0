#include "salr/residual.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "salr/error.hpp"
#include "salr/linalg.hpp"

namespace salr {

namespace {

std::string shape_str(const DenseMatrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_shape(const DenseMatrix& m, std::size_t rows, std::size_t cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw ShapeError(std::string(what) + " is " + shape_str(m) + ", expected " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    }
}

AdapterPair truncate(const SvdResult& f, std::size_t d, std::size_t k, std::size_t rank) {
    AdapterPair out{DenseMatrix(d, rank), DenseMatrix(rank, k), 1.0};
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t r = 0; r < rank; ++r) out.a(i, r) = f.u(i, r) * f.s[r];
    for (std::size_t r = 0; r < rank; ++r)
        std::copy_n(&f.vt(r, 0), k, &out.b(r, 0));
    return out;
}

} // namespace

void AdapterPair::validate() const {
    if (a.cols() != b.rows())
        throw ShapeError("adapter: A is " + shape_str(a) + " but B is " + shape_str(b));
    if (rank() > std::min(d_in(), d_out()))
        throw ShapeError("adapter: rank " + std::to_string(rank()) + " exceeds min(d, k)");
    if (!std::isfinite(scale)) throw DomainError("adapter: scale must be finite");
}

DenseMatrix AdapterPair::product() const {
    validate();
    DenseMatrix p = matmul(a, b);
    if (scale != 1.0) p *= scale;
    return p;
}

AdapterPair init_lora_adapter(Rng& rng, std::size_t d, std::size_t k, std::size_t rank,
                              double scale) {
    if (rank > std::min(d, k))
        throw DomainError("LoRA rank " + std::to_string(rank) + " exceeds min(d, k)");
    AdapterPair p{sample_gaussian_matrix(rng, d, rank, 1.0 / std::sqrt(static_cast<double>(d))),
                  DenseMatrix(rank, k), scale};
    return p;
}

AdapterPair build_residual_adapter(const DenseMatrix& w, const DenseMatrix& w_hat,
                                   std::size_t rank) {
    require_shape(w_hat, w.rows(), w.cols(), "w_hat");
    const std::size_t d = w.rows();
    const std::size_t k = w.cols();
    if (rank < 1 || rank > std::min(d, k))
        throw DomainError("residual rank must lie in [1, " + std::to_string(std::min(d, k)) +
                          "], got " + std::to_string(rank));
    const DenseMatrix e = w - w_hat;
    if (e.max_abs() == 0.0) return AdapterPair{DenseMatrix(d, rank), DenseMatrix(rank, k), 1.0};
    return truncate(svd(e), d, k, rank);
}

Theorem3Check verify_theorem3_bound(const DenseMatrix& e, std::size_t rank) {
    const std::size_t d = e.rows();
    const std::size_t k = e.cols();
    const std::size_t q = std::min(d, k);
    if (rank < 1 || rank > q)
        throw DomainError("rank must lie in [1, " + std::to_string(q) + "]");

    const SvdResult f = svd(e);
    const AdapterPair adapter = truncate(f, d, k, rank);
    const DenseMatrix diff = e - matmul(adapter.a, adapter.b);

    Theorem3Check c;
    for (std::size_t i = rank; i < q; ++i) c.tail_energy += f.s[i] * f.s[i];
    c.residual_sq = diff.frobenius_norm_sq();
    const double dk = static_cast<double>(d) * static_cast<double>(k);
    const double total = e.frobenius_norm_sq();
    c.lhs = c.residual_sq / dk;
    c.rhs = (1.0 - static_cast<double>(rank) / static_cast<double>(q)) * total / dk;
    // Equality is attained for a flat spectrum; allow rounding at that edge.
    c.holds = c.lhs <= c.rhs + 1e-9 * total / dk;
    return c;
}

SpectrumReport spectrum(const DenseMatrix& e) {
    if (e.empty() || e.max_abs() == 0.0)
        throw DomainError("spectrum: zero matrix has no normalized energy spectrum");
    SpectrumReport rep;
    rep.singular_values = svd(e).s;
    const auto& s = rep.singular_values;
    double total = 0.0;
    for (double v : s) total += v * v;

    rep.cumulative_energy.resize(s.size());
    double running = 0.0;
    rep.i99 = s.size();
    bool found = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        running += s[i] * s[i];
        rep.cumulative_energy[i] = running / total;
        if (!found && rep.cumulative_energy[i] >= 0.99) {
            rep.i99 = i + 1;
            found = true;
        }
    }
    rep.cumulative_energy.back() = 1.0;
    const double cutoff = 1e-12 * s.front();
    rep.effective_rank = static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [&](double v) { return v > cutoff; }));
    return rep;
}

double optimal_step_size(const DenseMatrix& x, std::size_t power_iters) {
    const double sigma = power_iteration_sigma_max(x, power_iters, 1e-13);
    if (sigma == 0.0) throw DomainError("optimal_step_size: X is zero");
    return 1.0 / (sigma * sigma);
}

double lipschitz_constant(const DenseMatrix& x) {
    if (x.empty()) return 0.0;
    const double s = svd(x).s.front();
    return s * s;
}

double residual_loss(const DenseMatrix& x, const DenseMatrix& m, const DenseMatrix& r) {
    if (r.rows() != x.rows() || r.cols() != m.cols() || x.cols() != m.rows())
        throw ShapeError("residual_loss: X " + shape_str(x) + ", M " + shape_str(m) + ", R " +
                         shape_str(r));
    return 0.5 * (matmul(x, m) - r).frobenius_norm_sq();
}

DenseMatrix residual_gradient(const DenseMatrix& x, const DenseMatrix& m, const DenseMatrix& r) {
    if (r.rows() != x.rows() || r.cols() != m.cols() || x.cols() != m.rows())
        throw ShapeError("residual_gradient: X " + shape_str(x) + ", M " + shape_str(m) +
                         ", R " + shape_str(r));
    return matmul(x.transpose(), matmul(x, m) - r);
}

DenseMatrix residual_target(const DenseMatrix& x, const DenseMatrix& y, const DenseMatrix& w_hat,
                            const AdapterPair& lora) {
    require_shape(y, x.rows(), w_hat.cols(), "Y");
    if (x.cols() != w_hat.rows())
        throw ShapeError("X " + shape_str(x) + " does not conform to W_hat " + shape_str(w_hat));
    DenseMatrix w = w_hat;
    if (lora.rank() > 0) {
        require_shape(lora.a, w_hat.rows(), lora.rank(), "LoRA A");
        require_shape(lora.b, lora.rank(), w_hat.cols(), "LoRA B");
        w += lora.product();
    }
    return y - matmul(x, w);
}

ResidualTrainResult train_residual(const DenseMatrix& x, const DenseMatrix& y,
                                   const DenseMatrix& w_hat, const AdapterPair& lora,
                                   const DenseMatrix& m0, const ResidualTrainConfig& cfg) {
    const DenseMatrix r = residual_target(x, y, w_hat, lora);
    require_shape(m0, w_hat.rows(), w_hat.cols(), "M0");
    if (cfg.power_iters < 1) throw ConfigError("power_iters must be >= 1");
    if (!(cfg.grad_tol >= 0.0)) throw ConfigError("grad_tol must be >= 0");

    ResidualTrainResult out;
    out.m = m0;

    const bool zero_x = x.empty() || x.max_abs() == 0.0;
    if (cfg.step.mode == StepSize::Mode::fixed) {
        const double eta = cfg.step.eta;
        if (!(eta > 0.0)) throw ConfigError("fixed step size must be > 0");
        if (!zero_x) {
            const double limit = 2.0 / lipschitz_constant(x);
            if (eta >= limit)
                throw ConfigError("fixed step size " + std::to_string(eta) +
                                  " is not below 2/sigma_max(X)^2 = " + std::to_string(limit));
        }
        out.step_size = eta;
    } else if (!zero_x) {
        const double eta_star = optimal_step_size(x, cfg.power_iters);
        out.step_size = cfg.step.mode == StepSize::Mode::automatic ? eta_star : 0.5 * eta_star;
    }

    const DenseMatrix xt = x.transpose();
    DenseMatrix z = matmul(x, out.m) - r;
    DenseMatrix grad = matmul(xt, z);
    out.loss_trace.push_back(0.5 * z.frobenius_norm_sq());
    out.grad_norm = grad.frobenius_norm();

    while (out.iterations < cfg.max_iters) {
        if (out.grad_norm <= cfg.grad_tol) break;
        auto md = out.m.data();
        auto gd = grad.data();
        for (std::size_t i = 0; i < md.size(); ++i) md[i] -= out.step_size * gd[i];
        ++out.iterations;
        z = matmul(x, out.m) - r;
        grad = matmul(xt, z);
        out.loss_trace.push_back(0.5 * z.frobenius_norm_sq());
        out.grad_norm = grad.frobenius_norm();
    }
    out.converged = out.grad_norm <= cfg.grad_tol;

    if (cfg.retruncate_rank) {
        out.truncated = build_residual_adapter(out.m, DenseMatrix(out.m.rows(), out.m.cols()),
                                               *cfg.retruncate_rank);
    }
    return out;
}

} // namespace salr
