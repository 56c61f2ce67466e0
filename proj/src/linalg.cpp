#include "salr/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "salr/error.hpp"
#include "salr/rng.hpp"

namespace salr {

namespace {

thread_local std::uint64_t tl_matmul_calls = 0;

double dot(const double* a, const double* b, std::size_t n) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

// Rows of `g` are the vectors being orthogonalized; rows of `v` accumulate the
// same rotations. On return the rows of g are mutually orthogonal.
void jacobi_orthogonalize(DenseMatrix& g, DenseMatrix& v) {
    const std::size_t n = g.rows();
    const std::size_t len = g.cols();
    const std::size_t vlen = v.cols();
    const double tol = std::numeric_limits<double>::epsilon() * static_cast<double>(std::max<std::size_t>(len, 8));
    constexpr int kMaxSweeps = 80;

    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) norms[i] = dot(&g(i, 0), &g(i, 0), len);

    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double alpha = norms[p];
                const double beta = norms[q];
                if (alpha == 0.0 || beta == 0.0) continue;
                double* gp = &g(p, 0);
                double* gq = &g(q, 0);
                const double gamma = dot(gp, gq, len);
                if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                rotated = true;

                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;

                for (std::size_t i = 0; i < len; ++i) {
                    const double a = gp[i];
                    const double b = gq[i];
                    gp[i] = c * a - s * b;
                    gq[i] = s * a + c * b;
                }
                double* vp = &v(p, 0);
                double* vq = &v(q, 0);
                for (std::size_t i = 0; i < vlen; ++i) {
                    const double a = vp[i];
                    const double b = vq[i];
                    vp[i] = c * a - s * b;
                    vq[i] = s * a + c * b;
                }
                norms[p] = dot(gp, gp, len);
                norms[q] = dot(gq, gq, len);
            }
        }
        if (!rotated) return;
    }
}

// Replaces the listed columns of `u` with unit vectors orthogonal to every
// other column (Gram–Schmidt against the standard basis).
void complete_orthonormal_columns(DenseMatrix& u, const std::vector<bool>& missing) {
    const std::size_t d = u.rows();
    const std::size_t q = u.cols();
    std::vector<bool> have(q);
    for (std::size_t j = 0; j < q; ++j) have[j] = !missing[j];

    std::vector<double> cand(d);
    std::size_t next_basis = 0;
    for (std::size_t j = 0; j < q; ++j) {
        if (have[j]) continue;
        bool placed = false;
        while (!placed && next_basis < d) {
            std::fill(cand.begin(), cand.end(), 0.0);
            cand[next_basis++] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t c = 0; c < q; ++c) {
                    if (!have[c]) continue;
                    double proj = 0.0;
                    for (std::size_t i = 0; i < d; ++i) proj += u(i, c) * cand[i];
                    for (std::size_t i = 0; i < d; ++i) cand[i] -= proj * u(i, c);
                }
            }
            const double nrm = std::sqrt(dot(cand.data(), cand.data(), d));
            if (nrm > 0.5) {
                for (std::size_t i = 0; i < d; ++i) u(i, j) = cand[i] / nrm;
                have[j] = true;
                placed = true;
            }
        }
        if (!placed) throw InternalError("svd: failed to complete orthonormal basis");
    }
}

// SVD for tall-or-square input (rows >= cols).
SvdResult svd_tall(const DenseMatrix& a) {
    const std::size_t d = a.rows();
    const std::size_t k = a.cols();
    DenseMatrix g = a.transpose(); // rows are columns of a
    DenseMatrix vacc = DenseMatrix::identity(k);
    jacobi_orthogonalize(g, vacc);

    std::vector<double> sv(k);
    for (std::size_t j = 0; j < k; ++j) sv[j] = std::sqrt(dot(&g(j, 0), &g(j, 0), d));

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return sv[x] > sv[y]; });

    SvdResult out{DenseMatrix(d, k), std::vector<double>(k), DenseMatrix(k, k)};
    const double smax = k ? sv[order[0]] : 0.0;
    const double cutoff = smax * 1e-13;
    std::vector<bool> missing(k, false);
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t src = order[j];
        out.s[j] = sv[src];
        std::copy_n(&vacc(src, 0), k, &out.vt(j, 0));
        if (sv[src] > cutoff && sv[src] > 0.0) {
            for (std::size_t i = 0; i < d; ++i) out.u(i, j) = g(src, i) / sv[src];
        } else {
            missing[j] = true;
        }
    }
    if (std::find(missing.begin(), missing.end(), true) != missing.end())
        complete_orthonormal_columns(out.u, missing);
    return out;
}

} // namespace

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    ++tl_matmul_calls;
    const std::size_t n = a.rows();
    const std::size_t inner = a.cols();
    const std::size_t m = b.cols();
    DenseMatrix c(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        double* ci = &c(i, 0);
        for (std::size_t t = 0; t < inner; ++t) {
            const double ait = a(i, t);
            const double* bt = &b(t, 0);
            for (std::size_t j = 0; j < m; ++j) ci[j] += ait * bt[j];
        }
    }
    return c;
}

std::uint64_t matmul_call_count() noexcept { return tl_matmul_calls; }

MatmulCounter::MatmulCounter() noexcept : start_(tl_matmul_calls) {}

std::uint64_t MatmulCounter::count() const noexcept { return tl_matmul_calls - start_; }

SvdResult svd(const DenseMatrix& m) {
    if (m.rows() == 0 || m.cols() == 0) throw DomainError("svd: empty matrix");
    if (!m.all_finite()) throw DomainError("svd: non-finite input");
    if (m.rows() >= m.cols()) return svd_tall(m);

    // A = (Aᵀ)ᵀ = (U' S V'ᵀ)ᵀ = V' S U'ᵀ
    SvdResult t = svd_tall(m.transpose());
    return SvdResult{t.vt.transpose(), std::move(t.s), t.u.transpose()};
}

DenseMatrix reconstruct(const SvdResult& f, std::size_t rank) {
    rank = std::min(rank, f.s.size());
    const std::size_t d = f.u.rows();
    const std::size_t k = f.vt.cols();
    DenseMatrix out(d, k);
    for (std::size_t i = 0; i < d; ++i) {
        double* oi = &out(i, 0);
        for (std::size_t r = 0; r < rank; ++r) {
            const double coef = f.u(i, r) * f.s[r];
            if (coef == 0.0) continue;
            const double* vr = &f.vt(r, 0);
            for (std::size_t j = 0; j < k; ++j) oi[j] += coef * vr[j];
        }
    }
    return out;
}

DenseMatrix reconstruct(const SvdResult& f) { return reconstruct(f, f.s.size()); }

double power_iteration_sigma_max(const DenseMatrix& x, std::size_t iters, double tol) {
    if (iters < 1) throw DomainError("power_iteration_sigma_max: iters must be >= 1");
    if (!(tol > 0.0)) throw DomainError("power_iteration_sigma_max: tol must be > 0");
    if (x.rows() == 0 || x.cols() == 0 || x.max_abs() == 0.0) return 0.0;

    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    Rng rng(0x9e3779b97f4a7c15ULL);
    std::vector<double> v(d);
    for (double& e : v) e = rng.gaussian();
    auto normalize = [](std::vector<double>& w) {
        double s = 0.0;
        for (double e : w) s += e * e;
        s = std::sqrt(s);
        if (s > 0.0)
            for (double& e : w) e /= s;
        return s;
    };
    normalize(v);

    std::vector<double> xv(n);
    std::vector<double> xtxv(d);
    double estimate = 0.0;
    for (std::size_t it = 0; it < iters; ++it) {
        for (std::size_t i = 0; i < n; ++i) xv[i] = dot(&x(i, 0), v.data(), d);
        const double sigma = std::sqrt(dot(xv.data(), xv.data(), n));
        std::fill(xtxv.begin(), xtxv.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = &x(i, 0);
            for (std::size_t j = 0; j < d; ++j) xtxv[j] += xi[j] * xv[i];
        }
        const bool converged = it > 0 && std::abs(sigma - estimate) <= tol * sigma;
        estimate = sigma;
        if (converged) break;
        if (normalize(xtxv) == 0.0) break;
        v.swap(xtxv);
    }
    return estimate;
}

} // namespace salr
