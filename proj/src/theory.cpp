#include "salr/theory.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "salr/error.hpp"
#include "salr/normal.hpp"
#include "salr/rng.hpp"

namespace salr {

namespace {

void require_rate(double p) {
    if (!(p >= 0.0 && p < 1.0)) throw DomainError("p must lie in [0, 1), got " + std::to_string(p));
}

void require_sigma(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw DomainError("sigma must be finite and > 0, got " + std::to_string(sigma));
}

void require_tau(double tau) {
    if (!(tau >= 0.0) || !std::isfinite(tau))
        throw DomainError("tau must be finite and >= 0, got " + std::to_string(tau));
}

constexpr std::size_t kBlockSamples = std::size_t{1} << 16;

struct BlockSums {
    double s1 = 0, s2 = 0, s3 = 0;
    double q1 = 0, q2 = 0, q3 = 0;
    double d31 = 0, d31_sq = 0;
    double d23 = 0, d23_sq = 0;

    void add(const BlockSums& o) noexcept {
        s1 += o.s1; s2 += o.s2; s3 += o.s3;
        q1 += o.q1; q2 += o.q2; q3 += o.q3;
        d31 += o.d31; d31_sq += o.d31_sq;
        d23 += o.d23; d23_sq += o.d23_sq;
    }
};

BlockSums sample_block(Rng rng, std::size_t count, double sigma, double tau, double t_w0,
                       double t_u) {
    BlockSums b;
    for (std::size_t i = 0; i < count; ++i) {
        const double w = sigma * rng.gaussian();
        const double u = w + tau * rng.gaussian();
        const bool pruned_w0 = std::abs(w) <= t_w0;
        const bool pruned_u = std::abs(u) <= t_u;
        const double x1 = pruned_w0 ? w * w : 0.0;
        const double x2 = pruned_u ? w * w : 0.0;
        const double x3 = pruned_u ? u * u : 0.0;
        b.s1 += x1; b.s2 += x2; b.s3 += x3;
        b.q1 += x1 * x1; b.q2 += x2 * x2; b.q3 += x3 * x3;
        const double a = x3 - x1;
        const double c = x2 - x3;
        b.d31 += a; b.d31_sq += a * a;
        b.d23 += c; b.d23_sq += c * c;
    }
    return b;
}

double standard_error(double sum, double sum_sq, double n) {
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    return std::sqrt(var / n);
}

} // namespace

double q_function(double t) {
    if (!(t >= 0.0)) throw DomainError("q_function: t must be >= 0");
    return normal_cdf(t) - 0.5 - t * normal_pdf(t);
}

double standardized_threshold(double p) {
    require_rate(p);
    return normal_quantile(0.5 * (1.0 + p));
}

double prune_threshold(double p, double sigma) {
    require_sigma(sigma);
    return sigma * standardized_threshold(p);
}

double mse_closed_form(double p, double sigma) {
    require_sigma(sigma);
    return 2.0 * sigma * sigma * q_function(standardized_threshold(p));
}

double e1_closed(double p, double sigma) { return mse_closed_form(p, sigma); }

double e2_closed(double p, double sigma, double tau) {
    require_sigma(sigma);
    require_tau(tau);
    const double s2 = sigma * sigma;
    const double t2 = tau * tau;
    const double v2 = s2 + t2;
    return s2 * t2 / v2 * p + 2.0 * s2 * s2 / v2 * q_function(standardized_threshold(p));
}

double e3_closed(double p, double sigma, double tau) {
    require_sigma(sigma);
    require_tau(tau);
    return 2.0 * (sigma * sigma + tau * tau) * q_function(standardized_threshold(p));
}

double e2_minus_e3(double p, double sigma, double tau) {
    require_sigma(sigma);
    require_tau(tau);
    const double s2 = sigma * sigma;
    const double t2 = tau * tau;
    return t2 / (s2 + t2) * (s2 * p - 2.0 * (2.0 * s2 + t2) * q_function(standardized_threshold(p)));
}

TheoryReport run_theory_report(double p, double sigma, double tau, const MonteCarloOptions& opts) {
    require_rate(p);
    require_sigma(sigma);
    require_tau(tau);
    if (opts.samples < 10'000)
        throw DomainError("run_theory_report: samples must be >= 10000");

    TheoryReport r;
    r.p = p;
    r.sigma = sigma;
    r.tau = tau;
    r.samples = opts.samples;
    r.mse_closed = mse_closed_form(p, sigma);
    r.e1_closed = e1_closed(p, sigma);
    r.e2_closed = e2_closed(p, sigma, tau);
    r.e3_closed = e3_closed(p, sigma, tau);

    const double t_p = standardized_threshold(p);
    const double t_w0 = sigma * t_p;
    const double t_u = std::sqrt(sigma * sigma + tau * tau) * t_p;

    const std::size_t blocks = (opts.samples + kBlockSamples - 1) / kBlockSamples;
    std::vector<BlockSums> partial(blocks);
    const Rng root(opts.seed);
    auto run_blocks = [&](std::size_t first, std::size_t stride) {
        for (std::size_t b = first; b < blocks; b += stride) {
            const std::size_t count = std::min(kBlockSamples, opts.samples - b * kBlockSamples);
            partial[b] = sample_block(root.split(b), count, sigma, tau, t_w0, t_u);
        }
    };

    unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, blocks));
    if (threads <= 1) {
        run_blocks(0, 1);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(run_blocks, t, threads);
    }

    BlockSums total;
    for (const auto& b : partial) total.add(b);
    const double n = static_cast<double>(opts.samples);
    r.e1_mc = total.s1 / n;
    r.e2_mc = total.s2 / n;
    r.e3_mc = total.s3 / n;
    r.e1_se = standard_error(total.s1, total.q1, n);
    r.e2_se = standard_error(total.s2, total.q2, n);
    r.e3_se = standard_error(total.s3, total.q3, n);
    r.e31_se = standard_error(total.d31, total.d31_sq, n);
    r.e23_se = standard_error(total.d23, total.d23_sq, n);
    return r;
}

} // namespace salr
