#include "salr/rng.hpp"

#include <cmath>
#include <numbers>

#include "salr/error.hpp"

namespace salr {

namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t Rng::next_u64() noexcept {
    ++counter_;
    return mix64(seed_ + counter_ * kGamma);
}

double Rng::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = 1.0 - uniform(); // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

Rng Rng::split(std::uint64_t stream) const noexcept {
    return Rng(mix64(seed_ ^ mix64(stream + 0x632be59bd9b4e019ULL)));
}

DenseMatrix sample_gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double sigma) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
        throw DomainError("sample_gaussian_matrix: sigma must be finite and >= 0");
    DenseMatrix m(rows, cols);
    if (sigma == 0.0) return m;
    for (double& v : m.data()) v = sigma * rng.gaussian();
    return m;
}

} // namespace salr
