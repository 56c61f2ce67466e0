#pragma once

namespace salr {

/// Standard normal density.
double normal_pdf(double t) noexcept;
/// Standard normal CDF via erfc; absolute error near machine epsilon.
double normal_cdf(double t) noexcept;
/// Inverse CDF for 0 < u < 1; throws DomainError otherwise.
double normal_quantile(double u);

} // namespace salr
