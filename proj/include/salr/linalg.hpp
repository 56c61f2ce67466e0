#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "salr/matrix.hpp"

namespace salr {

/// c = a·b with double accumulation in ascending inner index.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

/// Number of matmul() calls made by this process. Used to assert how many
/// products a code path performs.
std::uint64_t matmul_call_count() noexcept;

/// Counts matmul() calls made on the current thread while alive.
class MatmulCounter {
public:
    MatmulCounter() noexcept;
    std::uint64_t count() const noexcept;

private:
    std::uint64_t start_;
};

struct SvdResult {
    DenseMatrix u;         // d × q
    std::vector<double> s; // q, nonincreasing
    DenseMatrix vt;        // q × k
};

/// Full thin SVD by one-sided Jacobi rotations. Throws DomainError on
/// non-finite input.
SvdResult svd(const DenseMatrix& m);

/// u·diag(s)·vt restricted to the leading `rank` triplets.
DenseMatrix reconstruct(const SvdResult& f, std::size_t rank);
DenseMatrix reconstruct(const SvdResult& f);

/// Estimate of σ_max(x) from power iteration on xᵀx. Stops after `iters`
/// steps or once successive estimates differ by less than tol·estimate.
double power_iteration_sigma_max(const DenseMatrix& x, std::size_t iters, double tol);

} // namespace salr
