#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace salr {

struct VerifyParams {
    double p = 0.5;
    double sigma = 1.0;
    double tau = 1.0;
    std::size_t samples = 1'000'000;
    std::uint64_t seed = 0;
    std::size_t grid = 0;      // > 0 sweeps p over i/(grid+1), i = 1..grid
    std::size_t trials = 200;  // random matrices for the rank-r suites
    unsigned threads = 0;
};

struct VerifyCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Flat key=value results of one verification suite plus an optional CSV
/// sweep table.
struct VerifyReport {
    std::vector<std::pair<std::string, std::string>> values;
    std::vector<VerifyCheck> checks;
    std::string csv_header;
    std::vector<std::string> csv_rows;

    bool passed() const noexcept;
    /// Name of the first failing check, if any.
    std::optional<std::string> first_failure() const;

    void add_value(std::string key, double v);
    void add_value(std::string key, std::string v);
    void add_check(std::string name, bool pass, std::string detail = {});
};

/// Monte-Carlo per-entry pruning MSE against the closed form, 3-SE bands.
VerifyReport verify_theorem1(const VerifyParams& params);
/// Claimed ordering e1 <= e3 <= e2 (closed strictly, MC within 3 SE), the
/// two claimed difference identities, and the MC difference e2 − e3 against
/// its exact value, at p or over the grid. The claimed e2 − e3 identity and
/// the e3 <= e2 half of the ordering fail for large p or large τ/σ.
VerifyReport verify_theorem2(const VerifyParams& params);
/// Eckart–Young equality and the rank-r per-entry bound on random pruned
/// residuals for every rank, plus the flat-spectrum equality case.
VerifyReport verify_theorem3(const VerifyParams& params);
/// Gradient against central differences, monotone descent at η* and η*/2,
/// rejection of η >= 2/σ_max², power iteration against the SVD, Lipschitz
/// inequality on random pairs.
VerifyReport verify_theorem4(const VerifyParams& params);

VerifyReport run_verification(int theorem, const VerifyParams& params);

} // namespace salr
