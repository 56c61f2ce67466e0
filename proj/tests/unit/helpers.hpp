#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <algorithm>
#include <cmath>

#include "salr/matrix.hpp"

namespace salr::test {

// Independent of the library RNG so oracles do not share its code.
inline DenseMatrix random_matrix(std::mt19937_64& gen, std::size_t rows, std::size_t cols,
                                 double sigma = 1.0) {
    std::normal_distribution<double> dist(0.0, sigma);
    DenseMatrix m(rows, cols);
    for (double& v : m.data()) v = dist(gen);
    return m;
}

inline DenseMatrix naive_matmul(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            long double acc = 0.0L;
            for (std::size_t t = 0; t < a.cols(); ++t)
                acc += static_cast<long double>(a(i, t)) * b(t, j);
            c(i, j) = static_cast<double>(acc);
        }
    return c;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("salr_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

} // namespace salr::test
