#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "krplev/matrix.hpp"
#include "krplev/rng.hpp"

namespace testsupport {

inline krplev::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                    std::uint64_t stream = 0) {
    krplev::CounterRng rng(seed, stream);
    krplev::Matrix m(rows, cols);
    for (double& v : m.data) v = rng.normal();
    return m;
}

// Gaussian matrix with roughly `frac` of entries scaled by `scale`.
inline krplev::Matrix random_spiked_matrix(std::size_t rows, std::size_t cols,
                                           std::uint64_t seed, double frac = 0.01,
                                           double scale = 10.0, std::uint64_t stream = 0) {
    krplev::CounterRng rng(seed, stream);
    krplev::Matrix m(rows, cols);
    for (double& v : m.data) {
        v = rng.normal();
        if (rng.uniform() < frac) v *= scale;
    }
    return m;
}

inline krplev::Matrix random_psd(std::size_t n, std::uint64_t seed, std::uint64_t stream = 0) {
    const krplev::Matrix b = random_matrix(2 * n, n, seed, stream);
    krplev::Matrix g(n, n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t c = 0; c < n; ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < 2 * n; ++i) acc += b(i, a) * b(i, c);
            g(a, c) = acc;
        }
    return g;
}

inline double max_abs_diff(const krplev::Matrix& a, const krplev::Matrix& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.data.size(); ++k)
        m = std::max(m, std::abs(a.data[k] - b.data[k]));
    return m;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

// Pearson chi-square statistic against an expected distribution.
inline double chi_square(const std::vector<std::uint64_t>& counts,
                         const std::vector<double>& probs, std::uint64_t total) {
    double stat = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double expected = probs[i] * static_cast<double>(total);
        if (expected > 0.0) {
            const double d = static_cast<double>(counts[i]) - expected;
            stat += d * d / expected;
        }
    }
    return stat;
}

}  // namespace testsupport
