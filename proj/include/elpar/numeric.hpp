#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace elpar::numeric {

/// Adjacent-pair tree reduction: level by level, out[i] = in[2i] + in[2i+1],
/// an odd tail element is carried up unchanged. The result depends only on the
/// sequence, never on scheduling, and a sequence in which every element is
/// duplicated in place sums to exactly twice the original.
inline double pairwise_sum(std::span<const double> values) {
    if (values.empty()) return 0.0;
    std::vector<double> level(values.begin(), values.end());
    while (level.size() > 1) {
        const std::size_t half = level.size() / 2;
        for (std::size_t i = 0; i < half; ++i) level[i] = level[2 * i] + level[2 * i + 1];
        if (level.size() % 2 == 1) {
            level[half] = level.back();
            level.resize(half + 1);
        } else {
            level.resize(half);
        }
    }
    return level.front();
}

/// log(n!) from a lazily built table for small n and Stirling's series above.
/// Avoids std::lgamma, which writes the global `signgam` on glibc.
inline double log_factorial(unsigned long n) {
    constexpr std::size_t kTable = 1024;
    static const std::array<double, kTable> table = [] {
        std::array<double, kTable> t{};
        t[0] = 0.0;
        for (std::size_t i = 1; i < kTable; ++i) t[i] = t[i - 1] + std::log(static_cast<double>(i));
        return t;
    }();
    if (n < kTable) return table[n];
    const double x = static_cast<double>(n) + 1.0;
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // log Gamma(x), Stirling with four correction terms; x > 1024 so error < 1e-20.
    return (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi) +
           inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
}

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace elpar::numeric
