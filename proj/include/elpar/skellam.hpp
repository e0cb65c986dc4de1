#pragma once

// Skellam distribution primitives: log-space modified Bessel function of the
// first kind, the Skellam log-PMF, win/draw/loss tail sums, a brute-force
// Poisson-difference oracle and the Pearson dispersion statistic.
//
// Everything here is a pure function of its arguments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>

#include "elpar/error.hpp"
#include "elpar/numeric.hpp"

namespace elpar {

/// Poisson means of the home (lambda1) and away (lambda2) goal counts.
struct SkellamParams {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
};

/// Home-perspective outcome probabilities; they sum to one.
struct OutcomeProbs {
    double p_win = 0.0;
    double p_draw = 0.0;
    double p_loss = 0.0;
};

namespace detail {

inline constexpr double kSeriesMaxArgument = 50.0;
inline constexpr double kSeriesMaxPeakIndex = 250.0;

// sum_k (x/2)^{2k+v} / (k! (k+v)!), accumulated relative to the k = 0 term.
inline double log_bessel_i_series(unsigned order, double x) {
    const double v = static_cast<double>(order);
    const double half = 0.5 * x;
    const double quarter_sq = half * half;
    const double log_first = v * std::log(half) - numeric::log_factorial(order);

    double sum = 1.0;
    double term = 1.0;
    double log_scale = 0.0;
    constexpr double kRescale = 1e280;
    for (double k = 1.0;; k += 1.0) {
        term *= quarter_sq / (k * (k + v));
        sum += term;
        if (term < 1e-18 * sum) break;
        if (sum > kRescale) {
            sum /= kRescale;
            term /= kRescale;
            log_scale += std::log(kRescale);
        }
    }
    return log_first + log_scale + std::log(sum);
}

// Large-argument expansion e^x / sqrt(2 pi x) * sum_k (-1)^k a_k(v) / x^k.
// Used only when 4 v^2 <= x, where successive terms shrink from the start.
inline double log_bessel_i_large_argument(unsigned order, double x) {
    const double mu = 4.0 * static_cast<double>(order) * static_cast<double>(order);
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 500; ++k) {
        const double odd = 2.0 * k - 1.0;
        const double next = -term * (mu - odd * odd) / (8.0 * k * x);
        if (std::abs(next) >= std::abs(term)) break;
        term = next;
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return x - 0.5 * std::log(2.0 * std::numbers::pi * x) + std::log(sum);
}

// Uniform asymptotic (Debye) expansion in the order, four correction terms.
inline double log_bessel_i_uniform(unsigned order, double x) {
    const double v = static_cast<double>(order);
    const double z = x / v;
    const double root = std::sqrt(1.0 + z * z);
    const double eta = root + std::log(z / (1.0 + root));
    const double p = 1.0 / root;
    const double p2 = p * p;

    const double u1 = p * (3.0 - 5.0 * p2) / 24.0;
    const double u2 = p2 * (81.0 + p2 * (-462.0 + p2 * 385.0)) / 1152.0;
    const double u3 = p * p2 * (30375.0 + p2 * (-369603.0 + p2 * (765765.0 - p2 * 425425.0))) / 414720.0;
    const double u4 =
        p2 * p2 *
        (4465125.0 + p2 * (-94121676.0 + p2 * (349922430.0 + p2 * (-446185740.0 + p2 * 185910725.0)))) /
        39813120.0;

    const double inv_v = 1.0 / v;
    const double correction = 1.0 + inv_v * (u1 + inv_v * (u2 + inv_v * (u3 + inv_v * u4)));
    return v * eta - 0.5 * std::log(2.0 * std::numbers::pi * v) - 0.5 * std::log(root) + std::log(correction);
}

inline double log_poisson_pmf(long k, double lambda) {
    if (k < 0) return -std::numeric_limits<double>::infinity();
    if (lambda == 0.0) return k == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return static_cast<double>(k) * std::log(lambda) - lambda - numeric::log_factorial(static_cast<unsigned long>(k));
}

inline void validate(const SkellamParams& params) {
    const bool ok = std::isfinite(params.lambda1) && std::isfinite(params.lambda2) && params.lambda1 >= 0.0 &&
                    params.lambda2 >= 0.0;
    require(ok, ErrorKind::Domain,
            "Skellam parameters must be finite and nonnegative, got (" + std::to_string(params.lambda1) + ", " +
                std::to_string(params.lambda2) + ")");
}

}  // namespace detail

/// log I_order(x) for the modified Bessel function of the first kind.
///
/// Small arguments use the power series; large arguments switch to the
/// Hankel expansion (order small against the argument) or the uniform
/// expansion in the order, so no intermediate overflows even for x ~ 1e4.
inline double log_bessel_i(unsigned order, double x) {
    require(x >= 0.0 && !std::isnan(x), ErrorKind::Domain, "log_bessel_i: x must be nonnegative");
    if (x == 0.0) return order == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    require(std::isfinite(x), ErrorKind::Domain, "log_bessel_i: x must be finite");

    const double v = static_cast<double>(order);
    const double peak_index = 0.5 * (std::hypot(v, x) - v);
    if (x <= detail::kSeriesMaxArgument || peak_index <= detail::kSeriesMaxPeakIndex)
        return detail::log_bessel_i_series(order, x);
    if (4.0 * v * v <= x) return detail::log_bessel_i_large_argument(order, x);
    return detail::log_bessel_i_uniform(order, x);
}

/// log P(Z = z) for Z = X - Y with X ~ Poisson(lambda1), Y ~ Poisson(lambda2).
/// A zero mean degenerates to a (reflected) Poisson law.
inline double skellam_log_pmf(long z, const SkellamParams& params) {
    detail::validate(params);
    const double a = params.lambda1;
    const double b = params.lambda2;
    if (a == 0.0 && b == 0.0) return z == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    if (b == 0.0) return detail::log_poisson_pmf(z, a);
    if (a == 0.0) return detail::log_poisson_pmf(-z, b);

    const auto order = static_cast<unsigned>(z < 0 ? -z : z);
    return -(a + b) + 0.5 * static_cast<double>(z) * (std::log(a) - std::log(b)) +
           log_bessel_i(order, 2.0 * std::sqrt(a * b));
}

/// Half-width of the support window used for tail sums: mean +- 12 sd, at least 30.
inline long support_half_width(const SkellamParams& params) {
    const double spread = std::abs(params.lambda1 - params.lambda2) + 12.0 * std::sqrt(params.lambda1 + params.lambda2);
    return std::max(30L, static_cast<long>(std::ceil(spread)));
}

/// P(Z > 0), P(Z = 0), P(Z < 0) over the truncated support, renormalized.
inline OutcomeProbs outcome_probs(const SkellamParams& params) {
    detail::validate(params);
    const long z_max = support_half_width(params);
    double win = 0.0;
    double loss = 0.0;
    for (long z = 1; z <= z_max; ++z) {
        win += std::exp(skellam_log_pmf(z, params));
        loss += std::exp(skellam_log_pmf(-z, params));
    }
    const double draw = std::exp(skellam_log_pmf(0, params));
    const double total = win + draw + loss;
    return {win / total, draw / total, loss / total};
}

/// Brute-force P(X - Y = z) by direct convolution of two Poisson PMFs,
/// summed for k = max(0, -z) .. truncation. Kept as an independent check on
/// the Bessel route. Throws when the last summand is still above 1e-15.
inline double poisson_diff_oracle(long z, double lambda1, double lambda2, long truncation) {
    detail::validate({lambda1, lambda2});
    require(truncation > 0, ErrorKind::Precondition, "poisson_diff_oracle: truncation must be positive");
    const long first = std::max(0L, -z);
    double sum = 0.0;
    double last = 0.0;
    for (long k = first; k <= truncation; ++k) {
        last = std::exp(detail::log_poisson_pmf(k + z, lambda1) + detail::log_poisson_pmf(k, lambda2));
        sum += last;
    }
    require(last <= 1e-15, ErrorKind::OraclePrecision,
            "poisson_diff_oracle: truncation " + std::to_string(truncation) + " too small (last summand " +
                std::to_string(last) + ")");
    return sum;
}

/// Pearson dispersion statistic sum (y - mean)^2 / mean / (n - 1); close to 1
/// for Poisson counts.
inline double dispersion_statistic(std::span<const int> counts) {
    require(counts.size() >= 2, ErrorKind::InsufficientData, "dispersion_statistic: need at least 2 observations");
    double total = 0.0;
    for (int c : counts) {
        require(c >= 0, ErrorKind::Domain, "dispersion_statistic: counts must be nonnegative");
        total += c;
    }
    const double n = static_cast<double>(counts.size());
    const double mean = total / n;
    require(mean > 0.0, ErrorKind::Degenerate, "dispersion_statistic: mean is zero, statistic undefined");
    double pearson = 0.0;
    for (int c : counts) pearson += (c - mean) * (c - mean) / mean;
    return pearson / (n - 1.0);
}

}  // namespace elpar
