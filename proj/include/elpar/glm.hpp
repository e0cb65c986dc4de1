#pragma once

// Skellam regression of the home-minus-away goal differential on the four
// line-rating differences:
//
//     log lambda1 = b1 . [1, x],   log lambda2 = b2 . [1, x]
//
// fitted by maximum likelihood with a deterministic BFGS iteration.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "elpar/error.hpp"
#include "elpar/lines.hpp"
#include "elpar/numeric.hpp"
#include "elpar/skellam.hpp"

namespace elpar {

inline constexpr std::size_t kCoefficientCount = 5;
inline constexpr std::size_t kParameterCount = 2 * kCoefficientCount;

/// Intercept followed by the slopes on x_d, x_m, x_a, x_gk.
using Coefficients = std::array<double, kCoefficientCount>;
using ParameterVector = std::array<double, kParameterCount>;

inline constexpr std::array<std::string_view, kCoefficientCount> kFeatureOrder{"intercept", "x_d", "x_m", "x_a",
                                                                               "x_gk"};

/// Home-minus-away line-average rating differences.
struct FeatureVector {
    double x_d = 0.0;
    double x_m = 0.0;
    double x_a = 0.0;
    double x_gk = 0.0;

    double& operator[](Line line) {
        switch (line) {
            case Line::DEF: return x_d;
            case Line::MID: return x_m;
            case Line::ATT: return x_a;
            case Line::GK: break;
        }
        return x_gk;
    }
    double operator[](Line line) const { return const_cast<FeatureVector&>(*this)[line]; }

    /// Regressor j in kFeatureOrder (0 is the constant 1).
    double regressor(std::size_t j) const {
        switch (j) {
            case 0: return 1.0;
            case 1: return x_d;
            case 2: return x_m;
            case 3: return x_a;
            default: return x_gk;
        }
    }

    FeatureVector operator-() const { return {-x_d, -x_m, -x_a, -x_gk}; }
    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// One training row: features and home_goals - away_goals.
struct Observation {
    FeatureVector features;
    int goal_diff = 0;
};

struct FitConfig {
    int max_iterations = 500;
    double gradient_tolerance = 1e-5;
    std::optional<ParameterVector> initial_coefficients;
    /// Seeds the jittered restarts taken only when a BFGS run stalls.
    std::uint64_t seed = 0;
};

struct SkellamGlmModel {
    Coefficients b1{};
    Coefficients b2{};
    Coefficients se1{};
    Coefficients se2{};
    std::size_t n_obs = 0;
    double final_nll = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    int iterations = 0;
    double gradient_norm = std::numeric_limits<double>::quiet_NaN();
};

/// Coefficients reported for the published fit (21,374 games), with their
/// standard errors. Serves as the simulation generator and as a fixed model.
inline SkellamGlmModel reference_model() {
    SkellamGlmModel m;
    m.b1 = {0.37, 0.02, 0.02, 0.01, 0.001};
    m.b2 = {0.07, -0.03, -0.015, -0.01, -0.004};
    m.se1 = {0.012, 0.01, 0.01, 0.001, 0.001};
    m.se2 = {0.015, 0.002, 0.002, 0.001, 0.002};
    m.n_obs = 21374;
    m.converged = true;
    return m;
}

inline double linear_predictor(const Coefficients& b, const FeatureVector& x) {
    return b[0] + b[1] * x.x_d + b[2] * x.x_m + b[3] * x.x_a + b[4] * x.x_gk;
}

namespace detail {

inline void require_finite(const Coefficients& b, const char* name) {
    for (double v : b)
        require(std::isfinite(v), ErrorKind::Domain, std::string("non-finite coefficient in ") + name);
}

inline ParameterVector pack(const Coefficients& b1, const Coefficients& b2) {
    ParameterVector theta{};
    std::copy(b1.begin(), b1.end(), theta.begin());
    std::copy(b2.begin(), b2.end(), theta.begin() + kCoefficientCount);
    return theta;
}

inline Coefficients head(const ParameterVector& theta) {
    Coefficients b{};
    std::copy(theta.begin(), theta.begin() + kCoefficientCount, b.begin());
    return b;
}

inline Coefficients tail(const ParameterVector& theta) {
    Coefficients b{};
    std::copy(theta.begin() + kCoefficientCount, theta.end(), b.begin());
    return b;
}

// Log-likelihood of one observation and its derivatives w.r.t. the two
// linear predictors. With s = 2 sqrt(l1 l2) and R = I_v'(s) / I_v(s):
//   d/d eta1 = -l1 + z/2 + R s/2,   d/d eta2 = -l2 - z/2 + R s/2.
struct PointTerms {
    double log_lik;
    double d_eta1;
    double d_eta2;
};

inline PointTerms point_terms(double eta1, double eta2, int z) {
    const double l1 = std::exp(eta1);
    const double l2 = std::exp(eta2);
    const double s = 2.0 * std::exp(0.5 * (eta1 + eta2));
    const auto v = static_cast<unsigned>(z < 0 ? -z : z);

    const double log_iv = log_bessel_i(v, s);
    const double log_below = log_bessel_i(v == 0 ? 1u : v - 1, s);
    const double log_above = log_bessel_i(v + 1, s);
    const double ratio = 0.5 * (std::exp(log_below - log_iv) + std::exp(log_above - log_iv));

    PointTerms t{};
    t.log_lik = -(l1 + l2) + 0.5 * z * (eta1 - eta2) + log_iv;
    t.d_eta1 = -l1 + 0.5 * z + 0.5 * ratio * s;
    t.d_eta2 = -l2 - 0.5 * z + 0.5 * ratio * s;
    return t;
}

struct Evaluation {
    double nll = 0.0;
    ParameterVector gradient{};
};

inline double sorted_pairwise_sum(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end());
    return numeric::pairwise_sum(terms);
}

// NLL and its gradient in one pass. The NLL terms are sorted before the
// reduction so the value is invariant under any reordering of `data`.
inline Evaluation evaluate(const ParameterVector& theta, std::span<const Observation> data, bool with_nll = true) {
    const Coefficients b1 = head(theta);
    const Coefficients b2 = tail(theta);
    const std::size_t n = data.size();

    std::vector<double> nll_terms(with_nll ? n : 0);
    std::array<std::vector<double>, kParameterCount> grad_terms;
    for (auto& g : grad_terms) g.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        const auto& obs = data[i];
        const PointTerms t =
            point_terms(linear_predictor(b1, obs.features), linear_predictor(b2, obs.features), obs.goal_diff);
        if (with_nll) nll_terms[i] = -t.log_lik;
        for (std::size_t j = 0; j < kCoefficientCount; ++j) {
            const double xj = obs.features.regressor(j);
            grad_terms[j][i] = -t.d_eta1 * xj;
            grad_terms[kCoefficientCount + j][i] = -t.d_eta2 * xj;
        }
    }

    Evaluation e;
    if (with_nll) e.nll = sorted_pairwise_sum(nll_terms);
    for (std::size_t j = 0; j < kParameterCount; ++j) e.gradient[j] = numeric::pairwise_sum(grad_terms[j]);
    return e;
}

inline double norm(const ParameterVector& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Lexicographic order on (goal_diff, x_d, x_m, x_a, x_gk); fit() works on
// data in this order so its output never depends on the input order.
inline std::vector<Observation> canonical_order(std::span<const Observation> data) {
    std::vector<Observation> sorted(data.begin(), data.end());
    std::sort(sorted.begin(), sorted.end(), [](const Observation& a, const Observation& b) {
        if (a.goal_diff != b.goal_diff) return a.goal_diff < b.goal_diff;
        for (std::size_t j = 1; j < kCoefficientCount; ++j) {
            const double xa = a.features.regressor(j);
            const double xb = b.features.regressor(j);
            if (xa != xb) return xa < xb;
        }
        return false;
    });
    return sorted;
}

// Columns whose regressor is identically zero carry no information; their
// slopes stay at zero and are excluded from collinearity and SE checks.
inline std::array<bool, kCoefficientCount> active_columns(std::span<const Observation> data) {
    std::array<bool, kCoefficientCount> active{};
    active[0] = true;
    for (const auto& obs : data)
        for (std::size_t j = 1; j < kCoefficientCount; ++j)
            if (obs.features.regressor(j) != 0.0) active[j] = true;
    return active;
}

inline void validate_data(std::span<const Observation> data) {
    for (const auto& obs : data)
        for (std::size_t j = 1; j < kCoefficientCount; ++j)
            require(std::isfinite(obs.features.regressor(j)), ErrorKind::Domain, "non-finite feature value");
}

}  // namespace detail

/// -sum_i log P(z_i; exp(b1 . x_i), exp(b2 . x_i)).
inline double negative_log_likelihood(const Coefficients& b1, const Coefficients& b2,
                                      std::span<const Observation> data) {
    require(!data.empty(), ErrorKind::Precondition, "negative_log_likelihood: empty data");
    detail::require_finite(b1, "b1");
    detail::require_finite(b2, "b2");
    detail::validate_data(data);
    std::vector<double> terms(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& obs = data[i];
        const SkellamParams p{std::exp(linear_predictor(b1, obs.features)),
                              std::exp(linear_predictor(b2, obs.features))};
        terms[i] = -skellam_log_pmf(obs.goal_diff, p);
    }
    return detail::sorted_pairwise_sum(terms);
}

/// Analytic gradient of the NLL, ordered (b1[0..4], b2[0..4]).
inline ParameterVector nll_gradient(const Coefficients& b1, const Coefficients& b2,
                                    std::span<const Observation> data) {
    require(!data.empty(), ErrorKind::Precondition, "nll_gradient: empty data");
    detail::require_finite(b1, "b1");
    detail::require_finite(b2, "b2");
    detail::validate_data(data);
    return detail::evaluate(detail::pack(b1, b2), data, false).gradient;
}

/// Raw (unsymmetrized) observed information: central differences of the
/// analytic gradient with step `step`.
inline Eigen::Matrix<double, 10, 10> observed_information(const SkellamGlmModel& model,
                                                          std::span<const Observation> data, double step = 1e-4) {
    require(!data.empty(), ErrorKind::Precondition, "observed_information: empty data");
    const auto ordered = detail::canonical_order(data);
    const ParameterVector theta = detail::pack(model.b1, model.b2);
    Eigen::Matrix<double, 10, 10> h;
    for (std::size_t j = 0; j < kParameterCount; ++j) {
        ParameterVector up = theta;
        ParameterVector down = theta;
        up[j] += step;
        down[j] -= step;
        const auto g_up = detail::evaluate(up, ordered, false).gradient;
        const auto g_down = detail::evaluate(down, ordered, false).gradient;
        for (std::size_t i = 0; i < kParameterCount; ++i)
            h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (g_up[i] - g_down[i]) / (2.0 * step);
    }
    return h;
}

struct StandardErrors {
    Coefficients se1{};
    Coefficients se2{};
};

/// Square roots of the diagonal of the inverse observed information.
/// Slopes on features that are zero throughout `data` are not identified and
/// get a standard error of 0.
inline StandardErrors standard_errors(const SkellamGlmModel& model, std::span<const Observation> data) {
    require(model.converged, ErrorKind::Precondition, "standard_errors: model did not converge");
    const auto active = detail::active_columns(data);
    Eigen::Matrix<double, 10, 10> h = observed_information(model, data);
    h = 0.5 * (h + h.transpose()).eval();

    std::vector<Eigen::Index> keep;
    for (std::size_t j = 0; j < kParameterCount; ++j)
        if (active[j % kCoefficientCount]) keep.push_back(static_cast<Eigen::Index>(j));
    const auto m = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd reduced(m, m);
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < m; ++c) reduced(r, c) = h(keep[r], keep[c]);

    Eigen::LLT<Eigen::MatrixXd> llt(reduced);
    require(llt.info() == Eigen::Success, ErrorKind::IllConditioned,
            "standard_errors: observed information is not positive definite");
    const Eigen::MatrixXd covariance = llt.solve(Eigen::MatrixXd::Identity(m, m));

    StandardErrors out;
    for (Eigen::Index r = 0; r < m; ++r) {
        const auto j = static_cast<std::size_t>(keep[r]);
        const double variance = covariance(r, r);
        require(variance > 0.0 && std::isfinite(variance), ErrorKind::IllConditioned,
                "standard_errors: nonpositive variance estimate");
        (j < kCoefficientCount ? out.se1[j] : out.se2[j - kCoefficientCount]) = std::sqrt(variance);
    }
    return out;
}

/// Condition number of the Gram matrix of the active design columns.
inline double design_condition_number(std::span<const Observation> data) {
    const auto active = detail::active_columns(data);
    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < kCoefficientCount; ++j)
        if (active[j]) cols.push_back(j);
    const auto m = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m, m);
    for (const auto& obs : data)
        for (Eigen::Index r = 0; r < m; ++r)
            for (Eigen::Index c = 0; c < m; ++c)
                gram(r, c) += obs.features.regressor(cols[static_cast<std::size_t>(r)]) *
                              obs.features.regressor(cols[static_cast<std::size_t>(c)]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (lo <= 0.0) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

namespace detail {

struct BfgsOutcome {
    ParameterVector theta{};
    Evaluation eval;
    int iterations = 0;
    bool converged = false;
};

inline BfgsOutcome run_bfgs(ParameterVector theta, std::span<const Observation> data, const FitConfig& config,
                            int iteration_budget) {
    using Vec = Eigen::Matrix<double, 10, 1>;
    using Mat = Eigen::Matrix<double, 10, 10>;
    const auto to_vec = [](const ParameterVector& p) { return Vec(Eigen::Map<const Vec>(p.data())); };

    BfgsOutcome out;
    out.theta = theta;
    out.eval = evaluate(theta, data);
    Mat inv_h = Mat::Identity();
    bool scaled = false;

    for (int it = 0; it < iteration_budget; ++it) {
        out.iterations = it;
        if (norm(out.eval.gradient) < config.gradient_tolerance) {
            out.converged = true;
            return out;
        }
        const Vec g = to_vec(out.eval.gradient);
        Vec direction = -inv_h * g;
        double slope = g.dot(direction);
        if (!(slope < 0.0)) {
            inv_h = Mat::Identity();
            scaled = false;
            direction = -g;
            slope = g.dot(direction);
        }
        double step = scaled ? 1.0 : 1.0 / std::max(1.0, g.norm());

        // Backtracking Armijo search; the allowance absorbs rounding in a
        // sum of many terms so steps near the optimum are not rejected.
        const double f0 = out.eval.nll;
        const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(f0);
        bool accepted = false;
        ParameterVector trial{};
        Evaluation trial_eval;
        for (int attempt = 0; attempt < 60; ++attempt) {
            for (std::size_t j = 0; j < kParameterCount; ++j)
                trial[j] = out.theta[j] + step * direction(static_cast<Eigen::Index>(j));
            trial_eval = evaluate(trial, data);
            if (std::isfinite(trial_eval.nll) && trial_eval.nll <= f0 + 1e-4 * step * slope + noise) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (scaled) {
                inv_h = Mat::Identity();
                scaled = false;
                continue;
            }
            out.iterations = it + 1;
            return out;
        }

        const Vec s = to_vec(trial) - to_vec(out.theta);
        const Vec y = to_vec(trial_eval.gradient) - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (!scaled) {
                inv_h = Mat::Identity() * (sy / y.dot(y));
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Mat left = Mat::Identity() - rho * s * y.transpose();
            inv_h = left * inv_h * left.transpose() + rho * s * s.transpose();
        }
        out.theta = trial;
        out.eval = trial_eval;
    }
    out.iterations = iteration_budget;
    out.converged = norm(out.eval.gradient) < config.gradient_tolerance;
    return out;
}

inline ParameterVector default_start(std::span<const Observation> data) {
    // Method of moments on the goal differential: E Z = l1 - l2, Var Z = l1 + l2.
    double mean = 0.0;
    for (const auto& o : data) mean += o.goal_diff;
    mean /= static_cast<double>(data.size());
    double var = 0.0;
    for (const auto& o : data) var += (o.goal_diff - mean) * (o.goal_diff - mean);
    var /= static_cast<double>(data.size() > 1 ? data.size() - 1 : 1);
    constexpr double kFloor = 0.05;
    const double l1 = std::max(kFloor, 0.5 * (var + mean));
    const double l2 = std::max(kFloor, 0.5 * (var - mean));
    ParameterVector theta{};
    theta[0] = std::log(l1);
    theta[kCoefficientCount] = std::log(l2);
    return theta;
}

}  // namespace detail

/// Maximum-likelihood fit. Deterministic for given (data as a multiset,
/// config). A run that stalls is restarted from a seeded jitter of the start
/// point, at most twice, within the same iteration budget.
inline SkellamGlmModel fit(std::span<const Observation> data, const FitConfig& config = {}) {
    require(!data.empty(), ErrorKind::Precondition, "fit: empty dataset");
    require(data.size() >= 50, ErrorKind::Precondition,
            "fit: need at least 50 observations, got " + std::to_string(data.size()));
    require(config.gradient_tolerance > 0.0, ErrorKind::Precondition, "fit: gradient_tolerance must be positive");
    require(config.max_iterations > 0, ErrorKind::Precondition, "fit: max_iterations must be positive");
    detail::validate_data(data);

    const bool same_z = std::all_of(data.begin(), data.end(),
                                    [&](const Observation& o) { return o.goal_diff == data.front().goal_diff; });
    const bool same_x = std::all_of(data.begin(), data.end(),
                                    [&](const Observation& o) { return o.features == data.front().features; });
    require(!(same_z && same_x), ErrorKind::Degenerate,
            "fit: all goal differentials identical and features constant; likelihood has no interior optimum");

    const double condition = design_condition_number(data);
    require(condition <= 1e10, ErrorKind::IllConditioned,
            "fit: design matrix is collinear (Gram condition number " + std::to_string(condition) + ")");

    const auto ordered = detail::canonical_order(data);
    const ParameterVector start = config.initial_coefficients.value_or(detail::default_start(ordered));

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> jitter(0.0, 0.05);
    detail::BfgsOutcome best = detail::run_bfgs(start, ordered, config, config.max_iterations);
    int used = best.iterations;
    for (int restart = 0; restart < 2 && !best.converged && used < config.max_iterations; ++restart) {
        ParameterVector perturbed = best.theta;
        for (double& v : perturbed) v += jitter(rng);
        auto next = detail::run_bfgs(perturbed, ordered, config, config.max_iterations - used);
        used += next.iterations;
        if (next.converged || next.eval.nll < best.eval.nll) best = next;
    }

    SkellamGlmModel model;
    model.b1 = detail::head(best.theta);
    model.b2 = detail::tail(best.theta);
    model.n_obs = data.size();
    model.final_nll = negative_log_likelihood(model.b1, model.b2, ordered);
    model.converged = best.converged;
    model.iterations = used;
    model.gradient_norm = detail::norm(best.eval.gradient);
    if (model.converged) {
        const auto se = standard_errors(model, ordered);
        model.se1 = se.se1;
        model.se2 = se.se2;
    }
    return model;
}

/// (exp(b1 . [1, x]), exp(b2 . [1, x])).
inline SkellamParams predict_lambdas(const SkellamGlmModel& model, const FeatureVector& features) {
    require(model.converged, ErrorKind::Precondition, "predict_lambdas: model did not converge");
    return {std::exp(linear_predictor(model.b1, features)), std::exp(linear_predictor(model.b2, features))};
}

inline OutcomeProbs predict_outcome(const SkellamGlmModel& model, const FeatureVector& features) {
    return outcome_probs(predict_lambdas(model, features));
}

}  // namespace elpar
