#pragma once

// Held-out evaluation: residuals of the expected goal differential and
// per-class probability calibration curves.

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "elpar/glm.hpp"
#include "elpar/numeric.hpp"

namespace elpar {

enum class Outcome { Win = 0, Draw = 1, Loss = 2 };

inline constexpr std::array<Outcome, 3> kAllOutcomes{Outcome::Win, Outcome::Draw, Outcome::Loss};

inline Outcome outcome_of(int goal_diff) {
    return goal_diff > 0 ? Outcome::Win : (goal_diff == 0 ? Outcome::Draw : Outcome::Loss);
}

inline const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::Win: return "win";
        case Outcome::Draw: return "draw";
        case Outcome::Loss: return "loss";
    }
    return "?";
}

inline double probability_of(const OutcomeProbs& p, Outcome o) {
    switch (o) {
        case Outcome::Win: return p.p_win;
        case Outcome::Draw: return p.p_draw;
        case Outcome::Loss: return p.p_loss;
    }
    return 0.0;
}

struct HistogramBucket {
    int center = 0;  // covers [center - 0.5, center + 0.5)
    std::size_t count = 0;
};

struct ChiSquaredCell {
    double lower = 0.0;  // -inf for the first cell
    double upper = 0.0;  // +inf for the last cell
    std::size_t observed = 0;
    double expected = 0.0;
};

struct ResidualSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double std_dev = 0.0;
    std::vector<HistogramBucket> histogram;
    std::vector<ChiSquaredCell> chi_sq_cells;
    double chi_sq_stat = 0.0;
    int chi_sq_df = 0;
    double chi_sq_p_value = std::numeric_limits<double>::quiet_NaN();
    double chi_sq_critical_5pct = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

// Unit buckets tested against Normal(0, sigma); the two end cells are open.
// Cells with expected count below 5 are folded into their inner neighbour,
// working from each tail inwards.
inline std::vector<ChiSquaredCell> normal_cells(const std::vector<HistogramBucket>& histogram, std::size_t n,
                                                double sigma) {
    std::vector<ChiSquaredCell> cells;
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < histogram.size(); ++i) {
        const double lo = i == 0 ? -inf : histogram[i].center - 0.5;
        const double hi = i + 1 == histogram.size() ? inf : histogram[i].center + 0.5;
        const double mass = numeric::normal_cdf(hi / sigma) - numeric::normal_cdf(lo / sigma);
        cells.push_back({lo, hi, histogram[i].count, static_cast<double>(n) * mass});
    }
    while (cells.size() > 1 && cells.front().expected < 5.0) {
        cells[1].lower = cells[0].lower;
        cells[1].observed += cells[0].observed;
        cells[1].expected += cells[0].expected;
        cells.erase(cells.begin());
    }
    while (cells.size() > 1 && cells.back().expected < 5.0) {
        auto& inner = cells[cells.size() - 2];
        inner.upper = cells.back().upper;
        inner.observed += cells.back().observed;
        inner.expected += cells.back().expected;
        cells.pop_back();
    }
    return cells;
}

}  // namespace detail

/// Residual r_i = (lambda1_i - lambda2_i) - z_i on held-out games, with a
/// chi-squared goodness-of-fit test against Normal(0, sd). The test spends
/// one degree of freedom on the total and one on the estimated sd.
inline ResidualSummary residual_summary(const SkellamGlmModel& model, std::span<const Observation> test) {
    require(!test.empty(), ErrorKind::Precondition, "residual_summary: empty test set");
    std::vector<double> residuals(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        const SkellamParams p = predict_lambdas(model, test[i].features);
        residuals[i] = (p.lambda1 - p.lambda2) - test[i].goal_diff;
    }

    ResidualSummary s;
    s.n = test.size();
    const double n = static_cast<double>(s.n);
    s.mean = numeric::pairwise_sum(residuals) / n;
    std::vector<double> squares(residuals.size());
    for (std::size_t i = 0; i < residuals.size(); ++i) squares[i] = (residuals[i] - s.mean) * (residuals[i] - s.mean);
    s.std_dev = s.n > 1 ? std::sqrt(numeric::pairwise_sum(squares) / (n - 1.0)) : 0.0;

    int lo = std::numeric_limits<int>::max();
    int hi = std::numeric_limits<int>::min();
    std::vector<int> centers(residuals.size());
    for (std::size_t i = 0; i < residuals.size(); ++i) {
        centers[i] = static_cast<int>(std::floor(residuals[i] + 0.5));
        lo = std::min(lo, centers[i]);
        hi = std::max(hi, centers[i]);
    }
    s.histogram.resize(static_cast<std::size_t>(hi - lo + 1));
    for (int c = lo; c <= hi; ++c) s.histogram[static_cast<std::size_t>(c - lo)].center = c;
    for (int c : centers) ++s.histogram[static_cast<std::size_t>(c - lo)].count;

    if (s.std_dev > 0.0) {
        s.chi_sq_cells = detail::normal_cells(s.histogram, s.n, s.std_dev);
        for (const auto& cell : s.chi_sq_cells) {
            const double diff = static_cast<double>(cell.observed) - cell.expected;
            s.chi_sq_stat += diff * diff / cell.expected;
        }
        s.chi_sq_df = std::max(0, static_cast<int>(s.chi_sq_cells.size()) - 2);
        if (s.chi_sq_df > 0) {
            boost::math::chi_squared dist(s.chi_sq_df);
            s.chi_sq_p_value = boost::math::cdf(boost::math::complement(dist, s.chi_sq_stat));
            s.chi_sq_critical_5pct = boost::math::quantile(boost::math::complement(dist, 0.05));
        }
    }
    return s;
}

struct CalibrationBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t n = 0;
    double mean_predicted = 0.0;
    double observed_frequency = 0.0;
    bool defined = false;  // false when n == 0
};

/// One curve per outcome class, indexed by Outcome.
using CalibrationCurves = std::array<std::vector<CalibrationBin>, 3>;

/// Index of the half-open bin [k w, (k + 1) w) holding p; 1.0 falls in the last bin.
inline std::size_t calibration_bin_index(double p, std::size_t bins) {
    const double scaled = p * static_cast<double>(bins);
    auto k = static_cast<std::size_t>(std::max(0.0, std::floor(scaled)));
    // Bin edges are k / bins; correct for rounding in p * bins near an edge.
    while (k > 0 && static_cast<double>(k) / static_cast<double>(bins) > p) --k;
    while (k + 1 < bins && static_cast<double>(k + 1) / static_cast<double>(bins) <= p) ++k;
    return std::min(k, bins - 1);
}

inline CalibrationCurves calibration_curve(std::span<const OutcomeProbs> predictions, std::span<const Outcome> outcomes,
                                           double bin_width = 0.05) {
    require(predictions.size() == outcomes.size(), ErrorKind::Precondition,
            "calibration_curve: predictions and outcomes differ in length");
    require(bin_width > 0.0 && bin_width <= 1.0, ErrorKind::Precondition, "calibration_curve: bin width out of range");
    const double count = 1.0 / bin_width;
    const double rounded = std::round(count);
    require(std::abs(count - rounded) < 1e-9, ErrorKind::Precondition,
            "calibration_curve: bin width must divide 1 evenly");
    const auto bins = static_cast<std::size_t>(rounded);

    CalibrationCurves curves;
    std::array<std::vector<double>, 3> predicted_sum;
    std::array<std::vector<std::size_t>, 3> hits;
    for (std::size_t c = 0; c < 3; ++c) {
        curves[c].resize(bins);
        predicted_sum[c].assign(bins, 0.0);
        hits[c].assign(bins, 0);
        for (std::size_t k = 0; k < bins; ++k) {
            curves[c][k].lower = static_cast<double>(k) / static_cast<double>(bins);
            curves[c][k].upper = static_cast<double>(k + 1) / static_cast<double>(bins);
        }
    }
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        for (Outcome o : kAllOutcomes) {
            const auto c = static_cast<std::size_t>(o);
            const double p = probability_of(predictions[i], o);
            const std::size_t k = calibration_bin_index(p, bins);
            ++curves[c][k].n;
            predicted_sum[c][k] += p;
            if (outcomes[i] == o) ++hits[c][k];
        }
    }
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t k = 0; k < bins; ++k) {
            auto& bin = curves[c][k];
            if (bin.n == 0) continue;
            bin.defined = true;
            bin.mean_predicted = predicted_sum[c][k] / static_cast<double>(bin.n);
            bin.observed_frequency = static_cast<double>(hits[c][k]) / static_cast<double>(bin.n);
        }
    }
    return curves;
}

}  // namespace elpar
