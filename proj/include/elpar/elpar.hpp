#pragma once

// Expected league points added above replacement (eLPAR).
//
// Start from a game between two all-replacement teams (every feature is 0).
// Swapping one replacement for a player rated r in line l of formation f
// shifts that line's average by (r - level[l]) / size(f, l). The player's
// value is 3 * dP(win) + 1 * dP(draw) for the player's team.

#include <span>
#include <utility>
#include <vector>

#include "elpar/data.hpp"
#include "elpar/glm.hpp"
#include "elpar/lines.hpp"

namespace elpar {

/// Which venue the substituted player's team plays at.
enum class Venue {
    Symmetric,  // mean of the home-side and away-side deltas (default)
    Home,       // player's team is the home side
};

struct ElparResult {
    double points_per_game = 0.0;
    double delta_win = 0.0;
    double delta_draw = 0.0;
    double delta_loss = 0.0;
    Formation formation;
    Line line = Line::GK;
    double player_rating = 0.0;
};

inline ElparResult elpar_per_game(const SkellamGlmModel& model, const Formation& formation, Line line, double rating,
                                  const ReplacementLevels& levels, Venue venue = Venue::Symmetric) {
    require(is_valid(formation), ErrorKind::Precondition, "elpar_per_game: invalid formation");
    require(rating >= 0.0 && rating <= 100.0, ErrorKind::Precondition, "elpar_per_game: rating outside [0, 100]");

    FeatureVector shift;
    shift[line] = (rating - levels[line]) / line_size(formation, line);

    const OutcomeProbs base = predict_outcome(model, FeatureVector{});
    const OutcomeProbs home = predict_outcome(model, shift);

    ElparResult r;
    r.formation = formation;
    r.line = line;
    r.player_rating = rating;
    r.delta_win = home.p_win - base.p_win;
    r.delta_draw = home.p_draw - base.p_draw;
    r.delta_loss = home.p_loss - base.p_loss;
    if (venue == Venue::Symmetric) {
        // As the away side the team's win is the home side's loss.
        const OutcomeProbs away = predict_outcome(model, -shift);
        r.delta_win = 0.5 * (r.delta_win + (away.p_loss - base.p_loss));
        r.delta_draw = 0.5 * (r.delta_draw + (away.p_draw - base.p_draw));
        r.delta_loss = 0.5 * (r.delta_loss + (away.p_win - base.p_win));
    }
    r.points_per_game = 3.0 * r.delta_win + 1.0 * r.delta_draw;
    return r;
}

/// Playing-time weighted eLPAR: sum over formations of (t_f / T) * eLPAR(f).
inline double elpar_weighted(std::span<const std::pair<Formation, ElparResult>> per_formation,
                             std::span<const double> minutes) {
    require(per_formation.size() == minutes.size(), ErrorKind::Precondition,
            "elpar_weighted: formations and minutes differ in length");
    double total = 0.0;
    for (double t : minutes) {
        require(t >= 0.0 && std::isfinite(t), ErrorKind::Precondition, "elpar_weighted: minutes must be nonnegative");
        total += t;
    }
    require(total > 0.0, ErrorKind::Degenerate, "elpar_weighted: total playing time is zero");
    double value = 0.0;
    for (std::size_t i = 0; i < minutes.size(); ++i) {
        if (minutes[i] == 0.0) continue;
        value += (minutes[i] / total) * per_formation[i].second.points_per_game;
    }
    return value;
}

/// eLPAR averaged over `formations` with equal playing time.
inline double elpar_formation_average(const SkellamGlmModel& model, std::span<const Formation> formations, Line line,
                                      double rating, const ReplacementLevels& levels,
                                      Venue venue = Venue::Symmetric) {
    std::vector<std::pair<Formation, ElparResult>> rows;
    std::vector<double> minutes(formations.size(), 1.0);
    for (const auto& f : formations) rows.emplace_back(f, elpar_per_game(model, f, line, rating, levels, venue));
    return elpar_weighted(rows, minutes);
}

/// Grid ordered by formation, then line (GK, DEF, MID, ATT), then rating.
inline std::vector<ElparResult> elpar_table(const SkellamGlmModel& model, const ReplacementLevels& levels,
                                            std::span<const Formation> formations, std::span<const double> ratings,
                                            Venue venue = Venue::Symmetric) {
    std::vector<ElparResult> grid;
    grid.reserve(formations.size() * kAllLines.size() * ratings.size());
    for (const auto& f : formations)
        for (Line line : kAllLines)
            for (double r : ratings) grid.push_back(elpar_per_game(model, f, line, r, levels, venue));
    return grid;
}

/// Integer ratings lo..hi inclusive.
inline std::vector<double> rating_range(int lo, int hi) {
    require(lo <= hi, ErrorKind::Precondition, "rating_range: empty range");
    std::vector<double> out;
    for (int r = lo; r <= hi; ++r) out.push_back(r);
    return out;
}

}  // namespace elpar
