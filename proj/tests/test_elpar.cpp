#include <gtest/gtest.h>

#include <cmath>
#include <utility>
#include <vector>

#include "elpar/elpar.hpp"

using namespace elpar;

namespace {

const SkellamGlmModel kReference = reference_model();

ReplacementLevels uniform_levels(double level) {
    ReplacementLevels levels;
    levels.rating.fill(level);
    return levels;
}

ReplacementLevels mixed_levels() {
    ReplacementLevels levels;
    levels[Line::GK] = 54.0;
    levels[Line::DEF] = 55.5;
    levels[Line::MID] = 56.0;
    levels[Line::ATT] = 57.2;
    return levels;
}

}  // namespace

TEST(ElparPerGame, ZeroAtReplacementEverywhere) {
    const auto levels = mixed_levels();
    for (Venue venue : {Venue::Symmetric, Venue::Home})
        for (const auto& f : canonical_formations())
            for (Line line : kAllLines) {
                const auto r = elpar_per_game(kReference, f, line, levels[line], levels, venue);
                EXPECT_EQ(r.points_per_game, 0.0) << to_string(f) << " " << to_string(line);
                EXPECT_EQ(r.delta_win, 0.0);
            }
}

TEST(ElparPerGame, PointsIdentityAndDeltasSumToZero) {
    const auto levels = mixed_levels();
    for (Venue venue : {Venue::Symmetric, Venue::Home})
        for (const auto& f : canonical_formations())
            for (Line line : kAllLines)
                for (double rating : {40.0, 63.0, 99.0}) {
                    const auto r = elpar_per_game(kReference, f, line, rating, levels, venue);
                    EXPECT_NEAR(r.points_per_game, 3.0 * r.delta_win + r.delta_draw, 1e-12);
                    EXPECT_NEAR(r.delta_win + r.delta_draw + r.delta_loss, 0.0, 1e-9);
                }
}

TEST(ElparPerGame, StrictlyIncreasingInRating) {
    const auto levels = mixed_levels();
    const auto ratings = rating_range(50, 99);
    for (Venue venue : {Venue::Symmetric, Venue::Home})
        for (const auto& f : canonical_formations())
            for (Line line : kAllLines) {
                double previous = -1e9;
                for (double rating : ratings) {
                    const double v = elpar_per_game(kReference, f, line, rating, levels, venue).points_per_game;
                    EXPECT_GT(v, previous) << to_string(f) << " " << to_string(line) << " " << rating;
                    previous = v;
                }
            }
}

TEST(ElparPerGame, LargerLinesDilute) {
    const auto levels = mixed_levels();
    const auto value = [&](Formation f, Line line, double rating) {
        return elpar_per_game(kReference, f, line, rating, levels).points_per_game;
    };
    for (double rating : {60.0, 75.0, 99.0}) {
        EXPECT_GT(value({3, 5, 2}, Line::DEF, rating), value({4, 4, 2}, Line::DEF, rating));
        EXPECT_GT(value({4, 3, 3}, Line::MID, rating), value({4, 4, 2}, Line::MID, rating));
        EXPECT_GT(value({4, 4, 2}, Line::MID, rating), value({3, 5, 2}, Line::MID, rating));
        EXPECT_GT(value({4, 5, 1}, Line::ATT, rating), value({4, 4, 2}, Line::ATT, rating));
        EXPECT_GT(value({4, 4, 2}, Line::ATT, rating), value({4, 3, 3}, Line::ATT, rating));
    }
}

TEST(ElparPerGame, GoalkeeperSmallestAtEqualRating) {
    // Equal replacement levels isolate the line effect.
    const auto levels = uniform_levels(56.0);
    for (Venue venue : {Venue::Symmetric, Venue::Home})
        for (const auto& f : canonical_formations())
            for (double rating : rating_range(50, 99)) {
                if (rating == 56.0) continue;
                const double gk = std::abs(elpar_per_game(kReference, f, Line::GK, rating, levels, venue).points_per_game);
                for (Line line : {Line::DEF, Line::MID, Line::ATT}) {
                    const double other =
                        std::abs(elpar_per_game(kReference, f, line, rating, levels, venue).points_per_game);
                    EXPECT_LT(gk, other) << to_string(f) << " " << to_string(line) << " rating " << rating;
                }
            }
}

TEST(ElparPerGame, EliteGoalkeeperNearTenthOfAPoint) {
    const auto levels = uniform_levels(56.0);
    const double v = elpar_per_game(kReference, {4, 4, 2}, Line::GK, 92.0, levels).points_per_game;
    EXPECT_GT(v, 0.05);
    EXPECT_LT(v, 0.2);
}

TEST(ElparPerGame, SymmetricIsMeanOfVenues) {
    const auto levels = mixed_levels();
    const Formation f{4, 3, 3};
    const double rating = 81.0;
    const auto home = elpar_per_game(kReference, f, Line::MID, rating, levels, Venue::Home);
    const auto sym = elpar_per_game(kReference, f, Line::MID, rating, levels, Venue::Symmetric);
    // Away insertion: negate the feature shift and read the home side's loss as a win.
    FeatureVector shift;
    shift.x_m = -(rating - levels[Line::MID]) / 3.0;
    const auto base = predict_outcome(kReference, FeatureVector{});
    const auto away = predict_outcome(kReference, shift);
    EXPECT_NEAR(sym.delta_win, 0.5 * (home.delta_win + away.p_loss - base.p_loss), 1e-15);
    EXPECT_NEAR(sym.delta_draw, 0.5 * (home.delta_draw + away.p_draw - base.p_draw), 1e-15);
}

TEST(ElparPerGame, Preconditions) {
    const auto levels = mixed_levels();
    EXPECT_THROW(elpar_per_game(kReference, {4, 4, 2}, Line::GK, 101.0, levels), Error);
    EXPECT_THROW(elpar_per_game(kReference, {4, 4, 3}, Line::GK, 70.0, levels), Error);
    SkellamGlmModel unfitted;
    EXPECT_THROW(elpar_per_game(unfitted, {4, 4, 2}, Line::GK, 70.0, levels), Error);
}

TEST(ElparWeighted, SingleFormationReducesExactly) {
    const auto levels = mixed_levels();
    std::vector<std::pair<Formation, ElparResult>> rows;
    for (const auto& f : canonical_formations())
        rows.emplace_back(f, elpar_per_game(kReference, f, Line::ATT, 84.0, levels));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::vector<double> minutes(rows.size(), 0.0);
        minutes[i] = 1260.0;
        EXPECT_EQ(elpar_weighted(rows, minutes), rows[i].second.points_per_game);
    }
}

TEST(ElparWeighted, EqualMinutesGiveArithmeticMean) {
    const auto levels = mixed_levels();
    std::vector<std::pair<Formation, ElparResult>> rows;
    double sum = 0.0;
    for (const auto& f : canonical_formations()) {
        rows.emplace_back(f, elpar_per_game(kReference, f, Line::DEF, 77.0, levels));
        sum += rows.back().second.points_per_game;
    }
    const std::vector<double> minutes(4, 90.0);
    EXPECT_NEAR(elpar_weighted(rows, minutes), sum / 4.0, 1e-15);
    const auto& formations = canonical_formations();
    EXPECT_NEAR(elpar_formation_average(kReference, formations, Line::DEF, 77.0, levels), sum / 4.0, 1e-15);
}

TEST(ElparWeighted, Errors) {
    const auto levels = mixed_levels();
    const std::vector<std::pair<Formation, ElparResult>> rows{
        {Formation{4, 4, 2}, elpar_per_game(kReference, {4, 4, 2}, Line::GK, 70.0, levels)}};
    const std::vector<double> zero{0.0};
    try {
        elpar_weighted(rows, zero);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Degenerate);
    }
    const std::vector<double> two{1.0, 2.0};
    EXPECT_THROW(elpar_weighted(rows, two), Error);
    const std::vector<double> negative{-1.0};
    EXPECT_THROW(elpar_weighted(rows, negative), Error);
}

TEST(ElparTable, CardinalityAndOrder) {
    const auto levels = mixed_levels();
    const auto& formations = canonical_formations();
    const auto ratings = rating_range(50, 99);
    const auto grid = elpar_table(kReference, levels, formations, ratings);
    ASSERT_EQ(grid.size(), 800u);
    EXPECT_EQ(grid.front().formation, formations[0]);
    EXPECT_EQ(grid.front().line, Line::GK);
    EXPECT_EQ(grid.front().player_rating, 50.0);
    EXPECT_EQ(grid[50].line, Line::DEF);
    EXPECT_EQ(grid[200].formation, formations[1]);
    EXPECT_EQ(grid.back().line, Line::ATT);
    EXPECT_EQ(grid.back().player_rating, 99.0);
}

TEST(ElparTable, ReplacementColumnIsZero) {
    const auto levels = uniform_levels(56.0);
    const auto& formations = canonical_formations();
    const std::vector<double> ratings{56.0};
    for (const auto& r : elpar_table(kReference, levels, formations, ratings))
        EXPECT_LT(std::abs(r.points_per_game), 1e-9);
}

TEST(RatingRange, Bounds) {
    EXPECT_EQ(rating_range(50, 99).size(), 50u);
    EXPECT_THROW(rating_range(10, 9), Error);
}
