#pragma once

// Synthetic data: goal differentials drawn from a known Skellam regression
// (parameter recovery, calibration and residual checks) and a small league of
// players and matches in the flat-file schema (CLI fixtures).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "elpar/data.hpp"
#include "elpar/glm.hpp"

namespace elpar {

/// One Skellam draw as the difference of two independent Poisson draws.
template <typename Rng>
int sample_goal_diff(const SkellamParams& params, Rng& rng) {
    std::poisson_distribution<int> home(params.lambda1);
    std::poisson_distribution<int> away(params.lambda2);
    const int x = home(rng);
    return x - away(rng);
}

/// n observations with features iid uniform on [-half_range, half_range] and
/// goal differentials drawn from the model's Skellam law.
inline std::vector<Observation> sample_observations(const Coefficients& b1, const Coefficients& b2, std::size_t n,
                                                    std::uint64_t seed, double half_range = 10.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> feature(-half_range, half_range);
    std::vector<Observation> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Observation o;
        o.features.x_d = feature(rng);
        o.features.x_m = feature(rng);
        o.features.x_a = feature(rng);
        o.features.x_gk = feature(rng);
        const SkellamParams p{std::exp(linear_predictor(b1, o.features)), std::exp(linear_predictor(b2, o.features))};
        o.goal_diff = sample_goal_diff(p, rng);
        out.push_back(o);
    }
    return out;
}

/// Goal differentials for given features under a model.
inline std::vector<Observation> resample_outcomes(const SkellamGlmModel& model, std::span<const Observation> features,
                                                  std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Observation> out(features.begin(), features.end());
    for (auto& o : out) o.goal_diff = sample_goal_diff(predict_lambdas(model, o.features), rng);
    return out;
}

struct LeagueConfig {
    std::size_t matches = 200;
    std::size_t players_per_line = 40;
    std::uint64_t seed = 1;
    Coefficients b1 = reference_model().b1;
    Coefficients b2 = reference_model().b2;
    double rating_mean = 70.0;
    double rating_sd = 7.0;
};

struct League {
    std::vector<MatchRecord> matches;
    std::vector<PlayerSnapshot> players;
};

/// A synthetic league: a player pool of `players_per_line` per line, two
/// rating snapshots per player, and matches between randomly drawn lineups in
/// canonical formations, scored from the Skellam model.
inline League simulate_league(const LeagueConfig& config) {
    using namespace std::chrono;
    require(config.players_per_line >= 10, ErrorKind::Precondition,
            "simulate_league: need at least 10 players per line to field two lineups");
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> rating_noise(config.rating_mean, config.rating_sd);
    std::normal_distribution<double> drift(0.0, 1.5);
    std::normal_distribution<double> value_noise(0.0, 0.3);

    const Date season_start{year{2017}, month{8}, day{1}};
    const Date midseason{year{2018}, month{1}, day{15}};
    const std::array<std::vector<std::string>, 4> labels{
        std::vector<std::string>{"GK"}, std::vector<std::string>{"CB", "LB", "RB", "CB"},
        std::vector<std::string>{"CM", "CDM", "CAM", "LM", "RM"}, std::vector<std::string>{"ST", "LW", "RW", "CF"}};
    // Market value scale per line (GK cheapest on average, ATT dearest).
    const std::array<double, 4> value_scale{1.6e6, 1.8e6, 2.2e6, 2.8e6};

    League league;
    std::array<std::vector<std::string>, 4> pool;
    std::size_t serial = 0;
    for (Line line : kAllLines) {
        const std::size_t k = index_of(line);
        for (std::size_t i = 0; i < config.players_per_line; ++i) {
            char id[16];
            std::snprintf(id, sizeof id, "p%04zu", ++serial);
            const std::string& label = labels[k][i % labels[k].size()];
            const double r0 = std::clamp(std::round(rating_noise(rng)), 40.0, 95.0);
            const double r1 = std::clamp(std::round(r0 + drift(rng)), 40.0, 95.0);
            for (const auto& [date, rating] : {std::pair{season_start, r0}, std::pair{midseason, r1}}) {
                const double value =
                    value_scale[k] * std::exp(0.16 * (rating - config.rating_mean) + value_noise(rng));
                const auto euros = static_cast<Euros>(std::llround(value / 1000.0) * 1000);
                league.players.push_back({id, date, rating, label, euros, euros / 250});
            }
            pool[k].push_back(id);
        }
    }

    const SnapshotIndex index(league.players);
    const auto& formations = canonical_formations();
    std::uniform_int_distribution<std::size_t> pick_formation(0, formations.size() - 1);
    for (std::size_t m = 0; m < config.matches; ++m) {
        MatchRecord match;
        char id[16];
        std::snprintf(id, sizeof id, "m%05zu", m + 1);
        match.match_id = id;
        match.league_id = "L1";
        match.date = sys_days(season_start) + days(static_cast<int>(m * 240 / std::max<std::size_t>(1, config.matches)));

        // Draw 22 distinct players: both sides sample from the same pools.
        std::array<std::vector<std::string>, 4> shuffled = pool;
        for (auto& v : shuffled) std::shuffle(v.begin(), v.end(), rng);
        std::array<std::size_t, 4> cursor{};
        for (std::size_t side = 0; side < 2; ++side) {
            const Formation f = formations[pick_formation(rng)];
            Lineup& lineup = side == 0 ? match.home_lineup : match.away_lineup;
            std::size_t slot = 0;
            for (Line line : kAllLines)
                for (int i = 0; i < line_size(f, line); ++i)
                    lineup[slot++] = shuffled[index_of(line)][cursor[index_of(line)]++];
        }
        const FeatureVector x = build_features(match, index);
        const SkellamParams p{std::exp(linear_predictor(config.b1, x)), std::exp(linear_predictor(config.b2, x))};
        std::poisson_distribution<int> home(p.lambda1);
        std::poisson_distribution<int> away(p.lambda2);
        match.home_goals = std::min(30, home(rng));
        match.away_goals = std::min(30, away(rng));
        league.matches.push_back(std::move(match));
    }
    return league;
}

}  // namespace elpar
