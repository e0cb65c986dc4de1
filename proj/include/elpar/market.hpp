#pragma once

// Money layer on top of eLPAR: cost per expected point, wage redistribution,
// market value curves, budget allocation and fair transfer fees.
//
// Amounts are whole euros. eLPAR inputs are per-game values.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "elpar/data.hpp"
#include "elpar/elpar.hpp"
#include "elpar/error.hpp"
#include "elpar/lines.hpp"

namespace elpar {

struct ValuationRecord {
    std::string player_id;
    Line line = Line::GK;
    double rating = 0.0;
    double elpar_per_game = 0.0;
    Euros market_value = 0;
    std::optional<Euros> wage;
    std::optional<Euros> cost_per_point;  // present iff elpar_per_game > 0
};

/// Market value paid per expected league point above replacement.
inline Euros cost_per_point(Euros market_value, double elpar) {
    require(elpar > 0.0, ErrorKind::Domain,
            "cost_per_point: eLPAR must be positive (replacement-level player has no cost per point)");
    require(market_value >= 0, ErrorKind::Domain, "cost_per_point: market value must be nonnegative");
    return static_cast<Euros>(std::llround(static_cast<double>(market_value) / elpar));
}

inline ValuationRecord make_valuation(std::string player_id, Line line, double rating, double elpar,
                                      Euros market_value, std::optional<Euros> wage = std::nullopt) {
    ValuationRecord v{std::move(player_id), line, rating, elpar, market_value, wage, std::nullopt};
    if (elpar > 0.0) v.cost_per_point = cost_per_point(market_value, elpar);
    return v;
}

/// Splits the squad's total wage bill in proportion to eLPAR. Players at or
/// below replacement get nothing; the last paid player absorbs the rounding
/// so the outputs sum to the bill exactly.
inline std::vector<Euros> wage_redistribution(std::span<const ValuationRecord> squad) {
    require(squad.size() == kLineupSize, ErrorKind::Precondition,
            "wage_redistribution: squad must have 11 players, got " + std::to_string(squad.size()));
    Euros budget = 0;
    double total = 0.0;
    std::optional<std::size_t> last_paid;
    for (std::size_t i = 0; i < squad.size(); ++i) {
        require(squad[i].wage.has_value() && *squad[i].wage >= 0, ErrorKind::Precondition,
                "wage_redistribution: player '" + squad[i].player_id + "' has no wage");
        budget += *squad[i].wage;
        if (squad[i].elpar_per_game > 0.0) {
            total += squad[i].elpar_per_game;
            last_paid = i;
        }
    }
    require(last_paid.has_value(), ErrorKind::Degenerate,
            "wage_redistribution: no player above replacement; shares undefined");

    std::vector<Euros> out(squad.size(), 0);
    Euros assigned = 0;
    for (std::size_t i = 0; i < squad.size(); ++i) {
        if (squad[i].elpar_per_game <= 0.0 || i == *last_paid) continue;
        const double share = squad[i].elpar_per_game / total;
        out[i] = static_cast<Euros>(std::llround(share * static_cast<double>(budget)));
        assigned += out[i];
    }
    out[*last_paid] = budget - assigned;
    return out;
}

// ---------------------------------------------------------------------------
// Value curve

/// Mean market value per (line, integer rating) over each player's latest
/// valued snapshot. Cells backed by fewer than `min_support` players are absent.
class ValueCurve {
public:
    struct Cell {
        Euros mean_value = 0;
        std::size_t support = 0;
    };

    ValueCurve() = default;

    void set(Line line, int rating, Cell cell) { cells_[index_of(line)][rating] = cell; }
    void set_line_mean(Line line, Euros mean) { line_mean_[index_of(line)] = mean; }

    std::optional<Euros> lookup(Line line, int rating) const {
        const auto& m = cells_[index_of(line)];
        auto it = m.find(rating);
        if (it == m.end()) return std::nullopt;
        return it->second.mean_value;
    }

    /// (rating, cell) pairs for one line, ascending rating.
    const std::map<int, Cell>& cells(Line line) const { return cells_[index_of(line)]; }

    /// Mean market value of every valued player in the line, regardless of support.
    std::optional<Euros> line_mean(Line line) const { return line_mean_[index_of(line)]; }

    bool covers(Line line) const { return !cells_[index_of(line)].empty(); }

private:
    std::array<std::map<int, Cell>, 4> cells_;
    std::array<std::optional<Euros>, 4> line_mean_;
};

inline ValueCurve build_value_curve(const SnapshotIndex& index, const PositionMap& positions = PositionMap{},
                                    std::size_t min_support = 5) {
    std::array<std::map<int, std::pair<double, std::size_t>>, 4> raw;
    std::array<std::pair<double, std::size_t>, 4> per_line{};
    for (const auto& id : index.players()) {
        const auto history = index.history(id);
        const PlayerSnapshot* valued = nullptr;
        for (auto it = history.rbegin(); it != history.rend(); ++it)
            if (it->market_value) {
                valued = &*it;
                break;
            }
        if (!valued) continue;
        const std::size_t k = index_of(positions.line_of(valued->position));
        const int rating = static_cast<int>(std::lround(valued->overall_rating));
        auto& cell = raw[k][rating];
        cell.first += static_cast<double>(*valued->market_value);
        ++cell.second;
        per_line[k].first += static_cast<double>(*valued->market_value);
        ++per_line[k].second;
    }
    ValueCurve curve;
    for (Line line : kAllLines) {
        const std::size_t k = index_of(line);
        for (const auto& [rating, acc] : raw[k])
            if (acc.second >= min_support)
                curve.set(line, rating,
                          {static_cast<Euros>(std::llround(acc.first / static_cast<double>(acc.second))), acc.second});
        if (per_line[k].second > 0)
            curve.set_line_mean(line,
                                static_cast<Euros>(std::llround(per_line[k].first / static_cast<double>(per_line[k].second))));
    }
    return curve;
}

inline ValueCurve build_value_curve(std::span<const PlayerSnapshot> snapshots,
                                    const PositionMap& positions = PositionMap{}, std::size_t min_support = 5) {
    return build_value_curve(SnapshotIndex(snapshots), positions, min_support);
}

// ---------------------------------------------------------------------------
// Budget allocation

struct AllocationItem {
    Line line = Line::GK;
    Euros budget_slice = 0;  // spend on the increment grid
    Euros cost = 0;          // curve value of the player bought
    int rating = 0;
    double elpar = 0.0;
};

struct Allocation {
    std::vector<AllocationItem> items;
    double total_elpar = 0.0;
    Euros total_cost = 0;
    Euros total_budget_slices = 0;
};

/// eLPAR of buying a player of `rating` for `line`.
using ElparLookup = std::function<double(Line line, int rating)>;

/// Highest rating on the curve whose value is at most `spend`.
inline std::optional<std::pair<int, Euros>> best_affordable(const ValueCurve& curve, Line line, Euros spend) {
    std::optional<std::pair<int, Euros>> best;
    for (const auto& [rating, cell] : curve.cells(line))
        if (cell.mean_value <= spend) best = std::pair{rating, cell.mean_value};
    return best;
}

namespace detail {

inline Euros round_up_to(Euros amount, Euros increment) {
    return ((amount + increment - 1) / increment) * increment;
}

struct SpendOption {
    Euros slice = 0;
    int rating = 0;
    Euros cost = 0;
    double elpar = 0.0;
};

// Every grid spend s maps to best_affordable(s); the distinct outcomes arise
// only at the grid-rounded prices, so those are the candidate spends.
inline std::vector<SpendOption> spend_options(const ValueCurve& curve, Line line, Euros budget, Euros increment,
                                              const ElparLookup& elpar) {
    std::vector<Euros> slices;
    for (const auto& [rating, cell] : curve.cells(line)) {
        const Euros s = round_up_to(cell.mean_value, increment);
        if (s <= budget) slices.push_back(s);
    }
    std::sort(slices.begin(), slices.end());
    slices.erase(std::unique(slices.begin(), slices.end()), slices.end());

    std::vector<SpendOption> options;
    for (Euros s : slices) {
        const auto pick = best_affordable(curve, line, s);
        if (!pick) continue;
        if (!options.empty() && options.back().rating == pick->first) continue;
        options.push_back({s, pick->first, pick->second, elpar(line, pick->first)});
    }
    return options;
}

// True when candidate a is preferred over b: more eLPAR, then lower total
// cost, then lexicographically smaller cost vector in needs order.
inline bool preferred(double elpar_a, Euros cost_a, const std::vector<Euros>& costs_a, double elpar_b, Euros cost_b,
                      const std::vector<Euros>& costs_b) {
    if (elpar_a != elpar_b) return elpar_a > elpar_b;
    if (cost_a != cost_b) return cost_a < cost_b;
    return costs_a < costs_b;
}

}  // namespace detail

/// Exhaustive search over per-need spends on a grid of `increment` euros.
/// Each spend buys the best rating it affords on the curve; the allocation
/// with the largest summed eLPAR wins.
inline Allocation optimize_allocation(Euros budget, std::span<const Line> needs, const ValueCurve& curve,
                                      const ElparLookup& elpar, Euros increment = 100'000) {
    require(!needs.empty(), ErrorKind::Precondition, "optimize_budget: no positions requested");
    require(increment > 0, ErrorKind::Precondition, "optimize_budget: increment must be positive");
    require(budget >= 0, ErrorKind::Precondition, "optimize_budget: budget must be nonnegative");
    for (Line line : needs)
        require(curve.covers(line), ErrorKind::Precondition,
                "optimize_budget: value curve has no cells for line " + std::string(to_string(line)));

    std::vector<std::vector<detail::SpendOption>> options;
    std::vector<double> best_remaining(needs.size() + 1, 0.0);
    for (Line line : needs) options.push_back(detail::spend_options(curve, line, budget, increment, elpar));
    for (std::size_t i = needs.size(); i-- > 0;) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& o : options[i]) best = std::max(best, o.elpar);
        best_remaining[i] = best_remaining[i + 1] + best;
    }

    std::vector<std::size_t> chosen(needs.size());
    std::vector<std::size_t> best_choice;
    double best_elpar = -std::numeric_limits<double>::infinity();
    Euros best_cost = 0;
    std::vector<Euros> best_costs;
    std::vector<Euros> costs(needs.size());

    std::function<void(std::size_t, Euros, double, Euros)> search = [&](std::size_t depth, Euros spent, double value,
                                                                         Euros cost) {
        if (depth == needs.size()) {
            if (best_choice.empty() || detail::preferred(value, cost, costs, best_elpar, best_cost, best_costs)) {
                best_choice = chosen;
                best_elpar = value;
                best_cost = cost;
                best_costs = costs;
            }
            return;
        }
        if (!best_choice.empty() && value + best_remaining[depth] < best_elpar) return;
        for (std::size_t k = 0; k < options[depth].size(); ++k) {
            const auto& o = options[depth][k];
            if (spent + o.slice > budget) break;  // options ascend in slice
            chosen[depth] = k;
            costs[depth] = o.cost;
            search(depth + 1, spent + o.slice, value + o.elpar, cost + o.cost);
        }
    };
    search(0, 0, 0.0, 0);

    require(!best_choice.empty(), ErrorKind::Infeasible,
            "optimize_budget: budget " + std::to_string(budget) + " cannot cover the requested positions");
    Allocation a;
    for (std::size_t i = 0; i < needs.size(); ++i) {
        const auto& o = options[i][best_choice[i]];
        a.items.push_back({needs[i], o.slice, o.cost, o.rating, o.elpar});
        a.total_elpar += o.elpar;
        a.total_cost += o.cost;
        a.total_budget_slices += o.slice;
    }
    return a;
}

struct BudgetOptions {
    Euros increment = 100'000;
    std::vector<Formation> formations{canonical_formations().begin(), canonical_formations().end()};
    Venue venue = Venue::Symmetric;
};

/// eLPAR lookup averaging over `formations` with equal playing time.
inline ElparLookup model_elpar_lookup(const SkellamGlmModel& model, const ReplacementLevels& levels,
                                      std::vector<Formation> formations, Venue venue = Venue::Symmetric) {
    return [=](Line line, int rating) {
        return elpar_formation_average(model, formations, line, static_cast<double>(rating), levels, venue);
    };
}

inline Allocation optimize_budget(Euros budget, std::span<const Line> needs, const ValueCurve& curve,
                                  const SkellamGlmModel& model, const ReplacementLevels& levels,
                                  const BudgetOptions& options = {}) {
    return optimize_allocation(budget, needs, curve, model_elpar_lookup(model, levels, options.formations, options.venue),
                               options.increment);
}

/// Baseline: split the budget in proportion to each line's mean market value
/// (shares snapped down to the grid) and buy the best affordable player with
/// each share.
inline Allocation proportional_allocation(Euros budget, std::span<const Line> needs, const ValueCurve& curve,
                                          const ElparLookup& elpar, Euros increment = 100'000) {
    require(!needs.empty(), ErrorKind::Precondition, "proportional_allocation: no positions requested");
    double weight_total = 0.0;
    for (Line line : needs) {
        const auto mean = curve.line_mean(line);
        require(mean.has_value() && *mean > 0, ErrorKind::Precondition,
                "proportional_allocation: no market values for line " + std::string(to_string(line)));
        weight_total += static_cast<double>(*mean);
    }
    Allocation a;
    for (Line line : needs) {
        const double share = static_cast<double>(budget) * static_cast<double>(*curve.line_mean(line)) / weight_total;
        const Euros slice = (static_cast<Euros>(std::floor(share)) / increment) * increment;
        const auto pick = best_affordable(curve, line, slice);
        require(pick.has_value(), ErrorKind::Infeasible,
                "proportional_allocation: share for " + std::string(to_string(line)) + " buys no player");
        const double value = elpar(line, pick->first);
        a.items.push_back({line, slice, pick->second, pick->first, value});
        a.total_elpar += value;
        a.total_cost += pick->second;
        a.total_budget_slices += slice;
    }
    return a;
}

// ---------------------------------------------------------------------------
// Budget -> points regression and fair fees

struct BudgetPointsFit {
    double slope = 0.0;  // league points per million euros
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t n_teams = 0;
};

/// Ordinary least squares of league points on transfer budget (millions).
inline BudgetPointsFit fit_budget_points(std::span<const Euros> team_budgets, std::span<const double> team_points) {
    require(team_budgets.size() == team_points.size(), ErrorKind::Precondition,
            "fit_budget_points: budgets and points differ in length");
    require(team_budgets.size() >= 3, ErrorKind::InsufficientData, "fit_budget_points: need at least 3 teams");
    const double n = static_cast<double>(team_budgets.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < team_budgets.size(); ++i) {
        mx += static_cast<double>(team_budgets[i]) / 1e6;
        my += team_points[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < team_budgets.size(); ++i) {
        const double dx = static_cast<double>(team_budgets[i]) / 1e6 - mx;
        const double dy = team_points[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    require(sxx > 0.0, ErrorKind::Degenerate, "fit_budget_points: all budgets identical");

    BudgetPointsFit fit;
    fit.n_teams = team_budgets.size();
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (syy == 0.0) {
        fit.r_squared = 1.0;
    } else {
        double ss_res = 0.0;
        for (std::size_t i = 0; i < team_budgets.size(); ++i) {
            const double e =
                team_points[i] - (fit.intercept + fit.slope * static_cast<double>(team_budgets[i]) / 1e6);
            ss_res += e * e;
        }
        fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    }
    return fit;
}

/// games x eLPAR / slope, in millions of the slope's currency.
inline double fair_transfer_fee(double elpar, int games, double slope) {
    require(slope > 0.0 && std::isfinite(slope), ErrorKind::Domain, "fair_transfer_fee: slope must be positive");
    require(games > 0, ErrorKind::Precondition, "fair_transfer_fee: games must be positive");
    return static_cast<double>(games) * elpar / slope;
}

}  // namespace elpar
