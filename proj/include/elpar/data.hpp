#pragma once

// Flat-file inputs (matches.csv, players.csv), position -> line mapping,
// point-in-time rating lookup, feature construction, replacement levels and
// the seeded train/test split.

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "elpar/error.hpp"
#include "elpar/glm.hpp"
#include "elpar/lines.hpp"

namespace elpar {

using Date = std::chrono::year_month_day;
/// Whole euros.
using Euros = std::int64_t;

inline constexpr std::size_t kLineupSize = 11;
using Lineup = std::array<std::string, kLineupSize>;

struct MatchRecord {
    std::string match_id;
    std::string league_id;
    Date date{};
    int home_goals = 0;
    int away_goals = 0;
    Lineup home_lineup;
    Lineup away_lineup;

    int goal_diff() const { return home_goals - away_goals; }
};

struct PlayerSnapshot {
    std::string player_id;
    Date date{};
    double overall_rating = 0.0;
    std::string position;
    std::optional<Euros> market_value;
    std::optional<Euros> wage;  // per month
};

/// Per-line replacement rating.
struct ReplacementLevels {
    std::array<double, 4> rating{};

    double operator[](Line line) const { return rating[index_of(line)]; }
    double& operator[](Line line) { return rating[index_of(line)]; }
};

// ---------------------------------------------------------------------------
// Dates

inline std::optional<Date> try_parse_date(std::string_view text) {
    // YYYY-MM-DD, optionally followed by a time part ("T..." or " ...").
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    if (text.size() > 10 && text[10] != 'T' && text[10] != ' ') return std::nullopt;
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    const auto parse = [](std::string_view s, auto& out) {
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        return ec == std::errc{} && p == s.data() + s.size();
    };
    if (!parse(text.substr(0, 4), y) || !parse(text.substr(5, 2), m) || !parse(text.substr(8, 2), d))
        return std::nullopt;
    const Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!date.ok()) return std::nullopt;
    return date;
}

inline Date parse_date(std::string_view text) {
    auto date = try_parse_date(text);
    if (!date) fail(ErrorKind::Parse, "invalid ISO-8601 date '" + std::string(text) + "'");
    return *date;
}

inline std::string format_date(const Date& date) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

// ---------------------------------------------------------------------------
// Position vocabulary

/// Position label -> line. The default vocabulary covers the usual rating
/// site labels; entries can be replaced or added.
class PositionMap {
public:
    PositionMap() {
        table_["GK"] = Line::GK;
        for (const char* p : {"CB", "LB", "RB", "LWB", "RWB", "SW"}) table_[p] = Line::DEF;
        for (const char* p : {"CDM", "CM", "CAM", "LM", "RM"}) table_[p] = Line::MID;
        for (const char* p : {"LW", "RW", "CF", "ST", "SS"}) table_[p] = Line::ATT;
    }

    void set(std::string label, Line line) { table_[std::move(label)] = line; }

    Line line_of(std::string_view label) const {
        auto it = table_.find(std::string(label));
        if (it == table_.end()) {
            std::string known;
            for (const auto& [k, v] : table_) known += (known.empty() ? "" : ",") + k;
            fail(ErrorKind::Parse, "unknown position label '" + std::string(label) + "' (known: " + known + ")");
        }
        return it->second;
    }

    const std::map<std::string, Line>& entries() const { return table_; }

    /// Reads `label,line` rows (header optional) and applies them on top of the defaults.
    static PositionMap with_overrides(std::istream& in) {
        PositionMap map;
        std::string row;
        int line_no = 0;
        while (std::getline(in, row)) {
            ++line_no;
            if (!row.empty() && row.back() == '\r') row.pop_back();
            if (row.empty() || (line_no == 1 && row.rfind("label", 0) == 0)) continue;
            const auto comma = row.find(',');
            if (comma == std::string::npos)
                fail(ErrorKind::Parse, "position map line " + std::to_string(line_no) + ": expected label,line");
            map.set(row.substr(0, comma), parse_line(std::string_view(row).substr(comma + 1)));
        }
        return map;
    }

private:
    std::map<std::string, Line> table_;
};

inline Line position_to_line(std::string_view label, const PositionMap& map = PositionMap{}) {
    return map.line_of(label);
}

// ---------------------------------------------------------------------------
// CSV

namespace csv {

inline std::vector<std::string_view> split(std::string_view row) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = row.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(row.substr(start));
            break;
        }
        cells.push_back(row.substr(start, comma - start));
        start = comma + 1;
    }
    return cells;
}

[[noreturn]] inline void row_error(const std::string& source, int line, std::size_t column, const std::string& what) {
    fail(ErrorKind::Parse,
         source + ":" + std::to_string(line) + ": column " + std::to_string(column + 1) + ": " + what);
}

template <typename T>
T number(std::string_view cell, const std::string& source, int line, std::size_t column, const char* name) {
    T value{};
    auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || p != cell.data() + cell.size() || cell.empty())
        row_error(source, line, column, std::string("invalid ") + name + " '" + std::string(cell) + "'");
    return value;
}

inline std::string format_rating(double rating) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, rating);
    return std::string(buf, p);
}

}  // namespace csv

inline const std::string& matches_header() {
    static const std::string header = [] {
        std::string h = "match_id,league_id,date,home_goals,away_goals";
        for (int i = 1; i <= 11; ++i) h += ",h" + std::to_string(i);
        for (int i = 1; i <= 11; ++i) h += ",a" + std::to_string(i);
        return h;
    }();
    return header;
}

inline const std::string& players_header() {
    static const std::string header = "player_id,date,overall_rating,position,market_value_eur,wage_eur_month";
    return header;
}

inline std::vector<MatchRecord> parse_matches(std::istream& in, const std::string& source = "matches.csv") {
    std::vector<MatchRecord> out;
    std::string row;
    int line_no = 0;
    if (!std::getline(in, row)) return out;
    ++line_no;
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (row != matches_header()) csv::row_error(source, line_no, 0, "unexpected header");

    std::set<std::string> seen;
    constexpr std::size_t kColumns = 5 + 2 * kLineupSize;
    while (std::getline(in, row)) {
        ++line_no;
        if (!row.empty() && row.back() == '\r') row.pop_back();
        if (row.empty()) continue;
        const auto cells = csv::split(row);
        if (cells.size() != kColumns)
            csv::row_error(source, line_no, std::min(cells.size(), kColumns),
                           "expected " + std::to_string(kColumns) + " columns, got " + std::to_string(cells.size()));

        MatchRecord m;
        m.match_id = std::string(cells[0]);
        if (m.match_id.empty()) csv::row_error(source, line_no, 0, "empty match_id");
        m.league_id = std::string(cells[1]);
        auto date = try_parse_date(cells[2]);
        if (!date) csv::row_error(source, line_no, 2, "invalid date '" + std::string(cells[2]) + "'");
        m.date = *date;
        m.home_goals = csv::number<int>(cells[3], source, line_no, 3, "home_goals");
        m.away_goals = csv::number<int>(cells[4], source, line_no, 4, "away_goals");
        if (m.home_goals < 0 || m.home_goals > 30) csv::row_error(source, line_no, 3, "home_goals outside [0, 30]");
        if (m.away_goals < 0 || m.away_goals > 30) csv::row_error(source, line_no, 4, "away_goals outside [0, 30]");

        for (std::size_t side = 0; side < 2; ++side) {
            Lineup& lineup = side == 0 ? m.home_lineup : m.away_lineup;
            std::set<std::string_view> distinct;
            std::size_t present = 0;
            for (std::size_t i = 0; i < kLineupSize; ++i) {
                const std::size_t col = 5 + side * kLineupSize + i;
                lineup[i] = std::string(cells[col]);
                if (!cells[col].empty()) {
                    ++present;
                    if (!distinct.insert(cells[col]).second)
                        csv::row_error(source, line_no, col, "player '" + lineup[i] + "' listed twice in lineup");
                }
            }
            if (present != kLineupSize)
                csv::row_error(source, line_no, 5 + side * kLineupSize,
                               std::string(side == 0 ? "home" : "away") + " lineup has " + std::to_string(present) +
                                   " players, expected 11");
        }
        if (!seen.insert(m.match_id).second)
            fail(ErrorKind::Integrity, source + ":" + std::to_string(line_no) + ": duplicate match_id '" +
                                           m.match_id + "'");
        out.push_back(std::move(m));
    }
    return out;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::MissingData, "cannot open '" + path + "'");
    return in;
}

inline std::vector<MatchRecord> load_matches(const std::string& path) {
    auto in = open_input(path);
    return parse_matches(in, path);
}

inline void write_matches(std::ostream& out, const std::vector<MatchRecord>& matches) {
    out << matches_header() << '\n';
    for (const auto& m : matches) {
        out << m.match_id << ',' << m.league_id << ',' << format_date(m.date) << ',' << m.home_goals << ','
            << m.away_goals;
        for (const auto& p : m.home_lineup) out << ',' << p;
        for (const auto& p : m.away_lineup) out << ',' << p;
        out << '\n';
    }
}

inline std::vector<PlayerSnapshot> parse_players(std::istream& in, const std::string& source = "players.csv") {
    std::vector<PlayerSnapshot> out;
    std::string row;
    int line_no = 0;
    if (!std::getline(in, row)) return out;
    ++line_no;
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (row != players_header()) csv::row_error(source, line_no, 0, "unexpected header");

    while (std::getline(in, row)) {
        ++line_no;
        if (!row.empty() && row.back() == '\r') row.pop_back();
        if (row.empty()) continue;
        const auto cells = csv::split(row);
        if (cells.size() != 6)
            csv::row_error(source, line_no, std::min<std::size_t>(cells.size(), 6),
                           "expected 6 columns, got " + std::to_string(cells.size()));
        PlayerSnapshot s;
        s.player_id = std::string(cells[0]);
        if (s.player_id.empty()) csv::row_error(source, line_no, 0, "empty player_id");
        auto date = try_parse_date(cells[1]);
        if (!date) csv::row_error(source, line_no, 1, "invalid date '" + std::string(cells[1]) + "'");
        s.date = *date;
        s.overall_rating = csv::number<double>(cells[2], source, line_no, 2, "overall_rating");
        if (!(s.overall_rating >= 0.0 && s.overall_rating <= 100.0))
            csv::row_error(source, line_no, 2, "overall_rating outside [0, 100]");
        s.position = std::string(cells[3]);
        if (s.position.empty()) csv::row_error(source, line_no, 3, "empty position");
        for (std::size_t col : {std::size_t{4}, std::size_t{5}}) {
            if (cells[col].empty()) continue;
            const auto value = csv::number<Euros>(cells[col], source, line_no, col, col == 4 ? "market_value_eur"
                                                                                              : "wage_eur_month");
            if (value < 0) csv::row_error(source, line_no, col, "money must be nonnegative");
            (col == 4 ? s.market_value : s.wage) = value;
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<PlayerSnapshot> load_players(const std::string& path) {
    auto in = open_input(path);
    return parse_players(in, path);
}

inline void write_players(std::ostream& out, const std::vector<PlayerSnapshot>& players) {
    out << players_header() << '\n';
    for (const auto& s : players) {
        out << s.player_id << ',' << format_date(s.date) << ',' << csv::format_rating(s.overall_rating) << ','
            << s.position << ',';
        if (s.market_value) out << *s.market_value;
        out << ',';
        if (s.wage) out << *s.wage;
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Point-in-time lookup

/// Snapshot at `date`: the latest one dated on or before it, otherwise the
/// earliest. `history` must be sorted by date and nonempty.
inline const PlayerSnapshot& snapshot_at(std::span<const PlayerSnapshot> history, const Date& date) {
    auto it = std::upper_bound(history.begin(), history.end(), date,
                               [](const Date& d, const PlayerSnapshot& s) { return d < s.date; });
    return it == history.begin() ? history.front() : *std::prev(it);
}

/// Snapshots grouped by player, each group sorted by date.
class SnapshotIndex {
public:
    SnapshotIndex() = default;

    explicit SnapshotIndex(std::span<const PlayerSnapshot> snapshots) {
        for (const auto& s : snapshots) by_player_[s.player_id].push_back(s);
        for (auto& [id, history] : by_player_)
            std::stable_sort(history.begin(), history.end(),
                             [](const PlayerSnapshot& a, const PlayerSnapshot& b) { return a.date < b.date; });
    }

    bool contains(const std::string& player_id) const { return by_player_.count(player_id) != 0; }

    const PlayerSnapshot& at(const std::string& player_id, const Date& date) const {
        return snapshot_at(history(player_id), date);
    }

    const PlayerSnapshot& latest(const std::string& player_id) const { return history(player_id).back(); }

    std::span<const PlayerSnapshot> history(const std::string& player_id) const {
        auto it = by_player_.find(player_id);
        if (it == by_player_.end()) fail(ErrorKind::MissingData, "no snapshots for player '" + player_id + "'");
        return it->second;
    }

    /// Player ids in sorted order.
    std::vector<std::string> players() const {
        std::vector<std::string> ids;
        ids.reserve(by_player_.size());
        for (const auto& [id, h] : by_player_) ids.push_back(id);
        std::sort(ids.begin(), ids.end());
        return ids;
    }

    std::size_t size() const { return by_player_.size(); }

private:
    std::unordered_map<std::string, std::vector<PlayerSnapshot>> by_player_;
};

/// Rating of `player_id` at `date` from an unindexed snapshot list.
inline double rating_at(const std::string& player_id, const Date& date, std::span<const PlayerSnapshot> snapshots) {
    const PlayerSnapshot* before = nullptr;
    const PlayerSnapshot* earliest = nullptr;
    for (const auto& s : snapshots) {
        if (s.player_id != player_id) continue;
        if (!earliest || s.date < earliest->date) earliest = &s;
        if (s.date <= date && (!before || s.date >= before->date)) before = &s;
    }
    if (!earliest) fail(ErrorKind::MissingData, "no snapshots for player '" + player_id + "'");
    return before ? before->overall_rating : earliest->overall_rating;
}

// ---------------------------------------------------------------------------
// Features

/// Home-minus-away line averages for one match, using each player's rating
/// and position at the match date.
inline FeatureVector build_features(const MatchRecord& match, const SnapshotIndex& index,
                                    const PositionMap& positions = PositionMap{}) {
    std::string missing;
    for (const Lineup* lineup : {&match.home_lineup, &match.away_lineup})
        for (const auto& id : *lineup)
            if (!index.contains(id)) missing += (missing.empty() ? "" : ", ") + id;
    if (!missing.empty())
        fail(ErrorKind::MissingData, "match " + match.match_id + ": no rating for players " + missing);

    std::array<std::array<double, 4>, 2> sums{};
    std::array<std::array<int, 4>, 2> counts{};
    for (std::size_t side = 0; side < 2; ++side) {
        const Lineup& lineup = side == 0 ? match.home_lineup : match.away_lineup;
        for (const auto& id : lineup) {
            const PlayerSnapshot& s = index.at(id, match.date);
            const Line line = positions.line_of(s.position);
            sums[side][index_of(line)] += s.overall_rating;
            ++counts[side][index_of(line)];
        }
        for (Line line : kAllLines)
            if (counts[side][index_of(line)] == 0)
                fail(ErrorKind::Integrity, "match " + match.match_id + ": " + (side == 0 ? "home" : "away") +
                                               " lineup has no player mapped to " + std::string(to_string(line)));
    }

    FeatureVector x;
    for (Line line : kAllLines) {
        const std::size_t k = index_of(line);
        x[line] = sums[0][k] / counts[0][k] - sums[1][k] / counts[1][k];
    }
    return x;
}

inline std::vector<Observation> build_observations(std::span<const MatchRecord> matches, const SnapshotIndex& index,
                                                   const PositionMap& positions = PositionMap{}) {
    std::vector<Observation> out;
    out.reserve(matches.size());
    for (const auto& m : matches) out.push_back({build_features(m, index, positions), m.goal_diff()});
    return out;
}

// ---------------------------------------------------------------------------
// Replacement level

inline constexpr double kReplacementFraction = 0.8;

/// 0.8 x the mean latest rating of the players in each line. Each player is
/// counted once, placed by the position of their latest snapshot.
inline ReplacementLevels replacement_levels(const SnapshotIndex& index, const PositionMap& positions = PositionMap{},
                                            std::size_t min_players_per_line = 30) {
    require(index.size() > 0, ErrorKind::InsufficientData, "replacement_levels: no snapshots");
    std::array<double, 4> sums{};
    std::array<std::size_t, 4> counts{};
    for (const auto& id : index.players()) {
        const PlayerSnapshot& s = index.latest(id);
        const std::size_t k = index_of(positions.line_of(s.position));
        sums[k] += s.overall_rating;
        ++counts[k];
    }
    ReplacementLevels levels;
    for (Line line : kAllLines) {
        const std::size_t k = index_of(line);
        require(counts[k] >= min_players_per_line, ErrorKind::InsufficientData,
                "replacement_levels: line " + std::string(to_string(line)) + " has " + std::to_string(counts[k]) +
                    " players, need " + std::to_string(min_players_per_line));
        levels.rating[k] = kReplacementFraction * sums[k] / static_cast<double>(counts[k]);
    }
    return levels;
}

inline ReplacementLevels replacement_levels(std::span<const PlayerSnapshot> snapshots,
                                            const PositionMap& positions = PositionMap{},
                                            std::size_t min_players_per_line = 30) {
    return replacement_levels(SnapshotIndex(snapshots), positions, min_players_per_line);
}

// ---------------------------------------------------------------------------
// Split

template <typename T>
struct Split {
    std::vector<T> train;
    std::vector<T> test;
};

/// Seeded shuffle, then the first ceil(fraction * n) items train.
template <typename T>
Split<T> train_test_split(std::span<const T> items, double fraction, std::uint64_t seed) {
    require(fraction > 0.0 && fraction < 1.0, ErrorKind::Precondition, "train_test_split: fraction must be in (0, 1)");
    const std::size_t n = items.size();
    const auto n_train = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    require(n_train > 0 && n_train < n, ErrorKind::Precondition,
            "train_test_split: split of " + std::to_string(n) + " items leaves an empty side");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    Split<T> split;
    split.train.reserve(n_train);
    split.test.reserve(n - n_train);
    for (std::size_t i = 0; i < n; ++i) (i < n_train ? split.train : split.test).push_back(items[order[i]]);
    return split;
}

template <typename T>
Split<T> train_test_split(const std::vector<T>& items, double fraction, std::uint64_t seed) {
    return train_test_split(std::span<const T>(items), fraction, seed);
}

}  // namespace elpar
