#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "elpar/data.hpp"
#include "elpar/simulate.hpp"

using namespace elpar;
using namespace std::chrono;

namespace {

Date ymd(int y, unsigned m, unsigned d) { return Date{year{y}, month{m}, day{d}}; }

/// Lineup ids "<prefix>1".."<prefix>11": 1 GK, then `def`, `mid`, `att`.
struct Side {
    std::string prefix;
    int def = 4;
    int mid = 4;
    int att = 2;
    std::vector<double> ratings;  // 11 ratings in lineup order
};

void add_side(const Side& side, MatchRecord& match, bool home, std::vector<PlayerSnapshot>& snaps) {
    Lineup& lineup = home ? match.home_lineup : match.away_lineup;
    for (int i = 0; i < 11; ++i) {
        const std::string id = side.prefix + std::to_string(i + 1);
        std::string pos = "GK";
        if (i >= 1 && i < 1 + side.def) pos = "CB";
        else if (i >= 1 + side.def && i < 1 + side.def + side.mid) pos = "CM";
        else if (i >= 1 + side.def + side.mid) pos = "ST";
        lineup[static_cast<std::size_t>(i)] = id;
        snaps.push_back({id, ymd(2017, 1, 1), side.ratings[static_cast<std::size_t>(i)], pos, 1000000, 4000});
    }
}

std::string csv_row(const MatchRecord& m) {
    std::ostringstream out;
    write_matches(out, {m});
    const std::string text = out.str();
    return text.substr(text.find('\n') + 1);
}

MatchRecord sample_match(const std::string& id) {
    MatchRecord m;
    m.match_id = id;
    m.league_id = "L1";
    m.date = ymd(2017, 9, 2);
    m.home_goals = 2;
    m.away_goals = 1;
    for (int i = 0; i < 11; ++i) {
        m.home_lineup[static_cast<std::size_t>(i)] = "h" + std::to_string(i);
        m.away_lineup[static_cast<std::size_t>(i)] = "a" + std::to_string(i);
    }
    return m;
}

template <typename F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected an elpar::Error";
    return ErrorKind::Domain;
}

}  // namespace

TEST(Lines, FormationParsing) {
    EXPECT_EQ(parse_formation("4-4-2"), (Formation{4, 4, 2}));
    EXPECT_EQ(parse_formation("3-5-2"), (Formation{3, 5, 2}));
    EXPECT_EQ(to_string(Formation{4, 3, 3}), "4-3-3");
    EXPECT_EQ(kind_of([] { parse_formation("4-4-3"); }), ErrorKind::Parse);
    EXPECT_EQ(kind_of([] { parse_formation("4-4"); }), ErrorKind::Parse);
    EXPECT_EQ(kind_of([] { parse_formation("4-4-2x"); }), ErrorKind::Parse);
    EXPECT_EQ(kind_of([] { parse_formation("0-5-5"); }), ErrorKind::Parse);
    EXPECT_EQ(kind_of([] { make_formation(5, 5, 1); }), ErrorKind::Precondition);
}

TEST(Lines, CanonicalFormationsAndSizes) {
    for (const auto& f : canonical_formations()) {
        EXPECT_TRUE(is_valid(f));
        int total = 0;
        for (Line line : kAllLines) total += line_size(f, line);
        EXPECT_EQ(total, 11);
        EXPECT_EQ(line_size(f, Line::GK), 1);
    }
}

TEST(Lines, LineTokens) {
    for (Line line : kAllLines) EXPECT_EQ(parse_line(to_string(line)), line);
    EXPECT_THROW(parse_line("FWD"), Error);
}

TEST(Positions, DefaultVocabulary) {
    EXPECT_EQ(position_to_line("GK"), Line::GK);
    EXPECT_EQ(position_to_line("CB"), Line::DEF);
    EXPECT_EQ(position_to_line("CAM"), Line::MID);
    for (const char* p : {"CB", "LB", "RB", "LWB", "RWB", "SW"}) EXPECT_EQ(position_to_line(p), Line::DEF) << p;
    for (const char* p : {"CDM", "CM", "CAM", "LM", "RM"}) EXPECT_EQ(position_to_line(p), Line::MID) << p;
    for (const char* p : {"LW", "RW", "CF", "ST", "SS"}) EXPECT_EQ(position_to_line(p), Line::ATT) << p;
}

TEST(Positions, SurjectiveOntoLines) {
    const PositionMap map;
    std::set<Line> hit;
    for (const auto& [label, line] : map.entries()) hit.insert(line);
    EXPECT_EQ(hit.size(), 4u);
}

TEST(Positions, UnknownLabelListsIt) {
    try {
        position_to_line("XYZ");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Parse);
        EXPECT_NE(std::string(e.what()).find("XYZ"), std::string::npos);
    }
}

TEST(Positions, OverridesApply) {
    std::istringstream in("label,line\nWB,DEF\nCAM,ATT\n");
    const auto map = PositionMap::with_overrides(in);
    EXPECT_EQ(map.line_of("WB"), Line::DEF);
    EXPECT_EQ(map.line_of("CAM"), Line::ATT);
    EXPECT_EQ(map.line_of("CB"), Line::DEF);
    std::istringstream bad("WB;DEF\n");
    EXPECT_THROW(PositionMap::with_overrides(bad), Error);
}

TEST(Dates, ParseAndFormat) {
    EXPECT_EQ(parse_date("2016-02-29"), ymd(2016, 2, 29));
    EXPECT_EQ(parse_date("2015-08-01 00:00:00"), ymd(2015, 8, 1));
    EXPECT_EQ(parse_date("2015-08-01T12:00"), ymd(2015, 8, 1));
    EXPECT_EQ(format_date(ymd(2009, 3, 7)), "2009-03-07");
    EXPECT_FALSE(try_parse_date("2015-02-30"));
    EXPECT_FALSE(try_parse_date("15-02-03"));
    EXPECT_FALSE(try_parse_date("2015/02/03"));
    EXPECT_FALSE(try_parse_date("2015-02-03X"));
}

TEST(LoadMatches, ThreeRows) {
    std::string text = matches_header() + "\n";
    for (const char* id : {"m1", "m2", "m3"}) text += csv_row(sample_match(id));
    std::istringstream in(text);
    const auto matches = parse_matches(in);
    ASSERT_EQ(matches.size(), 3u);
    EXPECT_EQ(matches[1].match_id, "m2");
    EXPECT_EQ(matches[0].goal_diff(), 1);
    EXPECT_EQ(matches[2].away_lineup[10], "a10");
}

TEST(LoadMatches, HeaderOnlyIsEmpty) {
    std::istringstream in(matches_header() + "\n");
    EXPECT_TRUE(parse_matches(in).empty());
}

TEST(LoadMatches, ShortLineupNamesRow) {
    auto m = sample_match("m1");
    m.home_lineup[10] = "";
    std::istringstream in(matches_header() + "\n" + csv_row(sample_match("m0")) + csv_row(m));
    try {
        parse_matches(in, "f.csv");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Parse);
        const std::string msg = e.what();
        EXPECT_NE(msg.find("f.csv:3:"), std::string::npos) << msg;
        EXPECT_NE(msg.find("column"), std::string::npos) << msg;
        EXPECT_NE(msg.find("10 players"), std::string::npos) << msg;
    }
}

TEST(LoadMatches, RowWithTooFewColumns) {
    std::string row = csv_row(sample_match("m1"));
    row = row.substr(0, row.rfind(',')) + "\n";
    std::istringstream in(matches_header() + "\n" + row);
    EXPECT_EQ(kind_of([&] { parse_matches(in); }), ErrorKind::Parse);
}

TEST(LoadMatches, DuplicatePlayerInLineup) {
    auto m = sample_match("m1");
    m.away_lineup[3] = m.away_lineup[4];
    std::istringstream in(matches_header() + "\n" + csv_row(m));
    EXPECT_EQ(kind_of([&] { parse_matches(in); }), ErrorKind::Parse);
}

TEST(LoadMatches, GoalsOutOfRange) {
    auto m = sample_match("m1");
    m.home_goals = 31;
    std::istringstream in(matches_header() + "\n" + csv_row(m));
    EXPECT_EQ(kind_of([&] { parse_matches(in); }), ErrorKind::Parse);
    std::string bad = csv_row(sample_match("m2"));
    bad.replace(bad.find(",2,1,"), 5, ",x,1,");
    std::istringstream in2(matches_header() + "\n" + bad);
    EXPECT_EQ(kind_of([&] { parse_matches(in2); }), ErrorKind::Parse);
}

TEST(LoadMatches, DuplicateMatchIdIsIntegrityError) {
    std::istringstream in(matches_header() + "\n" + csv_row(sample_match("m1")) + csv_row(sample_match("m1")));
    EXPECT_EQ(kind_of([&] { parse_matches(in); }), ErrorKind::Integrity);
}

TEST(LoadMatches, WrongHeader) {
    std::istringstream in("id,league\n");
    EXPECT_EQ(kind_of([&] { parse_matches(in); }), ErrorKind::Parse);
}

TEST(LoadMatches, MissingFile) {
    EXPECT_EQ(kind_of([] { load_matches("/nonexistent/matches.csv"); }), ErrorKind::MissingData);
}

TEST(LoadMatches, RoundTripIsIdempotent) {
    const auto league = simulate_league({.matches = 30, .players_per_line = 20, .seed = 9});
    std::ostringstream first;
    write_matches(first, league.matches);
    std::istringstream in(first.str());
    const auto parsed = parse_matches(in);
    std::ostringstream second;
    write_matches(second, parsed);
    EXPECT_EQ(first.str(), second.str());
}

TEST(LoadPlayers, ParsesOptionalMoney) {
    std::istringstream in(players_header() + "\np1,2017-01-01,71.5,CB,2500000,\np2,2017-02-01,60,ST,,3000\n");
    const auto players = parse_players(in);
    ASSERT_EQ(players.size(), 2u);
    EXPECT_EQ(players[0].overall_rating, 71.5);
    EXPECT_EQ(players[0].market_value, 2500000);
    EXPECT_FALSE(players[0].wage);
    EXPECT_FALSE(players[1].market_value);
    EXPECT_EQ(players[1].wage, 3000);
}

TEST(LoadPlayers, RejectsBadRows) {
    for (const char* row : {"p1,2017-01-01,101,CB,,", "p1,2017-01-01,70,CB,-5,", "p1,2017-13-01,70,CB,,",
                            "p1,2017-01-01,70,,,", "p1,2017-01-01,70,CB,"}) {
        std::istringstream in(players_header() + "\n" + row + "\n");
        EXPECT_EQ(kind_of([&] { parse_players(in); }), ErrorKind::Parse) << row;
    }
}

TEST(LoadPlayers, RoundTripIsIdempotent) {
    const auto league = simulate_league({.matches = 5, .players_per_line = 12, .seed = 3});
    std::ostringstream first;
    write_players(first, league.players);
    std::istringstream in(first.str());
    std::ostringstream second;
    write_players(second, parse_players(in));
    EXPECT_EQ(first.str(), second.str());
}

TEST(RatingAt, LatestBeforeWithEarliestFallback) {
    const std::vector<PlayerSnapshot> snaps{{"p", ymd(2017, 7, 1), 74.0, "CM", {}, {}},
                                            {"p", ymd(2017, 1, 1), 70.0, "CM", {}, {}},
                                            {"q", ymd(2016, 5, 1), 65.0, "GK", {}, {}}};
    EXPECT_EQ(rating_at("p", ymd(2017, 3, 1), snaps), 70.0);
    EXPECT_EQ(rating_at("p", ymd(2017, 7, 1), snaps), 74.0);
    EXPECT_EQ(rating_at("p", ymd(2016, 1, 1), snaps), 70.0);
    EXPECT_EQ(rating_at("q", ymd(2030, 1, 1), snaps), 65.0);
    EXPECT_EQ(rating_at("q", ymd(2000, 1, 1), snaps), 65.0);
    EXPECT_EQ(kind_of([&] { rating_at("r", ymd(2017, 1, 1), snaps); }), ErrorKind::MissingData);

    const SnapshotIndex index(snaps);
    EXPECT_EQ(index.at("p", ymd(2017, 3, 1)).overall_rating, 70.0);
    EXPECT_EQ(index.latest("p").overall_rating, 74.0);
    EXPECT_EQ(index.players(), (std::vector<std::string>{"p", "q"}));
}

TEST(BuildFeatures, MirroredLineupsAreZero) {
    std::vector<PlayerSnapshot> snaps;
    MatchRecord m = sample_match("m");
    const std::vector<double> r{80, 75, 76, 77, 78, 70, 71, 72, 73, 85, 86};
    add_side({"h", 4, 4, 2, r}, m, true, snaps);
    add_side({"a", 4, 4, 2, r}, m, false, snaps);
    const auto x = build_features(m, SnapshotIndex(snaps));
    EXPECT_EQ(x, FeatureVector{});
}

TEST(BuildFeatures, UnequalLineSizes) {
    std::vector<PlayerSnapshot> snaps;
    MatchRecord m = sample_match("m");
    // Home 4-4-2 with defense 80; away 5-3-2 with defense 75; other line means equal.
    add_side({"h", 4, 4, 2, {70, 80, 80, 80, 80, 72, 72, 72, 72, 77, 79}}, m, true, snaps);
    add_side({"a", 5, 3, 2, {70, 75, 75, 75, 75, 75, 70, 72, 74, 78, 78}}, m, false, snaps);
    const auto x = build_features(m, SnapshotIndex(snaps));
    EXPECT_DOUBLE_EQ(x.x_d, 5.0);
    EXPECT_DOUBLE_EQ(x.x_m, 0.0);
    EXPECT_DOUBLE_EQ(x.x_a, 0.0);
    EXPECT_DOUBLE_EQ(x.x_gk, 0.0);
}

TEST(BuildFeatures, SwapNegatesExactly) {
    const auto league = simulate_league({.matches = 40, .players_per_line = 20, .seed = 4});
    const SnapshotIndex index(league.players);
    for (const auto& m : league.matches) {
        MatchRecord swapped = m;
        std::swap(swapped.home_lineup, swapped.away_lineup);
        EXPECT_EQ(build_features(swapped, index), -build_features(m, index));
    }
}

TEST(BuildFeatures, MissingPlayersListed) {
    std::vector<PlayerSnapshot> snaps;
    MatchRecord m = sample_match("m");
    const std::vector<double> r(11, 70.0);
    add_side({"h", 4, 4, 2, r}, m, true, snaps);
    add_side({"a", 4, 4, 2, r}, m, false, snaps);
    snaps.erase(std::remove_if(snaps.begin(), snaps.end(),
                               [](const PlayerSnapshot& s) { return s.player_id == "a3" || s.player_id == "h7"; }),
                snaps.end());
    try {
        build_features(m, SnapshotIndex(snaps));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::MissingData);
        const std::string msg = e.what();
        EXPECT_NE(msg.find("a3"), std::string::npos);
        EXPECT_NE(msg.find("h7"), std::string::npos);
    }
}

TEST(BuildFeatures, SideWithoutALineIsMalformed) {
    std::vector<PlayerSnapshot> snaps;
    MatchRecord m = sample_match("m");
    const std::vector<double> r(11, 70.0);
    add_side({"h", 5, 5, 0, r}, m, true, snaps);
    add_side({"a", 4, 4, 2, r}, m, false, snaps);
    EXPECT_EQ(kind_of([&] { build_features(m, SnapshotIndex(snaps)); }), ErrorKind::Integrity);
}

TEST(BuildFeatures, UsesRatingAtMatchDate) {
    std::vector<PlayerSnapshot> snaps;
    MatchRecord m = sample_match("m");
    const std::vector<double> r(11, 70.0);
    add_side({"h", 4, 4, 2, r}, m, true, snaps);
    add_side({"a", 4, 4, 2, r}, m, false, snaps);
    snaps.push_back({"h1", ymd(2017, 8, 1), 90.0, "GK", {}, {}});
    snaps.push_back({"h1", ymd(2018, 1, 1), 50.0, "GK", {}, {}});
    EXPECT_DOUBLE_EQ(build_features(m, SnapshotIndex(snaps)).x_gk, 20.0);
}

namespace {

std::vector<PlayerSnapshot> uniform_pool(double rating, std::size_t per_line) {
    std::vector<PlayerSnapshot> snaps;
    const char* pos[] = {"GK", "CB", "CM", "ST"};
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t i = 0; i < per_line; ++i)
            snaps.push_back({std::string(pos[k]) + std::to_string(i), ymd(2017, 1, 1), rating, pos[k], {}, {}});
    return snaps;
}

}  // namespace

TEST(ReplacementLevels, EightyPercentOfMean) {
    auto snaps = uniform_pool(70.0, 30);
    const auto levels = replacement_levels(snaps);
    for (Line line : kAllLines) EXPECT_NEAR(levels[line], 56.0, 1e-12);
    const auto top = replacement_levels(uniform_pool(100.0, 30));
    for (Line line : kAllLines) EXPECT_NEAR(top[line], 80.0, 1e-12);
}

TEST(ReplacementLevels, UsesLatestRatingOncePerPlayer) {
    auto snaps = uniform_pool(70.0, 30);
    // Many old snapshots for one goalkeeper must not weigh in.
    for (int i = 1; i <= 12; ++i) snaps.push_back({"GK0", ymd(2010, static_cast<unsigned>(i), 1), 20.0, "GK", {}, {}});
    EXPECT_NEAR(replacement_levels(snaps)[Line::GK], 56.0, 1e-12);
}

TEST(ReplacementLevels, ShiftEquivariance) {
    const auto league = simulate_league({.matches = 1, .players_per_line = 40, .seed = 8});
    auto shifted = league.players;
    for (auto& s : shifted) s.overall_rating += 3.0;
    const auto a = replacement_levels(league.players);
    const auto b = replacement_levels(shifted);
    for (Line line : kAllLines) EXPECT_NEAR(b[line] - a[line], 2.4, 1e-9);
}

TEST(ReplacementLevels, Errors) {
    const std::vector<PlayerSnapshot> empty;
    EXPECT_EQ(kind_of([&] { replacement_levels(empty); }), ErrorKind::InsufficientData);
    EXPECT_EQ(kind_of([] { replacement_levels(uniform_pool(70.0, 29)); }), ErrorKind::InsufficientData);
}

TEST(Split, SizesAndDeterminism) {
    std::vector<int> items(10);
    std::iota(items.begin(), items.end(), 0);
    const auto a = train_test_split(items, 0.8, 7);
    EXPECT_EQ(a.train.size(), 8u);
    EXPECT_EQ(a.test.size(), 2u);
    const auto b = train_test_split(items, 0.8, 7);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    std::vector<int> all = a.train;
    all.insert(all.end(), a.test.begin(), a.test.end());
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all, items);
}

TEST(Split, CeilingOfFraction) {
    std::vector<int> items(7, 0);
    EXPECT_EQ(train_test_split(items, 0.8, 1).train.size(), 6u);
    std::vector<int> thousand(1000, 0);
    EXPECT_EQ(train_test_split(thousand, 0.8, 1).train.size(), 800u);
}

TEST(Split, EmptySideRejected) {
    std::vector<int> items(10, 0);
    EXPECT_EQ(kind_of([&] { train_test_split(items, 0.999, 1); }), ErrorKind::Precondition);
    EXPECT_EQ(kind_of([&] { train_test_split(items, 1.0, 1); }), ErrorKind::Precondition);
    EXPECT_EQ(kind_of([&] { train_test_split(items, 0.0, 1); }), ErrorKind::Precondition);
}

TEST(SimulateLeague, ProducesLoadableLeague) {
    const auto league = simulate_league({.matches = 50, .players_per_line = 30, .seed = 2});
    EXPECT_EQ(league.matches.size(), 50u);
    EXPECT_EQ(league.players.size(), 4u * 30u * 2u);
    const SnapshotIndex index(league.players);
    EXPECT_EQ(build_observations(league.matches, index).size(), 50u);
    const auto again = simulate_league({.matches = 50, .players_per_line = 30, .seed = 2});
    std::ostringstream a, b;
    write_matches(a, league.matches);
    write_matches(b, again.matches);
    EXPECT_EQ(a.str(), b.str());
}
