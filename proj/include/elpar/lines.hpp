#pragma once

#include <array>
#include <charconv>
#include <cstddef>
#include <string>
#include <string_view>

#include "elpar/error.hpp"

namespace elpar {

/// The four positional groups of a lineup.
enum class Line { GK = 0, DEF = 1, MID = 2, ATT = 3 };

inline constexpr std::array<Line, 4> kAllLines{Line::GK, Line::DEF, Line::MID, Line::ATT};

inline constexpr std::size_t index_of(Line line) { return static_cast<std::size_t>(line); }

inline std::string_view to_string(Line line) {
    switch (line) {
        case Line::GK: return "GK";
        case Line::DEF: return "DEF";
        case Line::MID: return "MID";
        case Line::ATT: return "ATT";
    }
    return "?";
}

inline Line parse_line(std::string_view token) {
    for (Line line : kAllLines)
        if (token == to_string(line)) return line;
    fail(ErrorKind::Parse, "unknown line '" + std::string(token) + "' (expected GK, DEF, MID or ATT)");
}

/// Outfield line counts; the goalkeeper is implicit.
struct Formation {
    int defenders = 4;
    int midfielders = 4;
    int attackers = 2;

    friend bool operator==(const Formation&, const Formation&) = default;
};

inline bool is_valid(const Formation& f) {
    return f.defenders >= 1 && f.midfielders >= 1 && f.attackers >= 1 &&
           f.defenders + f.midfielders + f.attackers == 10;
}

inline Formation make_formation(int defenders, int midfielders, int attackers) {
    Formation f{defenders, midfielders, attackers};
    require(is_valid(f), ErrorKind::Precondition,
            "formation " + std::to_string(defenders) + "-" + std::to_string(midfielders) + "-" +
                std::to_string(attackers) + " must have three positive lines summing to 10");
    return f;
}

inline std::string to_string(const Formation& f) {
    return std::to_string(f.defenders) + "-" + std::to_string(f.midfielders) + "-" + std::to_string(f.attackers);
}

/// Parses "D-M-A", e.g. "4-4-2".
inline Formation parse_formation(std::string_view token) {
    std::array<int, 3> counts{};
    std::size_t part = 0;
    const char* p = token.data();
    const char* end = token.data() + token.size();
    while (part < 3) {
        auto [next, ec] = std::from_chars(p, end, counts[part]);
        if (ec != std::errc{} || next == p) break;
        p = next;
        ++part;
        if (part < 3) {
            if (p == end || *p != '-') break;
            ++p;
        }
    }
    if (part != 3 || p != end)
        fail(ErrorKind::Parse, "malformed formation '" + std::string(token) + "' (expected D-M-A)");
    Formation f{counts[0], counts[1], counts[2]};
    if (!is_valid(f))
        fail(ErrorKind::Parse, "formation '" + std::string(token) + "' must have three positive lines summing to 10");
    return f;
}

inline const std::array<Formation, 4>& canonical_formations() {
    static const std::array<Formation, 4> kCanonical{Formation{4, 4, 2}, Formation{4, 3, 3}, Formation{3, 5, 2},
                                                     Formation{4, 5, 1}};
    return kCanonical;
}

inline int line_size(const Formation& formation, Line line) {
    switch (line) {
        case Line::GK: return 1;
        case Line::DEF: return formation.defenders;
        case Line::MID: return formation.midfielders;
        case Line::ATT: return formation.attackers;
    }
    return 1;
}

}  // namespace elpar
