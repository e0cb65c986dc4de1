#pragma once

#include <stdexcept>
#include <string>

namespace elpar {

enum class ErrorKind {
    Domain,            // argument outside the mathematical domain
    Precondition,      // caller violated a documented precondition
    OraclePrecision,   // brute-force oracle truncated too early
    Parse,             // malformed input file or token
    Integrity,         // duplicate ids, inconsistent records
    MissingData,       // player/rating/snapshot not found
    InsufficientData,  // too few observations for a statistic
    IllConditioned,    // singular Hessian or collinear design
    Degenerate,        // degenerate data or regression
    Infeasible,        // no allocation satisfies the budget
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Domain: return "domain";
        case ErrorKind::Precondition: return "precondition";
        case ErrorKind::OraclePrecision: return "oracle-precision";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Integrity: return "integrity";
        case ErrorKind::MissingData: return "missing-data";
        case ErrorKind::InsufficientData: return "insufficient-data";
        case ErrorKind::IllConditioned: return "ill-conditioned";
        case ErrorKind::Degenerate: return "degenerate";
        case ErrorKind::Infeasible: return "infeasible";
    }
    return "unknown";
}

/// Single exception type for the library; `kind()` tells callers which
/// contract was broken so the CLI and the HTTP layer can map it to exit
/// codes and status codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

inline void require(bool condition, ErrorKind kind, const std::string& what) {
    if (!condition) fail(kind, what);
}

}  // namespace elpar
