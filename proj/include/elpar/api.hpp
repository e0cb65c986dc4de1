#pragma once

// Request handlers for the read-only HTTP service. Each handler maps a JSON
// request body to a status code and JSON response over an immutable model;
// the transport (tools/elpar serve) only routes to `Service::handle`.
//
//   GET  /api/model             model document
//   POST /api/predict           {"features": {"x_d", "x_m", "x_a", "x_gk"}}
//   POST /api/elpar             {"formation", "line", "rating", ["venue"]}
//   POST /api/squad/evaluate    {"formation", "players": [{"line", "rating",
//                                ["label"], ["wage"]}] x 11, ["opponent"],
//                                ["venue"], ["elpar_venue"]}
//   POST /api/budget/optimize   {"budget", "needs", ["increment"], ["formations"]}

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "elpar/elpar.hpp"
#include "elpar/error.hpp"
#include "elpar/io.hpp"
#include "elpar/market.hpp"

namespace elpar::api {

struct Response {
    int status = 200;
    Json body;
};

/// Client error tied to one request field.
class RequestError : public std::runtime_error {
public:
    RequestError(std::string field, const std::string& message)
        : std::runtime_error(message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

namespace detail {

inline const Json& field(const Json& obj, const std::string& name, const std::string& path) {
    if (!obj.is_object()) throw RequestError(path, "expected an object");
    auto it = obj.find(name);
    if (it == obj.end()) throw RequestError(path.empty() ? name : path + "." + name, "missing field");
    return *it;
}

inline std::string join(const std::string& path, const std::string& name) {
    return path.empty() ? name : path + "." + name;
}

inline double number(const Json& obj, const std::string& name, const std::string& path = "") {
    const Json& v = field(obj, name, path);
    if (!v.is_number()) throw RequestError(join(path, name), "expected a number");
    return v.get<double>();
}

inline std::optional<double> optional_number(const Json& obj, const std::string& name, const std::string& path = "") {
    if (!obj.contains(name) || obj[name].is_null()) return std::nullopt;
    return number(obj, name, path);
}

inline std::string text(const Json& obj, const std::string& name, const std::string& path = "") {
    const Json& v = field(obj, name, path);
    if (!v.is_string()) throw RequestError(join(path, name), "expected a string");
    return v.get<std::string>();
}

inline Euros money(const Json& obj, const std::string& name, const std::string& path = "") {
    const Json& v = field(obj, name, path);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw RequestError(join(path, name), "expected a nonnegative integer amount of euros");
    return v.get<Euros>();
}

template <typename F>
auto parse_with(const std::string& path, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw RequestError(path, e.what());
    }
}

inline Formation formation(const Json& obj, const std::string& name = "formation") {
    const std::string token = text(obj, name);
    return parse_with(name, [&] { return parse_formation(token); });
}

inline Line line(const Json& obj, const std::string& name, const std::string& path = "") {
    const std::string token = text(obj, name, path);
    return parse_with(join(path, name), [&] { return parse_line(token); });
}

inline double rating(const Json& obj, const std::string& name, const std::string& path = "") {
    const double r = number(obj, name, path);
    if (!(r >= 0.0 && r <= 100.0)) throw RequestError(join(path, name), "rating must be in [0, 100]");
    return r;
}

inline Venue elpar_venue(const Json& obj, const std::string& name) {
    if (!obj.contains(name)) return Venue::Symmetric;
    const std::string v = text(obj, name);
    if (v == "symmetric") return Venue::Symmetric;
    if (v == "home") return Venue::Home;
    throw RequestError(name, "expected \"symmetric\" or \"home\"");
}

inline Json error_body(const std::string& field, const std::string& message) {
    return {{"error", message}, {"field", field}};
}

}  // namespace detail

class Service {
public:
    explicit Service(std::optional<ModelFile> model, std::optional<ValueCurve> curve = std::nullopt)
        : model_(std::move(model)), curve_(std::move(curve)) {}

    Response model() const {
        if (!model_) return unavailable("model not loaded");
        return {200, model_to_json(*model_)};
    }

    Response predict(const std::string& body) const {
        return guarded(body, [&](const Json& req) {
            const Json& f = detail::field(req, "features", "");
            FeatureVector x;
            x.x_d = detail::optional_number(f, "x_d", "features").value_or(0.0);
            x.x_m = detail::optional_number(f, "x_m", "features").value_or(0.0);
            x.x_a = detail::optional_number(f, "x_a", "features").value_or(0.0);
            x.x_gk = detail::optional_number(f, "x_gk", "features").value_or(0.0);
            const SkellamParams p = predict_lambdas(model_->model, x);
            Json out = to_json(outcome_probs(p));
            out["lambda1"] = p.lambda1;
            out["lambda2"] = p.lambda2;
            return out;
        });
    }

    Response elpar(const std::string& body) const {
        return guarded(body, [&](const Json& req) {
            const Formation f = detail::formation(req);
            const Line l = detail::line(req, "line");
            const double r = detail::rating(req, "rating");
            const Venue venue = detail::elpar_venue(req, "venue");
            return to_json(elpar_per_game(model_->model, f, l, r, model_->levels, venue));
        });
    }

    Response squad_evaluate(const std::string& body) const {
        return guarded(body, [&](const Json& req) { return evaluate_squad(req); });
    }

    Response budget_optimize(const std::string& body) const {
        if (model_ && !curve_) return unavailable("no market value curve loaded (start the service with --players)");
        return guarded(body, [&](const Json& req) {
            const Euros budget = detail::money(req, "budget");
            const Json& needs_json = detail::field(req, "needs", "");
            if (!needs_json.is_array() || needs_json.empty())
                throw RequestError("needs", "expected a nonempty array of lines");
            std::vector<Line> needs;
            for (std::size_t i = 0; i < needs_json.size(); ++i) {
                if (!needs_json[i].is_string()) throw RequestError("needs", "expected line names");
                const std::string token = needs_json[i].get<std::string>();
                needs.push_back(detail::parse_with("needs", [&] { return parse_line(token); }));
            }
            BudgetOptions options;
            if (req.contains("increment")) options.increment = detail::money(req, "increment");
            if (options.increment <= 0) throw RequestError("increment", "must be positive");
            if (req.contains("formations")) {
                const Json& fs = req["formations"];
                if (!fs.is_array() || fs.empty()) throw RequestError("formations", "expected a nonempty array");
                options.formations.clear();
                for (const auto& token : fs) {
                    if (!token.is_string()) throw RequestError("formations", "expected formation strings");
                    const std::string t = token.get<std::string>();
                    options.formations.push_back(detail::parse_with("formations", [&] { return parse_formation(t); }));
                }
            }
            const auto lookup = model_elpar_lookup(model_->model, model_->levels, options.formations, options.venue);
            return allocation_report(budget, needs, *curve_, lookup, options.increment);
        });
    }

    /// Routes a request; unknown routes give 404.
    Response handle(std::string_view method, std::string_view path, const std::string& body) const {
        if (method == "GET" && path == "/api/model") return model();
        if (method == "POST") {
            if (path == "/api/predict") return predict(body);
            if (path == "/api/elpar") return elpar(body);
            if (path == "/api/squad/evaluate") return squad_evaluate(body);
            if (path == "/api/budget/optimize") return budget_optimize(body);
        }
        return {404, detail::error_body("", "no route for " + std::string(method) + " " + std::string(path))};
    }

    bool has_model() const { return model_.has_value(); }

private:
    static Response unavailable(const std::string& what) { return {503, detail::error_body("", what)}; }

    template <typename F>
    Response guarded(const std::string& body, F&& handler) const {
        if (!model_) return unavailable("model not loaded");
        Json req;
        try {
            req = Json::parse(body);
        } catch (const nlohmann::json::exception&) {
            return {400, detail::error_body("", "request body is not valid JSON")};
        }
        try {
            return {200, handler(req)};
        } catch (const RequestError& e) {
            return {400, detail::error_body(e.field(), e.what())};
        } catch (const Error& e) {
            const int status = e.kind() == ErrorKind::Infeasible ? 422 : 400;
            return {status, detail::error_body("", e.what())};
        }
    }

    Json evaluate_squad(const Json& req) const {
        const Formation f = detail::formation(req);
        const Json& players = detail::field(req, "players", "");
        if (!players.is_array() || players.size() != kLineupSize)
            throw RequestError("players", "expected an array of 11 players");

        std::array<double, 4> sums{};
        std::array<int, 4> counts{};
        std::vector<ValuationRecord> records;
        bool all_wages = true;
        const Venue elpar_venue = detail::elpar_venue(req, "elpar_venue");
        Json per_player = Json::array();
        for (std::size_t i = 0; i < players.size(); ++i) {
            const std::string path = "players[" + std::to_string(i) + "]";
            const Line l = detail::line(players[i], "line", path);
            const double r = detail::rating(players[i], "rating", path);
            sums[index_of(l)] += r;
            ++counts[index_of(l)];
            const ElparResult e = elpar_per_game(model_->model, f, l, r, model_->levels, elpar_venue);
            std::optional<Euros> wage;
            if (players[i].contains("wage") && !players[i]["wage"].is_null())
                wage = detail::money(players[i], "wage", path);
            else
                all_wages = false;
            const std::string label =
                players[i].contains("label") && players[i]["label"].is_string() ? players[i]["label"].get<std::string>()
                                                                                : "";
            records.push_back(make_valuation(label, l, r, e.points_per_game, 0, wage));
            Json p = to_json(e);
            p["label"] = label;
            per_player.push_back(std::move(p));
        }
        for (Line l : kAllLines)
            if (counts[index_of(l)] != line_size(f, l))
                throw RequestError("players", "formation " + to_string(f) + " needs " +
                                                  std::to_string(line_size(f, l)) + " " + std::string(to_string(l)) +
                                                  ", got " + std::to_string(counts[index_of(l)]));

        // Opponent line averages default to replacement level.
        std::array<double, 4> opponent{};
        const Json empty = Json::object();
        const Json& opp = req.contains("opponent") ? req["opponent"] : empty;
        if (!opp.is_object()) throw RequestError("opponent", "expected an object of per-line ratings");
        for (Line l : kAllLines) {
            const std::string key(to_string(l));
            opponent[index_of(l)] =
                opp.contains(key) ? detail::rating(opp, key, "opponent") : model_->levels[l];
        }

        FeatureVector x;
        for (Line l : kAllLines) x[l] = sums[index_of(l)] / counts[index_of(l)] - opponent[index_of(l)];

        const std::string venue = req.contains("venue") ? detail::text(req, "venue") : "home";
        OutcomeProbs probs;
        if (venue == "home") {
            probs = predict_outcome(model_->model, x);
        } else if (venue == "away") {
            const OutcomeProbs p = predict_outcome(model_->model, -x);
            probs = {p.p_loss, p.p_draw, p.p_win};
        } else if (venue == "neutral") {
            const OutcomeProbs h = predict_outcome(model_->model, x);
            const OutcomeProbs a = predict_outcome(model_->model, -x);
            probs = {0.5 * (h.p_win + a.p_loss), 0.5 * (h.p_draw + a.p_draw), 0.5 * (h.p_loss + a.p_win)};
        } else {
            throw RequestError("venue", "expected \"home\", \"away\" or \"neutral\"");
        }

        Json out;
        out["formation"] = to_string(f);
        out["venue"] = venue;
        out["outcome"] = to_json(probs);
        out["features"] = {{"x_d", x.x_d}, {"x_m", x.x_m}, {"x_a", x.x_a}, {"x_gk", x.x_gk}};
        double total = 0.0;
        for (const auto& rec : records) total += rec.elpar_per_game;
        out["players"] = per_player;
        out["total_elpar"] = total;
        if (all_wages) {
            try {
                const auto wages = wage_redistribution(records);
                out["wage_redistribution"] = wages;
            } catch (const Error&) {
                out["wage_redistribution"] = nullptr;
            }
        } else {
            out["wage_redistribution"] = nullptr;
        }
        return out;
    }

    std::optional<ModelFile> model_;
    std::optional<ValueCurve> curve_;
};

}  // namespace elpar::api
