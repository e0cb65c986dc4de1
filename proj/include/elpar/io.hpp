#pragma once

// Key-value documents (JSON) for the model file, evaluation reports and
// market outputs, plus the CSV tables meant for plotting.

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include "elpar/data.hpp"
#include "elpar/elpar.hpp"
#include "elpar/eval.hpp"
#include "elpar/glm.hpp"
#include "elpar/market.hpp"

namespace elpar {

using Json = nlohmann::ordered_json;

inline constexpr int kModelSchemaVersion = 1;

/// How the stored model was trained; lets `evaluate` rebuild the same split.
struct TrainingInfo {
    std::string fit_on = "train";  // "train" or "all"
    double split_fraction = 0.8;
    std::uint64_t seed = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
};

/// Everything downstream commands need from a fit.
struct ModelFile {
    SkellamGlmModel model;
    ReplacementLevels levels;
    TrainingInfo training;
};

namespace json_detail {

inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json coefficients(const Coefficients& c) {
    Json a = Json::array();
    for (double v : c) a.push_back(number_or_null(v));
    return a;
}

inline Coefficients coefficients_from(const Json& j, const char* key) {
    const Json& a = j.at(key);
    require(a.is_array() && a.size() == kCoefficientCount, ErrorKind::Parse,
            std::string("model file: '") + key + "' must be an array of 5 numbers");
    Coefficients c{};
    for (std::size_t i = 0; i < kCoefficientCount; ++i) c[i] = a[i].is_null() ? std::nan("") : a[i].get<double>();
    return c;
}

}  // namespace json_detail

inline Json levels_to_json(const ReplacementLevels& levels) {
    Json j = Json::object();
    for (Line line : kAllLines) j[std::string(to_string(line))] = levels[line];
    return j;
}

inline ReplacementLevels levels_from_json(const Json& j) {
    ReplacementLevels levels;
    for (Line line : kAllLines) levels[line] = j.at(std::string(to_string(line))).get<double>();
    return levels;
}

inline Json model_to_json(const ModelFile& file) {
    using namespace json_detail;
    Json j;
    j["schema_version"] = kModelSchemaVersion;
    j["feature_order"] = Json(std::vector<std::string>(kFeatureOrder.begin(), kFeatureOrder.end()));
    j["b1"] = coefficients(file.model.b1);
    j["b2"] = coefficients(file.model.b2);
    j["se1"] = coefficients(file.model.se1);
    j["se2"] = coefficients(file.model.se2);
    j["n_obs"] = file.model.n_obs;
    j["final_nll"] = number_or_null(file.model.final_nll);
    j["converged"] = file.model.converged;
    j["iterations"] = file.model.iterations;
    j["gradient_norm"] = number_or_null(file.model.gradient_norm);
    j["replacement_levels"] = levels_to_json(file.levels);
    j["training"] = {{"fit_on", file.training.fit_on},
                     {"split_fraction", file.training.split_fraction},
                     {"seed", file.training.seed},
                     {"n_train", file.training.n_train},
                     {"n_test", file.training.n_test}};
    return j;
}

inline std::string serialize_model(const ModelFile& file) { return model_to_json(file).dump(2) + "\n"; }

inline ModelFile parse_model(const std::string& text) {
    using namespace json_detail;
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("model file: ") + e.what());
    }
    try {
        require(j.at("schema_version").get<int>() == kModelSchemaVersion, ErrorKind::Parse,
                "model file: unsupported schema_version");
        const auto order = j.at("feature_order").get<std::vector<std::string>>();
        require(order == std::vector<std::string>(kFeatureOrder.begin(), kFeatureOrder.end()), ErrorKind::Parse,
                "model file: feature_order does not match this build");
        ModelFile file;
        file.model.b1 = coefficients_from(j, "b1");
        file.model.b2 = coefficients_from(j, "b2");
        file.model.se1 = coefficients_from(j, "se1");
        file.model.se2 = coefficients_from(j, "se2");
        file.model.n_obs = j.at("n_obs").get<std::size_t>();
        file.model.final_nll = j.at("final_nll").is_null() ? std::nan("") : j.at("final_nll").get<double>();
        file.model.converged = j.at("converged").get<bool>();
        file.model.iterations = j.value("iterations", 0);
        if (j.contains("gradient_norm") && !j["gradient_norm"].is_null())
            file.model.gradient_norm = j["gradient_norm"].get<double>();
        file.levels = levels_from_json(j.at("replacement_levels"));
        if (j.contains("training")) {
            const Json& t = j["training"];
            file.training.fit_on = t.value("fit_on", std::string("train"));
            file.training.split_fraction = t.value("split_fraction", 0.8);
            file.training.seed = t.value("seed", std::uint64_t{0});
            file.training.n_train = t.value("n_train", std::size_t{0});
            file.training.n_test = t.value("n_test", std::size_t{0});
        }
        return file;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("model file: ") + e.what());
    }
}

inline void save_model(const std::string& path, const ModelFile& file) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::MissingData, "cannot write '" + path + "'");
    out << serialize_model(file);
}

inline ModelFile load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::MissingData, "cannot open model file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str());
}

// ---------------------------------------------------------------------------
// Other documents

inline Json to_json(const OutcomeProbs& p) { return {{"p_win", p.p_win}, {"p_draw", p.p_draw}, {"p_loss", p.p_loss}}; }

inline Json to_json(const ElparResult& r) {
    return {{"formation", to_string(r.formation)},
            {"line", std::string(to_string(r.line))},
            {"rating", r.player_rating},
            {"elpar", r.points_per_game},
            {"delta_win", r.delta_win},
            {"delta_draw", r.delta_draw},
            {"delta_loss", r.delta_loss}};
}

inline Json to_json(const Allocation& a) {
    Json items = Json::array();
    for (const auto& item : a.items)
        items.push_back({{"line", std::string(to_string(item.line))},
                         {"budget_slice_eur", item.budget_slice},
                         {"cost_eur", item.cost},
                         {"rating", item.rating},
                         {"elpar", item.elpar}});
    return {{"items", items},
            {"total_elpar", a.total_elpar},
            {"total_cost_eur", a.total_cost},
            {"total_budget_slices_eur", a.total_budget_slices}};
}

/// Optimal allocation next to the proportional baseline and the relative gain.
/// The baseline is null when it cannot buy every need.
inline Json allocation_report(Euros budget, std::span<const Line> needs, const ValueCurve& curve,
                              const ElparLookup& lookup, Euros increment) {
    const Allocation best = optimize_allocation(budget, needs, curve, lookup, increment);
    Json out;
    out["budget_eur"] = budget;
    out["increment_eur"] = increment;
    out["allocation"] = to_json(best);
    try {
        const Allocation base = proportional_allocation(budget, needs, curve, lookup, increment);
        out["baseline"] = to_json(base);
        out["gain_pct"] = base.total_elpar > 0.0 ? Json(100.0 * (best.total_elpar - base.total_elpar) / base.total_elpar)
                                                 : Json(nullptr);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Infeasible) throw;
        out["baseline"] = nullptr;
        out["gain_pct"] = nullptr;
    }
    return out;
}

inline Json to_json(const BudgetPointsFit& f) {
    return {{"slope_points_per_million", f.slope},
            {"intercept", f.intercept},
            {"r_squared", f.r_squared},
            {"n_teams", f.n_teams}};
}

inline Json to_json(const ResidualSummary& s) {
    Json j;
    j["n"] = s.n;
    j["mean"] = s.mean;
    j["std_dev"] = s.std_dev;
    j["chi_sq_stat"] = json_detail::number_or_null(s.chi_sq_stat);
    j["chi_sq_df"] = s.chi_sq_df;
    j["chi_sq_p_value"] = json_detail::number_or_null(s.chi_sq_p_value);
    j["chi_sq_critical_5pct"] = json_detail::number_or_null(s.chi_sq_critical_5pct);
    j["normality_rejected_5pct"] =
        std::isfinite(s.chi_sq_critical_5pct) ? Json(s.chi_sq_stat > s.chi_sq_critical_5pct) : Json(nullptr);
    return j;
}

// ---------------------------------------------------------------------------
// CSV tables

inline void write_residual_histogram_csv(std::ostream& out, const ResidualSummary& s) {
    out << "bucket_center,count\n";
    for (const auto& b : s.histogram) out << b.center << ',' << b.count << '\n';
}

inline std::string format_double(double v) {
    if (!std::isfinite(v)) return "";
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

inline void write_calibration_csv(std::ostream& out, const CalibrationCurves& curves) {
    out << "outcome,lower,upper,n,mean_predicted,observed_frequency\n";
    for (Outcome o : kAllOutcomes)
        for (const auto& bin : curves[static_cast<std::size_t>(o)]) {
            out << to_string(o) << ',' << format_double(bin.lower) << ',' << format_double(bin.upper) << ',' << bin.n
                << ',';
            if (bin.defined)
                out << format_double(bin.mean_predicted) << ',' << format_double(bin.observed_frequency);
            else
                out << ',';
            out << '\n';
        }
}

inline void write_elpar_csv(std::ostream& out, const std::vector<ElparResult>& grid) {
    out << "formation,line,rating,elpar,delta_win,delta_draw,delta_loss\n";
    for (const auto& r : grid)
        out << to_string(r.formation) << ',' << to_string(r.line) << ',' << format_double(r.player_rating) << ','
            << format_double(r.points_per_game) << ',' << format_double(r.delta_win) << ','
            << format_double(r.delta_draw) << ',' << format_double(r.delta_loss) << '\n';
}

inline void write_valuation_csv(std::ostream& out, const std::vector<ValuationRecord>& rows) {
    out << "player_id,line,rating,elpar,market_value_eur,cost_per_point_eur\n";
    for (const auto& v : rows) {
        out << v.player_id << ',' << to_string(v.line) << ',' << format_double(v.rating) << ','
            << format_double(v.elpar_per_game) << ',' << v.market_value << ',';
        if (v.cost_per_point) out << *v.cost_per_point;
        out << '\n';
    }
}

}  // namespace elpar
