// elpar: fit the Skellam match model, evaluate it, tabulate eLPAR, run the
// money layer and serve the read-only HTTP API.
//
// Exit codes: 0 ok, 2 input error, 3 fit did not converge, 4 infeasible
// budget.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "elpar/all.hpp"

// After the library headers: httplib pulls in <resolv.h>, whose _res macro
// clashes with an Eigen parameter name.
#include <CLI11.hpp>
#include <httplib.h>

namespace fs = std::filesystem;
using namespace elpar;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNotConverged = 3;
constexpr int kExitInfeasible = 4;

struct DataOptions {
    std::string matches;
    std::string players;
    std::string positions;
};

PositionMap load_positions(const std::string& path) {
    if (path.empty()) return PositionMap{};
    auto in = open_input(path);
    return PositionMap::with_overrides(in);
}

std::vector<Formation> parse_formations(const std::vector<std::string>& tokens) {
    if (tokens.empty()) return {canonical_formations().begin(), canonical_formations().end()};
    std::vector<Formation> out;
    for (const auto& t : tokens) out.push_back(parse_formation(t));
    return out;
}

Venue parse_venue(const std::string& token) {
    if (token == "symmetric") return Venue::Symmetric;
    if (token == "home") return Venue::Home;
    fail(ErrorKind::Parse, "unknown venue '" + token + "' (expected symmetric or home)");
}

std::vector<Line> parse_needs(const std::string& list) {
    std::vector<Line> needs;
    std::stringstream ss(list);
    std::string token;
    while (std::getline(ss, token, ','))
        if (!token.empty()) needs.push_back(parse_line(token));
    require(!needs.empty(), ErrorKind::Precondition, "--needs: no lines given");
    return needs;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::MissingData, "cannot write '" + path.string() + "'");
    return out;
}

/// Writes to `path`, or stdout when it is empty or "-".
template <typename F>
void emit(const std::string& path, F&& write) {
    if (path.empty() || path == "-") {
        write(std::cout);
        return;
    }
    auto out = open_output(path);
    write(out);
}

std::string fixed(double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

void print_coefficient_table(std::ostream& out, const SkellamGlmModel& m) {
    out << std::left << std::setw(12) << "" << std::setw(22) << "log(lambda1)" << "log(lambda2)\n";
    for (std::size_t j = 0; j < kCoefficientCount; ++j) {
        // Standard errors are only computed at a converged optimum.
        const auto se = [&](double v) { return m.converged ? fixed(v, 4) : std::string("n/a"); };
        const std::string c1 = fixed(m.b1[j], 4) + " (" + se(m.se1[j]) + ")";
        const std::string c2 = fixed(m.b2[j], 4) + " (" + se(m.se2[j]) + ")";
        out << std::setw(12) << kFeatureOrder[j] << std::setw(22) << c1 << c2 << '\n';
    }
    out << "n = " << m.n_obs << ", NLL = " << fixed(m.final_nll, 4) << ", iterations = " << m.iterations
        << ", converged = " << (m.converged ? "yes" : "no") << '\n';
}

// ---------------------------------------------------------------------------
// fit

struct FitOptions {
    DataOptions data;
    std::string out = "model.json";
    double split = 0.8;
    std::uint64_t seed = 42;
    std::string fit_on = "train";
    int max_iterations = 500;
    double tolerance = 1e-5;
    std::size_t min_players = 30;
};

int cmd_fit(const FitOptions& o) {
    require(o.fit_on == "train" || o.fit_on == "all", ErrorKind::Parse, "--fit-on must be 'train' or 'all'");
    const auto positions = load_positions(o.data.positions);
    const auto matches = load_matches(o.data.matches);
    const auto players = load_players(o.data.players);
    const SnapshotIndex index(players);
    const auto observations = build_observations(matches, index, positions);
    const auto split = train_test_split(observations, o.split, o.seed);

    FitConfig config;
    config.max_iterations = o.max_iterations;
    config.gradient_tolerance = o.tolerance;
    config.seed = o.seed;

    ModelFile file;
    file.model = fit(o.fit_on == "train" ? split.train : observations, config);
    file.levels = replacement_levels(index, positions, o.min_players);
    file.training = {o.fit_on, o.split, o.seed, split.train.size(), split.test.size()};
    save_model(o.out, file);

    print_coefficient_table(std::cout, file.model);
    std::cout << "replacement levels:";
    for (Line line : kAllLines) std::cout << ' ' << to_string(line) << '=' << fixed(file.levels[line], 2);
    std::cout << "\nwrote " << o.out << '\n';
    if (!file.model.converged) {
        std::cerr << "elpar: fit did not converge (gradient norm " << file.model.gradient_norm << " after "
                  << file.model.iterations << " iterations); model written with converged=false\n";
        return kExitNotConverged;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
    DataOptions data;
    std::string model = "model.json";
    std::string out_dir = "report";
};

int cmd_evaluate(const EvaluateOptions& o) {
    const ModelFile file = load_model(o.model);
    require(file.model.converged, ErrorKind::Precondition, "evaluate: model did not converge");
    const auto positions = load_positions(o.data.positions);
    const auto matches = load_matches(o.data.matches);
    const auto players = load_players(o.data.players);
    const auto observations = build_observations(matches, SnapshotIndex(players), positions);
    const auto split = train_test_split(observations, file.training.split_fraction, file.training.seed);
    require(!split.test.empty(), ErrorKind::InsufficientData, "evaluate: test split is empty");

    const ResidualSummary residuals = residual_summary(file.model, split.test);
    std::vector<OutcomeProbs> predictions;
    std::vector<Outcome> outcomes;
    double max_draw = 0.0;
    for (const auto& obs : split.test) {
        predictions.push_back(predict_outcome(file.model, obs.features));
        outcomes.push_back(outcome_of(obs.goal_diff));
        max_draw = std::max(max_draw, predictions.back().p_draw);
    }
    const CalibrationCurves curves = calibration_curve(predictions, outcomes, 0.05);

    Json calibration = Json::object();
    for (Outcome outcome : kAllOutcomes) {
        double worst = 0.0;
        std::size_t occupied = 0;
        for (const auto& bin : curves[static_cast<std::size_t>(outcome)]) {
            if (!bin.defined) continue;
            ++occupied;
            worst = std::max(worst, std::abs(bin.observed_frequency - bin.mean_predicted));
        }
        calibration[to_string(outcome)] = {{"occupied_bins", occupied}, {"max_abs_gap", worst}};
    }

    Json report;
    report["model"] = fs::path(o.model).filename().string();
    report["fit_on"] = file.training.fit_on;
    report["split_fraction"] = file.training.split_fraction;
    report["seed"] = file.training.seed;
    report["n_test"] = split.test.size();
    report["residuals"] = to_json(residuals);
    report["calibration"] = calibration;
    report["calibration_bin_width"] = 0.05;
    report["max_draw_probability"] = max_draw;
    report["draw_probability_never_above_30pct"] = max_draw <= 0.30;

    fs::create_directories(o.out_dir);
    const fs::path dir(o.out_dir);
    {
        auto out = open_output(dir / "report.json");
        out << report.dump(2) << '\n';
    }
    {
        auto out = open_output(dir / "residual_histogram.csv");
        write_residual_histogram_csv(out, residuals);
    }
    {
        auto out = open_output(dir / "calibration.csv");
        write_calibration_csv(out, curves);
    }
    std::cout << "n_test = " << split.test.size() << ", residual mean = " << fixed(residuals.mean, 4)
              << ", sd = " << fixed(residuals.std_dev, 4) << "\nwrote " << (dir / "report.json").string() << ", "
              << (dir / "residual_histogram.csv").string() << ", " << (dir / "calibration.csv").string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// elpar

struct ElparOptions {
    std::string model = "model.json";
    std::vector<std::string> formations;
    int min_rating = 50;
    int max_rating = 99;
    std::string venue = "symmetric";
    std::string out;
};

int cmd_elpar(const ElparOptions& o) {
    const auto formations = parse_formations(o.formations);
    const Venue venue = parse_venue(o.venue);
    const ModelFile file = load_model(o.model);
    const auto ratings = rating_range(o.min_rating, o.max_rating);
    const auto grid = elpar_table(file.model, file.levels, formations, ratings, venue);
    emit(o.out, [&](std::ostream& out) { write_elpar_csv(out, grid); });
    return kExitOk;
}

// ---------------------------------------------------------------------------
// market

struct MarketOptions {
    std::string model = "model.json";
    std::string players;
    std::string positions;
    std::vector<std::string> formations;
    std::string venue = "symmetric";
    std::string out;

    bool fee = false;
    double rating = 0.0;
    int games = 38;
    double slope = 0.44;
    std::string line;

    bool optimize = false;
    Euros budget = 0;
    std::string needs;
    Euros increment = 100'000;

    std::string wages;
    std::string squad_formation = "4-4-2";
    std::size_t min_support = 5;
};

int market_fee(const MarketOptions& o, const ModelFile& file, const std::vector<Formation>& formations, Venue venue) {
    std::vector<Line> lines;
    if (o.line.empty())
        lines.assign(kAllLines.begin(), kAllLines.end());
    else
        lines.push_back(parse_line(o.line));
    Json doc;
    doc["rating"] = o.rating;
    doc["games"] = o.games;
    doc["slope_points_per_million"] = o.slope;
    Json rows = Json::array();
    for (Line line : lines) {
        const double e = elpar_formation_average(file.model, formations, line, o.rating, file.levels, venue);
        rows.push_back({{"line", std::string(to_string(line))},
                        {"elpar", e},
                        {"fair_fee_millions", fair_transfer_fee(e, o.games, o.slope)}});
    }
    doc["fees"] = rows;
    emit(o.out, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
    return kExitOk;
}

int market_optimize(const MarketOptions& o, const ModelFile& file, const ValueCurve& curve,
                    const std::vector<Formation>& formations, Venue venue) {
    const auto needs = parse_needs(o.needs);
    const auto lookup = model_elpar_lookup(file.model, file.levels, formations, venue);
    const Json doc = allocation_report(o.budget, needs, curve, lookup, o.increment);
    emit(o.out, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
    return kExitOk;
}

/// squad.csv: player_id,line,rating,wage_eur_month (11 rows).
int market_wages(const MarketOptions& o, const ModelFile& file, Venue venue) {
    const Formation formation = parse_formation(o.squad_formation);
    auto in = open_input(o.wages);
    std::string row;
    int line_no = 0;
    std::vector<ValuationRecord> squad;
    while (std::getline(in, row)) {
        ++line_no;
        if (!row.empty() && row.back() == '\r') row.pop_back();
        if (row.empty()) continue;
        if (line_no == 1) {
            if (row != "player_id,line,rating,wage_eur_month")
                csv::row_error(o.wages, line_no, 0, "expected header player_id,line,rating,wage_eur_month");
            continue;
        }
        const auto cells = csv::split(row);
        if (cells.size() != 4) csv::row_error(o.wages, line_no, std::min<std::size_t>(cells.size(), 4), "expected 4 columns");
        const Line line = parse_line(cells[1]);
        const double rating = csv::number<double>(cells[2], o.wages, line_no, 2, "rating");
        const Euros wage = csv::number<Euros>(cells[3], o.wages, line_no, 3, "wage_eur_month");
        const double e = elpar_per_game(file.model, formation, line, rating, file.levels, venue).points_per_game;
        squad.push_back(make_valuation(std::string(cells[0]), line, rating, e, 0, wage));
    }
    const auto redistributed = wage_redistribution(squad);
    emit(o.out, [&](std::ostream& out) {
        out << "player_id,line,rating,elpar,wage_eur_month,elpar_wage_eur_month\n";
        for (std::size_t i = 0; i < squad.size(); ++i)
            out << squad[i].player_id << ',' << to_string(squad[i].line) << ',' << format_double(squad[i].rating) << ','
                << format_double(squad[i].elpar_per_game) << ',' << *squad[i].wage << ',' << redistributed[i] << '\n';
    });
    return kExitOk;
}

int cmd_market(const MarketOptions& o) {
    const auto formations = parse_formations(o.formations);
    const Venue venue = parse_venue(o.venue);
    const ModelFile file = load_model(o.model);
    require(file.model.converged, ErrorKind::Precondition, "market: model did not converge");
    const int modes = int(o.fee) + int(o.optimize) + int(!o.wages.empty());
    require(modes <= 1, ErrorKind::Parse, "market: choose at most one of --fee, --optimize, --wages");

    if (o.fee) return market_fee(o, file, formations, venue);
    if (!o.wages.empty()) return market_wages(o, file, venue);

    require(!o.players.empty(), ErrorKind::Parse, "market: --players is required for valuations and --optimize");
    const auto positions = load_positions(o.positions);
    const SnapshotIndex index(load_players(o.players));
    if (o.optimize) return market_optimize(o, file, build_value_curve(index, positions, o.min_support), formations, venue);

    std::vector<ValuationRecord> rows;
    for (const auto& id : index.players()) {
        const auto history = index.history(id);
        const PlayerSnapshot* valued = nullptr;
        for (auto it = history.rbegin(); it != history.rend(); ++it)
            if (it->market_value) {
                valued = &*it;
                break;
            }
        if (!valued) continue;
        const Line line = positions.line_of(valued->position);
        const double e =
            elpar_formation_average(file.model, formations, line, valued->overall_rating, file.levels, venue);
        rows.push_back(make_valuation(id, line, valued->overall_rating, e, *valued->market_value, valued->wage));
    }
    emit(o.out, [&](std::ostream& out) { write_valuation_csv(out, rows); });
    return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
    std::string out_dir = "data";
    std::size_t matches = 200;
    std::size_t players_per_line = 40;
    std::uint64_t seed = 1;
    std::size_t observations = 0;
};

int cmd_simulate(const SimulateOptions& o) {
    fs::create_directories(o.out_dir);
    const fs::path dir(o.out_dir);
    if (o.observations > 0) {
        const auto ref = reference_model();
        const auto data = sample_observations(ref.b1, ref.b2, o.observations, o.seed);
        auto out = open_output(dir / "observations.csv");
        out << "x_d,x_m,x_a,x_gk,goal_diff\n";
        for (const auto& obs : data)
            out << format_double(obs.features.x_d) << ',' << format_double(obs.features.x_m) << ','
                << format_double(obs.features.x_a) << ',' << format_double(obs.features.x_gk) << ',' << obs.goal_diff
                << '\n';
        std::cout << "wrote " << (dir / "observations.csv").string() << '\n';
        return kExitOk;
    }
    LeagueConfig config;
    config.matches = o.matches;
    config.players_per_line = o.players_per_line;
    config.seed = o.seed;
    const League league = simulate_league(config);
    {
        auto out = open_output(dir / "matches.csv");
        write_matches(out, league.matches);
    }
    {
        auto out = open_output(dir / "players.csv");
        write_players(out, league.players);
    }
    std::cout << "wrote " << (dir / "matches.csv").string() << " (" << league.matches.size() << " matches), "
              << (dir / "players.csv").string() << " (" << league.players.size() << " snapshots)\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// serve

struct ServeOptions {
    std::string model = "model.json";
    std::string players;
    std::string positions;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t min_support = 5;
};

int cmd_serve(const ServeOptions& o) {
    require(o.port >= 1024 && o.port <= 65535, ErrorKind::Parse, "--port must be in [1024, 65535]");
    ModelFile file = load_model(o.model);
    std::optional<ValueCurve> curve;
    if (!o.players.empty()) curve = build_value_curve(SnapshotIndex(load_players(o.players)), load_positions(o.positions), o.min_support);
    const api::Service service(std::move(file), std::move(curve));

    httplib::Server server;
    const auto respond = [&service](const httplib::Request& req, httplib::Response& res) {
        const api::Response r = service.handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    server.Get("/api/model", respond);
    for (const char* path : {"/api/predict", "/api/elpar", "/api/squad/evaluate", "/api/budget/optimize"})
        server.Post(path, respond);

    std::cout << "serving on http://" << o.host << ':' << o.port << "/api" << std::endl;
    if (!server.listen(o.host, o.port)) fail(ErrorKind::MissingData, "cannot listen on " + o.host + ":" + std::to_string(o.port));
    return kExitOk;
}

void add_data_options(CLI::App* cmd, DataOptions& d) {
    cmd->add_option("--matches", d.matches, "matches.csv")->required()->check(CLI::ExistingFile);
    cmd->add_option("--players", d.players, "players.csv")->required();
    cmd->add_option("--positions", d.positions, "label,line overrides for the position vocabulary");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Skellam match model and expected league points above replacement (eLPAR)"};
    app.require_subcommand(1);

    FitOptions fit_opts;
    auto* fit_cmd = app.add_subcommand("fit", "Fit the goal-differential model and write the model file");
    add_data_options(fit_cmd, fit_opts.data);
    fit_cmd->add_option("--out", fit_opts.out, "Model file to write")->capture_default_str();
    fit_cmd->add_option("--split", fit_opts.split, "Training fraction")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    fit_cmd->add_option("--seed", fit_opts.seed, "Split and restart seed")->capture_default_str();
    fit_cmd->add_option("--fit-on", fit_opts.fit_on, "Fit on 'train' or 'all' matches")->capture_default_str();
    fit_cmd->add_option("--max-iterations", fit_opts.max_iterations)->capture_default_str()->check(CLI::PositiveNumber);
    fit_cmd->add_option("--tolerance", fit_opts.tolerance, "Gradient-norm tolerance")->capture_default_str();
    fit_cmd->add_option("--min-players", fit_opts.min_players, "Players per line needed for replacement levels")
        ->capture_default_str();

    EvaluateOptions eval_opts;
    auto* eval_cmd = app.add_subcommand("evaluate", "Residuals and calibration curves on the held-out split");
    add_data_options(eval_cmd, eval_opts.data);
    eval_cmd->add_option("--model", eval_opts.model)->capture_default_str();
    eval_cmd->add_option("--out-dir", eval_opts.out_dir, "Directory for report.json and CSV tables")
        ->capture_default_str();

    ElparOptions elpar_opts;
    auto* elpar_cmd = app.add_subcommand("elpar", "eLPAR grid by formation, line and rating (CSV)");
    elpar_cmd->add_option("--model", elpar_opts.model)->capture_default_str();
    elpar_cmd->add_option("--formation", elpar_opts.formations, "D-M-A, repeatable (default: 4-4-2 4-3-3 3-5-2 4-5-1)");
    elpar_cmd->add_option("--min-rating", elpar_opts.min_rating)->capture_default_str();
    elpar_cmd->add_option("--max-rating", elpar_opts.max_rating)->capture_default_str();
    elpar_cmd->add_option("--venue", elpar_opts.venue, "symmetric or home")->capture_default_str();
    elpar_cmd->add_option("--out", elpar_opts.out, "Output CSV (default stdout)");

    MarketOptions market_opts;
    auto* market_cmd = app.add_subcommand("market", "Valuations, fair fees, budget allocation and wage redistribution");
    market_cmd->add_option("--model", market_opts.model)->capture_default_str();
    market_cmd->add_option("--players", market_opts.players, "players.csv (valuations and --optimize)");
    market_cmd->add_option("--positions", market_opts.positions);
    market_cmd->add_option("--formation", market_opts.formations, "Formations averaged with equal playing time");
    market_cmd->add_option("--venue", market_opts.venue, "symmetric or home")->capture_default_str();
    market_cmd->add_option("--out", market_opts.out, "Output file (default stdout)");
    market_cmd->add_flag("--fee", market_opts.fee, "Fair transfer fee: games x eLPAR / slope");
    market_cmd->add_option("--rating", market_opts.rating)->check(CLI::Range(0.0, 100.0));
    market_cmd->add_option("--games", market_opts.games)->capture_default_str()->check(CLI::PositiveNumber);
    market_cmd->add_option("--slope", market_opts.slope, "League points per million")->capture_default_str();
    market_cmd->add_option("--line", market_opts.line, "GK, DEF, MID or ATT (default: all four)");
    market_cmd->add_flag("--optimize", market_opts.optimize, "Spread --budget over --needs to maximize eLPAR");
    market_cmd->add_option("--budget", market_opts.budget, "Euros")->check(CLI::NonNegativeNumber);
    market_cmd->add_option("--needs", market_opts.needs, "Comma-separated lines, e.g. GK,DEF");
    market_cmd->add_option("--increment", market_opts.increment, "Spend grid in euros")->capture_default_str()
        ->check(CLI::PositiveNumber);
    market_cmd->add_option("--wages", market_opts.wages, "squad.csv: player_id,line,rating,wage_eur_month");
    market_cmd->add_option("--squad-formation", market_opts.squad_formation)->capture_default_str();
    market_cmd->add_option("--min-support", market_opts.min_support, "Players needed per (line, rating) price cell")
        ->capture_default_str()->check(CLI::PositiveNumber);

    SimulateOptions sim_opts;
    auto* sim_cmd = app.add_subcommand("simulate", "Synthetic league (matches.csv, players.csv) or observations");
    sim_cmd->add_option("--out-dir", sim_opts.out_dir)->capture_default_str();
    sim_cmd->add_option("--matches", sim_opts.matches)->capture_default_str();
    sim_cmd->add_option("--players-per-line", sim_opts.players_per_line)->capture_default_str();
    sim_cmd->add_option("--seed", sim_opts.seed)->capture_default_str();
    sim_cmd->add_option("--observations", sim_opts.observations,
                        "Write this many feature/goal-difference rows instead of a league");

    ServeOptions serve_opts;
    auto* serve_cmd = app.add_subcommand("serve", "Read-only HTTP API over a model file");
    serve_cmd->add_option("--model", serve_opts.model)->capture_default_str();
    serve_cmd->add_option("--players", serve_opts.players, "players.csv for /api/budget/optimize");
    serve_cmd->add_option("--positions", serve_opts.positions);
    serve_cmd->add_option("--host", serve_opts.host)->capture_default_str();
    serve_cmd->add_option("--port", serve_opts.port)->capture_default_str();
    serve_cmd->add_option("--min-support", serve_opts.min_support, "Players needed per (line, rating) price cell")
        ->capture_default_str()->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*fit_cmd) return cmd_fit(fit_opts);
        if (*eval_cmd) return cmd_evaluate(eval_opts);
        if (*elpar_cmd) return cmd_elpar(elpar_opts);
        if (*market_cmd) return cmd_market(market_opts);
        if (*sim_cmd) return cmd_simulate(sim_opts);
        if (*serve_cmd) return cmd_serve(serve_opts);
    } catch (const Error& e) {
        std::cerr << "elpar: " << e.what() << '\n';
        return e.kind() == ErrorKind::Infeasible ? kExitInfeasible : kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "elpar: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitInput;
}
