#include "wismc/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "wismc/error.hpp"
#include "wismc/finfunc.hpp"
#include "wismc/io.hpp"
#include "wismc/market_data.hpp"
#include "wismc/model.hpp"
#include "wismc/optimize.hpp"
#include "wismc/simulate.hpp"
#include "wismc/stats.hpp"

namespace fs = std::filesystem;

namespace wismc {

namespace {

struct Common {
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
};

struct Outputs {
    fs::path dir;
    std::vector<std::pair<std::string, std::string>> files;  // name, sha256

    void write(const std::string& name, const std::string& text) {
        write_text(dir / name, text);
        files.emplace_back(name, sha256_hex(text));
    }
};

class Run {
public:
    Run(std::string subcommand, Json config) : subcommand_(std::move(subcommand)), config_(std::move(config)) {}

    void input(const std::string& path) { inputs_.push_back({{"path", path}, {"sha256", sha256_file(path)}}); }
    void seed(std::uint64_t s) { seed_ = s; }

    // Manifest and timing sidecar; neither is listed among the primary outputs.
    void finish(const Outputs& out, const fs::path& manifest_path, const fs::path& timing_path,
                const Json& timing_extra = Json::object()) const {
        Json m;
        m["format_version"] = format_version;
        m["kind"] = "manifest";
        m["tool"] = "wismc";
        m["version"] = WISMC_VERSION;
        m["subcommand"] = subcommand_;
        m["config"] = config_;
        m["seed"] = seed_ ? Json(*seed_) : Json(nullptr);
        m["inputs"] = inputs_;
        Json files = Json::array();
        for (const auto& [name, hash] : out.files) files.push_back({{"path", name}, {"sha256", hash}});
        m["outputs"] = files;
        write_text(manifest_path, dump(m));
        Json t;
        t["format_version"] = format_version;
        t["kind"] = "timing";
        t["elapsed_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        for (const auto& [key, value] : timing_extra.items()) {
            if (key != "format_version" && key != "kind") t[key] = value;
        }
        write_text(timing_path, dump(t));
    }

private:
    std::string subcommand_;
    Json config_;
    Json inputs_ = Json::array();
    std::optional<std::uint64_t> seed_;
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct AlignedInput {
    std::vector<double> r;
    std::vector<double> v;
    Json summary;
};

AlignedInput load_aligned(const std::string& path, const std::string& session) {
    const auto bars = load_bars(path, CsvFormat{}, SessionHours::parse(session));
    const auto r = compute_returns(bars, ReturnKind::price);
    const auto v = compute_returns(bars, ReturnKind::volume);
    auto [ra, va] = align_returns(r, v);
    AlignedInput in;
    in.r = std::move(ra.values);
    in.v = std::move(va.values);
    in.summary = {{"bars", bars.bars.size()},
                  {"sessions", bars.session_count()},
                  {"rejected_rows", bars.rejected_rows},
                  {"price_returns", r.size()},
                  {"volume_returns", v.size()},
                  {"skipped_volume_pairs", v.skipped_pairs},
                  {"aligned_pairs", in.r.size()}};
    return in;
}

// CSV with a header naming columns r and v, e.g. a simulated path.
AlignedInput load_return_columns(const std::string& path) {
    std::istringstream in(read_text(path));
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw Error(ErrorKind::parse, "empty returns file", 1);
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    const auto find = [&](const char* name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw Error(ErrorKind::parse, std::string("returns file lacks column ") + name, 1);
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto cr = find("r");
    const auto cv = find("v");
    AlignedInput out;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() <= std::max(cr, cv)) throw Error(ErrorKind::parse, "short row", line_no);
        try {
            std::size_t used = 0;
            out.r.push_back(std::stod(cells[cr], &used));
            out.v.push_back(std::stod(cells[cv], &used));
        } catch (const std::exception&) {
            throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": not a number", line_no);
        }
    }
    out.summary = {{"aligned_pairs", out.r.size()}};
    return out;
}

std::string descriptive_csv(const Battery& b) {
    std::string out = "variable,n,mean,median,standard_deviation,skewness,kurtosis,kurtosis_convention,jb_statistic,"
                      "jb_p_value,jb_reject\n";
    const auto row = [&](const char* name, const DescriptiveStats& s, const JarqueBera& jb) {
        out += std::string(name) + ',' + std::to_string(s.n) + ',' + format_double(s.mean) + ',' +
               format_double(s.median) + ',' + format_double(s.standard_deviation) + ',' +
               format_double(s.skewness) + ',' + format_double(s.kurtosis) + ',' + s.kurtosis_convention + ',' +
               format_double(jb.statistic) + ',' + format_double(jb.p_value) + ',' + (jb.reject ? "true" : "false") +
               '\n';
    };
    row("r", b.r_stats, b.r_jb);
    row("v", b.v_stats, b.v_jb);
    return out;
}

std::string acf_csv(const Battery& b) {
    std::string out = "lag,acf_abs_r,acf_abs_v\n";
    const auto n = std::max(b.acf_abs_r.size(), b.acf_abs_v.size());
    for (std::size_t k = 0; k < n; ++k) {
        out += std::to_string(k) + ',';
        if (k < b.acf_abs_r.size()) out += format_double(b.acf_abs_r[k]);
        out += ',';
        if (k < b.acf_abs_v.size()) out += format_double(b.acf_abs_v[k]);
        out += '\n';
    }
    return out;
}

std::string cross_csv(const Battery& b) {
    std::string out = "pair,rho,p_value,n\n";
    for (const auto& c : b.cross) {
        out += '"' + c.name + "\"," + format_double(c.rho) + ',' + format_double(c.p_value) + ',' +
               std::to_string(c.n) + '\n';
    }
    return out;
}

std::string contingency_csv(const ContingencyTable& t) {
    std::string out = "wait_lo,wait_hi,state_lo,state_hi,observed,expected\n";
    for (std::size_t i = 0; i < t.observed.size(); ++i) {
        for (std::size_t j = 0; j < t.observed[i].size(); ++j) {
            out += format_double(t.row_edges[i]) + ',' + format_double(t.row_edges[i + 1]) + ',' +
                   format_double(t.col_edges[j]) + ',' + format_double(t.col_edges[j + 1]) + ',' +
                   std::to_string(t.observed[i][j]) + ',' + format_double(t.expected[i][j]) + '\n';
        }
    }
    return out;
}

std::vector<HistoryPoint> parse_history(const std::string& text) {
    std::vector<HistoryPoint> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        HistoryPoint p;
        char c1 = 0, c2 = 0;
        std::istringstream is(item);
        if (!(is >> p.j_state >> c1 >> p.v_state >> c2 >> p.time) || c1 != ':' || c2 != ':') {
            throw Error(ErrorKind::parameter, "history entries look like j:v:t, got '" + item + "'");
        }
        out.push_back(p);
    }
    if (out.empty()) throw Error(ErrorKind::parameter, "history is empty");
    return out;
}

std::vector<double> parse_lambdas(const std::string& text) {
    std::vector<double> out;
    const auto parse = [&](const std::string& s) {
        try {
            std::size_t used = 0;
            const double x = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return x;
        } catch (const std::exception&) {
            throw Error(ErrorKind::parameter, "not a number: '" + s + "'");
        }
    };
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        std::string p;
        while (std::getline(ss, p, ':')) parts.push_back(p);
        if (parts.size() != 3) throw Error(ErrorKind::parameter, "lambda range looks like start:stop:step");
        const double a = parse(parts[0]), b = parse(parts[1]), step = parse(parts[2]);
        if (!(step > 0.0) || b < a) throw Error(ErrorKind::parameter, "invalid lambda range");
        const auto n = static_cast<long>(std::floor((b - a) / step + 1e-9)) + 1;
        for (long k = 0; k < n; ++k) out.push_back(std::round((a + static_cast<double>(k) * step) * 1e12) / 1e12);
    } else {
        std::stringstream ss(text);
        std::string p;
        while (std::getline(ss, p, ',')) out.push_back(parse(p));
    }
    return out;
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::parameter: return 2;
        case ErrorKind::resource: return 4;
        default: return 3;
    }
}

void print_error(std::ostream& err, const std::string& kind, const std::string& message, std::size_t line = 0) {
    Json e = {{"kind", kind}, {"message", message}};
    if (line > 0) e["line"] = line;
    err << Json{{"error", e}}.dump() << '\n';
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Weighted-indexed semi-Markov models of minute returns, volumes and waiting times", "wismc"};
    app.set_version_flag("--version", WISMC_VERSION);
    app.set_config("--config", "", "TOML or INI file with option values; flags take precedence");
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    app.add_option("--threads", common.threads, "Worker threads")->check(CLI::PositiveNumber);

    // analyze
    std::string an_input, an_returns, an_session = "09:00-17:30", an_out;
    std::size_t an_max_lag = 100;
    double an_alpha = 0.01;
    int an_states = 5;
    auto* analyze_cmd = app.add_subcommand("analyze", "Statistics battery on minute bars or simulated returns");
    auto* an_in_opt = analyze_cmd->add_option("--input", an_input, "Bar CSV (timestamp,price,volume)");
    auto* an_ret_opt = analyze_cmd->add_option("--returns", an_returns, "CSV with r and v columns");
    an_in_opt->excludes(an_ret_opt);
    analyze_cmd->add_option("--session", an_session, "Session hours HH:MM-HH:MM");
    analyze_cmd->add_option("--max-lag", an_max_lag, "Autocorrelation lags")->check(CLI::PositiveNumber);
    analyze_cmd->add_option("--alpha", an_alpha, "Jarque-Bera significance level");
    analyze_cmd->add_option("--contingency-states", an_states, "States in the contingency tables");
    analyze_cmd->add_option("--out", an_out, "Output directory")->required();

    // estimate
    std::string es_input, es_session = "09:00-17:30", es_out, es_copula = "gaussian";
    FitConfig fit;
    std::optional<int> es_t_max;
    auto* estimate_cmd = app.add_subcommand("estimate", "Fit the triplet model");
    estimate_cmd->add_option("--input", es_input, "Bar CSV")->required();
    estimate_cmd->add_option("--session", es_session, "Session hours HH:MM-HH:MM");
    estimate_cmd->add_option("--states-r", fit.states_j, "Return states");
    estimate_cmd->add_option("--states-v", fit.states_v, "Volume-return states");
    estimate_cmd->add_option("--lambda-r", fit.lambda_j, "Return index memory");
    estimate_cmd->add_option("--lambda-v", fit.lambda_v, "Volume index memory");
    estimate_cmd->add_option("--bins", fit.bins, "Index bins");
    estimate_cmd->add_option("--history-m", fit.history_m, "Leading visits used only as index history");
    estimate_cmd->add_option("--copula", es_copula, "independence, gaussian, clayton, gumbel or t");
    estimate_cmd->add_option("--nu", fit.nu, "t copula degrees of freedom");
    estimate_cmd->add_option("--t-max", es_t_max, "Sojourn truncation");
    estimate_cmd->add_option("--t-max-quantile", fit.t_max_quantile, "Quantile for the default truncation");
    estimate_cmd->add_option("--out", es_out, "Output directory")->required();

    // simulate
    std::string sm_model, sm_out, sm_back = "state-uniform-inverse-cdf", sm_history, sm_reference,
                                  sm_session = "09:00-17:30";
    SimConfig sim;
    bool sm_no_redraw = false;
    auto* simulate_cmd = app.add_subcommand("simulate", "Simulate synthetic price and volume paths");
    simulate_cmd->add_option("--model", sm_model, "Model JSON")->required();
    simulate_cmd->add_option("--minutes", sim.length_minutes, "Minutes per replication");
    simulate_cmd->add_option("--reps", sim.n_replications, "Replications");
    simulate_cmd->add_option("--seed", sim.seed, "Seed");
    simulate_cmd->add_option("--backtransform", sm_back, "state-uniform-inverse-cdf or representative-value");
    simulate_cmd->add_option("--s0", sim.s0, "Initial price");
    simulate_cmd->add_option("--v0", sim.v0, "Initial volume");
    simulate_cmd->add_flag("--no-redraw", sm_no_redraw, "Keep null events instead of redrawing once");
    simulate_cmd->add_option("--history", sm_history, "Initial history j:v:t,...");
    simulate_cmd->add_option("--reference", sm_reference, "Bar CSV to compare stylized facts against");
    simulate_cmd->add_option("--session", sm_session, "Session hours for --reference");
    simulate_cmd->add_option("--out", sm_out, "Output directory")->required();

    // fpt
    std::string fp_model, fp_out, fp_method = "recursion", fp_history;
    FptQuery query;
    query.horizon = 30;
    std::size_t fp_paths = 100000;
    std::uint64_t fp_seed = 0;
    std::size_t fp_memo = FptOptions{}.memo_limit;
    auto* fpt_cmd = app.add_subcommand("fpt", "Joint first-passage-time survival");
    fpt_cmd->add_option("--model", fp_model, "Model JSON")->required();
    fpt_cmd->add_option("--rho", query.rho, "Price accumulation threshold")->required();
    fpt_cmd->add_option("--psi", query.psi, "Volume accumulation threshold")->required();
    fpt_cmd->add_option("--horizon", query.horizon, "Horizon in minutes");
    fpt_cmd->add_option("--u", query.u, "Minutes since the last synchronized jump");
    fpt_cmd->add_option("--method", fp_method, "recursion or mc")->check(CLI::IsMember({"recursion", "mc"}));
    fpt_cmd->add_option("--paths", fp_paths, "Monte Carlo paths");
    fpt_cmd->add_option("--seed", fp_seed, "Seed");
    fpt_cmd->add_option("--history", fp_history, "History j:v:t,... (states as indices)");
    fpt_cmd->add_option("--memo-limit", fp_memo, "Recursion memo entries before giving up");
    fpt_cmd->add_option("--out", fp_out, "Output directory")->required();

    // optimize
    std::string op_input, op_session = "09:00-17:30", op_out, op_variable = "r", op_lambdas = "0.95:0.99:0.01",
                          op_label;
    GridSpec gspec;
    std::uint64_t op_seed = 0;
    std::optional<double> op_eps;
    auto* optimize_cmd = app.add_subcommand("optimize", "Grid search over states and lambda");
    optimize_cmd->add_option("--input", op_input, "Bar CSV")->required();
    optimize_cmd->add_option("--session", op_session, "Session hours HH:MM-HH:MM");
    optimize_cmd->add_option("--variable", op_variable, "r or v")->check(CLI::IsMember({"r", "v"}));
    optimize_cmd->add_option("--states", gspec.state_counts, "State counts, comma separated")->delimiter(',');
    optimize_cmd->add_option("--lambdas", op_lambdas, "start:stop:step or a comma list");
    optimize_cmd->add_option("--max-lag", gspec.max_lag, "MAPE lags");
    optimize_cmd->add_option("--reps", gspec.reps_per_point, "Simulations per grid point");
    optimize_cmd->add_option("--epsilon", op_eps, "Early stop threshold on MAPE improvement");
    optimize_cmd->add_option("--bins", gspec.bins, "Index bins");
    optimize_cmd->add_option("--seed", op_seed, "Seed");
    optimize_cmd->add_option("--label", op_label, "Label stored in the result");
    optimize_cmd->add_option("--out", op_out, "Output JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        print_error(err, "usage", e.what());
        return 2;
    }

    try {
        if (analyze_cmd->parsed()) {
            if (an_input.empty() && an_returns.empty()) {
                throw Error(ErrorKind::parameter, "analyze needs --input or --returns");
            }
            Json cfg = {{"input", an_input},     {"returns", an_returns}, {"session", an_session},
                        {"max_lag", an_max_lag}, {"alpha", an_alpha},     {"contingency_states", an_states}};
            Run run("analyze", cfg);
            const auto in = an_input.empty() ? load_return_columns(an_returns) : load_aligned(an_input, an_session);
            run.input(an_input.empty() ? an_returns : an_input);
            BatteryOptions opt;
            opt.max_lag = an_max_lag;
            opt.alpha = an_alpha;
            opt.contingency_states = an_states;
            const auto b = analyze(in.r, in.v, opt);
            Json doc = battery_to_json(b);
            doc["input"] = in.summary;
            Outputs o{an_out, {}};
            o.write("battery.json", dump(doc));
            o.write("descriptive.csv", descriptive_csv(b));
            o.write("acf.csv", acf_csv(b));
            o.write("cross.csv", cross_csv(b));
            if (b.contingency_r) o.write("contingency_r.csv", contingency_csv(*b.contingency_r));
            if (b.contingency_v) o.write("contingency_v.csv", contingency_csv(*b.contingency_v));
            run.finish(o, o.dir / "manifest.json", o.dir / "timing.json");
            out << "analyze: " << in.r.size() << " aligned returns, " << b.warnings.size() << " warnings -> "
                << an_out << '\n';
        } else if (estimate_cmd->parsed()) {
            fit.copula = parse_copula_family(es_copula);
            fit.t_max = es_t_max;
            fit.validate();
            Run run("estimate", {{"input", es_input}, {"session", es_session}, {"fit", fit_config_to_json(fit)}});
            const auto in = load_aligned(es_input, es_session);
            run.input(es_input);
            const auto model = fit_model(in.r, in.v, fit);
            Outputs o{es_out, {}};
            o.write("model.json", dump(model_to_json(model)));
            run.finish(o, o.dir / "manifest.json", o.dir / "timing.json");
            out << "estimate: " << model.sync_events << " synchronized events, copula "
                << to_string(model.triplet.copula().family) << " -> " << es_out << '\n';
        } else if (simulate_cmd->parsed()) {
            sim.backtransform = parse_backtransform(sm_back);
            sim.redraw_null = !sm_no_redraw;
            if (!sm_history.empty()) sim.initial = parse_history(sm_history);
            sim.validate();
            Json cfg = {{"model", sm_model},
                        {"minutes", sim.length_minutes},
                        {"reps", sim.n_replications},
                        {"backtransform", to_string(sim.backtransform)},
                        {"s0", sim.s0},
                        {"v0", sim.v0},
                        {"redraw_null", sim.redraw_null},
                        {"history", sm_history},
                        {"reference", sm_reference},
                        {"session", sm_session}};
            Run run("simulate", cfg);
            run.seed(sim.seed);
            const auto model = load_model(sm_model);
            run.input(sm_model);
            const auto paths = simulate(model, sim, common.threads);
            Outputs o{sm_out, {}};
            Json summary = Json::array();
            for (std::size_t k = 0; k < paths.size(); ++k) {
                char tag[32];
                std::snprintf(tag, sizeof tag, "%03zu", k);
                o.write(std::string("path_") + tag + ".csv", path_csv(paths[k]));
                o.write(std::string("events_") + tag + ".csv", events_csv(paths[k]));
                summary.push_back({{"replication", k},
                                   {"events", paths[k].events.size()},
                                   {"null_events", paths[k].null_events},
                                   {"redraws", paths[k].redraws},
                                   {"fallback_events", paths[k].fallback_events},
                                   {"backtransform_fallbacks", paths[k].backtransform_fallbacks}});
            }
            Json sdoc;
            sdoc["format_version"] = format_version;
            sdoc["kind"] = "simulation-summary";
            sdoc["replications"] = summary;
            o.write("summary.json", dump(sdoc));
            if (!sm_reference.empty()) {
                const auto ref = load_aligned(sm_reference, sm_session);
                run.input(sm_reference);
                const auto report = validate_stylized_facts(paths, analyze(ref.r, ref.v));
                o.write("stylized.json", dump(stylized_to_json(report)));
            }
            run.finish(o, o.dir / "manifest.json", o.dir / "timing.json");
            out << "simulate: " << paths.size() << " replications of " << sim.length_minutes << " minutes -> "
                << sm_out << '\n';
        } else if (fpt_cmd->parsed()) {
            Run run("fpt", {{"model", fp_model},
                            {"rho", json_number(query.rho)},
                            {"psi", json_number(query.psi)},
                            {"horizon", query.horizon},
                            {"u", query.u},
                            {"method", fp_method},
                            {"paths", fp_paths},
                            {"history", fp_history},
                            {"memo_limit", fp_memo}});
            if (fp_method == "mc") run.seed(fp_seed);
            const auto model = load_model(fp_model);
            run.input(fp_model);
            if (!fp_history.empty()) {
                query.history = parse_history(fp_history);
            } else {
                const auto& w = model.initial_weights;
                if (w.empty()) throw Error(ErrorKind::parameter, "model has no pair frequencies; pass --history");
                const auto k = static_cast<int>(std::max_element(w.begin(), w.end()) - w.begin());
                const int sv = model.triplet.kernel_v().states();
                query.history = {{k / sv, k % sv, 0}};
            }
            FptResult res;
            if (fp_method == "mc") {
                res = fpt_survival_mc(model.triplet, query, fp_paths, fp_seed, common.threads);
            } else {
                FptOptions opt;
                opt.memo_limit = fp_memo;
                res = fpt_survival_recursive(model.triplet, query, opt);
            }
            Outputs o{fp_out, {}};
            o.write("fpt.csv", fpt_csv(res));
            o.write("fpt.json", dump(fpt_to_json(res, query)));
            run.finish(o, o.dir / "manifest.json", o.dir / "timing.json");
            for (const auto& w : res.warnings) err << "warning: " << w << '\n';
            out << "fpt: survival at horizon " << query.horizon << " = " << format_double(res.survival.back())
                << " -> " << fp_out << '\n';
        } else if (optimize_cmd->parsed()) {
            gspec.lambdas = parse_lambdas(op_lambdas);
            gspec.epsilon = op_eps;
            gspec.validate();
            Json cfg = {{"input", op_input},
                        {"session", op_session},
                        {"variable", op_variable},
                        {"states", gspec.state_counts},
                        {"lambdas", gspec.lambdas},
                        {"max_lag", gspec.max_lag},
                        {"reps", gspec.reps_per_point},
                        {"epsilon", op_eps ? Json(*op_eps) : Json(nullptr)},
                        {"bins", gspec.bins},
                        {"label", op_label}};
            Run run("optimize", cfg);
            run.seed(op_seed);
            const auto in = load_aligned(op_input, op_session);
            run.input(op_input);
            auto res = grid_search(op_variable == "r" ? in.r : in.v, gspec, op_seed, common.threads);
            res.label = op_label;
            res.variable = op_variable;
            const fs::path target(op_out);
            Outputs o{target.parent_path(), {}};
            const auto stem = target.stem().string();
            o.write(target.filename().string(), dump(opt_result_to_json(res)));
            run.finish(o, o.dir / (stem + ".manifest.json"), o.dir / (stem + ".timing.json"), opt_timing_to_json(res));
            out << "optimize: best s = " << res.best_states << ", lambda = " << format_double(res.best_lambda)
                << ", MAPE = " << format_double(res.best_mape) << "% -> " << op_out << '\n';
        }
    } catch (const Error& e) {
        print_error(err, to_string(e.kind()), e.what(), e.line());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        print_error(err, "internal", e.what());
        return 1;
    }
    return 0;
}

}  // namespace wismc
