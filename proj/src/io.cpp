#include "wismc/io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "wismc/error.hpp"

namespace wismc {

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return {buf, res.ptr};
}

Json json_number(double x) {
    if (std::isfinite(x)) return x;
    return format_double(x);
}

double number_from_json(const Json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    throw Error(ErrorKind::parse, "expected a number");
}

namespace {

template <typename T>
T get(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw Error(ErrorKind::parse, std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse, std::string("field '") + key + "': " + e.what());
    }
}

void check_kind(const Json& j, const char* kind) {
    if (get<int>(j, "format_version") != format_version) {
        throw Error(ErrorKind::parse, "unsupported format_version");
    }
    if (get<std::string>(j, "kind") != kind) throw Error(ErrorKind::parse, std::string("expected a ") + kind + " document");
}

Json header(const char* kind) {
    Json j;
    j["format_version"] = format_version;
    j["kind"] = kind;
    return j;
}

Json doubles(const std::vector<double>& x) {
    Json a = Json::array();
    for (double v : x) a.push_back(json_number(v));
    return a;
}


}  // namespace

Json grid_to_json(const StateGrid& grid) {
    Json j;
    j["edges"] = grid.edges;
    j["representatives"] = grid.representatives;
    return j;
}

StateGrid grid_from_json(const Json& j) {
    return StateGrid(get<std::vector<double>>(j, "edges"), get<std::vector<double>>(j, "representatives"));
}

Json kernel_to_json(const IndexedKernel& k) {
    Json j = header("indexed-kernel");
    j["grid"] = grid_to_json(k.grid());
    j["index"] = {{"lambda", k.params().lambda},
                  {"history_m", k.params().history_m},
                  {"edges", k.params().index_edges},
                  {"bins", k.bins()}};
    j["states"] = k.states();
    j["t_max"] = k.t_max();
    j["layout"] = "[((i * bins + x) * states + j) * t_max + (t - 1)]";
    j["counts"] = k.counts();
    std::vector<double> pmf;
    pmf.reserve(k.counts().size());
    for (int i = 0; i < k.states(); ++i) {
        for (int x = 0; x < k.bins(); ++x) {
            for (int s = 0; s < k.states(); ++s) {
                for (int t = 1; t <= k.t_max(); ++t) pmf.push_back(k.pmf(i, x, s, t));
            }
        }
    }
    j["pmf"] = pmf;
    return j;
}

IndexedKernel kernel_from_json(const Json& j) {
    check_kind(j, "indexed-kernel");
    const auto& idx = j.at("index");
    IndexParams p;
    p.lambda = get<double>(idx, "lambda");
    p.history_m = get<std::size_t>(idx, "history_m");
    p.index_edges = get<std::vector<double>>(idx, "edges");
    p.bins = get<int>(idx, "bins");
    return IndexedKernel(grid_from_json(j.at("grid")), p, get<int>(j, "t_max"),
                         get<std::vector<std::int64_t>>(j, "counts"));
}

Json cond_wait_to_json(const CondWaitDist& cw) {
    Json j = header("conditional-waiting-time");
    j["states_j"] = cw.states_j();
    j["states_v"] = cw.states_v();
    j["bins_j"] = cw.bins_j();
    j["bins_v"] = cw.bins_v();
    j["t_max"] = cw.t_max();
    j["layout"] = "[(((i * states_v + v) * bins_j + x) * bins_v + w) * t_max + (t - 1)]";
    j["counts"] = cw.counts();
    return j;
}

CondWaitDist cond_wait_from_json(const Json& j) {
    check_kind(j, "conditional-waiting-time");
    return CondWaitDist(get<int>(j, "states_j"), get<int>(j, "states_v"), get<int>(j, "bins_j"),
                        get<int>(j, "bins_v"), get<int>(j, "t_max"), get<std::vector<std::int64_t>>(j, "counts"));
}

Json copula_to_json(const CopulaSpec& c) {
    Json j;
    j["family"] = to_string(c.family);
    j["rho"] = c.rho;
    j["theta"] = c.theta;
    j["nu"] = c.nu;
    j["fitted_from"] = {{"n", c.fitted_from.n},
                        {"kendall_tau", c.fitted_from.kendall_tau},
                        {"method", c.fitted_from.method}};
    return j;
}

CopulaSpec copula_from_json(const Json& j) {
    CopulaSpec c;
    c.family = parse_copula_family(get<std::string>(j, "family"));
    c.rho = get<double>(j, "rho");
    c.theta = get<double>(j, "theta");
    c.nu = get<int>(j, "nu");
    const auto& f = j.at("fitted_from");
    c.fitted_from.n = get<std::size_t>(f, "n");
    c.fitted_from.kendall_tau = get<double>(f, "kendall_tau");
    c.fitted_from.method = get<std::string>(f, "method");
    c.validate();
    return c;
}

Json triplet_to_json(const TripletKernel& tk) {
    Json j = header("triplet-kernel");
    j["kernel_j"] = kernel_to_json(tk.kernel_j());
    j["kernel_v"] = kernel_to_json(tk.kernel_v());
    j["cond_wait"] = cond_wait_to_json(tk.cond_wait());
    j["copula"] = copula_to_json(tk.copula());
    j["signs"] = {{"p_j", tk.signs().p_j}, {"p_v", tk.signs().p_v}};
    return j;
}

TripletKernel triplet_from_json(const Json& j) {
    check_kind(j, "triplet-kernel");
    SignModel s;
    s.p_j = get<double>(j.at("signs"), "p_j");
    s.p_v = get<double>(j.at("signs"), "p_v");
    return TripletKernel(kernel_from_json(j.at("kernel_j")), kernel_from_json(j.at("kernel_v")),
                         cond_wait_from_json(j.at("cond_wait")), copula_from_json(j.at("copula")), s);
}

Json fit_config_to_json(const FitConfig& c) {
    Json j;
    j["states_r"] = c.states_j;
    j["states_v"] = c.states_v;
    j["lambda_r"] = c.lambda_j;
    j["lambda_v"] = c.lambda_v;
    j["bins"] = c.bins;
    j["history_m"] = c.history_m;
    j["copula"] = to_string(c.copula);
    j["nu"] = c.nu;
    j["t_max"] = c.t_max ? Json(*c.t_max) : Json(nullptr);
    j["t_max_quantile"] = c.t_max_quantile;
    return j;
}

FitConfig fit_config_from_json(const Json& j) {
    FitConfig c;
    c.states_j = get<int>(j, "states_r");
    c.states_v = get<int>(j, "states_v");
    c.lambda_j = get<double>(j, "lambda_r");
    c.lambda_v = get<double>(j, "lambda_v");
    c.bins = get<int>(j, "bins");
    c.history_m = get<std::size_t>(j, "history_m");
    c.copula = parse_copula_family(get<std::string>(j, "copula"));
    c.nu = get<int>(j, "nu");
    if (j.contains("t_max") && !j.at("t_max").is_null()) c.t_max = get<int>(j, "t_max");
    c.t_max_quantile = get<double>(j, "t_max_quantile");
    return c;
}

Json model_to_json(const FittedModel& m) {
    Json j = header("wismc-model");
    j["config"] = fit_config_to_json(m.config);
    j["n_returns"] = m.n_returns;
    j["sync_events"] = m.sync_events;
    j["triplet"] = triplet_to_json(m.triplet);
    j["inverse_r"] = m.inverse_j.samples;
    j["inverse_v"] = m.inverse_v.samples;
    j["initial_weights"] = m.initial_weights;
    return j;
}

FittedModel model_from_json(const Json& j) {
    check_kind(j, "wismc-model");
    FittedModel m;
    m.config = fit_config_from_json(j.at("config"));
    m.n_returns = get<std::size_t>(j, "n_returns");
    m.sync_events = get<std::size_t>(j, "sync_events");
    m.triplet = triplet_from_json(j.at("triplet"));
    m.inverse_j.samples = get<std::vector<std::vector<double>>>(j, "inverse_r");
    m.inverse_v.samples = get<std::vector<std::vector<double>>>(j, "inverse_v");
    m.initial_weights = get<std::vector<double>>(j, "initial_weights");
    const auto pairs = static_cast<std::size_t>(m.triplet.kernel_j().states()) *
                       static_cast<std::size_t>(m.triplet.kernel_v().states());
    if (!m.initial_weights.empty() && m.initial_weights.size() != pairs) {
        throw Error(ErrorKind::parse, "initial_weights has the wrong size");
    }
    return m;
}

namespace {

Json descriptive_json(const DescriptiveStats& s) {
    return {{"n", s.n},
            {"mean", json_number(s.mean)},
            {"median", json_number(s.median)},
            {"standard_deviation", json_number(s.standard_deviation)},
            {"skewness", json_number(s.skewness)},
            {"kurtosis", json_number(s.kurtosis)},
            {"kurtosis_convention", s.kurtosis_convention}};
}

Json jb_json(const JarqueBera& jb) {
    return {{"statistic", json_number(jb.statistic)}, {"p_value", json_number(jb.p_value)}, {"reject", jb.reject}};
}

}  // namespace

Json contingency_to_json(const ContingencyTable& t) {
    Json j;
    j["row_edges"] = doubles(t.row_edges);
    j["col_edges"] = doubles(t.col_edges);
    j["observed"] = t.observed;
    Json e = Json::array();
    for (const auto& row : t.expected) e.push_back(doubles(row));
    j["expected"] = e;
    j["chi2_statistic"] = json_number(t.chi2_statistic);
    j["degrees_of_freedom"] = t.degrees_of_freedom;
    j["p_value"] = json_number(t.p_value);
    j["dropped_rows"] = t.dropped_rows;
    j["dropped_cols"] = t.dropped_cols;
    j["low_expected_cells"] = t.low_expected_cells;
    j["warnings"] = t.warnings;
    return j;
}

Json battery_to_json(const Battery& b) {
    Json j = header("battery");
    j["n_returns"] = b.n_returns;
    j["price"] = {{"descriptive", descriptive_json(b.r_stats)},
                  {"jarque_bera", jb_json(b.r_jb)},
                  {"acf_abs", doubles(b.acf_abs_r)}};
    j["volume"] = {{"descriptive", descriptive_json(b.v_stats)},
                   {"jarque_bera", jb_json(b.v_jb)},
                   {"acf_abs", doubles(b.acf_abs_v)}};
    Json cross = Json::array();
    for (const auto& c : b.cross) {
        cross.push_back({{"pair", c.name}, {"rho", json_number(c.rho)}, {"p_value", json_number(c.p_value)}, {"n", c.n}});
    }
    j["cross_correlation"] = cross;
    j["contingency"] = {{"price", b.contingency_r ? contingency_to_json(*b.contingency_r) : Json(nullptr)},
                        {"volume", b.contingency_v ? contingency_to_json(*b.contingency_v) : Json(nullptr)}};
    j["warnings"] = b.warnings;
    return j;
}

Json fpt_to_json(const FptResult& r, const FptQuery& q) {
    Json j = header("fpt");
    Json hist = Json::array();
    for (const auto& h : q.history) hist.push_back({h.j_state, h.v_state, h.time});
    j["query"] = {{"rho", json_number(q.rho)},
                  {"psi", json_number(q.psi)},
                  {"horizon", q.horizon},
                  {"u", q.u},
                  {"history", hist}};
    j["method"] = r.method;
    j["paths"] = r.paths;
    j["memo_entries"] = r.memo_entries;
    j["survival"] = doubles(r.survival);
    j["standard_error"] = doubles(r.standard_error);
    j["lower"] = doubles(r.lower);
    j["upper"] = doubles(r.upper);
    j["warnings"] = r.warnings;
    return j;
}

Json opt_result_to_json(const OptResult& r) {
    Json j = header("optimization");
    j["label"] = r.label;
    j["variable"] = r.variable;
    Json recs = Json::array();
    for (const auto& rec : r.records) {
        Json e = {{"states", rec.states}, {"lambda", rec.lambda}, {"mape", json_number(rec.mape)},
                  {"failed", rec.failed}};
        if (rec.failed) e["error"] = rec.error;
        recs.push_back(e);
    }
    j["records"] = recs;
    j["best"] = {{"states", r.best_states}, {"lambda", r.best_lambda}, {"mape", json_number(r.best_mape)}};
    j["stopped_early"] = r.stopped_early;
    return j;
}

OptResult opt_result_from_json(const Json& j) {
    check_kind(j, "optimization");
    OptResult r;
    r.label = get<std::string>(j, "label");
    r.variable = get<std::string>(j, "variable");
    for (const auto& e : j.at("records")) {
        OptRecord rec;
        rec.states = get<int>(e, "states");
        rec.lambda = get<double>(e, "lambda");
        rec.mape = number_from_json(e.at("mape"));
        rec.failed = get<bool>(e, "failed");
        if (e.contains("error")) rec.error = get<std::string>(e, "error");
        r.records.push_back(rec);
    }
    const auto& best = j.at("best");
    r.best_states = get<int>(best, "states");
    r.best_lambda = get<double>(best, "lambda");
    r.best_mape = number_from_json(best.at("mape"));
    r.stopped_early = get<bool>(j, "stopped_early");
    return r;
}

Json opt_timing_to_json(const OptResult& r) {
    Json j = header("optimization-timing");
    Json recs = Json::array();
    for (const auto& rec : r.records) {
        recs.push_back({{"states", rec.states}, {"lambda", rec.lambda}, {"runtime_seconds", rec.runtime_seconds}});
    }
    j["records"] = recs;
    return j;
}

Json stylized_to_json(const StylizedReport& report) {
    Json j = header("stylized-facts");
    j["reference"] = battery_to_json(report.reference);
    Json syn = Json::array();
    for (const auto& b : report.synthetic) syn.push_back(battery_to_json(b));
    j["synthetic"] = syn;
    return j;
}

std::string fpt_csv(const FptResult& r) {
    std::string out = "t,survival,lower,upper\n";
    for (std::size_t t = 0; t < r.survival.size(); ++t) {
        out += std::to_string(t) + ',' + format_double(r.survival[t]) + ',';
        if (t < r.lower.size()) out += format_double(r.lower[t]);
        out += ',';
        if (t < r.upper.size()) out += format_double(r.upper[t]);
        out += '\n';
    }
    return out;
}

std::string path_csv(const SynthPath& p) {
    std::string out = "minute,r,v,S,V\n";
    for (std::size_t k = 0; k < p.r.size(); ++k) {
        out += std::to_string(k) + ',' + format_double(p.r[k]) + ',' + format_double(p.v[k]) + ',' +
               format_double(p.S[k]) + ',' + format_double(p.V[k]) + '\n';
    }
    return out;
}

std::string events_csv(const SynthPath& p) {
    std::string out = "n,T,J_state,V_state,bJ,bV,xbin,wbin\n";
    for (const auto& e : p.events) {
        out += std::to_string(e.n) + ',' + std::to_string(e.time) + ',' + std::to_string(e.j_state) + ',' +
               std::to_string(e.v_state) + ',' + std::to_string(e.b_j) + ',' + std::to_string(e.b_v) + ',' +
               std::to_string(e.x_bin) + ',' + std::to_string(e.w_bin) + '\n';
    }
    return out;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json parse_json(std::string_view text) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::parse, std::string("invalid JSON: ") + e.what());
    }
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

void save_model(const std::filesystem::path& path, const FittedModel& model) { write_text(path, dump(model_to_json(model))); }

FittedModel load_model(const std::filesystem::path& path) {
    try {
        return model_from_json(parse_json(read_text(path)));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse, std::string("malformed model document: ") + e.what());
    }
}

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorKind::resource, "SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int k = 0; k < len; ++k) {
        out.push_back(hex[md[k] >> 4]);
        out.push_back(hex[md[k] & 15]);
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text(path)); }

}  // namespace wismc
