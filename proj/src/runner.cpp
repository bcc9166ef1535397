#include "safeprob/runner.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "safeprob/properties.hpp"

namespace safeprob::runner {

namespace {

using nlohmann::json;

// Strict view over one JSON object: every key must be consumed or finish()
// reports it as unknown.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json* get(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string child(const std::string& key) const { return path_ + "." + key; }

    double number(const std::string& key, double fallback) {
        const json* v = get(key);
        if (!v) return fallback;
        return as_number(*v, child(key));
    }

    std::int64_t integer(const std::string& key, std::int64_t fallback) {
        const json* v = get(key);
        if (!v) return fallback;
        return as_integer(*v, child(key));
    }

    std::string text(const std::string& key, const std::string& fallback) {
        const json* v = get(key);
        if (!v) return fallback;
        if (!v->is_string()) throw ConfigError(child(key) + " must be a string");
        return v->get<std::string>();
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError("unknown field '" + child(it.key()) + "'");
    }

    static double as_number(const json& v, const std::string& path) {
        if (!v.is_number()) throw ConfigError(path + " must be a number");
        return v.get<double>();
    }

    static std::int64_t as_integer(const json& v, const std::string& path) {
        if (!v.is_number_integer()) throw ConfigError(path + " must be an integer");
        return v.get<std::int64_t>();
    }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

std::vector<double> number_list(const json& v, const std::string& path) {
    if (!v.is_array() || v.empty()) throw ConfigError(path + " must be a nonempty array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(Reader::as_number(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

// Either an explicit array or {"start", "stop", "num"}.
std::vector<double> grid(const json& v, const std::string& path) {
    if (v.is_array()) return number_list(v, path);
    Reader r(v, path);
    const double start = r.number("start", 0.0);
    const double stop = r.number("stop", 1.0);
    const std::int64_t num = r.integer("num", 2);
    r.finish();
    if (num < 1 || num > 100000) throw ConfigError(path + ".num must lie in [1, 100000]");
    return experiments::linspace(start, stop, static_cast<int>(num));
}

Eigen::Vector2d vec2(const json& v, const std::string& path) {
    const auto xs = number_list(v, path);
    if (xs.size() != 2) throw ConfigError(path + " must have 2 entries");
    return {xs[0], xs[1]};
}

template <int R, int C>
Eigen::Matrix<double, R, C> matrix(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != R)
        throw ConfigError(path + " must be a " + std::to_string(R) + "x" + std::to_string(C) + " array");
    Eigen::Matrix<double, R, C> m;
    for (int i = 0; i < R; ++i) {
        const auto row = number_list(v[i], path + "[" + std::to_string(i) + "]");
        if (static_cast<int>(row.size()) != C)
            throw ConfigError(path + "[" + std::to_string(i) + "] must have " + std::to_string(C) + " entries");
        for (int j = 0; j < C; ++j) m(i, j) = row[j];
    }
    return m;
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

experiments::BoundGridParams parse_bound_grid(Reader& r, const std::string& path) {
    experiments::BoundGridParams p;
    p.upper_bound = r.number("B", p.upper_bound);
    p.horizon = static_cast<int>(r.integer("K", p.horizon));
    p.delta = r.number("delta", p.delta);
    if (const json* v = r.get("lambda")) p.lambdas = grid(*v, r.child("lambda"));
    if (const json* v = r.get("sigma")) p.sigmas = grid(*v, r.child("sigma"));
    require(p.upper_bound > 0.0, path + ".B must be > 0");
    require(p.horizon >= 1, path + ".K must be >= 1");
    require(p.delta > 0.0, path + ".delta must be > 0");
    for (double l : p.lambdas) require(l >= 0.0, path + ".lambda values must be >= 0");
    for (double s : p.sigmas) require(s > 0.0, path + ".sigma values must be > 0");
    return p;
}

experiments::IssfParams parse_issf(Reader& r, const std::string& path) {
    experiments::IssfParams p;
    p.alpha = r.number("alpha", p.alpha);
    p.delta = r.number("delta", p.delta);
    p.sigma = r.number("sigma", p.sigma);
    p.h0 = r.number("h0", p.h0);
    if (const json* v = r.get("K")) {
        p.horizons.clear();
        for (double k : number_list(*v, r.child("K"))) {
            require(k >= 1.0 && k == std::floor(k) && k <= 1e6, r.child("K") + " entries must be integers >= 1");
            p.horizons.push_back(static_cast<int>(k));
        }
    }
    if (const json* v = r.get("epsilon")) p.epsilons = grid(*v, r.child("epsilon"));
    if (const json* v = r.get("distributions")) {
        if (!v->is_array() || v->empty()) throw ConfigError(r.child("distributions") + " must be a nonempty array");
        p.distributions.clear();
        for (const auto& d : *v) {
            if (!d.is_string()) throw ConfigError(r.child("distributions") + " entries must be strings");
            const auto name = d.get<std::string>();
            try {
                experiments::named_scalar_disturbance(name);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(r.child("distributions") + ": " + e.what());
            }
            p.distributions.push_back(name);
        }
    }
    require(p.alpha > 0.0 && p.alpha < 1.0, path + ".alpha must lie in (0, 1)");
    require(p.delta > 0.0, path + ".delta must be > 0");
    require(p.sigma > 0.0, path + ".sigma must be > 0");
    for (double e : p.epsilons) require(e >= 0.0, path + ".epsilon values must be >= 0");
    return p;
}

experiments::HlipParams parse_hlip(Reader& r, const std::string& path) {
    experiments::HlipParams p;
    if (const json* v = r.get("d_max")) p.d_max = number_list(*v, r.child("d_max"));
    if (const json* v = r.get("alpha")) p.alphas = number_list(*v, r.child("alpha"));
    p.duration = r.number("duration", p.duration);
    if (const json* v = r.get("gait")) {
        Reader g(*v, r.child("gait"));
        p.gait.z0 = g.number("z0", p.gait.z0);
        p.gait.t_ssp = g.number("t_ssp", p.gait.t_ssp);
        p.gait.t_dsp = g.number("t_dsp", p.gait.t_dsp);
        p.gait.gravity = g.number("gravity", p.gait.gravity);
        g.finish();
        try {
            p.gait.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(r.child("gait") + ": " + e.what());
        }
    }
    if (const json* v = r.get("matrices")) {
        Reader m(*v, r.child("matrices"));
        const json* a = m.get("A");
        const json* b = m.get("B");
        m.finish();
        require(a && b, r.child("matrices") + " needs both A and B");
        p.matrices = dynamics::HlipMatrices{matrix<6, 6>(*a, m.child("A")), matrix<6, 2>(*b, m.child("B"))};
    }
    if (const json* v = r.get("obstacle")) {
        Reader o(*v, r.child("obstacle"));
        if (const json* c = o.get("center")) p.obstacle.center = vec2(*c, o.child("center"));
        p.obstacle.radius = o.number("radius", p.obstacle.radius);
        o.finish();
    }
    if (const json* v = r.get("start")) p.start = vec2(*v, r.child("start"));
    if (const json* v = r.get("v_des")) p.v_des = vec2(*v, r.child("v_des"));
    p.input_cap = r.number("input_cap", p.input_cap);
    p.disturbance = r.text("disturbance", p.disturbance);
    p.retain_trajectories = static_cast<int>(r.integer("retain_trajectories", p.retain_trajectories));

    for (double d : p.d_max) require(d >= 0.0, path + ".d_max values must be >= 0");
    for (double a : p.alphas) require(a > 0.0 && a <= 1.0, path + ".alpha values must lie in (0, 1]");
    require(p.duration > 0.0, path + ".duration must be > 0");
    require(p.obstacle.radius > 0.0, path + ".obstacle.radius must be > 0");
    require(p.input_cap >= 0.0, path + ".input_cap must be >= 0");
    require(p.disturbance == "disks" || p.disturbance == "ball",
            path + ".disturbance must be \"disks\" or \"ball\"");
    require(p.retain_trajectories >= 0, path + ".retain_trajectories must be >= 0");
    require((p.start - p.obstacle.center).norm() > 0.0, path + ".start must differ from the obstacle centre");
    try {
        (void)p.horizon();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return p;
}

Scenario parse_scenario(const json& j, const std::string& path, std::optional<int>& trials_out) {
    Reader r(j, path);
    Scenario s;
    s.id = r.text("id", "");
    require(!s.id.empty(), path + ".id is required");
    require(s.id.find_first_of("/\\") == std::string::npos && s.id != "." && s.id != ".." &&
                s.id != "manifest",
            path + ".id must be a plain file stem");
    const std::string kind = r.text("kind", "");
    if (const json* v = r.get("seed")) {
        if (!v->is_number_unsigned()) throw ConfigError(r.child("seed") + " must be a nonnegative integer");
        s.seed = v->get<std::uint64_t>();
    }
    if (const json* v = r.get("trials")) {
        const auto t = Reader::as_integer(*v, r.child("trials"));
        require(t >= 1, r.child("trials") + " must be >= 1");
        trials_out = static_cast<int>(t);
    }
    static const json empty = json::object();
    const json* params = r.get("params");
    Reader pr(params ? *params : empty, r.child("params"));
    const std::string ppath = r.child("params");
    if (kind == "bound_grid") s.params = parse_bound_grid(pr, ppath);
    else if (kind == "issf_compare") s.params = parse_issf(pr, ppath);
    else if (kind == "hlip_case") s.params = parse_hlip(pr, ppath);
    else if (kind == "property_suite") s.params = PropertySuiteParams{};
    else
        throw ConfigError(r.child("kind") +
                          " must be one of bound_grid, issf_compare, hlip_case, property_suite");
    pr.finish();
    r.finish();
    return s;
}

std::string iso_utc(std::int64_t epoch) {
    const std::time_t t = static_cast<std::time_t>(epoch);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void log_line(std::ostream* log, const std::string& msg) {
    if (log) *log << "[safeprob] " << msg << '\n';
}

void emit(const std::filesystem::path& dir, const std::string& name, const std::string& text,
          RunReport& report, json& files) {
    try {
        experiments::write_text(dir / name, text);
    } catch (const std::runtime_error& e) {
        throw IoError(e.what());
    }
    report.files.push_back(name);
    files.push_back(name);
}

json audit_json(const experiments::AuditStats& a) {
    return {{"trajectories", a.trajectories},
            {"exits", a.exits},
            {"containment_violations", a.containment_violations},
            {"max_predictable_increment", a.trajectories ? a.max_predictable_increment : 0.0},
            {"max_martingale_step", a.trajectories ? a.max_martingale_step : 0.0}};
}

}  // namespace

std::string Scenario::kind() const {
    switch (params.index()) {
        case 0: return "bound_grid";
        case 1: return "issf_compare";
        case 2: return "hlip_case";
        default: return "property_suite";
    }
}

RunConfig parse_run_config(const json& j) {
    Reader r(j, "");
    RunConfig cfg;
    if (r.has("output_dir")) cfg.output_dir = r.text("output_dir", "");
    if (const json* v = r.get("seed")) {
        if (!v->is_number_unsigned()) throw ConfigError(".seed must be a nonnegative integer");
        cfg.seed = v->get<std::uint64_t>();
    }
    if (const json* v = r.get("trials")) {
        const auto t = Reader::as_integer(*v, ".trials");
        require(t >= 1, ".trials must be >= 1");
        cfg.trials = static_cast<int>(t);
    }
    if (const json* v = r.get("workers")) {
        const auto w = Reader::as_integer(*v, ".workers");
        require(w >= 0 && w <= 1024, ".workers must lie in [0, 1024]");
        cfg.workers = static_cast<unsigned>(w);
    }
    const json* list = r.get("scenarios");
    if (!list || !list->is_array() || list->empty())
        throw ConfigError(".scenarios must be a nonempty array");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < list->size(); ++i) {
        std::optional<int> trials;
        const std::string path = ".scenarios[" + std::to_string(i) + "]";
        Scenario s = parse_scenario((*list)[i], path, trials);
        if (!ids.insert(s.id).second) throw ConfigError(path + ".id '" + s.id + "' is not unique");
        if (trials) {
            if (auto* p = std::get_if<experiments::IssfParams>(&s.params)) p->trials = *trials;
            else if (auto* h = std::get_if<experiments::HlipParams>(&s.params)) h->trials = *trials;
            else throw ConfigError(path + ".trials is only valid for Monte Carlo scenarios");
        }
        cfg.scenarios.push_back(std::move(s));
    }
    r.finish();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read config " + path.string());
    std::stringstream buf;
    buf << f.rdbuf();
    json j;
    try {
        j = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_run_config(j);
}

std::uint64_t scenario_seed(const RunConfig& cfg, const Scenario& s) {
    return s.seed ? *s.seed : derive_seed(cfg.seed, hash_key(s.id));
}

std::string manifest_timestamp() {
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
        std::int64_t v = 0;
        const char* end = env + std::char_traits<char>::length(env);
        const auto res = std::from_chars(env, end, v);
        if (res.ec == std::errc{} && res.ptr == end && v >= 0) return iso_utc(v);
    }
    return iso_utc(0);
}

RunReport run(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream* log) {
    RunReport report;
    montecarlo::RunOptions options;
    options.workers = cfg.workers;

    json manifest = {{"tool", kToolName},
                     {"version", kToolVersion},
                     {"timestamp", manifest_timestamp()},
                     {"seed", cfg.seed},
                     {"scenarios", json::array()},
                     {"files", json::array()}};

    for (const auto& s : cfg.scenarios) {
        const std::uint64_t seed = scenario_seed(cfg, s);
        json entry = {{"id", s.id}, {"kind", s.kind()}, {"seed", seed}, {"files", json::array()}};
        json& files = entry["files"];
        log_line(log, "scenario " + s.id + " (" + s.kind() + ")");

        if (const auto* p = std::get_if<experiments::BoundGridParams>(&s.params)) {
            const auto table = experiments::bound_grid(*p);
            emit(out_dir, s.id + ".csv", table.to_csv(), report, files);
            emit(out_dir, s.id + ".json", table.to_json().dump(1) + "\n", report, files);
            entry["rows"] = table.size();
            entry["metadata"] = {{"B", p->upper_bound}, {"K", p->horizon}, {"delta", p->delta},
                                 {"n_lambda", p->lambdas.size()}, {"n_sigma", p->sigmas.size()}};
        } else if (const auto* p = std::get_if<experiments::IssfParams>(&s.params)) {
            auto params = *p;
            if (cfg.trials) params.trials = *cfg.trials;
            const auto out = experiments::issf_compare(params, seed, options);
            emit(out_dir, s.id + ".csv", out.table.to_csv(), report, files);
            emit(out_dir, s.id + ".json", out.table.to_json().dump(1) + "\n", report, files);
            entry["rows"] = out.table.size();
            entry["trials"] = params.trials;
            entry["metadata"] = {{"alpha", params.alpha},
                                 {"delta", params.delta},
                                 {"sigma", params.sigma},
                                 {"h0", params.h0},
                                 {"h0_source", "artifact default"},
                                 {"K", params.horizons},
                                 {"distributions", params.distributions},
                                 {"audit", audit_json(out.audit)}};
        } else if (const auto* p = std::get_if<experiments::HlipParams>(&s.params)) {
            auto params = *p;
            if (cfg.trials) params.trials = *cfg.trials;
            const auto out = experiments::hlip_case(params, seed, options);
            emit(out_dir, s.id + ".csv", out.table.to_csv(), report, files);
            emit(out_dir, s.id + ".json", out.table.to_json().dump(1) + "\n", report, files);
            emit(out_dir, s.id + "_trajectories.csv", out.trajectories.to_csv(), report, files);
            entry["rows"] = out.table.size();
            entry["trials"] = params.trials;
            entry["metadata"] = {
                {"K", params.horizon()},
                {"steps_per_second", params.gait.step_rate()},
                {"gait", {{"z0", params.gait.z0}, {"t_ssp", params.gait.t_ssp},
                          {"t_dsp", params.gait.t_dsp}, {"gravity", params.gait.gravity}}},
                {"matrices", params.matrices ? "config" : "gait"},
                {"obstacle", {{"center", {params.obstacle.center[0], params.obstacle.center[1]}},
                              {"radius", params.obstacle.radius}}},
                {"v_des", {params.v_des[0], params.v_des[1]}},
                {"geometry_source", "artifact default"},
                {"disturbance", params.disturbance},
                {"logged_steps", out.logged_steps},
                {"max_constraint_violation", out.max_constraint_violation},
                {"audit", audit_json(out.audit)}};
        } else {
            const auto rows = properties::run_all(seed, options);
            const auto table = properties::to_table(rows);
            emit(out_dir, s.id + ".csv", table.to_csv(), report, files);
            emit(out_dir, s.id + ".json", table.to_json().dump(1) + "\n", report, files);
            entry["rows"] = table.size();
            json failed = json::array();
            for (const auto& r : rows)
                if (!r.passed) failed.push_back(r.name);
            entry["metadata"] = {{"failed", failed}};
            if (!failed.empty()) {
                report.property_failure = true;
                log_line(log, "property failures: " + failed.dump());
            }
        }
        for (const auto& f : files) manifest["files"].push_back(f);
        manifest["scenarios"].push_back(std::move(entry));
    }
    json ignored = json::array();
    emit(out_dir, "manifest.json", manifest.dump(2) + "\n", report, ignored);
    return report;
}

}  // namespace safeprob::runner
