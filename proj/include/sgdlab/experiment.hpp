#pragma once

// Experiment runner: config parsing (sectioned text or the JSON equivalent),
// schema validation, dispatch to the simulators/estimators, and CSV/JSON
// artifact emission.
//
// Config errors (unknown keys, bad values, schema violations) throw
// ConfigError before anything is written; the CLI maps them to exit code 2
// and runtime/numerical failures to exit code 3.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgdlab/analysis.hpp"
#include "sgdlab/builtins.hpp"
#include "sgdlab/dynamics.hpp"
#include "sgdlab/game.hpp"
#include "sgdlab/kernels.hpp"

namespace sgdlab::experiment {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config value model: scalars and (possibly nested) lists, grouped in sections
// ---------------------------------------------------------------------------

struct Value {
    bool is_list = false;
    std::string scalar;
    std::vector<Value> list;

    double as_double() const {
        try {
            size_t pos = 0;
            const double v = std::stod(scalar, &pos);
            if (pos != scalar.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw ConfigError("expected a number, got '" + scalar + "'");
        }
    }
    std::int64_t as_int() const {
        try {
            size_t pos = 0;
            const long long v = std::stoll(scalar, &pos);
            if (pos != scalar.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw ConfigError("expected an integer, got '" + scalar + "'");
        }
    }
    std::vector<double> as_double_list() const {
        if (!is_list) throw ConfigError("expected a list, got '" + scalar + "'");
        std::vector<double> out;
        for (const auto& v : list) out.push_back(v.as_double());
        return out;
    }
    std::vector<std::vector<double>> as_matrix() const {
        if (!is_list) throw ConfigError("expected a list of lists");
        std::vector<std::vector<double>> out;
        for (const auto& row : list) out.push_back(row.as_double_list());
        return out;
    }
};

using Section = std::map<std::string, Value>;
using ConfigTree = std::map<std::string, Section>;

namespace detail {

inline std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline Value parse_value(const std::string& text) {
    const std::string t = trim(text);
    Value v;
    if (t.empty() || t[0] != '[') {
        v.scalar = t;
        return v;
    }
    v.is_list = true;
    // split on top-level commas inside the brackets
    if (t.back() != ']') throw ConfigError("unterminated list: " + t);
    int depth = 0;
    std::string cur;
    for (size_t i = 1; i + 1 < t.size() || (i < t.size() && depth > 0); ++i) {
        const char c = t[i];
        if (c == '[') ++depth;
        if (c == ']') {
            if (depth == 0) break;
            --depth;
        }
        if (c == ',' && depth == 0) {
            if (!trim(cur).empty()) v.list.push_back(parse_value(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty()) v.list.push_back(parse_value(cur));
    return v;
}

} // namespace detail

// Sectioned `key = value` text; `[section]` headers, '#' comments, values are
// scalars or bracketed (nestable) lists. Keys before any header land in "".
inline ConfigTree parse_config_text(const std::string& text) {
    ConfigTree tree;
    std::string section;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = detail::trim(line.substr(1, line.size() - 2));
            tree[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (tree[section].count(key))
            throw ConfigError("duplicate key '" + key + "' in section [" + section + "]");
        tree[section][key] = detail::parse_value(line.substr(eq + 1));
    }
    return tree;
}

namespace detail {

inline Value from_json(const nlohmann::json& j) {
    Value v;
    if (j.is_array()) {
        v.is_list = true;
        for (const auto& e : j) v.list.push_back(from_json(e));
    } else if (j.is_string()) {
        v.scalar = j.get<std::string>();
    } else if (j.is_boolean()) {
        v.scalar = j.get<bool>() ? "true" : "false";
    } else {
        std::ostringstream os;
        os.precision(17);
        os << j;
        v.scalar = os.str();
    }
    return v;
}

} // namespace detail

// JSON equivalent: an object of section objects with the same keys.
inline ConfigTree parse_config_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid JSON config: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("JSON config must be an object of sections");
    ConfigTree tree;
    for (const auto& [sec, body] : j.items()) {
        if (!body.is_object()) throw ConfigError("section '" + sec + "' must be an object");
        for (const auto& [key, val] : body.items()) tree[sec][key] = detail::from_json(val);
    }
    return tree;
}

// ---------------------------------------------------------------------------
// Game file format (structured text, CLI-owned)
// ---------------------------------------------------------------------------

inline Game game_from_tree(const Section& s) {
    auto need = [&](const std::string& k) -> const Value& {
        const auto it = s.find(k);
        if (it == s.end()) throw ConfigError("game: missing key '" + k + "'");
        return it->second;
    };
    Game g;
    g.num_players = static_cast<int>(need("players").as_int());
    const auto acts = need("actions").as_double_list();
    for (double a : acts) g.action_counts.push_back(static_cast<int>(a));
    for (int i = 0; i < g.num_players; ++i) {
        const std::string key = "payoffs_" + std::to_string(i + 1);
        g.payoffs.push_back(need(key).as_double_list());
    }
    for (const auto& [k, v] : s) {
        (void)v;
        if (k != "players" && k != "actions" && k.rfind("payoffs_", 0) != 0)
            throw ConfigError("game: unknown key '" + k + "'");
    }
    try {
        g.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("game: ") + e.what());
    }
    return g;
}

inline Game load_game_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read game file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto tree = parse_config_text(ss.str());
    for (const auto& [sec, body] : tree) {
        (void)body;
        if (!sec.empty()) throw ConfigError("game file must not contain sections");
    }
    const auto it = tree.find("");
    return game_from_tree(it == tree.end() ? Section{} : it->second);
}

inline std::string export_game_text(const Game& g) {
    std::ostringstream os;
    os.precision(17);
    os << "players = " << g.num_players << "\n";
    os << "actions = [";
    for (int i = 0; i < g.num_players; ++i) os << (i ? ", " : "") << g.action_counts[i];
    os << "]\n";
    for (int i = 0; i < g.num_players; ++i) {
        os << "payoffs_" << (i + 1) << " = [";
        for (size_t a = 0; a < g.payoffs[i].size(); ++a) os << (a ? ", " : "") << g.payoffs[i][a];
        os << "]\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Schema + assembly
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    Game game;
    std::string game_name;
    std::optional<HarmonicStructure> structure; // when the game carries one
    RegularizerSet regs;
    std::optional<NoiseModel> noise;
    SimConfig sim;
    std::string type;
    Section params; // experiment-specific keys
    std::string out_dir = "out";
    std::string config_text;
    std::uint64_t config_hash = 0;
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

inline void check_keys(const Section& s, const std::string& name,
                       const std::set<std::string>& allowed,
                       const std::vector<std::string>& prefixes = {}) {
    for (const auto& [k, v] : s) {
        (void)v;
        if (allowed.count(k)) continue;
        bool ok = false;
        for (const auto& p : prefixes)
            if (k.rfind(p, 0) == 0) ok = true;
        if (!ok) throw ConfigError("unknown key '" + k + "' in section [" + name + "]");
    }
}

inline const Value* find(const Section& s, const std::string& k) {
    const auto it = s.find(k);
    return it == s.end() ? nullptr : &it->second;
}

} // namespace detail

inline ExperimentConfig build_experiment(const ConfigTree& tree, const std::string& raw_text) {
    static const std::set<std::string> sections = {"game", "kernel", "noise",
                                                   "sim",  "experiment", "output"};
    for (const auto& [sec, body] : tree) {
        (void)body;
        if (!sections.count(sec)) throw ConfigError("unknown section [" + sec + "]");
    }
    ExperimentConfig ec;
    ec.config_text = raw_text;
    ec.config_hash = detail::fnv1a(raw_text);

    // --- game ---
    const auto git = tree.find("game");
    if (git == tree.end()) throw ConfigError("missing [game] section");
    const Section& gs = git->second;
    detail::check_keys(gs, "game", {"source", "name", "params", "matrix", "path", "players", "actions"},
                       {"payoffs_"});
    const Value* src = detail::find(gs, "source");
    const std::string source = src ? src->scalar : "builtin";
    if (source == "builtin") {
        const Value* nv = detail::find(gs, "name");
        if (!nv) throw ConfigError("game: builtin source needs 'name'");
        ec.game_name = nv->scalar;
        if (ec.game_name == "harmonic_2x2x2") {
            const Value* pv = detail::find(gs, "params");
            if (!pv) throw ConfigError("game: harmonic_2x2x2 needs params = [a,b,c,d,delta]");
            const auto p = pv->as_double_list();
            if (p.size() != 5) throw ConfigError("game: harmonic_2x2x2 needs 5 params");
            ec.game = make_harmonic_2x2x2(p[0], p[1], p[2], p[3], p[4]);
            std::vector<std::vector<double>> unit(3, std::vector<double>(2, 1.0));
            ec.structure = harmonic_structure(unit);
        } else if (ec.game_name == "zero_sum") {
            const Value* mv = detail::find(gs, "matrix");
            if (!mv) throw ConfigError("game: zero_sum needs 'matrix'");
            const auto rows = mv->as_matrix();
            Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
            for (size_t r = 0; r < rows.size(); ++r) {
                if (rows[r].size() != rows[0].size()) throw ConfigError("game: ragged matrix");
                for (size_t c = 0; c < rows[r].size(); ++c)
                    m(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
            }
            auto zs = make_zero_sum(m);
            ec.game = std::move(zs.game);
            ec.structure = std::move(zs.structure);
        } else if (auto bg = builtins::by_name(ec.game_name)) {
            ec.game = std::move(*bg);
            if (ec.game_name == "matching_pennies") {
                Matrix m(2, 2);
                m(0, 0) = 1;
                m(0, 1) = -1;
                m(1, 0) = -1;
                m(1, 1) = 1;
                ec.structure = make_zero_sum(m).structure;
            }
        } else {
            throw ConfigError("game: unknown builtin '" + ec.game_name + "'");
        }
    } else if (source == "inline") {
        Section body = gs;
        body.erase("source");
        ec.game = game_from_tree(body);
        ec.game_name = "inline";
    } else if (source == "file") {
        const Value* pv = detail::find(gs, "path");
        if (!pv) throw ConfigError("game: file source needs 'path'");
        ec.game = load_game_file(pv->scalar);
        ec.game_name = pv->scalar;
    } else {
        throw ConfigError("game: unknown source '" + source + "'");
    }
    ec.game.validate();

    // --- kernel ---
    ec.regs = RegularizerSet::uniform(ec.game, Kernel::entropic());
    if (const auto kit = tree.find("kernel"); kit != tree.end()) {
        detail::check_keys(kit->second, "kernel", {"all"}, {"player_"});
        try {
            if (const Value* av = detail::find(kit->second, "all"))
                ec.regs = RegularizerSet::uniform(ec.game, Kernel::parse(av->scalar));
            for (int i = 0; i < ec.game.num_players; ++i)
                if (const Value* pv = detail::find(kit->second, "player_" + std::to_string(i + 1)))
                    ec.regs.kernels[i] = Kernel::parse(pv->scalar);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("kernel: ") + e.what());
        }
    }

    // --- noise ---
    std::string ntype = "none";
    const Section* ns = nullptr;
    if (const auto nit = tree.find("noise"); nit != tree.end()) {
        ns = &nit->second;
        detail::check_keys(*ns, "noise", {"type", "sigma", "matrix"}, {"sigma_"});
        if (const Value* tv = detail::find(*ns, "type")) ntype = tv->scalar;
    }
    try {
        if (ntype == "none") {
            ec.noise = NoiseModel::none(ec.game);
        } else if (ntype == "uncorrelated") {
            std::vector<std::vector<double>> sig(ec.game.num_players);
            const Value* sv = ns ? detail::find(*ns, "sigma") : nullptr;
            for (int i = 0; i < ec.game.num_players; ++i) {
                if (const Value* pv = ns ? detail::find(*ns, "sigma_" + std::to_string(i + 1)) : nullptr)
                    sig[i] = pv->as_double_list();
                else if (sv && sv->is_list)
                    sig[i] = sv->as_double_list();
                else if (sv)
                    sig[i].assign(ec.game.action_counts[i], sv->as_double());
                else
                    throw ConfigError("noise: uncorrelated needs 'sigma'");
            }
            ec.noise = NoiseModel::uncorrelated(ec.game, std::move(sig));
        } else if (ntype == "full") {
            const Value* mv = ns ? detail::find(*ns, "matrix") : nullptr;
            if (!mv) throw ConfigError("noise: full needs 'matrix'");
            const auto rows = mv->as_matrix();
            Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
            for (size_t r = 0; r < rows.size(); ++r)
                for (size_t c = 0; c < rows[r].size(); ++c)
                    m(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
            ec.noise = NoiseModel::full_constant(ec.game, std::move(m));
        } else {
            throw ConfigError("noise: unknown type '" + ntype + "'");
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("noise: ") + e.what());
    }

    // --- sim ---
    if (const auto sit = tree.find("sim"); sit != tree.end()) {
        const Section& ss = sit->second;
        detail::check_keys(ss, "sim", {"step", "horizon", "stride", "seed", "scheme"});
        if (const Value* v = detail::find(ss, "step")) ec.sim.step = v->as_double();
        if (const Value* v = detail::find(ss, "horizon")) ec.sim.horizon = v->as_double();
        if (const Value* v = detail::find(ss, "stride"))
            ec.sim.sample_stride = static_cast<int>(v->as_int());
        if (const Value* v = detail::find(ss, "seed"))
            ec.sim.seed = static_cast<std::uint64_t>(v->as_int());
        if (const Value* v = detail::find(ss, "scheme")) {
            if (v->scalar == "euler_maruyama")
                ec.sim.scheme = Scheme::euler_maruyama;
            else if (v->scalar == "rk4")
                ec.sim.scheme = Scheme::rk4;
            else
                throw ConfigError("sim: unknown scheme '" + v->scalar + "'");
        }
    }
    try {
        ec.sim.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("sim: ") + e.what());
    }

    // --- experiment ---
    const auto eit = tree.find("experiment");
    if (eit == tree.end()) throw ConfigError("missing [experiment] section");
    const Section& es = eit->second;
    const Value* tv = detail::find(es, "type");
    if (!tv) throw ConfigError("experiment: missing 'type'");
    ec.type = tv->scalar;
    struct TypeSchema {
        std::set<std::string> keys;
        std::vector<std::string> prefixes;
    };
    static const std::map<std::string, TypeSchema> allowed = {
        {"simulate", {{"type"}, {"x0_"}}},
        {"hitting_time", {{"type", "eps", "player", "runs"}, {"x0_"}}},
        {"stability", {{"type", "level", "eps_prob", "runs"}, {"face_"}}},
        {"energy", {{"type", "level", "runs", "curve"}, {"x0_", "weights_"}}},
        {"club", {{"type", "tol"}, {}}},
        {"harmonic_check", {{"type", "tol"}, {"weights_"}}},
        {"srd_compare", {{"type", "runs", "threshold", "variants"}, {"x0_"}}},
    };
    const auto ait = allowed.find(ec.type);
    if (ait == allowed.end()) throw ConfigError("experiment: unknown type '" + ec.type + "'");
    detail::check_keys(es, "experiment", ait->second.keys, ait->second.prefixes);
    ec.params = es;

    // --- output ---
    if (const auto oit = tree.find("output"); oit != tree.end()) {
        detail::check_keys(oit->second, "output", {"dir"});
        if (const Value* v = detail::find(oit->second, "dir")) ec.out_dir = v->scalar;
    }
    return ec;
}

inline ExperimentConfig load_experiment(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    const bool json = path.size() > 5 && path.compare(path.size() - 5, 5, ".json") == 0;
    return build_experiment(json ? parse_config_json(text) : parse_config_text(text), text);
}

// ---------------------------------------------------------------------------
// Artifact helpers
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << content;
}

inline nlohmann::json hitting_json(const HittingStats& h) {
    nlohmann::json j;
    j["n_runs"] = h.n_runs;
    j["n_hit"] = h.n_hit;
    j["censored"] = h.censored;
    j["horizon"] = h.horizon;
    if (h.n_hit > 0) {
        j["mean_hit_time"] = h.mean_hit_time;
        j["sample_std"] = h.sample_std;
        j["ci"] = {h.ci_low, h.ci_high};
    }
    return j;
}

} // namespace detail

inline std::string trajectory_csv(const Trajectory& traj) {
    std::ostringstream os;
    os << "t,player,action,x,y\n";
    const bool scores = !traj.scores.empty();
    for (size_t s = 0; s < traj.times.size(); ++s) {
        for (size_t i = 0; i < traj.strategies[s].probs.size(); ++i)
            for (size_t a = 0; a < traj.strategies[s].probs[i].size(); ++a) {
                os << detail::fmt(traj.times[s]) << ',' << i << ',' << a << ','
                   << detail::fmt(traj.strategies[s].probs[i][a]) << ',';
                if (scores)
                    os << detail::fmt(traj.scores[s].y[i][a]);
                else
                    os << "nan";
                os << '\n';
            }
    }
    return os.str();
}

namespace detail {

inline MixedProfile x0_from_params(const ExperimentConfig& ec) {
    MixedProfile x = MixedProfile::uniform(ec.game);
    for (int i = 0; i < ec.game.num_players; ++i) {
        const Value* v = find(ec.params, "x0_" + std::to_string(i + 1));
        if (v) x.probs[i] = v->as_double_list();
    }
    if (!x.valid_for(ec.game)) throw ConfigError("experiment: x0 is not a valid mixed profile");
    return x;
}

inline Face face_from_params(const ExperimentConfig& ec) {
    Face f;
    f.actions.resize(ec.game.num_players);
    bool any = false;
    for (int i = 0; i < ec.game.num_players; ++i) {
        const Value* v = find(ec.params, "face_" + std::to_string(i + 1));
        if (v) {
            any = true;
            for (double a : v->as_double_list()) f.actions[i].push_back(static_cast<int>(a));
        } else {
            for (int a = 0; a < ec.game.action_counts[i]; ++a) f.actions[i].push_back(a);
        }
    }
    if (!any) throw ConfigError("experiment: stability needs at least one face_i key");
    try {
        f.validate(ec.game);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("experiment: ") + e.what());
    }
    return f;
}

inline HarmonicStructure structure_from_params(const ExperimentConfig& ec) {
    bool any = false;
    std::vector<std::vector<double>> w(ec.game.num_players);
    for (int i = 0; i < ec.game.num_players; ++i) {
        const Value* v = find(ec.params, "weights_" + std::to_string(i + 1));
        if (v) {
            any = true;
            w[i] = v->as_double_list();
        } else {
            w[i].assign(ec.game.action_counts[i], 1.0);
        }
    }
    if (any) return harmonic_structure(w);
    if (ec.structure) return *ec.structure;
    return harmonic_structure(w); // unit weights fallback
}

} // namespace detail

inline nlohmann::json run_experiment_impl(const ExperimentConfig& ec,
                                          std::optional<int> runs_override) {
    nlohmann::json summary;
    summary["experiment"] = ec.type;
    summary["game"] = ec.game_name;
    summary["seed"] = ec.sim.seed;
    summary["config_hash"] = ec.config_hash;
    summary["config"] = ec.config_text;
    auto runs_param = [&](int dflt) {
        if (runs_override) return *runs_override;
        const Value* v = detail::find(ec.params, "runs");
        return v ? static_cast<int>(v->as_int()) : dflt;
    };
    const NoiseModel& noise = *ec.noise;

    if (ec.type == "simulate") {
        const MixedProfile x0 = detail::x0_from_params(ec);
        Trajectory traj;
        if (ec.sim.scheme == Scheme::rk4)
            traj = simulate_deterministic_ftrl(ec.game, ec.regs, x0, ec.sim);
        else
            traj = simulate_sftrl_scores(ec.game, ec.regs, noise, x0, ec.sim);
        if (traj.terminal_reason == TerminalReason::numerical_failure)
            throw std::runtime_error("simulate: numerical failure at t = " +
                                     std::to_string(traj.final_time()));
        summary["terminal_reason"] = to_string(traj.terminal_reason);
        summary["samples"] = traj.times.size();
        summary["final_time"] = traj.final_time();
        summary["trajectory_file"] = "trajectory.csv";
        std::filesystem::create_directories(ec.out_dir);
        detail::write_file(std::filesystem::path(ec.out_dir) / "trajectory.csv",
                           trajectory_csv(traj));
    } else if (ec.type == "hitting_time") {
        const Value* ev = detail::find(ec.params, "eps");
        if (!ev) throw ConfigError("hitting_time: missing 'eps'");
        const double eps = ev->as_double();
        const Value* pv = detail::find(ec.params, "player");
        const int player = pv ? static_cast<int>(pv->as_int()) : 0;
        const int runs = runs_param(100);
        const auto stats = estimate_hitting_time(ec.game, ec.regs, noise,
                                                 detail::x0_from_params(ec), ec.sim, player, eps,
                                                 runs);
        summary["player"] = player;
        summary["eps"] = eps;
        summary["stats"] = detail::hitting_json(stats);
        if (noise.sigma_min_sq(player) > 0.0) {
            const auto L = lambda_bound(ec.game, player, ec.regs.of(player), noise, eps);
            summary["bound"] = {{"lambda", L.lambda},   {"B", L.B},
                                {"c_eps", L.c_eps},     {"H_min", L.H_min},
                                {"M", L.M},             {"M_v", L.M_v},
                                {"bound_log", L.bound_log}, {"bound_value", L.bound_value}};
        }
    } else if (ec.type == "stability") {
        const Face face = detail::face_from_params(ec);
        const int runs = runs_param(200);
        double level;
        if (const Value* lv = detail::find(ec.params, "level")) {
            level = lv->as_double();
        } else {
            const Value* pv = detail::find(ec.params, "eps_prob");
            const double eps_prob = pv ? pv->as_double() : 0.05;
            const double gap = min_out_deviation_gap(ec.game, face);
            if (!(gap > 0.0))
                throw ConfigError("stability: face is not club; pass an explicit 'level'");
            int n_out = 0;
            for (int i = 0; i < ec.game.num_players; ++i)
                n_out += ec.game.action_counts[i] - static_cast<int>(face.actions[i].size());
            level = stability_level_for(gap, noise.sigma_max_sq(), n_out, eps_prob);
        }
        const auto res = stability_experiment(ec.game, ec.regs, noise, face, level, runs, ec.sim);
        summary["level"] = res.level;
        summary["n_runs"] = res.n_runs;
        summary["stay_fraction"] = res.stay_fraction;
        summary["converge_fraction"] = res.converge_fraction;
    } else if (ec.type == "energy") {
        const Value* lv = detail::find(ec.params, "level");
        if (!lv) throw ConfigError("energy: missing 'level'");
        const auto s = detail::structure_from_params(ec);
        const int runs = runs_param(100);
        std::vector<double> curve;
        if (const Value* cv = detail::find(ec.params, "curve")) curve = cv->as_double_list();
        MixedProfile x0 = s.center;
        for (int i = 0; i < ec.game.num_players; ++i)
            if (detail::find(ec.params, "x0_" + std::to_string(i + 1))) x0 = detail::x0_from_params(ec);
        const auto stats = energy_escape_stats(ec.game, s, ec.regs, noise, x0, lv->as_double(),
                                               runs, ec.sim, curve);
        summary["level"] = stats.level;
        summary["eps_c"] = stats.eps_c;
        summary["eps_c_accepted"] = stats.eps_c_accepted;
        summary["bound"] = stats.bound;
        summary["tau"] = detail::hitting_json(stats.tau);
        if (!stats.times.empty()) {
            summary["curve"] = {{"t", stats.times},
                                {"mean_energy", stats.mean_energy},
                                {"std_energy", stats.std_energy}};
        }
    } else if (ec.type == "club") {
        const Value* tv2 = detail::find(ec.params, "tol");
        const double tol = tv2 ? tv2->as_double() : 1e-9;
        const auto faces = enumerate_club_faces(ec.game, tol);
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& f : faces) {
            nlohmann::json jf = nlohmann::json::array();
            for (const auto& s : f.actions) jf.push_back(s);
            arr.push_back(jf);
        }
        summary["club_faces"] = arr;
        summary["count"] = faces.size();
    } else if (ec.type == "harmonic_check") {
        const auto s = detail::structure_from_params(ec);
        const Value* tv2 = detail::find(ec.params, "tol");
        const double tol = tv2 ? tv2->as_double() : 1e-9;
        const auto residuals = harmonic_residuals(ec.game, s.weights);
        double mx = 0.0;
        for (double r : residuals) mx = std::max(mx, std::fabs(r));
        summary["residual_max"] = mx;
        summary["tol"] = tol;
        summary["verdict"] = mx <= tol ? "harmonic" : "not_harmonic";
    } else if (ec.type == "srd_compare") {
        const int runs = runs_param(100);
        const Value* tv2 = detail::find(ec.params, "threshold");
        const double threshold = tv2 ? tv2->as_double() : 0.01;
        std::vector<SrdVariant> variants = {SrdVariant::EW, SrdVariant::AS, SrdVariant::PI};
        if (const Value* vv = detail::find(ec.params, "variants")) {
            variants.clear();
            for (const auto& e : vv->list) {
                if (e.scalar == "EW") variants.push_back(SrdVariant::EW);
                else if (e.scalar == "AS") variants.push_back(SrdVariant::AS);
                else if (e.scalar == "PI") variants.push_back(SrdVariant::PI);
                else throw ConfigError("srd_compare: unknown variant '" + e.scalar + "'");
            }
        }
        const MixedProfile x0 = detail::x0_from_params(ec);
        for (const auto variant : variants) {
            std::vector<int> extinct(ec.game.num_players, 0);
            std::vector<int> absorbed(runs, 0);
            std::vector<std::vector<int>> ext(runs, std::vector<int>(ec.game.num_players, 0));
            sgdlab::detail::parallel_for_runs(runs, [&](int r) {
                SimConfig c = ec.sim;
                c.run_id = static_cast<std::uint64_t>(r);
                c.record_samples = false;
                const auto traj = simulate_srd(ec.game, noise, x0, c, variant);
                const auto& xf = traj.final_strategy();
                bool all_pure = true;
                for (int i = 0; i < ec.game.num_players; ++i) {
                    if (xf.probs[i][0] < threshold) ext[r][i] = 1;
                    if (*std::max_element(xf.probs[i].begin(), xf.probs[i].end()) < 0.99)
                        all_pure = false;
                }
                absorbed[r] = all_pure ? 1 : 0;
            });
            int n_abs = 0;
            for (int r = 0; r < runs; ++r) {
                n_abs += absorbed[r];
                for (int i = 0; i < ec.game.num_players; ++i) extinct[i] += ext[r][i];
            }
            nlohmann::json jv;
            jv["runs"] = runs;
            jv["first_action_extinct_fraction"] = nlohmann::json::array();
            for (int i = 0; i < ec.game.num_players; ++i)
                jv["first_action_extinct_fraction"].push_back(static_cast<double>(extinct[i]) /
                                                              runs);
            jv["absorbed_fraction"] = static_cast<double>(n_abs) / runs;
            summary["variants"][to_string(variant)] = jv;
        }
    } else {
        throw ConfigError("experiment: unknown type '" + ec.type + "'");
    }

    std::filesystem::create_directories(ec.out_dir);
    detail::write_file(std::filesystem::path(ec.out_dir) / "summary.json", summary.dump(2) + "\n");
    return summary;
}

inline nlohmann::json run_experiment(const ExperimentConfig& ec,
                                     std::optional<int> runs_override = std::nullopt) {
    return run_experiment_impl(ec, runs_override);
}

inline std::string catalog_text() {
    std::ostringstream os;
    for (const auto& e : builtins::catalog()) {
        os << e.name;
        if (!e.parameters.empty()) os << "(" << e.parameters << ")";
        os << "\n    " << e.provenance << "\n";
        if (auto g = builtins::by_name(e.name)) os << export_game_text(*g);
        os << "\n";
    }
    return os.str();
}

} // namespace sgdlab::experiment
