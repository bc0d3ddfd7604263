#include "diffnet/config.hpp"

#include <toml.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace diffnet::config {

void ExperimentConfig::validate() const
{
    simulation.validate();
    if (!(clime.target_density > 0.0 && clime.target_density < 1.0))
        throw InvalidParameter("clime.target_density must lie in (0,1)");
    if (clime.grid.empty() && clime.grid_points < 1) throw InvalidParameter("clime.grid_points must be positive");
    if (!(clime.grid_min_ratio > 0.0 && clime.grid_min_ratio <= 1.0))
        throw InvalidParameter("clime.grid_min_ratio must lie in (0,1]");
    for (double g : clime.grid)
        if (!(g > 0.0)) throw InvalidParameter("clime.grid values must be positive");
    if (!(clime.zero_tol >= 0.0)) throw InvalidParameter("clime.zero_tol must be nonnegative");

    const auto& g = sgmcp.grid;
    if (!(g.gamma > 1.0)) throw InvalidParameter("sgmcp.gamma must be > 1");
    for (double v : g.gamma_grid)
        if (!(v > 1.0)) throw InvalidParameter("sgmcp.gamma_grid values must be > 1");
    if (g.n_lambda1 < 1 || g.n_lambda2 < 1) throw InvalidParameter("sgmcp grid sizes must be positive");
    if (!(g.min_ratio > 0.0 && g.min_ratio <= 1.0)) throw InvalidParameter("sgmcp.min_ratio must lie in (0,1]");
    for (const auto& [l1, l2] : g.pairs)
        if (!(l1 >= 0.0 && l2 >= 0.0)) throw InvalidParameter("sgmcp.pairs values must be nonnegative");
    if (sgmcp.folds < 2) throw InvalidParameter("sgmcp.folds must be at least 2");
    if (!(sgmcp.fit.tol > 0.0) || !(sgmcp.fit.inner_tol > 0.0) || sgmcp.fit.max_iter < 1 || sgmcp.fit.max_sweeps < 1 ||
        !(sgmcp.fit.objective_tol >= 0.0))
        throw InvalidParameter("sgmcp solver settings must be positive");
    if (sgmcp.screen_keep < 0) throw InvalidParameter("sgmcp.screen_keep must be nonnegative");

    if (ensemble.B < 1) throw InvalidParameter("ensemble.B must be at least 1");
    if (!(ensemble.tau >= 0.0 && ensemble.tau < 1.0)) throw InvalidParameter("ensemble.tau must lie in [0,1)");

    if (replications < 1) throw InvalidParameter("replications must be at least 1");
    if (out.empty()) throw InvalidParameter("out must not be empty");
    if (threads < 0) throw InvalidParameter("threads must be nonnegative");
}

ExperimentConfig desk_profile()
{
    ExperimentConfig c;
    c.simulation.datasets = 3;
    c.simulation.p = 30;
    c.simulation.q = 30;
    c.simulation.n_case = 30;
    c.simulation.n_control = 30;
    c.simulation.rho_list = {0.4, 0.4, 0.4};
    c.simulation.structure = simgen::GraphKind::Hub;
    c.simulation.hub_groups = 5;
    c.ensemble.B = 50;
    c.replications = 10;
    c.out = "out";
    return c;
}

namespace {

class Reader
{
public:
    Reader(const toml::table& table, std::string section, std::string origin)
        : table_(table), section_(std::move(section)), origin_(std::move(origin))
    {}

    void reject_unknown(std::initializer_list<const char*> allowed) const
    {
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& [key, _] : table_)
            if (!ok.count(std::string(key.str()))) fail(std::string(key.str()), "unknown key");
    }

    void get(const char* key, double& out) const
    {
        const auto* node = table_.get(key);
        if (!node) return;
        if (auto v = node->value<double>()) out = *v;
        else fail(key, "expected a number");
    }

    void get(const char* key, int& out) const
    {
        const auto* node = table_.get(key);
        if (!node) return;
        const auto v = node->as_integer();
        if (!v || v->get() < INT32_MIN || v->get() > INT32_MAX) fail(key, "expected an integer");
        out = static_cast<int>(v->get());
    }

    void get(const char* key, std::uint64_t& out) const
    {
        const auto* node = table_.get(key);
        if (!node) return;
        const auto v = node->as_integer();
        if (!v || v->get() < 0) fail(key, "expected a nonnegative integer");
        out = static_cast<std::uint64_t>(v->get());
    }

    void get(const char* key, bool& out) const
    {
        const auto* node = table_.get(key);
        if (!node) return;
        const auto v = node->as_boolean();
        if (!v) fail(key, "expected a boolean");
        out = v->get();
    }

    void get(const char* key, std::string& out) const
    {
        const auto* node = table_.get(key);
        if (!node) return;
        const auto v = node->as_string();
        if (!v) fail(key, "expected a string");
        out = v->get();
    }

    void get(const char* key, std::vector<double>& out) const
    {
        const auto* node = table_.get(key);
        if (!node) return;
        const auto* arr = node->as_array();
        if (!arr) fail(key, "expected an array of numbers");
        out.clear();
        for (const auto& el : *arr) {
            if (auto v = el.value<double>()) out.push_back(*v);
            else fail(key, "expected an array of numbers");
        }
    }

    void get(const char* key, std::vector<std::pair<double, double>>& out) const
    {
        const auto* node = table_.get(key);
        if (!node) return;
        const auto* arr = node->as_array();
        if (!arr) fail(key, "expected an array of [lambda1, lambda2] pairs");
        out.clear();
        for (const auto& el : *arr) {
            const auto* pair = el.as_array();
            if (!pair || pair->size() != 2) fail(key, "expected an array of [lambda1, lambda2] pairs");
            const auto a = (*pair)[0].value<double>(), b = (*pair)[1].value<double>();
            if (!a || !b) fail(key, "expected an array of [lambda1, lambda2] pairs");
            out.emplace_back(*a, *b);
        }
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const
    {
        const std::string name = section_.empty() ? key : section_ + "." + key;
        throw InvalidParameter(origin_ + ": " + name + ": " + what);
    }

private:
    const toml::table& table_;
    std::string section_;
    std::string origin_;
};

const toml::table* section(const toml::table& root, const char* name, const std::string& origin)
{
    const auto* node = root.get(name);
    if (!node) return nullptr;
    const auto* t = node->as_table();
    if (!t) throw InvalidParameter(origin + ": " + name + ": expected a table");
    return t;
}

std::string quote(const std::string& s)
{
    std::ostringstream o;
    o << toml::value<std::string>(s);
    return o.str();
}

std::string number(double v)
{
    std::ostringstream o;
    o.precision(17);
    o << v;
    std::string s = o.str();
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

std::string numbers(const std::vector<double>& v)
{
    std::string s = "[";
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + number(v[k]);
    return s + "]";
}

} // namespace

ExperimentConfig parse_config(const std::string& text, const ExperimentConfig& base, const std::string& origin)
{
    toml::table root;
    try {
        root = toml::parse(text, origin);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << origin << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
        throw InvalidParameter(msg.str());
    }

    ExperimentConfig c = base;
    Reader top(root, "", origin);
    top.reject_unknown({"seed", "replications", "out", "threads", "baseline", "simulation", "clime", "sgmcp", "ensemble"});
    top.get("seed", c.seed);
    top.get("replications", c.replications);
    top.get("out", c.out);
    top.get("threads", c.threads);
    top.get("baseline", c.baseline);

    if (const auto* t = section(root, "simulation", origin)) {
        Reader r(*t, "simulation", origin);
        r.reject_unknown({"datasets", "p", "q", "n_case", "n_control", "rho_list", "temporal_rho_case",
                          "temporal_rho_control", "structure", "hub_groups", "sw_neighbors", "sw_rewire",
                          "shared_base"});
        auto& s = c.simulation;
        r.get("datasets", s.datasets);
        r.get("p", s.p);
        r.get("q", s.q);
        r.get("n_case", s.n_case);
        r.get("n_control", s.n_control);
        r.get("rho_list", s.rho_list);
        r.get("temporal_rho_case", s.temporal_rho_case);
        r.get("temporal_rho_control", s.temporal_rho_control);
        std::string kind;
        r.get("structure", kind);
        if (kind == "hub") s.structure = simgen::GraphKind::Hub;
        else if (kind == "small_world") s.structure = simgen::GraphKind::SmallWorld;
        else if (!kind.empty()) r.fail("structure", "expected \"hub\" or \"small_world\"");
        r.get("hub_groups", s.hub_groups);
        r.get("sw_neighbors", s.sw_neighbors);
        r.get("sw_rewire", s.sw_rewire);
        r.get("shared_base", s.shared_base);
    }
    if (const auto* t = section(root, "clime", origin)) {
        Reader r(*t, "clime", origin);
        r.reject_unknown({"target_density", "grid_points", "grid_min_ratio", "grid", "zero_tol"});
        r.get("target_density", c.clime.target_density);
        r.get("grid_points", c.clime.grid_points);
        r.get("grid_min_ratio", c.clime.grid_min_ratio);
        r.get("grid", c.clime.grid);
        r.get("zero_tol", c.clime.zero_tol);
    }
    if (const auto* t = section(root, "sgmcp", origin)) {
        Reader r(*t, "sgmcp", origin);
        r.reject_unknown({"gamma", "gamma_grid", "n_lambda1", "n_lambda2", "min_ratio", "lambda1_zero", "pairs",
                          "folds", "tol", "max_iter", "inner_tol", "max_sweeps", "objective_tol", "standardize",
                          "screen_keep"});
        auto& g = c.sgmcp.grid;
        r.get("gamma", g.gamma);
        r.get("gamma_grid", g.gamma_grid);
        r.get("n_lambda1", g.n_lambda1);
        r.get("n_lambda2", g.n_lambda2);
        r.get("min_ratio", g.min_ratio);
        r.get("lambda1_zero", g.lambda1_zero);
        r.get("pairs", g.pairs);
        r.get("folds", c.sgmcp.folds);
        r.get("tol", c.sgmcp.fit.tol);
        r.get("max_iter", c.sgmcp.fit.max_iter);
        r.get("inner_tol", c.sgmcp.fit.inner_tol);
        r.get("max_sweeps", c.sgmcp.fit.max_sweeps);
        r.get("objective_tol", c.sgmcp.fit.objective_tol);
        r.get("standardize", c.sgmcp.fit.standardize);
        r.get("screen_keep", c.sgmcp.screen_keep);
    }
    if (const auto* t = section(root, "ensemble", origin)) {
        Reader r(*t, "ensemble", origin);
        r.reject_unknown({"B", "tau", "tau_rule", "tune_per_replicate"});
        r.get("B", c.ensemble.B);
        r.get("tau", c.ensemble.tau);
        std::string rule;
        r.get("tau_rule", rule);
        if (rule == "fixed") c.ensemble.tau_rule = TauRule::Fixed;
        else if (rule == "max_tpr_tdr") c.ensemble.tau_rule = TauRule::MaxTprTdr;
        else if (!rule.empty()) r.fail("tau_rule", "expected \"fixed\" or \"max_tpr_tdr\"");
        r.get("tune_per_replicate", c.ensemble.tune_per_replicate);
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path, const ExperimentConfig& base)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), base, path);
}

std::string to_toml(const ExperimentConfig& c)
{
    std::ostringstream o;
    o << "seed = " << c.seed << "\n"
      << "replications = " << c.replications << "\n"
      << "out = " << quote(c.out) << "\n"
      << "threads = " << c.threads << "\n"
      << "baseline = " << (c.baseline ? "true" : "false") << "\n\n";
    const auto& s = c.simulation;
    o << "[simulation]\n"
      << "datasets = " << s.datasets << "\n"
      << "p = " << s.p << "\n"
      << "q = " << s.q << "\n"
      << "n_case = " << s.n_case << "\n"
      << "n_control = " << s.n_control << "\n"
      << "rho_list = " << numbers(s.rho_list) << "\n"
      << "temporal_rho_case = " << number(s.temporal_rho_case) << "\n"
      << "temporal_rho_control = " << number(s.temporal_rho_control) << "\n"
      << "structure = " << (s.structure == simgen::GraphKind::Hub ? "\"hub\"" : "\"small_world\"") << "\n"
      << "hub_groups = " << s.hub_groups << "\n"
      << "sw_neighbors = " << s.sw_neighbors << "\n"
      << "sw_rewire = " << number(s.sw_rewire) << "\n"
      << "shared_base = " << (s.shared_base ? "true" : "false") << "\n\n";
    o << "[clime]\n"
      << "target_density = " << number(c.clime.target_density) << "\n"
      << "grid_points = " << c.clime.grid_points << "\n"
      << "grid_min_ratio = " << number(c.clime.grid_min_ratio) << "\n";
    if (!c.clime.grid.empty()) o << "grid = " << numbers(c.clime.grid) << "\n";
    o << "zero_tol = " << number(c.clime.zero_tol) << "\n\n";
    const auto& g = c.sgmcp.grid;
    o << "[sgmcp]\n"
      << "gamma = " << number(g.gamma) << "\n";
    if (!g.gamma_grid.empty()) o << "gamma_grid = " << numbers(g.gamma_grid) << "\n";
    o << "n_lambda1 = " << g.n_lambda1 << "\n"
      << "n_lambda2 = " << g.n_lambda2 << "\n"
      << "min_ratio = " << number(g.min_ratio) << "\n"
      << "lambda1_zero = " << (g.lambda1_zero ? "true" : "false") << "\n";
    if (!g.pairs.empty()) {
        o << "pairs = [";
        for (std::size_t k = 0; k < g.pairs.size(); ++k)
            o << (k ? ", " : "") << "[" << number(g.pairs[k].first) << ", " << number(g.pairs[k].second) << "]";
        o << "]\n";
    }
    o << "folds = " << c.sgmcp.folds << "\n"
      << "tol = " << number(c.sgmcp.fit.tol) << "\n"
      << "max_iter = " << c.sgmcp.fit.max_iter << "\n"
      << "inner_tol = " << number(c.sgmcp.fit.inner_tol) << "\n"
      << "max_sweeps = " << c.sgmcp.fit.max_sweeps << "\n"
      << "objective_tol = " << number(c.sgmcp.fit.objective_tol) << "\n"
      << "standardize = " << (c.sgmcp.fit.standardize ? "true" : "false") << "\n"
      << "screen_keep = " << c.sgmcp.screen_keep << "\n\n";
    o << "[ensemble]\n"
      << "B = " << c.ensemble.B << "\n"
      << "tau = " << number(c.ensemble.tau) << "\n"
      << "tau_rule = " << (c.ensemble.tau_rule == TauRule::Fixed ? "\"fixed\"" : "\"max_tpr_tdr\"") << "\n"
      << "tune_per_replicate = " << (c.ensemble.tune_per_replicate ? "true" : "false") << "\n";
    return o.str();
}

} // namespace diffnet::config
