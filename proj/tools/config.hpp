#ifndef FEDSCALE_TOOLS_CONFIG_HPP
#define FEDSCALE_TOOLS_CONFIG_HPP

// Experiment configuration: one TOML document, every key optional.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "fedscale/fedscale.hpp"

namespace fedscale::cli {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Pipeline { BoundSweep, SizeVsClients, McValidate, GapAnalysis, ClientAverage, HeteroStudy };

inline const char* to_string(Pipeline p)
{
    switch (p) {
    case Pipeline::BoundSweep: return "bound-sweep";
    case Pipeline::SizeVsClients: return "size-vs-clients";
    case Pipeline::McValidate: return "mc-validate";
    case Pipeline::GapAnalysis: return "gap-analysis";
    case Pipeline::ClientAverage: return "client-average";
    case Pipeline::HeteroStudy: return "hetero-study";
    }
    return "?";
}

inline std::optional<Pipeline> parse_pipeline(const std::string& s)
{
    for (Pipeline p : {Pipeline::BoundSweep, Pipeline::SizeVsClients, Pipeline::McValidate, Pipeline::GapAnalysis,
                       Pipeline::ClientAverage, Pipeline::HeteroStudy}) {
        if (s == to_string(p)) {
            return p;
        }
    }
    return std::nullopt;
}

struct PlanSettings {
    int clients = 10;
    double total_data = 60000;
    std::optional<double> per_client; // overrides total_data / clients
    double rounds = 9e5;
    double eta = 0.1;
    double batch = 1024;
    double delta = 0.05;

    double m() const { return per_client ? *per_client : total_data / clients; }
    double data() const { return per_client ? *per_client * clients : total_data; }
};

struct GridSettings {
    std::vector<int> clients{3, 5, 7, 10, 20, 30, 40, 50};
    std::vector<double> rounds{1e6, 1e7, 1e8};
    std::vector<double> dims{1, 2, 4, 8, 16, 32, 64, 128, 256, 512};
    std::vector<double> gammas{1.1, 1.2, 1.3, 1.4, 1.5};
    std::vector<double> alphas{0.05, 0.1, 0.5, 1.0, 10.0};
};

struct SizeSettings {
    double gamma = 1.4;
    LimitMode mode = LimitMode::LimitT;
    SizeOffset offset = SizeOffset::exact_root;
};

struct McSettings {
    std::int64_t samples = 1000000; // pooled post-burn-in samples per OU fixture
    int replicas = 8;
    std::int64_t fedavg_rounds = 200000;
    int fedavg_replicas = 4;
    std::vector<std::string> fixtures{"scalar", "d2", "zero-noise", "fedavg"};
};

struct GapSettings {
    std::optional<double> trace; // overrides tr(C A^{-1}) of the geometry
};

struct PopulationSettings {
    std::optional<int> clients;       // default: plan.clients
    std::optional<double> per_client; // default: plan m
    double scale = 0.05;
    int components = 3;
    int seeds = 100;
};

struct ExperimentConfig {
    std::filesystem::path source; // empty when running on defaults
    std::uint64_t seed = 17;
    Variant variant = Variant::Appendix;
    unsigned jobs = 1;
    LossGeometry geometry = default_geometry();
    nlohmann::json geometry_echo;
    PlanSettings plan;
    GridSettings grid;
    SizeSettings size;
    McSettings mc;
    GapSettings gap;
    PopulationSettings population;

    static LossGeometry default_geometry()
    {
        const CommutingPair p = commuting_pair({0.5, 1.0, 2.0, 4.0}, {1.0, 0.8, 0.6, 0.4}, 0);
        return LossGeometry::from_noise_cov(p.a, p.c);
    }
};

namespace detail {

inline void check_keys(const toml::table& t, const std::string& where, std::initializer_list<const char*> allowed)
{
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : t) {
        if (!ok.count(std::string(k.str()))) {
            throw ConfigError("unknown key '" + std::string(k.str()) + "' in " + where);
        }
    }
}

inline double get_real(const toml::table& t, const char* key, const std::string& where)
{
    const toml::node* n = t.get(key);
    if (auto v = n->value<double>()) {
        return *v;
    }
    throw ConfigError(where + "." + key + " must be a number");
}

inline std::int64_t get_int(const toml::table& t, const char* key, const std::string& where)
{
    const toml::node* n = t.get(key);
    if (auto v = n->value<std::int64_t>()) {
        return *v;
    }
    // integral floats such as 1e6 are accepted
    if (auto d = n->value<double>(); d && *d == std::floor(*d) && std::abs(*d) < 9e18) {
        return static_cast<std::int64_t>(*d);
    }
    throw ConfigError(where + "." + key + " must be an integer");
}

inline std::string get_string(const toml::table& t, const char* key, const std::string& where)
{
    if (auto v = t.get(key)->value<std::string>()) {
        return *v;
    }
    throw ConfigError(where + "." + key + " must be a string");
}

inline std::vector<double> get_reals(const toml::table& t, const char* key, const std::string& where)
{
    const toml::array* arr = t.get(key)->as_array();
    if (arr == nullptr) {
        throw ConfigError(where + "." + key + " must be an array of numbers");
    }
    std::vector<double> out;
    for (const toml::node& n : *arr) {
        auto v = n.value<double>();
        if (!v) {
            throw ConfigError(where + "." + key + " must be an array of numbers");
        }
        out.push_back(*v);
    }
    return out;
}

inline Matrix get_matrix(const toml::table& t, const char* key, const std::string& where)
{
    const toml::array* rows = t.get(key)->as_array();
    if (rows == nullptr || rows->empty()) {
        throw ConfigError(where + "." + key + " must be a non-empty array of rows");
    }
    std::vector<std::vector<double>> vals;
    for (const toml::node& row : *rows) {
        const toml::array* r = row.as_array();
        if (r == nullptr) {
            throw ConfigError(where + "." + key + " must be an array of rows");
        }
        std::vector<double> line;
        for (const toml::node& x : *r) {
            auto v = x.value<double>();
            if (!v) {
                throw ConfigError(where + "." + key + " entries must be numbers");
            }
            line.push_back(*v);
        }
        if (!vals.empty() && line.size() != vals.front().size()) {
            throw ConfigError(where + "." + key + " rows differ in length");
        }
        vals.push_back(std::move(line));
    }
    Matrix m(static_cast<Eigen::Index>(vals.size()), static_cast<Eigen::Index>(vals.front().size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            m(i, j) = vals[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    return m;
}

inline SymMatrix require_symmetric(const Matrix& m, const std::string& what)
{
    if (m.rows() != m.cols()) {
        throw ConfigError(what + " must be square");
    }
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
        throw ConfigError(what + " must be symmetric");
    }
    return SymMatrix(m);
}

inline LossGeometry parse_geometry(const toml::table& t, const std::filesystem::path& base, nlohmann::json& echo)
{
    const std::string where = "geometry";
    check_keys(t, where,
               {"file", "hessian", "noise_cov", "noise_factor", "hessian_eigenvalues", "noise_eigenvalues",
                "rotation_seed"});
    const int sources = static_cast<int>(t.contains("file")) + static_cast<int>(t.contains("hessian")) +
                        static_cast<int>(t.contains("hessian_eigenvalues"));
    if (sources != 1) {
        throw ConfigError("geometry needs exactly one of file, hessian, hessian_eigenvalues");
    }
    if (t.contains("file")) {
        const std::filesystem::path p = base / get_string(t, "file", where);
        std::ifstream in(p);
        if (!in) {
            throw ConfigError("geometry file not found: " + p.string());
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("geometry file is not valid JSON: " + std::string(e.what()));
        }
        try {
            LossGeometry g = geometry_from_json(j);
            echo = to_json(g);
            return g;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("geometry file " + p.string() + ": " + e.what());
        }
    }
    if (t.contains("hessian")) {
        const SymMatrix a = require_symmetric(get_matrix(t, "hessian", where), "geometry.hessian");
        const bool has_cov = t.contains("noise_cov");
        const bool has_factor = t.contains("noise_factor");
        if (has_cov == has_factor) {
            throw ConfigError("geometry needs exactly one of noise_cov, noise_factor");
        }
        LossGeometry g = has_cov ? LossGeometry::from_noise_cov(
                                       a, require_symmetric(get_matrix(t, "noise_cov", where), "geometry.noise_cov"))
                                 : LossGeometry(a, get_matrix(t, "noise_factor", where));
        echo = to_json(g);
        return g;
    }
    const std::vector<double> ea = get_reals(t, "hessian_eigenvalues", where);
    if (!t.contains("noise_eigenvalues")) {
        throw ConfigError("geometry.hessian_eigenvalues needs geometry.noise_eigenvalues");
    }
    const std::vector<double> ec = get_reals(t, "noise_eigenvalues", where);
    const std::uint64_t rot = t.contains("rotation_seed") ? static_cast<std::uint64_t>(get_int(t, "rotation_seed", where)) : 0;
    const CommutingPair p = commuting_pair(ea, ec, rot);
    LossGeometry g = LossGeometry::from_noise_cov(p.a, p.c);
    echo = {{"hessian_eigenvalues", ea}, {"noise_eigenvalues", ec}, {"rotation_seed", rot}};
    return g;
}

inline Variant parse_variant(const std::string& s)
{
    if (s == "appendix") {
        return Variant::Appendix;
    }
    if (s == "main") {
        return Variant::MainText;
    }
    throw ConfigError("variant must be 'main' or 'appendix', got '" + s + "'");
}

template <class T>
void require(bool ok, const T& msg)
{
    if (!ok) {
        throw ConfigError(msg);
    }
}

inline void validate(const ExperimentConfig& c)
{
    require(c.plan.clients >= 1, "plan.clients must be >= 1");
    require(c.plan.total_data >= 1, "plan.total_data must be >= 1");
    require(!c.plan.per_client || *c.plan.per_client >= 1, "plan.per_client must be >= 1");
    require(c.plan.rounds >= 1, "plan.rounds must be >= 1");
    require(c.plan.eta > 0, "plan.eta must be positive");
    require(c.plan.batch >= 1, "plan.batch must be >= 1");
    require(c.plan.delta > 0 && c.plan.delta < 1, "plan.delta must lie in (0, 1)");
    require(c.jobs >= 1, "jobs must be >= 1");
    require(!c.grid.clients.empty(), "grid.clients must be non-empty");
    for (int n : c.grid.clients) {
        require(n >= 1, "grid.clients entries must be >= 1");
    }
    require(!c.grid.rounds.empty(), "grid.rounds must be non-empty");
    for (double t : c.grid.rounds) {
        require(t >= 1, "grid.rounds entries must be >= 1");
    }
    require(!c.grid.dims.empty(), "grid.dims must be non-empty");
    for (double d : c.grid.dims) {
        require(d > 0, "grid.dims entries must be positive");
    }
    require(!c.grid.gammas.empty(), "grid.gammas must be non-empty");
    for (double g : c.grid.gammas) {
        require(g > 1, "grid.gammas entries must exceed 1");
    }
    require(!c.grid.alphas.empty(), "grid.alphas must be non-empty");
    for (double a : c.grid.alphas) {
        require(a > 0, "grid.alphas entries must be positive");
    }
    require(c.size.gamma > 1, "size.gamma must exceed 1");
    require(c.mc.samples >= 1 && c.mc.replicas >= 1, "mc.samples and mc.replicas must be >= 1");
    require(c.mc.fedavg_rounds >= 2 && c.mc.fedavg_replicas >= 1, "mc.fedavg_rounds must be >= 2");
    for (const std::string& f : c.mc.fixtures) {
        require(f == "scalar" || f == "d2" || f == "zero-noise" || f == "fedavg", "unknown mc fixture '" + f + "'");
    }
    require(!c.gap.trace || *c.gap.trace >= 0, "gap.trace must be non-negative");
    require(!c.population.clients || *c.population.clients >= 1, "population.clients must be >= 1");
    require(!c.population.per_client || *c.population.per_client >= 1, "population.per_client must be >= 1");
    require(c.population.scale >= 0, "population.scale must be non-negative");
    require(c.population.components >= 1, "population.components must be >= 1");
    require(c.population.seeds >= 1, "population.seeds must be >= 1");
}

} // namespace detail

/// Parses a TOML document. `base` resolves relative paths.
inline ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base)
{
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "TOML parse error: " << e.description() << " at line " << e.source().begin.line;
        throw ConfigError(os.str());
    }
    using detail::get_int;
    using detail::get_real;
    using detail::get_reals;
    using detail::get_string;
    detail::check_keys(root, "top level",
                       {"seed", "variant", "jobs", "geometry", "plan", "grid", "size", "mc", "gap", "population"});
    ExperimentConfig c;
    try {
        if (root.contains("seed")) c.seed = static_cast<std::uint64_t>(get_int(root, "seed", "config"));
        if (root.contains("variant")) c.variant = detail::parse_variant(get_string(root, "variant", "config"));
        if (root.contains("jobs")) c.jobs = static_cast<unsigned>(std::max<std::int64_t>(0, get_int(root, "jobs", "config")));

        auto table = [&](const char* name) -> const toml::table* {
            const toml::node* n = root.get(name);
            if (n == nullptr) {
                return nullptr;
            }
            if (!n->is_table()) {
                throw ConfigError(std::string(name) + " must be a table");
            }
            return n->as_table();
        };

        if (const toml::table* t = table("geometry")) {
            c.geometry = detail::parse_geometry(*t, base, c.geometry_echo);
        }
        if (const toml::table* t = table("plan")) {
            detail::check_keys(*t, "plan", {"clients", "total_data", "per_client", "rounds", "eta", "batch", "delta"});
            if (t->contains("clients")) c.plan.clients = static_cast<int>(get_int(*t, "clients", "plan"));
            if (t->contains("total_data")) c.plan.total_data = get_real(*t, "total_data", "plan");
            if (t->contains("per_client")) c.plan.per_client = get_real(*t, "per_client", "plan");
            if (t->contains("rounds")) c.plan.rounds = get_real(*t, "rounds", "plan");
            if (t->contains("eta")) c.plan.eta = get_real(*t, "eta", "plan");
            if (t->contains("batch")) c.plan.batch = get_real(*t, "batch", "plan");
            if (t->contains("delta")) c.plan.delta = get_real(*t, "delta", "plan");
        }
        if (const toml::table* t = table("grid")) {
            detail::check_keys(*t, "grid", {"clients", "rounds", "dims", "gammas", "alphas"});
            if (t->contains("clients")) {
                c.grid.clients.clear();
                for (double v : get_reals(*t, "clients", "grid")) {
                    if (v != std::floor(v)) {
                        throw ConfigError("grid.clients entries must be integers");
                    }
                    c.grid.clients.push_back(static_cast<int>(v));
                }
            }
            if (t->contains("rounds")) c.grid.rounds = get_reals(*t, "rounds", "grid");
            if (t->contains("dims")) c.grid.dims = get_reals(*t, "dims", "grid");
            if (t->contains("gammas")) c.grid.gammas = get_reals(*t, "gammas", "grid");
            if (t->contains("alphas")) c.grid.alphas = get_reals(*t, "alphas", "grid");
        }
        if (const toml::table* t = table("size")) {
            detail::check_keys(*t, "size", {"gamma", "mode", "offset"});
            if (t->contains("gamma")) c.size.gamma = get_real(*t, "gamma", "size");
            if (t->contains("mode")) {
                const std::string m = get_string(*t, "mode", "size");
                if (m == "limit") c.size.mode = LimitMode::LimitT;
                else if (m == "finite") c.size.mode = LimitMode::FiniteT;
                else throw ConfigError("size.mode must be 'limit' or 'finite'");
            }
            if (t->contains("offset")) {
                const std::string o = get_string(*t, "offset", "size");
                if (o == "exact") c.size.offset = SizeOffset::exact_root;
                else if (o == "printed") c.size.offset = SizeOffset::minus_four_over_m;
                else throw ConfigError("size.offset must be 'exact' or 'printed'");
            }
        }
        if (const toml::table* t = table("mc")) {
            detail::check_keys(*t, "mc", {"samples", "replicas", "fedavg_rounds", "fedavg_replicas", "fixtures"});
            if (t->contains("samples")) c.mc.samples = get_int(*t, "samples", "mc");
            if (t->contains("replicas")) c.mc.replicas = static_cast<int>(get_int(*t, "replicas", "mc"));
            if (t->contains("fedavg_rounds")) c.mc.fedavg_rounds = get_int(*t, "fedavg_rounds", "mc");
            if (t->contains("fedavg_replicas")) c.mc.fedavg_replicas = static_cast<int>(get_int(*t, "fedavg_replicas", "mc"));
            if (t->contains("fixtures")) {
                const toml::array* arr = t->get("fixtures")->as_array();
                if (arr == nullptr) {
                    throw ConfigError("mc.fixtures must be an array of strings");
                }
                c.mc.fixtures.clear();
                for (const toml::node& n : *arr) {
                    auto s = n.value<std::string>();
                    if (!s) {
                        throw ConfigError("mc.fixtures must be an array of strings");
                    }
                    c.mc.fixtures.push_back(*s);
                }
            }
        }
        if (const toml::table* t = table("gap")) {
            detail::check_keys(*t, "gap", {"trace"});
            if (t->contains("trace")) c.gap.trace = get_real(*t, "trace", "gap");
        }
        if (const toml::table* t = table("population")) {
            detail::check_keys(*t, "population", {"clients", "per_client", "scale", "components", "seeds"});
            if (t->contains("clients")) c.population.clients = static_cast<int>(get_int(*t, "clients", "population"));
            if (t->contains("per_client")) c.population.per_client = get_real(*t, "per_client", "population");
            if (t->contains("scale")) c.population.scale = get_real(*t, "scale", "population");
            if (t->contains("components")) c.population.components = static_cast<int>(get_int(*t, "components", "population"));
            if (t->contains("seeds")) c.population.seeds = static_cast<int>(get_int(*t, "seeds", "population"));
        }
    } catch (const fedscale::Error& e) {
        throw ConfigError(std::string("invalid geometry: ") + e.what());
    }
    detail::validate(c);
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read config file: " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    ExperimentConfig c = parse_config(text.str(), path.parent_path());
    c.source = path;
    return c;
}

/// Everything that determines the results; echoed into results.json.
inline nlohmann::json config_echo(const ExperimentConfig& c)
{
    nlohmann::json j;
    j["seed"] = c.seed;
    j["variant"] = to_string(c.variant);
    j["geometry"] = c.geometry_echo.is_null() ? to_json(c.geometry) : c.geometry_echo;
    j["plan"] = {{"clients", c.plan.clients},  {"total_data", c.plan.data()}, {"per_client", c.plan.m()},
                 {"rounds", c.plan.rounds},    {"eta", c.plan.eta},           {"batch", c.plan.batch},
                 {"delta", c.plan.delta}};
    j["grid"] = {{"clients", c.grid.clients}, {"rounds", c.grid.rounds}, {"dims", c.grid.dims},
                 {"gammas", c.grid.gammas},   {"alphas", c.grid.alphas}};
    j["size"] = {{"gamma", c.size.gamma}, {"mode", to_string(c.size.mode)}, {"offset", to_string(c.size.offset)}};
    j["mc"] = {{"samples", c.mc.samples},
               {"replicas", c.mc.replicas},
               {"fedavg_rounds", c.mc.fedavg_rounds},
               {"fedavg_replicas", c.mc.fedavg_replicas},
               {"fixtures", c.mc.fixtures}};
    j["gap"] = {{"trace", c.gap.trace ? nlohmann::json(*c.gap.trace) : nlohmann::json(nullptr)}};
    j["population"] = {
        {"clients", c.population.clients ? nlohmann::json(*c.population.clients) : nlohmann::json(nullptr)},
        {"per_client", c.population.per_client ? nlohmann::json(*c.population.per_client) : nlohmann::json(nullptr)},
        {"scale", c.population.scale},
        {"components", c.population.components},
        {"seeds", c.population.seeds}};
    return j;
}

} // namespace fedscale::cli

#endif // FEDSCALE_TOOLS_CONFIG_HPP
