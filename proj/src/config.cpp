#include "msa/config.hpp"

#include "msa/error.hpp"

#include <fstream>

#include <fmt/core.h>

namespace msa {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& key, const std::string& what) {
    throw Error(Errc::config, fmt::format("config '{}': {}", key, what));
}

template <class T>
T get_or(const json& object, const char* key, const std::string& path, T fallback) {
    if (!object.contains(key)) return fallback;
    try {
        return object.at(key).get<T>();
    } catch (const json::exception& e) {
        fail(path + "." + key, e.what());
    }
}

template <class T>
T require(const json& object, const char* key, const std::string& path) {
    if (!object.contains(key)) fail(path + "." + key, "missing");
    return get_or<T>(object, key, path, T{});
}

const json& section(const json& doc, const char* key) {
    static const json empty = json::object();
    if (!doc.contains(key)) return empty;
    const auto& s = doc.at(key);
    if (!s.is_object()) fail(key, "must be an object");
    return s;
}

AgeRange parse_range(const json& value, const std::string& path) {
    if (value.is_number_integer()) return {value.get<int>(), value.get<int>()};
    if (value.is_array() && value.size() == 2 && value[0].is_number_integer() && value[1].is_number_integer()) {
        return {value[0].get<int>(), value[1].get<int>()};
    }
    if (value.is_object()) return {require<int>(value, "min", path), require<int>(value, "max", path)};
    fail(path, "expected an integer, [min, max] or {min, max}");
}

SynthSpec parse_spec(const json& sim) {
    SynthSpec spec;
    if (!sim.contains("archetypes") || !sim.at("archetypes").is_array()) fail("simulation.archetypes", "missing");
    for (std::size_t a = 0; a < sim.at("archetypes").size(); ++a) {
        const auto& node = sim.at("archetypes")[a];
        const std::string path = fmt::format("simulation.archetypes[{}]", a);
        Archetype arch;
        arch.label = get_or<std::string>(node, "label", path, fmt::format("archetype_{}", a + 1));
        arch.weight = require<double>(node, "weight", path);
        if (!node.contains("censor")) fail(path + ".censor", "missing");
        arch.censor = parse_range(node.at("censor"), path + ".censor");
        arch.death_probability = get_or<double>(node, "death_probability", path, 0.0);
        for (const auto& c : node.value("conditions", json::array())) {
            ConditionModel model;
            model.code = require<std::string>(c, "code", path + ".conditions");
            model.prevalence = get_or<double>(c, "prevalence", path + ".conditions", 1.0);
            if (!c.contains("onset")) fail(path + ".conditions.onset", "missing");
            model.onset = parse_range(c.at("onset"), path + ".conditions.onset");
            arch.conditions.push_back(std::move(model));
        }
        for (const auto& e : node.value("effects", json::array())) {
            arch.effects.push_back({require<std::string>(e, "covariate", path + ".effects"),
                                    require<std::string>(e, "level", path + ".effects"),
                                    require<double>(e, "odds_multiplier", path + ".effects")});
        }
        spec.archetypes.push_back(std::move(arch));
    }
    for (const auto& c : sim.value("covariates", json::array())) {
        CovariateModel model;
        model.name = require<std::string>(c, "name", "simulation.covariates");
        model.level_probabilities =
            get_or<std::vector<double>>(c, "probabilities", "simulation.covariates", std::vector<double>{});
        model.mean = get_or<double>(c, "mean", "simulation.covariates", 0.0);
        model.sd = get_or<double>(c, "sd", "simulation.covariates", 1.0);
        spec.covariates.push_back(std::move(model));
    }
    return spec;
}

}  // namespace

Config parse_config(const json& doc) {
    if (!doc.is_object()) fail("", "document must be a JSON object");
    Config config;
    config.document = doc;

    const auto& grid = section(doc, "age_grid");
    config.grid.t_max = get_or<int>(grid, "t_max", "age_grid", kDefaultGridRows);
    config.grid.origin = get_or<int>(grid, "origin", "age_grid", 0);
    if (config.grid.t_max < 1) fail("age_grid.t_max", "must be at least 1");

    if (!doc.contains("conditions") || !doc.at("conditions").is_array()) fail("conditions", "missing");
    std::vector<std::string> codes;
    std::vector<std::string> names;
    for (const auto& c : doc.at("conditions")) {
        if (c.is_string()) {
            codes.push_back(c.get<std::string>());
            names.push_back(codes.back());
        } else if (c.is_object()) {
            codes.push_back(require<std::string>(c, "code", "conditions"));
            names.push_back(get_or<std::string>(c, "name", "conditions", codes.back()));
        } else {
            fail("conditions", "entries must be codes or {code, name}");
        }
    }
    try {
        config.conditions = ConditionRegistry(std::move(codes), std::move(names));
    } catch (const Error& e) {
        fail("conditions", e.what());
    }

    std::vector<CovariateSpec> specs;
    for (const auto& c : doc.value("covariates", json::array())) {
        CovariateSpec spec;
        spec.name = require<std::string>(c, "name", "covariates");
        const auto type = get_or<std::string>(c, "type", "covariates", "categorical");
        if (type == "categorical") {
            spec.kind = CovariateSpec::Kind::categorical;
            spec.levels = require<std::vector<std::string>>(c, "levels", "covariates." + spec.name);
        } else if (type == "numeric") {
            spec.kind = CovariateSpec::Kind::numeric;
        } else {
            fail("covariates." + spec.name + ".type", "must be 'categorical' or 'numeric'");
        }
        specs.push_back(std::move(spec));
    }
    config.schema = CovariateSchema(std::move(specs));

    const auto& ingest = section(doc, "ingest");
    config.ingest.max_rejected_fraction = get_or<double>(ingest, "max_rejected_fraction", "ingest", 0.01);

    const auto& clustering = section(doc, "clustering");
    const auto variant = get_or<std::string>(clustering, "ward_variant", "clustering", "ward.D");
    if (variant == "ward.D") {
        config.clustering.variant = WardVariant::ward_d;
    } else if (variant == "ward.D2") {
        config.clustering.variant = WardVariant::ward_d2;
    } else {
        fail("clustering.ward_variant", "must be 'ward.D' or 'ward.D2'");
    }
    if (clustering.contains("k_min")) config.clustering.k_min = require<std::size_t>(clustering, "k_min", "clustering");
    if (clustering.contains("k_max")) config.clustering.k_max = require<std::size_t>(clustering, "k_max", "clustering");
    if (clustering.contains("k")) config.clustering.k = require<std::size_t>(clustering, "k", "clustering");

    const auto& annotation = section(doc, "annotation");
    config.annotation.alpha = get_or<double>(annotation, "alpha", "annotation", 0.05);
    if (annotation.contains("index_condition")) {
        config.annotation.index_condition = require<std::string>(annotation, "index_condition", "annotation");
        if (!config.conditions.find(*config.annotation.index_condition)) {
            fail("annotation.index_condition", "not a registered condition");
        }
    }
    if (annotation.contains("logistic")) {
        const auto& logistic = annotation.at("logistic");
        auto& options = config.annotation.logistic;
        options.tolerance = get_or<double>(logistic, "tolerance", "annotation.logistic", options.tolerance);
        options.max_iterations = get_or<int>(logistic, "max_iterations", "annotation.logistic", options.max_iterations);
        options.ridge = get_or<double>(logistic, "ridge", "annotation.logistic", options.ridge);
        options.coefficient_limit =
            get_or<double>(logistic, "coefficient_limit", "annotation.logistic", options.coefficient_limit);
    }
    config.annotation.variables =
        get_or<std::vector<std::string>>(annotation, "variables", "annotation", std::vector<std::string>{});
    for (const auto& v : config.annotation.variables) {
        if (!config.schema.find(v)) fail("annotation.variables", fmt::format("'{}' is not a declared covariate", v));
    }

    const auto& graph = section(doc, "graph");
    config.graph.min_prevalence = get_or<double>(graph, "min_prevalence", "graph", 0.2);
    config.graph.min_support = get_or<int>(graph, "min_support", "graph", 10);
    config.graph.alpha = get_or<double>(graph, "alpha", "graph", 0.05);
    config.graph.transitive_reduction = get_or<bool>(graph, "transitive_reduction", "graph", false);

    if (doc.contains("simulation")) {
        const auto& sim = section(doc, "simulation");
        SimulationSettings settings;
        settings.n = get_or<std::size_t>(sim, "n", "simulation", 0);
        settings.seed = get_or<std::uint64_t>(sim, "seed", "simulation", 0);
        settings.spec = parse_spec(sim);
        try {
            validate_spec(settings.spec, config.grid, config.conditions, config.schema);
        } catch (const Error& e) {
            fail("simulation", e.what());
        }
        config.simulation = std::move(settings);
    }
    return config;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::missing_input, fmt::format("cannot open config '{}'", path.string()));
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(Errc::config, fmt::format("config '{}' is not valid JSON: {}", path.string(), e.what()));
    }
    return parse_config(doc);
}

json effective_settings(const Config& config) {
    json conditions = json::array();
    for (std::size_t c = 0; c < config.conditions.size(); ++c) {
        conditions.push_back({{"code", config.conditions.code(c)}, {"name", config.conditions.name(c)}});
    }
    json covariates = json::array();
    for (const auto& spec : config.schema.specs()) {
        json entry = {{"name", spec.name}, {"type", spec.categorical() ? "categorical" : "numeric"}};
        if (spec.categorical()) entry["levels"] = spec.levels;
        covariates.push_back(std::move(entry));
    }
    auto optional_size = [](const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); };
    const auto& logistic = config.annotation.logistic;
    json out = {
        {"age_grid", {{"origin", config.grid.origin}, {"t_max", config.grid.t_max}}},
        {"conditions", std::move(conditions)},
        {"covariates", std::move(covariates)},
        {"ingest", {{"max_rejected_fraction", config.ingest.max_rejected_fraction}}},
        {"clustering",
         {{"ward_variant", config.clustering.variant == WardVariant::ward_d ? "ward.D" : "ward.D2"},
          {"k_min", optional_size(config.clustering.k_min)},
          {"k_max", optional_size(config.clustering.k_max)},
          {"k", optional_size(config.clustering.k)}}},
        {"annotation",
         {{"alpha", config.annotation.alpha},
          {"index_condition",
           config.annotation.index_condition ? json(*config.annotation.index_condition) : json(nullptr)},
          {"variables", config.annotation.variables},
          {"logistic",
           {{"tolerance", logistic.tolerance},
            {"max_iterations", logistic.max_iterations},
            {"ridge", logistic.ridge},
            {"coefficient_limit", logistic.coefficient_limit}}}}},
        {"graph",
         {{"min_prevalence", config.graph.min_prevalence},
          {"min_support", config.graph.min_support},
          {"alpha", config.graph.alpha},
          {"transitive_reduction", config.graph.transitive_reduction}}},
    };
    if (config.simulation) {
        out["simulation"] = {{"n", config.simulation->n}, {"seed", config.simulation->seed}};
    }
    return out;
}

}  // namespace msa
