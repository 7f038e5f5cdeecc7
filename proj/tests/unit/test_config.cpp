#include "doctest.h"

#include "msa/config.hpp"
#include "msa/error.hpp"
#include "support.hpp"

using namespace msa;
using json = nlohmann::json;

namespace {

json minimal() { return json{{"conditions", {"hyp", "dm"}}}; }

std::string config_error(const json& doc) {
    try {
        (void)parse_config(doc);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::config);
        return e.what();
    }
    FAIL("no error");
    return {};
}

}  // namespace

TEST_CASE("defaults") {
    const auto config = parse_config(minimal());
    CHECK(config.grid.origin == 0);
    CHECK(config.grid.t_max == 105);
    CHECK(config.conditions.size() == 2);
    CHECK(config.conditions.name(1) == "dm");
    CHECK(config.schema.size() == 0);
    CHECK(config.ingest.max_rejected_fraction == 0.01);
    CHECK(config.clustering.variant == WardVariant::ward_d);
    CHECK_FALSE(config.clustering.k_min.has_value());
    CHECK_FALSE(config.clustering.k.has_value());
    CHECK(config.annotation.alpha == 0.05);
    CHECK(config.graph.min_prevalence == 0.2);
    CHECK(config.graph.min_support == 10);
    CHECK(config.graph.alpha == 0.05);
    CHECK_FALSE(config.graph.transitive_reduction);
    CHECK_FALSE(config.simulation.has_value());

    const auto settings = effective_settings(config);
    CHECK(settings.at("age_grid").at("t_max") == 105);
    CHECK(settings.at("clustering").at("ward_variant") == "ward.D");
    CHECK(settings.at("clustering").at("k_min").is_null());
    CHECK(settings.at("graph").at("min_support") == 10);
    CHECK(settings.at("annotation").at("logistic").contains("tolerance"));
}

TEST_CASE("a full document") {
    const auto config = parse_config(json::parse(R"({
        "age_grid": {"origin": 18, "t_max": 90},
        "conditions": ["hyp", {"code": "dm", "name": "Diabetes"}],
        "covariates": [{"name": "sex", "levels": ["F", "M"]}, {"name": "bmi", "type": "numeric"}],
        "ingest": {"max_rejected_fraction": 0.05},
        "clustering": {"ward_variant": "ward.D2", "k_min": 2, "k_max": 9},
        "annotation": {"alpha": 0.01, "index_condition": "dm", "variables": ["bmi"],
                       "logistic": {"max_iterations": 50}},
        "graph": {"min_prevalence": 0.3, "min_support": 5, "alpha": 0.1, "transitive_reduction": true},
        "simulation": {"n": 50, "seed": 7, "archetypes": [
            {"label": "x", "weight": 1, "censor": [60, 100], "death_probability": 0.1,
             "conditions": [{"code": "hyp", "prevalence": 0.5, "onset": {"min": 30, "max": 40}},
                            {"code": "dm", "onset": 50}],
             "effects": [{"covariate": "sex", "level": "M", "odds_multiplier": 2}]}],
            "covariates": [{"name": "sex", "probabilities": [0.4, 0.6]}, {"name": "bmi", "mean": 27, "sd": 4}]}
    })"));
    CHECK(config.grid.origin == 18);
    CHECK(config.grid.t_max == 90);
    CHECK(config.conditions.name(1) == "Diabetes");
    CHECK(config.schema[0].levels == std::vector<std::string>{"F", "M"});
    CHECK_FALSE(config.schema[1].categorical());
    CHECK(config.ingest.max_rejected_fraction == 0.05);
    CHECK(config.clustering.variant == WardVariant::ward_d2);
    CHECK(*config.clustering.k_min == 2);
    CHECK(*config.clustering.k_max == 9);
    CHECK(config.annotation.alpha == 0.01);
    CHECK(*config.annotation.index_condition == "dm");
    CHECK(config.annotation.logistic.max_iterations == 50);
    CHECK(config.graph.transitive_reduction);
    REQUIRE(config.simulation.has_value());
    const auto& arch = config.simulation->spec.archetypes.at(0);
    CHECK(arch.censor.min_age == 60);
    CHECK(arch.conditions[0].onset.max_age == 40);
    CHECK(arch.conditions[1].onset.min_age == 50);
    CHECK(arch.conditions[1].onset.max_age == 50);
    CHECK(arch.conditions[1].prevalence == 1.0);
    CHECK(arch.effects[0].odds_multiplier == 2.0);
    CHECK(config.simulation->spec.covariates[1].mean == 27.0);
    CHECK(effective_settings(config).at("simulation").at("seed") == 7);
}

TEST_CASE("errors name the offending key") {
    CHECK(config_error(json::array()).find("document must be a JSON object") != std::string::npos);
    CHECK(config_error(json::object()).find("'conditions'") != std::string::npos);
    CHECK(config_error(json{{"conditions", {"a", "a"}}}).find("conditions") != std::string::npos);
    CHECK(config_error(json{{"conditions", json::array()}}).find("conditions") != std::string::npos);

    auto doc = minimal();
    doc["age_grid"] = {{"t_max", "long"}};
    CHECK(config_error(doc).find("age_grid.t_max") != std::string::npos);

    doc = minimal();
    doc["age_grid"] = {{"t_max", 0}};
    CHECK(config_error(doc).find("age_grid.t_max") != std::string::npos);

    doc = minimal();
    doc["clustering"] = {{"ward_variant", "average"}};
    CHECK(config_error(doc).find("clustering.ward_variant") != std::string::npos);

    doc = minimal();
    doc["covariates"] = {{{"name", "sex"}}};
    CHECK(config_error(doc).find("levels") != std::string::npos);

    doc = minimal();
    doc["covariates"] = {{{"name", "x"}, {"type", "ordinal"}}};
    CHECK(config_error(doc).find("covariates.x.type") != std::string::npos);

    doc = minimal();
    doc["annotation"] = {{"index_condition", "ckd"}};
    CHECK(config_error(doc).find("annotation.index_condition") != std::string::npos);

    doc = minimal();
    doc["annotation"] = {{"variables", {"bmi"}}};
    CHECK(config_error(doc).find("annotation.variables") != std::string::npos);

    doc = minimal();
    doc["simulation"] = {{"archetypes", {{{"weight", 0.5}, {"censor", 80}}}}};
    CHECK(config_error(doc).find("simulation") != std::string::npos);

    doc = minimal();
    doc["simulation"] = {{"archetypes", {{{"weight", 1}}}}};
    CHECK(config_error(doc).find("censor") != std::string::npos);
}

TEST_CASE("loading from disk") {
    testing::TempDir dir("config");
    CHECK_THROWS_AS(load_config(dir.path() / "absent.json"), Error);
    testing::write_file(dir.path() / "bad.json", "{ not json");
    try {
        (void)load_config(dir.path() / "bad.json");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::config);
    }
    testing::write_file(dir.path() / "ok.json", minimal().dump());
    const auto config = load_config(dir.path() / "ok.json");
    CHECK(config.document == minimal());
}
