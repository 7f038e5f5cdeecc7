#pragma once

#include "msa/annotate.hpp"
#include "msa/cohort.hpp"
#include "msa/hac.hpp"
#include "msa/synth.hpp"
#include "msa/trajgraph.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace msa {

struct IngestSettings {
    double max_rejected_fraction = 0.01;
};

struct ClusteringSettings {
    WardVariant variant = WardVariant::ward_d;
    // The partition-size search range has no default; stages needing it
    // fail with a config error when it is absent.
    std::optional<std::size_t> k_min;
    std::optional<std::size_t> k_max;
    std::optional<std::size_t> k;  // fixed size, bypasses the search
};

struct SimulationSettings {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    SynthSpec spec;
};

// Everything a run depends on, from one JSON document.
struct Config {
    AgeGrid grid;
    ConditionRegistry conditions;
    CovariateSchema schema;
    IngestSettings ingest;
    ClusteringSettings clustering;
    AnnotationSettings annotation;
    GraphThresholds graph;
    std::optional<SimulationSettings> simulation;
    nlohmann::json document;  // as read
};

// Throws Errc::config with the offending key in the message.
Config parse_config(const nlohmann::json& document);
Config load_config(const std::filesystem::path& path);

// Every setting a run used, defaults included.
nlohmann::json effective_settings(const Config& config);

}  // namespace msa
