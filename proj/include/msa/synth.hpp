#pragma once

#include "msa/cohort.hpp"

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace msa {

// Inclusive integer age range; fixed when min_age == max_age.
struct AgeRange {
    int min_age = 0;
    int max_age = 0;
};

struct ConditionModel {
    std::string code;
    double prevalence = 1.0;
    AgeRange onset;
};

// Multiplies the odds of one level of a categorical covariate.
struct CovariateEffect {
    std::string covariate;
    std::string level;
    double odds_multiplier = 1.0;
};

struct Archetype {
    std::string label;
    double weight = 1.0;
    std::vector<ConditionModel> conditions;
    AgeRange censor;
    double death_probability = 0.0;
    std::vector<CovariateEffect> effects;
};

// Baseline covariate distribution: level probabilities for categorical
// covariates, normal(mean, sd) for numeric ones.
struct CovariateModel {
    std::string name;
    std::vector<double> level_probabilities;
    double mean = 0.0;
    double sd = 1.0;
};

struct SynthSpec {
    std::vector<Archetype> archetypes;
    std::vector<CovariateModel> covariates;  // schema covariates without a model are uniform / N(0,1)
};

struct SyntheticCohort {
    Cohort cohort;
    std::vector<int> labels;  // 1-based archetype index per subject
};

// Throws invalid_argument for weights not summing to 1, ranges outside the
// grid, or effects naming unknown covariates/levels.
void validate_spec(const SynthSpec& spec, const AgeGrid& grid, const ConditionRegistry& conditions,
                   const CovariateSchema& schema);

// Subject i draws from its own stream keyed by (seed, i), so the output does
// not depend on the worker count. Onsets at or after the drawn censoring age
// are not observed and are dropped.
SyntheticCohort generate(const SynthSpec& spec, const AgeGrid& grid, const ConditionRegistry& conditions,
                         const CovariateSchema& schema, std::size_t n, std::uint64_t seed, unsigned workers = 0);

std::mt19937_64 keyed_stream(std::uint64_t seed, std::uint64_t key);

}  // namespace msa
