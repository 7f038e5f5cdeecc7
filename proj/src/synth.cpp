#include "msa/synth.hpp"

#include "msa/error.hpp"
#include "msa/parallel.hpp"

#include <cmath>
#include <numeric>

#include <fmt/core.h>

namespace msa {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

int draw_age(std::mt19937_64& rng, AgeRange range) {
    if (range.min_age == range.max_age) return range.min_age;
    return std::uniform_int_distribution<int>(range.min_age, range.max_age)(rng);
}

std::size_t draw_index(std::mt19937_64& rng, const std::vector<double>& probabilities) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        acc += probabilities[i];
        if (u < acc) return i;
    }
    return probabilities.size() - 1;
}

void check_range(AgeRange range, int lo, int hi, const std::string& what) {
    if (range.min_age > range.max_age || range.min_age < lo || range.max_age > hi) {
        throw Error(Errc::invalid_argument,
                    fmt::format("{} range [{}, {}] outside [{}, {}]", what, range.min_age, range.max_age, lo, hi));
    }
}

// Per-archetype level probabilities for every categorical covariate.
std::vector<std::vector<double>> level_probabilities(const SynthSpec& spec, const CovariateSchema& schema,
                                                     const Archetype& archetype) {
    std::vector<std::vector<double>> probs(schema.size());
    for (std::size_t c = 0; c < schema.size(); ++c) {
        const auto& cov = schema[c];
        if (!cov.categorical()) continue;
        probs[c].assign(cov.levels.size(), 1.0 / static_cast<double>(cov.levels.size()));
        for (const auto& model : spec.covariates) {
            if (model.name == cov.name && !model.level_probabilities.empty()) probs[c] = model.level_probabilities;
        }
    }
    for (const auto& effect : archetype.effects) {
        const std::size_t c = *schema.find(effect.covariate);
        const std::size_t level = *schema[c].level_index(effect.level);
        auto& p = probs[c];
        const double base = p[level];
        if (base <= 0.0 || base >= 1.0) continue;
        const double odds = effect.odds_multiplier * base / (1.0 - base);
        const double shifted = odds / (1.0 + odds);
        const double scale = (1.0 - shifted) / (1.0 - base);
        for (std::size_t l = 0; l < p.size(); ++l) p[l] = l == level ? shifted : p[l] * scale;
    }
    return probs;
}

}  // namespace

std::mt19937_64 keyed_stream(std::uint64_t seed, std::uint64_t key) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(key + 0x632BE59BD9B4E019ULL)));
}

void validate_spec(const SynthSpec& spec, const AgeGrid& grid, const ConditionRegistry& conditions,
                   const CovariateSchema& schema) {
    if (spec.archetypes.empty()) throw Error(Errc::invalid_argument, "no archetypes");
    double total = 0.0;
    for (const auto& a : spec.archetypes) {
        if (!(a.weight >= 0.0)) throw Error(Errc::invalid_argument, fmt::format("archetype '{}' has a negative weight", a.label));
        total += a.weight;
        check_range(a.censor, grid.origin + 1, grid.origin + grid.t_max, fmt::format("censoring age of '{}'", a.label));
        if (!(a.death_probability >= 0.0 && a.death_probability <= 1.0)) {
            throw Error(Errc::invalid_argument, fmt::format("death probability of '{}' outside [0, 1]", a.label));
        }
        for (const auto& c : a.conditions) {
            (void)conditions.column_of(c.code);
            check_range(c.onset, grid.origin, grid.last_age(), fmt::format("onset of '{}' in '{}'", c.code, a.label));
            if (!(c.prevalence >= 0.0 && c.prevalence <= 1.0)) {
                throw Error(Errc::invalid_argument, fmt::format("prevalence of '{}' in '{}' outside [0, 1]", c.code, a.label));
            }
        }
        for (const auto& e : a.effects) {
            auto c = schema.find(e.covariate);
            if (!c || !schema[*c].categorical() || !schema[*c].level_index(e.level)) {
                throw Error(Errc::invalid_argument,
                            fmt::format("effect on unknown categorical level {}={}", e.covariate, e.level));
            }
            if (!(e.odds_multiplier > 0.0)) throw Error(Errc::invalid_argument, "odds multiplier must be positive");
        }
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw Error(Errc::invalid_argument, fmt::format("archetype weights sum to {}, not 1", total));
    }
    for (const auto& m : spec.covariates) {
        auto c = schema.find(m.name);
        if (!c) throw Error(Errc::invalid_argument, fmt::format("model for undeclared covariate '{}'", m.name));
        if (schema[*c].categorical()) {
            if (!m.level_probabilities.empty()) {
                const double sum = std::accumulate(m.level_probabilities.begin(), m.level_probabilities.end(), 0.0);
                if (m.level_probabilities.size() != schema[*c].levels.size() || std::abs(sum - 1.0) > 1e-9) {
                    throw Error(Errc::invalid_argument, fmt::format("bad level probabilities for '{}'", m.name));
                }
            }
        } else if (!(m.sd >= 0.0)) {
            throw Error(Errc::invalid_argument, fmt::format("negative sd for '{}'", m.name));
        }
    }
}

SyntheticCohort generate(const SynthSpec& spec, const AgeGrid& grid, const ConditionRegistry& conditions,
                         const CovariateSchema& schema, std::size_t n, std::uint64_t seed, unsigned workers) {
    if (n < 1) throw Error(Errc::invalid_argument, "cohort size must be at least 1");
    validate_spec(spec, grid, conditions, schema);

    std::vector<double> weights;
    std::vector<std::vector<std::vector<double>>> level_probs;
    for (const auto& a : spec.archetypes) {
        weights.push_back(a.weight);
        level_probs.push_back(level_probabilities(spec, schema, a));
    }
    std::vector<std::pair<double, double>> numeric(schema.size(), {0.0, 1.0});
    for (const auto& m : spec.covariates) numeric[*schema.find(m.name)] = {m.mean, m.sd};

    std::vector<Subject> subjects(n);
    std::vector<int> labels(n, 0);
    parallel_chunks(n, 256, workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            auto rng = keyed_stream(seed, i);
            const std::size_t which = draw_index(rng, weights);
            const auto& archetype = spec.archetypes[which];
            labels[i] = static_cast<int>(which) + 1;

            SubjectRecord record;
            record.subject_id = fmt::format("S{:06d}", i + 1);
            record.censor_age = draw_age(rng, archetype.censor);
            record.death = std::bernoulli_distribution(archetype.death_probability)(rng);

            std::vector<EventRecord> events;
            for (const auto& model : archetype.conditions) {
                const bool present = std::bernoulli_distribution(model.prevalence)(rng);
                const int onset = draw_age(rng, model.onset);
                if (present && onset < record.censor_age) events.push_back({record.subject_id, model.code, onset});
            }

            record.covariates.resize(schema.size());
            for (std::size_t c = 0; c < schema.size(); ++c) {
                if (schema[c].categorical()) {
                    record.covariates[c] = static_cast<double>(draw_index(rng, level_probs[which][c]));
                } else {
                    record.covariates[c] =
                        std::normal_distribution<double>(numeric[c].first, numeric[c].second)(rng);
                }
            }

            auto states = build_state_matrix(events, conditions, grid);
            auto follow_up = build_follow_up(record.censor_age, grid);
            subjects[i] = {std::move(record), std::move(states), std::move(follow_up)};
        }
    });
    return {Cohort(grid, conditions, schema, std::move(subjects)), std::move(labels)};
}

}  // namespace msa
