#pragma once

#include "msa/cohort.hpp"
#include "msa/hac.hpp"
#include "msa/stats.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace msa {

enum class Block { demographics, conditions };

std::string_view block_name(Block block) noexcept;

// One annotation variable, values aligned with the cohort. Categorical values
// are level indices.
struct Variable {
    std::string name;
    Block block = Block::demographics;
    bool categorical = true;
    std::vector<std::string> levels;
    std::vector<std::optional<double>> values;
    bool modelled = true;  // enters the logistic fits, not only the tables
};

struct AnnotationSettings {
    double alpha = 0.05;
    std::optional<std::string> index_condition;  // adds its onset age as a numeric covariate
    std::vector<std::string> variables;          // covariates to use; empty = all declared
    LogisticOptions logistic;
};

// Demographics block: the selected covariates, multimorbidity index, index
// onset age, plus death and end-of-follow-up age (tables only). Conditions
// block: one absent/present indicator per condition. Throws invalid_argument
// for a variable that is not in the schema.
std::vector<Variable> annotation_variables(const Cohort& cohort, const AnnotationSettings& settings);

struct DescriptiveRow {
    std::string variable;
    std::string level;
    std::vector<std::string> cells;  // one per cluster
    std::string total;
    std::optional<TestResult> test;  // on the first row of each variable
};

struct DescriptiveTable {
    Block block = Block::demographics;
    std::vector<DescriptiveRow> rows;
};

struct HeatmapCell {
    std::string variable;
    std::string level;
    int cluster = 0;
    double log_or = 0.0;
    double p_value = 1.0;
    bool masked = true;
    bool unstable = false;
    bool aliased = false;
};

struct HeatmapGrid {
    Block block = Block::demographics;
    double alpha = 0.05;
    std::vector<HeatmapCell> cells;  // row-major: design column, then cluster

    [[nodiscard]] std::size_t unmasked() const;
    [[nodiscard]] const HeatmapCell* find(std::string_view variable, std::string_view level, int cluster) const;
};

// Re-applies the mask at another significance level.
HeatmapGrid remask(HeatmapGrid grid, double alpha);

struct ClusterReport {
    std::size_t k = 0;
    std::vector<std::size_t> cluster_sizes;  // index 0 = cluster 1
    DescriptiveTable demographics;
    DescriptiveTable conditions;
    HeatmapGrid demographics_heatmap;
    HeatmapGrid conditions_heatmap;
    std::vector<std::string> warnings;
};

// One-vs-rest logistic fits of each cluster indicator on the modelled
// variables of one block. Constant variables are dropped with a warning;
// categorical variables are coded against their most frequent level.
HeatmapGrid cluster_heatmap(const std::vector<Variable>& variables, Block block, const Partition& partition,
                            const AnnotationSettings& settings, std::vector<std::string>& warnings,
                            unsigned workers = 0);

DescriptiveTable describe(const std::vector<Variable>& variables, Block block, const Partition& partition,
                          std::vector<std::string>& warnings);

// Throws shape_mismatch when the partition does not cover the cohort.
ClusterReport annotate(const Cohort& cohort, const Partition& partition, const AnnotationSettings& settings,
                       unsigned workers = 0);

// variable,level,cluster_1..cluster_k,total,p,test
void write_descriptive_csv(const DescriptiveTable& table, std::size_t k, std::ostream& out);
// variable,level,cluster,log_or,p,masked; log_or and p are NA for unstable or aliased cells
void write_heatmap_csv(const HeatmapGrid& grid, std::ostream& out);

}  // namespace msa
