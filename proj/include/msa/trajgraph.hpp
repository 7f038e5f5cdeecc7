#pragma once

#include "msa/cohort.hpp"
#include "msa/hac.hpp"

#include "json.hpp"

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace msa {

struct GraphThresholds {
    double min_prevalence = 0.2;  // node kept if this fraction of the cluster has the condition
    int min_support = 10;         // members having both conditions
    double alpha = 0.05;          // edge significance level
    bool transitive_reduction = false;
};

struct GraphNode {
    std::size_t condition = 0;
    int median_onset_age = 0;
    double prevalence = 0.0;
    int layer = 0;
};

struct GraphEdge {
    std::size_t from = 0;  // condition columns
    std::size_t to = 0;
    int support = 0;        // members having both conditions
    int trials = 0;         // of those, members with distinct onset ages
    double forward_fraction = 0.0;
    double p_value = 1.0;
};

struct TransitionGraph {
    int cluster = 0;
    std::size_t members = 0;
    std::vector<GraphNode> nodes;  // ordered by condition column
    std::vector<GraphEdge> edges;  // ordered by (from, to)

    [[nodiscard]] int layer_count() const;
    [[nodiscard]] const GraphNode* node(std::size_t condition) const;
    [[nodiscard]] bool has_edge(std::size_t from, std::size_t to) const;
};

// Lower median of the onset ages among members having the condition. Throws
// invalid_argument when no member has it.
int median_onset(const Cohort& cohort, std::span<const std::size_t> members, std::size_t condition);
int median_onset(const Cohort& cohort, const Partition& partition, int cluster, std::size_t condition);

// Edge a -> b when, among members with both conditions (support >= min_support),
// onset(a) < onset(b) in more than half of the untied members and the exact
// two-sided sign test gives p < alpha. Edges that would close a cycle are
// skipped, strongest evidence first. Layers are longest-path from sources.
// Throws out_of_range for an unknown cluster label.
TransitionGraph build_graph(const Cohort& cohort, const Partition& partition, int cluster,
                            const GraphThresholds& thresholds);

// Longest-path layering of a DAG on `count` vertices; throws invalid_argument on a cycle.
std::vector<int> longest_path_layers(std::size_t count, std::span<const std::pair<std::size_t, std::size_t>> edges);

// Drops every edge implied by a longer path.
TransitionGraph transitive_reduction(const TransitionGraph& graph);

// Vertex pairs (u, v), u != v, with a directed path u ~> v.
std::vector<std::pair<std::size_t, std::size_t>> reachability(const TransitionGraph& graph);

void write_dot(const TransitionGraph& graph, const ConditionRegistry& conditions, std::ostream& out);
nlohmann::json to_json(const TransitionGraph& graph, const ConditionRegistry& conditions);

}  // namespace msa
