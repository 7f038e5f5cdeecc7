#include "msa/trajgraph.hpp"

#include "msa/distributions.hpp"
#include "msa/error.hpp"

#include <algorithm>
#include <array>
#include <ostream>
#include <tuple>

#include <fmt/core.h>

namespace msa {

namespace {

constexpr std::array<const char*, 20> kPalette{
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
};

using Adjacency = std::vector<std::vector<std::size_t>>;

bool reaches(const Adjacency& out, std::size_t from, std::size_t to, std::pair<std::size_t, std::size_t> skip = {0, 0},
             bool use_skip = false) {
    std::vector<bool> seen(out.size(), false);
    std::vector<std::size_t> stack{from};
    seen[from] = true;
    while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        for (std::size_t v : out[u]) {
            if (use_skip && u == skip.first && v == skip.second) continue;
            if (v == to) return true;
            if (!seen[v]) {
                seen[v] = true;
                stack.push_back(v);
            }
        }
    }
    return false;
}

// Dense re-indexing of the graph's nodes.
struct LocalIndex {
    std::vector<std::size_t> local;  // condition -> local id (npos if absent)
    Adjacency out;
};

LocalIndex index_graph(const TransitionGraph& graph, std::size_t conditions) {
    LocalIndex idx;
    idx.local.assign(conditions, static_cast<std::size_t>(-1));
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) idx.local.at(graph.nodes[i].condition) = i;
    idx.out.resize(graph.nodes.size());
    for (const auto& e : graph.edges) idx.out[idx.local.at(e.from)].push_back(idx.local.at(e.to));
    return idx;
}

std::size_t max_condition(const TransitionGraph& graph) {
    std::size_t m = 0;
    for (const auto& n : graph.nodes) m = std::max(m, n.condition + 1);
    return m;
}

}  // namespace

int TransitionGraph::layer_count() const {
    int layers = 0;
    for (const auto& n : nodes) layers = std::max(layers, n.layer + 1);
    return layers;
}

const GraphNode* TransitionGraph::node(std::size_t condition) const {
    for (const auto& n : nodes) {
        if (n.condition == condition) return &n;
    }
    return nullptr;
}

bool TransitionGraph::has_edge(std::size_t from, std::size_t to) const {
    return std::any_of(edges.begin(), edges.end(), [&](const GraphEdge& e) { return e.from == from && e.to == to; });
}

int median_onset(const Cohort& cohort, std::span<const std::size_t> members, std::size_t condition) {
    std::vector<int> ages;
    for (std::size_t m : members) {
        if (auto age = cohort.onset_age(m, condition)) ages.push_back(*age);
    }
    if (ages.empty()) {
        throw Error(Errc::invalid_argument,
                    fmt::format("no member has condition '{}'", cohort.conditions().code(condition)));
    }
    const std::size_t lower = (ages.size() - 1) / 2;
    std::nth_element(ages.begin(), ages.begin() + static_cast<std::ptrdiff_t>(lower), ages.end());
    return ages[lower];
}

int median_onset(const Cohort& cohort, const Partition& partition, int cluster, std::size_t condition) {
    const auto members = partition.members(cluster);
    return median_onset(cohort, members, condition);
}

std::vector<int> longest_path_layers(std::size_t count, std::span<const std::pair<std::size_t, std::size_t>> edges) {
    std::vector<std::vector<std::size_t>> out(count);
    std::vector<std::size_t> indegree(count, 0);
    for (auto [u, v] : edges) {
        out.at(u).push_back(v);
        ++indegree.at(v);
    }
    std::vector<int> layer(count, 0);
    std::vector<std::size_t> ready;
    for (std::size_t v = 0; v < count; ++v) {
        if (indegree[v] == 0) ready.push_back(v);
    }
    std::size_t visited = 0;
    while (!ready.empty()) {
        const std::size_t u = ready.back();
        ready.pop_back();
        ++visited;
        for (std::size_t v : out[u]) {
            layer[v] = std::max(layer[v], layer[u] + 1);
            if (--indegree[v] == 0) ready.push_back(v);
        }
    }
    if (visited != count) throw Error(Errc::invalid_argument, "layering requires an acyclic graph");
    return layer;
}

TransitionGraph build_graph(const Cohort& cohort, const Partition& partition, int cluster,
                            const GraphThresholds& thresholds) {
    if (partition.labels.size() != cohort.size()) throw Error(Errc::shape_mismatch, "partition does not match cohort");
    const auto members = partition.members(cluster);
    if (members.empty()) throw Error(Errc::out_of_range, fmt::format("unknown cluster {}", cluster));

    const std::size_t k = cohort.conditions().size();
    // onset[m][l] for the cluster's members; -1 when absent.
    std::vector<std::vector<int>> onset(members.size(), std::vector<int>(k, -1));
    for (std::size_t m = 0; m < members.size(); ++m) {
        for (std::size_t l = 0; l < k; ++l) {
            if (auto age = cohort.onset_age(members[m], l)) onset[m][l] = *age;
        }
    }

    TransitionGraph graph;
    graph.cluster = cluster;
    graph.members = members.size();
    for (std::size_t l = 0; l < k; ++l) {
        const auto count = std::count_if(onset.begin(), onset.end(), [&](const auto& row) { return row[l] >= 0; });
        const double prevalence = static_cast<double>(count) / static_cast<double>(members.size());
        if (count == 0 || prevalence < thresholds.min_prevalence) continue;
        graph.nodes.push_back({l, median_onset(cohort, members, l), prevalence, 0});
    }

    std::vector<GraphEdge> candidates;
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < graph.nodes.size(); ++j) {
            const std::size_t a = graph.nodes[i].condition;
            const std::size_t b = graph.nodes[j].condition;
            int support = 0;
            int a_first = 0;
            int b_first = 0;
            for (const auto& row : onset) {
                if (row[a] < 0 || row[b] < 0) continue;
                ++support;
                if (row[a] < row[b]) ++a_first;
                if (row[b] < row[a]) ++b_first;
            }
            const int trials = a_first + b_first;
            if (support < thresholds.min_support || trials == 0 || a_first == b_first) continue;
            const bool forward = a_first > b_first;
            const int wins = forward ? a_first : b_first;
            const double p = std::min(1.0, 2.0 * binomial_half_upper_tail(wins, trials));
            if (!(p < thresholds.alpha)) continue;
            candidates.push_back({forward ? a : b, forward ? b : a, support, trials,
                                  static_cast<double>(wins) / static_cast<double>(trials), p});
        }
    }

    std::sort(candidates.begin(), candidates.end(), [](const GraphEdge& x, const GraphEdge& y) {
        return std::tie(x.p_value, y.support, x.from, x.to) < std::tie(y.p_value, x.support, y.from, y.to);
    });
    std::vector<std::size_t> local(k, 0);
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) local[graph.nodes[i].condition] = i;
    Adjacency out(graph.nodes.size());
    for (const auto& e : candidates) {
        if (reaches(out, local[e.to], local[e.from])) continue;
        out[local[e.from]].push_back(local[e.to]);
        graph.edges.push_back(e);
    }
    std::sort(graph.edges.begin(), graph.edges.end(),
              [](const GraphEdge& x, const GraphEdge& y) { return std::tie(x.from, x.to) < std::tie(y.from, y.to); });

    std::vector<std::pair<std::size_t, std::size_t>> local_edges;
    for (const auto& e : graph.edges) local_edges.emplace_back(local[e.from], local[e.to]);
    const auto layers = longest_path_layers(graph.nodes.size(), local_edges);
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) graph.nodes[i].layer = layers[i];

    if (thresholds.transitive_reduction) return transitive_reduction(graph);
    return graph;
}

TransitionGraph transitive_reduction(const TransitionGraph& graph) {
    const auto idx = index_graph(graph, max_condition(graph));
    TransitionGraph reduced = graph;
    reduced.edges.clear();
    for (const auto& e : graph.edges) {
        const std::size_t u = idx.local[e.from];
        const std::size_t v = idx.local[e.to];
        if (!reaches(idx.out, u, v, {u, v}, true)) reduced.edges.push_back(e);
    }
    return reduced;
}

std::vector<std::pair<std::size_t, std::size_t>> reachability(const TransitionGraph& graph) {
    const auto idx = index_graph(graph, max_condition(graph));
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& a : graph.nodes) {
        for (const auto& b : graph.nodes) {
            if (a.condition != b.condition && reaches(idx.out, idx.local[a.condition], idx.local[b.condition])) {
                pairs.emplace_back(a.condition, b.condition);
            }
        }
    }
    return pairs;
}

void write_dot(const TransitionGraph& graph, const ConditionRegistry& conditions, std::ostream& out) {
    out << fmt::format("digraph cluster_{} {{\n", graph.cluster);
    out << fmt::format("  graph [label=\"cluster {} (n={})\", rankdir=TB];\n", graph.cluster, graph.members);
    out << "  node [shape=circle, style=filled, fontsize=10];\n";
    for (const auto& n : graph.nodes) {
        out << fmt::format(
            "  \"{}\" [label=\"{}\", pos=\"{},{}!\", fillcolor=\"{}\", layer={}, median_onset={}, prevalence={:.4f}];\n",
            conditions.code(n.condition), conditions.name(n.condition), n.median_onset_age, -n.layer,
            kPalette[n.condition % kPalette.size()], n.layer, n.median_onset_age, n.prevalence);
    }
    for (const auto& e : graph.edges) {
        out << fmt::format("  \"{}\" -> \"{}\" [support={}, forward_fraction={:.4f}, p_value={:.6g}];\n",
                           conditions.code(e.from), conditions.code(e.to), e.support, e.forward_fraction, e.p_value);
    }
    out << "}\n";
}

nlohmann::json to_json(const TransitionGraph& graph, const ConditionRegistry& conditions) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : graph.nodes) {
        nodes.push_back({{"condition", conditions.code(n.condition)},
                         {"name", conditions.name(n.condition)},
                         {"median_onset_age", n.median_onset_age},
                         {"prevalence", n.prevalence},
                         {"layer", n.layer}});
    }
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : graph.edges) {
        edges.push_back({{"from", conditions.code(e.from)},
                         {"to", conditions.code(e.to)},
                         {"support", e.support},
                         {"trials", e.trials},
                         {"forward_fraction", e.forward_fraction},
                         {"p_value", e.p_value}});
    }
    return {{"cluster", graph.cluster},
            {"members", graph.members},
            {"layers", graph.layer_count()},
            {"nodes", std::move(nodes)},
            {"edges", std::move(edges)}};
}

}  // namespace msa
