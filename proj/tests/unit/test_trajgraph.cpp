#include "doctest.h"

#include "msa/error.hpp"
#include "msa/trajgraph.hpp"
#include "support.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

using namespace msa;
using namespace msa::testing;

namespace {

const std::vector<std::string> kCodes = {"a", "b", "c", "d"};

Partition single_cluster(std::size_t n) { return Partition{1, std::vector<int>(n, 1)}; }

}  // namespace

TEST_CASE("deterministic chain gives three layers") {
    std::mt19937_64 rng(1);
    std::vector<std::vector<int>> onsets;
    for (int s = 0; s < 30; ++s) {
        const int base = std::uniform_int_distribution<int>(20, 40)(rng);
        onsets.push_back({base, base + 5, base + 12, -1});
    }
    const auto cohort = cohort_from_onsets(onsets, kCodes);
    const auto graph = build_graph(cohort, single_cluster(30), 1, GraphThresholds{});
    CHECK(graph.nodes.size() == 3);
    CHECK(graph.layer_count() == 3);
    CHECK(graph.has_edge(0, 1));
    CHECK(graph.has_edge(1, 2));
    CHECK(graph.has_edge(0, 2));
    CHECK(graph.node(0)->layer == 0);
    CHECK(graph.node(1)->layer == 1);
    CHECK(graph.node(2)->layer == 2);
    CHECK(graph.node(3) == nullptr);
    for (const auto& e : graph.edges) {
        CHECK(graph.node(e.from)->layer < graph.node(e.to)->layer);
        CHECK(e.support == 30);
        CHECK(e.forward_fraction == 1.0);
    }

    GraphThresholds reduce;
    reduce.transitive_reduction = true;
    const auto reduced = build_graph(cohort, single_cluster(30), 1, reduce);
    CHECK(reduced.edges.size() == 2);
    CHECK_FALSE(reduced.has_edge(0, 2));
    CHECK(reachability(reduced) == reachability(graph));
    CHECK(reduced.layer_count() == 3);
}

TEST_CASE("independent onsets rarely produce edges") {
    std::mt19937_64 rng(2);
    int with_edge = 0;
    const int trials = 400;
    for (int t = 0; t < trials; ++t) {
        std::vector<std::vector<int>> onsets;
        for (int s = 0; s < 40; ++s) {
            onsets.push_back({std::uniform_int_distribution<int>(20, 80)(rng), std::uniform_int_distribution<int>(20, 80)(rng),
                              -1, -1});
        }
        const auto cohort = cohort_from_onsets(onsets, kCodes);
        if (!build_graph(cohort, single_cluster(40), 1, GraphThresholds{}).edges.empty()) ++with_edge;
    }
    CHECK(static_cast<double>(with_edge) / trials <= 0.07);
}

TEST_CASE("thresholds prune nodes and edges") {
    std::vector<std::vector<int>> onsets;
    for (int s = 0; s < 20; ++s) onsets.push_back({30, 40, s < 3 ? 50 : -1, -1});
    const auto cohort = cohort_from_onsets(onsets, kCodes);

    const auto graph = build_graph(cohort, single_cluster(20), 1, GraphThresholds{});
    CHECK(graph.nodes.size() == 2);  // c has prevalence 0.15 < 0.2
    CHECK(graph.has_edge(0, 1));

    GraphThresholds strict;
    strict.min_support = 21;
    CHECK(build_graph(cohort, single_cluster(20), 1, strict).edges.empty());

    GraphThresholds low;
    low.min_prevalence = 0.1;
    low.min_support = 3;
    const auto wide = build_graph(cohort, single_cluster(20), 1, low);
    CHECK(wide.nodes.size() == 3);
    CHECK_FALSE(wide.has_edge(1, 2));  // 3 of 3 in order gives p = 0.25
}

TEST_CASE("ties in onset age are not evidence") {
    std::vector<std::vector<int>> onsets;
    for (int s = 0; s < 30; ++s) onsets.push_back({40, 40, -1, -1});
    const auto cohort = cohort_from_onsets(onsets, kCodes);
    const auto graph = build_graph(cohort, single_cluster(30), 1, GraphThresholds{});
    CHECK(graph.edges.empty());
    CHECK(graph.layer_count() == 1);
}

TEST_CASE("median onset uses the lower median") {
    const std::vector<std::vector<int>> onsets = {{10, -1, -1, -1}, {20, -1, -1, -1}, {30, -1, -1, -1}, {40, -1, -1, -1}};
    const auto cohort = cohort_from_onsets(onsets, kCodes);
    const std::vector<std::size_t> all = {0, 1, 2, 3};
    CHECK(median_onset(cohort, all, 0) == 20);
    const std::vector<std::size_t> three = {0, 1, 2};
    CHECK(median_onset(cohort, three, 0) == 20);
    CHECK_THROWS_AS(median_onset(cohort, all, 1), Error);
}

TEST_CASE("per-cluster graphs only see their members") {
    std::vector<std::vector<int>> onsets;
    for (int s = 0; s < 20; ++s) onsets.push_back({30, 45, -1, -1});
    for (int s = 0; s < 20; ++s) onsets.push_back({50, 35, -1, -1});
    const auto cohort = cohort_from_onsets(onsets, kCodes);
    Partition p{2, {}};
    for (int s = 0; s < 40; ++s) p.labels.push_back(s < 20 ? 1 : 2);
    const auto g1 = build_graph(cohort, p, 1, GraphThresholds{});
    const auto g2 = build_graph(cohort, p, 2, GraphThresholds{});
    CHECK(g1.has_edge(0, 1));
    CHECK(g2.has_edge(1, 0));
    CHECK(g1.node(1)->median_onset_age == 45);
    CHECK(g2.node(0)->median_onset_age == 50);
    CHECK_THROWS_AS(build_graph(cohort, p, 3, GraphThresholds{}), Error);
}

TEST_CASE("longest-path layering") {
    const std::vector<std::pair<std::size_t, std::size_t>> edges = {{0, 1}, {1, 2}, {0, 2}, {3, 2}};
    CHECK(longest_path_layers(4, edges) == std::vector<int>{0, 1, 2, 0});
    const std::vector<std::pair<std::size_t, std::size_t>> cycle = {{0, 1}, {1, 0}};
    CHECK_THROWS_AS(longest_path_layers(2, cycle), Error);
}

TEST_CASE("random graphs stay acyclic with downward edges") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::vector<int>> onsets;
        for (int s = 0; s < 60; ++s) {
            std::vector<int> row;
            for (int l = 0; l < 4; ++l) {
                const int centre = 20 + 10 * ((l + trial) % 4);
                row.push_back(std::bernoulli_distribution(0.8)(rng) ? centre + std::uniform_int_distribution<int>(-12, 12)(rng) : -1);
            }
            onsets.push_back(row);
        }
        const auto cohort = cohort_from_onsets(onsets, kCodes);
        const auto g = build_graph(cohort, single_cluster(60), 1, GraphThresholds{});
        for (const auto& e : g.edges) CHECK(g.node(e.from)->layer < g.node(e.to)->layer);
        GraphThresholds open;
        open.alpha = 1.0;
        const auto super = build_graph(cohort, single_cluster(60), 1, open);
        for (const auto& e : g.edges) CHECK(super.has_edge(e.from, e.to));
        const auto reach = reachability(g);
        const std::set<std::pair<std::size_t, std::size_t>> pairs(reach.begin(), reach.end());
        for (auto [u, v] : reach) CHECK_FALSE(pairs.count({v, u}));
    }
}

TEST_CASE("dot and json exports") {
    std::vector<std::vector<int>> onsets;
    for (int s = 0; s < 20; ++s) onsets.push_back({30, 45, -1, -1});
    const auto cohort = cohort_from_onsets(onsets, kCodes);
    const auto g = build_graph(cohort, single_cluster(20), 1, GraphThresholds{});
    std::ostringstream dot;
    write_dot(g, cohort.conditions(), dot);
    CHECK(dot.str().rfind("digraph cluster_1 {", 0) == 0);
    CHECK(dot.str().find("pos=\"30,0!\"") != std::string::npos);
    CHECK(dot.str().find("pos=\"45,-1!\"") != std::string::npos);
    CHECK(dot.str().find("->") != std::string::npos);
    const auto j = to_json(g, cohort.conditions());
    CHECK(j.at("cluster") == 1);
    CHECK(j.at("nodes").size() == 2);
    CHECK(j.at("edges").size() == 1);
    CHECK(j.at("edges")[0].at("from") == "a");
}
