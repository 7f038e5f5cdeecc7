#pragma once

#include "msa/dissim.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace msa {

// ward_d applies the Lance-Williams recurrence to the supplied values;
// ward_d2 squares them first and reports square-rooted heights.
enum class WardVariant { ward_d, ward_d2 };

struct MergeStep {
    std::size_t left = 0;   // smaller cluster id
    std::size_t right = 0;  // larger cluster id
    double height = 0.0;
    std::size_t size = 0;

    bool operator==(const MergeStep&) const = default;
};

// Leaves are 0..n-1; the cluster formed at step s gets id n + s.
class Dendrogram {
public:
    Dendrogram() = default;
    // Throws invalid_argument if the merges are not a valid binary tree.
    Dendrogram(std::size_t leaves, std::vector<MergeStep> merges);

    [[nodiscard]] std::size_t leaves() const noexcept { return leaves_; }
    [[nodiscard]] const std::vector<MergeStep>& merges() const noexcept { return merges_; }
    [[nodiscard]] std::size_t cluster_size(std::size_t id) const;

    bool operator==(const Dendrogram&) const = default;

private:
    std::size_t leaves_ = 0;
    std::vector<MergeStep> merges_;
};

struct Partition {
    std::size_t k = 0;
    std::vector<int> labels;  // 1..k, 1 = largest cluster

    [[nodiscard]] std::vector<std::size_t> cluster_sizes() const;
    [[nodiscard]] std::vector<std::size_t> members(int label) const;
};

// Nearest-neighbour chain Ward clustering. Consumes a copy of the condensed
// matrix. Throws nan_input.
Dendrogram ward_linkage(const DissimilarityMatrix& d, WardVariant variant = WardVariant::ward_d);
// Same, overwriting the caller's matrix in place.
Dendrogram ward_linkage_in_place(DissimilarityMatrix& d, WardVariant variant = WardVariant::ward_d);

// Undo the last k-1 merges. Labels are ordered by decreasing size, ties by
// smallest member id. Throws out_of_range.
Partition cut(const Dendrogram& dendrogram, std::size_t k);

// Relabels an arbitrary labelling into the canonical size-ordered form.
Partition canonical_partition(std::span<const std::size_t> raw_labels);

double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

// step,left,right,height,size
void write_dendrogram_csv(const Dendrogram& dendrogram, std::ostream& out);
// The leaf count is inferred as rows + 1.
Dendrogram read_dendrogram_csv(std::istream& in);
// Nested-parenthesis tree with branch lengths.
std::string to_newick(const Dendrogram& dendrogram, std::span<const std::string> leaf_names);

}  // namespace msa
