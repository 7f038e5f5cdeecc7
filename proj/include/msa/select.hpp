#pragma once

#include "msa/dissim.hpp"
#include "msa/hac.hpp"

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace msa {

// Hubert-Levin C index of one partition: (S_w - S_min) / (S_max - S_min),
// where S_min / S_max sum the n_w smallest / largest dissimilarities overall.
struct PartitionScore {
    std::size_t k = 0;
    double c_index = 0.0;
    std::size_t within_pairs = 0;
    double within_sum = 0.0;
    double min_sum = 0.0;
    double max_sum = 0.0;
};

// All condensed values sorted once, stored as running sums, so the extremal
// sums for any pair count are O(1).
class ExtremalSums {
public:
    explicit ExtremalSums(const DissimilarityMatrix& d);

    [[nodiscard]] double smallest(std::size_t count) const;
    [[nodiscard]] double largest(std::size_t count) const;

private:
    std::vector<double> running_;
};

// Throws out_of_range unless 2 <= k <= n-1, shape_mismatch on size mismatch.
PartitionScore c_index(const DissimilarityMatrix& d, const Partition& partition);
PartitionScore c_index(const DissimilarityMatrix& d, const ExtremalSums& sums, const Partition& partition);

struct KSelection {
    std::vector<PartitionScore> scores;  // one per k in [k_min, k_max]
    std::size_t chosen_k = 0;
    bool local_minimum = false;  // false: fell back to the global minimum
};

// Chooses the smallest interior k whose C index is strictly below its left
// neighbour and not above its right neighbour; otherwise the global minimum
// (smallest k on ties). Throws out_of_range unless 2 <= k_min < k_max <= n-1.
KSelection scan_k(const DissimilarityMatrix& d, const Dendrogram& dendrogram, std::size_t k_min, std::size_t k_max,
                  unsigned workers = 0);
// Selection rule alone, over precomputed scores for consecutive k.
KSelection choose_k(std::vector<PartitionScore> scores);

// k,c_index,n_w
void write_scores_csv(const KSelection& selection, std::ostream& out);

}  // namespace msa
