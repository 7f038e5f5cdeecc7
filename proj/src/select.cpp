#include "msa/select.hpp"

#include "msa/error.hpp"
#include "msa/parallel.hpp"

#include <algorithm>
#include <ostream>

#include <fmt/core.h>

namespace msa {

ExtremalSums::ExtremalSums(const DissimilarityMatrix& d) : running_(d.values().begin(), d.values().end()) {
    std::sort(running_.begin(), running_.end());
    long double acc = 0.0L;
    for (double& v : running_) {
        acc += v;
        v = static_cast<double>(acc);
    }
}

double ExtremalSums::smallest(std::size_t count) const {
    if (count > running_.size()) throw Error(Errc::out_of_range, "pair count exceeds matrix");
    return count == 0 ? 0.0 : running_[count - 1];
}

double ExtremalSums::largest(std::size_t count) const {
    if (count > running_.size()) throw Error(Errc::out_of_range, "pair count exceeds matrix");
    const double total = running_.empty() ? 0.0 : running_.back();
    return total - smallest(running_.size() - count);
}

PartitionScore c_index(const DissimilarityMatrix& d, const Partition& partition) {
    return c_index(d, ExtremalSums(d), partition);
}

PartitionScore c_index(const DissimilarityMatrix& d, const ExtremalSums& sums, const Partition& partition) {
    const std::size_t n = d.size();
    if (partition.labels.size() != n) throw Error(Errc::shape_mismatch, "partition does not match matrix");
    if (partition.k < 2 || partition.k + 1 > n) {
        throw Error(Errc::out_of_range, fmt::format("C index needs 2 <= k <= n-1 (k = {}, n = {})", partition.k, n));
    }
    const auto values = d.values();
    long double within = 0.0L;
    std::size_t pairs = 0;
    for (std::size_t j = 1; j < n; ++j) {
        const double* row = values.data() + j * (j - 1) / 2;
        const int label = partition.labels[j];
        for (std::size_t i = 0; i < j; ++i) {
            if (partition.labels[i] == label) {
                within += row[i];
                ++pairs;
            }
        }
    }
    PartitionScore score;
    score.k = partition.k;
    score.within_pairs = pairs;
    score.within_sum = static_cast<double>(within);
    score.min_sum = sums.smallest(pairs);
    score.max_sum = sums.largest(pairs);
    const double span = score.max_sum - score.min_sum;
    if (span > 0.0) {
        score.c_index = std::clamp((score.within_sum - score.min_sum) / span, 0.0, 1.0);
    }
    return score;
}

KSelection choose_k(std::vector<PartitionScore> scores) {
    if (scores.empty()) throw Error(Errc::invalid_argument, "no scores to choose from");
    KSelection out;
    out.scores = std::move(scores);
    const auto& s = out.scores;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        if (s[i].c_index < s[i - 1].c_index && s[i].c_index <= s[i + 1].c_index) {
            out.chosen_k = s[i].k;
            out.local_minimum = true;
            return out;
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (s[i].c_index < s[best].c_index) best = i;
    }
    out.chosen_k = s[best].k;
    return out;
}

KSelection scan_k(const DissimilarityMatrix& d, const Dendrogram& dendrogram, std::size_t k_min, std::size_t k_max,
                  unsigned workers) {
    const std::size_t n = d.size();
    if (dendrogram.leaves() != n) throw Error(Errc::shape_mismatch, "dendrogram does not match matrix");
    if (k_min < 2 || k_min >= k_max || k_max + 1 > n) {
        throw Error(Errc::out_of_range,
                    fmt::format("k range [{}, {}] invalid for n = {} (need 2 <= k_min < k_max <= n-1)", k_min, k_max, n));
    }
    const ExtremalSums sums(d);
    std::vector<PartitionScore> scores(k_max - k_min + 1);
    parallel_chunks(scores.size(), 1, workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) scores[i] = c_index(d, sums, cut(dendrogram, k_min + i));
    });
    return choose_k(std::move(scores));
}

void write_scores_csv(const KSelection& selection, std::ostream& out) {
    out << "k,c_index,n_w\n";
    for (const auto& s : selection.scores) out << fmt::format("{},{},{}\n", s.k, s.c_index, s.within_pairs);
}

}  // namespace msa
