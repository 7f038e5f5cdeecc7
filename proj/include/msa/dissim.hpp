#pragma once

#include "msa/cohort.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace msa {

// Cell counts over the common observation window of two subjects, summed over
// all conditions. positive = co-present cells, negative = co-absent cells,
// window_cells = conditions x common window length.
struct PairOverlapCounts {
    std::uint64_t positive = 0;
    std::uint64_t negative = 0;
    std::uint64_t window_cells = 0;

    bool operator==(const PairOverlapCounts&) const = default;
};

// Throws shape_mismatch.
PairOverlapCounts pair_counts(const StateMatrix& mi, const FollowUp& fi, const StateMatrix& mj, const FollowUp& fj);

// 1 - Q / (t* - P); 0 when both histories are disease-free over the window.
double composite_jaccard(const PairOverlapCounts& counts);

// Plain Jaccard dissimilarity between two single-label sequences; an empty
// label means "no state". Positions match when labels are equal and non-empty.
double simple_sequence_jaccard(std::span<const std::string> xi, std::span<const std::string> xj);

// Condensed lower triangle: pair (i, j), i < j, lives at j(j-1)/2 + i.
class DissimilarityMatrix {
public:
    DissimilarityMatrix() = default;
    explicit DissimilarityMatrix(std::size_t n);
    DissimilarityMatrix(std::size_t n, std::vector<double> values);

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] std::size_t pair_count() const noexcept { return values_.size(); }

    [[nodiscard]] static std::size_t index(std::size_t i, std::size_t j) noexcept {
        if (i > j) std::swap(i, j);
        return j * (j - 1) / 2 + i;
    }

    // Symmetric lookup; the diagonal is 0.
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const noexcept {
        return i == j ? 0.0 : values_[index(i, j)];
    }
    double& at(std::size_t i, std::size_t j) { return values_.at(index(i, j)); }

    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<double> values() noexcept { return values_; }

    bool operator==(const DissimilarityMatrix&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<double> values_;
};

// Bit-parallel all-pairs kernel. workers = 0 picks the hardware concurrency;
// the result does not depend on the worker count.
DissimilarityMatrix pairwise_matrix(const Cohort& cohort, unsigned workers = 0);

// Binary format: "MSA1", u64 LE n, n(n-1)/2 LE doubles.
void write_matrix_binary(const DissimilarityMatrix& d, std::ostream& out);
void write_matrix_binary(const DissimilarityMatrix& d, const std::filesystem::path& path);
DissimilarityMatrix read_matrix_binary(std::istream& in);
DissimilarityMatrix read_matrix_binary(const std::filesystem::path& path);

// Full square text matrix, header row of subject ids.
void write_matrix_text(const DissimilarityMatrix& d, std::span<const std::string> ids, std::ostream& out);

}  // namespace msa
