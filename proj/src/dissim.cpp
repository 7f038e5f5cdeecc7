#include "msa/dissim.hpp"

#include "msa/error.hpp"
#include "msa/parallel.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <ostream>

#include <fmt/core.h>

namespace msa {

namespace {

struct KernelCounts {
    std::uint64_t positive;
    std::uint64_t negative;
    std::uint64_t window;
};

// states: cols * words, follow: words. Columns are padded, padding bits are 0
// in both the states and the follow-up so they never reach the window.
inline KernelCounts count_cells(const std::uint64_t* si, const std::uint64_t* fi, const std::uint64_t* sj,
                                const std::uint64_t* fj, std::size_t cols, std::size_t words) {
    std::uint64_t positive = 0;
    std::uint64_t negative = 0;
    std::uint64_t window = 0;
    for (std::size_t w = 0; w < words; ++w) {
        const std::uint64_t mask = fi[w] & fj[w];
        window += static_cast<std::uint64_t>(std::popcount(mask));
        const std::uint64_t* a = si + w;
        const std::uint64_t* b = sj + w;
        for (std::size_t l = 0; l < cols; ++l, a += words, b += words) {
            positive += static_cast<std::uint64_t>(std::popcount(*a & *b & mask));
            negative += static_cast<std::uint64_t>(std::popcount(mask & ~(*a | *b)));
        }
    }
    return {positive, negative, window * cols};
}

void put_u64_le(std::ostream& out, std::uint64_t v) {
    std::array<char, 8> bytes{};
    for (std::size_t b = 0; b < 8; ++b) bytes[b] = static_cast<char>((v >> (8 * b)) & 0xFFU);
    out.write(bytes.data(), bytes.size());
}

std::uint64_t get_u64_le(std::istream& in) {
    std::array<unsigned char, 8> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!in) throw Error(Errc::parse_error, "truncated matrix file");
    std::uint64_t v = 0;
    for (std::size_t b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    return v;
}

constexpr std::array<char, 4> kMagic{'M', 'S', 'A', '1'};

}  // namespace

PairOverlapCounts pair_counts(const StateMatrix& mi, const FollowUp& fi, const StateMatrix& mj, const FollowUp& fj) {
    if (mi.rows() != mj.rows() || mi.cols() != mj.cols() || fi.rows() != mi.rows() || fj.rows() != mj.rows()) {
        throw Error(Errc::shape_mismatch, "state matrices or follow-ups differ in shape");
    }
    const auto c = count_cells(mi.data().data(), fi.bits().data(), mj.data().data(), fj.bits().data(), mi.cols(),
                               mi.words_per_column());
    return {c.positive, c.negative, c.window};
}

double composite_jaccard(const PairOverlapCounts& counts) {
    const std::uint64_t denominator = counts.window_cells - counts.negative;
    if (denominator == 0) return 0.0;
    // Single rounding: (t* - P - Q) / (t* - P).
    return static_cast<double>(denominator - counts.positive) / static_cast<double>(denominator);
}

double simple_sequence_jaccard(std::span<const std::string> xi, std::span<const std::string> xj) {
    if (xi.size() != xj.size()) throw Error(Errc::shape_mismatch, "sequences differ in length");
    std::size_t matches = 0;
    std::size_t mismatches = 0;
    for (std::size_t a = 0; a < xi.size(); ++a) {
        const bool both_null = xi[a].empty() && xj[a].empty();
        if (both_null) continue;
        if (xi[a] == xj[a]) {
            ++matches;
        } else {
            ++mismatches;
        }
    }
    if (matches + mismatches == 0) return 0.0;
    return static_cast<double>(mismatches) / static_cast<double>(matches + mismatches);
}

DissimilarityMatrix::DissimilarityMatrix(std::size_t n) : n_(n), values_(n < 2 ? 0 : n * (n - 1) / 2, 0.0) {}

DissimilarityMatrix::DissimilarityMatrix(std::size_t n, std::vector<double> values)
    : n_(n), values_(std::move(values)) {
    if (values_.size() != (n < 2 ? 0 : n * (n - 1) / 2)) {
        throw Error(Errc::shape_mismatch, fmt::format("condensed matrix of {} values does not match n = {}",
                                                      values_.size(), n));
    }
}

DissimilarityMatrix pairwise_matrix(const Cohort& cohort, unsigned workers) {
    const std::size_t n = cohort.size();
    DissimilarityMatrix out(n);
    if (n < 2) return out;

    // Pack every subject into one contiguous stride: states then follow-up.
    const std::size_t cols = cohort.conditions().size();
    const std::size_t words = cohort.grid().words();
    const std::size_t stride = (cols + 1) * words;
    std::vector<std::uint64_t> packed(stride * n);
    for (std::size_t s = 0; s < n; ++s) {
        const auto& subject = cohort[s];
        auto states = subject.states.data();
        auto follow = subject.follow_up.bits();
        std::memcpy(packed.data() + s * stride, states.data(), states.size_bytes());
        std::memcpy(packed.data() + s * stride + cols * words, follow.data(), follow.size_bytes());
    }

    auto values = out.values();
    // Row j owns the contiguous slice [j(j-1)/2, j(j+1)/2).
    parallel_chunks(n, 16, workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = std::max<std::size_t>(begin, 1); j < end; ++j) {
            const std::uint64_t* sj = packed.data() + j * stride;
            const std::uint64_t* fj = sj + cols * words;
            double* row = values.data() + j * (j - 1) / 2;
            for (std::size_t i = 0; i < j; ++i) {
                const std::uint64_t* si = packed.data() + i * stride;
                const auto c = count_cells(si, si + cols * words, sj, fj, cols, words);
                row[i] = composite_jaccard({c.positive, c.negative, c.window});
            }
        }
    });
    return out;
}

void write_matrix_binary(const DissimilarityMatrix& d, std::ostream& out) {
    out.write(kMagic.data(), kMagic.size());
    put_u64_le(out, d.size());
    for (double v : d.values()) put_u64_le(out, std::bit_cast<std::uint64_t>(v));
    if (!out) throw Error(Errc::io, "failed writing matrix");
}

void write_matrix_binary(const DissimilarityMatrix& d, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, fmt::format("cannot open '{}' for writing", path.string()));
    write_matrix_binary(d, out);
}

DissimilarityMatrix read_matrix_binary(std::istream& in) {
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw Error(Errc::parse_error, "not an MSA1 matrix file");
    const std::uint64_t n = get_u64_le(in);
    if (n > (std::uint64_t{1} << 32)) throw Error(Errc::parse_error, "implausible matrix size");
    const std::size_t count = n < 2 ? 0 : static_cast<std::size_t>(n * (n - 1) / 2);
    std::vector<double> values(count);
    for (auto& v : values) v = std::bit_cast<double>(get_u64_le(in));
    return DissimilarityMatrix(static_cast<std::size_t>(n), std::move(values));
}

DissimilarityMatrix read_matrix_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::missing_input, fmt::format("cannot open '{}'", path.string()));
    return read_matrix_binary(in);
}

void write_matrix_text(const DissimilarityMatrix& d, std::span<const std::string> ids, std::ostream& out) {
    if (ids.size() != d.size()) throw Error(Errc::shape_mismatch, "id count does not match matrix size");
    out << "subject_id";
    for (const auto& id : ids) out << ',' << id;
    out << '\n';
    for (std::size_t i = 0; i < d.size(); ++i) {
        out << ids[i];
        for (std::size_t j = 0; j < d.size(); ++j) out << ',' << fmt::format("{}", d(i, j));
        out << '\n';
    }
}

}  // namespace msa
