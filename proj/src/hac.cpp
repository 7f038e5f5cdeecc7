#include "msa/hac.hpp"

#include "msa/error.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include <fmt/core.h>

namespace msa {

namespace {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    // Returns the new root.
    std::size_t unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return a;
        if (b < a) std::swap(a, b);
        parent_[b] = a;
        return a;
    }

private:
    std::vector<std::size_t> parent_;
};

struct ChainMerge {
    std::size_t lo_slot;
    std::size_t hi_slot;
    double height;
    double order_key;
    std::size_t size;
};

}  // namespace

Dendrogram::Dendrogram(std::size_t leaves, std::vector<MergeStep> merges)
    : leaves_(leaves), merges_(std::move(merges)) {
    if (leaves_ == 0 && !merges_.empty()) throw Error(Errc::invalid_argument, "merges without leaves");
    if (leaves_ > 0 && merges_.size() != leaves_ - 1) {
        throw Error(Errc::invalid_argument, fmt::format("{} leaves need {} merges, got {}", leaves_, leaves_ - 1, merges_.size()));
    }
    std::vector<bool> used(leaves_ + merges_.size(), false);
    for (std::size_t s = 0; s < merges_.size(); ++s) {
        auto& m = merges_[s];
        if (m.left > m.right) std::swap(m.left, m.right);
        const std::size_t limit = leaves_ + s;
        if (m.right >= limit || m.left == m.right || used[m.left] || used[m.right]) {
            throw Error(Errc::invalid_argument, fmt::format("merge step {} references an invalid cluster", s));
        }
        used[m.left] = used[m.right] = true;
        if (m.size != cluster_size(m.left) + cluster_size(m.right)) {
            throw Error(Errc::invalid_argument, fmt::format("merge step {} has inconsistent size", s));
        }
    }
}

std::size_t Dendrogram::cluster_size(std::size_t id) const {
    if (id < leaves_) return 1;
    const std::size_t step = id - leaves_;
    if (step >= merges_.size()) throw Error(Errc::out_of_range, "cluster id out of range");
    return merges_[step].size;
}

std::vector<std::size_t> Partition::cluster_sizes() const {
    std::vector<std::size_t> sizes(k, 0);
    for (int label : labels) ++sizes.at(static_cast<std::size_t>(label - 1));
    return sizes;
}

std::vector<std::size_t> Partition::members(int label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) out.push_back(i);
    }
    return out;
}

Dendrogram ward_linkage(const DissimilarityMatrix& d, WardVariant variant) {
    DissimilarityMatrix work = d;
    return ward_linkage_in_place(work, variant);
}

Dendrogram ward_linkage_in_place(DissimilarityMatrix& d, WardVariant variant) {
    const std::size_t n = d.size();
    auto values = d.values();
    for (double& v : values) {
        if (std::isnan(v)) throw Error(Errc::nan_input, "dissimilarity matrix contains NaN");
        if (variant == WardVariant::ward_d2) v *= v;
    }
    if (n < 2) return Dendrogram(n, {});

    auto dist = [&](std::size_t i, std::size_t j) -> double& { return values[DissimilarityMatrix::index(i, j)]; };

    std::vector<std::size_t> size(n, 1);
    std::vector<bool> active(n, true);
    std::vector<double> slot_key(n, -std::numeric_limits<double>::infinity());
    std::vector<std::size_t> chain;
    chain.reserve(n);
    std::vector<ChainMerge> raw;
    raw.reserve(n - 1);

    for (std::size_t step = 0; step + 1 < n; ++step) {
        if (chain.empty()) {
            chain.push_back(static_cast<std::size_t>(std::find(active.begin(), active.end(), true) - active.begin()));
        }
        std::size_t x = 0;
        std::size_t y = 0;
        double best = 0.0;
        for (;;) {
            x = chain.back();
            const bool has_prev = chain.size() >= 2;
            std::size_t candidate = has_prev ? chain[chain.size() - 2] : n;
            best = has_prev ? dist(x, candidate) : std::numeric_limits<double>::infinity();
            // Strict comparison keeps the previous chain element on ties,
            // which guarantees termination; otherwise the lowest index wins.
            for (std::size_t i = 0; i < n; ++i) {
                if (!active[i] || i == x) continue;
                const double v = dist(x, i);
                if (v < best) {
                    best = v;
                    candidate = i;
                }
            }
            y = candidate;
            if (has_prev && y == chain[chain.size() - 2]) break;
            chain.push_back(y);
        }
        chain.pop_back();
        chain.pop_back();

        const std::size_t lo = std::min(x, y);
        const std::size_t hi = std::max(x, y);
        const double n_lo = static_cast<double>(size[lo]);
        const double n_hi = static_cast<double>(size[hi]);
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i] || i == lo || i == hi) continue;
            const double n_i = static_cast<double>(size[i]);
            double& target = dist(hi, i);
            target = ((n_lo + n_i) * dist(lo, i) + (n_hi + n_i) * target - n_i * best) / (n_lo + n_hi + n_i);
        }
        const double key = std::max({best, slot_key[lo], slot_key[hi]});
        raw.push_back({lo, hi, best, key, size[lo] + size[hi]});
        active[lo] = false;
        size[hi] += size[lo];
        slot_key[hi] = key;
    }

    // NN-chain discovers merges out of order; sort by height while keeping
    // every merge after the merges that built its children.
    std::stable_sort(raw.begin(), raw.end(),
                     [](const ChainMerge& a, const ChainMerge& b) { return a.order_key < b.order_key; });

    DisjointSets sets(n);
    std::vector<std::size_t> cluster_id(n);
    std::iota(cluster_id.begin(), cluster_id.end(), 0);
    std::vector<MergeStep> merges;
    merges.reserve(raw.size());
    for (std::size_t s = 0; s < raw.size(); ++s) {
        const auto& m = raw[s];
        const std::size_t a = cluster_id[sets.find(m.lo_slot)];
        const std::size_t b = cluster_id[sets.find(m.hi_slot)];
        const double height = variant == WardVariant::ward_d2 ? std::sqrt(std::max(m.height, 0.0)) : m.height;
        merges.push_back({std::min(a, b), std::max(a, b), height, m.size});
        cluster_id[sets.unite(m.lo_slot, m.hi_slot)] = n + s;
    }
    return Dendrogram(n, std::move(merges));
}

Partition canonical_partition(std::span<const std::size_t> raw_labels) {
    struct Group {
        std::size_t raw;
        std::size_t size;
        std::size_t first;
    };
    std::map<std::size_t, Group> groups;
    for (std::size_t i = 0; i < raw_labels.size(); ++i) {
        auto [it, inserted] = groups.try_emplace(raw_labels[i], Group{raw_labels[i], 0, i});
        ++it->second.size;
    }
    std::vector<Group> ordered;
    ordered.reserve(groups.size());
    for (const auto& [raw, g] : groups) ordered.push_back(g);
    std::sort(ordered.begin(), ordered.end(), [](const Group& a, const Group& b) {
        if (a.size != b.size) return a.size > b.size;
        return a.first < b.first;
    });
    std::map<std::size_t, int> relabel;
    for (std::size_t r = 0; r < ordered.size(); ++r) relabel[ordered[r].raw] = static_cast<int>(r + 1);

    Partition p;
    p.k = ordered.size();
    p.labels.reserve(raw_labels.size());
    for (std::size_t raw : raw_labels) p.labels.push_back(relabel[raw]);
    return p;
}

Partition cut(const Dendrogram& dendrogram, std::size_t k) {
    const std::size_t n = dendrogram.leaves();
    if (k < 1 || k > n) throw Error(Errc::out_of_range, fmt::format("cannot cut {} leaves into {} clusters", n, k));
    DisjointSets sets(n);
    // Each merge links a representative leaf of each side.
    std::vector<std::size_t> representative(n + dendrogram.merges().size());
    std::iota(representative.begin(), representative.begin() + static_cast<std::ptrdiff_t>(n), 0);
    for (std::size_t s = 0; s < n - k; ++s) {
        const auto& m = dendrogram.merges()[s];
        representative[n + s] = sets.unite(representative[m.left], representative[m.right]);
    }
    std::vector<std::size_t> raw(n);
    for (std::size_t i = 0; i < n; ++i) raw[i] = sets.find(i);
    return canonical_partition(raw);
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw Error(Errc::shape_mismatch, "label vectors differ in length");
    const std::size_t n = a.size();
    if (n < 2) return 1.0;
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> rows;
    std::map<int, double> cols;
    for (std::size_t i = 0; i < n; ++i) {
        joint[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    auto pairs = [](double m) { return m * (m - 1.0) / 2.0; };
    double index = 0.0;
    for (const auto& [key, m] : joint) index += pairs(m);
    double sum_rows = 0.0;
    for (const auto& [key, m] : rows) sum_rows += pairs(m);
    double sum_cols = 0.0;
    for (const auto& [key, m] : cols) sum_cols += pairs(m);
    const double expected = sum_rows * sum_cols / pairs(static_cast<double>(n));
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

void write_dendrogram_csv(const Dendrogram& dendrogram, std::ostream& out) {
    out << "step,left,right,height,size\n";
    const auto& merges = dendrogram.merges();
    for (std::size_t s = 0; s < merges.size(); ++s) {
        const auto& m = merges[s];
        out << fmt::format("{},{},{},{},{}\n", s, m.left, m.right, m.height, m.size);
    }
}

Dendrogram read_dendrogram_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(Errc::parse_error, "empty dendrogram file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "step,left,right,height,size") throw Error(Errc::parse_error, "unexpected dendrogram header");
    std::vector<MergeStep> merges;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        std::size_t step = 0;
        MergeStep m;
        if (!(row >> step >> m.left >> m.right >> m.height >> m.size) || step != merges.size()) {
            throw Error(Errc::parse_error, fmt::format("bad dendrogram row {}", merges.size()));
        }
        merges.push_back(m);
    }
    const std::size_t leaves = merges.size() + 1;
    return Dendrogram(leaves, std::move(merges));
}

std::string to_newick(const Dendrogram& dendrogram, std::span<const std::string> leaf_names) {
    const std::size_t n = dendrogram.leaves();
    if (leaf_names.size() != n) throw Error(Errc::shape_mismatch, "leaf name count does not match dendrogram");
    if (n == 0) return ";";
    const auto& merges = dendrogram.merges();
    auto height_of = [&](std::size_t id) { return id < n ? 0.0 : merges[id - n].height; };
    std::vector<std::string> text(n + merges.size());
    for (std::size_t i = 0; i < n; ++i) text[i] = leaf_names[i];
    for (std::size_t s = 0; s < merges.size(); ++s) {
        const auto& m = merges[s];
        text[n + s] = fmt::format("({}:{},{}:{})", text[m.left], m.height - height_of(m.left), text[m.right],
                                  m.height - height_of(m.right));
        text[m.left].clear();
        text[m.right].clear();
    }
    // Unmerged roots (a partial dendrogram) are joined at height 0.
    std::vector<std::string> roots;
    for (auto& t : text) {
        if (!t.empty()) roots.push_back(std::move(t));
    }
    if (roots.size() == 1) return roots.front() + ";";
    std::string joined = "(";
    for (std::size_t r = 0; r < roots.size(); ++r) joined += (r ? "," : "") + roots[r];
    return joined + ");";
}

}  // namespace msa
