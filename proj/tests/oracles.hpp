#pragma once

// Slow reference implementations used only by the tests.

#include "msa/dissim.hpp"
#include "msa/hac.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace msa::testing {

inline DissimilarityMatrix random_matrix(std::mt19937_64& rng, std::size_t n) {
    DissimilarityMatrix d(n);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : d.values()) v = u(rng);
    return d;
}

struct NaiveWard {
    std::vector<double> heights;             // in merge order
    std::vector<Partition> partitions;       // index k = partition into k clusters
};

// Full-matrix greedy agglomeration. Each step scans every active pair for
// the minimum and applies the Lance-Williams Ward update
//   d(ij, h) = ((n_i + n_h) d(i, h) + (n_j + n_h) d(j, h) - n_h d(i, j)) / (n_i + n_j + n_h).
inline NaiveWard naive_ward(const DissimilarityMatrix& d, WardVariant variant) {
    const std::size_t n = d.size();
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double v = d(i, j);
            m[i][j] = variant == WardVariant::ward_d2 ? v * v : v;
        }
    }
    std::vector<std::size_t> size(n, 1);
    std::vector<bool> active(n, true);
    std::vector<std::size_t> owner(n);
    std::iota(owner.begin(), owner.end(), 0);

    NaiveWard out;
    out.partitions.resize(n + 1);
    out.partitions[n] = canonical_partition(owner);
    for (std::size_t step = 0; step + 1 < n; ++step) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0;
        std::size_t bj = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (active[j] && m[i][j] < best) {
                    best = m[i][j];
                    bi = i;
                    bj = j;
                }
            }
        }
        for (std::size_t h = 0; h < n; ++h) {
            if (!active[h] || h == bi || h == bj) continue;
            const double ni = static_cast<double>(size[bi]);
            const double nj = static_cast<double>(size[bj]);
            const double nh = static_cast<double>(size[h]);
            const double v = ((ni + nh) * m[bi][h] + (nj + nh) * m[bj][h] - nh * m[bi][bj]) / (ni + nj + nh);
            m[bi][h] = v;
            m[h][bi] = v;
        }
        size[bi] += size[bj];
        active[bj] = false;
        for (auto& o : owner) {
            if (o == bj) o = bi;
        }
        out.heights.push_back(variant == WardVariant::ward_d2 ? std::sqrt(best) : best);
        out.partitions[n - step - 1] = canonical_partition(owner);
    }
    return out;
}

// C index by listing every pair explicitly.
inline double brute_c_index(const DissimilarityMatrix& d, const Partition& p) {
    std::vector<double> all;
    double within = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 1; j < d.size(); ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            all.push_back(d(i, j));
            if (p.labels[i] == p.labels[j]) {
                within += d(i, j);
                ++count;
            }
        }
    }
    std::sort(all.begin(), all.end());
    double lo = 0.0;
    double hi = 0.0;
    for (std::size_t r = 0; r < count; ++r) {
        lo += all[r];
        hi += all[all.size() - 1 - r];
    }
    if (hi == lo) return 0.0;
    return (within - lo) / (hi - lo);
}

using BigInt = boost::multiprecision::cpp_int;

inline BigInt binomial(unsigned n, unsigned k) {
    if (k > n) return 0;
    BigInt r = 1;
    for (unsigned i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// Two-sided Fisher p by exact rational enumeration of all 2x2 tables with the
// observed margins, counting those with probability <= the observed one.
inline double exact_fisher(unsigned a, unsigned b, unsigned c, unsigned d) {
    const unsigned r1 = a + b;
    const unsigned r2 = c + d;
    const unsigned c1 = a + c;
    const unsigned n = r1 + r2;
    const unsigned lo = c1 > r2 ? c1 - r2 : 0;
    const unsigned hi = std::min(r1, c1);
    const BigInt observed = binomial(r1, a) * binomial(r2, c1 - a);
    BigInt tail = 0;
    for (unsigned x = lo; x <= hi; ++x) {
        const BigInt w = binomial(r1, x) * binomial(r2, c1 - x);
        if (w <= observed) tail += w;
    }
    const BigInt total = binomial(n, c1);
    // Exact ratio, truncated at 2^-200 before rounding to double.
    const BigInt q = (tail << 200) / total;
    return std::ldexp(q.convert_to<double>(), -200);
}

}  // namespace msa::testing
