#include "doctest.h"

#include "msa/distributions.hpp"
#include "msa/error.hpp"
#include "msa/stats.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace msa;
using namespace msa::testing;

namespace {

ContingencyTable table2(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
    return ContingencyTable(2, 2, {a, b, c, d});
}

// H = (N - 1) * sum_i n_i (mean_rank_i - mean_rank)^2 / sum_ij (r_ij - mean_rank)^2,
// which carries the tie correction implicitly.
double rank_formula_h(const std::vector<std::vector<double>>& groups) {
    std::vector<double> pooled;
    for (const auto& g : groups) pooled.insert(pooled.end(), g.begin(), g.end());
    const auto ranks = average_ranks(pooled);
    const double n = static_cast<double>(pooled.size());
    const double mean = (n + 1.0) / 2.0;
    double between = 0.0;
    double total = 0.0;
    std::size_t offset = 0;
    for (const auto& g : groups) {
        double sum = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            sum += ranks[offset + i];
            total += (ranks[offset + i] - mean) * (ranks[offset + i] - mean);
        }
        const double group_mean = sum / static_cast<double>(g.size());
        between += static_cast<double>(g.size()) * (group_mean - mean) * (group_mean - mean);
        offset += g.size();
    }
    return (n - 1.0) * between / total;
}

}  // namespace

TEST_CASE("chi-square statistic on a symmetric table") {
    const auto result = chi_square_test(table2(20, 5, 5, 20));
    CHECK(result.statistic == doctest::Approx(18.0).epsilon(1e-14));
    CHECK(result.df == 1);
    CHECK(result.p_value == doctest::Approx(chi_square_sf(18.0, 1)));
    CHECK(result.p_value == doctest::Approx(2.209049699858544e-05).epsilon(1e-9));
    CHECK_THROWS_AS(chi_square_test(table2(0, 0, 5, 5)), Error);
}

TEST_CASE("chi-square p against a permutation distribution") {
    const std::vector<std::uint64_t> counts = {180, 210, 160, 200, 170, 190, 150, 185, 175};
    const ContingencyTable table(3, 3, counts);
    const auto result = chi_square_test(table);
    CHECK(result.df == 4);

    std::vector<int> row_of;
    std::vector<int> col_of;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            for (std::uint64_t k = 0; k < counts[static_cast<std::size_t>(r * 3 + c)]; ++k) {
                row_of.push_back(r);
                col_of.push_back(c);
            }
        }
    }
    std::mt19937_64 rng(99);
    const int permutations = 20000;
    int extreme = 0;
    for (int b = 0; b < permutations; ++b) {
        std::shuffle(col_of.begin(), col_of.end(), rng);
        std::vector<std::uint64_t> shuffled(9, 0);
        for (std::size_t i = 0; i < row_of.size(); ++i) ++shuffled[static_cast<std::size_t>(row_of[i] * 3 + col_of[i])];
        if (chi_square_test(ContingencyTable(3, 3, shuffled)).statistic >= result.statistic - 1e-9) ++extreme;
    }
    const double p_perm = static_cast<double>(extreme) / permutations;
    const double se = std::sqrt(result.p_value * (1.0 - result.p_value) / permutations);
    CHECK(std::abs(p_perm - result.p_value) <= 3.0 * se);
}

TEST_CASE("Fisher exact on a textbook table") {
    const auto result = fisher_exact_2x2(table2(1, 9, 11, 3));
    CHECK(result.p_value == doctest::Approx(exact_fisher(1, 9, 11, 3)).epsilon(1e-12));
    CHECK(result.p_value == doctest::Approx(0.002759456185220083).epsilon(1e-10));
    CHECK(result.statistic == doctest::Approx(3.0 / 99.0));
    CHECK(result.method == TestMethod::fisher2x2);
}

TEST_CASE("Fisher exact equals hypergeometric enumeration") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<unsigned> cell(0, 40);
    for (int trial = 0; trial < 300; ++trial) {
        const unsigned a = cell(rng), b = cell(rng), c = cell(rng), d = cell(rng);
        if (a + b == 0 || c + d == 0 || a + c == 0 || b + d == 0) continue;
        const double got = fisher_exact_2x2(table2(a, b, c, d)).p_value;
        const double want = exact_fisher(a, b, c, d);
        CHECK(std::abs(got - want) <= 1e-12 * std::max(want, 1e-300) + 1e-300);
    }
    CHECK(fisher_exact_2x2(table2(5, 0, 0, 5)).p_value == doctest::Approx(exact_fisher(5, 0, 0, 5)).epsilon(1e-12));
    CHECK(fisher_exact_2x2(table2(3, 3, 3, 3)).p_value == doctest::Approx(1.0));
}

TEST_CASE("association test picks Fisher for small 2x2 expectations") {
    CHECK(association_test(table2(1, 9, 6, 3)).result.method == TestMethod::fisher2x2);
    CHECK(association_test(table2(1, 9, 11, 3)).result.method == TestMethod::chi2);  // min expected is exactly 5
    CHECK(association_test(table2(20, 5, 5, 20)).result.method == TestMethod::chi2);
    const auto big = association_test(ContingencyTable(2, 3, {1, 2, 30, 3, 2, 28}));
    CHECK(big.result.method == TestMethod::chi2);
    CHECK(big.small_expected);
}

TEST_CASE("Kruskal-Wallis") {
    const std::vector<std::vector<double>> groups = {{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
    const auto result = kruskal_wallis(groups);
    CHECK(result.statistic == doctest::Approx(7.2).epsilon(1e-14));
    CHECK(result.df == 2);
    CHECK(result.p_value == doctest::Approx(std::exp(-3.6)).epsilon(1e-12));

    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = std::uniform_int_distribution<int>(2, 5)(rng);
        std::vector<std::vector<double>> g(static_cast<std::size_t>(k));
        for (auto& group : g) {
            const int size = std::uniform_int_distribution<int>(1, 15)(rng);
            for (int i = 0; i < size; ++i) group.push_back(std::uniform_int_distribution<int>(0, 8)(rng));
        }
        const auto kw = kruskal_wallis(g);
        std::vector<double> pooled;
        for (const auto& group : g) pooled.insert(pooled.end(), group.begin(), group.end());
        if (std::all_of(pooled.begin(), pooled.end(), [&](double v) { return v == pooled.front(); })) continue;
        CHECK(std::abs(kw.statistic - rank_formula_h(g)) <= 1e-10 * std::max(1.0, kw.statistic));
    }
    const std::vector<std::vector<double>> constant = {{1, 1}, {1, 1}};
    CHECK(kruskal_wallis(constant).p_value == 1.0);
    const std::vector<std::vector<double>> one = {{1, 2}};
    CHECK_THROWS_AS(kruskal_wallis(one), Error);
}

TEST_CASE("logistic slope on one binary covariate is the log odds ratio") {
    // a = exposed cases, b = exposed controls, c = unexposed cases, d = unexposed controls
    const int a = 30, b = 12, c = 17, d = 41;
    std::vector<int> y;
    Eigen::MatrixXd X(a + b + c + d, 2);
    int row = 0;
    auto add = [&](int count, int outcome, double exposed) {
        for (int i = 0; i < count; ++i, ++row) {
            y.push_back(outcome);
            X(row, 0) = 1.0;
            X(row, 1) = exposed;
        }
    };
    add(a, 1, 1.0);
    add(b, 0, 1.0);
    add(c, 1, 0.0);
    add(d, 0, 0.0);
    const auto fit = fit_logistic(y, X);
    CHECK(fit.converged);
    CHECK_FALSE(fit.unstable);
    CHECK(std::abs(fit.coefficients[1] - std::log(static_cast<double>(a * d) / (b * c))) < 1e-8);
    CHECK(std::abs(fit.coefficients[0] - std::log(static_cast<double>(c) / d)) < 1e-8);
    CHECK(fit.gradient_norm < 1e-6);
    CHECK(logistic_gradient(y, X, fit.coefficients).cwiseAbs().maxCoeff() < 1e-6);
    // Woolf standard error of the log odds ratio.
    CHECK(fit.std_errors[1] == doctest::Approx(std::sqrt(1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d)).epsilon(1e-6));
    CHECK(fit.p_values[1] == doctest::Approx(two_sided_normal_p(fit.z[1])));
}

TEST_CASE("logistic fit with numeric covariates reaches a stationary point") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> z(0.0, 1.0);
    const int n = 400;
    Eigen::MatrixXd X(n, 3);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = z(rng);
        X(i, 2) = z(rng);
        const double eta = -0.5 + 0.8 * X(i, 1) - 0.3 * X(i, 2);
        y[static_cast<std::size_t>(i)] = std::bernoulli_distribution(1.0 / (1.0 + std::exp(-eta)))(rng);
    }
    const auto fit = fit_logistic(y, X);
    CHECK(fit.converged);
    CHECK(fit.gradient_norm < 1e-6);
    // The maximum: nudging any coefficient lowers the likelihood.
    for (int c = 0; c < 3; ++c) {
        for (double h : {-1e-3, 1e-3}) {
            Eigen::VectorXd moved = fit.coefficients;
            moved[c] += h;
            CHECK(logistic_log_likelihood(y, X, moved) < fit.log_likelihood);
        }
    }
}

TEST_CASE("aliased columns and separation") {
    std::vector<int> y = {0, 1, 0, 1, 1, 0, 1, 0};
    Eigen::MatrixXd X(8, 3);
    for (int i = 0; i < 8; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = i % 3;
        X(i, 2) = 2.0 * (i % 3);  // copy of column 1
    }
    const auto fit = fit_logistic(y, X);
    CHECK_FALSE(fit.aliased[1]);
    CHECK(fit.aliased[2]);
    CHECK(std::isnan(fit.coefficients[2]));
    CHECK(std::isfinite(fit.coefficients[1]));

    std::vector<int> separated = {0, 0, 0, 0, 1, 1, 1, 1};
    Eigen::MatrixXd S(8, 2);
    for (int i = 0; i < 8; ++i) {
        S(i, 0) = 1.0;
        S(i, 1) = i;
    }
    CHECK(fit_logistic(separated, S).unstable);
}

TEST_CASE("ranks and quantiles") {
    const std::vector<double> v = {3, 1, 3, 2};
    CHECK(average_ranks(v) == std::vector<double>{3.5, 1, 3.5, 2});
    CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
    CHECK(quantile({1, 2, 3, 4}, 0.25) == 1.75);
    CHECK(quantile({7}, 0.9) == 7);
    CHECK_THROWS_AS(quantile({}, 0.5), Error);
}

TEST_CASE("Fisher and chi-square agree on large 2x2 tables") {
    std::mt19937_64 rng(44);
    std::uniform_int_distribution<unsigned> cell(50, 500);
    int disagreements = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const auto t = table2(cell(rng), cell(rng), cell(rng), cell(rng));
        const double fisher = fisher_exact_2x2(t).p_value;
        const double chi = chi_square_test(t).p_value;
        if ((fisher < 0.05) != (chi < 0.05)) {
            ++disagreements;
            CHECK(fisher >= 0.01);
            CHECK(fisher <= 0.2);
            CHECK(chi >= 0.01);
            CHECK(chi <= 0.2);
        }
    }
    CHECK(disagreements < 25);
}
