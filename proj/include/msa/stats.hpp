#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace msa {

class ContingencyTable {
public:
    // Row-major counts. Throws invalid_argument unless rows, cols >= 2.
    ContingencyTable(std::size_t rows, std::size_t cols, std::vector<std::uint64_t> counts);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::uint64_t at(std::size_t r, std::size_t c) const { return counts_.at(r * cols_ + c); }
    [[nodiscard]] std::uint64_t row_total(std::size_t r) const;
    [[nodiscard]] std::uint64_t col_total(std::size_t c) const;
    [[nodiscard]] std::uint64_t total() const;
    [[nodiscard]] double expected(std::size_t r, std::size_t c) const;
    [[nodiscard]] double min_expected() const;

    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<std::uint64_t> counts_;
};

enum class TestMethod { chi2, fisher2x2, kruskal_wallis };

std::string_view method_name(TestMethod method) noexcept;

struct TestResult {
    double statistic = 0.0;
    std::optional<int> df;
    double p_value = 1.0;
    TestMethod method = TestMethod::chi2;
};

// Pearson chi-square. Throws invalid_argument on a zero marginal.
TestResult chi_square_test(const ContingencyTable& table);

// Two-sided: sum of the probabilities of all tables with the observed margins
// that are no more likely than the observed one. The statistic is the
// sample odds ratio (a d) / (b c).
TestResult fisher_exact_2x2(const ContingencyTable& table);

// Tie-corrected H. Throws invalid_argument with fewer than two groups or an
// empty group.
TestResult kruskal_wallis(std::span<const std::vector<double>> groups);

// Fisher for a 2x2 table with an expected count below 5, chi-square
// otherwise; small_expected is set when a larger table has expected < 5.
struct AssociationResult {
    TestResult result;
    bool small_expected = false;
};
AssociationResult association_test(const ContingencyTable& table);

struct LogisticOptions {
    double tolerance = 1e-8;        // max coefficient change
    int max_iterations = 100;
    double ridge = 1e-8;            // added to the information diagonal for the solve
    double coefficient_limit = 10;  // |beta| above this marks the fit unstable
};

struct LogisticFit {
    Eigen::VectorXd coefficients;   // NaN for aliased columns
    Eigen::VectorXd std_errors;
    Eigen::VectorXd z;
    Eigen::VectorXd p_values;
    std::vector<bool> aliased;
    bool converged = false;
    bool unstable = false;
    int iterations = 0;
    double log_likelihood = 0.0;
    double gradient_norm = 0.0;     // max-norm at the returned coefficients
};

// Maximum likelihood by IRLS (Newton-Raphson). X must carry its own
// intercept column. Linearly dependent columns are dropped, in column order.
LogisticFit fit_logistic(std::span<const int> y, const Eigen::MatrixXd& X, const LogisticOptions& options = {});

double logistic_log_likelihood(std::span<const int> y, const Eigen::MatrixXd& X, const Eigen::VectorXd& beta);
Eigen::VectorXd logistic_gradient(std::span<const int> y, const Eigen::MatrixXd& X, const Eigen::VectorXd& beta);

// Ranks with ties averaged, 1-based.
std::vector<double> average_ranks(std::span<const double> values);

// Linear-interpolation quantile (type 7). values need not be sorted.
double quantile(std::vector<double> values, double prob);

}  // namespace msa
