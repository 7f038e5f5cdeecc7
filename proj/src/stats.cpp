#include "msa/stats.hpp"

#include "msa/distributions.hpp"
#include "msa/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/core.h>

namespace msa {

ContingencyTable::ContingencyTable(std::size_t rows, std::size_t cols, std::vector<std::uint64_t> counts)
    : rows_(rows), cols_(cols), counts_(std::move(counts)) {
    if (rows_ < 2 || cols_ < 2) throw Error(Errc::invalid_argument, "contingency table needs at least 2x2 cells");
    if (counts_.size() != rows_ * cols_) throw Error(Errc::shape_mismatch, "contingency counts do not match shape");
}

std::uint64_t ContingencyTable::row_total(std::size_t r) const {
    std::uint64_t sum = 0;
    for (std::size_t c = 0; c < cols_; ++c) sum += at(r, c);
    return sum;
}

std::uint64_t ContingencyTable::col_total(std::size_t c) const {
    std::uint64_t sum = 0;
    for (std::size_t r = 0; r < rows_; ++r) sum += at(r, c);
    return sum;
}

std::uint64_t ContingencyTable::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

double ContingencyTable::expected(std::size_t r, std::size_t c) const {
    return static_cast<double>(row_total(r)) * static_cast<double>(col_total(c)) / static_cast<double>(total());
}

double ContingencyTable::min_expected() const {
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) lowest = std::min(lowest, expected(r, c));
    }
    return lowest;
}

std::string_view method_name(TestMethod method) noexcept {
    switch (method) {
        case TestMethod::chi2: return "chi2";
        case TestMethod::fisher2x2: return "fisher2x2";
        case TestMethod::kruskal_wallis: return "kruskal_wallis";
    }
    return "unknown";
}

TestResult chi_square_test(const ContingencyTable& table) {
    for (std::size_t r = 0; r < table.rows(); ++r) {
        if (table.row_total(r) == 0) throw Error(Errc::invalid_argument, fmt::format("row {} has a zero total", r));
    }
    for (std::size_t c = 0; c < table.cols(); ++c) {
        if (table.col_total(c) == 0) throw Error(Errc::invalid_argument, fmt::format("column {} has a zero total", c));
    }
    double statistic = 0.0;
    for (std::size_t r = 0; r < table.rows(); ++r) {
        for (std::size_t c = 0; c < table.cols(); ++c) {
            const double e = table.expected(r, c);
            const double diff = static_cast<double>(table.at(r, c)) - e;
            statistic += diff * diff / e;
        }
    }
    const int df = static_cast<int>((table.rows() - 1) * (table.cols() - 1));
    return {statistic, df, chi_square_sf(statistic, df), TestMethod::chi2};
}

TestResult fisher_exact_2x2(const ContingencyTable& table) {
    if (table.rows() != 2 || table.cols() != 2) throw Error(Errc::invalid_argument, "Fisher exact test needs a 2x2 table");
    const auto a = static_cast<std::int64_t>(table.at(0, 0));
    const auto b = static_cast<std::int64_t>(table.at(0, 1));
    const auto c = static_cast<std::int64_t>(table.at(1, 0));
    const auto d = static_cast<std::int64_t>(table.at(1, 1));
    const std::int64_t row1 = a + b;
    const std::int64_t col1 = a + c;
    const std::int64_t total = a + b + c + d;
    const std::int64_t lo = std::max<std::int64_t>(0, row1 + col1 - total);
    const std::int64_t hi = std::min(row1, col1);

    // Unnormalized hypergeometric weights from the pmf ratio recurrence,
    // anchored at the mode so no weight overflows.
    const auto mode = std::clamp<std::int64_t>(
        static_cast<std::int64_t>(std::floor((row1 + 1.0) * (col1 + 1.0) / (total + 2.0))), lo, hi);
    std::vector<double> weight(static_cast<std::size_t>(hi - lo + 1), 0.0);
    auto w = [&](std::int64_t x) -> double& { return weight[static_cast<std::size_t>(x - lo)]; };
    w(mode) = 1.0;
    for (std::int64_t x = mode; x < hi; ++x) {
        const double ratio = static_cast<double>((row1 - x) * (col1 - x)) /
                             static_cast<double>((x + 1) * (total - row1 - col1 + x + 1));
        w(x + 1) = w(x) * ratio;
    }
    for (std::int64_t x = mode; x > lo; --x) {
        const double ratio = static_cast<double>(x * (total - row1 - col1 + x)) /
                             static_cast<double>((row1 - x + 1) * (col1 - x + 1));
        w(x - 1) = w(x) * ratio;
    }
    double normalizer = 0.0;
    for (double v : weight) normalizer += v;
    const double observed = w(a);
    constexpr double kRelativeTolerance = 1.0 + 1e-7;
    double tail = 0.0;
    for (double v : weight) {
        if (v <= observed * kRelativeTolerance) tail += v;
    }
    const double odds_ratio = (b * c == 0) ? std::numeric_limits<double>::infinity()
                                           : static_cast<double>(a * d) / static_cast<double>(b * c);
    return {odds_ratio, std::nullopt, std::min(1.0, tail / normalizer), TestMethod::fisher2x2};
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    std::vector<double> ranks(values.size());
    for (std::size_t start = 0; start < order.size();) {
        std::size_t end = start + 1;
        while (end < order.size() && values[order[end]] == values[order[start]]) ++end;
        const double rank = 0.5 * static_cast<double>(start + 1 + end);
        for (std::size_t i = start; i < end; ++i) ranks[order[i]] = rank;
        start = end;
    }
    return ranks;
}

TestResult kruskal_wallis(std::span<const std::vector<double>> groups) {
    if (groups.size() < 2) throw Error(Errc::invalid_argument, "Kruskal-Wallis needs at least two groups");
    std::vector<double> pooled;
    for (const auto& g : groups) {
        if (g.empty()) throw Error(Errc::invalid_argument, "Kruskal-Wallis group is empty");
        pooled.insert(pooled.end(), g.begin(), g.end());
    }
    const int df = static_cast<int>(groups.size()) - 1;
    const auto ranks = average_ranks(pooled);
    const double n = static_cast<double>(pooled.size());

    double tie_sum = 0.0;
    {
        std::vector<double> sorted = pooled;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size();) {
            std::size_t j = i + 1;
            while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
            const double t = static_cast<double>(j - i);
            tie_sum += t * t * t - t;
            i = j;
        }
    }
    const double correction = 1.0 - tie_sum / (n * n * n - n);
    if (correction <= 0.0) return {0.0, df, 1.0, TestMethod::kruskal_wallis};

    double sum = 0.0;
    std::size_t offset = 0;
    for (const auto& g : groups) {
        double rank_sum = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) rank_sum += ranks[offset + i];
        sum += rank_sum * rank_sum / static_cast<double>(g.size());
        offset += g.size();
    }
    double h = (12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction;
    h = std::max(h, 0.0);
    return {h, df, chi_square_sf(h, df), TestMethod::kruskal_wallis};
}

AssociationResult association_test(const ContingencyTable& table) {
    const double min_expected = table.min_expected();
    if (table.rows() == 2 && table.cols() == 2 && min_expected < 5.0) return {fisher_exact_2x2(table), false};
    return {chi_square_test(table), min_expected < 5.0};
}

namespace {

double sigmoid(double eta) {
    if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

// log(1 + exp(eta)) without overflow.
double softplus(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

void check_design(std::span<const int> y, const Eigen::MatrixXd& X) {
    if (static_cast<Eigen::Index>(y.size()) != X.rows()) throw Error(Errc::shape_mismatch, "y and X row counts differ");
    for (int v : y) {
        if (v != 0 && v != 1) throw Error(Errc::invalid_argument, "logistic response must be 0/1");
    }
    if (!X.allFinite()) throw Error(Errc::nan_input, "design matrix has non-finite entries");
}

// Greedy column selection in order: keep a column iff it is not in the span
// of the columns kept before it.
std::vector<Eigen::Index> independent_columns(const Eigen::MatrixXd& X) {
    std::vector<Eigen::Index> kept;
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        Eigen::MatrixXd trial(X.rows(), static_cast<Eigen::Index>(kept.size()) + 1);
        for (std::size_t i = 0; i < kept.size(); ++i) trial.col(static_cast<Eigen::Index>(i)) = X.col(kept[i]);
        trial.col(trial.cols() - 1) = X.col(c);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial);
        qr.setThreshold(1e-10);
        if (qr.rank() == trial.cols()) kept.push_back(c);
    }
    return kept;
}

}  // namespace

double logistic_log_likelihood(std::span<const int> y, const Eigen::MatrixXd& X, const Eigen::VectorXd& beta) {
    check_design(y, X);
    const Eigen::VectorXd eta = X * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[static_cast<std::size_t>(i)] * eta[i] - softplus(eta[i]);
    return ll;
}

Eigen::VectorXd logistic_gradient(std::span<const int> y, const Eigen::MatrixXd& X, const Eigen::VectorXd& beta) {
    check_design(y, X);
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd residual(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) residual[i] = y[static_cast<std::size_t>(i)] - sigmoid(eta[i]);
    return X.transpose() * residual;
}

LogisticFit fit_logistic(std::span<const int> y, const Eigen::MatrixXd& X, const LogisticOptions& options) {
    check_design(y, X);
    const Eigen::Index p = X.cols();
    const auto kept = independent_columns(X);
    const auto q = static_cast<Eigen::Index>(kept.size());
    Eigen::MatrixXd Z(X.rows(), q);
    for (Eigen::Index i = 0; i < q; ++i) Z.col(i) = X.col(kept[static_cast<std::size_t>(i)]);

    LogisticFit fit;
    fit.aliased.assign(static_cast<std::size_t>(p), true);
    for (auto c : kept) fit.aliased[static_cast<std::size_t>(c)] = false;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
    Eigen::MatrixXd information(q, q);
    auto compute_information = [&](const Eigen::VectorXd& b, Eigen::VectorXd& gradient) {
        const Eigen::VectorXd eta = Z * b;
        Eigen::VectorXd weights(eta.size());
        Eigen::VectorXd residual(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            const double mu = sigmoid(eta[i]);
            weights[i] = mu * (1.0 - mu);
            residual[i] = y[static_cast<std::size_t>(i)] - mu;
        }
        information = Z.transpose() * weights.asDiagonal() * Z;
        gradient = Z.transpose() * residual;
    };

    Eigen::VectorXd gradient(q);
    for (fit.iterations = 0; fit.iterations < options.max_iterations;) {
        compute_information(beta, gradient);
        Eigen::MatrixXd regularized = information;
        regularized.diagonal().array() += options.ridge;
        const Eigen::VectorXd step = regularized.ldlt().solve(gradient);
        if (!step.allFinite()) break;
        beta += step;
        ++fit.iterations;
        if (step.size() == 0 || step.cwiseAbs().maxCoeff() < options.tolerance) {
            fit.converged = true;
            break;
        }
    }
    compute_information(beta, gradient);
    fit.gradient_norm = gradient.size() ? gradient.cwiseAbs().maxCoeff() : 0.0;
    fit.log_likelihood = logistic_log_likelihood(y, Z, beta);

    Eigen::MatrixXd covariance;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(information);
    if (lu.isInvertible()) {
        covariance = lu.inverse();
    } else {
        Eigen::MatrixXd regularized = information;
        regularized.diagonal().array() += options.ridge;
        covariance = regularized.inverse();
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    fit.coefficients = Eigen::VectorXd::Constant(p, nan);
    fit.std_errors = Eigen::VectorXd::Constant(p, nan);
    fit.z = Eigen::VectorXd::Constant(p, nan);
    fit.p_values = Eigen::VectorXd::Constant(p, nan);
    bool large = false;
    for (Eigen::Index i = 0; i < q; ++i) {
        const Eigen::Index c = kept[static_cast<std::size_t>(i)];
        fit.coefficients[c] = beta[i];
        fit.std_errors[c] = std::sqrt(std::max(covariance(i, i), 0.0));
        fit.z[c] = beta[i] / fit.std_errors[c];
        fit.p_values[c] = two_sided_normal_p(fit.z[c]);
        if (!std::isfinite(beta[i]) || std::abs(beta[i]) > options.coefficient_limit) large = true;
    }
    fit.unstable = !fit.converged || large;
    return fit;
}

double quantile(std::vector<double> values, double prob) {
    if (values.empty()) throw Error(Errc::invalid_argument, "quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(prob, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace msa
