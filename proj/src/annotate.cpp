#include "msa/annotate.hpp"

#include "msa/error.hpp"
#include "msa/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/core.h>

namespace msa {

namespace {

// Design columns of one block after dropping constant variables.
struct DesignColumn {
    std::size_t variable;
    std::optional<std::size_t> level;  // categorical non-reference level
    std::string level_name;
};

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char c : s) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    return quoted + "\"";
}

std::string format_p(const std::optional<TestResult>& test) {
    if (!test) return {};
    return fmt::format("{:.4g}", test->p_value);
}

std::string median_iqr(std::vector<double> values) {
    if (values.empty()) return "NA";
    return fmt::format("{:.1f} ({:.1f}-{:.1f})", quantile(values, 0.5), quantile(values, 0.25), quantile(values, 0.75));
}

}  // namespace

std::string_view block_name(Block block) noexcept {
    return block == Block::demographics ? "demographics" : "conditions";
}

std::vector<Variable> annotation_variables(const Cohort& cohort, const AnnotationSettings& settings) {
    const auto& schema = cohort.schema();
    const std::size_t n = cohort.size();
    std::vector<Variable> vars;

    std::vector<std::size_t> selected;
    if (settings.variables.empty()) {
        for (std::size_t c = 0; c < schema.size(); ++c) selected.push_back(c);
    } else {
        for (const auto& name : settings.variables) {
            auto c = schema.find(name);
            if (!c) throw Error(Errc::invalid_argument, fmt::format("variable '{}' is not in the covariate schema", name));
            selected.push_back(*c);
        }
    }
    for (std::size_t c : selected) {
        Variable v{schema[c].name, Block::demographics, schema[c].categorical(), schema[c].levels, {}, true};
        v.values.reserve(n);
        for (const auto& s : cohort.subjects()) v.values.push_back(s.record.covariates[c]);
        vars.push_back(std::move(v));
    }

    Variable mm{"multimorbidity_index", Block::demographics, false, {}, {}, true};
    for (const auto& s : cohort.subjects()) mm.values.emplace_back(multimorbidity_index(s));
    vars.push_back(std::move(mm));

    if (settings.index_condition) {
        const std::size_t col = cohort.conditions().column_of(*settings.index_condition);
        Variable onset{"index_onset_age", Block::demographics, false, {}, {}, true};
        for (std::size_t i = 0; i < n; ++i) {
            auto age = cohort.onset_age(i, col);
            onset.values.push_back(age ? std::optional<double>(*age) : std::nullopt);
        }
        vars.push_back(std::move(onset));
    }

    Variable death{"death", Block::demographics, true, {"no", "yes"}, {}, false};
    Variable end_age{"end_of_follow_up_age", Block::demographics, false, {}, {}, false};
    for (const auto& s : cohort.subjects()) {
        death.values.emplace_back(s.record.death ? 1.0 : 0.0);
        end_age.values.emplace_back(s.record.censor_age);
    }
    vars.push_back(std::move(death));
    vars.push_back(std::move(end_age));

    for (std::size_t l = 0; l < cohort.conditions().size(); ++l) {
        Variable cond{cohort.conditions().code(l), Block::conditions, true, {"absent", "present"}, {}, true};
        for (const auto& s : cohort.subjects()) cond.values.emplace_back(s.states.onset_row(l) ? 1.0 : 0.0);
        vars.push_back(std::move(cond));
    }
    return vars;
}

std::size_t HeatmapGrid::unmasked() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return !c.masked; }));
}

const HeatmapCell* HeatmapGrid::find(std::string_view variable, std::string_view level, int cluster) const {
    for (const auto& c : cells) {
        if (c.variable == variable && c.level == level && c.cluster == cluster) return &c;
    }
    return nullptr;
}

HeatmapGrid remask(HeatmapGrid grid, double alpha) {
    grid.alpha = alpha;
    for (auto& c : grid.cells) c.masked = c.unstable || c.aliased || !(c.p_value < alpha);
    return grid;
}

DescriptiveTable describe(const std::vector<Variable>& variables, Block block, const Partition& partition,
                          std::vector<std::string>& warnings) {
    DescriptiveTable table;
    table.block = block;
    const std::size_t k = partition.k;
    for (const auto& v : variables) {
        if (v.block != block) continue;
        std::optional<TestResult> test;
        if (v.categorical) {
            // counts[level][cluster]
            std::vector<std::vector<std::uint64_t>> counts(v.levels.size(), std::vector<std::uint64_t>(k, 0));
            std::vector<std::uint64_t> cluster_totals(k, 0);
            for (std::size_t i = 0; i < v.values.size(); ++i) {
                if (!v.values[i]) continue;
                const auto cl = static_cast<std::size_t>(partition.labels[i] - 1);
                ++counts[static_cast<std::size_t>(*v.values[i])][cl];
                ++cluster_totals[cl];
            }
            std::vector<std::size_t> rows;
            for (std::size_t l = 0; l < counts.size(); ++l) {
                if (std::any_of(counts[l].begin(), counts[l].end(), [](auto c) { return c > 0; })) rows.push_back(l);
            }
            std::vector<std::size_t> cols;
            for (std::size_t c = 0; c < k; ++c) {
                if (cluster_totals[c] > 0) cols.push_back(c);
            }
            if (rows.size() >= 2 && cols.size() >= 2) {
                std::vector<std::uint64_t> flat;
                for (auto r : rows) {
                    for (auto c : cols) flat.push_back(counts[r][c]);
                }
                const auto assoc = association_test(ContingencyTable(rows.size(), cols.size(), std::move(flat)));
                test = assoc.result;
                if (assoc.small_expected) {
                    warnings.push_back(fmt::format("{}: expected counts below 5 in chi-square test", v.name));
                }
            }
            const std::uint64_t grand = std::accumulate(cluster_totals.begin(), cluster_totals.end(), std::uint64_t{0});
            for (std::size_t l = 0; l < v.levels.size(); ++l) {
                DescriptiveRow row{v.name, v.levels[l], {}, {}, l == 0 ? test : std::nullopt};
                std::uint64_t level_total = 0;
                for (std::size_t c = 0; c < k; ++c) {
                    level_total += counts[l][c];
                    const double pct = cluster_totals[c] ? 100.0 * static_cast<double>(counts[l][c]) /
                                                               static_cast<double>(cluster_totals[c])
                                                         : 0.0;
                    row.cells.push_back(fmt::format("{} ({:.1f}%)", counts[l][c], pct));
                }
                const double pct = grand ? 100.0 * static_cast<double>(level_total) / static_cast<double>(grand) : 0.0;
                row.total = fmt::format("{} ({:.1f}%)", level_total, pct);
                table.rows.push_back(std::move(row));
            }
        } else {
            std::vector<std::vector<double>> groups(k);
            std::vector<double> all;
            for (std::size_t i = 0; i < v.values.size(); ++i) {
                if (!v.values[i]) continue;
                groups[static_cast<std::size_t>(partition.labels[i] - 1)].push_back(*v.values[i]);
                all.push_back(*v.values[i]);
            }
            std::vector<std::vector<double>> non_empty;
            for (const auto& g : groups) {
                if (!g.empty()) non_empty.push_back(g);
            }
            if (non_empty.size() >= 2) test = kruskal_wallis(non_empty);
            DescriptiveRow row{v.name, "median (IQR)", {}, median_iqr(all), test};
            for (const auto& g : groups) row.cells.push_back(median_iqr(g));
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

HeatmapGrid cluster_heatmap(const std::vector<Variable>& variables, Block block, const Partition& partition,
                            const AnnotationSettings& settings, std::vector<std::string>& warnings, unsigned workers) {
    HeatmapGrid grid;
    grid.block = block;
    grid.alpha = settings.alpha;
    if (partition.k < 2) {
        warnings.push_back(fmt::format("{}: a single cluster has no one-vs-rest contrast", block_name(block)));
        return grid;
    }

    std::vector<std::size_t> used;
    for (std::size_t v = 0; v < variables.size(); ++v) {
        if (variables[v].block == block && variables[v].modelled) used.push_back(v);
    }
    // Complete cases over the block.
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < partition.labels.size(); ++i) {
        const bool complete = std::all_of(used.begin(), used.end(), [&](std::size_t v) {
            return variables[v].values[i].has_value();
        });
        if (complete) rows.push_back(i);
    }
    if (rows.size() < partition.labels.size()) {
        warnings.push_back(fmt::format("{}: {} subjects with missing values excluded from logistic fits",
                                       block_name(block), partition.labels.size() - rows.size()));
    }

    std::vector<DesignColumn> columns;
    for (std::size_t v : used) {
        const auto& var = variables[v];
        if (var.categorical) {
            std::vector<std::size_t> counts(var.levels.size(), 0);
            for (std::size_t i : rows) ++counts[static_cast<std::size_t>(*var.values[i])];
            const auto present = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; });
            if (present < 2) {
                warnings.push_back(fmt::format("{}: variable '{}' is constant, dropped", block_name(block), var.name));
                continue;
            }
            const auto reference =
                static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
            for (std::size_t l = 0; l < counts.size(); ++l) {
                if (l != reference && counts[l] > 0) columns.push_back({v, l, var.levels[l]});
            }
        } else {
            bool constant = true;
            for (std::size_t i : rows) {
                if (*var.values[i] != *var.values[rows.front()]) {
                    constant = false;
                    break;
                }
            }
            if (rows.empty() || constant) {
                warnings.push_back(fmt::format("{}: variable '{}' is constant, dropped", block_name(block), var.name));
                continue;
            }
            columns.push_back({v, std::nullopt, ""});
        }
    }

    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(columns.size()) + 1);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto ri = static_cast<Eigen::Index>(r);
        X(ri, 0) = 1.0;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const auto& col = columns[c];
            const double value = *variables[col.variable].values[rows[r]];
            X(ri, static_cast<Eigen::Index>(c) + 1) =
                col.level ? (static_cast<std::size_t>(value) == *col.level ? 1.0 : 0.0) : value;
        }
    }

    const std::size_t k = partition.k;
    std::vector<LogisticFit> fits(k);
    parallel_chunks(k, 1, workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c) {
            std::vector<int> y(rows.size());
            for (std::size_t r = 0; r < rows.size(); ++r) y[r] = partition.labels[rows[r]] == static_cast<int>(c + 1);
            fits[c] = fit_logistic(y, X, settings.logistic);
        }
    });

    for (std::size_t c = 0; c < k; ++c) {
        if (fits[c].unstable) {
            warnings.push_back(fmt::format("{}: fit for cluster {} is unstable and excluded from the heatmap",
                                           block_name(block), c + 1));
        }
    }
    for (std::size_t j = 0; j < columns.size(); ++j) {
        const auto idx = static_cast<Eigen::Index>(j) + 1;
        for (std::size_t c = 0; c < k; ++c) {
            const auto& fit = fits[c];
            HeatmapCell cell;
            cell.variable = variables[columns[j].variable].name;
            cell.level = columns[j].level_name;
            cell.cluster = static_cast<int>(c + 1);
            cell.aliased = fit.aliased[static_cast<std::size_t>(idx)];
            cell.unstable = fit.unstable;
            cell.log_or = fit.coefficients[idx];
            cell.p_value = cell.aliased ? 1.0 : fit.p_values[idx];
            cell.masked = cell.unstable || cell.aliased || !(cell.p_value < settings.alpha);
            grid.cells.push_back(std::move(cell));
        }
        if (fits.front().aliased[static_cast<std::size_t>(idx)]) {
            warnings.push_back(fmt::format("{}: column {}{}{} is aliased, dropped", block_name(block),
                                           variables[columns[j].variable].name, columns[j].level_name.empty() ? "" : "=",
                                           columns[j].level_name));
        }
    }
    return grid;
}

ClusterReport annotate(const Cohort& cohort, const Partition& partition, const AnnotationSettings& settings,
                       unsigned workers) {
    if (partition.labels.size() != cohort.size()) throw Error(Errc::shape_mismatch, "partition does not match cohort");
    const auto variables = annotation_variables(cohort, settings);
    ClusterReport report;
    report.k = partition.k;
    report.cluster_sizes = partition.cluster_sizes();
    report.demographics = describe(variables, Block::demographics, partition, report.warnings);
    report.conditions = describe(variables, Block::conditions, partition, report.warnings);
    report.demographics_heatmap = cluster_heatmap(variables, Block::demographics, partition, settings, report.warnings, workers);
    report.conditions_heatmap = cluster_heatmap(variables, Block::conditions, partition, settings, report.warnings, workers);
    return report;
}

void write_descriptive_csv(const DescriptiveTable& table, std::size_t k, std::ostream& out) {
    out << "variable,level";
    for (std::size_t c = 1; c <= k; ++c) out << ",cluster_" << c;
    out << ",total,p,test\n";
    for (const auto& row : table.rows) {
        out << csv_field(row.variable) << ',' << csv_field(row.level);
        for (const auto& cell : row.cells) out << ',' << csv_field(cell);
        out << ',' << csv_field(row.total) << ',' << format_p(row.test) << ','
            << (row.test ? std::string(method_name(row.test->method)) : std::string()) << '\n';
    }
}

void write_heatmap_csv(const HeatmapGrid& grid, std::ostream& out) {
    out << "variable,level,cluster,log_or,p,masked\n";
    for (const auto& c : grid.cells) {
        const bool excluded = c.unstable || c.aliased;
        const std::string log_or = !excluded && std::isfinite(c.log_or) ? fmt::format("{:.6g}", c.log_or) : "NA";
        const std::string p = !excluded && std::isfinite(c.p_value) ? fmt::format("{:.6g}", c.p_value) : "NA";
        out << csv_field(c.variable) << ',' << csv_field(c.level) << ',' << c.cluster << ',' << log_or << ',' << p
            << ',' << (c.masked ? 1 : 0) << '\n';
    }
}

}  // namespace msa
