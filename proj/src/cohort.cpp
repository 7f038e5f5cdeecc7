#include "msa/cohort.hpp"

#include "msa/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <map>

#include <fmt/core.h>

namespace msa {

ConditionRegistry::ConditionRegistry(std::vector<std::string> codes, std::vector<std::string> names)
    : codes_(std::move(codes)), names_(std::move(names)) {
    if (codes_.empty()) {
        throw Error(Errc::empty_registry, "condition registry is empty");
    }
    if (names_.empty()) {
        names_ = codes_;
    }
    if (names_.size() != codes_.size()) {
        throw Error(Errc::invalid_argument, "condition names do not match codes");
    }
    for (std::size_t i = 0; i < codes_.size(); ++i) {
        if (codes_[i].empty()) {
            throw Error(Errc::invalid_argument, "empty condition code");
        }
        if (!index_.emplace(codes_[i], i).second) {
            throw Error(Errc::duplicate_code, fmt::format("duplicate condition code '{}'", codes_[i]));
        }
    }
}

std::optional<std::size_t> ConditionRegistry::find(std::string_view code) const {
    auto it = index_.find(std::string(code));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t ConditionRegistry::column_of(std::string_view code) const {
    if (auto col = find(code)) return *col;
    throw Error(Errc::unknown_condition, fmt::format("unknown condition code '{}'", code));
}

ConditionRegistry register_conditions(std::span<const std::string> codes) {
    return ConditionRegistry(std::vector<std::string>(codes.begin(), codes.end()));
}

std::optional<std::size_t> CovariateSpec::level_index(std::string_view level) const {
    auto it = std::find(levels.begin(), levels.end(), level);
    if (it == levels.end()) return std::nullopt;
    return static_cast<std::size_t>(it - levels.begin());
}

CovariateSchema::CovariateSchema(std::vector<CovariateSpec> specs) : specs_(std::move(specs)) {
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        const auto& spec = specs_[i];
        if (spec.name.empty()) {
            throw Error(Errc::config, "covariate with empty name");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (specs_[j].name == spec.name) {
                throw Error(Errc::config, fmt::format("duplicate covariate '{}'", spec.name));
            }
        }
        if (spec.categorical() && spec.levels.size() < 2) {
            throw Error(Errc::config, fmt::format("categorical covariate '{}' needs at least two levels", spec.name));
        }
    }
}

std::optional<std::size_t> CovariateSchema::find(std::string_view name) const {
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        if (specs_[i].name == name) return i;
    }
    return std::nullopt;
}

CovariateValue CovariateSchema::parse(std::size_t i, std::string_view field) const {
    const auto& spec = specs_.at(i);
    if (field.empty()) return std::nullopt;
    if (spec.categorical()) {
        if (auto level = spec.level_index(field)) return static_cast<double>(*level);
        throw Error(Errc::parse_error, fmt::format("'{}' is not a level of covariate '{}'", field, spec.name));
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value)) {
        throw Error(Errc::parse_error, fmt::format("'{}' is not numeric (covariate '{}')", field, spec.name));
    }
    return value;
}

std::string CovariateSchema::format(std::size_t i, const CovariateValue& value) const {
    if (!value) return {};
    const auto& spec = specs_.at(i);
    if (spec.categorical()) return spec.levels.at(static_cast<std::size_t>(*value));
    return fmt::format("{}", *value);
}

StateMatrix::StateMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), words_((rows + 63) / 64), bits_(words_ * cols, 0) {}

bool StateMatrix::at(std::size_t row, std::size_t col) const {
    if (row >= rows_ || col >= cols_) throw Error(Errc::out_of_range, "state matrix index out of range");
    return (bits_[col * words_ + row / 64] >> (row % 64)) & 1U;
}

std::span<const std::uint64_t> StateMatrix::column(std::size_t col) const {
    if (col >= cols_) throw Error(Errc::out_of_range, "state matrix column out of range");
    return std::span<const std::uint64_t>(bits_).subspan(col * words_, words_);
}

void StateMatrix::set_onset(std::size_t col, std::size_t row) {
    if (row >= rows_ || col >= cols_) throw Error(Errc::out_of_range, "onset row out of range");
    auto* words = bits_.data() + col * words_;
    for (std::size_t w = 0; w < words_; ++w) {
        const std::size_t lo = w * 64;
        const std::size_t hi = std::min(lo + 64, rows_);
        std::uint64_t mask = 0;
        if (row < hi) {
            const std::size_t from = std::max(row, lo) - lo;
            const std::size_t to = hi - lo;
            const std::uint64_t upper = to == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << to) - 1);
            mask = upper & ~((std::uint64_t{1} << from) - 1);
        }
        words[w] = mask;
    }
}

std::optional<std::size_t> StateMatrix::onset_row(std::size_t col) const {
    auto bits = column(col);
    for (std::size_t w = 0; w < words_; ++w) {
        if (bits[w] != 0) return w * 64 + static_cast<std::size_t>(std::countr_zero(bits[w]));
    }
    return std::nullopt;
}

std::size_t StateMatrix::present_count() const {
    std::size_t count = 0;
    for (std::size_t l = 0; l < cols_; ++l) {
        auto bits = column(l);
        if (std::any_of(bits.begin(), bits.end(), [](std::uint64_t w) { return w != 0; })) ++count;
    }
    return count;
}

FollowUp::FollowUp(std::size_t rows, std::size_t observed_rows)
    : rows_(rows), observed_(observed_rows), bits_((rows + 63) / 64, 0) {
    if (observed_rows < 1 || observed_rows > rows) {
        throw Error(Errc::out_of_range, "follow-up length out of range");
    }
    for (std::size_t w = 0; w < bits_.size(); ++w) {
        const std::size_t lo = w * 64;
        if (observed_rows >= lo + 64) {
            bits_[w] = ~std::uint64_t{0};
        } else if (observed_rows > lo) {
            bits_[w] = (std::uint64_t{1} << (observed_rows - lo)) - 1;
        }
    }
}

StateMatrix build_state_matrix(std::span<const EventRecord> events, const ConditionRegistry& registry,
                               const AgeGrid& grid) {
    StateMatrix matrix(static_cast<std::size_t>(grid.t_max), registry.size());
    std::vector<bool> seen(registry.size(), false);
    for (const auto& event : events) {
        const std::size_t col = registry.column_of(event.condition);
        if (!grid.contains(event.onset_age)) {
            throw Error(Errc::out_of_range, fmt::format("onset age {} of '{}' for subject '{}' outside [{}, {}]",
                                                        event.onset_age, event.condition, event.subject_id,
                                                        grid.origin, grid.last_age()));
        }
        if (seen[col]) {
            throw Error(Errc::duplicate_record, fmt::format("duplicate record for subject '{}', condition '{}'",
                                                            event.subject_id, event.condition));
        }
        seen[col] = true;
        matrix.set_onset(col, static_cast<std::size_t>(event.onset_age - grid.origin));
    }
    return matrix;
}

FollowUp build_follow_up(int censor_age, const AgeGrid& grid) {
    if (censor_age <= grid.origin || censor_age > grid.origin + grid.t_max) {
        throw Error(Errc::out_of_range, fmt::format("censor age {} outside ({}, {}]", censor_age, grid.origin,
                                                    grid.origin + grid.t_max));
    }
    return FollowUp(static_cast<std::size_t>(grid.t_max), static_cast<std::size_t>(censor_age - grid.origin));
}

int multimorbidity_index(const Subject& subject) {
    return static_cast<int>(subject.states.present_count());
}

Cohort::Cohort(AgeGrid grid, ConditionRegistry conditions, CovariateSchema schema, std::vector<Subject> subjects)
    : grid_(grid), conditions_(std::move(conditions)), schema_(std::move(schema)), subjects_(std::move(subjects)) {
    if (grid_.t_max < 1) throw Error(Errc::config, "age grid needs at least one row");
    const auto rows = static_cast<std::size_t>(grid_.t_max);
    for (std::size_t i = 0; i < subjects_.size(); ++i) {
        const auto& s = subjects_[i];
        if (s.states.rows() != rows || s.states.cols() != conditions_.size() || s.follow_up.rows() != rows) {
            throw Error(Errc::shape_mismatch, fmt::format("subject '{}' has a mismatched state matrix",
                                                          s.record.subject_id));
        }
        if (s.record.covariates.size() != schema_.size()) {
            throw Error(Errc::shape_mismatch, fmt::format("subject '{}' has {} covariates, schema declares {}",
                                                          s.record.subject_id, s.record.covariates.size(),
                                                          schema_.size()));
        }
        if (!index_.emplace(s.record.subject_id, i).second) {
            throw Error(Errc::duplicate_record, fmt::format("duplicate subject '{}'", s.record.subject_id));
        }
    }
}

std::optional<std::size_t> Cohort::find(std::string_view subject_id) const {
    auto it = index_.find(std::string(subject_id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::optional<int> Cohort::onset_age(std::size_t subject, std::size_t condition) const {
    auto row = subjects_.at(subject).states.onset_row(condition);
    if (!row) return std::nullopt;
    return grid_.origin + static_cast<int>(*row);
}

std::vector<EventRecord> Cohort::events() const {
    std::vector<EventRecord> out;
    for (std::size_t i = 0; i < subjects_.size(); ++i) {
        for (std::size_t l = 0; l < conditions_.size(); ++l) {
            if (auto age = onset_age(i, l)) {
                out.push_back({subjects_[i].record.subject_id, conditions_.code(l), *age});
            }
        }
    }
    return out;
}

Cohort assemble_cohort(const AgeGrid& grid, const ConditionRegistry& conditions, const CovariateSchema& schema,
                       std::vector<SubjectRecord> subjects, std::span<const EventRecord> events) {
    std::map<std::string, std::vector<EventRecord>, std::less<>> by_subject;
    for (const auto& e : events) by_subject[e.subject_id].push_back(e);

    std::vector<Subject> built;
    built.reserve(subjects.size());
    for (auto& record : subjects) {
        std::span<const EventRecord> own;
        auto it = by_subject.find(record.subject_id);
        if (it != by_subject.end()) own = it->second;
        auto states = build_state_matrix(own, conditions, grid);
        auto follow_up = build_follow_up(record.censor_age, grid);
        if (it != by_subject.end()) by_subject.erase(it);
        built.push_back({std::move(record), std::move(states), std::move(follow_up)});
    }
    if (!by_subject.empty()) {
        throw Error(Errc::missing_input,
                    fmt::format("events reference unknown subject '{}'", by_subject.begin()->first));
    }
    return Cohort(grid, conditions, schema, std::move(built));
}

}  // namespace msa
