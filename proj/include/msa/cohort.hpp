#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace msa {

inline constexpr int kDefaultGridRows = 105;

// Integer-year age grid. Row r stands for age origin + r.
struct AgeGrid {
    int origin = 0;
    int t_max = kDefaultGridRows;

    [[nodiscard]] int last_age() const noexcept { return origin + t_max - 1; }
    [[nodiscard]] bool contains(int age) const noexcept { return age >= origin && age <= last_age(); }
    [[nodiscard]] std::size_t words() const noexcept { return (static_cast<std::size_t>(t_max) + 63) / 64; }

    bool operator==(const AgeGrid&) const = default;
};

class ConditionRegistry {
public:
    ConditionRegistry() = default;
    // Display names default to the codes.
    explicit ConditionRegistry(std::vector<std::string> codes, std::vector<std::string> names = {});

    [[nodiscard]] std::size_t size() const noexcept { return codes_.size(); }
    [[nodiscard]] bool empty() const noexcept { return codes_.empty(); }
    [[nodiscard]] const std::string& code(std::size_t column) const { return codes_.at(column); }
    [[nodiscard]] const std::string& name(std::size_t column) const { return names_.at(column); }
    [[nodiscard]] const std::vector<std::string>& codes() const noexcept { return codes_; }

    [[nodiscard]] std::optional<std::size_t> find(std::string_view code) const;
    // Throws Errc::unknown_condition.
    [[nodiscard]] std::size_t column_of(std::string_view code) const;

    bool operator==(const ConditionRegistry& other) const {
        return codes_ == other.codes_ && names_ == other.names_;
    }

private:
    std::vector<std::string> codes_;
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Fixes the column order. Throws empty_registry / duplicate_code.
ConditionRegistry register_conditions(std::span<const std::string> codes);

struct CovariateSpec {
    enum class Kind { categorical, numeric };

    std::string name;
    Kind kind = Kind::categorical;
    std::vector<std::string> levels;  // categorical only

    [[nodiscard]] bool categorical() const noexcept { return kind == Kind::categorical; }
    [[nodiscard]] std::optional<std::size_t> level_index(std::string_view level) const;

    bool operator==(const CovariateSpec&) const = default;
};

// A covariate value is either missing, a level index (categorical) or a number.
using CovariateValue = std::optional<double>;

class CovariateSchema {
public:
    CovariateSchema() = default;
    explicit CovariateSchema(std::vector<CovariateSpec> specs);

    [[nodiscard]] std::size_t size() const noexcept { return specs_.size(); }
    [[nodiscard]] const CovariateSpec& operator[](std::size_t i) const { return specs_.at(i); }
    [[nodiscard]] const std::vector<CovariateSpec>& specs() const noexcept { return specs_; }
    [[nodiscard]] std::optional<std::size_t> find(std::string_view name) const;

    // Parses a raw text field; an empty field is a missing value. Throws parse_error.
    [[nodiscard]] CovariateValue parse(std::size_t i, std::string_view field) const;
    // Inverse of parse.
    [[nodiscard]] std::string format(std::size_t i, const CovariateValue& value) const;

    bool operator==(const CovariateSchema&) const = default;

private:
    std::vector<CovariateSpec> specs_;
};

struct EventRecord {
    std::string subject_id;
    std::string condition;
    int onset_age = 0;
};

struct SubjectRecord {
    std::string subject_id;
    int censor_age = 0;  // exclusive end of observation
    bool death = false;
    std::vector<CovariateValue> covariates;  // aligned with the schema
};

// Bit-packed rows x columns matrix of absorbing event states. Each column is
// padded to whole 64-bit words; bit a of column l is set iff age row a is at
// or after the onset of condition l.
class StateMatrix {
public:
    StateMatrix() = default;
    StateMatrix(std::size_t rows, std::size_t cols);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t words_per_column() const noexcept { return words_; }

    [[nodiscard]] bool at(std::size_t row, std::size_t col) const;
    [[nodiscard]] std::span<const std::uint64_t> column(std::size_t col) const;
    [[nodiscard]] std::span<const std::uint64_t> data() const noexcept { return bits_; }

    // Sets rows [row, rows()) of the column.
    void set_onset(std::size_t col, std::size_t row);
    [[nodiscard]] std::optional<std::size_t> onset_row(std::size_t col) const;
    [[nodiscard]] std::size_t present_count() const;

    bool operator==(const StateMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::size_t words_ = 0;
    std::vector<std::uint64_t> bits_;
};

// Observation window indicator: bit a set iff row a lies before censoring.
class FollowUp {
public:
    FollowUp() = default;
    FollowUp(std::size_t rows, std::size_t observed_rows);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t observed() const noexcept { return observed_; }
    [[nodiscard]] bool at(std::size_t row) const noexcept { return row < observed_; }
    [[nodiscard]] std::span<const std::uint64_t> bits() const noexcept { return bits_; }

    bool operator==(const FollowUp&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t observed_ = 0;
    std::vector<std::uint64_t> bits_;
};

// events must all belong to one subject. Throws unknown_condition,
// out_of_range or duplicate_record.
StateMatrix build_state_matrix(std::span<const EventRecord> events, const ConditionRegistry& registry,
                               const AgeGrid& grid);

// Requires grid.origin < censor_age <= grid.origin + grid.t_max.
FollowUp build_follow_up(int censor_age, const AgeGrid& grid);

struct Subject {
    SubjectRecord record;
    StateMatrix states;
    FollowUp follow_up;
};

int multimorbidity_index(const Subject& subject);

// Immutable once constructed; safe to share across threads for reading.
class Cohort {
public:
    Cohort() = default;
    // Throws on duplicate ids or mismatched matrix shapes.
    Cohort(AgeGrid grid, ConditionRegistry conditions, CovariateSchema schema, std::vector<Subject> subjects);

    [[nodiscard]] const AgeGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] const ConditionRegistry& conditions() const noexcept { return conditions_; }
    [[nodiscard]] const CovariateSchema& schema() const noexcept { return schema_; }
    [[nodiscard]] std::size_t size() const noexcept { return subjects_.size(); }
    [[nodiscard]] bool empty() const noexcept { return subjects_.empty(); }
    [[nodiscard]] const Subject& operator[](std::size_t i) const { return subjects_.at(i); }
    [[nodiscard]] const std::vector<Subject>& subjects() const noexcept { return subjects_; }
    [[nodiscard]] std::optional<std::size_t> find(std::string_view subject_id) const;

    // Onset age in years, or nullopt when the condition was never recorded.
    [[nodiscard]] std::optional<int> onset_age(std::size_t subject, std::size_t condition) const;

    // Reconstructs the event records (ordered by subject, then column).
    [[nodiscard]] std::vector<EventRecord> events() const;

private:
    AgeGrid grid_;
    ConditionRegistry conditions_;
    CovariateSchema schema_;
    std::vector<Subject> subjects_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Strict assembly: any invalid record throws.
Cohort assemble_cohort(const AgeGrid& grid, const ConditionRegistry& conditions, const CovariateSchema& schema,
                       std::vector<SubjectRecord> subjects, std::span<const EventRecord> events);

}  // namespace msa
