#pragma once

#include "msa/cohort.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace msa {

// Splits one delimited line. Double-quoted fields may contain commas and
// doubled quotes. Throws parse_error on an unterminated quote.
std::vector<std::string> split_csv_line(std::string_view line);
std::string quote_csv_field(std::string_view field);

struct RejectedRow {
    std::string file;
    std::size_t line = 0;  // 1-based, header is line 1
    std::string reason;
    std::string content;
};

struct ValidationReport {
    std::size_t event_rows = 0;
    std::size_t subject_rows = 0;
    std::vector<RejectedRow> rejected;
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t total_rows() const noexcept { return event_rows + subject_rows; }
    [[nodiscard]] double rejected_fraction() const noexcept;
};

struct IngestResult {
    std::optional<Cohort> cohort;  // absent when the error budget is exceeded
    ValidationReport report;
};

// Lenient ingestion. Invalid rows are collected into the report and skipped.
// A missing or malformed header, or an event for a subject absent from the
// subjects file, is fatal (missing_input / parse_error).
IngestResult ingest(std::istream& events, std::istream& subjects, const AgeGrid& grid,
                    const ConditionRegistry& conditions, const CovariateSchema& schema,
                    double max_rejected_fraction = 0.01);

IngestResult ingest_files(const std::filesystem::path& events, const std::filesystem::path& subjects,
                          const AgeGrid& grid, const ConditionRegistry& conditions, const CovariateSchema& schema,
                          double max_rejected_fraction = 0.01);

// Throws error_budget_exceeded when the result carries no cohort.
Cohort require_cohort(IngestResult result);

void write_events_csv(const Cohort& cohort, std::ostream& out);
void write_subjects_csv(const Cohort& cohort, std::ostream& out);

void write_report_text(const ValidationReport& report, double max_rejected_fraction, std::ostream& out);
// file,line,reason,content
void write_rejected_csv(const ValidationReport& report, std::ostream& out);

}  // namespace msa
