#include "msa/cohort_io.hpp"

#include "msa/error.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>

#include <fmt/core.h>

namespace msa {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::optional<int> parse_int(std::string_view s) {
    s = trim(s);
    int value = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (s.empty() || ec != std::errc{} || ptr != end) return std::nullopt;
    return value;
}

std::optional<bool> parse_flag(std::string_view s) {
    s = trim(s);
    if (s == "1" || s == "true" || s == "TRUE" || s == "True") return true;
    if (s == "0" || s == "false" || s == "FALSE" || s == "False") return false;
    return std::nullopt;
}

// Reads the next line; returns false at end of input.
bool next_line(std::istream& in, std::string& line, std::size_t& number) {
    if (!std::getline(in, line)) return false;
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

std::vector<std::string> read_header(std::istream& in, const std::string& file, std::size_t& number) {
    std::string line;
    if (!next_line(in, line, number)) throw Error(Errc::missing_input, fmt::format("{}: empty file", file));
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    auto fields = split_csv_line(line);
    for (auto& f : fields) f = std::string(trim(f));
    return fields;
}

struct ParsedEvent {
    EventRecord record;
    std::size_t line = 0;
    std::string content;
};

}  // namespace

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current += c;
            }
        } else if (c == '"' && (current.empty() && !was_quoted)) {
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
            was_quoted = false;
        } else {
            current += c;
        }
    }
    if (quoted) throw Error(Errc::parse_error, "unterminated quoted field");
    fields.push_back(std::move(current));
    return fields;
}

std::string quote_csv_field(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

double ValidationReport::rejected_fraction() const noexcept {
    if (total_rows() == 0) return 0.0;
    return static_cast<double>(rejected.size()) / static_cast<double>(total_rows());
}

IngestResult ingest(std::istream& events, std::istream& subjects, const AgeGrid& grid,
                    const ConditionRegistry& conditions, const CovariateSchema& schema,
                    double max_rejected_fraction) {
    IngestResult result;
    auto& report = result.report;
    const std::string events_name = "events";
    const std::string subjects_name = "subjects";

    // Subjects.
    std::size_t number = 0;
    const auto header = read_header(subjects, subjects_name, number);
    if (header.size() < 3 || header[0] != "subject_id" || header[1] != "censor_age" || header[2] != "death") {
        throw Error(Errc::parse_error, "subjects: header must start with subject_id,censor_age,death");
    }
    std::vector<std::optional<std::size_t>> column_to_covariate(header.size());
    std::vector<bool> seen(schema.size(), false);
    for (std::size_t c = 3; c < header.size(); ++c) {
        auto index = schema.find(header[c]);
        if (!index) {
            report.warnings.push_back(fmt::format("subjects: undeclared column '{}' ignored", header[c]));
            continue;
        }
        if (seen[*index]) throw Error(Errc::parse_error, fmt::format("subjects: column '{}' repeated", header[c]));
        seen[*index] = true;
        column_to_covariate[c] = index;
    }
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (!seen[i]) throw Error(Errc::missing_input, fmt::format("subjects: declared covariate '{}' missing", schema[i].name));
    }

    std::vector<SubjectRecord> records;
    std::unordered_map<std::string, std::size_t> subject_index;
    std::set<std::string> rejected_subjects;
    std::string line;
    while (next_line(subjects, line, number)) {
        if (trim(line).empty()) continue;
        ++report.subject_rows;
        auto reject = [&](std::string reason) {
            report.rejected.push_back({subjects_name, number, std::move(reason), line});
            // Events of a rejected subject are rejected too, not fatal.
            const auto id = trim(std::string_view(line).substr(0, line.find(',')));
            if (!id.empty()) rejected_subjects.emplace(id);
        };
        std::vector<std::string> fields;
        try {
            fields = split_csv_line(line);
        } catch (const Error& e) {
            reject(e.what());
            continue;
        }
        if (fields.size() != header.size()) {
            reject(fmt::format("expected {} fields, found {}", header.size(), fields.size()));
            continue;
        }
        SubjectRecord record;
        record.subject_id = std::string(trim(fields[0]));
        if (record.subject_id.empty()) {
            reject("empty subject_id");
            continue;
        }
        auto censor = parse_int(fields[1]);
        if (!censor) {
            reject(fmt::format("censor_age '{}' is not an integer", fields[1]));
            continue;
        }
        if (*censor <= grid.origin || *censor > grid.origin + grid.t_max) {
            reject(fmt::format("censor_age {} outside ({}, {}]", *censor, grid.origin, grid.origin + grid.t_max));
            continue;
        }
        record.censor_age = *censor;
        auto death = parse_flag(fields[2]);
        if (!death) {
            reject(fmt::format("death '{}' is not 0/1", fields[2]));
            continue;
        }
        record.death = *death;
        record.covariates.resize(schema.size());
        bool ok = true;
        for (std::size_t c = 3; c < fields.size() && ok; ++c) {
            if (!column_to_covariate[c]) continue;
            try {
                record.covariates[*column_to_covariate[c]] = schema.parse(*column_to_covariate[c], trim(fields[c]));
            } catch (const Error& e) {
                reject(e.what());
                ok = false;
            }
        }
        if (!ok) continue;
        if (subject_index.count(record.subject_id)) {
            reject(fmt::format("duplicate subject_id '{}'", record.subject_id));
            continue;
        }
        subject_index.emplace(record.subject_id, records.size());
        records.push_back(std::move(record));
    }

    // Events.
    number = 0;
    const auto event_header = read_header(events, events_name, number);
    if (event_header != std::vector<std::string>{"subject_id", "condition", "onset_age"}) {
        throw Error(Errc::parse_error, "events: header must be subject_id,condition,onset_age");
    }
    std::vector<ParsedEvent> parsed;
    std::set<std::pair<std::string, std::string>> seen_pairs;
    std::size_t late_onsets = 0;
    std::size_t first_late_line = 0;
    while (next_line(events, line, number)) {
        if (trim(line).empty()) continue;
        ++report.event_rows;
        auto reject = [&](std::string reason) {
            report.rejected.push_back({events_name, number, std::move(reason), line});
        };
        std::vector<std::string> fields;
        try {
            fields = split_csv_line(line);
        } catch (const Error& e) {
            reject(e.what());
            continue;
        }
        if (fields.size() != 3) {
            reject(fmt::format("expected 3 fields, found {}", fields.size()));
            continue;
        }
        EventRecord event{std::string(trim(fields[0])), std::string(trim(fields[1])), 0};
        if (!conditions.find(event.condition)) {
            reject(fmt::format("unknown condition '{}'", event.condition));
            continue;
        }
        auto onset = parse_int(fields[2]);
        if (!onset) {
            reject(fmt::format("onset_age '{}' is not an integer", fields[2]));
            continue;
        }
        if (!grid.contains(*onset)) {
            reject(fmt::format("onset_age {} outside [{}, {}]", *onset, grid.origin, grid.last_age()));
            continue;
        }
        event.onset_age = *onset;
        auto it = subject_index.find(event.subject_id);
        if (it == subject_index.end()) {
            if (rejected_subjects.count(event.subject_id)) {
                reject(fmt::format("subject '{}' was rejected", event.subject_id));
                continue;
            }
            throw Error(Errc::missing_input,
                        fmt::format("events line {}: subject '{}' not in the subjects file", number, event.subject_id));
        }
        if (!seen_pairs.emplace(event.subject_id, event.condition).second) {
            reject(fmt::format("duplicate record for ({}, {})", event.subject_id, event.condition));
            continue;
        }
        if (event.onset_age >= records[it->second].censor_age) {
            if (late_onsets++ == 0) first_late_line = number;
        }
        parsed.push_back({std::move(event), number, line});
    }
    if (late_onsets > 0) {
        report.warnings.push_back(fmt::format(
            "events: {} onset(s) at or after the censoring age, kept (first on line {})", late_onsets, first_late_line));
    }

    if (report.rejected_fraction() > max_rejected_fraction) return result;

    std::vector<EventRecord> event_records;
    event_records.reserve(parsed.size());
    for (auto& p : parsed) event_records.push_back(std::move(p.record));
    result.cohort = assemble_cohort(grid, conditions, schema, std::move(records), event_records);
    return result;
}

IngestResult ingest_files(const std::filesystem::path& events, const std::filesystem::path& subjects,
                          const AgeGrid& grid, const ConditionRegistry& conditions, const CovariateSchema& schema,
                          double max_rejected_fraction) {
    std::ifstream ev(events);
    if (!ev) throw Error(Errc::missing_input, fmt::format("cannot open events file '{}'", events.string()));
    std::ifstream su(subjects);
    if (!su) throw Error(Errc::missing_input, fmt::format("cannot open subjects file '{}'", subjects.string()));
    return ingest(ev, su, grid, conditions, schema, max_rejected_fraction);
}

Cohort require_cohort(IngestResult result) {
    if (!result.cohort) {
        throw Error(Errc::error_budget_exceeded,
                    fmt::format("{} of {} rows rejected ({:.2f}%)", result.report.rejected.size(),
                                result.report.total_rows(), 100.0 * result.report.rejected_fraction()));
    }
    return std::move(*result.cohort);
}

void write_events_csv(const Cohort& cohort, std::ostream& out) {
    out << "subject_id,condition,onset_age\n";
    for (const auto& e : cohort.events()) {
        out << quote_csv_field(e.subject_id) << ',' << quote_csv_field(e.condition) << ',' << e.onset_age << '\n';
    }
}

void write_subjects_csv(const Cohort& cohort, std::ostream& out) {
    const auto& schema = cohort.schema();
    out << "subject_id,censor_age,death";
    for (const auto& spec : schema.specs()) out << ',' << quote_csv_field(spec.name);
    out << '\n';
    for (const auto& s : cohort.subjects()) {
        out << quote_csv_field(s.record.subject_id) << ',' << s.record.censor_age << ',' << (s.record.death ? 1 : 0);
        for (std::size_t c = 0; c < schema.size(); ++c) out << ',' << quote_csv_field(schema.format(c, s.record.covariates[c]));
        out << '\n';
    }
}

void write_report_text(const ValidationReport& report, double max_rejected_fraction, std::ostream& out) {
    out << fmt::format("subject rows: {}\n", report.subject_rows);
    out << fmt::format("event rows: {}\n", report.event_rows);
    out << fmt::format("rejected rows: {} ({:.4f}%, budget {:.4f}%)\n", report.rejected.size(),
                       100.0 * report.rejected_fraction(), 100.0 * max_rejected_fraction);
    out << fmt::format("status: {}\n", report.rejected_fraction() > max_rejected_fraction ? "aborted" : "accepted");
    constexpr std::size_t shown = 50;
    for (std::size_t i = 0; i < report.rejected.size() && i < shown; ++i) {
        const auto& r = report.rejected[i];
        out << fmt::format("  {} line {}: {}\n", r.file, r.line, r.reason);
    }
    if (report.rejected.size() > shown) out << fmt::format("  ... {} more\n", report.rejected.size() - shown);
    for (const auto& w : report.warnings) out << "warning: " << w << '\n';
}

void write_rejected_csv(const ValidationReport& report, std::ostream& out) {
    out << "file,line,reason,content\n";
    for (const auto& r : report.rejected) {
        out << r.file << ',' << r.line << ',' << quote_csv_field(r.reason) << ',' << quote_csv_field(r.content) << '\n';
    }
}

}  // namespace msa
