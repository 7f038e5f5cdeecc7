#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace msa {

enum class Errc {
    empty_registry,
    duplicate_code,
    unknown_condition,
    duplicate_record,
    out_of_range,
    shape_mismatch,
    nan_input,
    invalid_argument,
    parse_error,
    missing_input,
    error_budget_exceeded,
    config,
    io,
};

// Stable machine-readable category, used by the CLI in its error reports.
constexpr std::string_view category_name(Errc code) noexcept {
    switch (code) {
        case Errc::empty_registry: return "empty_registry";
        case Errc::duplicate_code: return "duplicate_code";
        case Errc::unknown_condition: return "unknown_condition";
        case Errc::duplicate_record: return "duplicate_record";
        case Errc::out_of_range: return "out_of_range";
        case Errc::shape_mismatch: return "shape_mismatch";
        case Errc::nan_input: return "nan_input";
        case Errc::invalid_argument: return "invalid_argument";
        case Errc::parse_error: return "parse_error";
        case Errc::missing_input: return "missing_input";
        case Errc::error_budget_exceeded: return "error_budget_exceeded";
        case Errc::config: return "config";
        case Errc::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }
    [[nodiscard]] std::string_view category() const noexcept { return category_name(code_); }

private:
    Errc code_;
};

}  // namespace msa
