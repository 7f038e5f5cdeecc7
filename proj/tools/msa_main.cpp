// msa: command-line driver for the multiple state analysis pipeline.

#include "msa/error.hpp"
#include "msa/pipeline.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <iostream>

namespace {

int exit_code(msa::Errc code) {
    switch (code) {
        case msa::Errc::config: return 2;
        case msa::Errc::missing_input:
        case msa::Errc::parse_error:
        case msa::Errc::error_budget_exceeded:
        case msa::Errc::unknown_condition:
        case msa::Errc::duplicate_record:
        case msa::Errc::duplicate_code:
        case msa::Errc::empty_registry:
            return 3;
        default: return 4;
    }
}

void report(std::string_view category, const std::string& message) {
    std::cerr << nlohmann::json{{"error", category}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiple state analysis: censoring-aware trajectory clustering"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(msa::kToolVersion));

    msa::RunOptions options;
    std::string events;
    std::string subjects;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    std::size_t k = 0;

    for (const auto& name : msa::command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", options.config, "JSON config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out-dir", options.out_dir, "Output directory")->required();
        sub->add_option("--workers", options.workers, "Worker threads, 0 = all cores")->capture_default_str();
        const bool needs_cohort = name != "simulate" && name != "cluster" && name != "select-k";
        if (needs_cohort) {
            sub->add_option("--events", events, "Events CSV")->required();
            sub->add_option("--subjects", subjects, "Subjects CSV")->required();
        }
        if (name == "simulate") {
            sub->add_option("--seed", seed, "Seed, overrides the config");
            sub->add_option("--n", n, "Cohort size, overrides the config");
        }
        if (name == "annotate" || name == "graph" || name == "pipeline") {
            sub->add_option("--k", k, "Partition size, overrides the selection");
        }
        if (name == "dissim" || name == "pipeline") {
            sub->add_flag("--text", options.text_matrix, "Also write the square text matrix");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        report("usage", e.what());
        return 64;
    }

    auto* sub = app.get_subcommands().front();
    if (!events.empty()) options.events = events;
    if (!subjects.empty()) options.subjects = subjects;
    auto given = [sub](const std::string& flag) {
        const auto* option = sub->get_option_no_throw(flag);
        return option != nullptr && option->count() > 0;
    };
    if (given("--seed")) options.seed = seed;
    if (given("--n")) options.n = n;
    if (given("--k")) options.k = k;

    try {
        const auto manifest = msa::run_command(sub->get_name(), options);
        std::cout << nlohmann::json{{"command", sub->get_name()},
                                    {"manifest", (options.out_dir / msa::manifest_name(sub->get_name())).string()},
                                    {"chosen_k", manifest.at("chosen_k")},
                                    {"warnings", manifest.at("warnings").size()}}
                         .dump()
                  << '\n';
        return 0;
    } catch (const msa::Error& e) {
        report(e.category(), e.what());
        return exit_code(e.code());
    } catch (const std::exception& e) {
        report("internal", e.what());
        return 1;
    }
}
