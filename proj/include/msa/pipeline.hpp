#pragma once

#include "msa/config.hpp"
#include "msa/hac.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace msa {

inline constexpr std::string_view kToolVersion = "1.0.0";

struct RunOptions {
    std::filesystem::path config;
    std::optional<std::filesystem::path> events;
    std::optional<std::filesystem::path> subjects;
    std::filesystem::path out_dir = ".";
    unsigned workers = 0;                 // 0 = all cores
    std::optional<std::uint64_t> seed;    // simulate
    std::optional<std::size_t> n;         // simulate
    std::optional<std::size_t> k;         // annotate / graph, overrides the selection
    bool text_matrix = false;             // dissim: also write the square text matrix
};

// Names accepted by run_command.
const std::vector<std::string>& command_names();

// Runs one subcommand, writing its outputs and a manifest into out_dir.
// Returns the manifest. Throws msa::Error.
//
//   validate  events + subjects -> validation_report.txt, rejected_rows.csv
//   dissim    events + subjects -> dissim.bin, subject_ids.txt [, dissim.txt]
//   cluster   dissim.bin, subject_ids.txt -> dendrogram.csv, dendrogram.nwk
//   select-k  dissim.bin, dendrogram.csv -> scores.csv, selection.json
//   annotate  events + subjects, dendrogram.csv, selection.json -> partition.csv,
//             descriptive_{demographics,conditions}.csv, heatmap_{demographics,conditions}.csv
//   graph     events + subjects, partition.csv -> graph_cluster_<c>.dot, graphs.json
//   simulate  config simulation section -> events.csv, subjects.csv, labels.csv
//   pipeline  validate, dissim, cluster, select-k, annotate, graph
nlohmann::json run_command(std::string_view command, const RunOptions& options);

// Manifest file written by a command: manifest.json for pipeline,
// manifest_<command>.json otherwise.
std::string manifest_name(std::string_view command);

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

// partition.csv: subject_id,cluster
Partition read_partition_csv(const std::filesystem::path& path, std::span<const std::string> subject_ids);

}  // namespace msa
