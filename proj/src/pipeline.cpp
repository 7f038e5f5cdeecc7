#include "msa/pipeline.hpp"

#include "msa/annotate.hpp"
#include "msa/cohort_io.hpp"
#include "msa/dissim.hpp"
#include "msa/error.hpp"
#include "msa/parallel.hpp"
#include "msa/select.hpp"
#include "msa/synth.hpp"
#include "msa/trajgraph.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include <fmt/chrono.h>
#include <fmt/core.h>
#include <openssl/evp.h>

namespace msa {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Shared state of one command invocation; becomes the manifest.
class Run {
public:
    Run(std::string command, const RunOptions& options) : command_(std::move(command)), options_(options) {
        config_ = load_config(options.config);
        std::error_code ec;
        fs::create_directories(options.out_dir, ec);
        if (ec) throw Error(Errc::io, fmt::format("cannot create '{}': {}", options.out_dir.string(), ec.message()));
        record_input("config", options.config);
    }

    [[nodiscard]] const Config& config() const noexcept { return config_; }
    [[nodiscard]] const RunOptions& options() const noexcept { return options_; }
    [[nodiscard]] unsigned workers() const noexcept { return options_.workers; }

    fs::path path(const std::string& name) const { return options_.out_dir / name; }

    std::ofstream create(const std::string& name, bool binary = false) {
        std::ofstream out(path(name), binary ? std::ios::binary : std::ios::out);
        if (!out) throw Error(Errc::io, fmt::format("cannot write '{}'", path(name).string()));
        if (std::find(outputs_.begin(), outputs_.end(), name) == outputs_.end()) outputs_.push_back(name);
        return out;
    }

    // For files written by library routines taking a path.
    void record_output(const std::string& name) {
        if (std::find(outputs_.begin(), outputs_.end(), name) == outputs_.end()) outputs_.push_back(name);
    }

    void record_input(const std::string& role, const fs::path& file) {
        if (!fs::exists(file)) throw Error(Errc::missing_input, fmt::format("{} file '{}' not found", role, file.string()));
        inputs_[role] = {{"file", file.filename().string()}, {"sha256", sha256_file(file)}};
    }

    fs::path require_intermediate(const std::string& name, const std::string& producer) {
        const auto p = path(name);
        if (!fs::exists(p)) {
            throw Error(Errc::missing_input, fmt::format("'{}' not found in '{}'; run '{}' first", name,
                                                         options_.out_dir.string(), producer));
        }
        record_input(name, p);
        return p;
    }

    void warn(std::string message) { warnings_.push_back(std::move(message)); }
    void set_chosen_k(std::size_t k) { chosen_k_ = k; }

    template <class F>
    auto stage(const std::string& name, F&& body) {
        const auto start = std::chrono::steady_clock::now();
        struct Timer {
            Run& run;
            std::string name;
            std::chrono::steady_clock::time_point start;
            ~Timer() {
                const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
                run.timing_.push_back({name, elapsed.count()});
            }
        } timer{*this, name, start};
        return body();
    }

    json finish() {
        json outputs = json::object();
        std::vector<std::string> sorted = outputs_;
        std::sort(sorted.begin(), sorted.end());
        for (const auto& name : sorted) outputs[name] = sha256_file(path(name));
        json timing = json::object();
        for (const auto& [name, seconds] : timing_) timing[name] = seconds;

        json manifest = {
            {"tool", "msa"},
            {"version", kToolVersion},
            {"command", command_},
            {"config_sha256", inputs_.at("config").at("sha256")},
            {"settings", effective_settings(config_)},
            {"inputs", inputs_},
            {"chosen_k", chosen_k_ ? json(*chosen_k_) : json(nullptr)},
            {"warnings", warnings_},
            {"outputs", std::move(outputs)},
            {"timing_seconds", std::move(timing)},
            {"created_at", fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr)))},
        };
        if (options_.seed) manifest["seed"] = *options_.seed;
        std::ofstream out(path(manifest_name(command_)));
        if (!out) throw Error(Errc::io, "cannot write the manifest");
        out << manifest.dump(2) << '\n';
        return manifest;
    }

private:
    std::string command_;
    RunOptions options_;
    Config config_;
    std::map<std::string, json> inputs_;
    std::vector<std::string> outputs_;
    std::vector<std::string> warnings_;
    std::vector<std::pair<std::string, double>> timing_;
    std::optional<std::size_t> chosen_k_;
};

std::vector<std::string> subject_ids(const Cohort& cohort) {
    std::vector<std::string> ids;
    ids.reserve(cohort.size());
    for (const auto& s : cohort.subjects()) ids.push_back(s.record.subject_id);
    return ids;
}

Cohort load_cohort(Run& run) {
    const auto& options = run.options();
    if (!options.events) throw Error(Errc::missing_input, "--events is required");
    if (!options.subjects) throw Error(Errc::missing_input, "--subjects is required");
    run.record_input("events", *options.events);
    run.record_input("subjects", *options.subjects);
    return run.stage("validate", [&] {
        const auto& config = run.config();
        auto result = ingest_files(*options.events, *options.subjects, config.grid, config.conditions, config.schema,
                                   config.ingest.max_rejected_fraction);
        {
            auto out = run.create("validation_report.txt");
            write_report_text(result.report, config.ingest.max_rejected_fraction, out);
        }
        {
            auto out = run.create("rejected_rows.csv");
            write_rejected_csv(result.report, out);
        }
        for (const auto& w : result.report.warnings) run.warn(w);
        if (!result.report.rejected.empty()) {
            run.warn(fmt::format("{} input row(s) rejected, see rejected_rows.csv", result.report.rejected.size()));
        }
        return require_cohort(std::move(result));
    });
}

std::vector<std::string> read_ids(const fs::path& path) {
    std::ifstream in(path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

DissimilarityMatrix stage_dissim(Run& run, const Cohort& cohort) {
    return run.stage("dissim", [&] {
        auto d = pairwise_matrix(cohort, run.workers());
        {
            auto out = run.create("dissim.bin", true);
            write_matrix_binary(d, out);
        }
        const auto ids = subject_ids(cohort);
        {
            auto out = run.create("subject_ids.txt");
            for (const auto& id : ids) out << id << '\n';
        }
        if (run.options().text_matrix) {
            auto out = run.create("dissim.txt");
            write_matrix_text(d, ids, out);
        }
        return d;
    });
}

Dendrogram stage_cluster(Run& run, const DissimilarityMatrix& d, const std::vector<std::string>& ids) {
    return run.stage("cluster", [&] {
        if (d.size() < 2) throw Error(Errc::invalid_argument, "clustering needs at least 2 subjects");
        auto dendrogram = ward_linkage(d, run.config().clustering.variant);
        {
            auto out = run.create("dendrogram.csv");
            write_dendrogram_csv(dendrogram, out);
        }
        if (ids.size() == d.size()) {
            auto out = run.create("dendrogram.nwk");
            out << to_newick(dendrogram, ids) << '\n';
        }
        return dendrogram;
    });
}

std::size_t stage_select(Run& run, const DissimilarityMatrix& d, const Dendrogram& dendrogram) {
    return run.stage("select-k", [&] {
        const auto& clustering = run.config().clustering;
        json selection;
        std::size_t chosen = 0;
        if (clustering.k_min || clustering.k_max) {
            if (!clustering.k_min || !clustering.k_max) {
                throw Error(Errc::config, "config 'clustering': k_min and k_max must be given together");
            }
            auto result = scan_k(d, dendrogram, *clustering.k_min, *clustering.k_max, run.workers());
            {
                auto out = run.create("scores.csv");
                write_scores_csv(result, out);
            }
            if (!result.local_minimum) {
                run.warn(fmt::format("no interior local minimum of the C index in [{}, {}]; using the global minimum k={}",
                                     *clustering.k_min, *clustering.k_max, result.chosen_k));
            }
            chosen = result.chosen_k;
            selection = {{"source", "c_index"},
                         {"scanned_k", result.chosen_k},
                         {"local_minimum", result.local_minimum},
                         {"k_min", *clustering.k_min},
                         {"k_max", *clustering.k_max}};
        } else if (!clustering.k) {
            throw Error(Errc::config, "config 'clustering': set k_min and k_max, or a fixed k");
        }
        if (clustering.k) {
            if (*clustering.k < 1 || *clustering.k > d.size()) {
                throw Error(Errc::config, fmt::format("config 'clustering.k': {} outside [1, {}]", *clustering.k, d.size()));
            }
            chosen = *clustering.k;
            selection["source"] = "config";
        }
        selection["k"] = chosen;
        auto out = run.create("selection.json");
        out << selection.dump(2) << '\n';
        return chosen;
    });
}

std::size_t read_selection(Run& run) {
    if (run.options().k) return *run.options().k;
    const auto path = run.require_intermediate("selection.json", "select-k");
    std::ifstream in(path);
    try {
        return json::parse(in).at("k").get<std::size_t>();
    } catch (const json::exception& e) {
        throw Error(Errc::parse_error, fmt::format("selection.json: {}", e.what()));
    }
}

Dendrogram read_dendrogram(Run& run) {
    const auto path = run.require_intermediate("dendrogram.csv", "cluster");
    std::ifstream in(path);
    return read_dendrogram_csv(in);
}

Partition stage_cut(Run& run, const Cohort& cohort, const Dendrogram& dendrogram, std::size_t k) {
    if (dendrogram.leaves() != cohort.size()) {
        throw Error(Errc::shape_mismatch, fmt::format("dendrogram has {} leaves, cohort has {} subjects",
                                                      dendrogram.leaves(), cohort.size()));
    }
    auto partition = cut(dendrogram, k);
    auto out = run.create("partition.csv");
    out << "subject_id,cluster\n";
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        out << quote_csv_field(cohort[i].record.subject_id) << ',' << partition.labels[i] << '\n';
    }
    return partition;
}

void stage_annotate(Run& run, const Cohort& cohort, const Partition& partition) {
    run.stage("annotate", [&] {
        auto report = annotate(cohort, partition, run.config().annotation, run.workers());
        for (const auto& w : report.warnings) run.warn(w);
        {
            auto out = run.create("descriptive_demographics.csv");
            write_descriptive_csv(report.demographics, report.k, out);
        }
        {
            auto out = run.create("descriptive_conditions.csv");
            write_descriptive_csv(report.conditions, report.k, out);
        }
        {
            auto out = run.create("heatmap_demographics.csv");
            write_heatmap_csv(report.demographics_heatmap, out);
        }
        {
            auto out = run.create("heatmap_conditions.csv");
            write_heatmap_csv(report.conditions_heatmap, out);
        }
        return 0;
    });
}

void stage_graph(Run& run, const Cohort& cohort, const Partition& partition) {
    run.stage("graph", [&] {
        const auto& config = run.config();
        std::vector<TransitionGraph> graphs(partition.k);
        parallel_chunks(partition.k, 1, run.workers(), [&](std::size_t begin, std::size_t end) {
            for (std::size_t c = begin; c < end; ++c) {
                graphs[c] = build_graph(cohort, partition, static_cast<int>(c) + 1, config.graph);
            }
        });
        json clusters = json::array();
        for (const auto& g : graphs) {
            auto out = run.create(fmt::format("graph_cluster_{}.dot", g.cluster));
            write_dot(g, config.conditions, out);
            clusters.push_back(to_json(g, config.conditions));
        }
        auto out = run.create("graphs.json");
        out << json{{"clusters", std::move(clusters)}}.dump(2) << '\n';
        return 0;
    });
}

void stage_simulate(Run& run) {
    const auto& config = run.config();
    if (!config.simulation) throw Error(Errc::config, "config has no 'simulation' section");
    const auto& sim = *config.simulation;
    const std::size_t n = run.options().n.value_or(sim.n);
    const std::uint64_t seed = run.options().seed.value_or(sim.seed);
    if (n < 1) throw Error(Errc::config, "config 'simulation.n': must be at least 1 (or pass --n)");
    run.stage("simulate", [&] {
        auto synthetic = generate(sim.spec, config.grid, config.conditions, config.schema, n, seed, run.workers());
        {
            auto out = run.create("events.csv");
            write_events_csv(synthetic.cohort, out);
        }
        {
            auto out = run.create("subjects.csv");
            write_subjects_csv(synthetic.cohort, out);
        }
        auto out = run.create("labels.csv");
        out << "subject_id,label,archetype\n";
        for (std::size_t i = 0; i < synthetic.cohort.size(); ++i) {
            const int label = synthetic.labels[i];
            out << quote_csv_field(synthetic.cohort[i].record.subject_id) << ',' << label << ','
                << quote_csv_field(sim.spec.archetypes[static_cast<std::size_t>(label - 1)].label) << '\n';
        }
        return 0;
    });
}

}  // namespace

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"validate", "dissim",   "cluster",  "select-k",
                                                   "annotate", "graph",    "simulate", "pipeline"};
    return names;
}

std::string manifest_name(std::string_view command) {
    if (command == "pipeline") return "manifest.json";
    return fmt::format("manifest_{}.json", command);
}

json run_command(std::string_view command, const RunOptions& options) {
    const auto& names = command_names();
    if (std::find(names.begin(), names.end(), command) == names.end()) {
        throw Error(Errc::invalid_argument, fmt::format("unknown command '{}'", command));
    }
    Run run(std::string(command), options);

    if (command == "validate") {
        load_cohort(run);
    } else if (command == "dissim") {
        const auto cohort = load_cohort(run);
        stage_dissim(run, cohort);
    } else if (command == "cluster") {
        const auto d = read_matrix_binary(run.require_intermediate("dissim.bin", "dissim"));
        const auto ids_path = run.path("subject_ids.txt");
        std::vector<std::string> ids;
        if (fs::exists(ids_path)) {
            run.record_input("subject_ids.txt", ids_path);
            ids = read_ids(ids_path);
        }
        stage_cluster(run, d, ids);
    } else if (command == "select-k") {
        const auto d = read_matrix_binary(run.require_intermediate("dissim.bin", "dissim"));
        const auto dendrogram = read_dendrogram(run);
        if (dendrogram.leaves() != d.size()) throw Error(Errc::shape_mismatch, "dendrogram and matrix sizes differ");
        run.set_chosen_k(stage_select(run, d, dendrogram));
    } else if (command == "annotate") {
        const auto cohort = load_cohort(run);
        const auto dendrogram = read_dendrogram(run);
        const auto k = read_selection(run);
        run.set_chosen_k(k);
        const auto partition = stage_cut(run, cohort, dendrogram, k);
        stage_annotate(run, cohort, partition);
    } else if (command == "graph") {
        const auto cohort = load_cohort(run);
        Partition partition;
        if (run.options().k) {
            const auto dendrogram = read_dendrogram(run);
            partition = stage_cut(run, cohort, dendrogram, *run.options().k);
        } else {
            partition = read_partition_csv(run.require_intermediate("partition.csv", "annotate"), subject_ids(cohort));
        }
        run.set_chosen_k(partition.k);
        stage_graph(run, cohort, partition);
    } else if (command == "simulate") {
        stage_simulate(run);
    } else {
        const auto cohort = load_cohort(run);
        auto d = stage_dissim(run, cohort);
        const auto dendrogram = stage_cluster(run, d, subject_ids(cohort));
        std::size_t k = stage_select(run, d, dendrogram);
        if (options.k) k = *options.k;
        run.set_chosen_k(k);
        const auto partition = stage_cut(run, cohort, dendrogram, k);
        stage_annotate(run, cohort, partition);
        stage_graph(run, cohort, partition);
    }
    return run.finish();
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, fmt::format("cannot read '{}'", path.string()));
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error(Errc::io, "SHA-256 unavailable");
    }
    std::vector<char> buffer(1 << 16);
    while (in) {
        in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buffer.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    EVP_DigestFinal_ex(ctx, digest, &length);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

Partition read_partition_csv(const fs::path& path, std::span<const std::string> subject_ids) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::missing_input, fmt::format("cannot open '{}'", path.string()));
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "subject_id,cluster") throw Error(Errc::parse_error, "partition.csv: header must be subject_id,cluster");
    std::unordered_map<std::string, int> labels;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 2) throw Error(Errc::parse_error, fmt::format("partition.csv: bad row '{}'", line));
        try {
            labels[fields[0]] = std::stoi(fields[1]);
        } catch (const std::exception&) {
            throw Error(Errc::parse_error, fmt::format("partition.csv: bad cluster '{}'", fields[1]));
        }
    }
    if (labels.size() != subject_ids.size()) {
        throw Error(Errc::shape_mismatch, fmt::format("partition.csv has {} subjects, cohort has {}", labels.size(),
                                                      subject_ids.size()));
    }
    Partition partition;
    for (const auto& id : subject_ids) {
        auto it = labels.find(id);
        if (it == labels.end()) throw Error(Errc::shape_mismatch, fmt::format("partition.csv lacks subject '{}'", id));
        if (it->second < 1) throw Error(Errc::parse_error, "partition.csv: cluster labels start at 1");
        partition.labels.push_back(it->second);
        partition.k = std::max<std::size_t>(partition.k, static_cast<std::size_t>(it->second));
    }
    return partition;
}

}  // namespace msa
