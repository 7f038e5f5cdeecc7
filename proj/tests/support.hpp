#pragma once

#include "msa/cohort.hpp"
#include "msa/dissim.hpp"

#include <Eigen/Dense>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace msa::testing {

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 rng(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() / ("msa_" + tag + "_" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

struct CliResult {
    int exit_code = 0;
    std::string out;
    std::string err;
};

// Runs the msa binary through the shell.
inline CliResult run_cli(const std::string& args, const TempDir& scratch) {
    const auto out = scratch / "cli_stdout.txt";
    const auto err = scratch / "cli_stderr.txt";
    const std::string command =
        std::string("\"") + MSA_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
    const int status = std::system(command.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = read_file(out);
    result.err = read_file(err);
    return result;
}

// Random subject on a grid of `rows` ages and `cols` conditions.
struct RandomSubject {
    StateMatrix states;
    FollowUp follow_up;
    std::vector<int> onsets;  // -1 = absent
    int censor = 0;
};

inline RandomSubject random_subject(std::mt19937_64& rng, int rows, int cols, double presence = 0.5) {
    RandomSubject s;
    s.states = StateMatrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    std::bernoulli_distribution present(presence);
    std::uniform_int_distribution<int> age(0, rows - 1);
    for (int l = 0; l < cols; ++l) {
        const int onset = present(rng) ? age(rng) : -1;
        s.onsets.push_back(onset);
        if (onset >= 0) s.states.set_onset(static_cast<std::size_t>(l), static_cast<std::size_t>(onset));
    }
    s.censor = std::uniform_int_distribution<int>(1, rows)(rng);
    s.follow_up = FollowUp(static_cast<std::size_t>(rows), static_cast<std::size_t>(s.censor));
    return s;
}

inline Eigen::MatrixXd dense(const StateMatrix& m) {
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (std::size_t a = 0; a < m.rows(); ++a) {
        for (std::size_t l = 0; l < m.cols(); ++l) out(a, l) = m.at(a, l) ? 1.0 : 0.0;
    }
    return out;
}

inline Eigen::MatrixXd diag_follow_up(const FollowUp& f) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(f.rows(), f.rows());
    for (std::size_t a = 0; a < f.rows(); ++a) out(a, a) = f.at(a) ? 1.0 : 0.0;
    return out;
}

// Matrix-trace formulation of the overlap counts:
//   Q  = tr((Mi' Ci Cj)(Mj' Ci Cj)')
//   P  = tr(((Mi-1)' Ci Cj)((Mj-1)' Ci Cj)')
//   t* = tr((1' Ci Cj)(1' Ci Cj)')
inline PairOverlapCounts trace_counts(const StateMatrix& mi, const FollowUp& fi, const StateMatrix& mj,
                                      const FollowUp& fj) {
    const Eigen::MatrixXd C = diag_follow_up(fi) * diag_follow_up(fj);
    const Eigen::MatrixXd Mi = dense(mi);
    const Eigen::MatrixXd Mj = dense(mj);
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(mi.rows(), mi.cols());
    const double q = ((Mi.transpose() * C) * (Mj.transpose() * C).transpose()).trace();
    const double p = (((Mi - ones).transpose() * C) * ((Mj - ones).transpose() * C).transpose()).trace();
    const double t = ((ones.transpose() * C) * (ones.transpose() * C).transpose()).trace();
    return {static_cast<std::uint64_t>(q), static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(t)};
}

// Direct count over every (age, condition) cell.
inline PairOverlapCounts loop_counts(const StateMatrix& mi, const FollowUp& fi, const StateMatrix& mj,
                                     const FollowUp& fj) {
    PairOverlapCounts c;
    for (std::size_t a = 0; a < mi.rows(); ++a) {
        if (!fi.at(a) || !fj.at(a)) continue;
        for (std::size_t l = 0; l < mi.cols(); ++l) {
            ++c.window_cells;
            const bool x = mi.at(a, l);
            const bool y = mj.at(a, l);
            if (x && y) ++c.positive;
            if (!x && !y) ++c.negative;
        }
    }
    return c;
}

// Cohort from an onset table (-1 = absent), everyone observed to the grid end.
inline Cohort cohort_from_onsets(const std::vector<std::vector<int>>& onsets, const std::vector<std::string>& codes,
                                 int t_max = 105) {
    const AgeGrid grid{0, t_max};
    ConditionRegistry registry(codes);
    std::vector<SubjectRecord> subjects;
    std::vector<EventRecord> events;
    for (std::size_t s = 0; s < onsets.size(); ++s) {
        const std::string id = "s" + std::to_string(s);
        subjects.push_back({id, t_max, false, {}});
        for (std::size_t l = 0; l < codes.size(); ++l) {
            if (onsets[s][l] >= 0) events.push_back({id, codes[l], onsets[s][l]});
        }
    }
    return assemble_cohort(grid, registry, CovariateSchema{}, std::move(subjects), events);
}

// Two subjects observed from 50 to 60: i has hyp at 51 and dm at 52, j the
// reverse order.
inline Cohort worked_example() {
    const AgeGrid grid{50, 11};
    ConditionRegistry registry({"dm", "hyp"});
    std::vector<SubjectRecord> subjects = {{"i", 61, false, {}}, {"j", 61, false, {}}};
    const std::vector<EventRecord> events = {{"i", "hyp", 51}, {"i", "dm", 52}, {"j", "dm", 51}, {"j", "hyp", 52}};
    return assemble_cohort(grid, registry, CovariateSchema{}, std::move(subjects), events);
}

// The same two subjects as CLI inputs: config.json, events.csv, subjects.csv.
inline void write_worked_example_inputs(const std::filesystem::path& dir) {
    write_file(dir / "config.json",
               R"({"age_grid": {"origin": 50, "t_max": 11}, "conditions": ["dm", "hyp"],
                   "clustering": {"k": 1}})");
    write_file(dir / "events.csv", "subject_id,condition,onset_age\ni,hyp,51\ni,dm,52\nj,dm,51\nj,hyp,52\n");
    write_file(dir / "subjects.csv", "subject_id,censor_age,death\ni,61,0\nj,61,0\n");
}

}  // namespace msa::testing
