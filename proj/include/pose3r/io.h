#pragma once

#include "pose3r/least_squares.h"
#include "pose3r/ransac.h"
#include "pose3r/synth.h"
#include "pose3r/types.h"

#include <optional>
#include <string>
#include <vector>

namespace pose3r {

constexpr int kProblemSchemaVersion = 1;
constexpr int kSolutionSchemaVersion = 1;

struct ProblemFile {
    CorrespondenceSet corrs;
    std::optional<Pose> prior;
    std::optional<Pose> ground_truth;
    std::vector<Pose> planted; // exact solutions of ambiguity fixtures, if known
};

struct SolutionEntry {
    Pose pose;
    double cost = 0.0;
    double grad_norm = 0.0;
    bool converged = false;
    bool selected = false;
    std::optional<double> max_residual; // minimal solves only
};

struct InlierMask {
    std::vector<bool> planes, lines, points;
};

struct SolutionFile {
    std::string solver; // "least-squares", "minimal" or "ransac"
    std::vector<SolutionEntry> candidates;
    std::string config_tag;
    double time_total_ms = 0.0;
    double time_build_ms = 0.0;
    double time_relaxation_ms = 0.0;
    double time_refine_ms = 0.0;
    int relaxation_roots = 0;
    int dropped_roots = 0;
    int iterations = 0;
    std::optional<InlierMask> inliers;
};

// Parse failures throw kParse with the line/column for syntax errors and the
// field path (e.g. "lines[2].d") for content errors.
ProblemFile parse_problem(const std::string &text);
ProblemFile read_problem(const std::string &path);
std::string format_problem(const ProblemFile &p);
void write_problem(const std::string &path, const ProblemFile &p);

// A pose file is {"R": [9 numbers, row-major], "t": [3 numbers]}; a problem file
// with a "prior" field is accepted too.
Pose parse_pose(const std::string &text);
Pose read_pose(const std::string &path);

SolutionFile parse_solution(const std::string &text);
SolutionFile read_solution(const std::string &path);
std::string format_solution(const SolutionFile &s);
void write_solution(const std::string &path, const SolutionFile &s);

// keep_all = false keeps the three cheapest candidates plus the selected one.
SolutionFile solution_from_least_squares(const LeastSquaresReport &rep, bool keep_all);
SolutionFile solution_from_minimal(const CorrespondenceSet &corrs, const std::vector<Pose> &poses,
                                   const std::string &tag);
SolutionFile solution_from_ransac(const CorrespondenceSet &corrs, const RansacResult &res);

// Benchmark table. Header is kBenchCsvHeader.
extern const char *const kBenchCsvHeader;
std::string format_bench_csv(const std::vector<BenchRow> &rows);

struct SvgSeries {
    std::string name;
    std::vector<double> x, y;
};
// Line chart with a log10 y axis when log_y is set (nonpositive values are skipped).
std::string format_svg_chart(const std::string &title, const std::string &xlabel, const std::string &ylabel,
                             const std::vector<SvgSeries> &series, bool log_y);

// Exit status for an error code: 2 input, 3 degenerate, 4 no solution, 5 numeric.
int exit_code_for(ErrorCode code);

} // namespace pose3r
