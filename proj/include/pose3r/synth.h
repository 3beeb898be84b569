#pragma once

#include "pose3r/types.h"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace pose3r {

struct SynthSpec {
    int n_p = 0;
    int n_l = 0;
    int n_pl = 0;
    // When > 0 the counts above are ignored and drawn with random_effective_split.
    int effective_n = 0;
    double noise_sigma = 0.0;
    double sphere_radius = 10.0;
    double translation_range = 10.0;
    std::uint64_t seed = 0;
};

struct SynthProblem {
    CorrespondenceSet corrs;
    Pose truth;
    // Planted exact solutions for ambiguity fixtures (truth is the first one).
    std::vector<Pose> planted;
};

// Deterministic 64-bit stream key for (seed, a, b).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// Z-Y-X Euler angles in degrees: alpha, gamma in [0, 360), beta in [0, 180]; angles above 179 degrees are resampled.
Mat3 random_rotation(std::mt19937_64 &rng);
Vec3 random_in_sphere(std::mt19937_64 &rng, double radius);
Vec3 random_unit(std::mt19937_64 &rng);

// Noise of sigma on frame-1 points. The geometry and the unit noise draws depend
// only on the seed, so sweeping sigma with a fixed seed reuses the same draws.
SynthProblem generate(const SynthSpec &spec);

// Uniform over the nonnegative (n_pl, n_l, n_p) with n_pl + 2 n_l + 3 n_p = N.
struct EffectiveSplit {
    int n_pl, n_l, n_p;
};
std::vector<EffectiveSplit> effective_splits(int N);
EffectiveSplit random_effective_split(int N, std::mt19937_64 &rng);
EffectiveSplit random_effective_split(int N, std::uint64_t seed);

// Ambiguity fixtures: every planted pose is an exact solution.
std::vector<PointToLine> make_ambiguous_lines(const std::vector<Vec3> &points, const Pose &P1, const Pose &P2);
std::vector<PointToPlane> make_ambiguous_planes(const std::vector<Vec3> &points, const Pose &P1, const Pose &P2,
                                                const Pose &P3);
CorrespondenceSet make_ambiguous_mixed(const std::vector<Vec3> &line_points, const std::vector<Vec3> &plane_points,
                                       const Pose &P1, const Pose &P2);

enum class AmbiguityKind { kLines, kPlanes, kMixed };
AmbiguityKind parse_ambiguity(const std::string &name);
// Random fixture: 5 lines, 10 planes, or 3 lines and 4 planes.
SynthProblem make_ambiguity_fixture(AmbiguityKind kind, std::uint64_t seed);

struct BenchCell {
    std::string label;
    SynthSpec spec; // seed is ignored; trials derive their own streams
};

struct BenchRow {
    std::string label;
    int effective_n = 0;
    double sigma = 0.0;
    int trials = 0;
    int failures = 0;
    double rot_mean = 0.0, rot_median = 0.0;     // degrees
    double trans_mean = 0.0, trans_median = 0.0; // relative
    double time_mean_ms = 0.0;
};

struct BenchTrial {
    double rot_err = 0.0;
    double trans_err = 0.0;
    double time_ms = 0.0;
    bool failed = false;
};

// Threads: POSE3R_THREADS when set, else hardware concurrency.
int worker_threads();

// Trial k of every cell uses stream derive_seed(seed, cell key, k), where the cell key
// depends on the correspondence spec but not on sigma.
std::vector<BenchTrial> run_cell(const BenchCell &cell, int trials, std::uint64_t seed);
std::vector<BenchRow> run_benchmark(const std::vector<BenchCell> &grid, int trials, std::uint64_t seed);

double median(std::vector<double> v);
double spearman(const std::vector<double> &x, const std::vector<double> &y);

} // namespace pose3r
