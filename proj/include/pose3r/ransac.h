#pragma once

#include "pose3r/minimal.h"
#include "pose3r/types.h"

#include <cstdint>
#include <string>
#include <vector>

namespace pose3r {

struct RansacParams {
    int max_iterations = 1000;
    // Inlier thresholds in meters on |r_plane|, ||r_line|| and ||r_point||.
    double threshold_plane = 0.05;
    double threshold_line = 0.05;
    double threshold_point = 0.05;
    double confidence = 0.99;
    std::uint64_t seed = 0;

    void set_threshold(double t) { threshold_plane = threshold_line = threshold_point = t; }
    // Throws kInvalidInput on non-positive thresholds or confidence outside (0, 1).
    void validate() const;
};

struct RansacResult {
    Pose pose;
    // Inlier flags ordered planes, then lines, then points.
    std::vector<bool> inliers;
    int iterations = 0;
    int hypothesis_inliers = 0; // effective count of the best minimal hypothesis
    int inlier_effective = 0;   // effective count of the returned inlier set
    bool polished = false;      // least-squares polish accepted
    std::string config_tag;     // minimal configuration sampled
};

// Minimal configuration used for sampling: fewest correspondences among the
// mixtures the data can supply, ties going to more points. Point-only data uses
// Pt2L0Pl1 with the third point turned into a plane.
struct SamplingPlan {
    MinimalConfig config;
    bool points_as_plane = false;
    int sample_size() const { return config.n_p + config.n_l + config.n_pl; }
};
SamplingPlan choose_sampling_plan(const CorrespondenceSet &corrs);

// Per-correspondence inlier flags of pose, ordered planes, lines, points.
std::vector<bool> inlier_mask(const CorrespondenceSet &corrs, const Pose &pose, const RansacParams &params);

CorrespondenceSet subset(const CorrespondenceSet &corrs, const std::vector<bool> &mask);

RansacResult ransac_estimate(const CorrespondenceSet &corrs, const RansacParams &params);

} // namespace pose3r
