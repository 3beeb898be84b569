#include "pose3r/ransac.h"

#include "pose3r/geometry.h"
#include "pose3r/least_squares.h"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace pose3r {

void RansacParams::validate() const {
    if (!(threshold_plane > 0.0) || !(threshold_line > 0.0) || !(threshold_point > 0.0))
        throw Error(ErrorCode::kInvalidInput, "inlier thresholds must be positive");
    if (!(confidence > 0.0 && confidence < 1.0))
        throw Error(ErrorCode::kInvalidInput, "confidence must lie in (0, 1)");
    if (max_iterations < 1)
        throw Error(ErrorCode::kInvalidInput, "max_iterations must be at least 1");
}

SamplingPlan choose_sampling_plan(const CorrespondenceSet &corrs) {
    const int np = static_cast<int>(corrs.points.size());
    const int nl = static_cast<int>(corrs.lines.size());
    const int npl = static_cast<int>(corrs.planes.size());
    const MinimalConfig *best = nullptr;
    for (const MinimalConfig &c : MinimalConfig::all()) {
        if (c.n_p > np || c.n_l > nl || c.n_pl > npl)
            continue;
        const int size = c.n_p + c.n_l + c.n_pl;
        if (!best) {
            best = &c;
            continue;
        }
        const int bsize = best->n_p + best->n_l + best->n_pl;
        if (size < bsize || (size == bsize && (c.n_p > best->n_p || (c.n_p == best->n_p && c.n_l > best->n_l))))
            best = &c;
    }
    SamplingPlan plan;
    // Three points can stand in for two points and a plane.
    if (np >= 3 && (!best || best->n_p + best->n_l + best->n_pl > 3 || best->n_p < 2)) {
        plan.config = MinimalConfig::from_counts(2, 0, 1);
        plan.points_as_plane = true;
        return plan;
    }
    if (!best)
        throw Error(ErrorCode::kUnsupportedConfiguration, "no minimal configuration can be sampled from this data");
    plan.config = *best;
    return plan;
}

std::vector<bool> inlier_mask(const CorrespondenceSet &corrs, const Pose &pose, const RansacParams &params) {
    std::vector<bool> mask;
    mask.reserve(corrs.planes.size() + corrs.lines.size() + corrs.points.size());
    for (const auto &p : corrs.planes)
        mask.push_back(std::abs(residual_plane(p, pose)) <= params.threshold_plane);
    for (const auto &l : corrs.lines)
        mask.push_back(residual_line(l, pose).norm() <= params.threshold_line);
    for (const auto &p : corrs.points)
        mask.push_back(residual_point(p, pose).norm() <= params.threshold_point);
    return mask;
}

CorrespondenceSet subset(const CorrespondenceSet &corrs, const std::vector<bool> &mask) {
    CorrespondenceSet out;
    size_t k = 0;
    for (const auto &p : corrs.planes)
        if (mask[k++])
            out.planes.push_back(p);
    for (const auto &l : corrs.lines)
        if (mask[k++])
            out.lines.push_back(l);
    for (const auto &p : corrs.points)
        if (mask[k++])
            out.points.push_back(p);
    return out;
}

namespace {

int effective(const CorrespondenceSet &corrs, const std::vector<bool> &mask) {
    int n = 0;
    size_t k = 0;
    for (size_t i = 0; i < corrs.planes.size(); ++i)
        n += mask[k++] ? 1 : 0;
    for (size_t i = 0; i < corrs.lines.size(); ++i)
        n += mask[k++] ? 2 : 0;
    for (size_t i = 0; i < corrs.points.size(); ++i)
        n += mask[k++] ? 3 : 0;
    return n;
}

double inlier_cost(const CorrespondenceSet &corrs, const Pose &pose, const std::vector<bool> &mask) {
    return cost(subset(corrs, mask), pose);
}

std::vector<int> sample_indices(std::mt19937_64 &rng, int n, int k) {
    // partial Fisher-Yates
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i)
        idx[i] = i;
    for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<int> u(i, n - 1);
        std::swap(idx[i], idx[u(rng)]);
    }
    idx.resize(k);
    return idx;
}

// Minimal sample for hypothesis `index`; false when the sample is geometrically unusable.
bool draw_sample(const CorrespondenceSet &corrs, const SamplingPlan &plan, std::uint64_t seed, int index,
                 CorrespondenceSet &out) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index)};
    std::mt19937_64 rng(seq);
    out = CorrespondenceSet();
    if (plan.points_as_plane) {
        const auto idx = sample_indices(rng, static_cast<int>(corrs.points.size()), 3);
        const PointToPoint &p1 = corrs.points[idx[0]], &p2 = corrs.points[idx[1]], &p3 = corrs.points[idx[2]];
        const Vec3 n = (p2.y - p1.y).cross(p3.y - p1.y);
        const double scale = (p2.y - p1.y).norm() * (p3.y - p1.y).norm();
        if (!(n.norm() > 1e-9 * scale) || !(scale > 0.0))
            return false;
        out.points = {p1, p2};
        out.planes.emplace_back(p3.x, n.normalized(), p3.y);
        return true;
    }
    for (int i : sample_indices(rng, static_cast<int>(corrs.planes.size()), plan.config.n_pl))
        out.planes.push_back(corrs.planes[i]);
    for (int i : sample_indices(rng, static_cast<int>(corrs.lines.size()), plan.config.n_l))
        out.lines.push_back(corrs.lines[i]);
    for (int i : sample_indices(rng, static_cast<int>(corrs.points.size()), plan.config.n_p))
        out.points.push_back(corrs.points[i]);
    return true;
}

bool is_superset(const std::vector<bool> &a, const std::vector<bool> &b) {
    for (size_t i = 0; i < a.size(); ++i)
        if (b[i] && !a[i])
            return false;
    return true;
}

} // namespace

RansacResult ransac_estimate(const CorrespondenceSet &corrs, const RansacParams &params) {
    params.validate();
    if (corrs.effective_count() < 7)
        throw Error(ErrorCode::kInvalidInput, "RANSAC needs at least 7 effective correspondences");
    const SamplingPlan plan = choose_sampling_plan(corrs);
    const int total = static_cast<int>(corrs.planes.size() + corrs.lines.size() + corrs.points.size());
    const int m = plan.sample_size();

    RansacResult res;
    res.config_tag = plan.config.tag + (plan.points_as_plane ? "(points)" : "");
    std::vector<bool> best_mask;
    int best_eff = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    Pose best_pose;
    double bound = params.max_iterations;

    int it = 0;
    for (; it < params.max_iterations && it < bound; ++it) {
        CorrespondenceSet sample;
        if (!draw_sample(corrs, plan, params.seed, it, sample))
            continue;
        std::vector<Pose> poses;
        try {
            poses = solve_minimal(sample);
        } catch (const Error &) {
            continue;
        }
        for (const Pose &pose : poses) {
            const std::vector<bool> mask = inlier_mask(corrs, pose, params);
            const int eff = effective(corrs, mask);
            if (eff < best_eff)
                continue;
            const double c = inlier_cost(corrs, pose, mask);
            if (eff > best_eff || c < best_cost) {
                best_eff = eff;
                best_cost = c;
                best_mask = mask;
                best_pose = pose;
                const double w = static_cast<double>(std::count(mask.begin(), mask.end(), true)) / total;
                const double pm = std::pow(w, m);
                if (pm >= 1.0)
                    bound = 0;
                else if (pm > 0.0)
                    bound = std::min<double>(params.max_iterations,
                                             std::ceil(std::log(1.0 - params.confidence) / std::log(1.0 - pm)));
            }
        }
    }
    res.iterations = it;
    if (best_eff < 7)
        throw Error(ErrorCode::kNoConsensus, "no hypothesis reached 7 effective inliers");

    res.pose = best_pose;
    res.inliers = best_mask;
    res.hypothesis_inliers = best_eff;
    try {
        const LeastSquaresReport ls = solve_least_squares(subset(corrs, best_mask));
        const Pose polished = ls.best().pose;
        const std::vector<bool> mask = inlier_mask(corrs, polished, params);
        if (is_superset(mask, best_mask)) {
            res.pose = polished;
            res.inliers = mask;
            res.polished = true;
        }
    } catch (const Error &) {
        // keep the minimal hypothesis
    }
    res.inlier_effective = effective(corrs, res.inliers);
    return res;
}

} // namespace pose3r
