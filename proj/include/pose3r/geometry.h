#pragma once

#include "pose3r/types.h"

#include <vector>

namespace pose3r {

double residual_plane(const PointToPlane &corr, const Pose &pose);
Vec3 residual_line(const PointToLine &corr, const Pose &pose);
Vec3 residual_point(const PointToPoint &corr, const Pose &pose);

// Rows are emitted planes first, then 3 rows per line (rows of I - dd^T in
// order), then 3 rows per point (rows of I).
std::vector<GeneralResidual> to_general_rows(const CorrespondenceSet &corrs);

inline double evaluate_row(const GeneralResidual &row, const Pose &pose) {
    return row.a.dot(pose.R * row.b) + row.a.dot(pose.t) + row.c;
}

// Sum of squared residuals over all correspondences.
double cost(const CorrespondenceSet &corrs, const Pose &pose);

// Angle of R_gt^T R_est in degrees, in [0, 180].
double rotation_error_deg(const Mat3 &R_est, const Mat3 &R_gt);
// ||t_gt - t_est|| / ||t_gt||; throws kDegenerateMetric when t_gt = 0.
double translation_error_rel(const Vec3 &t_est, const Vec3 &t_gt);

Mat3 skew(const Vec3 &v);

} // namespace pose3r
