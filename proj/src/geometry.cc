#include "pose3r/geometry.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace pose3r {

const char *error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::kInvalidInput:
        return "invalid-input";
    case ErrorCode::kParse:
        return "parse";
    case ErrorCode::kDegenerate:
        return "degenerate";
    case ErrorCode::kTranslationDegenerate:
        return "translation-degenerate";
    case ErrorCode::kSingularParameterization:
        return "singular-parameterization";
    case ErrorCode::kDegenerateMetric:
        return "degenerate-metric";
    case ErrorCode::kDegeneratePolynomial:
        return "degenerate-polynomial";
    case ErrorCode::kDegenerateSystem:
        return "degenerate-system";
    case ErrorCode::kDegenerateFixture:
        return "degenerate-fixture";
    case ErrorCode::kUnsupportedConfiguration:
        return "unsupported-configuration";
    case ErrorCode::kNoSolution:
        return "no-solution";
    case ErrorCode::kNoConsensus:
        return "no-consensus";
    case ErrorCode::kNumericFailure:
        return "numeric-failure";
    }
    return "unknown";
}

bool Pose::is_valid(double tol) const {
    if (!R.allFinite() || !t.allFinite())
        return false;
    const Mat3 E = R * R.transpose() - Mat3::Identity();
    return E.cwiseAbs().maxCoeff() <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

Vec3 checked_unit(const Vec3 &v, const char *field) {
    if (!v.allFinite())
        throw Error(ErrorCode::kInvalidInput, std::string("non-finite ") + field);
    const double norm = v.norm();
    if (std::abs(norm - 1.0) <= 1e-12)
        return v;
    if (std::abs(norm - 1.0) <= 1e-6)
        return v / norm;
    throw Error(ErrorCode::kInvalidInput, std::string(field) + " is not unit length (norm " + std::to_string(norm) + ")");
}

Mat3 skew(const Vec3 &v) {
    Mat3 S;
    S << 0.0, -v(2), v(1), v(2), 0.0, -v(0), -v(1), v(0), 0.0;
    return S;
}

double residual_plane(const PointToPlane &corr, const Pose &pose) { return corr.n.dot(pose.apply(corr.x) - corr.y); }

Vec3 residual_line(const PointToLine &corr, const Pose &pose) {
    const Vec3 e = pose.apply(corr.x) - corr.y;
    return e - corr.d * corr.d.dot(e);
}

Vec3 residual_point(const PointToPoint &corr, const Pose &pose) { return pose.apply(corr.x) - corr.y; }

std::vector<GeneralResidual> to_general_rows(const CorrespondenceSet &corrs) {
    std::vector<GeneralResidual> rows;
    rows.reserve(corrs.row_count());
    for (const PointToPlane &c : corrs.planes)
        rows.push_back({c.n, c.x, -c.n.dot(c.y)});
    for (const PointToLine &c : corrs.lines) {
        const Mat3 P = Mat3::Identity() - c.d * c.d.transpose();
        for (int i = 0; i < 3; ++i) {
            const Vec3 a = P.row(i).transpose();
            rows.push_back({a, c.x, -a.dot(c.y)});
        }
    }
    for (const PointToPoint &c : corrs.points) {
        for (int i = 0; i < 3; ++i) {
            const Vec3 a = Vec3::Unit(i);
            rows.push_back({a, c.x, -c.y(i)});
        }
    }
    return rows;
}

double cost(const CorrespondenceSet &corrs, const Pose &pose) {
    double total = 0.0;
    for (const PointToPlane &c : corrs.planes) {
        const double r = residual_plane(c, pose);
        total += r * r;
    }
    for (const PointToLine &c : corrs.lines)
        total += residual_line(c, pose).squaredNorm();
    for (const PointToPoint &c : corrs.points)
        total += residual_point(c, pose).squaredNorm();
    return total;
}

double rotation_error_deg(const Mat3 &R_est, const Mat3 &R_gt) {
    const Mat3 D = R_gt.transpose() * R_est;
    // atan2 of (sin, cos) stays accurate near 0 and 180 degrees.
    const Vec3 w(D(2, 1) - D(1, 2), D(0, 2) - D(2, 0), D(1, 0) - D(0, 1));
    const double sin_theta = 0.5 * w.norm();
    const double cos_theta = 0.5 * (D.trace() - 1.0);
    return std::atan2(sin_theta, cos_theta) * 180.0 / M_PI;
}

double translation_error_rel(const Vec3 &t_est, const Vec3 &t_gt) {
    const double denom = t_gt.norm();
    if (denom == 0.0)
        throw Error(ErrorCode::kDegenerateMetric, "relative translation error undefined for zero ground-truth translation");
    return (t_gt - t_est).norm() / denom;
}

} // namespace pose3r
