#include "pose3r/cgr.h"

#include "pose3r/geometry.h"

#include <Eigen/Geometry>

namespace pose3r {

Mat3 cgr_to_rotation(const CgrVector &cgr) {
    const Vec3 &s = cgr.s;
    const double ss = s.squaredNorm();
    const Mat3 Rbar = (1.0 - ss) * Mat3::Identity() + 2.0 * skew(s) + 2.0 * s * s.transpose();
    return Rbar / (1.0 + ss);
}

CgrVector rotation_to_cgr(const Mat3 &R) {
    if (R.trace() <= -1.0 + 1e-9)
        throw Error(ErrorCode::kSingularParameterization, "rotation angle at 180 degrees has no CGR representation");
    Eigen::Quaterniond q(R);
    q.normalize();
    if (q.w() < 0.0)
        q.coeffs() = -q.coeffs();
    return CgrVector(q.vec() / q.w());
}

} // namespace pose3r
