#pragma once

#include "pose3r/types.h"

namespace pose3r {

// Cayley-Gibbs-Rodriguez vector, ||s|| = tan(theta / 2).
struct CgrVector {
    Vec3 s = Vec3::Zero();

    CgrVector() = default;
    explicit CgrVector(const Vec3 &s_) : s(s_) {}
};

// R = ((1 - s^T s) I + 2 [s]x + 2 s s^T) / (1 + s^T s)
Mat3 cgr_to_rotation(const CgrVector &s);

// Throws kSingularParameterization when trace(R) <= -1 + 1e-9 (angle at 180 degrees).
CgrVector rotation_to_cgr(const Mat3 &R);

} // namespace pose3r
