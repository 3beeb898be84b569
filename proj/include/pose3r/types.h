#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace pose3r {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

enum class ErrorCode {
    kInvalidInput,
    kParse,
    kDegenerate,
    kTranslationDegenerate,
    kSingularParameterization,
    kDegenerateMetric,
    kDegeneratePolynomial,
    kDegenerateSystem,
    kDegenerateFixture,
    kUnsupportedConfiguration,
    kNoSolution,
    kNoConsensus,
    kNumericFailure,
};

const char *error_code_name(ErrorCode code);

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string &what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

struct Pose {
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();

    Pose() = default;
    Pose(const Mat3 &R_, const Vec3 &t_) : R(R_), t(t_) {}

    Vec3 apply(const Vec3 &x) const { return R * x + t; }
    // Checks R R^T = I and det(R) = 1 within tol.
    bool is_valid(double tol = 1e-9) const;
};

// Unit-norm fields are normalized when within 1e-6 of unit length, otherwise
// construction throws kInvalidInput.
Vec3 checked_unit(const Vec3 &v, const char *field);

struct PointToPlane {
    Vec3 x; // point in frame 1
    Vec3 n; // plane normal in frame 2
    Vec3 y; // point on the plane in frame 2

    PointToPlane() = default;
    PointToPlane(const Vec3 &x_, const Vec3 &n_, const Vec3 &y_) : x(x_), n(checked_unit(n_, "n")), y(y_) {}
};

struct PointToLine {
    Vec3 x; // point in frame 1
    Vec3 d; // line direction in frame 2
    Vec3 y; // point on the line in frame 2

    PointToLine() = default;
    PointToLine(const Vec3 &x_, const Vec3 &d_, const Vec3 &y_) : x(x_), d(checked_unit(d_, "d")), y(y_) {}
};

struct PointToPoint {
    Vec3 x;
    Vec3 y;
};

struct CorrespondenceSet {
    std::vector<PointToPlane> planes;
    std::vector<PointToLine> lines;
    std::vector<PointToPoint> points;

    // N = n_plane + 2 n_line + 3 n_point
    int effective_count() const {
        return static_cast<int>(planes.size() + 2 * lines.size() + 3 * points.size());
    }
    // Number of scalar residual rows: n_plane + 3 n_line + 3 n_point.
    int row_count() const { return static_cast<int>(planes.size() + 3 * lines.size() + 3 * points.size()); }
    bool empty() const { return planes.empty() && lines.empty() && points.empty(); }
};

// Residual r = a^T R b + a^T t + c.
struct GeneralResidual {
    Vec3 a;
    Vec3 b;
    double c = 0.0;
};

} // namespace pose3r
