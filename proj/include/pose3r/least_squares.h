#pragma once

#include "pose3r/cgr.h"
#include "pose3r/polynomial.h"
#include "pose3r/types.h"

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace pose3r {

// Relaxation unknowns xi = [rho, alpha, beta, gamma] with rho = 1/sqrt(1 + s^T s),
// (alpha, beta, gamma) = rho s. Every residual row is A_i u + B_i t with
// u = [a^2, ab, ag, ar, b^2, bg, br, g^2, gr, r^2, 1] (a = alpha, ..., r = rho).
using MonomialVector = Eigen::Matrix<double, 11, 1>;
MonomialVector relaxation_monomials(const Vec4 &xi);
// Relaxation unknowns for a CGR vector (unit norm, rho > 0).
Vec4 relaxation_point(const CgrVector &s);

struct StackedSystem {
    Eigen::Matrix<double, Eigen::Dynamic, 11> A;
    Eigen::Matrix<double, Eigen::Dynamic, 3> B;
    int rows() const { return static_cast<int>(A.rows()); }
};

struct QuarticCost {
    Eigen::Matrix<double, 11, 11> Q;                    // C^T C
    Eigen::Matrix<double, Eigen::Dynamic, 11> C;        // A - B (B^T B)^-1 B^T A
    Eigen::Matrix<double, 3, 11> translation_map;       // (B^T B)^-1 B^T A, t = -map u

    double evaluate(const Vec4 &xi) const {
        const MonomialVector u = relaxation_monomials(xi);
        return u.dot(Q * u);
    }
};

// Exact cost C(s, t) = Cbar(s, t) / (1 + s^T s)^2 with Cbar = v^T M v, M = sum k k^T
// over residual rows and v the 22 monomials of the cleared residual numerator.
struct RationalCost {
    static constexpr int kNumMonomials = 22;
    using VecV = Eigen::Matrix<double, kNumMonomials, 1>;
    using Vec6 = Eigen::Matrix<double, 6, 1>;
    using Mat6 = Eigen::Matrix<double, 6, 6>;

    Eigen::Matrix<double, kNumMonomials, kNumMonomials> M =
        Eigen::Matrix<double, kNumMonomials, kNumMonomials>::Zero();

    // k-vector of one residual row: numerator of r = k^T v / (1 + s^T s).
    static VecV row_coefficients(const GeneralResidual &row);
    // v(s, t) with x = [s1, s2, s3, t1, t2, t3].
    static VecV monomials(const Vec6 &x);

    double numerator(const Vec6 &x) const;
    double cost(const Vec6 &x) const;
    // |v|^T |M| |v| / (1 + s^T s)^2: the size of the terms summed in cost(x), which
    // bounds its rounding error.
    double cost_magnitude(const Vec6 &x) const;
    // Cbar and its first two derivatives with respect to x.
    void numerator_derivatives(const Vec6 &x, double &value, Vec6 &grad, Mat6 &hess) const;
    // Cleared first-order conditions gbar = ((1 + s^T s) dCbar/ds - 4 s Cbar, dCbar/dt) and their Jacobian.
    Vec6 cleared_gradient(const Vec6 &x, Mat6 *jacobian = nullptr) const;
    // Magnitude of the terms entering the cleared gradient at x; the stationarity
    // tolerance is relative to it.
    double gradient_scale(const Vec6 &x) const;
    // Hessian of the exact cost C at x.
    Mat6 cost_hessian(const Vec6 &x) const;
};

struct SolutionCandidate {
    Pose pose;
    double cost = 0.0;
    double grad_norm = 0.0; // infinity norm of the cleared first-order conditions
    bool converged = false;
    int newton_iters = 0;
    bool minimizer = false;       // cost non-increasing over the last Newton iterations
    double hessian_min_eig = 0.0; // debug classification of the stationary point
    bool selected = false;
};

StackedSystem build_stacked(const CorrespondenceSet &corrs);
QuarticCost eliminate_translation(const StackedSystem &sys);
CubicSystem4 stationarity_system(const QuarticCost &qc);
// (s, t) from a relaxation root; xi is normalized to unit length first. Throws
// kSingularParameterization when rho ~ 0.
std::pair<CgrVector, Vec3> recover_pose(const Vec4 &xi, const QuarticCost &qc);
std::pair<CgrVector, Vec3> recover_pose(const Vec4 &xi, const StackedSystem &sys);

RationalCost build_rational_cost(const CorrespondenceSet &corrs);

struct NewtonOptions {
    int max_iters = 50;
    double rel_tol = 1e-10;
};

SolutionCandidate newton_refine(const CgrVector &s0, const Vec3 &t0, const RationalCost &rc,
                                const NewtonOptions &opt = {});

struct LeastSquaresOptions {
    NewtonOptions newton;
    // A candidate within this factor of the minimum cost may be selected when closer to the prior.
    double prior_cost_factor = 1.05;
    double prior_cost_slack = 1e-10;
};

struct LeastSquaresReport {
    std::vector<SolutionCandidate> candidates; // ascending cost
    int selected = 0;
    int relaxation_roots = 0;
    int dropped_roots = 0; // rho ~ 0 or refinement failures
    CubicSolveDiagnostics cubic;
    double time_build_ms = 0.0;
    double time_relaxation_ms = 0.0;
    double time_refine_ms = 0.0;

    const SolutionCandidate &best() const { return candidates.at(selected); }
};

// Rotation angle in radians plus translation distance relative to max(1, ||t_b||).
double pose_distance(const Pose &a, const Pose &b);

// Minimum number of minimizers worth reporting for this mixture: 3 when only
// point-to-plane correspondences are present, else 2.
int retained_minimizer_count(const CorrespondenceSet &corrs);

LeastSquaresReport solve_least_squares(const CorrespondenceSet &corrs, const std::optional<Pose> &prior = std::nullopt,
                                       const LeastSquaresOptions &opt = {});

} // namespace pose3r
