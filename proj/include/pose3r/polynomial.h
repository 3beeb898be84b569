#pragma once

#include "pose3r/types.h"

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

namespace pose3r {

// Univariate polynomial, coefficients in ascending powers.
struct Poly1 {
    std::vector<double> coeffs;

    Poly1() = default;
    explicit Poly1(std::vector<double> c) : coeffs(std::move(c)) {}

    int degree() const { return static_cast<int>(coeffs.size()) - 1; }
    double operator()(double x) const;
    // sum_k |c_k| |x|^k, the magnitude against which |p(x)| is judged
    double scale_at(double x) const;
    double max_abs_coeff() const;
};

// Real roots via companion-matrix eigenvalues with a Newton polish per root.
// Complex eigenvalues with |Im| <= 1e-6 (1 + |root|) are projected to the real
// axis. Nearby roots are merged. Throws kDegeneratePolynomial when every
// coefficient is ~0.
std::vector<double> real_roots(const Poly1 &p, double tol = 1e-8);

// Three quadrics f_i(s) = K.row(i) . [s1^2, s2^2, s3^2, s1 s2, s1 s3, s2 s3, s1, s2, s3, 1].
struct QuadricTriple {
    Eigen::Matrix<double, 3, 10> K = Eigen::Matrix<double, 3, 10>::Zero();
};

Eigen::Matrix<double, 10, 1> quadric_monomials(const Vec3 &s);
Vec3 evaluate_quadrics(const QuadricTriple &q, const Vec3 &s);

// Hidden-variable construction for a fixed hidden unknown (s3 after the
// coordinate permutation has been applied by the caller).
namespace hidden_variable {
using Mat6 = Eigen::Matrix<double, 6, 6>;
// Rows F1..F6 over h = [s0^2, s1^2, s2^2, s0 s1, s0 s2, s1 s2] for a numeric s3.
Mat6 coefficient_matrix(const QuadricTriple &q, double s3);
// det C(s3) as a degree-8 polynomial, interpolated at 9 Chebyshev nodes.
Poly1 determinant_polynomial(const QuadricTriple &q);
// Quadratic forms F4, F5, F6 as 3x3 symmetric matrices over z = [s0, s1, s2].
std::array<Eigen::Matrix3d, 3> minor_forms(const QuadricTriple &q, double s3);
} // namespace hidden_variable

struct QuadricSolveOptions {
    // 0, 1 or 2: which unknown is hidden first. Retries use the others.
    int hidden_variable = 2;
    // Disable retries on other axes / rotated coordinates (used by cross-checks).
    bool allow_retry = true;
    double null_space_ratio = 1e-6;
    double dedup_radius = 1e-6;
};

struct QuadricSolveDiagnostics {
    int hidden_variable_used = -1;
    bool rotated_coordinates = false;
    bool reduced_rank_path = false;
    int real_roots = 0;
    int ambiguous_roots = 0;   // null space dimension > 1 at a root
    int rejected_roots = 0;    // root dropped: at infinity or residual too large
    Poly1 determinant;         // det C(s3) of the attempt that produced the solutions
    std::vector<std::string> notes;
};

// All real solutions (at most 8). Throws kDegenerateSystem when the solution set is
// not finite.
std::vector<Vec3> solve_three_quadrics(const QuadricTriple &q, const QuadricSolveOptions &opt = {},
                                       QuadricSolveDiagnostics *diag = nullptr);

// Four cubics in xi = [rho, alpha, beta, gamma] containing only cubic and linear
// monomials. Columns 0..19 are the cubic monomials in cubic_monomial_exponents()
// order, columns 20..23 the linear monomials rho, alpha, beta, gamma.
struct CubicSystem4 {
    static constexpr int kNumMonomials = 24;
    Eigen::Matrix<double, 4, kNumMonomials> coeffs = Eigen::Matrix<double, 4, kNumMonomials>::Zero();

    Vec4 evaluate(const Vec4 &xi) const;
    Eigen::Matrix4d jacobian(const Vec4 &xi) const;
    double max_abs_coeff() const { return coeffs.cwiseAbs().maxCoeff(); }
};

const std::array<std::array<int, 4>, CubicSystem4::kNumMonomials> &cubic_system_exponents();

struct CubicSolveDiagnostics {
    int paths_tracked = 0;
    int paths_failed = 0;   // step size underflow or step budget exhausted
    int paths_diverged = 0; // endpoint at infinity
    int singular_endpoints = 0; // stalled just short of t = 1, finished by Newton on the target
    int complex_endpoints = 0;
    int real_solutions = 0;
};

// All real solutions up to the +-xi symmetry (one representative per pair, rho >= 0,
// ties broken by alpha >= 0). The trivial solution xi = 0 is excluded.
// Throws kNumericFailure when no path could be tracked to completion.
std::vector<Vec4> solve_cubic_stationarity(const CubicSystem4 &sys, CubicSolveDiagnostics *diag = nullptr);

} // namespace pose3r
