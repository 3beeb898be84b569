#pragma once

#include "pose3r/polynomial.h"
#include "pose3r/types.h"

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

namespace pose3r {

// The seven minimal mixtures, named PtXLYPlZ by their point/line/plane counts.
struct MinimalConfig {
    int n_p = 0;
    int n_l = 0;
    int n_pl = 0;
    std::string tag;

    int raw_equations() const { return 3 * n_p + 3 * n_l + n_pl; }

    // Throws kUnsupportedConfiguration for counts outside the table.
    static MinimalConfig from_counts(int n_p, int n_l, int n_pl);
    static MinimalConfig from_tag(const std::string &tag);
    static const std::vector<MinimalConfig> &all();
};

MinimalConfig classify(const CorrespondenceSet &corrs);

// Cleared residual rows C x + A y = 0 with x = [s1^2, s2^2, s3^2, s1 s2, s1 s3, s2 s3, s1, s2, s3, 1]
// and y = (1 + s^T s) t.
struct MinimalEquationSet {
    enum class Kind { kPlane, kLine, kPoint };
    struct RowInfo {
        Kind kind;
        int index;     // correspondence index within its kind
        int component; // projector / coordinate row, 0 for planes
    };

    Eigen::Matrix<double, Eigen::Dynamic, 10> C;
    Eigen::Matrix<double, Eigen::Dynamic, 3> A;
    std::vector<RowInfo> info;
    // |d_i| of the projector row for line rows, 0 otherwise
    std::vector<double> weight;

    int rows() const { return static_cast<int>(C.rows()); }
};

Eigen::Matrix<double, 10, 1> minimal_monomials(const Vec3 &s);

MinimalEquationSet build_minimal_equations(const CorrespondenceSet &corrs);

struct MinimalBlocks {
    Eigen::Matrix<double, 3, 10> C1, C2;
    Eigen::Matrix3d A1, A2;
    std::array<int, 6> rows{}; // first three form group 1
    double sigma_min = 0.0;    // smallest singular value of A1
    double cond = 0.0;         // condition number of A1
};

// Six independent rows and the best-conditioned split into two triples.
// Throws kDegenerate when no split has cond(A1) <= 1e10.
MinimalBlocks select_six(const MinimalEquationSet &eqs, const MinimalConfig &config);
// Rows of the six-row subset before partitioning.
std::vector<int> select_rows(const MinimalEquationSet &eqs, const MinimalConfig &config);

QuadricTriple reduce_to_quadrics(const MinimalBlocks &blocks);
// y = -A1^-1 C1 x(s)
Vec3 recover_y(const MinimalBlocks &blocks, const Vec3 &s);

struct MinimalOptions {
    QuadricSolveOptions quadrics;
    // Accept a pose when every selected equation is below this times its term scale.
    double residual_tol = 1e-8;
};

struct MinimalDiagnostics {
    std::string tag;
    MinimalBlocks blocks;
    QuadricSolveDiagnostics quadrics;
    int rejected = 0; // roots failing the residual check
};

// Up to 8 poses. Empty on noisy data is a valid outcome.
std::vector<Pose> solve_minimal(const CorrespondenceSet &corrs, const MinimalOptions &opt = {},
                                MinimalDiagnostics *diag = nullptr);

} // namespace pose3r
