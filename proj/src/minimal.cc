#include "pose3r/minimal.h"

#include "pose3r/cgr.h"
#include "pose3r/geometry.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace pose3r {

const std::vector<MinimalConfig> &MinimalConfig::all() {
    static const std::vector<MinimalConfig> table = {
        {0, 0, 6, "Pt0L0Pl6"}, {0, 1, 4, "Pt0L1Pl4"}, {1, 0, 3, "Pt1L0Pl3"}, {0, 2, 2, "Pt0L2Pl2"},
        {1, 1, 1, "Pt1L1Pl1"}, {2, 0, 1, "Pt2L0Pl1"}, {0, 3, 0, "Pt0L3Pl0"},
    };
    return table;
}

MinimalConfig MinimalConfig::from_counts(int n_p, int n_l, int n_pl) {
    for (const MinimalConfig &c : all())
        if (c.n_p == n_p && c.n_l == n_l && c.n_pl == n_pl)
            return c;
    throw Error(ErrorCode::kUnsupportedConfiguration, "no minimal configuration with " + std::to_string(n_p) +
                                                          " points, " + std::to_string(n_l) + " lines, " +
                                                          std::to_string(n_pl) + " planes");
}

MinimalConfig MinimalConfig::from_tag(const std::string &tag) {
    for (const MinimalConfig &c : all())
        if (c.tag == tag)
            return c;
    throw Error(ErrorCode::kUnsupportedConfiguration, "unknown minimal configuration '" + tag + "'");
}

MinimalConfig classify(const CorrespondenceSet &corrs) {
    return MinimalConfig::from_counts(static_cast<int>(corrs.points.size()), static_cast<int>(corrs.lines.size()),
                                      static_cast<int>(corrs.planes.size()));
}

Eigen::Matrix<double, 10, 1> minimal_monomials(const Vec3 &s) {
    Eigen::Matrix<double, 10, 1> x;
    x << s(0) * s(0), s(1) * s(1), s(2) * s(2), s(0) * s(1), s(0) * s(2), s(1) * s(2), s(0), s(1), s(2), 1.0;
    return x;
}

namespace {

// Numerator of a^T R b + a^T t + c after multiplying by (1 + s^T s), with y = (1 + s^T s) t.
Eigen::Matrix<double, 1, 10> cleared_row(const GeneralResidual &r) {
    const Vec3 &a = r.a, &b = r.b;
    const double ab = a.dot(b);
    const Vec3 w = b.cross(a);
    Eigen::Matrix<double, 1, 10> k;
    for (int i = 0; i < 3; ++i) {
        k(i) = -ab + 2.0 * a(i) * b(i) + r.c;
        k(6 + i) = 2.0 * w(i);
    }
    k(3) = 2.0 * (a(0) * b(1) + a(1) * b(0));
    k(4) = 2.0 * (a(0) * b(2) + a(2) * b(0));
    k(5) = 2.0 * (a(1) * b(2) + a(2) * b(1));
    k(9) = ab + r.c;
    return k;
}

double sigma_min_of(const Eigen::MatrixXd &M) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    return svd.singularValues()(svd.singularValues().size() - 1);
}

} // namespace

MinimalEquationSet build_minimal_equations(const CorrespondenceSet &corrs) {
    classify(corrs);
    const std::vector<GeneralResidual> rows = to_general_rows(corrs);
    MinimalEquationSet eq;
    const int m = static_cast<int>(rows.size());
    eq.C.resize(m, 10);
    eq.A.resize(m, 3);
    for (int i = 0; i < m; ++i) {
        eq.C.row(i) = cleared_row(rows[i]);
        eq.A.row(i) = rows[i].a.transpose();
    }
    for (int i = 0; i < static_cast<int>(corrs.planes.size()); ++i) {
        eq.info.push_back({MinimalEquationSet::Kind::kPlane, i, 0});
        eq.weight.push_back(0.0);
    }
    for (int i = 0; i < static_cast<int>(corrs.lines.size()); ++i)
        for (int k = 0; k < 3; ++k) {
            eq.info.push_back({MinimalEquationSet::Kind::kLine, i, k});
            eq.weight.push_back(std::abs(corrs.lines[i].d(k)));
        }
    for (int i = 0; i < static_cast<int>(corrs.points.size()); ++i)
        for (int k = 0; k < 3; ++k) {
            eq.info.push_back({MinimalEquationSet::Kind::kPoint, i, k});
            eq.weight.push_back(0.0);
        }
    return eq;
}

std::vector<int> select_rows(const MinimalEquationSet &eqs, const MinimalConfig &config) {
    std::vector<int> keep;
    std::vector<int> point_rows;
    for (int i = 0; i < eqs.rows(); ++i) {
        const auto &info = eqs.info[i];
        if (info.kind == MinimalEquationSet::Kind::kLine) {
            // The three projector rows satisfy sum_k d_k row_k = 0; drop the one with the largest |d_k|.
            const int base = i - info.component;
            int drop = base;
            for (int k = 1; k < 3; ++k)
                if (eqs.weight[base + k] > eqs.weight[drop])
                    drop = base + k;
            if (i != drop)
                keep.push_back(i);
        } else if (info.kind == MinimalEquationSet::Kind::kPoint) {
            point_rows.push_back(i);
        } else {
            keep.push_back(i);
        }
    }
    if (config.n_p == 2) {
        // Two points leave the rotation about their axis free; the plane row is always kept
        // and one of the six point rows is dropped, keeping the best-conditioned A.
        int best_drop = -1;
        double best = -1.0;
        for (int d : point_rows) {
            Eigen::MatrixXd Astack(6, 3);
            int r = 0;
            for (int k : keep)
                Astack.row(r++) = eqs.A.row(k);
            for (int k : point_rows)
                if (k != d)
                    Astack.row(r++) = eqs.A.row(k);
            const double sm = sigma_min_of(Astack);
            if (sm > best * (1.0 + 1e-12)) {
                best = sm;
                best_drop = d;
            }
        }
        for (int k : point_rows)
            if (k != best_drop)
                keep.push_back(k);
    } else {
        keep.insert(keep.end(), point_rows.begin(), point_rows.end());
    }
    std::sort(keep.begin(), keep.end());
    if (keep.size() != 6)
        throw Error(ErrorCode::kUnsupportedConfiguration, "configuration " + config.tag + " does not give six equations");
    return keep;
}

MinimalBlocks select_six(const MinimalEquationSet &eqs, const MinimalConfig &config) {
    const std::vector<int> rows = select_rows(eqs, config);
    MinimalBlocks best;
    bool found = false;
    // All 20 ordered choices of the first group; lexicographic order breaks ties.
    for (int a = 0; a < 6; ++a)
        for (int b = a + 1; b < 6; ++b)
            for (int c = b + 1; c < 6; ++c) {
                Eigen::Matrix3d A1;
                A1.row(0) = eqs.A.row(rows[a]);
                A1.row(1) = eqs.A.row(rows[b]);
                A1.row(2) = eqs.A.row(rows[c]);
                Eigen::JacobiSVD<Eigen::Matrix3d> svd(A1);
                const Vec3 sv = svd.singularValues();
                if (found && !(sv(2) > best.sigma_min * (1.0 + 1e-12)))
                    continue;
                MinimalBlocks blk;
                blk.A1 = A1;
                blk.sigma_min = sv(2);
                blk.cond = sv(2) > 0.0 ? sv(0) / sv(2) : std::numeric_limits<double>::infinity();
                std::array<int, 3> g1{a, b, c};
                int n2 = 0;
                for (int k = 0; k < 6; ++k) {
                    const bool in1 = (k == a || k == b || k == c);
                    if (!in1) {
                        blk.C2.row(n2) = eqs.C.row(rows[k]);
                        blk.A2.row(n2) = eqs.A.row(rows[k]);
                        blk.rows[3 + n2] = rows[k];
                        ++n2;
                    }
                }
                for (int k = 0; k < 3; ++k) {
                    blk.C1.row(k) = eqs.C.row(rows[g1[k]]);
                    blk.rows[k] = rows[g1[k]];
                }
                best = blk;
                found = true;
            }
    if (!found || !(best.cond <= 1e10))
        throw Error(ErrorCode::kDegenerate, "no equation split with a well-conditioned translation block");
    return best;
}

QuadricTriple reduce_to_quadrics(const MinimalBlocks &b) {
    QuadricTriple q;
    const Eigen::PartialPivLU<Eigen::Matrix3d> lu(b.A1);
    q.K = b.C2 - b.A2 * lu.solve(b.C1);
    return q;
}

Vec3 recover_y(const MinimalBlocks &b, const Vec3 &s) {
    return -b.A1.partialPivLu().solve(b.C1 * minimal_monomials(s));
}

std::vector<Pose> solve_minimal(const CorrespondenceSet &corrs, const MinimalOptions &opt, MinimalDiagnostics *diag) {
    const MinimalConfig config = classify(corrs);
    const MinimalEquationSet eqs = build_minimal_equations(corrs);
    const MinimalBlocks blocks = select_six(eqs, config);
    const QuadricTriple q = reduce_to_quadrics(blocks);

    QuadricSolveDiagnostics qdiag;
    const std::vector<Vec3> roots = solve_three_quadrics(q, opt.quadrics, &qdiag);

    std::vector<Pose> poses;
    int rejected = 0;
    for (const Vec3 &s : roots) {
        const Vec3 y = recover_y(blocks, s);
        const Eigen::Matrix<double, 10, 1> x = minimal_monomials(s);
        bool ok = y.allFinite();
        for (int k = 0; k < 6 && ok; ++k) {
            const int r = blocks.rows[k];
            const double val = eqs.C.row(r).dot(x) + eqs.A.row(r).dot(y);
            const double scale = eqs.C.row(r).cwiseAbs().dot(x.cwiseAbs()) + eqs.A.row(r).cwiseAbs().dot(y.cwiseAbs());
            ok = std::abs(val) <= opt.residual_tol * (1.0 + scale);
        }
        if (!ok) {
            ++rejected;
            continue;
        }
        const double w = 1.0 + s.squaredNorm();
        poses.emplace_back(cgr_to_rotation(CgrVector(s)), y / w);
    }
    if (diag) {
        diag->tag = config.tag;
        diag->blocks = blocks;
        diag->quadrics = qdiag;
        diag->rejected = rejected;
    }
    return poses;
}

} // namespace pose3r
