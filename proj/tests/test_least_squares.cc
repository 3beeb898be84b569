#include "pose3r/least_squares.h"
#include "pose3r/cgr.h"
#include "pose3r/synth.h"
#include "test_util.h"

#include <Eigen/Dense>
#include <gtest/gtest.h>

using namespace pose3r;

namespace {

// Kabsch / orthogonal Procrustes, the closed-form point-only optimum.
Pose procrustes(const CorrespondenceSet &c) {
    Vec3 mx = Vec3::Zero(), my = Vec3::Zero();
    for (auto &p : c.points)
        mx += p.x, my += p.y;
    mx /= c.points.size();
    my /= c.points.size();
    Mat3 H = Mat3::Zero();
    for (auto &p : c.points)
        H += (p.y - my) * (p.x - mx).transpose();
    Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 D = Mat3::Identity();
    D(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1 : 1;
    const Mat3 R = svd.matrixU() * D * svd.matrixV().transpose();
    return Pose(R, my - R * mx);
}

void add_noise(CorrespondenceSet &c, std::mt19937_64 &rng, double sigma) {
    std::normal_distribution<double> g(0.0, sigma);
    for (auto &p : c.planes)
        p.x += Vec3(g(rng), g(rng), g(rng));
    for (auto &l : c.lines)
        l.x += Vec3(g(rng), g(rng), g(rng));
    for (auto &p : c.points)
        p.x += Vec3(g(rng), g(rng), g(rng));
}

RationalCost::Vec6 to_x(const Vec3 &s, const Vec3 &t) {
    RationalCost::Vec6 x;
    x << s, t;
    return x;
}

} // namespace

TEST(Stacked, RowCounts) {
    std::mt19937_64 rng(20);
    const CorrespondenceSet c = testutil::planted(rng, testutil::rand_pose(rng), 1, 1, 1);
    const StackedSystem sys = build_stacked(c);
    EXPECT_EQ(sys.A.rows(), 7);
    EXPECT_EQ(sys.A.cols(), 11);
    EXPECT_EQ(sys.B.rows(), 7);
    EXPECT_EQ(sys.B.cols(), 3);
}

TEST(Stacked, MatchesGeneralResiduals) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const CorrespondenceSet c = testutil::planted(rng, testutil::rand_pose(rng), 3, 2, 2);
        const StackedSystem sys = build_stacked(c);
        const Vec3 s = testutil::rand_vec(rng, -3, 3), t = testutil::rand_vec(rng, -10, 10);
        const Pose pose(cgr_to_rotation(CgrVector(s)), t);
        const Eigen::VectorXd r = sys.A * relaxation_monomials(relaxation_point(CgrVector(s))) + sys.B * t;
        const auto rows = to_general_rows(c);
        for (int i = 0; i < sys.rows(); ++i)
            EXPECT_NEAR(r(i), evaluate_row(rows[i], pose), 1e-12 * 100);
    }
    // s = 0 reduces to R = I
    const CorrespondenceSet c = testutil::planted(rng, testutil::rand_pose(rng), 4, 2, 1);
    const StackedSystem sys = build_stacked(c);
    const Vec3 t(1, 2, 3);
    const Eigen::VectorXd r = sys.A * relaxation_monomials(Vec4(1, 0, 0, 0)) + sys.B * t;
    const auto rows = to_general_rows(c);
    for (int i = 0; i < sys.rows(); ++i)
        EXPECT_NEAR(r(i), evaluate_row(rows[i], Pose(Mat3::Identity(), t)), 1e-12 * 100);
}

TEST(Stacked, TranslationDegenerate) {
    // every normal horizontal: t_z unobservable
    CorrespondenceSet c;
    std::mt19937_64 rng(22);
    for (int i = 0; i < 8; ++i) {
        const double a = 0.7 * i;
        c.planes.emplace_back(testutil::rand_vec(rng), Vec3(std::cos(a), std::sin(a), 0), testutil::rand_vec(rng));
    }
    try {
        build_stacked(c);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::kTranslationDegenerate);
    }
    try {
        solve_least_squares(c);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::kTranslationDegenerate);
    }
}

TEST(Elimination, MinimalityAndLeastSquaresOracle) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        CorrespondenceSet c = testutil::planted(rng, testutil::rand_pose(rng), 4, 2, 2);
        add_noise(c, rng, 0.1);
        const StackedSystem sys = build_stacked(c);
        const QuarticCost qc = eliminate_translation(sys);
        EXPECT_LE((qc.Q - qc.Q.transpose()).cwiseAbs().maxCoeff(), 1e-12 * (1 + qc.Q.cwiseAbs().maxCoeff()));
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 11, 11>> es(qc.Q);
        EXPECT_GE(es.eigenvalues()(0), -1e-9 * es.eigenvalues()(10));

        const Vec4 xi = relaxation_point(CgrVector(testutil::rand_vec(rng, -2, 2)));
        const MonomialVector u = relaxation_monomials(xi);
        const double q = u.dot(qc.Q * u);
        for (int k = 0; k < 100; ++k) {
            const Vec3 t = testutil::rand_vec(rng, -20, 20);
            EXPECT_LE(q, (sys.A * u + sys.B * t).squaredNorm() * (1 + 1e-12));
        }
        // dense least squares for t through an SVD solve
        const Eigen::VectorXd rhs = -(sys.A * u);
        const Vec3 tstar = Eigen::MatrixXd(sys.B).jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);
        const double direct = (sys.A * u + sys.B * tstar).squaredNorm();
        EXPECT_NEAR(q, direct, 1e-10 * (1 + direct));
        EXPECT_LE((-qc.translation_map * u - tstar).norm(), 1e-9 * (1 + tstar.norm()));
    }
}

TEST(Stationarity, FiniteDifferencesAndOddness) {
    std::mt19937_64 rng(24);
    CorrespondenceSet c = testutil::planted(rng, testutil::rand_pose(rng), 5, 2, 2);
    add_noise(c, rng, 0.05);
    const QuarticCost qc = eliminate_translation(build_stacked(c));
    const CubicSystem4 sys = stationarity_system(qc);
    std::normal_distribution<double> g;
    for (int k = 0; k < 100; ++k) {
        const Vec4 xi(g(rng), g(rng), g(rng), g(rng));
        const Vec4 grad = sys.evaluate(xi);
        for (int v = 0; v < 4; ++v) {
            const double h = 1e-5;
            Vec4 e = Vec4::Zero();
            e(v) = h;
            const double fd = (qc.evaluate(xi + e) - qc.evaluate(xi - e)) / (2 * h);
            EXPECT_NEAR(grad(v), fd, 1e-6 * (std::abs(fd) + grad.norm() + 1e-3));
        }
        EXPECT_LE((sys.evaluate(-xi) + grad).norm(), 1e-12 * (1 + grad.norm()));
    }
    QuarticCost zero;
    zero.Q.setZero();
    EXPECT_EQ(stationarity_system(zero).max_abs_coeff(), 0.0);
}

TEST(Recover, ExamplesAndSignInvariance) {
    std::mt19937_64 rng(25);
    const Pose truth = testutil::rand_pose(rng, 150);
    const CorrespondenceSet c = testutil::planted(rng, truth, 3, 2, 1);
    const StackedSystem sys = build_stacked(c);
    const auto [s0, t0] = recover_pose(Vec4(1, 0, 0, 0), sys);
    EXPECT_EQ(s0.s.norm(), 0.0);
    (void)t0;

    std::normal_distribution<double> g;
    const QuarticCost qc = eliminate_translation(sys);
    for (int k = 0; k < 20; ++k) {
        const Vec4 xi(g(rng), g(rng), g(rng), g(rng));
        const auto a = recover_pose(xi, qc);
        const auto b = recover_pose(Vec4(-xi), qc);
        EXPECT_EQ(a.first.s, b.first.s);
        EXPECT_EQ(a.second, b.second);
    }
    // the planted pose from its own relaxation point
    const Vec3 s_true = rotation_to_cgr(truth.R).s;
    const auto [s, t] = recover_pose(relaxation_point(CgrVector(s_true)) * 2.5, qc);
    EXPECT_LE((s.s - s_true).norm(), 1e-8 * (1 + s_true.squaredNorm()));
    EXPECT_LE((t - truth.t).norm(), 1e-8 * (1 + truth.t.norm()));

    try {
        recover_pose(Vec4(0, 1, 0, 0), qc);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::kSingularParameterization);
    }
}

TEST(Relaxation, QuarticEqualsExactCost) {
    std::mt19937_64 rng(26);
    for (int trial = 0; trial < 50; ++trial) {
        CorrespondenceSet c = testutil::planted(rng, testutil::rand_pose(rng), 4, 3, 2);
        add_noise(c, rng, 0.2);
        const QuarticCost qc = eliminate_translation(build_stacked(c));
        const Vec3 s = testutil::rand_vec(rng, -2, 2);
        const Vec4 xi = relaxation_point(CgrVector(s));
        const Vec3 t = -qc.translation_map * relaxation_monomials(xi);
        const double exact = cost(c, Pose(cgr_to_rotation(CgrVector(s)), t));
        EXPECT_NEAR(qc.evaluate(xi), exact, 1e-9 * exact);
    }
}

TEST(Rational, MatchesDirectCost) {
    std::mt19937_64 rng(27);
    CorrespondenceSet c = testutil::planted(rng, testutil::rand_pose(rng), 4, 3, 2);
    add_noise(c, rng, 0.2);
    const RationalCost rc = build_rational_cost(c);
    for (int k = 0; k < 100; ++k) {
        const Vec3 s = testutil::rand_vec(rng, -3, 3), t = testutil::rand_vec(rng, -10, 10);
        const double direct = cost(c, Pose(cgr_to_rotation(CgrVector(s)), t));
        EXPECT_NEAR(rc.cost(to_x(s, t)), direct, 1e-9 * (1 + direct));
        EXPECT_GE(rc.cost(to_x(s, t)), 0.0);
    }
}

TEST(Rational, ClearedGradientFiniteDifferences) {
    std::mt19937_64 rng(28);
    CorrespondenceSet c = testutil::planted(rng, testutil::rand_pose(rng), 4, 3, 2);
    add_noise(c, rng, 0.2);
    const RationalCost rc = build_rational_cost(c);
    const double h = 1e-5;
    for (int k = 0; k < 30; ++k) {
        const RationalCost::Vec6 x = to_x(testutil::rand_vec(rng, -1.5, 1.5), testutil::rand_vec(rng, -5, 5));
        const double w = 1 + x.head<3>().squaredNorm();
        RationalCost::Vec6 gfd;
        for (int i = 0; i < 6; ++i) {
            RationalCost::Vec6 e = RationalCost::Vec6::Zero();
            e(i) = h;
            const double d = (rc.numerator(x + e) - rc.numerator(x - e)) / (2 * h);
            gfd(i) = i < 3 ? w * d - 4 * x(i) * rc.numerator(x) : d;
        }
        RationalCost::Mat6 J;
        const RationalCost::Vec6 g = rc.cleared_gradient(x, &J);
        EXPECT_LE((g - gfd).norm(), 1e-6 * (1 + g.norm()));
        // gradient of the exact cost is gbar / w^3 in s
        for (int i = 0; i < 3; ++i) {
            RationalCost::Vec6 e = RationalCost::Vec6::Zero();
            e(i) = h;
            const double d = (rc.cost(x + e) - rc.cost(x - e)) / (2 * h);
            EXPECT_NEAR(d, g(i) / (w * w * w), 1e-6 * (1 + std::abs(d)));
        }
        for (int j = 0; j < 6; ++j) {
            RationalCost::Vec6 e = RationalCost::Vec6::Zero();
            e(j) = h;
            const RationalCost::Vec6 col = (rc.cleared_gradient(x + e) - rc.cleared_gradient(x - e)) / (2 * h);
            EXPECT_LE((col - J.col(j)).norm(), 1e-6 * (1 + J.col(j).norm()));
        }
    }
}

TEST(Newton, FixedPointAndPlanted) {
    std::mt19937_64 rng(29);
    const Pose truth = testutil::rand_pose(rng, 120);
    const CorrespondenceSet c = testutil::planted(rng, truth, 4, 2, 2);
    const RationalCost rc = build_rational_cost(c);
    const CgrVector s = rotation_to_cgr(truth.R);
    const SolutionCandidate at = newton_refine(s, truth.t, rc);
    EXPECT_TRUE(at.converged);
    EXPECT_LE(at.newton_iters, 1);
    EXPECT_LE(pose_distance(at.pose, truth), 1e-10);

    const SolutionCandidate near = newton_refine(CgrVector(s.s + Vec3(1e-3, -2e-3, 1e-3)), truth.t + Vec3(0.01, 0, 0), rc);
    EXPECT_TRUE(near.converged);
    EXPECT_TRUE(near.minimizer);
    EXPECT_LE(near.grad_norm, 1e-10 * (1 + rc.gradient_scale(to_x(rotation_to_cgr(near.pose.R).s, near.pose.t))));
    EXPECT_LE(pose_distance(near.pose, truth), 1e-9);
    EXPECT_GE(near.hessian_min_eig, -1e-9);
}

TEST(LeastSquares, TooFewCorrespondences) {
    std::mt19937_64 rng(30);
    const CorrespondenceSet c = testutil::planted(rng, testutil::rand_pose(rng), 1, 1, 1);
    try {
        solve_least_squares(c);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::kInvalidInput);
    }
}

TEST(LeastSquares, NoiseFreeRecoversTruth) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 40; ++trial) {
        const Pose truth = testutil::rand_pose(rng);
        const int np = trial % 4 + 2, nl = trial % 3, npt = (trial / 3) % 2 + (nl == 0);
        const CorrespondenceSet c = testutil::planted(rng, truth, np, nl, npt);
        if (c.effective_count() < 7)
            continue;
        const LeastSquaresReport rep = solve_least_squares(c);
        const SolutionCandidate &best = rep.best();
        EXPECT_LT(rotation_error_deg(best.pose.R, truth.R), 1e-6) << trial;
        EXPECT_LT(translation_error_rel(best.pose.t, truth.t), 1e-6) << trial;
        for (size_t i = 1; i < rep.candidates.size(); ++i)
            EXPECT_LE(rep.candidates[i - 1].cost, rep.candidates[i].cost);
        for (const auto &cand : rep.candidates) {
            EXPECT_TRUE(cand.converged);
            EXPECT_TRUE(cand.pose.is_valid());
        }
    }
}

TEST(LeastSquares, PointOnlyMatchesProcrustes) {
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 20; ++trial) {
        CorrespondenceSet c = testutil::planted(rng, testutil::rand_pose(rng), 0, 0, 6);
        add_noise(c, rng, 0.3);
        const Pose ref = procrustes(c);
        const LeastSquaresReport rep = solve_least_squares(c);
        EXPECT_LE((rep.best().pose.R - ref.R).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_LE((rep.best().pose.t - ref.t).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(LeastSquares, BestCostNotAboveGroundTruth) {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 30; ++trial) {
        const Pose truth = testutil::rand_pose(rng);
        CorrespondenceSet c = testutil::planted(rng, truth, 6, 2, 1);
        add_noise(c, rng, 0.05);
        const LeastSquaresReport rep = solve_least_squares(c);
        EXPECT_LE(rep.best().cost, cost(c, truth) * (1 + 1e-9));
    }
}

TEST(LeastSquares, PriorSelectionNeverWorse) {
    std::mt19937_64 rng(34);
    for (int trial = 0; trial < 30; ++trial) {
        const Pose truth = testutil::rand_pose(rng);
        CorrespondenceSet c = testutil::planted(rng, truth, 7, 0, 0);
        add_noise(c, rng, 0.2);
        const LeastSquaresReport plain = solve_least_squares(c);
        const LeastSquaresReport guided = solve_least_squares(c, truth);
        EXPECT_LE(rotation_error_deg(guided.best().pose.R, truth.R),
                  rotation_error_deg(plain.best().pose.R, truth.R) + 1e-12);
        EXPECT_LE(guided.best().cost, 1.05 * guided.candidates[0].cost + 1e-10);
        int selected = 0;
        for (const auto &cand : guided.candidates)
            selected += cand.selected;
        EXPECT_EQ(selected, 1);
    }
}

TEST(LeastSquares, RetainedCount) {
    CorrespondenceSet c;
    c.planes.resize(7);
    EXPECT_EQ(retained_minimizer_count(c), 3);
    c.points.resize(1);
    EXPECT_EQ(retained_minimizer_count(c), 2);
}

// Rank-5 Q; the true relaxation point is a triple root of the cubic system and
// every path into it stalls just short of t = 1.
TEST(LeastSquares, MultipleRelaxationRootStillFound) {
    SynthSpec spec;
    spec.effective_n = 8;
    spec.seed = derive_seed(303, 8, 65);
    const SynthProblem sp = generate(spec);
    const QuarticCost qc = eliminate_translation(build_stacked(sp.corrs));
    CubicSolveDiagnostics dg;
    const std::vector<Vec4> roots = solve_cubic_stationarity(stationarity_system(qc), &dg);
    EXPECT_GT(dg.singular_endpoints, 0);
    const Vec4 truth = relaxation_point(rotation_to_cgr(sp.truth.R));
    double nearest = 1e300;
    for (const Vec4 &r : roots)
        nearest = std::min(nearest, (r.normalized() - truth.normalized()).norm());
    EXPECT_LT(nearest, 1e-3);

    const LeastSquaresReport rep = solve_least_squares(sp.corrs);
    EXPECT_LT(rotation_error_deg(rep.best().pose.R, sp.truth.R), 1e-6);
    EXPECT_LT(translation_error_rel(rep.best().pose.t, sp.truth.t), 1e-6);
}
