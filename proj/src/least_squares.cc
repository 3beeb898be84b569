#include "pose3r/least_squares.h"

#include "pose3r/geometry.h"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

namespace pose3r {

namespace {

using Exp4 = std::array<int, 4>; // exponents over (rho, alpha, beta, gamma)

const std::array<Exp4, 11> &u_exponents() {
    static const std::array<Exp4, 11> e = {{
        {0, 2, 0, 0}, // a^2
        {0, 1, 1, 0}, // ab
        {0, 1, 0, 1}, // ag
        {1, 1, 0, 0}, // ar
        {0, 0, 2, 0}, // b^2
        {0, 0, 1, 1}, // bg
        {1, 0, 1, 0}, // br
        {0, 0, 0, 2}, // g^2
        {1, 0, 0, 1}, // gr
        {2, 0, 0, 0}, // r^2
        {0, 0, 0, 0}, // 1
    }};
    return e;
}

// Unnormalized quaternion rotation: entry (j, k) as coefficients over u[0..9].
using RotBasis = std::array<std::array<Eigen::Matrix<double, 10, 1>, 3>, 3>;

const RotBasis &rotation_basis() {
    static const RotBasis basis = [] {
        RotBasis b;
        for (auto &row : b)
            for (auto &e : row)
                e.setZero();
        // R11 = r^2 + a^2 - b^2 - g^2
        b[0][0](9) = 1, b[0][0](0) = 1, b[0][0](4) = -1, b[0][0](7) = -1;
        b[0][1](1) = 2, b[0][1](8) = -2; // 2(ab - rg)
        b[0][2](2) = 2, b[0][2](6) = 2;  // 2(ag + rb)
        b[1][0](1) = 2, b[1][0](8) = 2;  // 2(ab + rg)
        b[1][1](9) = 1, b[1][1](0) = -1, b[1][1](4) = 1, b[1][1](7) = -1;
        b[1][2](5) = 2, b[1][2](3) = -2; // 2(bg - ra)
        b[2][0](2) = 2, b[2][0](6) = -2; // 2(ag - rb)
        b[2][1](5) = 2, b[2][1](3) = 2;  // 2(bg + ra)
        b[2][2](9) = 1, b[2][2](0) = -1, b[2][2](4) = -1, b[2][2](7) = 1;
        return b;
    }();
    return basis;
}

// d(u_i u_j)/d xi_v = factor * monomial[column]
struct GradTerm {
    int i, j, v, factor, column;
};

const std::vector<GradTerm> &gradient_terms() {
    static const std::vector<GradTerm> terms = [] {
        std::map<Exp4, int> column;
        const auto &ce = cubic_system_exponents();
        for (int m = 0; m < CubicSystem4::kNumMonomials; ++m)
            column[ce[m]] = m;
        const auto &ue = u_exponents();
        std::vector<GradTerm> out;
        for (int i = 0; i < 11; ++i)
            for (int j = 0; j < 11; ++j)
                for (int v = 0; v < 4; ++v) {
                    Exp4 e;
                    for (int k = 0; k < 4; ++k)
                        e[k] = ue[i][k] + ue[j][k];
                    if (e[v] == 0)
                        continue;
                    const int f = e[v];
                    e[v] -= 1;
                    out.push_back({i, j, v, f, column.at(e)});
                }
        return out;
    }();
    return terms;
}

// v = [s1^2 t, s1^2, s1 s2, s1 s3, s1, s2^2 t, s2^2, s2 s3, s2, s3^2 t, s3^2, s3, t, 1]
using Exp6 = std::array<int, 6>;

const std::array<Exp6, RationalCost::kNumMonomials> &v_exponents() {
    static const std::array<Exp6, RationalCost::kNumMonomials> e = {{
        {2, 0, 0, 1, 0, 0}, {2, 0, 0, 0, 1, 0}, {2, 0, 0, 0, 0, 1}, {2, 0, 0, 0, 0, 0},
        {1, 1, 0, 0, 0, 0}, {1, 0, 1, 0, 0, 0}, {1, 0, 0, 0, 0, 0}, //
        {0, 2, 0, 1, 0, 0}, {0, 2, 0, 0, 1, 0}, {0, 2, 0, 0, 0, 1}, {0, 2, 0, 0, 0, 0},
        {0, 1, 1, 0, 0, 0}, {0, 1, 0, 0, 0, 0}, //
        {0, 0, 2, 1, 0, 0}, {0, 0, 2, 0, 1, 0}, {0, 0, 2, 0, 0, 1}, {0, 0, 2, 0, 0, 0},
        {0, 0, 1, 0, 0, 0}, //
        {0, 0, 0, 1, 0, 0}, {0, 0, 0, 0, 1, 0}, {0, 0, 0, 0, 0, 1}, {0, 0, 0, 0, 0, 0},
    }};
    return e;
}

constexpr int kSqT[3] = {0, 7, 13};
constexpr int kSq[3] = {3, 10, 16};
constexpr int kLin[3] = {6, 12, 17};

double ipow(double x, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i)
        r *= x;
    return r;
}

using Vec6 = RationalCost::Vec6;
using Mat6 = RationalCost::Mat6;
using VecV = RationalCost::VecV;
using JacV = Eigen::Matrix<double, RationalCost::kNumMonomials, 6>;

// Values, Jacobian and (optionally) per-monomial Hessians of v(x).
void v_derivatives(const Vec6 &x, VecV &v, JacV *J, std::array<Mat6, RationalCost::kNumMonomials> *H) {
    const auto &ex = v_exponents();
    for (int m = 0; m < RationalCost::kNumMonomials; ++m) {
        const Exp6 &e = ex[m];
        double val = 1.0;
        for (int k = 0; k < 6; ++k)
            val *= ipow(x(k), e[k]);
        v(m) = val;
        if (J) {
            for (int a = 0; a < 6; ++a) {
                if (e[a] == 0) {
                    (*J)(m, a) = 0.0;
                    continue;
                }
                double d = e[a];
                for (int k = 0; k < 6; ++k)
                    d *= ipow(x(k), k == a ? e[k] - 1 : e[k]);
                (*J)(m, a) = d;
            }
        }
        if (H) {
            Mat6 &h = (*H)[m];
            for (int a = 0; a < 6; ++a)
                for (int b = 0; b < 6; ++b) {
                    Exp6 d = e;
                    double f = d[a];
                    d[a] -= (f > 0) ? 1 : 0;
                    f *= d[b];
                    d[b] -= (d[b] > 0) ? 1 : 0;
                    if (f == 0.0) {
                        h(a, b) = 0.0;
                        continue;
                    }
                    for (int k = 0; k < 6; ++k)
                        f *= ipow(x(k), d[k]);
                    h(a, b) = f;
                }
        }
    }
}

Vec6 pack(const CgrVector &s, const Vec3 &t) {
    Vec6 x;
    x << s.s, t;
    return x;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

MonomialVector relaxation_monomials(const Vec4 &xi) {
    const double r = xi(0), a = xi(1), b = xi(2), g = xi(3);
    MonomialVector u;
    u << a * a, a * b, a * g, a * r, b * b, b * g, b * r, g * g, g * r, r * r, 1.0;
    return u;
}

Vec4 relaxation_point(const CgrVector &s) {
    const double rho = 1.0 / std::sqrt(1.0 + s.s.squaredNorm());
    Vec4 xi;
    xi << rho, rho * s.s;
    return xi;
}

StackedSystem build_stacked(const CorrespondenceSet &corrs) {
    const std::vector<GeneralResidual> rows = to_general_rows(corrs);
    StackedSystem sys;
    const int n = static_cast<int>(rows.size());
    sys.A.setZero(n, 11);
    sys.B.setZero(n, 3);
    const RotBasis &basis = rotation_basis();
    for (int i = 0; i < n; ++i) {
        const GeneralResidual &r = rows[i];
        Eigen::Matrix<double, 10, 1> coeff = Eigen::Matrix<double, 10, 1>::Zero();
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) {
                const double w = r.a(j) * r.b(k);
                if (w != 0.0)
                    coeff += w * basis[j][k];
            }
        sys.A.row(i).head<10>() = coeff.transpose();
        sys.A(i, 10) = r.c;
        sys.B.row(i) = r.a.transpose();
    }
    if (n < 3)
        throw Error(ErrorCode::kTranslationDegenerate, "fewer than 3 residual rows constrain t");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.B);
    const Vec3 sv = svd.singularValues();
    if (!(sv(2) > 0.0) || sv(0) / sv(2) > 1e6)
        throw Error(ErrorCode::kTranslationDegenerate, "translation is not observable (rank(B) < 3)");
    return sys;
}

QuarticCost eliminate_translation(const StackedSystem &sys) {
    const Eigen::Matrix3d BtB = sys.B.transpose() * sys.B;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(BtB);
    const Vec3 ev = es.eigenvalues();
    if (!(ev(0) > 0.0) || ev(2) / ev(0) > 1e12)
        throw Error(ErrorCode::kTranslationDegenerate, "B^T B is ill-conditioned");

    QuarticCost qc;
    // Least-squares t for every column of A at once; QR avoids squaring the condition number.
    qc.translation_map = sys.B.colPivHouseholderQr().solve(sys.A);
    qc.C = sys.A - sys.B * qc.translation_map;
    Eigen::Matrix<double, 11, 11> Q = qc.C.transpose() * qc.C;
    qc.Q = 0.5 * (Q + Q.transpose());
    return qc;
}

CubicSystem4 stationarity_system(const QuarticCost &qc) {
    CubicSystem4 sys;
    for (const GradTerm &g : gradient_terms())
        sys.coeffs(g.v, g.column) += qc.Q(g.i, g.j) * g.factor;
    return sys;
}

std::pair<CgrVector, Vec3> recover_pose(const Vec4 &xi_in, const QuarticCost &qc) {
    const double n = xi_in.norm();
    if (!(n > 0.0) || !std::isfinite(n))
        throw Error(ErrorCode::kSingularParameterization, "zero relaxation root");
    const Vec4 xi = xi_in / n;
    if (std::abs(xi(0)) <= 1e-9)
        throw Error(ErrorCode::kSingularParameterization, "relaxation root with rho ~ 0 (rotation near 180 degrees)");
    // Make the result independent of the sign of xi.
    const Vec4 canon = xi(0) < 0.0 ? Vec4(-xi) : xi;
    CgrVector s(canon.tail<3>() / canon(0));
    const Vec3 t = -qc.translation_map * relaxation_monomials(canon);
    return {s, t};
}

std::pair<CgrVector, Vec3> recover_pose(const Vec4 &xi, const StackedSystem &sys) {
    return recover_pose(xi, eliminate_translation(sys));
}

RationalCost::VecV RationalCost::row_coefficients(const GeneralResidual &row) {
    const Vec3 &a = row.a, &b = row.b;
    const double ab = a.dot(b);
    const Vec3 w = b.cross(a);
    VecV k = VecV::Zero();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j)
            k(kSqT[i] + j) = a(j);
        k(kSq[i]) = -ab + 2.0 * a(i) * b(i) + row.c;
        k(kLin[i]) = 2.0 * w(i);
    }
    k(4) = 2.0 * (a(0) * b(1) + a(1) * b(0));
    k(5) = 2.0 * (a(0) * b(2) + a(2) * b(0));
    k(11) = 2.0 * (a(1) * b(2) + a(2) * b(1));
    for (int j = 0; j < 3; ++j)
        k(18 + j) = a(j);
    k(21) = ab + row.c;
    return k;
}

RationalCost::VecV RationalCost::monomials(const Vec6 &x) {
    VecV v;
    v_derivatives(x, v, nullptr, nullptr);
    return v;
}

double RationalCost::numerator(const Vec6 &x) const {
    const VecV v = monomials(x);
    return std::max(0.0, v.dot(M * v));
}

double RationalCost::cost(const Vec6 &x) const {
    const double w = 1.0 + x.head<3>().squaredNorm();
    return numerator(x) / (w * w);
}

double RationalCost::cost_magnitude(const Vec6 &x) const {
    const VecV v = monomials(x).cwiseAbs();
    const double w = 1.0 + x.head<3>().squaredNorm();
    return v.dot(M.cwiseAbs() * v) / (w * w);
}

void RationalCost::numerator_derivatives(const Vec6 &x, double &value, Vec6 &grad, Mat6 &hess) const {
    VecV v;
    JacV J;
    std::array<Mat6, kNumMonomials> H;
    v_derivatives(x, v, &J, &H);
    const VecV Mv = M * v;
    value = v.dot(Mv);
    grad = 2.0 * J.transpose() * Mv;
    hess = 2.0 * J.transpose() * M * J;
    for (int m = 0; m < kNumMonomials; ++m)
        if (Mv(m) != 0.0)
            hess += 2.0 * Mv(m) * H[m];
}

RationalCost::Vec6 RationalCost::cleared_gradient(const Vec6 &x, Mat6 *jacobian) const {
    double c;
    Vec6 g;
    Mat6 h;
    numerator_derivatives(x, c, g, h);
    const Vec3 s = x.head<3>();
    const double w = 1.0 + s.squaredNorm();
    Vec6 out;
    out.head<3>() = w * g.head<3>() - 4.0 * c * s;
    out.tail<3>() = g.tail<3>();
    if (jacobian) {
        Mat6 &Jg = *jacobian;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 6; ++j) {
                double d = w * h(i, j) - 4.0 * s(i) * g(j);
                if (j < 3) {
                    d += 2.0 * s(j) * g(i);
                    if (i == j)
                        d -= 4.0 * c;
                }
                Jg(i, j) = d;
            }
        Jg.bottomRows<3>() = h.bottomRows<3>();
    }
    return out;
}

double RationalCost::gradient_scale(const Vec6 &x) const {
    VecV v;
    JacV J;
    v_derivatives(x, v, &J, nullptr);
    const VecV aMv = M.cwiseAbs() * v.cwiseAbs();
    const Vec3 s = x.head<3>();
    const double w = 1.0 + s.squaredNorm();
    const double gterm = 2.0 * (J.cwiseAbs().transpose() * aMv).maxCoeff();
    const double cterm = v.cwiseAbs().dot(aMv);
    return w * gterm + 4.0 * s.cwiseAbs().maxCoeff() * cterm;
}

RationalCost::Mat6 RationalCost::cost_hessian(const Vec6 &x) const {
    double c;
    Vec6 g;
    Mat6 h;
    numerator_derivatives(x, c, g, h);
    const Vec3 s = x.head<3>();
    const double w = 1.0 + s.squaredNorm();
    // f = w^-2, df = -2 w^-3 dw, d2f = 6 w^-4 dw dw^T - 2 w^-3 d2w
    Vec6 dw = Vec6::Zero();
    dw.head<3>() = 2.0 * s;
    Mat6 d2w = Mat6::Zero();
    d2w.topLeftCorner<3, 3>() = 2.0 * Eigen::Matrix3d::Identity();
    const double w2 = w * w, w3 = w2 * w, w4 = w3 * w;
    const Vec6 df = -2.0 / w3 * dw;
    const Mat6 d2f = 6.0 / w4 * dw * dw.transpose() - 2.0 / w3 * d2w;
    return h / w2 + g * df.transpose() + df * g.transpose() + c * d2f;
}

RationalCost build_rational_cost(const CorrespondenceSet &corrs) {
    RationalCost rc;
    for (const GeneralResidual &row : to_general_rows(corrs)) {
        const RationalCost::VecV k = RationalCost::row_coefficients(row);
        rc.M.noalias() += k * k.transpose();
    }
    return rc;
}

SolutionCandidate newton_refine(const CgrVector &s0, const Vec3 &t0, const RationalCost &rc, const NewtonOptions &opt) {
    const Vec6 x0 = pack(s0, t0);
    Vec6 x = x0;
    SolutionCandidate cand;
    std::vector<double> history{rc.cost(x)};
    // cost comparisons tolerate rounding in v^T M v
    auto slack = [&](const Vec6 &p, double c) { return 1e-12 * (1.0 + c) + 1e-14 * rc.cost_magnitude(p); };
    std::vector<double> history_slack{slack(x, history.front())};

    auto converged_at = [&](const Vec6 &p, const Vec6 &g) {
        return g.lpNorm<Eigen::Infinity>() <= opt.rel_tol * (1.0 + rc.gradient_scale(p));
    };

    Mat6 J;
    Vec6 g = rc.cleared_gradient(x, &J);
    bool failed = false;
    int it = 0;
    double c = history.front();
    while (!converged_at(x, g) && it < opt.max_iters) {
        // Newton step on the cleared conditions, kept when the cost does not go up.
        Vec6 xn = x;
        bool took = false;
        Eigen::FullPivLU<Mat6> lu(J);
        if (lu.isInvertible()) {
            xn = x - lu.solve(g);
            took = xn.allFinite() && rc.cost(xn) <= c + slack(x, c);
        }
        if (!took) {
            // damped step on the exact cost instead
            const double w = 1.0 + x.head<3>().squaredNorm();
            Vec6 grad;
            grad << g.head<3>() / (w * w * w), g.tail<3>() / (w * w);
            const Mat6 H = rc.cost_hessian(x);
            double lambda = 1e-6 * (1.0 + H.diagonal().cwiseAbs().maxCoeff());
            for (int k = 0; k < 60 && !took; ++k, lambda *= 10.0) {
                const Vec6 d = (H + lambda * Mat6::Identity()).ldlt().solve(-grad);
                xn = x + d;
                took = xn.allFinite() && rc.cost(xn) <= c;
            }
        }
        if (!took) {
            failed = true;
            break;
        }
        x = xn;
        ++it;
        if (x.head<3>().norm() > 1e8) {
            failed = true;
            break;
        }
        g = rc.cleared_gradient(x, &J);
        c = rc.cost(x);
        history.push_back(c);
        history_slack.push_back(slack(x, c));
    }

    bool converged = !failed && converged_at(x, g);
    if (converged) {
        // One more step often gains the last digits; keep it only when it helps.
        Eigen::FullPivLU<Mat6> lu(J);
        if (lu.isInvertible()) {
            const Vec6 xn = x - lu.solve(g);
            Mat6 Jn;
            const Vec6 gn = rc.cleared_gradient(xn, &Jn);
            if (xn.allFinite() && gn.lpNorm<Eigen::Infinity>() < g.lpNorm<Eigen::Infinity>()) {
                x = xn;
                g = gn;
                ++it;
                history.push_back(rc.cost(x));
                history_slack.push_back(slack(x, history.back()));
            }
        }
    }

    if (failed) {
        x = x0;
        g = rc.cleared_gradient(x);
        converged = false;
    }

    cand.pose = Pose(cgr_to_rotation(CgrVector(x.head<3>())), x.tail<3>());
    cand.cost = rc.cost(x);
    cand.grad_norm = g.lpNorm<Eigen::Infinity>();
    cand.converged = converged;
    cand.newton_iters = it;

    // Cost over the last 3 iterations must not increase (small slack for rounding).
    bool monotone = true;
    const int hn = static_cast<int>(history.size());
    for (int k = std::max(1, hn - 3); k < hn; ++k)
        if (history[k] > history[k - 1] + history_slack[k - 1])
            monotone = false;
    cand.minimizer = converged && monotone && cand.cost <= history.front() + history_slack.front();

    Eigen::SelfAdjointEigenSolver<Mat6> es(rc.cost_hessian(x), Eigen::EigenvaluesOnly);
    cand.hessian_min_eig = es.eigenvalues()(0);
    return cand;
}

double pose_distance(const Pose &a, const Pose &b) {
    const double ang = rotation_error_deg(a.R, b.R) * M_PI / 180.0;
    return ang + (a.t - b.t).norm() / std::max(1.0, b.t.norm());
}

int retained_minimizer_count(const CorrespondenceSet &corrs) {
    return (corrs.lines.empty() && corrs.points.empty()) ? 3 : 2;
}

LeastSquaresReport solve_least_squares(const CorrespondenceSet &corrs, const std::optional<Pose> &prior,
                                       const LeastSquaresOptions &opt) {
    const int N = corrs.effective_count();
    if (N < 7)
        throw Error(ErrorCode::kInvalidInput,
                    "least squares needs N >= 7 effective correspondences (got " + std::to_string(N) +
                        "); use solve-minimal for N = 6");

    LeastSquaresReport rep;
    auto t0 = std::chrono::steady_clock::now();
    const StackedSystem sys = build_stacked(corrs);
    const QuarticCost qc = eliminate_translation(sys);
    const CubicSystem4 cubic = stationarity_system(qc);
    const RationalCost rc = build_rational_cost(corrs);
    rep.time_build_ms = elapsed_ms(t0);

    t0 = std::chrono::steady_clock::now();
    const std::vector<Vec4> roots = solve_cubic_stationarity(cubic, &rep.cubic);
    rep.relaxation_roots = static_cast<int>(roots.size());
    rep.time_relaxation_ms = elapsed_ms(t0);

    t0 = std::chrono::steady_clock::now();
    std::vector<SolutionCandidate> found;
    for (const Vec4 &xi : roots) {
        std::pair<CgrVector, Vec3> st;
        try {
            st = recover_pose(xi, qc);
        } catch (const Error &) {
            ++rep.dropped_roots;
            continue;
        }
        SolutionCandidate c = newton_refine(st.first, st.second, rc, opt.newton);
        if (!c.converged || !c.minimizer) {
            ++rep.dropped_roots;
            continue;
        }
        c.cost = cost(corrs, c.pose);
        found.push_back(c);
    }

    std::sort(found.begin(), found.end(), [](const SolutionCandidate &a, const SolutionCandidate &b) {
        if (a.cost != b.cost)
            return a.cost < b.cost;
        for (int i = 0; i < 9; ++i)
            if (a.pose.R(i) != b.pose.R(i))
                return a.pose.R(i) < b.pose.R(i);
        for (int i = 0; i < 3; ++i)
            if (a.pose.t(i) != b.pose.t(i))
                return a.pose.t(i) < b.pose.t(i);
        return false;
    });
    for (const SolutionCandidate &c : found) {
        bool dup = false;
        for (const SolutionCandidate &k : rep.candidates) {
            const double dc = std::abs(c.cost - k.cost);
            if (dc <= 1e-8 * std::max(c.cost, k.cost) + 1e-12 && pose_distance(c.pose, k.pose) < 1e-6) {
                dup = true;
                break;
            }
        }
        if (!dup)
            rep.candidates.push_back(c);
    }
    rep.time_refine_ms = elapsed_ms(t0);

    if (rep.candidates.empty())
        throw Error(ErrorCode::kNoSolution, "no converged local minimizer after refinement");

    rep.selected = 0;
    if (prior) {
        const double limit = opt.prior_cost_factor * rep.candidates[0].cost + opt.prior_cost_slack;
        double best_d = pose_distance(rep.candidates[0].pose, *prior);
        for (int i = 1; i < static_cast<int>(rep.candidates.size()); ++i) {
            if (rep.candidates[i].cost > limit)
                break;
            const double d = pose_distance(rep.candidates[i].pose, *prior);
            if (d < best_d) {
                best_d = d;
                rep.selected = i;
            }
        }
    }
    rep.candidates[rep.selected].selected = true;
    return rep;
}

} // namespace pose3r
