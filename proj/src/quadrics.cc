#include "pose3r/polynomial.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace pose3r {

using Row10 = Eigen::Matrix<double, 1, 10>;
using Mat4 = Eigen::Matrix4d;

Eigen::Matrix<double, 10, 1> quadric_monomials(const Vec3 &s) {
    Eigen::Matrix<double, 10, 1> x;
    x << s(0) * s(0), s(1) * s(1), s(2) * s(2), s(0) * s(1), s(0) * s(2), s(1) * s(2), s(0), s(1), s(2), 1.0;
    return x;
}

Vec3 evaluate_quadrics(const QuadricTriple &q, const Vec3 &s) { return q.K * quadric_monomials(s); }

namespace {

// f = [s;1]^T M [s;1]
Mat4 to_symmetric(const Row10 &k) {
    Mat4 M;
    M << k(0), 0.5 * k(3), 0.5 * k(4), 0.5 * k(6), //
        0.5 * k(3), k(1), 0.5 * k(5), 0.5 * k(7),   //
        0.5 * k(4), 0.5 * k(5), k(2), 0.5 * k(8),   //
        0.5 * k(6), 0.5 * k(7), 0.5 * k(8), k(9);
    return M;
}

Row10 from_symmetric(const Mat4 &M) {
    Row10 k;
    k << M(0, 0), M(1, 1), M(2, 2), 2.0 * M(0, 1), 2.0 * M(0, 2), 2.0 * M(1, 2), 2.0 * M(0, 3), 2.0 * M(1, 3),
        2.0 * M(2, 3), M(3, 3);
    return k;
}

// Quadrics in coordinates s' where s = T s'.
QuadricTriple change_coordinates(const QuadricTriple &q, const Eigen::Matrix3d &T) {
    Mat4 H = Mat4::Identity();
    H.topLeftCorner<3, 3>() = T;
    QuadricTriple out;
    for (int i = 0; i < 3; ++i)
        out.K.row(i) = from_symmetric(H.transpose() * to_symmetric(q.K.row(i)) * H);
    return out;
}

// Term magnitudes sum_j |k_ij x_j(s)| per row.
Vec3 term_scale(const QuadricTriple &q, const Vec3 &s) {
    return q.K.cwiseAbs() * quadric_monomials(s).cwiseAbs();
}

bool satisfies(const QuadricTriple &q, const Vec3 &s, double tol) {
    if (!s.allFinite())
        return false;
    const Vec3 f = evaluate_quadrics(q, s);
    const Vec3 sc = term_scale(q, s);
    for (int i = 0; i < 3; ++i)
        if (std::abs(f(i)) > tol * sc(i) + 1e-300)
            return false;
    return true;
}

Eigen::Matrix3d quadric_jacobian(const QuadricTriple &q, const Vec3 &s) {
    Eigen::Matrix3d J;
    for (int i = 0; i < 3; ++i) {
        const auto k = q.K.row(i);
        J(i, 0) = 2.0 * k(0) * s(0) + k(3) * s(1) + k(4) * s(2) + k(6);
        J(i, 1) = 2.0 * k(1) * s(1) + k(3) * s(0) + k(5) * s(2) + k(7);
        J(i, 2) = 2.0 * k(2) * s(2) + k(4) * s(0) + k(5) * s(1) + k(8);
    }
    return J;
}

Vec3 newton_polish(const QuadricTriple &q, Vec3 s) {
    double res = evaluate_quadrics(q, s).norm();
    for (int it = 0; it < 4 && res > 0.0; ++it) {
        const Vec3 step = quadric_jacobian(q, s).fullPivLu().solve(evaluate_quadrics(q, s));
        const Vec3 next = s - step;
        const double next_res = evaluate_quadrics(q, next).norm();
        if (!next.allFinite() || !(next_res < res))
            break;
        s = next;
        res = next_res;
    }
    return s;
}

void push_unique(std::vector<Vec3> &sols, const Vec3 &s, double radius) {
    for (const Vec3 &o : sols) {
        const double scale = std::max({1.0, s.cwiseAbs().maxCoeff(), o.cwiseAbs().maxCoeff()});
        if ((o - s).cwiseAbs().maxCoeff() <= radius * scale)
            return;
    }
    sols.push_back(s);
}

// ---- univariate helpers over std::vector<double> (ascending) ----
using PolyVec = std::vector<double>;

PolyVec pmul(const PolyVec &a, const PolyVec &b) {
    PolyVec r(a.size() + b.size() - 1, 0.0);
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < b.size(); ++j)
            r[i + j] += a[i] * b[j];
    return r;
}

PolyVec psub(const PolyVec &a, const PolyVec &b) {
    PolyVec r(std::max(a.size(), b.size()), 0.0);
    for (size_t i = 0; i < a.size(); ++i)
        r[i] += a[i];
    for (size_t i = 0; i < b.size(); ++i)
        r[i] -= b[i];
    return r;
}

double pabsmax(const PolyVec &a) {
    double m = 0.0;
    for (double v : a)
        m = std::max(m, std::abs(v));
    return m;
}

std::vector<double> solve_quadratic(double a, double b, double c) {
    std::vector<double> r;
    const double m = std::max({std::abs(a), std::abs(b), std::abs(c)});
    if (m == 0.0)
        return r;
    if (std::abs(a) <= 1e-14 * m) {
        if (std::abs(b) > 1e-14 * m)
            r.push_back(-c / b);
        return r;
    }
    double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) {
        // Accept a numerically double root.
        if (disc < -1e-10 * (b * b + std::abs(4.0 * a * c)))
            return r;
        disc = 0.0;
    }
    const double sq = std::sqrt(disc);
    const double qq = -0.5 * (b + std::copysign(sq, b));
    if (qq != 0.0) {
        r.push_back(qq / a);
        r.push_back(c / qq);
    } else {
        r.push_back(0.0);
    }
    return r;
}

// Conic c(z) = [z;1]^T M [z;1] in two unknowns.
double eval_conic(const Eigen::Matrix3d &M, const Eigen::Vector2d &z) {
    const Eigen::Vector3d h(z(0), z(1), 1.0);
    return h.dot(M * h);
}

double conic_scale(const Eigen::Matrix3d &M, const Eigen::Vector2d &z) {
    const Eigen::Vector3d h(std::abs(z(0)), std::abs(z(1)), 1.0);
    return h.dot(M.cwiseAbs() * h);
}

// Real intersections of conics, each verified against every conic in `checks`.
std::vector<Eigen::Vector2d> intersect_conics(const Eigen::Matrix3d &M1_in, const Eigen::Matrix3d &M2_in,
                                              const std::vector<Eigen::Matrix3d> &checks) {
    // A fixed rotation of the plane avoids conics without a z2^2 term.
    const double ang = 0.6154797087;
    Eigen::Matrix3d H = Eigen::Matrix3d::Identity();
    H.topLeftCorner<2, 2>() << std::cos(ang), -std::sin(ang), std::sin(ang), std::cos(ang);
    const Eigen::Matrix3d M1 = H.transpose() * M1_in * H;
    const Eigen::Matrix3d M2 = H.transpose() * M2_in * H;

    // As quadratics in z2: A z2^2 + B(z1) z2 + C(z1)
    const double A1 = M1(1, 1), A2 = M2(1, 1);
    const PolyVec B1 = {2.0 * M1(1, 2), 2.0 * M1(0, 1)};
    const PolyVec B2 = {2.0 * M2(1, 2), 2.0 * M2(0, 1)};
    const PolyVec C1 = {M1(2, 2), 2.0 * M1(0, 2), M1(0, 0)};
    const PolyVec C2 = {M2(2, 2), 2.0 * M2(0, 2), M2(0, 0)};
    auto scaled = [](const PolyVec &p, double s) {
        PolyVec r = p;
        for (double &v : r)
            v *= s;
        return r;
    };
    const PolyVec AC = psub(scaled(C2, A1), scaled(C1, A2));
    const PolyVec AB = psub(scaled(B2, A1), scaled(B1, A2));
    const PolyVec BC = psub(pmul(B1, C2), pmul(B2, C1));
    const PolyVec res = psub(pmul(AC, AC), pmul(AB, BC));

    const double ref = std::pow(std::max(M1.cwiseAbs().maxCoeff(), M2.cwiseAbs().maxCoeff()), 4);
    if (!(pabsmax(res) > 1e-12 * ref))
        throw Error(ErrorCode::kDegenerateSystem, "conic pair shares a component");

    std::vector<Eigen::Vector2d> out;
    for (double z1 : real_roots(Poly1(res), 1e-8)) {
        auto at = [z1](const PolyVec &p) {
            double v = 0.0, pw = 1.0;
            for (double c : p) {
                v += c * pw;
                pw *= z1;
            }
            return v;
        };
        std::vector<double> cand = solve_quadratic(A1, at(B1), at(C1));
        for (double z : solve_quadratic(A2, at(B2), at(C2)))
            cand.push_back(z);
        const double den = at(AB);
        if (std::abs(den) > 0.0)
            cand.push_back(-at(AC) / den);
        for (double z2 : cand) {
            Eigen::Vector2d z(z1, z2);
            // 2x2 Newton on the pair
            for (int it = 0; it < 3; ++it) {
                Eigen::Matrix2d J;
                const Eigen::Vector3d h(z(0), z(1), 1.0);
                J.row(0) = 2.0 * (M1 * h).head<2>().transpose();
                J.row(1) = 2.0 * (M2 * h).head<2>().transpose();
                const Eigen::Vector2d f(eval_conic(M1, z), eval_conic(M2, z));
                const Eigen::Vector2d step = J.fullPivLu().solve(f);
                if (!step.allFinite())
                    break;
                const Eigen::Vector2d next = z - step;
                if (std::abs(eval_conic(M1, next)) + std::abs(eval_conic(M2, next)) >= f.cwiseAbs().sum())
                    break;
                z = next;
            }
            const Eigen::Vector2d zin = H.topLeftCorner<2, 2>() * z;
            bool ok = std::abs(eval_conic(M1_in, zin)) <= 1e-8 * conic_scale(M1_in, zin) &&
                      std::abs(eval_conic(M2_in, zin)) <= 1e-8 * conic_scale(M2_in, zin);
            for (const auto &Mc : checks)
                ok = ok && std::abs(eval_conic(Mc, zin)) <= 1e-8 * conic_scale(Mc, zin);
            if (!ok)
                continue;
            bool dup = false;
            for (const auto &o : out)
                dup = dup || (o - zin).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, zin.cwiseAbs().maxCoeff());
            if (!dup)
                out.push_back(zin);
        }
    }
    return out;
}

// Solutions of the quadrics restricted to s = p + N z (N: 3 x dim).
std::vector<Vec3> solve_on_affine_subspace(const std::vector<Mat4> &quadrics, const Vec3 &p, const Eigen::MatrixXd &N) {
    const int dim = static_cast<int>(N.cols());
    std::vector<Vec3> out;
    if (dim >= 3)
        throw Error(ErrorCode::kDegenerateSystem, "fewer than three independent quadric equations");
    if (dim == 0) {
        out.push_back(p);
        return out;
    }
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(4, dim + 1);
    H.topLeftCorner(3, dim) = N;
    H.block(0, dim, 3, 1) = p;
    H(3, dim) = 1.0;
    std::vector<Eigen::MatrixXd> reduced;
    double ref = 0.0;
    for (const Mat4 &M : quadrics) {
        reduced.push_back(H.transpose() * M * H);
        ref = std::max(ref, M.cwiseAbs().maxCoeff());
    }
    std::vector<Eigen::MatrixXd> nontrivial;
    for (const auto &R : reduced)
        if (R.cwiseAbs().maxCoeff() > 1e-12 * std::max(ref, 1e-300))
            nontrivial.push_back(R);
    if (nontrivial.empty())
        throw Error(ErrorCode::kDegenerateSystem, "quadric system vanishes on a positive-dimensional set");

    if (dim == 1) {
        for (double z : solve_quadratic(nontrivial[0](0, 0), 2.0 * nontrivial[0](0, 1), nontrivial[0](1, 1)))
            out.push_back(p + N.col(0) * z);
        return out;
    }
    if (nontrivial.size() < 2)
        throw Error(ErrorCode::kDegenerateSystem, "underdetermined reduced quadric system");
    std::vector<Eigen::Matrix3d> checks;
    for (size_t i = 2; i < nontrivial.size(); ++i)
        checks.push_back(nontrivial[i]);
    for (const auto &z : intersect_conics(nontrivial[0], nontrivial[1], checks))
        out.push_back(p + N * z);
    return out;
}

// Quadratic parts of rank < 3: row-reduce to linear equations and solve on the
// affine subspace they define.
std::vector<Vec3> solve_reduced_rank(const QuadricTriple &q) {
    const Eigen::Matrix<double, 3, 6> Qp = q.K.leftCols<6>();
    Eigen::JacobiSVD<Eigen::Matrix<double, 3, 6>> svd(Qp, Eigen::ComputeFullU);
    const Vec3 sv = svd.singularValues();
    const double smax = std::max(sv(0), 1e-300);
    int rank = 0;
    for (int i = 0; i < 3; ++i)
        rank += sv(i) > 1e-10 * smax ? 1 : 0;
    const Eigen::Matrix3d U = svd.matrixU();
    const Eigen::Matrix<double, 3, 10> Kr = U.transpose() * q.K;

    std::vector<Mat4> quadrics;
    for (int i = 0; i < rank; ++i)
        quadrics.push_back(to_symmetric(Kr.row(i)));
    const int nlin = 3 - rank;
    Eigen::MatrixXd L(nlin, 3);
    Eigen::VectorXd l0(nlin);
    for (int i = 0; i < nlin; ++i) {
        L.row(i) = Kr.row(rank + i).segment<3>(6);
        l0(i) = Kr(rank + i, 9);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> lsvd(L, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd lsv = lsvd.singularValues();
    const double lmax = lsv.size() > 0 ? std::max(lsv(0), 1e-300) : 1e-300;
    int lrank = 0;
    for (int i = 0; i < lsv.size(); ++i)
        lrank += lsv(i) > 1e-10 * lmax ? 1 : 0;
    if (nlin > 0 && lsv.size() > 0 && lsv(0) <= 1e-12 * std::max(1.0, q.K.cwiseAbs().maxCoeff()))
        lrank = 0;
    Vec3 p = Vec3::Zero();
    if (lrank > 0)
        p = lsvd.solve(-l0);
    // Inconsistent linear equations: no solutions.
    if (nlin > 0 && (L * p + l0).norm() > 1e-8 * (1.0 + l0.norm()))
        return {};
    const Eigen::MatrixXd V = lsvd.matrixV();
    const Eigen::MatrixXd N = V.rightCols(3 - lrank);
    // Dropped linear rows that vanished are equivalent to 0 = 0 and carry no constraint.
    return solve_on_affine_subspace(quadrics, p, N);
}

Eigen::Matrix3d permutation_for_hidden(int hidden) {
    // Columns map new coordinates to old: s_old = P s_new, with s_new(2) the hidden one.
    Eigen::Matrix3d P = Eigen::Matrix3d::Zero();
    int order[3];
    if (hidden == 2) {
        order[0] = 0, order[1] = 1, order[2] = 2;
    } else if (hidden == 1) {
        order[0] = 2, order[1] = 0, order[2] = 1;
    } else {
        order[0] = 1, order[1] = 2, order[2] = 0;
    }
    for (int j = 0; j < 3; ++j)
        P(order[j], j) = 1.0;
    return P;
}

Eigen::Matrix3d fixed_rotation() {
    // Arbitrary generic rotation used to break axis-aligned degeneracies.
    const Vec3 axis = Vec3(0.36, -0.48, 0.8).normalized();
    return Eigen::AngleAxisd(0.9273, axis).toRotationMatrix();
}

struct Attempt {
    bool identically_zero = false;
    bool near_degenerate = false;
    Poly1 det;
};

Attempt inspect(const QuadricTriple &q) {
    Attempt a;
    a.det = hidden_variable::determinant_polynomial(q);
    // Hadamard bound at a few nodes decides whether det C(s3) vanishes identically.
    double ratio = 0.0;
    for (double x : {-0.9, -0.3, 0.2, 0.7}) {
        const auto C = hidden_variable::coefficient_matrix(q, x);
        double bound = 1.0;
        for (int r = 0; r < 6; ++r)
            bound *= C.row(r).norm();
        if (bound > 0.0)
            ratio = std::max(ratio, std::abs(a.det(x)) / bound);
    }
    a.identically_zero = !(ratio > 1e-11);
    const double m = a.det.max_abs_coeff();
    const auto &c = a.det.coeffs;
    a.near_degenerate = std::abs(c[8]) < 1e-10 * m && std::abs(c[7]) < 1e-10 * m && std::abs(c[6]) < 1e-10 * m;
    return a;
}

} // namespace

namespace hidden_variable {

namespace {

// Quadratic form of det[col_a, col_b, col_c] where one column is constant and the
// other two are linear in z; `lin1` and `lin2` hold rows (3x3: row i = coefficients of z).
Eigen::Matrix3d det_form(int const_col, const Vec3 &c, const Eigen::Matrix3d &lin1, const Eigen::Matrix3d &lin2) {
    Eigen::Matrix3d S = Eigen::Matrix3d::Zero();
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            Eigen::Matrix3d M;
            const Vec3 u = lin1.col(a), v = lin2.col(b);
            if (const_col == 0) {
                M.col(0) = c, M.col(1) = u, M.col(2) = v;
            } else if (const_col == 1) {
                M.col(0) = u, M.col(1) = c, M.col(2) = v;
            } else {
                M.col(0) = u, M.col(1) = v, M.col(2) = c;
            }
            // z_a z_b coefficient split symmetrically
            const double d = M.determinant();
            S(a, b) += 0.5 * d;
            S(b, a) += 0.5 * d;
        }
    }
    return S;
}

} // namespace

std::array<Eigen::Matrix3d, 3> minor_forms(const QuadricTriple &q, double s3) {
    Vec3 k1, k2, k4, p1, p2, p3;
    for (int i = 0; i < 3; ++i) {
        const auto k = q.K.row(i);
        k1(i) = k(0), k2(i) = k(1), k4(i) = k(3);
        p1(i) = k(4) * s3 + k(6);
        p2(i) = k(5) * s3 + k(7);
        p3(i) = (k(2) * s3 + k(8)) * s3 + k(9);
    }
    // Column coefficient matrices over z = [s0, s1, s2]; row i belongs to F_i.
    auto lin = [](const Vec3 &c0, const Vec3 &c1, const Vec3 &c2) {
        Eigen::Matrix3d L;
        L.col(0) = c0, L.col(1) = c1, L.col(2) = c2;
        return L;
    };
    const Vec3 zero = Vec3::Zero();
    std::array<Eigen::Matrix3d, 3> forms;
    // [s0^2, s1, s2]: p3 | k1 s1 + k4 s2 + p1 s0 | k2 s2 + p2 s0
    forms[0] = det_form(0, p3, lin(p1, k1, k4), lin(p2, zero, k2));
    // [s0, s1^2, s2]: p3 s0 + p1 s1 | k1 | p2 s0 + k4 s1 + k2 s2
    forms[1] = det_form(1, k1, lin(p3, p1, zero), lin(p2, k4, k2));
    // [s0, s1, s2^2]: p3 s0 + p2 s2 | p1 s0 + k1 s1 + k4 s2 | k2
    forms[2] = det_form(2, k2, lin(p3, zero, p2), lin(p1, k1, k4));
    return forms;
}

Mat6 coefficient_matrix(const QuadricTriple &q, double s3) {
    Mat6 C;
    for (int i = 0; i < 3; ++i) {
        const auto k = q.K.row(i);
        const double p1 = k(4) * s3 + k(6);
        const double p2 = k(5) * s3 + k(7);
        const double p3 = (k(2) * s3 + k(8)) * s3 + k(9);
        C.row(i) << p3, k(0), k(1), p1, p2, k(3);
    }
    const auto forms = minor_forms(q, s3);
    for (int f = 0; f < 3; ++f) {
        const Eigen::Matrix3d &S = forms[f];
        C.row(3 + f) << S(0, 0), S(1, 1), S(2, 2), 2.0 * S(0, 1), 2.0 * S(0, 2), 2.0 * S(1, 2);
    }
    return C;
}

Poly1 determinant_polynomial(const QuadricTriple &q) {
    static const auto nodes_and_lu = [] {
        Eigen::Matrix<double, 9, 1> x;
        Eigen::Matrix<double, 9, 9> V;
        for (int k = 0; k < 9; ++k) {
            x(k) = std::cos((2.0 * k + 1.0) * M_PI / 18.0);
            double pw = 1.0;
            for (int j = 0; j < 9; ++j) {
                V(k, j) = pw;
                pw *= x(k);
            }
        }
        return std::make_pair(x, Eigen::PartialPivLU<Eigen::Matrix<double, 9, 9>>(V));
    }();
    Eigen::Matrix<double, 9, 1> d;
    for (int k = 0; k < 9; ++k)
        d(k) = coefficient_matrix(q, nodes_and_lu.first(k)).determinant();
    const Eigen::Matrix<double, 9, 1> c = nodes_and_lu.second.solve(d);
    return Poly1(std::vector<double>(c.data(), c.data() + 9));
}

} // namespace hidden_variable

std::vector<Vec3> solve_three_quadrics(const QuadricTriple &q_in, const QuadricSolveOptions &opt,
                                       QuadricSolveDiagnostics *diag) {
    QuadricSolveDiagnostics local;
    QuadricSolveDiagnostics &dg = diag ? *diag : local;
    dg = QuadricSolveDiagnostics{};

    if (!q_in.K.allFinite())
        throw Error(ErrorCode::kInvalidInput, "non-finite quadric coefficients");

    // Row normalization does not change the solution set.
    QuadricTriple q = q_in;
    for (int i = 0; i < 3; ++i) {
        const double m = q.K.row(i).cwiseAbs().maxCoeff();
        if (m == 0.0)
            throw Error(ErrorCode::kDegenerateSystem, "quadric row is identically zero");
        q.K.row(i) /= m;
    }

    std::vector<Vec3> solutions;
    const double accept_tol = 1e-8;

    Eigen::JacobiSVD<Eigen::Matrix<double, 3, 6>> qsvd(q.K.leftCols<6>());
    const Vec3 qsv = qsvd.singularValues();
    if (qsv(2) <= 1e-10 * qsv(0)) {
        dg.reduced_rank_path = true;
        dg.notes.push_back("quadratic parts are linearly dependent; solved on the affine subspace of the linear combinations");
        for (const Vec3 &s : solve_reduced_rank(q)) {
            const Vec3 polished = newton_polish(q, s);
            if (satisfies(q, polished, accept_tol))
                push_unique(solutions, polished, opt.dedup_radius);
            else
                ++dg.rejected_roots;
        }
        return solutions;
    }

    // Candidate coordinate frames: the requested hidden axis, the other axes, then a rotated frame.
    std::vector<std::pair<Eigen::Matrix3d, int>> frames;
    frames.push_back({permutation_for_hidden(opt.hidden_variable), opt.hidden_variable});
    if (opt.allow_retry) {
        for (int h : {2, 0, 1})
            if (h != opt.hidden_variable)
                frames.push_back({permutation_for_hidden(h), h});
        frames.push_back({fixed_rotation(), -1});
    }

    int chosen = -1;
    Attempt chosen_attempt;
    QuadricTriple chosen_q;
    int fallback = -1;
    Attempt fallback_attempt;
    QuadricTriple fallback_q;
    for (size_t f = 0; f < frames.size(); ++f) {
        QuadricTriple qf = change_coordinates(q, frames[f].first);
        Attempt a = inspect(qf);
        if (a.identically_zero) {
            dg.notes.push_back("det C(s3) vanishes identically in frame " + std::to_string(f));
            continue;
        }
        if (!a.near_degenerate) {
            chosen = static_cast<int>(f);
            chosen_attempt = std::move(a);
            chosen_q = qf;
            break;
        }
        dg.notes.push_back("leading determinant coefficients near zero in frame " + std::to_string(f));
        if (fallback < 0) {
            fallback = static_cast<int>(f);
            fallback_attempt = std::move(a);
            fallback_q = qf;
        }
    }
    if (chosen < 0) {
        if (fallback < 0)
            throw Error(ErrorCode::kDegenerateSystem, "hidden-variable determinant vanishes identically; solution set is not finite");
        chosen = fallback;
        chosen_attempt = std::move(fallback_attempt);
        chosen_q = fallback_q;
    }
    const Eigen::Matrix3d T = frames[chosen].first;
    dg.hidden_variable_used = frames[chosen].second;
    dg.rotated_coordinates = frames[chosen].second < 0;
    dg.determinant = chosen_attempt.det;

    std::vector<double> roots;
    try {
        roots = real_roots(chosen_attempt.det, 1e-8);
    } catch (const Error &) {
        throw Error(ErrorCode::kDegenerateSystem, "hidden-variable determinant has no nonzero coefficients");
    }
    dg.real_roots = static_cast<int>(roots.size());

    for (double s3 : roots) {
        hidden_variable::Mat6 C = hidden_variable::coefficient_matrix(chosen_q, s3);
        for (int r = 0; r < 6; ++r) {
            const double n = C.row(r).norm();
            if (n > 0.0)
                C.row(r) /= n;
        }
        Eigen::JacobiSVD<hidden_variable::Mat6> svd(C, Eigen::ComputeFullV);
        const auto sv = svd.singularValues();
        std::vector<Vec3> local_sols;
        if (!(sv(5) <= opt.null_space_ratio * sv(0))) {
            ++dg.rejected_roots;
            continue;
        }
        if (sv(4) <= opt.null_space_ratio * sv(0)) {
            // Several solutions share this hidden value; intersect the conics at fixed s3 instead.
            ++dg.ambiguous_roots;
            dg.notes.push_back("null space dimension > 1 at s3 = " + std::to_string(s3));
            std::vector<Mat4> quadrics;
            for (int i = 0; i < 3; ++i)
                quadrics.push_back(to_symmetric(chosen_q.K.row(i)));
            Eigen::MatrixXd N = Eigen::MatrixXd::Zero(3, 2);
            N(0, 0) = 1.0, N(1, 1) = 1.0;
            try {
                local_sols = solve_on_affine_subspace(quadrics, Vec3(0.0, 0.0, s3), N);
            } catch (const Error &) {
                continue;
            }
        } else {
            const Eigen::Matrix<double, 6, 1> h = svd.matrixV().col(5);
            if (std::abs(h(0)) <= 1e-10 * h.norm()) {
                ++dg.rejected_roots; // solution at infinity
                continue;
            }
            local_sols.push_back(Vec3(h(3) / h(0), h(4) / h(0), s3));
        }
        for (const Vec3 &sf : local_sols) {
            const Vec3 s = newton_polish(q, T * sf);
            if (satisfies(q, s, accept_tol))
                push_unique(solutions, s, opt.dedup_radius);
            else
                ++dg.rejected_roots;
        }
    }
    return solutions;
}

} // namespace pose3r
