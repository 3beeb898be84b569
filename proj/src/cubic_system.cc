#include "pose3r/polynomial.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>

namespace pose3r {

namespace {

using Exponents = std::array<std::array<int, 4>, CubicSystem4::kNumMonomials>;

Exponents make_exponents() {
    Exponents e{};
    int m = 0;
    // Cubic monomials in graded-lex order over (rho, alpha, beta, gamma).
    for (int a = 3; a >= 0; --a)
        for (int b = 3 - a; b >= 0; --b)
            for (int c = 3 - a - b; c >= 0; --c)
                e[m++] = {a, b, c, 3 - a - b - c};
    for (int v = 0; v < 4; ++v) {
        e[m] = {0, 0, 0, 0};
        e[m++][v] = 1;
    }
    return e;
}

// d/dx_v of monomial m = factor * monomial target (target = -1: derivative is zero).
struct DerivTable {
    std::array<std::array<int, 4>, CubicSystem4::kNumMonomials> factor{};
    std::array<std::array<int, 4>, CubicSystem4::kNumMonomials> target{};
};

// Monomials of degree 2 and 0 appearing as derivatives, indexed 0..9 (quadratic) and 10 (constant).
int quadratic_index(const std::array<int, 4> &e) {
    int deg = e[0] + e[1] + e[2] + e[3];
    if (deg == 0)
        return 10;
    int idx = 0;
    for (int a = 2; a >= 0; --a)
        for (int b = 2 - a; b >= 0; --b)
            for (int c = 2 - a - b; c >= 0; --c) {
                if (e[0] == a && e[1] == b && e[2] == c)
                    return idx;
                ++idx;
            }
    return -1;
}

const DerivTable &deriv_table() {
    static const DerivTable table = [] {
        DerivTable t;
        const Exponents &e = cubic_system_exponents();
        for (int m = 0; m < CubicSystem4::kNumMonomials; ++m)
            for (int v = 0; v < 4; ++v) {
                if (e[m][v] == 0) {
                    t.factor[m][v] = 0;
                    t.target[m][v] = -1;
                    continue;
                }
                std::array<int, 4> d = e[m];
                t.factor[m][v] = d[v];
                d[v] -= 1;
                t.target[m][v] = quadratic_index(d);
            }
        return t;
    }();
    return table;
}

template <typename T>
void monomial_values(const Eigen::Matrix<T, 4, 1> &x, Eigen::Matrix<T, CubicSystem4::kNumMonomials, 1> &mono,
                     Eigen::Matrix<T, 11, 1> &quad) {
    const Exponents &e = cubic_system_exponents();
    T pw[4][4];
    for (int v = 0; v < 4; ++v) {
        pw[v][0] = T(1);
        for (int k = 1; k < 4; ++k)
            pw[v][k] = pw[v][k - 1] * x(v);
    }
    for (int m = 0; m < CubicSystem4::kNumMonomials; ++m)
        mono(m) = pw[0][e[m][0]] * pw[1][e[m][1]] * pw[2][e[m][2]] * pw[3][e[m][3]];
    int idx = 0;
    for (int a = 2; a >= 0; --a)
        for (int b = 2 - a; b >= 0; --b)
            for (int c = 2 - a - b; c >= 0; --c)
                quad(idx++) = pw[0][a] * pw[1][b] * pw[2][c] * pw[3][2 - a - b - c];
    quad(10) = T(1);
}

template <typename T>
void eval_system(const Eigen::Matrix<double, 4, CubicSystem4::kNumMonomials> &C, const Eigen::Matrix<T, 4, 1> &x,
                 Eigen::Matrix<T, 4, 1> &g, Eigen::Matrix<T, 4, 4> &J) {
    Eigen::Matrix<T, CubicSystem4::kNumMonomials, 1> mono;
    Eigen::Matrix<T, 11, 1> quad;
    monomial_values(x, mono, quad);
    const DerivTable &dt = deriv_table();
    g.setZero();
    J.setZero();
    for (int m = 0; m < CubicSystem4::kNumMonomials; ++m) {
        for (int i = 0; i < 4; ++i)
            g(i) += C(i, m) * mono(m);
        for (int v = 0; v < 4; ++v) {
            const int tgt = dt.target[m][v];
            if (tgt < 0)
                continue;
            const T d = double(dt.factor[m][v]) * quad(tgt);
            for (int i = 0; i < 4; ++i)
                J(i, v) += C(i, m) * d;
        }
    }
}

using C4 = Eigen::Matrix<std::complex<double>, 4, 1>;
using C44 = Eigen::Matrix<std::complex<double>, 4, 4>;

// H(x, t) = (1 - t) gamma G0(x) + t G(x), G0_i = x_i^3 - x_i.
class Homotopy {
  public:
    Homotopy(const Eigen::Matrix<double, 4, CubicSystem4::kNumMonomials> &C, std::complex<double> gamma)
        : C_(C), gamma_(gamma) {}

    void eval(const C4 &x, double t, C4 &H, C44 &Hx, C4 &Ht) const {
        C4 g;
        C44 Jg;
        eval_system(C_, x, g, Jg);
        C4 g0;
        C44 J0 = C44::Zero();
        for (int i = 0; i < 4; ++i) {
            g0(i) = x(i) * x(i) * x(i) - x(i);
            J0(i, i) = 3.0 * x(i) * x(i) - 1.0;
        }
        H = (1.0 - t) * gamma_ * g0 + t * g;
        Hx = (1.0 - t) * gamma_ * J0 + t * Jg;
        Ht = g - gamma_ * g0;
    }

    // dx/dt along the path
    bool tangent(const C4 &x, double t, C4 &dx) const {
        C4 H, Ht;
        C44 Hx;
        eval(x, t, H, Hx, Ht);
        Eigen::PartialPivLU<C44> lu(Hx);
        dx = lu.solve(-Ht);
        return dx.allFinite();
    }

  private:
    const Eigen::Matrix<double, 4, CubicSystem4::kNumMonomials> &C_;
    std::complex<double> gamma_;
};

enum class PathStatus { kSuccess, kFailed, kDiverged };

struct PathEnd {
    PathStatus status = PathStatus::kFailed;
    C4 x;
    double t = 0.0;
};

PathEnd track(const Homotopy &h, const C4 &start) {
    constexpr double kDivergence = 1e7;
    constexpr double kMinStep = 1e-14;
    constexpr int kMaxSteps = 4000;

    PathEnd end;
    C4 x = start;
    double t = 0.0;
    double dt = 0.02;
    int streak = 0;
    for (int step = 0; step < kMaxSteps; ++step) {
        if (t >= 1.0) {
            end.status = PathStatus::kSuccess;
            end.x = x;
            return end;
        }
        dt = std::min(dt, 1.0 - t);
        // RK4 predictor
        C4 k1, k2, k3, k4;
        bool ok = h.tangent(x, t, k1) && h.tangent(x + 0.5 * dt * k1, t + 0.5 * dt, k2) &&
                  h.tangent(x + 0.5 * dt * k2, t + 0.5 * dt, k3) && h.tangent(x + dt * k3, t + dt, k4);
        C4 xn = x;
        const double tn = (dt >= 1.0 - t) ? 1.0 : t + dt;
        if (ok) {
            xn = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            // Newton corrector at the new t
            double prev = 0.0;
            bool converged = false;
            for (int it = 0; it < 3 && ok; ++it) {
                C4 H, Ht;
                C44 Hx;
                h.eval(xn, tn, H, Hx, Ht);
                const C4 delta = Eigen::PartialPivLU<C44>(Hx).solve(H);
                if (!delta.allFinite()) {
                    ok = false;
                    break;
                }
                xn -= delta;
                const double nd = delta.norm();
                if (it > 0 && nd > 0.1 * prev) {
                    ok = false; // not contracting: likely path jumping
                    break;
                }
                prev = nd;
                if (nd <= 1e-10 * (1.0 + xn.norm())) {
                    converged = true;
                    break;
                }
            }
            ok = ok && converged && xn.allFinite();
        }
        if (ok) {
            x = xn;
            t = tn;
            if (x.norm() > kDivergence) {
                end.status = PathStatus::kDiverged;
                end.x = x;
                return end;
            }
            if (++streak >= 3) {
                dt *= 2.0;
                streak = 0;
            }
        } else {
            dt *= 0.5;
            streak = 0;
            if (dt < kMinStep) {
                end.status = x.norm() > 1e4 ? PathStatus::kDiverged : PathStatus::kFailed;
                end.x = x;
                end.t = t;
                return end;
            }
        }
    }
    end.status = x.norm() > 1e4 ? PathStatus::kDiverged : PathStatus::kFailed;
    end.x = x;
    end.t = t;
    return end;
}

// One representative of each +-pair of nonzero start roots x_i in {-1, 0, 1}.
std::vector<C4> start_points() {
    std::vector<C4> pts;
    for (int code = 0; code < 81; ++code) {
        int digits[4];
        int c = code;
        for (int v = 0; v < 4; ++v) {
            digits[v] = c % 3 - 1;
            c /= 3;
        }
        int first = 0;
        for (int v = 0; v < 4 && first == 0; ++v)
            first = digits[v];
        if (first <= 0)
            continue;
        C4 x;
        for (int v = 0; v < 4; ++v)
            x(v) = double(digits[v]);
        pts.push_back(x);
    }
    return pts;
}

Vec4 canonical_sign(Vec4 xi) {
    for (int v = 0; v < 4; ++v) {
        if (xi(v) > 0.0)
            return xi;
        if (xi(v) < 0.0)
            return -xi;
    }
    return xi;
}

} // namespace

const std::array<std::array<int, 4>, CubicSystem4::kNumMonomials> &cubic_system_exponents() {
    static const Exponents e = make_exponents();
    return e;
}

Vec4 CubicSystem4::evaluate(const Vec4 &xi) const {
    Vec4 g;
    Eigen::Matrix4d J;
    eval_system<double>(coeffs, xi, g, J);
    return g;
}

Eigen::Matrix4d CubicSystem4::jacobian(const Vec4 &xi) const {
    Vec4 g;
    Eigen::Matrix4d J;
    eval_system<double>(coeffs, xi, g, J);
    return J;
}

std::vector<Vec4> solve_cubic_stationarity(const CubicSystem4 &sys, CubicSolveDiagnostics *diag) {
    CubicSolveDiagnostics local;
    CubicSolveDiagnostics &dg = diag ? *diag : local;
    dg = CubicSolveDiagnostics{};

    const double cmax = sys.max_abs_coeff();
    if (!std::isfinite(cmax))
        throw Error(ErrorCode::kInvalidInput, "non-finite cubic system coefficients");
    if (cmax == 0.0)
        throw Error(ErrorCode::kNumericFailure, "cubic system is identically zero");
    const Eigen::Matrix<double, 4, CubicSystem4::kNumMonomials> C = sys.coeffs / cmax;

    // Fixed generic unit-modulus gammas. A failed path can hide a root, and which
    // start point reaches which root depends on gamma, so a pass with failures is
    // followed by another with a different gamma and the roots are merged.
    const double gamma_angles[] = {2.2104, 0.7431, 4.1235};
    constexpr double kEndgameT = 0.99;
    std::vector<Vec4> sols;
    for (double angle : gamma_angles) {
        const std::complex<double> gamma = std::polar(1.0, angle);
        Homotopy h(C, gamma);
        const int failed_before = dg.paths_failed;
        for (const C4 &s : start_points()) {
            ++dg.paths_tracked;
            PathEnd end = track(h, s);
            if (end.status == PathStatus::kDiverged) {
                ++dg.paths_diverged;
                continue;
            }
            // Paths into a multiple root stall right before t = 1 since the Jacobian
            // goes singular there. Such endpoints go through the same polish, with
            // more real Newton steps (convergence is only linear at a multiple root).
            const bool stalled = end.status == PathStatus::kFailed && end.t >= kEndgameT;
            if (end.status == PathStatus::kFailed && !stalled) {
                ++dg.paths_failed;
                continue;
            }
            if (stalled)
                ++dg.singular_endpoints;
            // Complex Newton polish on the target system.
            C4 x = end.x;
            for (int it = 0; it < 3; ++it) {
                C4 g;
                C44 J;
                eval_system(C, x, g, J);
                const C4 d = Eigen::PartialPivLU<C44>(J).solve(g);
                if (!d.allFinite())
                    break;
                x -= d;
            }
            const double xn = x.norm();
            if (!(xn > 1e-8)) // trivial root
                continue;
            if (x.imag().norm() > (stalled ? 1e-2 : 1e-6) * (1.0 + xn)) {
                ++dg.complex_endpoints;
                continue;
            }
            Vec4 xr = x.real();
            for (int it = 0; it < (stalled ? 60 : 3); ++it) {
                Vec4 g;
                Eigen::Matrix4d J;
                eval_system<double>(C, xr, g, J);
                const Vec4 d = J.fullPivLu().solve(g);
                if (!d.allFinite())
                    break;
                Vec4 g2;
                eval_system<double>(C, Vec4(xr - d), g2, J);
                if (g2.cwiseAbs().maxCoeff() > g.cwiseAbs().maxCoeff())
                    break;
                xr -= d;
            }
            Vec4 g;
            Eigen::Matrix4d J;
            eval_system<double>(C, xr, g, J);
            const double nr = xr.norm();
            if (g.cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, nr * nr * nr))
                continue;
            xr = canonical_sign(xr);
            bool dup = false;
            for (const Vec4 &o : sols)
                dup = dup || (o.normalized() - xr.normalized()).cwiseAbs().maxCoeff() <= 1e-6;
            if (!dup)
                sols.push_back(xr);
        }
        if (dg.paths_failed == failed_before)
            break;
    }
    if (dg.paths_failed + dg.paths_diverged == dg.paths_tracked && dg.paths_failed > 0)
        throw Error(ErrorCode::kNumericFailure,
                    "no homotopy path reached t = 1 (" + std::to_string(dg.paths_failed) + " failed)");
    dg.real_solutions = static_cast<int>(sols.size());
    std::sort(sols.begin(), sols.end(), [](const Vec4 &a, const Vec4 &b) {
        return std::lexicographical_compare(a.data(), a.data() + 4, b.data(), b.data() + 4);
    });
    return sols;
}

} // namespace pose3r
