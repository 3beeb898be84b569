#include "pose3r/polynomial.h"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace pose3r {

double Poly1::operator()(double x) const {
    double v = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it)
        v = v * x + *it;
    return v;
}

double Poly1::scale_at(double x) const {
    const double ax = std::abs(x);
    double v = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it)
        v = v * ax + std::abs(*it);
    return v;
}

double Poly1::max_abs_coeff() const {
    double m = 0.0;
    for (double c : coeffs)
        m = std::max(m, std::abs(c));
    return m;
}

namespace {

double derivative_at(const std::vector<double> &c, double x) {
    double v = 0.0;
    for (int k = static_cast<int>(c.size()) - 1; k >= 1; --k)
        v = v * x + k * c[k];
    return v;
}

} // namespace

std::vector<double> real_roots(const Poly1 &p, double tol) {
    const double cmax = p.max_abs_coeff();
    if (!(cmax > 0.0) || !std::isfinite(cmax))
        throw Error(ErrorCode::kDegeneratePolynomial, "polynomial has no nonzero coefficients");

    std::vector<double> c = p.coeffs;
    while (c.size() > 1 && std::abs(c.back()) <= tol * cmax)
        c.pop_back();
    int n = static_cast<int>(c.size()) - 1;
    if (n < 1)
        return {};

    // Factor out roots at zero so the variable scaling below is well defined.
    int zero_roots = 0;
    while (zero_roots < n && c[zero_roots] == 0.0)
        ++zero_roots;
    std::vector<double> reduced(c.begin() + zero_roots, c.end());
    const int m = n - zero_roots;

    std::vector<double> roots;
    if (zero_roots > 0)
        roots.push_back(0.0);

    if (m >= 1) {
        // Substitute x = sigma z so the reduced polynomial has comparable end coefficients.
        const double sigma = std::pow(std::abs(reduced[0] / reduced[m]), 1.0 / m);
        const double scale = (std::isfinite(sigma) && sigma > 0.0) ? sigma : 1.0;
        std::vector<double> monic(m + 1);
        double pw = 1.0;
        for (int k = 0; k <= m; ++k) {
            monic[k] = reduced[k] * pw;
            pw *= scale;
        }
        const double lead = monic[m];
        Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(m, m);
        for (int k = 0; k < m; ++k)
            companion(0, k) = -monic[m - 1 - k] / lead;
        for (int k = 1; k < m; ++k)
            companion(k, k - 1) = 1.0;

        Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
        const Eigen::VectorXcd ev = es.eigenvalues();
        for (int k = 0; k < m; ++k) {
            const std::complex<double> z = ev(k) * scale;
            if (std::abs(z.imag()) > 1e-6 * (1.0 + std::abs(z)))
                continue;
            double r = z.real();
            const double d = derivative_at(c, r);
            if (d != 0.0) {
                const double polished = r - p(r) / d;
                if (std::isfinite(polished) && std::abs(p(polished)) <= std::abs(p(r)))
                    r = polished;
            }
            if (std::abs(p(r)) <= tol * p.scale_at(r))
                roots.push_back(r);
        }
    }

    std::sort(roots.begin(), roots.end());
    std::vector<double> merged;
    for (double r : roots) {
        if (!merged.empty() && std::abs(r - merged.back()) <= 1e-6 * (1.0 + std::abs(r))) {
            // Keep whichever representative has the smaller residual.
            if (std::abs(p(r)) < std::abs(p(merged.back())))
                merged.back() = r;
            continue;
        }
        merged.push_back(r);
    }
    return merged;
}

} // namespace pose3r
