#pragma once

// Mehrotra predictor-corrector interior point method for
//   min c'x  s.t.  A x = b, x >= 0.
// Dense normal equations; meant for the small problems of the test suite.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oracle {

struct LpResult
{
    Eigen::VectorXd x;
    double objective = 0.0;
    bool ok = false;
    int iterations = 0;
};

inline LpResult solve_standard_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                                  double tol = 1e-10, int max_iter = 200)
{
    using Eigen::VectorXd;
    const Eigen::Index m = A.rows(), n = A.cols();
    // standard starting point (Mehrotra 1992)
    const Eigen::MatrixXd AAt = A * A.transpose();
    Eigen::LDLT<Eigen::MatrixXd> f0(AAt);
    VectorXd x = A.transpose() * f0.solve(b);
    VectorXd y = f0.solve(A * c);
    VectorXd s = c - A.transpose() * y;
    const double dx = std::max(-1.5 * x.minCoeff(), 0.0), ds = std::max(-1.5 * s.minCoeff(), 0.0);
    x.array() += dx;
    s.array() += ds;
    const double xs = x.dot(s);
    x.array() += 0.5 * xs / s.sum();
    s.array() += 0.5 * xs / x.sum();

    LpResult res;
    const double bnorm = 1.0 + b.norm(), cnorm = 1.0 + c.norm();
    for (int it = 0; it < max_iter; ++it) {
        const VectorXd rb = A * x - b;
        const VectorXd rc = A.transpose() * y + s - c;
        const double mu = x.dot(s) / static_cast<double>(n);
        if (!std::isfinite(mu)) break;
        if (rb.norm() / bnorm < tol && rc.norm() / cnorm < tol && mu < tol) {
            res.ok = true;
            res.iterations = it;
            break;
        }
        const VectorXd d = (x.array() / s.array()).matrix();
        const Eigen::MatrixXd M = A * d.asDiagonal() * A.transpose() + 1e-14 * Eigen::MatrixXd::Identity(m, m);
        Eigen::LDLT<Eigen::MatrixXd> fac(M);
        auto direction = [&](const VectorXd& rxs, VectorXd& ddx, VectorXd& ddy, VectorXd& dds) {
            // rxs is the target for X S e
            const VectorXd rhs = -rb - A * (d.asDiagonal() * rc + (rxs.array() / s.array()).matrix());
            ddy = fac.solve(rhs);
            dds = -rc - A.transpose() * ddy;
            ddx = ((rxs.array() - x.array() * dds.array()) / s.array()).matrix();
        };
        auto step_to_boundary = [](const VectorXd& v, const VectorXd& dv) {
            double a = 1.0;
            for (Eigen::Index i = 0; i < v.size(); ++i)
                if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
            return a;
        };
        VectorXd ax, ay, as;
        direction(-(x.array() * s.array()).matrix(), ax, ay, as);
        const double ap = step_to_boundary(x, ax), ad = step_to_boundary(s, as);
        const double mu_aff = (x + ap * ax).dot(s + ad * as) / static_cast<double>(n);
        const double sigma = std::pow(mu_aff / mu, 3.0);
        const VectorXd target =
            (-(x.array() * s.array()) - ax.array() * as.array() + sigma * mu).matrix();
        VectorXd cx, cy, cs;
        direction(target, cx, cy, cs);
        const double eta = 0.995;
        const double pstep = std::min(1.0, eta * step_to_boundary(x, cx));
        const double dstep = std::min(1.0, eta * step_to_boundary(s, cs));
        x += pstep * cx;
        y += dstep * cy;
        s += dstep * cs;
        res.iterations = it + 1;
    }
    res.x = x;
    res.objective = c.dot(x);
    return res;
}

// min ||w||_1 s.t. ||sigma w - e_j||_inf <= lambda, written as a standard-form
// LP in (w+, w-, slack_upper, slack_lower).
inline Eigen::VectorXd clime_column_by_lp(const Eigen::MatrixXd& sigma, int j, double lambda)
{
    const Eigen::Index p = sigma.rows();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * p, 4 * p);
    A.block(0, 0, p, p) = sigma;
    A.block(0, p, p, p) = -sigma;
    A.block(0, 2 * p, p, p) = Eigen::MatrixXd::Identity(p, p);
    A.block(p, 0, p, p) = -sigma;
    A.block(p, p, p, p) = sigma;
    A.block(p, 3 * p, p, p) = Eigen::MatrixXd::Identity(p, p);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(p);
    e(j) = 1.0;
    Eigen::VectorXd b(2 * p);
    b << e.array() + lambda, lambda - e.array();
    Eigen::VectorXd c = Eigen::VectorXd::Zero(4 * p);
    c.head(2 * p).setOnes();
    const auto r = solve_standard_lp(A, b, c);
    if (!r.ok) throw std::runtime_error("interior point oracle did not converge");
    return r.x.head(p) - r.x.segment(p, p);
}

} // namespace oracle
