#pragma once

// Unpenalized logistic regression by damped Newton with backtracking on the
// mean negative log-likelihood.

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace oracle {

inline double logistic_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& z, const Eigen::VectorXd& beta)
{
    const Eigen::VectorXd xi = X * beta;
    double s = 0.0;
    for (Eigen::Index i = 0; i < xi.size(); ++i) {
        const double v = xi(i);
        s += (v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v))) - z(i) * v;
    }
    return s / static_cast<double>(xi.size());
}

inline Eigen::VectorXd logistic_newton(const Eigen::MatrixXd& X, const Eigen::VectorXd& z, double grad_tol = 1e-13)
{
    const Eigen::Index n = X.rows(), k = X.cols();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
    double last_grad = 0.0;
    for (int it = 0; it < 200; ++it) {
        const Eigen::VectorXd xi = X * beta;
        Eigen::VectorXd p(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            p(i) = 1.0 / (1.0 + std::exp(-xi(i)));
            w(i) = p(i) * (1.0 - p(i));
        }
        const Eigen::VectorXd g = X.transpose() * (p - z) / static_cast<double>(n);
        last_grad = g.lpNorm<Eigen::Infinity>();
        if (last_grad < grad_tol) return beta;
        const Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X / static_cast<double>(n);
        const Eigen::VectorXd step = H.ldlt().solve(g);
        const double decrement = g.dot(step);
        if (decrement < 1e-28) return beta;
        const double f0 = logistic_loss(X, z, beta);
        double t = 1.0;
        // near the optimum the loss cannot resolve the decrease, and full steps converge quadratically
        if (decrement > 1e-12)
            while (logistic_loss(X, z, beta - t * step) > f0 - 1e-4 * t * g.dot(step) && t > 1e-12) t *= 0.5;
        beta -= t * step;
    }
    char msg[96];
    std::snprintf(msg, sizeof msg, "logistic oracle did not converge (separable data?), gradient %.3g", last_grad);
    throw std::runtime_error(msg);
}

} // namespace oracle
