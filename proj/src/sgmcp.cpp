#include "diffnet/sgmcp.hpp"
#include "diffnet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <sstream>

namespace diffnet::sgmcp {

void PenaltyParams::validate() const
{
    if (!std::isfinite(lambda1) || !std::isfinite(lambda2) || lambda1 < 0.0 || lambda2 < 0.0)
        throw InvalidParameter("penalty: lambdas must be finite and nonnegative");
    if (!std::isfinite(gamma1) || !std::isfinite(gamma2) || gamma1 <= 1.0 || gamma2 <= 1.0)
        throw InvalidParameter("penalty: gamma values must be finite and > 1");
}

double mcp(double t, double lambda, double gamma)
{
    if (!(gamma > 1.0)) throw InvalidParameter("mcp: gamma must be > 1");
    if (lambda < 0.0) throw InvalidParameter("mcp: lambda must be nonnegative");
    const double a = std::abs(t);
    if (a <= gamma * lambda) return lambda * a - a * a / (2.0 * gamma);
    return 0.5 * gamma * lambda * lambda;
}

double mcp_derivative(double t, double lambda, double gamma)
{
    return std::max(lambda - std::abs(t) / gamma, 0.0);
}

namespace {

double row_penalty(const double* row, int M, const PenaltyParams& pp)
{
    double sq = 0.0, elem = 0.0;
    for (int m = 0; m < M; ++m) {
        sq += row[m] * row[m];
        if (pp.lambda2 > 0.0) elem += mcp(row[m], pp.lambda2, pp.gamma2);
    }
    double group = 0.0;
    if (pp.lambda1 > 0.0) group = mcp(std::sqrt(sq), std::sqrt(static_cast<double>(M)) * pp.lambda1, pp.gamma1);
    return group + elem;
}

// log(1 + exp(x)) without overflow.
double log1pexp(double x)
{
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x)
{
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_coefficients(const JointDesign& design, std::span<const Vector> eta, const Matrix& beta)
{
    if (static_cast<int>(eta.size()) != design.M()) throw InvalidParameter("coefficients: need one eta vector per dataset");
    if (beta.rows() != design.d() || beta.cols() != design.M()) throw InvalidParameter("coefficients: theta_beta must be d x M");
    for (const auto& e : eta)
        if (e.size() != design.L() + 1) throw InvalidParameter("coefficients: eta must hold an intercept and L confounder terms");
}

Vector linear_predictor(const DatasetBlock& block, const Vector& eta, const Eigen::Ref<const Vector>& beta)
{
    Vector xi = Vector::Constant(block.n(), eta(0));
    if (block.confounders.cols() > 0) xi += block.confounders * eta.tail(eta.size() - 1);
    xi += block.features * beta;
    return xi;
}

} // namespace

double penalty_total(const Matrix& theta_beta, const PenaltyParams& params)
{
    params.validate();
    const int M = static_cast<int>(theta_beta.cols());
    double total = 0.0;
    Vector row(M);
    for (Eigen::Index l = 0; l < theta_beta.rows(); ++l) {
        row = theta_beta.row(l).transpose();
        total += row_penalty(row.data(), M, params);
    }
    return total;
}

int JointDesign::d() const
{
    return datasets.empty() ? 0 : static_cast<int>(datasets.front().features.cols());
}

int JointDesign::L() const
{
    return datasets.empty() ? 0 : static_cast<int>(datasets.front().confounders.cols());
}

int JointDesign::N() const
{
    int n = 0;
    for (const auto& b : datasets) n += b.n();
    return n;
}

void JointDesign::validate() const
{
    if (datasets.empty()) throw InvalidParameter("design: no datasets");
    const int dd = d(), ll = L();
    if (dd < 1) throw InvalidParameter("design: no feature columns");
    for (std::size_t m = 0; m < datasets.size(); ++m) {
        const auto& b = datasets[m];
        std::ostringstream where;
        where << "design: dataset " << m << ": ";
        if (b.n() < 1) throw InvalidParameter(where.str() + "no samples");
        if (b.features.rows() != b.n() || b.features.cols() != dd)
            throw InvalidParameter(where.str() + "feature matrix shape mismatch");
        if (b.confounders.rows() != b.n() || b.confounders.cols() != ll)
            throw InvalidParameter(where.str() + "confounder matrix shape mismatch");
        for (Eigen::Index k = 0; k < b.labels.size(); ++k)
            if (b.labels(k) != 0.0 && b.labels(k) != 1.0) throw InvalidParameter(where.str() + "labels must be 0 or 1");
        if (!b.features.allFinite() || !b.confounders.allFinite())
            throw InvalidParameter(where.str() + "non-finite covariates");
    }
}

double negative_log_likelihood(const JointDesign& design, std::span<const Vector> theta_eta, const Matrix& theta_beta)
{
    check_coefficients(design, theta_eta, theta_beta);
    double total = 0.0;
    for (int m = 0; m < design.M(); ++m) {
        const auto& b = design.datasets[m];
        const Vector xi = linear_predictor(b, theta_eta[m], theta_beta.col(m));
        for (int k = 0; k < b.n(); ++k) total += log1pexp(xi(k)) - b.labels(k) * xi(k);
    }
    return total / design.N();
}

Gradient likelihood_gradient(const JointDesign& design, std::span<const Vector> theta_eta, const Matrix& theta_beta)
{
    check_coefficients(design, theta_eta, theta_beta);
    const double invN = 1.0 / design.N();
    Gradient g;
    g.beta.resize(design.d(), design.M());
    for (int m = 0; m < design.M(); ++m) {
        const auto& b = design.datasets[m];
        const Vector xi = linear_predictor(b, theta_eta[m], theta_beta.col(m));
        Vector resid(b.n());
        for (int k = 0; k < b.n(); ++k) resid(k) = sigmoid(xi(k)) - b.labels(k);
        Vector ge(design.L() + 1);
        ge(0) = resid.sum() * invN;
        if (design.L() > 0) ge.tail(design.L()) = b.confounders.transpose() * resid * invN;
        g.eta.push_back(std::move(ge));
        g.beta.col(m) = b.features.transpose() * resid * invN;
    }
    return g;
}

namespace {

// Design on the fitting scale plus the maps back to the original scale.
struct Prepared
{
    int M = 0, d = 0, L1 = 0, N = 0;
    std::vector<Matrix> X;  // [1, Q]
    std::vector<Matrix> W;  // standardized features
    std::vector<Vector> Z;
    std::vector<Vector> mean, scale; // scale 0 marks a constant column
    std::vector<Eigen::LDLT<Matrix>> eta_hessian; // X'X / (4N)
    Matrix curvature; // ||W_l^m||^2 / (4N)
};

Prepared prepare(const JointDesign& design, const FitOptions& opt)
{
    design.validate();
    Prepared P;
    P.M = design.M();
    P.d = design.d();
    P.L1 = design.L() + 1;
    P.N = design.N();
    P.curvature.resize(P.d, P.M);
    for (int m = 0; m < P.M; ++m) {
        const auto& b = design.datasets[m];
        const int n = b.n();
        Matrix X(n, P.L1);
        X.col(0).setOnes();
        if (P.L1 > 1) X.rightCols(P.L1 - 1) = b.confounders;
        Matrix W = b.features;
        Vector mu = Vector::Zero(P.d), sd = Vector::Ones(P.d);
        if (opt.standardize) {
            mu = W.colwise().mean().transpose();
            for (int l = 0; l < P.d; ++l) {
                W.col(l).array() -= mu(l);
                const double s = std::sqrt(W.col(l).squaredNorm() / n);
                if (s > 1e-12 * std::max(1.0, std::abs(mu(l)))) {
                    W.col(l) /= s;
                    sd(l) = s;
                } else {
                    W.col(l).setZero();
                    sd(l) = 0.0;
                }
            }
        }
        for (int l = 0; l < P.d; ++l) P.curvature(l, m) = W.col(l).squaredNorm() / (4.0 * P.N);
        P.eta_hessian.emplace_back(X.transpose() * X / (4.0 * P.N));
        P.X.push_back(std::move(X));
        P.W.push_back(std::move(W));
        P.Z.push_back(b.labels);
        P.mean.push_back(std::move(mu));
        P.scale.push_back(std::move(sd));
    }
    return P;
}

void require_both_classes(const JointDesign& design)
{
    for (int m = 0; m < design.M(); ++m) {
        const double s = design.datasets[m].labels.sum();
        if (s <= 0.0 || s >= design.datasets[m].n()) {
            std::ostringstream msg;
            msg << "dataset " << m << " has labels from a single class";
            throw InvalidParameter(msg.str());
        }
    }
}

// Unpenalized logistic fit on X alone (intercept and confounders) by damped Newton.
Vector null_fit(const Matrix& X, const Vector& z)
{
    const int n = static_cast<int>(X.rows()), k = static_cast<int>(X.cols());
    Vector eta = Vector::Zero(k);
    const double zbar = z.mean();
    eta(0) = std::log(zbar / (1.0 - zbar));
    auto loss = [&](const Vector& e) {
        const Vector xi = X * e;
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += log1pexp(xi(i)) - z(i) * xi(i);
        return s;
    };
    double current = loss(eta);
    for (int it = 0; it < 100; ++it) {
        const Vector xi = X * eta;
        Vector p(n), w(n);
        for (int i = 0; i < n; ++i) {
            p(i) = sigmoid(xi(i));
            w(i) = std::max(p(i) * (1.0 - p(i)), 1e-12);
        }
        const Vector grad = X.transpose() * (z - p);
        const Matrix H = X.transpose() * w.asDiagonal() * X + 1e-12 * Matrix::Identity(k, k);
        const Vector step = H.ldlt().solve(grad);
        double t = 1.0;
        Vector trial = eta + step;
        double next = loss(trial);
        while (next > current + 1e-14 * std::abs(current) && t > 1e-10) {
            t *= 0.5;
            trial = eta + t * step;
            next = loss(trial);
        }
        const double change = (t * step).cwiseAbs().maxCoeff();
        eta = trial;
        current = std::min(current, next);
        if (change < 1e-12) break;
    }
    return eta;
}

struct State
{
    std::vector<Vector> eta; // fitting scale
    Matrix beta;             // fitting scale
    std::vector<Vector> xi;  // linear predictors
};

State null_state(const Prepared& P)
{
    State s;
    s.beta = Matrix::Zero(P.d, P.M);
    for (int m = 0; m < P.M; ++m) {
        s.eta.push_back(null_fit(P.X[m], P.Z[m]));
        s.xi.push_back(P.X[m] * s.eta.back());
    }
    return s;
}

State to_fitting_scale(const Prepared& P, const CoefficientFit& warm)
{
    if (static_cast<int>(warm.theta_eta.size()) != P.M || warm.theta_beta.rows() != P.d || warm.theta_beta.cols() != P.M)
        throw InvalidParameter("fit: warm start has the wrong shape");
    State s;
    s.beta.resize(P.d, P.M);
    for (int m = 0; m < P.M; ++m) {
        Vector eta = warm.theta_eta[m];
        for (int l = 0; l < P.d; ++l) {
            const double b = warm.theta_beta(l, m);
            s.beta(l, m) = P.scale[m](l) > 0.0 ? b * P.scale[m](l) : 0.0;
            if (P.scale[m](l) > 0.0) eta(0) += b * P.mean[m](l);
        }
        s.xi.push_back(P.X[m] * eta + P.W[m] * s.beta.col(m));
        s.eta.push_back(std::move(eta));
    }
    return s;
}

void to_original_scale(const Prepared& P, const State& s, CoefficientFit& out)
{
    out.theta_beta.resize(P.d, P.M);
    out.theta_eta.clear();
    for (int m = 0; m < P.M; ++m) {
        Vector eta = s.eta[m];
        for (int l = 0; l < P.d; ++l) {
            const double sd = P.scale[m](l);
            const double b = sd > 0.0 ? s.beta(l, m) / sd : 0.0;
            out.theta_beta(l, m) = b;
            eta(0) -= b * P.mean[m](l);
        }
        out.theta_eta.push_back(std::move(eta));
    }
}

double objective(const Prepared& P, const State& s, const PenaltyParams& pp)
{
    double nll = 0.0;
    for (int m = 0; m < P.M; ++m)
        for (Eigen::Index k = 0; k < s.xi[m].size(); ++k) nll += log1pexp(s.xi[m](k)) - P.Z[m](k) * s.xi[m](k);
    Vector row(P.M);
    double pen = 0.0;
    for (int l = 0; l < P.d; ++l) {
        row = s.beta.row(l).transpose();
        pen += row_penalty(row.data(), P.M, pp);
    }
    return nll / P.N + pen;
}

// argmin_b a/2 (b - z)^2 + rho(|b|; lambda, gamma), assuming a * gamma > 1.
double firm_threshold(double z, double a, double lambda, double gamma)
{
    if (lambda <= 0.0) return z;
    const double az = std::abs(z);
    if (az > gamma * lambda) return z;
    const double shrunk = a * az - lambda;
    if (shrunk <= 0.0) return 0.0;
    return std::copysign(shrunk / (a - 1.0 / gamma), z);
}

class RowSolver
{
public:
    RowSolver(const PenaltyParams& pp, int M, double a)
        : pp_(pp), M_(M), a_(a), sqrtM_(std::sqrt(static_cast<double>(M)))
    {
        inv_g1_ = pp_.lambda1 > 0.0 ? 1.0 / pp_.gamma1 : 0.0;
        inv_g2_ = pp_.lambda2 > 0.0 ? 1.0 / pp_.gamma2 : 0.0;
        cand_.resize(M);
        best_.resize(M);
    }

    // Row objective a/2 ||b - z||^2 + penalty(b).
    double value(const double* b, const double* z) const
    {
        double q = 0.0;
        for (int m = 0; m < M_; ++m) q += (b[m] - z[m]) * (b[m] - z[m]);
        return 0.5 * a_ * q + row_penalty(b, M_, pp_);
    }

    // The row problem has a closed-form minimizer on each region where the
    // group and element penalties are either both concave, or flat, or mixed.
    // Candidates from those regions, the two-level threshold, the current row
    // and zero are compared on the exact row objective and the best is kept,
    // so every row update decreases the surrogate.
    void update(const double* z, double* current) const
    {
        std::copy(current, current + M_, best_.begin());
        double best = value(current, z);
        auto consider = [&]() {
            const double v = value(cand_.data(), z);
            if (v < best) {
                best = v;
                std::copy(cand_.begin(), cand_.end(), best_.begin());
            }
        };

        // element-wise firm threshold, then group firm threshold of the norm
        double norm2 = 0.0;
        for (int m = 0; m < M_; ++m) {
            cand_[m] = firm_threshold(z[m], a_, pp_.lambda2, pp_.gamma2);
            norm2 += cand_[m] * cand_[m];
        }
        if (norm2 > 0.0 && pp_.lambda1 > 0.0) {
            const double nu = std::sqrt(norm2);
            const double r = firm_threshold(nu, a_ - inv_g2_, sqrtM_ * pp_.lambda1, pp_.gamma1);
            for (int m = 0; m < M_; ++m) cand_[m] *= r / nu;
        }
        consider();

        // both penalties concave: sparse group soft threshold with the reduced curvature
        if (pp_.lambda1 > 0.0) {
            double s2 = 0.0;
            for (int m = 0; m < M_; ++m) {
                const double az = a_ * z[m];
                cand_[m] = std::copysign(std::max(std::abs(az) - pp_.lambda2, 0.0), az);
                s2 += cand_[m] * cand_[m];
            }
            const double sn = std::sqrt(s2);
            const double shrink = sn > 0.0 ? std::max(1.0 - sqrtM_ * pp_.lambda1 / sn, 0.0) : 0.0;
            const double c = a_ - inv_g1_ - inv_g2_;
            for (int m = 0; m < M_; ++m) cand_[m] *= shrink / c;
            consider();

            // group concave, elements flat
            double z2 = 0.0;
            for (int m = 0; m < M_; ++m) z2 += z[m] * z[m];
            const double zn = std::sqrt(z2);
            if (zn > 0.0) {
                const double r = firm_threshold(zn, a_, sqrtM_ * pp_.lambda1, pp_.gamma1);
                for (int m = 0; m < M_; ++m) cand_[m] = z[m] * r / zn;
                consider();
            }
        }

        // both flat
        std::copy(z, z + M_, cand_.begin());
        consider();

        std::fill(cand_.begin(), cand_.end(), 0.0);
        consider();

        std::copy(best_.begin(), best_.end(), current);
    }

private:
    PenaltyParams pp_;
    int M_;
    double a_;
    double sqrtM_;
    double inv_g1_ = 0.0;
    double inv_g2_ = 0.0;
    mutable std::vector<double> cand_;
    mutable std::vector<double> best_;
};

// Curvature of the quadratic majorizer on feature coefficients: the logistic
// bound 1/4 per sample, raised where needed so every row subproblem stays
// convex under the MCP concavity.
double surrogate_curvature(const Prepared& P, const PenaltyParams& pp)
{
    double concavity = 0.0;
    if (pp.lambda1 > 0.0) concavity += 1.0 / pp.gamma1;
    if (pp.lambda2 > 0.0) concavity += 1.0 / pp.gamma2;
    double a = P.curvature.size() > 0 ? P.curvature.maxCoeff() : 0.0;
    a = std::max(a, 1.05 * concavity);
    return a > 0.0 ? a : 1.0;
}

class MMSolver
{
public:
    MMSolver(const Prepared& P, const PenaltyParams& pp, const FitOptions& opt)
        : P_(P), pp_(pp), opt_(opt), a_(surrogate_curvature(P, pp)), rows_(pp, P.M, a_)
    {}

    CoefficientFit run(State s)
    {
        CoefficientFit out;
        out.params = pp_;
        const double invN = 1.0 / P_.N;
        std::vector<Vector> resid(P_.M), e(P_.M);
        Matrix dbeta(P_.d, P_.M);
        std::vector<double> z(P_.M), row(P_.M);

        std::vector<int> all(P_.d);
        std::iota(all.begin(), all.end(), 0);
        // Rows outside the active set are only revisited on every tenth
        // iteration and before convergence is accepted.
        bool force_full = true;
        int it = 0;
        for (; it < opt_.max_iter; ++it) {
            const bool check_all = force_full || it % 10 == 0;
            force_full = false;
            out.objective_trace.push_back(objective(P_, s, pp_));
            for (int m = 0; m < P_.M; ++m) {
                resid[m].resize(s.xi[m].size());
                for (Eigen::Index k = 0; k < s.xi[m].size(); ++k) resid[m](k) = P_.Z[m](k) - sigmoid(s.xi[m](k));
                e[m] = Vector::Zero(s.xi[m].size());
            }
            dbeta.setZero();
            const std::vector<Vector> eta_before = s.eta;

            auto eta_block = [&](int m) {
                const Vector g = P_.X[m].transpose() * (resid[m] - 0.25 * e[m]) * invN;
                const Vector step = P_.eta_hessian[m].solve(g);
                s.eta[m] += step;
                e[m].noalias() += P_.X[m] * step;
                return step.cwiseAbs().maxCoeff();
            };
            auto row_block = [&](int l) {
                for (int m = 0; m < P_.M; ++m) {
                    const double c = P_.curvature(l, m);
                    const double g = P_.W[m].col(l).dot(resid[m] - 0.25 * e[m]) * invN - (a_ - c) * dbeta(l, m);
                    row[m] = s.beta(l, m);
                    z[m] = row[m] + g / a_;
                }
                rows_.update(z.data(), row.data());
                double change = 0.0;
                for (int m = 0; m < P_.M; ++m) {
                    const double delta = row[m] - s.beta(l, m);
                    if (delta == 0.0) continue;
                    s.beta(l, m) = row[m];
                    dbeta(l, m) += delta;
                    e[m].noalias() += delta * P_.W[m].col(l);
                    change = std::max(change, std::abs(delta));
                }
                return change;
            };
            auto sweep = [&](const std::vector<int>& visit) {
                double change = 0.0;
                for (int m = 0; m < P_.M; ++m) change = std::max(change, eta_block(m));
                for (int l : visit) change = std::max(change, row_block(l));
                return change;
            };

            std::vector<int> active;
            for (int l = 0; l < P_.d; ++l)
                if (s.beta.row(l).cwiseAbs().maxCoeff() > 0.0) active.push_back(l);
            int sweeps = 0;
            if (check_all) {
                while (sweeps < opt_.max_sweeps) {
                    const double full = sweep(all);
                    ++sweeps;
                    if (full < opt_.inner_tol) break;
                    active.clear();
                    for (int l = 0; l < P_.d; ++l)
                        if (s.beta.row(l).cwiseAbs().maxCoeff() > 0.0) active.push_back(l);
                    while (sweeps < opt_.max_sweeps) {
                        const double ch = sweep(active);
                        ++sweeps;
                        if (ch < opt_.inner_tol) break;
                    }
                }
            } else {
                while (sweeps < opt_.max_sweeps) {
                    const double ch = sweep(active);
                    ++sweeps;
                    if (ch < opt_.inner_tol) break;
                }
            }

            for (int m = 0; m < P_.M; ++m) s.xi[m] += e[m];
            double outer_change = dbeta.size() > 0 ? dbeta.cwiseAbs().maxCoeff() : 0.0;
            for (int m = 0; m < P_.M; ++m)
                outer_change = std::max(outer_change, (s.eta[m] - eta_before[m]).cwiseAbs().maxCoeff());
            if (outer_change < opt_.tol) {
                if (check_all) {
                    out.converged = true;
                    ++it;
                    break;
                }
                force_full = true;
                continue;
            }
            if (check_all && opt_.objective_tol > 0.0) {
                const double prev = out.objective_trace.back();
                const double now = objective(P_, s, pp_);
                if (prev - now < opt_.objective_tol * std::max(1.0, std::abs(now))) {
                    ++it;
                    break;
                }
            }
        }
        out.objective_trace.push_back(objective(P_, s, pp_));
        out.iterations = it;
        to_original_scale(P_, s, out);
        return out;
    }

private:
    const Prepared& P_;
    PenaltyParams pp_;
    FitOptions opt_;
    double a_;
    RowSolver rows_;
};

CoefficientFit run_fit(const Prepared& P, const PenaltyParams& params, const FitOptions& options, State start)
{
    MMSolver solver(P, params, options);
    return solver.run(std::move(start));
}

void check_options(const FitOptions& o)
{
    if (!(o.tol > 0.0) || !(o.inner_tol > 0.0) || o.max_iter < 1 || o.max_sweeps < 1 || !(o.objective_tol >= 0.0))
        throw InvalidParameter("fit: invalid options");
}

} // namespace

CoefficientFit fit(const JointDesign& design, const PenaltyParams& params, const FitOptions& options,
                   const CoefficientFit* warm_start)
{
    params.validate();
    check_options(options);
    require_both_classes(design);
    const Prepared P = prepare(design, options);
    State start = warm_start ? to_fitting_scale(P, *warm_start) : null_state(P);
    return run_fit(P, params, options, std::move(start));
}

std::vector<CoefficientFit> fit_path(const JointDesign& design, std::span<const PenaltyParams> path,
                                     const FitOptions& options)
{
    check_options(options);
    for (const auto& pp : path) pp.validate();
    require_both_classes(design);
    const Prepared P = prepare(design, options);
    std::vector<CoefficientFit> fits;
    fits.reserve(path.size());
    State start = null_state(P);
    for (const auto& pp : path) {
        fits.push_back(run_fit(P, pp, options, start));
        start = to_fitting_scale(P, fits.back());
    }
    return fits;
}

Matrix null_gradient(const JointDesign& design, const FitOptions& options)
{
    require_both_classes(design);
    const Prepared P = prepare(design, options);
    const State s = null_state(P);
    Matrix g(P.d, P.M);
    for (int m = 0; m < P.M; ++m) {
        Vector r(s.xi[m].size());
        for (Eigen::Index k = 0; k < r.size(); ++k) r(k) = P.Z[m](k) - sigmoid(s.xi[m](k));
        g.col(m) = P.W[m].transpose() * r / static_cast<double>(P.N);
    }
    return g;
}

double lambda2_max(const JointDesign& design, const FitOptions& options)
{
    return null_gradient(design, options).cwiseAbs().maxCoeff();
}

double lambda1_max(const JointDesign& design, double lambda2, const FitOptions& options)
{
    if (!(lambda2 >= 0.0)) throw InvalidParameter("lambda1_max: lambda2 must be nonnegative");
    const Matrix g = null_gradient(design, options);
    double worst = 0.0;
    for (Eigen::Index l = 0; l < g.rows(); ++l) {
        double sq = 0.0;
        for (Eigen::Index m = 0; m < g.cols(); ++m) {
            const double s = std::max(std::abs(g(l, m)) - lambda2, 0.0);
            sq += s * s;
        }
        worst = std::max(worst, std::sqrt(sq));
    }
    return worst / std::sqrt(static_cast<double>(g.cols()));
}

namespace {

std::vector<double> log_grid(double top, double min_ratio, int points)
{
    std::vector<double> out;
    if (points < 1) return out;
    for (int k = 0; k < points; ++k) {
        const double t = points == 1 ? 0.0 : static_cast<double>(k) / (points - 1);
        out.push_back(top * std::pow(min_ratio, t));
    }
    return out;
}

} // namespace

std::vector<PenaltyParams> build_grid(const JointDesign& design, const GridSpec& spec, const FitOptions& options)
{
    std::vector<double> gammas = spec.gamma_grid;
    if (gammas.empty()) gammas.push_back(spec.gamma);
    for (double g : gammas)
        if (!(g > 1.0)) throw InvalidParameter("build_grid: gamma values must be > 1");

    std::vector<PenaltyParams> grid;
    if (!spec.pairs.empty()) {
        for (double g : gammas)
            for (const auto& [l1, l2] : spec.pairs) grid.push_back({l1, l2, g, g});
    } else {
        if (spec.n_lambda2 < 1 || (!spec.lambda1_zero && spec.n_lambda1 < 1))
            throw InvalidParameter("build_grid: grid sizes must be positive");
        if (!(spec.min_ratio > 0.0 && spec.min_ratio <= 1.0)) throw InvalidParameter("build_grid: min_ratio must lie in (0,1]");
        const Matrix g0 = null_gradient(design, options);
        const double l2max = g0.cwiseAbs().maxCoeff();
        const double sqrtM = std::sqrt(static_cast<double>(g0.cols()));
        for (double g : gammas) {
            for (double l2 : log_grid(l2max, spec.min_ratio, spec.n_lambda2)) {
                if (spec.lambda1_zero) {
                    grid.push_back({0.0, l2, g, g});
                    continue;
                }
                double l1max = 0.0;
                for (Eigen::Index l = 0; l < g0.rows(); ++l) {
                    double sq = 0.0;
                    for (Eigen::Index m = 0; m < g0.cols(); ++m) {
                        const double s = std::max(std::abs(g0(l, m)) - l2, 0.0);
                        sq += s * s;
                    }
                    l1max = std::max(l1max, std::sqrt(sq) / sqrtM);
                }
                // the full-data fit at l1max itself is zero, the same model as the
                // lambda2 max entry, so each row starts one step below it
                if (l1max <= 0.0) {
                    grid.push_back({0.0, l2, g, g});
                    continue;
                }
                for (int k = 1; k <= spec.n_lambda1; ++k)
                    grid.push_back({l1max * std::pow(spec.min_ratio, static_cast<double>(k) / spec.n_lambda1), l2, g, g});
            }
        }
    }
    for (const auto& pp : grid) pp.validate();
    return grid;
}

CvResult cross_validate(const JointDesign& design, const GridSpec& spec, int folds, std::uint64_t seed,
                        const FitOptions& options)
{
    if (folds < 2) throw InvalidParameter("cross_validate: need at least two folds");
    design.validate();
    require_both_classes(design);
    const int M = design.M();

    // fold id of every sample, stratified by dataset x class
    std::vector<std::vector<int>> fold_of(M);
    for (int m = 0; m < M; ++m) {
        const auto& b = design.datasets[m];
        fold_of[m].assign(b.n(), 0);
        for (int cls = 0; cls < 2; ++cls) {
            std::vector<int> idx;
            for (int k = 0; k < b.n(); ++k)
                if (static_cast<int>(b.labels(k)) == cls) idx.push_back(k);
            if (static_cast<int>(idx.size()) < folds) {
                std::ostringstream msg;
                msg << "cross_validate: dataset " << m << " class " << cls << " has " << idx.size()
                    << " samples, fewer than " << folds << " folds";
                throw InvalidParameter(msg.str());
            }
            Engine rng = keyed_engine(seed, {stream::folds, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(cls)});
            std::shuffle(idx.begin(), idx.end(), rng);
            for (std::size_t r = 0; r < idx.size(); ++r) fold_of[m][idx[r]] = static_cast<int>(r % folds);
        }
    }

    CvResult result;
    result.grid = build_grid(design, spec, options);
    const std::size_t G = result.grid.size();
    if (G == 0) throw InvalidParameter("cross_validate: empty grid");

    // repeated grid entries are fitted once so they score identically
    std::vector<PenaltyParams> unique;
    std::vector<std::size_t> slot(G);
    for (std::size_t g = 0; g < G; ++g) {
        const auto& pp = result.grid[g];
        std::size_t u = 0;
        while (u < unique.size() && !(unique[u].lambda1 == pp.lambda1 && unique[u].lambda2 == pp.lambda2 &&
                                      unique[u].gamma1 == pp.gamma1 && unique[u].gamma2 == pp.gamma2))
            ++u;
        if (u == unique.size()) unique.push_back(pp);
        slot[g] = u;
    }

    Matrix scores(folds, static_cast<Eigen::Index>(G));
    std::vector<std::exception_ptr> errors(folds);
#pragma omp parallel for schedule(dynamic, 1)
    for (int f = 0; f < folds; ++f) {
        try {
            std::vector<std::vector<int>> train(M), valid(M);
            for (int m = 0; m < M; ++m)
                for (int k = 0; k < design.datasets[m].n(); ++k) (fold_of[m][k] == f ? valid : train)[m].push_back(k);
            const JointDesign tr = subset(design, train);
            const JointDesign va = subset(design, valid);
            const auto fits = fit_path(tr, unique, options);
            for (std::size_t g = 0; g < G; ++g) {
                const auto& fit = fits[slot[g]];
                scores(f, static_cast<Eigen::Index>(g)) = negative_log_likelihood(va, fit.theta_eta, fit.theta_beta);
            }
        } catch (...) {
            errors[f] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    result.scores.resize(G);
    std::size_t best = 0;
    for (std::size_t g = 0; g < G; ++g) {
        result.scores[g] = scores.col(static_cast<Eigen::Index>(g)).mean();
        if (g == 0) continue;
        const auto& cand = result.grid[g];
        const auto& cur = result.grid[best];
        const double diff = result.scores[g] - result.scores[best];
        const double tie = 1e-12 * std::max(1.0, std::abs(result.scores[best]));
        if (diff < -tie) {
            best = g;
        } else if (std::abs(diff) <= tie) {
            if (cand.lambda2 > cur.lambda2 || (cand.lambda2 == cur.lambda2 && cand.lambda1 > cur.lambda1)) best = g;
        }
    }
    result.best = result.grid[best];
    return result;
}

ScreenResult sis_screen(const JointDesign& design, int keep)
{
    design.validate();
    const int d = design.d();
    if (keep <= 0) throw InvalidParameter("sis_screen: keep must be positive");
    if (keep > d) throw InvalidParameter("sis_screen: keep exceeds the number of features");

    ScreenResult out;
    out.utility = Vector::Zero(d);
    for (const auto& b : design.datasets) {
        const int n = b.n();
        Vector z = b.labels.array() - b.labels.mean();
        const double zs = std::sqrt(z.squaredNorm() / n);
        if (zs <= 0.0) continue;
        z /= zs;
        for (int l = 0; l < d; ++l) {
            Vector w = b.features.col(l).array() - b.features.col(l).mean();
            const double ws = std::sqrt(w.squaredNorm() / n);
            if (ws <= 0.0) continue;
            out.utility(l) += w.dot(z) / ws;
        }
    }
    out.utility = out.utility.cwiseAbs() / static_cast<double>(design.N());

    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return out.utility(x) > out.utility(y); });
    out.kept.assign(order.begin(), order.begin() + keep);
    std::sort(out.kept.begin(), out.kept.end());

    out.design = design;
    for (auto& b : out.design.datasets) {
        Matrix reduced(b.n(), keep);
        for (int c = 0; c < keep; ++c) reduced.col(c) = b.features.col(out.kept[c]);
        b.features = std::move(reduced);
    }
    return out;
}

Prediction predict(const CoefficientFit& fit, const Vector& confounders, const Vector& features, int dataset_id,
                   double threshold)
{
    if (dataset_id < 0 || dataset_id >= static_cast<int>(fit.theta_eta.size()))
        throw InvalidParameter("predict: unknown dataset id " + std::to_string(dataset_id));
    const Vector& eta = fit.theta_eta[dataset_id];
    if (confounders.size() != eta.size() - 1) throw InvalidParameter("predict: confounder length mismatch");
    if (features.size() != fit.theta_beta.rows()) throw InvalidParameter("predict: feature length mismatch");
    double xi = eta(0) + features.dot(fit.theta_beta.col(dataset_id));
    if (confounders.size() > 0) xi += confounders.dot(eta.tail(eta.size() - 1));
    Prediction p;
    p.probability = sigmoid(xi);
    p.label = p.probability > threshold ? 1 : 0;
    return p;
}

JointDesign subset(const JointDesign& design, const std::vector<std::vector<int>>& rows)
{
    if (static_cast<int>(rows.size()) != design.M()) throw InvalidParameter("subset: need one row list per dataset");
    JointDesign out;
    for (int m = 0; m < design.M(); ++m) {
        const auto& b = design.datasets[m];
        const auto& r = rows[m];
        DatasetBlock nb;
        nb.features.resize(static_cast<Eigen::Index>(r.size()), b.features.cols());
        nb.confounders.resize(static_cast<Eigen::Index>(r.size()), b.confounders.cols());
        nb.labels.resize(static_cast<Eigen::Index>(r.size()));
        for (std::size_t k = 0; k < r.size(); ++k) {
            if (r[k] < 0 || r[k] >= b.n()) throw InvalidParameter("subset: row index out of range");
            const auto kk = static_cast<Eigen::Index>(k);
            nb.features.row(kk) = b.features.row(r[k]);
            nb.confounders.row(kk) = b.confounders.row(r[k]);
            nb.labels(kk) = b.labels(r[k]);
        }
        out.datasets.push_back(std::move(nb));
    }
    return out;
}

JointDesign single_dataset(const JointDesign& design, int m)
{
    if (m < 0 || m >= design.M()) throw InvalidParameter("single_dataset: index out of range");
    JointDesign out;
    out.datasets.push_back(design.datasets[m]);
    return out;
}

int nonzero_rows(const Matrix& theta_beta)
{
    int count = 0;
    for (Eigen::Index l = 0; l < theta_beta.rows(); ++l)
        if ((theta_beta.row(l).array() != 0.0).any()) ++count;
    return count;
}

} // namespace diffnet::sgmcp
