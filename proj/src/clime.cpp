#include "diffnet/clime.hpp"
#include "diffnet/lp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace diffnet::clime {

Matrix sample_covariance(const Matrix& x)
{
    if (x.cols() < 2) throw InvalidParameter("sample_covariance: need at least two columns");
    const Matrix centered = x.colwise() - x.rowwise().mean();
    Matrix s = centered * centered.transpose() / static_cast<double>(x.cols() - 1);
    // exact symmetry
    return (s + s.transpose()) * 0.5;
}

Matrix symmetrize_min_magnitude(const Matrix& raw)
{
    Matrix out = raw;
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < raw.cols(); ++j) {
            const double upper = raw(i, j), lower = raw(j, i);
            const double keep = std::abs(lower) < std::abs(upper) ? lower : upper;
            out(i, j) = keep;
            out(j, i) = keep;
        }
    }
    return out;
}

namespace {

void check_square(const Matrix& sigma)
{
    if (sigma.rows() != sigma.cols() || sigma.rows() == 0)
        throw InvalidParameter("clime: sigma_hat must be a non-empty square matrix");
}

// Column j in split form w = u - v:  [S -S; -S S][u; v] <= [lambda + e_j; lambda - e_j].
class ColumnProblem
{
public:
    ColumnProblem(const Matrix& sigma, int j)
        : j_(j), p_(static_cast<int>(sigma.rows())), lp_(constraints(sigma), Vector::Ones(2 * sigma.rows()))
    {}

    bool solve(double lambda, Vector& w)
    {
        Vector b = Vector::Constant(2 * p_, lambda);
        b(j_) += 1.0;
        b(p_ + j_) -= 1.0;
        if (lp_.solve(b) != lp::Status::Optimal) return false;
        const Vector x = lp_.primal();
        w = x.head(p_) - x.tail(p_);
        return true;
    }

private:
    static Matrix constraints(const Matrix& s)
    {
        const Eigen::Index p = s.rows();
        Matrix a(2 * p, 2 * p);
        a << s, -s, -s, s;
        return a;
    }

    int j_;
    int p_;
    lp::DualSimplex lp_;
};

ClimeSolution assemble(const Matrix& sigma, Matrix raw, double lambda)
{
    ClimeSolution sol;
    sol.lambda = lambda;
    sol.feasibility_gap = (sigma * raw - Matrix::Identity(sigma.rows(), sigma.cols())).cwiseAbs().maxCoeff();
    sol.omega = symmetrize_min_magnitude(raw);
    sol.raw_omega = std::move(raw);
    return sol;
}

} // namespace

std::vector<std::optional<ClimeSolution>> clime_path(const Matrix& sigma_hat, std::span<const double> lambdas)
{
    check_square(sigma_hat);
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
        if (!(lambdas[k] > 0.0)) throw InvalidParameter("clime: lambda must be positive");
        if (k > 0 && !(lambdas[k] < lambdas[k - 1])) throw InvalidParameter("clime_path: lambdas must be strictly decreasing");
    }
    const int p = static_cast<int>(sigma_hat.rows());
    const std::size_t K = lambdas.size();
    std::vector<Matrix> raw(K, Matrix::Zero(p, p));
    std::size_t feasible = K;

    Vector w;
    for (int j = 0; j < p; ++j) {
        ColumnProblem column(sigma_hat, j);
        for (std::size_t k = 0; k < feasible; ++k) {
            if (!column.solve(lambdas[k], w)) {
                feasible = k;
                break;
            }
            raw[k].col(j) = w;
        }
    }

    std::vector<std::optional<ClimeSolution>> out(K);
    for (std::size_t k = 0; k < feasible; ++k) out[k] = assemble(sigma_hat, std::move(raw[k]), lambdas[k]);
    return out;
}

ClimeSolution clime_solve(const Matrix& sigma_hat, double lambda)
{
    check_square(sigma_hat);
    if (!(lambda > 0.0)) throw InvalidParameter("clime_solve: lambda must be positive");
    const int p = static_cast<int>(sigma_hat.rows());
    Matrix raw(p, p);
    Vector w;
    for (int j = 0; j < p; ++j) {
        ColumnProblem column(sigma_hat, j);
        if (!column.solve(lambda, w)) {
            std::ostringstream msg;
            msg << "clime_solve: column " << j << " is infeasible at lambda = " << lambda;
            throw SolverError(msg.str());
        }
        raw.col(j) = w;
    }
    return assemble(sigma_hat, std::move(raw), lambda);
}

std::vector<double> default_grid(const Matrix& sigma_hat, int points, double min_ratio)
{
    if (points < 1) throw InvalidParameter("default_grid: need at least one point");
    if (!(min_ratio > 0.0 && min_ratio <= 1.0)) throw InvalidParameter("default_grid: min_ratio must lie in (0,1]");
    const double top = sigma_hat.cwiseAbs().maxCoeff();
    if (!(top > 0.0)) return {1.0};
    std::vector<double> grid(points);
    for (int k = 0; k < points; ++k) {
        const double t = points == 1 ? 0.0 : static_cast<double>(k) / (points - 1);
        grid[k] = top * std::pow(min_ratio, t);
    }
    return grid;
}

std::optional<double> edge_density(const Matrix& omega, double zero_tol)
{
    const Eigen::Index p = omega.rows();
    if (p < 2) return 0.0;
    const Vector diag = omega.diagonal();
    if ((diag.array() <= 0.0).any()) return std::nullopt;
    long present = 0;
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = i + 1; j < p; ++j)
            if (std::abs(omega(i, j) / std::sqrt(diag(i) * diag(j))) > zero_tol) ++present;
    return static_cast<double>(present) / static_cast<double>(p * (p - 1) / 2);
}

TuningResult select_lambda_dens(const Matrix& sigma_hat, double target_density, std::vector<double> grid, double zero_tol)
{
    check_square(sigma_hat);
    if (grid.empty()) grid = default_grid(sigma_hat);
    for (double g : grid)
        if (!(g > 0.0)) throw InvalidParameter("select_lambda_dens: grid values must be positive");
    std::sort(grid.begin(), grid.end(), std::greater<>());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    auto path = clime_path(sigma_hat, grid);
    TuningResult result;
    result.lambda_grid = grid;
    result.densities.resize(grid.size());
    double best_gap = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!path[k]) continue;
        result.densities[k] = edge_density(path[k]->omega, zero_tol);
        if (!result.densities[k]) continue;
        const double gap = std::abs(*result.densities[k] - target_density);
        if (result.chosen < 0 || gap < best_gap - 1e-12) {
            result.chosen = static_cast<int>(k);
            best_gap = gap;
        }
    }
    if (result.chosen < 0) throw SolverError("select_lambda_dens: no lambda in the grid produced a usable estimate");
    result.solution = std::move(*path[result.chosen]);
    return result;
}

TuningResult select_lambda_dens(const Matrix& sigma_hat, const ClimeConfig& config)
{
    std::vector<double> grid = config.grid;
    if (grid.empty()) grid = default_grid(sigma_hat, config.grid_points, config.grid_min_ratio);
    return select_lambda_dens(sigma_hat, config.target_density, std::move(grid), config.zero_tol);
}

} // namespace diffnet::clime
