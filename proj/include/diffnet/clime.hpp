#pragma once

#include "diffnet/common.hpp"

#include <optional>
#include <span>
#include <vector>

namespace diffnet::clime {

struct ClimeSolution
{
    Matrix omega;      // symmetrized estimate
    Matrix raw_omega;  // column solutions before symmetrization
    double lambda = 0.0;
    double feasibility_gap = 0.0; // max_j ||sigma * raw_omega_j - e_j||_inf
};

struct TuningResult
{
    std::vector<double> lambda_grid;              // strictly decreasing
    std::vector<std::optional<double>> densities; // empty when the solve failed
    int chosen = -1;
    ClimeSolution solution;                       // estimate at lambda_grid[chosen]
};

struct ClimeConfig
{
    double target_density = 0.5;
    int grid_points = 20;
    double grid_min_ratio = 0.01;
    std::vector<double> grid; // overrides the default grid when non-empty
    double zero_tol = 1e-8;
};

/// Spatial sample covariance of a p x q scan (columns are time points).
Matrix sample_covariance(const Matrix& x);

/// Keeps, for every off-diagonal pair, the entry of smaller magnitude.
/// Ties keep the upper-triangular entry.
Matrix symmetrize_min_magnitude(const Matrix& raw);

/// Solves min ||w||_1 s.t. ||sigma w - e_j||_inf <= lambda for every column j.
/// Throws SolverError naming the first infeasible column.
ClimeSolution clime_solve(const Matrix& sigma_hat, double lambda);

/// Solutions along a strictly decreasing lambda sequence, warm-starting each
/// column LP from the previous optimum. Entries are empty once some column
/// becomes infeasible (the feasible set only shrinks as lambda decreases).
std::vector<std::optional<ClimeSolution>> clime_path(const Matrix& sigma_hat, std::span<const double> lambdas);

/// `points` log-spaced values in [min_ratio, 1] * max|sigma|, decreasing.
std::vector<double> default_grid(const Matrix& sigma_hat, int points = 20, double min_ratio = 0.01);

/// Fraction of off-diagonal pairs whose partial correlation exceeds zero_tol
/// in magnitude. Empty if the diagonal is not strictly positive.
std::optional<double> edge_density(const Matrix& omega, double zero_tol = 1e-8);

/// Picks the lambda whose estimate has density closest to the target; ties go
/// to the larger lambda.
TuningResult select_lambda_dens(const Matrix& sigma_hat, double target_density = 0.5,
                                std::vector<double> grid = {}, double zero_tol = 1e-8);

TuningResult select_lambda_dens(const Matrix& sigma_hat, const ClimeConfig& config);

} // namespace diffnet::clime
