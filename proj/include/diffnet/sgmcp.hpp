#pragma once

#include "diffnet/common.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace diffnet::sgmcp {

/// Tuning of the sparse group MCP: lambda1/gamma1 act on the row norms of the
/// coefficient matrix, lambda2/gamma2 on its individual entries.
struct PenaltyParams
{
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double gamma1 = 10.0;
    double gamma2 = 10.0;

    void validate() const;
};

/// Samples of one dataset. Labels are 0/1 (1 = case).
struct DatasetBlock
{
    Matrix features;    // n x d edge features
    Matrix confounders; // n x L, L may be zero
    Vector labels;      // n

    int n() const { return static_cast<int>(labels.size()); }
};

struct JointDesign
{
    std::vector<DatasetBlock> datasets;

    int M() const { return static_cast<int>(datasets.size()); }
    int d() const;
    int L() const;
    int N() const;
    void validate() const;
};

/// Coefficients on the original feature scale. Each theta_eta entry holds the
/// dataset's intercept followed by its L confounder coefficients; theta_beta
/// is d x M. objective_trace is measured on the fitting scale (standardized
/// features when FitOptions::standardize is set).
struct CoefficientFit
{
    std::vector<Vector> theta_eta;
    Matrix theta_beta;
    std::vector<double> objective_trace;
    bool converged = false;
    int iterations = 0;
    PenaltyParams params;
};

struct FitOptions
{
    double tol = 1e-5;       // max coefficient change between MM iterations
    int max_iter = 500;      // MM iterations
    double inner_tol = 1e-6; // coordinate descent sweeps
    int max_sweeps = 100;
    bool standardize = true; // per-dataset mean 0 / variance 1 feature columns
    /// Also stop once an MM iteration lowers the objective by less than
    /// objective_tol * max(1, |objective|). Such fits keep converged = false.
    /// Separable labels have no finite minimizer under MCP, so without this
    /// the coefficients drift until max_iter. 0 disables the check.
    double objective_tol = 1e-9;
};

/// rho(t; lambda, gamma) = lambda * int_0^|t| (1 - x / (gamma lambda))_+ dx.
double mcp(double t, double lambda, double gamma);

/// d/dt rho(t) for t >= 0, i.e. (lambda - t / gamma)_+.
double mcp_derivative(double t, double lambda, double gamma);

/// sum_l rho(||row_l||_2; sqrt(M) lambda1, gamma1) + sum_{l,m} rho(|theta_lm|; lambda2, gamma2).
double penalty_total(const Matrix& theta_beta, const PenaltyParams& params);

/// Joint negative log-likelihood averaged over all N samples.
double negative_log_likelihood(const JointDesign& design, std::span<const Vector> theta_eta, const Matrix& theta_beta);

struct Gradient
{
    std::vector<Vector> eta;
    Matrix beta;
};

/// Analytic gradient of negative_log_likelihood.
Gradient likelihood_gradient(const JointDesign& design, std::span<const Vector> theta_eta, const Matrix& theta_beta);

/// Penalized fit by majorization-minimization with block coordinate descent.
/// `warm_start` (original scale) replaces the default start of zero feature
/// coefficients and null-model intercept/confounder coefficients.
CoefficientFit fit(const JointDesign& design, const PenaltyParams& params, const FitOptions& options = {},
                   const CoefficientFit* warm_start = nullptr);

/// Fits along `path` in order, warm-starting every fit from the previous one.
std::vector<CoefficientFit> fit_path(const JointDesign& design, std::span<const PenaltyParams> path,
                                     const FitOptions& options = {});

/// (1/N) sum_k W_kl (Z_k - p_k) at the confounder-only fit, d x M, on the
/// fitting scale.
Matrix null_gradient(const JointDesign& design, const FitOptions& options = {});

/// Smallest lambda2 for which zero feature coefficients satisfy the
/// coordinate-wise stationarity conditions when lambda1 = 0.
double lambda2_max(const JointDesign& design, const FitOptions& options = {});

/// Smallest lambda1 for which every row passes the group-zero condition at
/// the given lambda2.
double lambda1_max(const JointDesign& design, double lambda2, const FitOptions& options = {});

struct GridSpec
{
    int n_lambda1 = 10;
    int n_lambda2 = 10;
    double min_ratio = 0.05;
    double gamma = 10.0;
    std::vector<double> gamma_grid;  // searched jointly when non-empty
    bool lambda1_zero = false;       // element-wise penalty only
    std::vector<std::pair<double, double>> pairs; // explicit (lambda1, lambda2), overrides the log grid
};

struct CvResult
{
    PenaltyParams best;
    std::vector<PenaltyParams> grid;
    std::vector<double> scores; // mean validation negative log-likelihood, aligned with grid
};

/// The candidate grid cross_validate would search on `design`.
std::vector<PenaltyParams> build_grid(const JointDesign& design, const GridSpec& spec, const FitOptions& options = {});

/// Stratified K-fold cross-validation within each dataset x class.
CvResult cross_validate(const JointDesign& design, const GridSpec& spec, int folds = 5, std::uint64_t seed = 1,
                        const FitOptions& options = {});

struct ScreenResult
{
    std::vector<int> kept; // ascending feature positions
    Vector utility;        // per original feature
    JointDesign design;    // reduced to the kept columns
};

/// Sure independence screening by pooled absolute correlation with the
/// labels after per-dataset standardization.
ScreenResult sis_screen(const JointDesign& design, int keep);

struct Prediction
{
    double probability = 0.5;
    int label = 0;
};

/// dataset_id is 0-based.
Prediction predict(const CoefficientFit& fit, const Vector& confounders, const Vector& features, int dataset_id,
                   double threshold = 0.5);

/// Row subset of every dataset; rows[m] lists the sample indices kept from dataset m.
JointDesign subset(const JointDesign& design, const std::vector<std::vector<int>>& rows);

/// Single dataset m as an M = 1 design.
JointDesign single_dataset(const JointDesign& design, int m);

/// Number of rows of theta_beta with any nonzero entry.
int nonzero_rows(const Matrix& theta_beta);

} // namespace diffnet::sgmcp
