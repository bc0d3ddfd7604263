#pragma once

#include "diffnet/common.hpp"
#include "diffnet/rng.hpp"
#include "diffnet/sgmcp.hpp"
#include "diffnet/simgen.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace diffnet::ensemble {

/// Bootstrap inclusion frequencies, d x M. counts(l, m) replicates had a
/// nonzero coefficient at feature l in dataset m; psi = counts / B.
struct EdgeWeightMatrix
{
    Matrix psi;
    Eigen::MatrixXi counts;
    int B = 0;          // replicates that contributed
    int requested = 0;  // replicates attempted
    int p = 0;          // nodes, for mapping feature positions to pairs
};

struct SupportSet
{
    std::vector<std::vector<simgen::Edge>> edges; // per dataset, 0-based, sorted
    double tau = 0.5;
};

struct EnsembleOptions
{
    int B = 100;
    /// Re-run cross-validation inside every replicate instead of reusing params.
    bool tune_per_replicate = false;
    sgmcp::GridSpec grid;
    int folds = 5;
    sgmcp::FitOptions fit;
    double max_failure_fraction = 0.1;
};

/// Resamples, within each dataset, the case rows and the control rows
/// separately with replacement, preserving both group sizes.
sgmcp::JointDesign stratified_bootstrap(const sgmcp::JointDesign& design, Engine& rng);

/// Replicate b draws from keyed_engine(seed, {bootstrap, b}), so the result
/// does not depend on the number of threads. OpenMP over replicates.
/// p = 0 skips the check that the features are the p(p-1)/2 node pairs.
EdgeWeightMatrix run_ensemble(const sgmcp::JointDesign& design, const sgmcp::PenaltyParams& params, int p,
                              std::uint64_t seed, const EnsembleOptions& options);

/// Same computation as run_ensemble in a plain loop.
EdgeWeightMatrix run_ensemble_serial(const sgmcp::JointDesign& design, const sgmcp::PenaltyParams& params, int p,
                                     std::uint64_t seed, const EnsembleOptions& options);

/// Pairs whose weight exceeds tau, per dataset.
SupportSet threshold_support(const EdgeWeightMatrix& weights, double tau = 0.5);

/// Nonzero pattern of a single fit, as pairs per dataset.
SupportSet support_of_fit(const Matrix& theta_beta, int p);

} // namespace diffnet::ensemble
