#pragma once

#include "diffnet/common.hpp"
#include "diffnet/rng.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace diffnet::simgen {

enum class GraphKind { Hub, SmallWorld };

/// Undirected edge with 0-based endpoints, i < j.
struct Edge
{
    int i = 0;
    int j = 0;

    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct GraphStructure
{
    int p = 0;
    std::vector<Edge> edges; // sorted, unique
    GraphKind kind = GraphKind::Hub;
};

/// Precision matrices of the two groups of one dataset.
/// delta == omega_x - omega_y entrywise.
struct PrecisionPair
{
    Matrix omega_x;
    Matrix omega_y;
    Matrix delta;
    std::vector<Edge> flip_set; // i < j
    double rho = 0.0;
};

enum class Group { Case, Control };

/// One p x q spatial-temporal observation. dataset_id is 0-based.
struct SubjectScan
{
    Matrix data;
    Group group = Group::Case;
    int dataset_id = 0;
    Vector confounders;
};

struct StudyDesign
{
    int datasets = 3;
    int p = 100;
    int q = 30;
    int n_case = 30;
    int n_control = 30;
    std::vector<double> rho_list{0.4, 0.4, 0.4};
    double temporal_rho_case = 0.5;
    double temporal_rho_control = 0.6;
    GraphKind structure = GraphKind::Hub;
    int hub_groups = 5;
    int sw_neighbors = 10;
    double sw_rewire = 0.05;
    /// When false, each dataset draws its own base graph and edge values.
    bool shared_base = true;
    std::uint64_t seed = 1;

    void validate() const;
};

struct Study
{
    StudyDesign design;
    std::vector<GraphStructure> graphs;        // one per dataset (identical when shared)
    std::vector<PrecisionPair> pairs;          // one per dataset
    std::vector<std::vector<SubjectScan>> scans; // [dataset][cases..., controls...]
};

/// Entry (i,j) = rho^|i-j|.
Matrix ar_covariance(int q, double rho);

/// Blocks of p / n_groups consecutive nodes (remainder joins the last block);
/// the first node of each block is joined to every other node in the block.
GraphStructure generate_hub_graph(int p, int n_groups);

/// Watts-Strogatz ring lattice with `neighbors` nearest neighbours per node and
/// independent rewiring of each lattice edge with probability rewire_prob.
GraphStructure generate_small_world(int p, int neighbors, double rewire_prob, Engine& rng);

/// Symmetric matrix with U([-0.5,-0.3] u [0.3,0.5]) values on the graph edges
/// and zero elsewhere, including the diagonal.
Matrix fill_precision(const GraphStructure& graph, Engine& rng);

/// Sign-flips the edges inside the leading floor(rho*p) block to get the
/// control precision, then shifts each matrix by (|lambda_min| + 0.5) I.
PrecisionPair make_pair(const Matrix& omega_base, double rho);

/// Draws mean + A Z B^T with A A^T = sigma_s and B B^T = sigma_t.
class MatrixNormalSampler
{
public:
    MatrixNormalSampler(const Matrix& sigma_s, const Matrix& sigma_t);

    Matrix draw(const Matrix& mean, Engine& rng) const;
    Matrix draw(Engine& rng) const;

private:
    Matrix left_;
    Matrix right_t_;
};

Matrix sample_matrix_normal(const Matrix& mean, const Matrix& sigma_s, const Matrix& sigma_t, Engine& rng);

/// Symmetric inverse square root of an SPD matrix.
Matrix inverse_sqrt(const Matrix& spd);

/// x * sigma_t^{-1/2}.
Matrix whiten(const Matrix& x, const Matrix& sigma_t);

/// Lag-1 autocorrelation of the row-demeaned series, clamped to [-0.95, 0.95].
double estimate_ar1(const Matrix& x);

/// Flip-block bound floor(rho * p), robust to representation error in rho.
int flip_bound(double rho, int p);

Study generate_study(const StudyDesign& design);

/// Upper-triangular support of delta, as sorted edges.
std::vector<Edge> support_of(const Matrix& delta, double tol = 0.0);

} // namespace diffnet::simgen
