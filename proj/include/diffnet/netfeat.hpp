#pragma once

#include "diffnet/clime.hpp"
#include "diffnet/common.hpp"
#include "diffnet/simgen.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace diffnet::netfeat {

/// Bijection between feature positions and node pairs (i, j), i < j, in the
/// order (0,1), (0,2), ..., (0,p-1), (1,2), ... Labels are 1-based "i_j".
class EdgeIndex
{
public:
    explicit EdgeIndex(int p);

    int p() const { return p_; }
    int size() const { return static_cast<int>(pairs_.size()); }
    int position(int i, int j) const;
    const std::pair<int, int>& pair(int pos) const { return pairs_.at(static_cast<std::size_t>(pos)); }
    std::string label(int pos) const;

private:
    int p_;
    std::vector<std::pair<int, int>> pairs_;
};

/// Number of node pairs for p nodes.
constexpr int edge_count(int p) { return p * (p - 1) / 2; }

/// D^{-1/2} omega D^{-1/2}, D = diag(omega); off-diagonals clamped to
/// [-1 + 1e-6, 1 - 1e-6].
Matrix partial_correlation(const Matrix& omega);

/// 0.5 * log((1 + r) / (1 - r)) with |r| clamped to 1 - 1e-6.
double fisher_transform(double r);

/// Upper-triangular entries in EdgeIndex order.
Vector upper_triangle(const Matrix& m);

struct EdgeFeatureVector
{
    Vector w;
    simgen::Group group = simgen::Group::Case;
    int dataset_id = 0;
    double lambda = 0.0; // CLIME tuning value chosen for this subject
};

EdgeFeatureVector features_from_scan(const simgen::SubjectScan& scan, const clime::ClimeConfig& config);

/// OpenMP over subjects; results are in input order.
std::vector<EdgeFeatureVector> features_for_scans(std::span<const simgen::SubjectScan> scans,
                                                  const clime::ClimeConfig& config);

/// Reference loop, kept for tests and benchmarks.
std::vector<EdgeFeatureVector> features_for_scans_serial(std::span<const simgen::SubjectScan> scans,
                                                         const clime::ClimeConfig& config);

} // namespace diffnet::netfeat
