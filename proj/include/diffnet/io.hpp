#pragma once

#include "diffnet/common.hpp"
#include "diffnet/ensemble.hpp"
#include "diffnet/metrics.hpp"
#include "diffnet/sgmcp.hpp"
#include "diffnet/simgen.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace diffnet::io {

namespace fs = std::filesystem;

/// Headerless comma-separated numbers, one matrix row per line, %.17g.
void write_matrix_csv(const fs::path& path, const Matrix& m);
Matrix read_matrix_csv(const fs::path& path);

struct ScanEntry
{
    std::string file; // relative to the study directory
    simgen::Group group = simgen::Group::Case;
};

struct DatasetEntry
{
    std::vector<ScanEntry> scans;
    std::optional<std::vector<simgen::Edge>> truth; // 0-based in memory
    std::optional<double> rho;
};

/// Contents of manifest.json. Absent fields stay empty.
struct Manifest
{
    int p = 0;
    int q = 0;
    std::optional<simgen::StudyDesign> design;
    std::optional<double> temporal_rho_case;
    std::optional<double> temporal_rho_control;
    int replication = 0; // 1-based, 0 when not part of an experiment
    std::vector<DatasetEntry> datasets;
};

void write_manifest(const fs::path& path, const Manifest& manifest);
Manifest read_manifest(const fs::path& path);

/// Edge lists with header "i,j", 1-based on disk.
void write_edges(const fs::path& path, const std::vector<simgen::Edge>& edges);
std::vector<simgen::Edge> read_edges(const fs::path& path);

/// Subject-level edge features of one dataset.
struct FeatureTable
{
    int p = 0;
    std::vector<std::string> subjects;
    std::vector<int> dataset;  // 1-based, as on disk
    std::vector<simgen::Group> group;
    Matrix confounders;        // n x L
    Matrix features;           // n x p(p-1)/2
};

/// Header "subject,dataset,group[,q_1..q_L],1_2,1_3,...".
void write_features(const fs::path& path, const FeatureTable& table);
FeatureTable read_features(const fs::path& path);

/// Joint design from per-dataset tables (labels: case = 1).
sgmcp::JointDesign design_from_tables(const std::vector<FeatureTable>& tables);

/// Serialized fit: intercept/confounder vectors, sparse feature coefficients
/// as (edge label, dataset, value) triplets, parameters and trace.
void write_fit(const fs::path& path, const sgmcp::CoefficientFit& fit, int p);
sgmcp::CoefficientFit read_fit(const fs::path& path, int* p = nullptr);

/// Header "edge,1,...,M"; rows in feature order.
void write_psi(const fs::path& path, const ensemble::EdgeWeightMatrix& weights);
/// Reads psi values; B must be supplied since the CSV does not store it.
ensemble::EdgeWeightMatrix read_psi(const fs::path& path, int B);

struct ScoreRow
{
    std::string method;
    int dataset = 0; // 1-based
    double tau = 0.0;
    metrics::RecoveryScore score;
};

void write_scores(const fs::path& path, const std::vector<ScoreRow>& rows);
void write_pr_curve(const fs::path& path, const std::vector<metrics::PrPoint>& curve);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

/// %.17g
std::string format_double(double v);

} // namespace diffnet::io
