#pragma once

#include "diffnet/config.hpp"
#include "diffnet/ensemble.hpp"
#include "diffnet/io.hpp"
#include "diffnet/metrics.hpp"
#include "diffnet/sgmcp.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace diffnet::pipeline {

namespace fs = std::filesystem;

/// Progress sink; receives one line per stage event.
using Logger = std::function<void(const std::string&)>;

/// Seed of the study generated for replication r (1-based).
std::uint64_t replication_seed(std::uint64_t seed, int r);

/// <out>/rep_001, <out>/rep_002, ...
fs::path replication_dir(const fs::path& out, int r);

/// Study of replication r in memory.
simgen::Study simulate_study(const config::ExperimentConfig& config, int r);

/// Writes scans, truth edge lists and manifest.json into `dir`.
void write_study(const simgen::Study& study, int r, const fs::path& dir);

/// Whitens every scan and writes features/dataset_<m>.csv. Uses the
/// temporal AR parameters of the manifest when present, otherwise an AR(1)
/// estimate per subject (with a warning). Without a manifest the scans are
/// discovered under scans/dataset_<m>/{case,control}_*.csv.
std::vector<io::FeatureTable> compute_features(const fs::path& study_dir, const clime::ClimeConfig& config,
                                               const Logger& log = {});

/// Reads features/dataset_<m>.csv for m = 1, 2, ... into a joint design.
sgmcp::JointDesign load_design(const fs::path& study_dir, int* p = nullptr);

struct FitOutcome
{
    sgmcp::CvResult cv;
    sgmcp::CoefficientFit fit; // on the full design
    std::vector<int> kept;     // screened feature positions, empty when unscreened
};

/// Cross-validates, refits at the chosen parameters and maps coefficients of
/// screened-out features back as zeros.
FitOutcome tune_and_fit(const sgmcp::JointDesign& design, const config::ExperimentConfig& config,
                        std::uint64_t seed);

/// Per-dataset lambda1 = 0 fits, one outcome per dataset (M = 1 each).
std::vector<FitOutcome> tune_and_fit_baseline(const sgmcp::JointDesign& design, const config::ExperimentConfig& config,
                                 std::uint64_t seed);

/// Ensemble on the columns in `kept` (all columns when empty); screened-out
/// features get weight 0.
ensemble::EdgeWeightMatrix ensemble_for(const sgmcp::JointDesign& design, const sgmcp::PenaltyParams& params,
                                        const std::vector<int>& kept, int p, const config::ExperimentConfig& config,
                                        std::uint64_t seed);

/// Baseline ensemble: each dataset resampled and fitted on its own with its
/// own parameters.
ensemble::EdgeWeightMatrix baseline_ensemble_for(const sgmcp::JointDesign& design,
                                                 const std::vector<FitOutcome>& fits, int p,
                                                 const config::ExperimentConfig& config, std::uint64_t seed);

/// Scores of the thresholded Psi against the truth, one row per dataset.
/// tau follows config.ensemble.tau_rule.
std::vector<io::ScoreRow> evaluate_psi(const std::string& method, const ensemble::EdgeWeightMatrix& psi,
                                       const std::vector<std::vector<simgen::Edge>>& truth,
                                       const config::ExperimentConfig& config);

/// Stage drivers used by the CLI; each reads and writes files under study_dir.
void stage_fit(const fs::path& study_dir, const config::ExperimentConfig& config, const Logger& log = {});
void stage_ensemble(const fs::path& study_dir, const config::ExperimentConfig& config, const Logger& log = {});
std::vector<io::ScoreRow> stage_evaluate(const fs::path& study_dir, const config::ExperimentConfig& config,
                                         const Logger& log = {});

/// Mean rates over replications, per method and dataset.
std::vector<metrics::SummaryRow> summarize(const std::vector<io::ScoreRow>& rows);

/// simulate -> features -> fit -> ensemble (+ baseline) -> evaluate for every
/// replication, then summary.txt / summary.csv in config.out.
std::vector<metrics::SummaryRow> run_pipeline(const config::ExperimentConfig& config, const Logger& log = {});

} // namespace diffnet::pipeline
