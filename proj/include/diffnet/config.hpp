#pragma once

#include "diffnet/clime.hpp"
#include "diffnet/sgmcp.hpp"
#include "diffnet/simgen.hpp"

#include <cstdint>
#include <string>

namespace diffnet::config {

struct SgmcpSettings
{
    sgmcp::GridSpec grid;
    int folds = 5;
    sgmcp::FitOptions fit;
    int screen_keep = 0; // 0 disables screening
};

enum class TauRule { Fixed, MaxTprTdr };

struct EnsembleSettings
{
    int B = 100;
    double tau = 0.5;
    TauRule tau_rule = TauRule::MaxTprTdr; // evaluation only; needs ground truth
    bool tune_per_replicate = false;
};

struct ExperimentConfig
{
    simgen::StudyDesign simulation;
    clime::ClimeConfig clime;
    SgmcpSettings sgmcp;
    EnsembleSettings ensemble;
    bool baseline = true; // also run the per-dataset lambda1 = 0 fit
    int replications = 1;
    std::string out = "out";
    std::uint64_t seed = 1;
    int threads = 0; // 0 keeps the OpenMP default

    void validate() const;
};

/// p=30, q=30, M=3, 30+30 subjects, B=50, 10 replications, hub graphs.
ExperimentConfig desk_profile();

/// Parses TOML text on top of `base`; unknown keys and wrongly typed values
/// raise InvalidParameter. `origin` names the source in messages.
ExperimentConfig parse_config(const std::string& text, const ExperimentConfig& base = {},
                              const std::string& origin = "config");

ExperimentConfig load_config(const std::string& path, const ExperimentConfig& base = {});

/// TOML rendering that parse_config reads back to the same values.
std::string to_toml(const ExperimentConfig& config);

} // namespace diffnet::config
