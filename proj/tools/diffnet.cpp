#include "diffnet/config.hpp"
#include "diffnet/io.hpp"
#include "diffnet/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>

namespace fs = std::filesystem;
using namespace diffnet;

namespace {

struct Common
{
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string out;
    std::string study;
};

void add_common(CLI::App* cmd, Common& c, bool study)
{
    cmd->add_option("--config", c.config_path, "TOML experiment configuration (defaults to the desk profile)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "Base RNG seed");
    cmd->add_option("--threads", c.threads, "Worker threads (overrides DIFFNET_THREADS and the config)")
        ->check(CLI::NonNegativeNumber);
    if (study) {
        cmd->add_option("--study", c.study, "Study directory (a replication directory written by simulate)")
            ->required();
        cmd->add_option("--out", c.out, "Where error.json and run.log go (defaults to the study directory)");
    } else {
        cmd->add_option("--out", c.out, "Output directory");
    }
}

config::ExperimentConfig resolve(const Common& c)
{
    config::ExperimentConfig cfg = config::desk_profile();
    if (!c.config_path.empty()) cfg = config::load_config(c.config_path, cfg);
    if (const char* env = std::getenv("DIFFNET_THREADS"); env && *env) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 0 || v > 4096) throw InvalidParameter("DIFFNET_THREADS must be a nonnegative integer");
        cfg.threads = static_cast<int>(v);
    }
    if (c.threads) cfg.threads = *c.threads;
    if (c.seed) cfg.seed = *c.seed;
    if (!c.out.empty() && c.study.empty()) cfg.out = c.out;
    cfg.validate();
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
    return cfg;
}

class RunLog
{
public:
    void open(const fs::path& dir)
    {
        std::error_code ec;
        fs::create_directories(dir, ec);
        file_.open(dir / "run.log", std::ios::app);
    }

    void operator()(const std::string& line)
    {
        std::lock_guard lock(mu_);
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%S", std::localtime(&now));
        if (file_) file_ << stamp << ' ' << line << '\n' << std::flush;
        std::cerr << line << '\n';
    }

private:
    std::ofstream file_;
    std::mutex mu_;
};

int fail(const std::string& stage, const std::exception& e, const fs::path& dir)
{
    std::string type = "error";
    int code = 1;
    if (dynamic_cast<const InvalidParameter*>(&e)) {
        type = "invalid_parameter";
        code = 2;
    } else if (dynamic_cast<const IoError*>(&e)) {
        type = "io_error";
        code = 3;
    } else if (dynamic_cast<const SolverError*>(&e)) {
        type = "solver_error";
        code = 4;
    }
    const nlohmann::json record = {{"status", "error"}, {"stage", stage}, {"type", type}, {"message", e.what()}};
    std::cerr << record.dump() << '\n';
    if (!dir.empty()) {
        try {
            io::write_text(dir / "error.json", record.dump(2) + "\n");
        } catch (...) {
        }
    }
    return code;
}

void clear_error(const fs::path& dir)
{
    std::error_code ec;
    fs::remove(dir / "error.json", ec);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Joint differential network estimation across datasets"};
    app.require_subcommand(1);

    Common sim, feat, fit, ens, eval, pipe;
    auto* c_sim = app.add_subcommand("simulate", "Generate simulated studies, one directory per replication");
    add_common(c_sim, sim, false);
    auto* c_feat = app.add_subcommand("features", "Whiten scans and compute per-subject edge features");
    add_common(c_feat, feat, true);
    auto* c_fit = app.add_subcommand("fit", "Cross-validate and fit the joint model (and the separate baseline)");
    add_common(c_fit, fit, true);
    auto* c_ens = app.add_subcommand("ensemble", "Bootstrap edge weights and thresholded supports");
    add_common(c_ens, ens, true);
    auto* c_eval = app.add_subcommand("evaluate", "Score supports against the simulated truth");
    add_common(c_eval, eval, true);
    auto* c_pipe = app.add_subcommand("pipeline", "Run every stage for every replication and summarize");
    add_common(c_pipe, pipe, false);

    CLI11_PARSE(app, argc, argv);

    std::string stage = "config";
    fs::path err_dir;
    RunLog log;
    auto logger = [&](const std::string& s) { log(s); };
    try {
        if (c_sim->parsed()) {
            const auto cfg = resolve(sim);
            err_dir = cfg.out;
            log.open(err_dir);
            stage = "simulate";
            io::write_text(fs::path(cfg.out) / "config.toml", config::to_toml(cfg));
            for (int r = 1; r <= cfg.replications; ++r) {
                const auto dir = pipeline::replication_dir(cfg.out, r);
                pipeline::write_study(pipeline::simulate_study(cfg, r), r, dir);
                log("simulate: wrote " + dir.string());
            }
        } else if (c_pipe->parsed()) {
            const auto cfg = resolve(pipe);
            err_dir = cfg.out;
            log.open(err_dir);
            stage = "pipeline";
            const auto summary = pipeline::run_pipeline(cfg, logger);
            std::cout << metrics::format_summary(summary);
        } else {
            struct Choice
            {
                CLI::App* cmd;
                Common* opts;
                const char* name;
            };
            const Choice choices[] = {{c_feat, &feat, "features"}, {c_fit, &fit, "fit"}, {c_ens, &ens, "ensemble"},
                                      {c_eval, &eval, "evaluate"}};
            for (const auto& ch : choices) {
                if (!ch.cmd->parsed()) continue;
                err_dir = ch.opts->out.empty() ? fs::path(ch.opts->study) : fs::path(ch.opts->out);
                auto cfg = resolve(*ch.opts);
                log.open(err_dir);
                stage = ch.name;
                const fs::path study = ch.opts->study;
                if (!fs::is_directory(study)) throw IoError(study.string() + ": not a directory");
                // replications of an experiment use the same per-replication seed as the pipeline
                if (fs::exists(study / "manifest.json")) {
                    const int r = io::read_manifest(study / "manifest.json").replication;
                    if (r > 0) cfg.seed = pipeline::replication_seed(cfg.seed, r);
                }
                if (stage == "features") pipeline::compute_features(study, cfg.clime, logger);
                else if (stage == "fit") pipeline::stage_fit(study, cfg, logger);
                else if (stage == "ensemble") pipeline::stage_ensemble(study, cfg, logger);
                else {
                    const auto rows = pipeline::stage_evaluate(study, cfg, logger);
                    std::cout << metrics::format_summary(pipeline::summarize(rows));
                }
            }
        }
        if (!err_dir.empty()) clear_error(err_dir);
    } catch (const std::exception& e) {
        return fail(stage, e, err_dir);
    }
    return 0;
}
