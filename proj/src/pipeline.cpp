#include "diffnet/pipeline.hpp"
#include "diffnet/netfeat.hpp"
#include "diffnet/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

namespace diffnet::pipeline {

using nlohmann::json;

namespace {

// Per-stage seeds derived from the run seed.
enum : std::uint64_t { seed_cv = 101, seed_ensemble = 102, seed_baseline_cv = 103, seed_baseline_ensemble = 104 };

std::uint64_t derive(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0)
{
    Engine e = keyed_engine(seed, {tag, index});
    return e();
}

void say(const Logger& log, const std::string& msg)
{
    if (log) log(msg);
}

std::string numbered(const char* stem, int k, const char* ext)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%03d%s", stem, k, ext);
    return buf;
}

fs::path dataset_file(const fs::path& dir, int m)
{
    return dir / ("dataset_" + std::to_string(m) + ".csv");
}

std::vector<std::vector<simgen::Edge>> truth_of(const io::Manifest& mf, const fs::path& study_dir)
{
    std::vector<std::vector<simgen::Edge>> truth;
    for (std::size_t m = 0; m < mf.datasets.size(); ++m) {
        if (!mf.datasets[m].truth)
            throw InvalidParameter(study_dir.string() + ": dataset " + std::to_string(m + 1) +
                                   " has no ground truth; evaluate needs a simulated study");
        truth.push_back(*mf.datasets[m].truth);
    }
    return truth;
}

io::Manifest discover(const fs::path& study_dir)
{
    io::Manifest mf;
    const fs::path scans = study_dir / "scans";
    if (!fs::is_directory(scans)) throw IoError(study_dir.string() + ": no manifest.json and no scans directory");
    for (int m = 1;; ++m) {
        const fs::path dir = scans / ("dataset_" + std::to_string(m));
        if (!fs::is_directory(dir)) break;
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        io::DatasetEntry d;
        for (const auto& f : files) {
            const std::string name = f.filename().string();
            simgen::Group g;
            if (name.rfind("case", 0) == 0) g = simgen::Group::Case;
            else if (name.rfind("control", 0) == 0) g = simgen::Group::Control;
            else throw IoError(f.string() + ": scan file names must start with 'case' or 'control'");
            d.scans.push_back({fs::relative(f, study_dir).generic_string(), g});
        }
        mf.datasets.push_back(std::move(d));
    }
    if (mf.datasets.empty()) throw IoError(scans.string() + ": no dataset_1 directory");
    return mf;
}

sgmcp::GridSpec grid_of(const config::ExperimentConfig& c)
{
    return c.sgmcp.grid;
}

ensemble::EnsembleOptions ensemble_options(const config::ExperimentConfig& c, const sgmcp::GridSpec& grid)
{
    ensemble::EnsembleOptions o;
    o.B = c.ensemble.B;
    o.tune_per_replicate = c.ensemble.tune_per_replicate;
    o.grid = grid;
    o.folds = c.sgmcp.folds;
    o.fit = c.sgmcp.fit;
    return o;
}

FitOutcome tune_and_fit_grid(const sgmcp::JointDesign& design, const config::ExperimentConfig& config,
                             const sgmcp::GridSpec& grid, std::uint64_t seed)
{
    FitOutcome out;
    const sgmcp::JointDesign* work = &design;
    sgmcp::ScreenResult screen;
    const int keep = config.sgmcp.screen_keep;
    if (keep > 0 && keep < design.d()) {
        screen = sgmcp::sis_screen(design, keep);
        out.kept = screen.kept;
        work = &screen.design;
    }
    const auto candidates = sgmcp::build_grid(*work, grid, config.sgmcp.fit);
    if (candidates.size() == 1) {
        out.cv.grid = candidates;
        out.cv.best = candidates.front();
    } else {
        out.cv = sgmcp::cross_validate(*work, grid, config.sgmcp.folds, seed, config.sgmcp.fit);
    }
    out.fit = sgmcp::fit(*work, out.cv.best, config.sgmcp.fit);
    if (!out.kept.empty()) {
        Matrix full = Matrix::Zero(design.d(), design.M());
        for (std::size_t k = 0; k < out.kept.size(); ++k) full.row(out.kept[k]) = out.fit.theta_beta.row(static_cast<Eigen::Index>(k));
        out.fit.theta_beta = std::move(full);
    }
    return out;
}

void write_cv(const fs::path& path, const sgmcp::CvResult& cv)
{
    std::ostringstream o;
    o << "lambda1,lambda2,gamma1,gamma2,score\n";
    for (std::size_t g = 0; g < cv.grid.size(); ++g) {
        const auto& pp = cv.grid[g];
        o << io::format_double(pp.lambda1) << ',' << io::format_double(pp.lambda2) << ','
          << io::format_double(pp.gamma1) << ',' << io::format_double(pp.gamma2) << ','
          << (g < cv.scores.size() ? io::format_double(cv.scores[g]) : "NA") << '\n';
    }
    io::write_text(path, o.str());
}

void write_ensemble_meta(const fs::path& path, const ensemble::EdgeWeightMatrix& w,
                         const std::vector<sgmcp::PenaltyParams>& params, std::uint64_t seed)
{
    json j;
    j["B"] = w.B;
    j["requested"] = w.requested;
    j["p"] = w.p;
    j["seed"] = seed;
    json ps = json::array();
    for (const auto& pp : params)
        ps.push_back({{"lambda1", pp.lambda1}, {"lambda2", pp.lambda2}, {"gamma1", pp.gamma1}, {"gamma2", pp.gamma2}});
    j["params"] = ps;
    io::write_text(path, j.dump(2) + "\n");
}

int read_ensemble_B(const fs::path& path)
{
    try {
        return json::parse(io::read_text(path)).at("B").get<int>();
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": malformed ensemble record: " + e.what());
    }
}

void write_support(const fs::path& dir, const ensemble::SupportSet& s)
{
    for (std::size_t m = 0; m < s.edges.size(); ++m) io::write_edges(dataset_file(dir, static_cast<int>(m + 1)), s.edges[m]);
}

} // namespace

std::uint64_t replication_seed(std::uint64_t seed, int r)
{
    Engine e = keyed_engine(seed, {stream::replication, static_cast<std::uint64_t>(r)});
    return e();
}

fs::path replication_dir(const fs::path& out, int r)
{
    return out / numbered("rep", r, "");
}

simgen::Study simulate_study(const config::ExperimentConfig& config, int r)
{
    simgen::StudyDesign design = config.simulation;
    design.seed = replication_seed(config.seed, r);
    return simgen::generate_study(design);
}

void write_study(const simgen::Study& study, int r, const fs::path& dir)
{
    const auto& d = study.design;
    io::Manifest mf;
    mf.p = d.p;
    mf.q = d.q;
    mf.design = d;
    mf.temporal_rho_case = d.temporal_rho_case;
    mf.temporal_rho_control = d.temporal_rho_control;
    mf.replication = r;
    for (int m = 0; m < d.datasets; ++m) {
        io::DatasetEntry e;
        int ncase = 0, ncontrol = 0;
        for (const auto& scan : study.scans[m]) {
            const bool is_case = scan.group == simgen::Group::Case;
            const std::string name = numbered(is_case ? "case" : "control", is_case ? ++ncase : ++ncontrol, ".csv");
            const std::string rel = "scans/dataset_" + std::to_string(m + 1) + "/" + name;
            io::write_matrix_csv(dir / rel, scan.data);
            e.scans.push_back({rel, scan.group});
        }
        e.truth = simgen::support_of(study.pairs[m].delta);
        e.rho = study.pairs[m].rho;
        io::write_edges(dataset_file(dir / "truth", m + 1), *e.truth);
        mf.datasets.push_back(std::move(e));
    }
    io::write_manifest(dir / "manifest.json", mf);
}

std::vector<io::FeatureTable> compute_features(const fs::path& study_dir, const clime::ClimeConfig& config,
                                               const Logger& log)
{
    const fs::path manifest_path = study_dir / "manifest.json";
    io::Manifest mf;
    bool known_temporal = false;
    if (fs::exists(manifest_path)) {
        mf = io::read_manifest(manifest_path);
        known_temporal = mf.temporal_rho_case && mf.temporal_rho_control;
    } else {
        warn(study_dir.string() + ": no manifest.json; whitening with per-subject AR(1) estimates");
        mf = discover(study_dir);
    }
    if (mf.datasets.empty()) throw IoError(study_dir.string() + ": study has no datasets");
    if (!known_temporal && fs::exists(manifest_path))
        warn(manifest_path.string() + ": no temporal AR parameters; whitening with per-subject AR(1) estimates");

    std::vector<io::FeatureTable> tables;
    for (std::size_t m = 0; m < mf.datasets.size(); ++m) {
        const auto& entry = mf.datasets[m];
        std::vector<simgen::SubjectScan> scans;
        io::FeatureTable t;
        std::map<double, Matrix> temporal;
        for (const auto& s : entry.scans) {
            const fs::path file = study_dir / s.file;
            Matrix x = io::read_matrix_csv(file);
            if (mf.p > 0 && (x.rows() != mf.p || x.cols() != mf.q)) {
                std::ostringstream msg;
                msg << file.string() << ": expected a " << mf.p << " x " << mf.q << " scan, found " << x.rows() << " x "
                    << x.cols();
                throw IoError(msg.str());
            }
            if (x.cols() < 2) throw IoError(file.string() + ": a scan needs at least two time points");
            if (!scans.empty() && x.rows() != scans.front().data.rows())
                throw IoError(file.string() + ": scan has a different number of regions than the rest of the dataset");
            double rho;
            if (known_temporal) rho = s.group == simgen::Group::Case ? *mf.temporal_rho_case : *mf.temporal_rho_control;
            else rho = simgen::estimate_ar1(x);
            auto it = temporal.find(rho);
            if (it == temporal.end()) it = temporal.emplace(rho, simgen::ar_covariance(static_cast<int>(x.cols()), rho)).first;
            simgen::SubjectScan scan;
            scan.data = simgen::whiten(x, it->second);
            scan.group = s.group;
            scan.dataset_id = static_cast<int>(m);
            scans.push_back(std::move(scan));
            t.subjects.push_back(fs::path(s.file).stem().string());
            t.dataset.push_back(static_cast<int>(m + 1));
            t.group.push_back(s.group);
        }
        if (scans.empty()) throw IoError(study_dir.string() + ": dataset " + std::to_string(m + 1) + " has no scans");
        say(log, "features: dataset " + std::to_string(m + 1) + ", " + std::to_string(scans.size()) + " subjects");
        const auto feats = netfeat::features_for_scans(scans, config);
        t.p = static_cast<int>(scans.front().data.rows());
        t.features.resize(static_cast<Eigen::Index>(feats.size()), netfeat::edge_count(t.p));
        t.confounders.resize(static_cast<Eigen::Index>(feats.size()), 0);
        for (std::size_t k = 0; k < feats.size(); ++k) t.features.row(static_cast<Eigen::Index>(k)) = feats[k].w.transpose();
        io::write_features(dataset_file(study_dir / "features", static_cast<int>(m + 1)), t);
        tables.push_back(std::move(t));
    }
    return tables;
}

sgmcp::JointDesign load_design(const fs::path& study_dir, int* p)
{
    std::vector<io::FeatureTable> tables;
    for (int m = 1;; ++m) {
        const fs::path f = dataset_file(study_dir / "features", m);
        if (!fs::exists(f)) break;
        tables.push_back(io::read_features(f));
        if (tables.back().p != tables.front().p) throw IoError(f.string() + ": p differs from dataset 1");
    }
    if (tables.empty()) throw IoError((study_dir / "features").string() + ": no dataset_1.csv; run features first");
    if (p) *p = tables.front().p;
    return io::design_from_tables(tables);
}

FitOutcome tune_and_fit(const sgmcp::JointDesign& design, const config::ExperimentConfig& config, std::uint64_t seed)
{
    return tune_and_fit_grid(design, config, grid_of(config), derive(seed, seed_cv));
}

std::vector<FitOutcome> tune_and_fit_baseline(const sgmcp::JointDesign& design, const config::ExperimentConfig& config,
                                              std::uint64_t seed)
{
    sgmcp::GridSpec grid = grid_of(config);
    grid.lambda1_zero = true;
    grid.pairs.clear();
    std::vector<FitOutcome> out;
    for (int m = 0; m < design.M(); ++m)
        out.push_back(tune_and_fit_grid(sgmcp::single_dataset(design, m), config, grid,
                                        derive(seed, seed_baseline_cv, static_cast<std::uint64_t>(m))));
    return out;
}

ensemble::EdgeWeightMatrix ensemble_for(const sgmcp::JointDesign& design, const sgmcp::PenaltyParams& params,
                                        const std::vector<int>& kept, int p, const config::ExperimentConfig& config,
                                        std::uint64_t seed)
{
    const auto opts = ensemble_options(config, grid_of(config));
    const std::uint64_t s = derive(seed, seed_ensemble);
    if (kept.empty()) return ensemble::run_ensemble(design, params, p, s, opts);

    sgmcp::JointDesign reduced = design;
    for (auto& b : reduced.datasets) {
        Matrix w(b.n(), static_cast<Eigen::Index>(kept.size()));
        for (std::size_t k = 0; k < kept.size(); ++k) w.col(static_cast<Eigen::Index>(k)) = b.features.col(kept[k]);
        b.features = std::move(w);
    }
    const auto part = ensemble::run_ensemble(reduced, params, 0, s, opts);
    ensemble::EdgeWeightMatrix out = part;
    out.p = p;
    out.counts = Eigen::MatrixXi::Zero(design.d(), design.M());
    for (std::size_t k = 0; k < kept.size(); ++k) out.counts.row(kept[k]) = part.counts.row(static_cast<Eigen::Index>(k));
    out.psi = out.counts.cast<double>() / static_cast<double>(out.B);
    return out;
}

ensemble::EdgeWeightMatrix baseline_ensemble_for(const sgmcp::JointDesign& design, const std::vector<FitOutcome>& fits,
                                                 int p, const config::ExperimentConfig& config, std::uint64_t seed)
{
    if (static_cast<int>(fits.size()) != design.M()) throw InvalidParameter("baseline_ensemble_for: one fit per dataset");
    ensemble::EdgeWeightMatrix out;
    out.p = p;
    out.counts = Eigen::MatrixXi::Zero(design.d(), design.M());
    out.B = config.ensemble.B;
    out.requested = config.ensemble.B;
    for (int m = 0; m < design.M(); ++m) {
        config::ExperimentConfig c = config;
        c.sgmcp.grid.lambda1_zero = true;
        c.sgmcp.grid.pairs.clear();
        const auto part = ensemble_for(sgmcp::single_dataset(design, m), fits[m].cv.best, fits[m].kept, p, c,
                                       derive(seed, seed_baseline_ensemble, static_cast<std::uint64_t>(m)));
        out.counts.col(m) = part.counts.col(0);
        // a dataset with skipped replicates is rescaled by its own count
        out.B = std::min(out.B, part.B);
        out.psi.resize(design.d(), design.M());
        out.psi.col(m) = part.psi.col(0);
    }
    return out;
}

std::vector<io::ScoreRow> evaluate_psi(const std::string& method, const ensemble::EdgeWeightMatrix& psi,
                                       const std::vector<std::vector<simgen::Edge>>& truth,
                                       const config::ExperimentConfig& config)
{
    if (static_cast<Eigen::Index>(truth.size()) != psi.psi.cols())
        throw InvalidParameter("evaluate: truth and psi disagree on the number of datasets");
    std::vector<io::ScoreRow> rows;
    for (std::size_t m = 0; m < truth.size(); ++m) {
        const Vector col = psi.psi.col(static_cast<Eigen::Index>(m));
        double tau = config.ensemble.tau;
        if (config.ensemble.tau_rule == config::TauRule::MaxTprTdr) {
            if (truth[m].empty())
                warn("dataset " + std::to_string(m + 1) + " has no true differential edges; using the fixed tau");
            else
                tau = metrics::select_tau_max_tpr_tdr(col, truth[m], psi.p, psi.B);
        }
        ensemble::EdgeWeightMatrix single = psi;
        single.psi = col;
        const auto support = ensemble::threshold_support(single, tau);
        rows.push_back({method, static_cast<int>(m + 1), tau, metrics::score_support(truth[m], support.edges[0], psi.p)});
    }
    return rows;
}

void stage_fit(const fs::path& study_dir, const config::ExperimentConfig& config, const Logger& log)
{
    int p = 0;
    const auto design = load_design(study_dir, &p);
    say(log, "fit: M=" + std::to_string(design.M()) + ", d=" + std::to_string(design.d()) + ", N=" +
                 std::to_string(design.N()));
    const auto joint = tune_and_fit(design, config, config.seed);
    io::write_fit(study_dir / "fit.json", joint.fit, p);
    write_cv(study_dir / "cv.csv", joint.cv);
    say(log, "fit: lambda1=" + io::format_double(joint.cv.best.lambda1) + " lambda2=" +
                 io::format_double(joint.cv.best.lambda2) + ", " + std::to_string(sgmcp::nonzero_rows(joint.fit.theta_beta)) +
                 " nonzero rows");
    if (config.baseline) {
        const auto sep = tune_and_fit_baseline(design, config, config.seed);
        for (std::size_t m = 0; m < sep.size(); ++m) {
            io::write_fit(study_dir / "baseline" / numbered("fit_dataset", static_cast<int>(m + 1), ".json"), sep[m].fit, p);
            write_cv(study_dir / "baseline" / numbered("cv_dataset", static_cast<int>(m + 1), ".csv"), sep[m].cv);
        }
        say(log, "fit: baseline done");
    }
}

void stage_ensemble(const fs::path& study_dir, const config::ExperimentConfig& config, const Logger& log)
{
    int p = 0;
    const auto design = load_design(study_dir, &p);
    const fs::path fit_path = study_dir / "fit.json";
    if (!fs::exists(fit_path)) throw IoError(fit_path.string() + ": not found; run fit first");
    const auto joint = io::read_fit(fit_path);
    std::vector<int> kept;
    if (config.sgmcp.screen_keep > 0 && config.sgmcp.screen_keep < design.d())
        kept = sgmcp::sis_screen(design, config.sgmcp.screen_keep).kept;

    say(log, "ensemble: B=" + std::to_string(config.ensemble.B));
    const auto psi = ensemble_for(design, joint.params, kept, p, config, config.seed);
    io::write_psi(study_dir / "psi.csv", psi);
    write_ensemble_meta(study_dir / "ensemble.json", psi, {joint.params}, config.seed);
    write_support(study_dir / "support", ensemble::threshold_support(psi, config.ensemble.tau));
    if (psi.B < psi.requested)
        say(log, "ensemble: " + std::to_string(psi.requested - psi.B) + " replicates skipped");

    if (config.baseline) {
        std::vector<FitOutcome> sep;
        std::vector<sgmcp::PenaltyParams> params;
        for (int m = 1; m <= design.M(); ++m) {
            const fs::path f = study_dir / "baseline" / numbered("fit_dataset", m, ".json");
            if (!fs::exists(f)) throw IoError(f.string() + ": not found; run fit with baseline enabled");
            FitOutcome o;
            o.fit = io::read_fit(f);
            o.cv.best = o.fit.params;
            if (config.sgmcp.screen_keep > 0 && config.sgmcp.screen_keep < design.d())
                o.kept = sgmcp::sis_screen(sgmcp::single_dataset(design, m - 1), config.sgmcp.screen_keep).kept;
            params.push_back(o.fit.params);
            sep.push_back(std::move(o));
        }
        const auto bpsi = baseline_ensemble_for(design, sep, p, config, config.seed);
        io::write_psi(study_dir / "baseline" / "psi.csv", bpsi);
        write_ensemble_meta(study_dir / "baseline" / "ensemble.json", bpsi, params, config.seed);
        write_support(study_dir / "baseline" / "support", ensemble::threshold_support(bpsi, config.ensemble.tau));
        say(log, "ensemble: baseline done");
    }
}

std::vector<io::ScoreRow> stage_evaluate(const fs::path& study_dir, const config::ExperimentConfig& config,
                                         const Logger& log)
{
    const fs::path manifest = study_dir / "manifest.json";
    if (!fs::exists(manifest)) throw IoError(manifest.string() + ": not found; evaluate needs a simulated study");
    const auto truth = truth_of(io::read_manifest(manifest), study_dir);

    std::vector<io::ScoreRow> rows;
    auto one = [&](const std::string& method, const fs::path& dir) {
        const auto psi = io::read_psi(dir / "psi.csv", read_ensemble_B(dir / "ensemble.json"));
        const auto r = evaluate_psi(method, psi, truth, config);
        rows.insert(rows.end(), r.begin(), r.end());
        for (std::size_t m = 0; m < truth.size(); ++m)
            io::write_pr_curve(study_dir / "pr" / (method + "_dataset_" + std::to_string(m + 1) + ".csv"),
                               metrics::pr_curve(psi.psi.col(static_cast<Eigen::Index>(m)), truth[m], psi.p, psi.B));
    };
    one("joint", study_dir);
    if (config.baseline && fs::exists(study_dir / "baseline" / "psi.csv")) one("separate", study_dir / "baseline");
    io::write_scores(study_dir / "scores.csv", rows);
    say(log, "evaluate: " + std::to_string(rows.size()) + " score rows");
    return rows;
}

std::vector<metrics::SummaryRow> summarize(const std::vector<io::ScoreRow>& rows)
{
    struct Acc
    {
        double sum[3] = {0, 0, 0};
        int n[3] = {0, 0, 0};
        metrics::RecoveryScore counts;
    };
    std::vector<std::pair<std::string, int>> order;
    std::map<std::pair<std::string, int>, Acc> acc;
    for (const auto& r : rows) {
        const auto key = std::make_pair(r.method, r.dataset);
        if (!acc.count(key)) order.push_back(key);
        auto& a = acc[key];
        const std::optional<double>* rates[3] = {&r.score.tpr, &r.score.tnr, &r.score.tdr};
        for (int k = 0; k < 3; ++k)
            if (*rates[k]) {
                a.sum[k] += **rates[k];
                ++a.n[k];
            }
        a.counts.tp += r.score.tp;
        a.counts.fp += r.score.fp;
        a.counts.tn += r.score.tn;
        a.counts.fn += r.score.fn;
    }
    std::vector<metrics::SummaryRow> out;
    for (const auto& key : order) {
        const auto& a = acc[key];
        metrics::SummaryRow row{key.first, key.second, a.counts};
        std::optional<double>* rates[3] = {&row.score.tpr, &row.score.tnr, &row.score.tdr};
        for (int k = 0; k < 3; ++k) *rates[k] = a.n[k] ? std::optional<double>(a.sum[k] / a.n[k]) : std::nullopt;
        out.push_back(row);
    }
    return out;
}

std::vector<metrics::SummaryRow> run_pipeline(const config::ExperimentConfig& config, const Logger& log)
{
    config.validate();
    const fs::path out = config.out;
    io::write_text(out / "config.toml", config::to_toml(config));
    std::vector<io::ScoreRow> all;
    for (int r = 1; r <= config.replications; ++r) {
        const fs::path dir = replication_dir(out, r);
        say(log, "replication " + std::to_string(r) + " of " + std::to_string(config.replications));
        config::ExperimentConfig c = config;
        c.seed = replication_seed(config.seed, r);
        write_study(simulate_study(config, r), r, dir);
        compute_features(dir, c.clime, log);
        stage_fit(dir, c, log);
        stage_ensemble(dir, c, log);
        const auto rows = stage_evaluate(dir, c, log);
        all.insert(all.end(), rows.begin(), rows.end());
    }
    const auto summary = summarize(all);
    io::write_text(out / "summary.txt", metrics::format_summary(summary));
    std::ostringstream csv;
    csv << "method,dataset,tpr,tnr,tdr\n";
    for (const auto& s : summary)
        csv << s.method << ',' << s.dataset << ',' << metrics::format_rate(s.score.tpr, 6) << ','
            << metrics::format_rate(s.score.tnr, 6) << ',' << metrics::format_rate(s.score.tdr, 6) << '\n';
    io::write_text(out / "summary.csv", csv.str());
    return summary;
}

} // namespace diffnet::pipeline
