#include "diffnet/ensemble.hpp"
#include "diffnet/netfeat.hpp"

#include <algorithm>
#include <sstream>

namespace diffnet::ensemble {

sgmcp::JointDesign stratified_bootstrap(const sgmcp::JointDesign& design, Engine& rng)
{
    std::vector<std::vector<int>> rows(design.M());
    for (int m = 0; m < design.M(); ++m) {
        const auto& b = design.datasets[m];
        std::vector<int> cls[2];
        for (int k = 0; k < b.n(); ++k) cls[b.labels(k) != 0.0 ? 1 : 0].push_back(k);
        for (int c = 1; c >= 0; --c) {
            if (cls[c].empty()) {
                std::ostringstream msg;
                msg << "stratified_bootstrap: dataset " << m << " has no " << (c ? "case" : "control") << " samples";
                throw InvalidParameter(msg.str());
            }
            std::uniform_int_distribution<std::size_t> pick(0, cls[c].size() - 1);
            for (std::size_t r = 0; r < cls[c].size(); ++r) rows[m].push_back(cls[c][pick(rng)]);
        }
    }
    return sgmcp::subset(design, rows);
}

namespace {

void check(const sgmcp::JointDesign& design, int p, const EnsembleOptions& options)
{
    if (options.B < 1) throw InvalidParameter("run_ensemble: B must be at least 1");
    if (p != 0 && netfeat::edge_count(p) != design.d())
        throw InvalidParameter("run_ensemble: p does not match the number of feature columns");
    if (!(options.max_failure_fraction >= 0.0 && options.max_failure_fraction < 1.0))
        throw InvalidParameter("run_ensemble: max_failure_fraction must lie in [0,1)");
    design.validate();
}

// Support of one replicate, or nullopt if its fit failed.
std::optional<Eigen::MatrixXi> replicate(const sgmcp::JointDesign& design, const sgmcp::PenaltyParams& params,
                                         std::uint64_t seed, int b, const EnsembleOptions& options)
{
    try {
        Engine rng = keyed_engine(seed, {stream::bootstrap, static_cast<std::uint64_t>(b)});
        const sgmcp::JointDesign boot = stratified_bootstrap(design, rng);
        sgmcp::PenaltyParams pp = params;
        if (options.tune_per_replicate) {
            const std::uint64_t cv_seed = mix64(seed ^ mix64(static_cast<std::uint64_t>(b) + 1));
            pp = sgmcp::cross_validate(boot, options.grid, options.folds, cv_seed, options.fit).best;
        }
        const auto f = sgmcp::fit(boot, pp, options.fit);
        return (f.theta_beta.array() != 0.0).cast<int>().matrix();
    } catch (const std::exception& e) {
        std::ostringstream msg;
        msg << "bootstrap replicate " << b << " skipped: " << e.what();
        warn(msg.str());
        return std::nullopt;
    }
}

EdgeWeightMatrix aggregate(const std::vector<std::optional<Eigen::MatrixXi>>& parts, const sgmcp::JointDesign& design,
                           int p, const EnsembleOptions& options)
{
    EdgeWeightMatrix out;
    out.p = p;
    out.requested = options.B;
    out.counts = Eigen::MatrixXi::Zero(design.d(), design.M());
    for (const auto& s : parts) {
        if (!s) continue;
        out.counts += *s;
        ++out.B;
    }
    const int failed = out.requested - out.B;
    if (failed > options.max_failure_fraction * out.requested || out.B == 0) {
        std::ostringstream msg;
        msg << "run_ensemble: " << failed << " of " << out.requested << " replicates failed";
        throw SolverError(msg.str());
    }
    out.psi = out.counts.cast<double>() / static_cast<double>(out.B);
    return out;
}

} // namespace

EdgeWeightMatrix run_ensemble(const sgmcp::JointDesign& design, const sgmcp::PenaltyParams& params, int p,
                              std::uint64_t seed, const EnsembleOptions& options)
{
    check(design, p, options);
    params.validate();
    std::vector<std::optional<Eigen::MatrixXi>> parts(options.B);
#pragma omp parallel for schedule(dynamic, 1)
    for (int b = 0; b < options.B; ++b) parts[b] = replicate(design, params, seed, b, options);
    return aggregate(parts, design, p, options);
}

EdgeWeightMatrix run_ensemble_serial(const sgmcp::JointDesign& design, const sgmcp::PenaltyParams& params, int p,
                                     std::uint64_t seed, const EnsembleOptions& options)
{
    check(design, p, options);
    params.validate();
    std::vector<std::optional<Eigen::MatrixXi>> parts;
    for (int b = 0; b < options.B; ++b) parts.push_back(replicate(design, params, seed, b, options));
    return aggregate(parts, design, p, options);
}

SupportSet threshold_support(const EdgeWeightMatrix& weights, double tau)
{
    if (!(tau >= 0.0 && tau < 1.0)) throw InvalidParameter("threshold_support: tau must lie in [0,1)");
    const netfeat::EdgeIndex index(weights.p);
    if (index.size() != weights.psi.rows()) throw InvalidParameter("threshold_support: psi rows do not match p");
    SupportSet out;
    out.tau = tau;
    out.edges.resize(weights.psi.cols());
    for (Eigen::Index m = 0; m < weights.psi.cols(); ++m)
        for (int l = 0; l < index.size(); ++l)
            if (weights.psi(l, m) > tau) {
                const auto [i, j] = index.pair(l);
                out.edges[m].push_back({i, j});
            }
    return out;
}

SupportSet support_of_fit(const Matrix& theta_beta, int p)
{
    const netfeat::EdgeIndex index(p);
    if (index.size() != theta_beta.rows()) throw InvalidParameter("support_of_fit: rows do not match p");
    SupportSet out;
    out.tau = 0.0;
    out.edges.resize(theta_beta.cols());
    for (Eigen::Index m = 0; m < theta_beta.cols(); ++m)
        for (int l = 0; l < index.size(); ++l)
            if (theta_beta(l, m) != 0.0) {
                const auto [i, j] = index.pair(l);
                out.edges[m].push_back({i, j});
            }
    return out;
}

} // namespace diffnet::ensemble
