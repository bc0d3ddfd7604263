// Serial reference loops vs. the OpenMP kernels on a desk-scale study.
#include "diffnet/ensemble.hpp"
#include "diffnet/io.hpp"
#include "diffnet/netfeat.hpp"
#include "diffnet/sgmcp.hpp"
#include "diffnet/simgen.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <chrono>
#include <cstdio>

using namespace diffnet;

namespace {

template <class F>
double seconds(F&& f)
{
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Serial vs. parallel timings"};
    int p = 20, n = 20, B = 20, threads = 0;
    std::uint64_t seed = 7;
    app.add_option("--p", p, "Nodes");
    app.add_option("--n", n, "Subjects per group and dataset");
    app.add_option("--B", B, "Bootstrap replicates");
    app.add_option("--threads", threads, "OpenMP threads (0 = default)");
    app.add_option("--seed", seed, "Seed");
    CLI11_PARSE(app, argc, argv);
    if (threads > 0) omp_set_num_threads(threads);

    simgen::StudyDesign design;
    design.p = p;
    design.q = 30;
    design.n_case = design.n_control = n;
    design.hub_groups = std::max(1, p / 6);
    design.seed = seed;
    const auto study = simgen::generate_study(design);

    std::vector<simgen::SubjectScan> scans;
    for (const auto& ds : study.scans)
        for (const auto& s : ds) {
            auto w = s;
            const double rho = s.group == simgen::Group::Case ? design.temporal_rho_case : design.temporal_rho_control;
            w.data = simgen::whiten(s.data, simgen::ar_covariance(design.q, rho));
            scans.push_back(std::move(w));
        }

    const clime::ClimeConfig ccfg;
    std::vector<netfeat::EdgeFeatureVector> fs, fp;
    const double t_fs = seconds([&] { fs = netfeat::features_for_scans_serial(scans, ccfg); });
    const double t_fp = seconds([&] { fp = netfeat::features_for_scans(scans, ccfg); });
    bool same = fs.size() == fp.size();
    for (std::size_t k = 0; same && k < fs.size(); ++k) same = fs[k].w == fp[k].w;

    sgmcp::JointDesign jd;
    for (int m = 0; m < design.datasets; ++m) {
        sgmcp::DatasetBlock b;
        const int nm = static_cast<int>(study.scans[m].size());
        b.features.resize(nm, netfeat::edge_count(p));
        b.confounders.resize(nm, 0);
        b.labels.resize(nm);
        for (int k = 0; k < nm; ++k) {
            const auto& f = fp[static_cast<std::size_t>(m * nm + k)];
            b.features.row(k) = f.w.transpose();
            b.labels(k) = f.group == simgen::Group::Case ? 1.0 : 0.0;
        }
        jd.datasets.push_back(std::move(b));
    }
    const double l2 = 0.3 * sgmcp::lambda2_max(jd);
    const sgmcp::PenaltyParams pp{0.5 * sgmcp::lambda1_max(jd, l2), l2, 10.0, 10.0};
    ensemble::EnsembleOptions eo;
    eo.B = B;
    ensemble::EdgeWeightMatrix es, ep;
    const double t_es = seconds([&] { es = ensemble::run_ensemble_serial(jd, pp, p, seed, eo); });
    const double t_ep = seconds([&] { ep = ensemble::run_ensemble(jd, pp, p, seed, eo); });

    std::printf("threads %d\n", omp_get_max_threads());
    std::printf("features  serial %8.3f s  parallel %8.3f s  speedup %5.2f  identical %s\n", t_fs, t_fp, t_fs / t_fp,
                same ? "yes" : "no");
    std::printf("ensemble  serial %8.3f s  parallel %8.3f s  speedup %5.2f  identical %s\n", t_es, t_ep, t_es / t_ep,
                es.counts == ep.counts ? "yes" : "no");
    return same && es.counts == ep.counts ? 0 : 1;
}
