#include "diffnet/ensemble.hpp"
#include "diffnet/netfeat.hpp"
#include "support.hpp"

#include <doctest.h>

#include <omp.h>

#include <set>

using namespace diffnet;
using namespace diffnet::ensemble;

namespace {

// Design with p(p-1)/2 features whose first `signal_edges` columns drive the labels.
sgmcp::JointDesign pair_design(std::uint64_t seed, int p, int n, int informative)
{
    Engine rng = keyed_engine(seed, {});
    return testing::random_design(rng, 2, n, netfeat::edge_count(p), 0, 1.2, informative);
}

} // namespace

TEST_CASE("bootstrap preserves group sizes")
{
    Engine rng = keyed_engine(1, {});
    auto des = testing::random_design(rng, 3, 17, 4, 1);
    for (int b = 0; b < 20; ++b) {
        const auto boot = stratified_bootstrap(des, rng);
        for (int m = 0; m < 3; ++m) {
            CHECK(boot.datasets[m].n() == des.datasets[m].n());
            CHECK(boot.datasets[m].labels.sum() == des.datasets[m].labels.sum());
            // every resampled row is a row of the original with the same label
            for (int k = 0; k < boot.datasets[m].n(); ++k) {
                bool found = false;
                for (int r = 0; r < des.datasets[m].n() && !found; ++r)
                    found = boot.datasets[m].features.row(k) == des.datasets[m].features.row(r) &&
                            boot.datasets[m].labels(k) == des.datasets[m].labels(r);
                CHECK(found);
            }
        }
    }
    des.datasets[1].labels.setZero();
    CHECK_THROWS_AS(stratified_bootstrap(des, rng), InvalidParameter);
}

TEST_CASE("bootstrap of one case and one control is the identity")
{
    Engine rng = keyed_engine(2, {});
    sgmcp::JointDesign des;
    sgmcp::DatasetBlock b;
    b.features = (Matrix(2, 1) << 0.3, -0.7).finished();
    b.confounders.resize(2, 0);
    b.labels = (Vector(2) << 1, 0).finished();
    des.datasets = {b};
    const auto boot = stratified_bootstrap(des, rng);
    CHECK(boot.datasets[0].features == b.features);
    CHECK(boot.datasets[0].labels == b.labels);
}

TEST_CASE("bootstrap inclusion frequency")
{
    sgmcp::JointDesign des;
    sgmcp::DatasetBlock b;
    b.features = Vector::LinSpaced(60, 0.0, 59.0);
    b.confounders.resize(60, 0);
    b.labels = Vector::Zero(60);
    b.labels.head(30).setOnes();
    des.datasets = {b};
    const int R = 10000;
    long hits = 0;
    for (int r = 0; r < R; ++r) {
        Engine rng = keyed_engine(3, {stream::bootstrap, static_cast<std::uint64_t>(r)});
        const auto boot = stratified_bootstrap(des, rng);
        const auto& f = boot.datasets[0].features;
        hits += (f.array() == 0.0).any(); // subject 0 among the cases
    }
    const double expected = 1.0 - std::pow(1.0 - 1.0 / 30.0, 30.0);
    CHECK(std::abs(hits / static_cast<double>(R) - expected) < 0.02);
}

TEST_CASE("ensemble weights are counts over B and deterministic")
{
    const int p = 6;
    const auto des = pair_design(4, p, 40, 3);
    const double l2 = 0.4 * sgmcp::lambda2_max(des);
    const sgmcp::PenaltyParams pp{0.5 * sgmcp::lambda1_max(des, l2), l2, 10.0, 10.0};
    EnsembleOptions o;
    o.B = 12;
    const auto a = run_ensemble(des, pp, p, 9, o);
    const auto b = run_ensemble(des, pp, p, 9, o);
    const auto s = run_ensemble_serial(des, pp, p, 9, o);
    CHECK(a.B == 12);
    CHECK(a.requested == 12);
    CHECK(a.psi == b.psi);
    CHECK(a.psi == s.psi);
    CHECK(a.counts == s.counts);
    CHECK((a.psi.array() >= 0.0).all());
    CHECK((a.psi.array() <= 1.0).all());
    CHECK((a.psi * 12.0 - a.counts.cast<double>()).cwiseAbs().maxCoeff() < 1e-12);

    omp_set_num_threads(3);
    CHECK(run_ensemble(des, pp, p, 9, o).psi == a.psi);
    omp_set_num_threads(1);
    CHECK(run_ensemble(des, pp, p, 9, o).psi == a.psi);

    CHECK(run_ensemble(des, pp, p, 10, o).psi != a.psi);
    CHECK_THROWS_AS(run_ensemble(des, pp, p + 1, 9, o), InvalidParameter);
    o.B = 0;
    CHECK_THROWS_AS(run_ensemble(des, pp, p, 9, o), InvalidParameter);
}

TEST_CASE("B = 1 on an identity bootstrap reproduces the fit")
{
    const int p = 4;
    Engine rng = keyed_engine(5, {});
    auto des = testing::random_design(rng, 2, 2, netfeat::edge_count(p), 0);
    for (auto& b : des.datasets) b.labels << 1, 0;
    const sgmcp::PenaltyParams pp{0.0, 0.05, 10.0, 10.0};
    EnsembleOptions o;
    o.B = 1;
    const auto w = run_ensemble(des, pp, p, 1, o);
    const auto f = sgmcp::fit(des, pp);
    CHECK(w.psi == (f.theta_beta.array() != 0.0).cast<double>().matrix());
    CHECK(threshold_support(w, 0.5).edges == support_of_fit(f.theta_beta, p).edges);
    for (Eigen::Index i = 0; i < w.psi.size(); ++i) CHECK((w.psi.data()[i] == 0.0 || w.psi.data()[i] == 1.0));
}

TEST_CASE("thresholds")
{
    EdgeWeightMatrix w;
    w.p = 3;
    w.B = 4;
    w.psi = (Matrix(3, 1) << 0.75, 0.5, 1.0).finished();
    const auto half = threshold_support(w, 0.5);
    CHECK(half.edges[0] == std::vector<simgen::Edge>{{0, 1}, {1, 2}});
    CHECK(threshold_support(w, 1.0 - 0.1).edges[0] == std::vector<simgen::Edge>{{1, 2}});
    CHECK_THROWS_AS(threshold_support(w, 1.0), InvalidParameter);
    CHECK_THROWS_AS(threshold_support(w, -0.1), InvalidParameter);

    // supports are nested as tau grows
    Engine rng = keyed_engine(6, {});
    std::uniform_int_distribution<int> c(0, 10);
    w.p = 8;
    w.B = 10;
    w.psi.resize(28, 2);
    for (Eigen::Index i = 0; i < w.psi.size(); ++i) w.psi.data()[i] = c(rng) / 10.0;
    for (int k = 1; k < 10; ++k) {
        const auto lo = threshold_support(w, (k - 1) / 10.0), hi = threshold_support(w, k / 10.0);
        for (int m = 0; m < 2; ++m) {
            const std::set<simgen::Edge> big(lo.edges[m].begin(), lo.edges[m].end());
            for (const auto& e : hi.edges[m]) CHECK(big.count(e) == 1);
        }
    }
}

TEST_CASE("informative edges get higher weights than null edges")
{
    const int p = 8, informative = 4;
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto des = pair_design(100 + seed, p, 120, informative);
        sgmcp::GridSpec spec;
        spec.n_lambda1 = 4;
        spec.n_lambda2 = 4;
        const auto cv = sgmcp::cross_validate(des, spec, 5, seed);
        EnsembleOptions o;
        o.B = 20;
        const auto w = run_ensemble(des, cv.best, p, seed, o);
        const double on = w.psi.topRows(informative).mean();
        const double off = w.psi.bottomRows(w.psi.rows() - informative).mean();
        wins += on > off;
    }
    CHECK(wins == 5);
}
