#include "diffnet/metrics.hpp"
#include "diffnet/ensemble.hpp"
#include "diffnet/netfeat.hpp"
#include "oracles/support_count.hpp"

#include <doctest.h>

#include <random>

using namespace diffnet;
using namespace diffnet::metrics;

namespace {

std::vector<Edge> random_edges(Engine& rng, int p, double prob)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Edge> e;
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            if (u(rng) < prob) e.push_back({i, j});
    return e;
}

std::vector<std::pair<int, int>> as_pairs(const std::vector<Edge>& e)
{
    std::vector<std::pair<int, int>> out;
    for (const auto& x : e) out.emplace_back(x.i, x.j);
    return out;
}

} // namespace

TEST_CASE("score examples")
{
    const std::vector<Edge> truth{{0, 1}, {0, 2}};
    const auto s = score_support(truth, {{0, 1}}, 4);
    CHECK(*s.tpr == 0.5);
    CHECK(*s.tdr == 1.0);
    CHECK(*s.tnr == 1.0);
    CHECK(s.tp == 1);
    CHECK(s.fn == 1);
    CHECK(s.tn == 4);

    const auto same = score_support(truth, truth, 4);
    CHECK(*same.tpr == 1.0);
    CHECK(*same.tnr == 1.0);
    CHECK(*same.tdr == 1.0);

    std::vector<Edge> complement;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            if (!(i == 0 && (j == 1 || j == 2))) complement.push_back({i, j});
    const auto c = score_support(truth, complement, 4);
    CHECK(*c.tpr == 0.0);
    CHECK(*c.tdr == 0.0);

    CHECK_FALSE(score_support({}, {{0, 1}}, 3).tpr.has_value());
    CHECK_FALSE(score_support(truth, {}, 4).tdr.has_value());
    CHECK_THROWS_AS(score_support({{1, 1}}, {}, 3), InvalidParameter);
    CHECK_THROWS_AS(score_support({{0, 3}}, {}, 3), InvalidParameter);
}

TEST_CASE("score agrees with the exhaustive count")
{
    Engine rng = keyed_engine(1, {});
    for (int t = 0; t < 50; ++t) {
        const int p = 2 + t % 19;
        const auto truth = random_edges(rng, p, 0.2), est = random_edges(rng, p, 0.3);
        const auto s = score_support(truth, est, p);
        const auto r = oracle::count_support(as_pairs(truth), as_pairs(est), p);
        CHECK(s.tp == r.tp);
        CHECK(s.fp == r.fp);
        CHECK(s.tn == r.tn);
        CHECK(s.fn == r.fn);
        CHECK(s.tpr == r.tpr);
        CHECK(s.tnr == r.tnr);
        CHECK(s.tdr == r.tdr);
        for (const auto& rate : {s.tpr, s.tnr, s.tdr})
            if (rate) {
                CHECK(*rate >= 0.0);
                CHECK(*rate <= 1.0);
            }
    }
}

TEST_CASE("PR curve")
{
    const int p = 5, B = 4;
    const netfeat::EdgeIndex idx(p);
    const std::vector<Edge> truth{{0, 1}, {2, 4}};
    Vector psi = Vector::Zero(idx.size());
    for (const auto& e : truth) psi(idx.position(e.i, e.j)) = 1.0;
    const auto curve = pr_curve(psi, truth, p, B);
    REQUIRE(curve.size() == 4);
    for (const auto& pt : curve) {
        CHECK(*pt.recall == 1.0);
        CHECK(*pt.precision == 1.0);
    }
    CHECK(select_tau_max_tpr_tdr(psi, truth, p, B) == 0.75);

    const auto empty = pr_curve(Vector::Zero(idx.size()), truth, p, B);
    for (const auto& pt : empty) {
        CHECK_FALSE(pt.precision.has_value());
        CHECK(*pt.recall == 0.0);
    }

    Vector two = Vector::Zero(idx.size());
    two(idx.position(0, 1)) = 1.0;
    two(idx.position(1, 2)) = 0.2;
    CHECK(select_tau_max_tpr_tdr(two, {{0, 1}}, p, 5) >= 0.2);

    CHECK_THROWS_AS(select_tau_max_tpr_tdr(two, {}, p, 5), InvalidParameter);
    CHECK_THROWS_AS(pr_curve(two, truth, p, 3), InvalidParameter); // 0.2 is not a multiple of 1/3
}

TEST_CASE("PR curve matches brute force and recall is monotone")
{
    Engine rng = keyed_engine(2, {});
    for (int t = 0; t < 30; ++t) {
        const int p = 3 + t % 10, B = 1 + t % 7;
        const netfeat::EdgeIndex idx(p);
        std::uniform_int_distribution<int> count(0, B);
        ensemble::EdgeWeightMatrix w;
        w.p = p;
        w.B = B;
        w.psi.resize(idx.size(), 1);
        for (int l = 0; l < idx.size(); ++l) w.psi(l, 0) = count(rng) / static_cast<double>(B);
        auto truth = random_edges(rng, p, 0.3);
        if (truth.empty()) truth.push_back({0, 1});
        const auto curve = pr_curve(w.psi.col(0), truth, p, B);
        REQUIRE(curve.size() == static_cast<std::size_t>(B));
        std::optional<double> last;
        for (int k = 0; k < B; ++k) {
            const double tau = static_cast<double>(k) / B;
            const auto est = ensemble::threshold_support(w, tau).edges[0];
            const auto s = score_support(truth, est, p);
            CHECK(curve[k].tau == tau);
            CHECK(curve[k].recall == s.tpr);
            CHECK(curve[k].precision == s.tdr);
            if (last) CHECK(*curve[k].recall <= *last);
            last = curve[k].recall;
        }
    }
}

TEST_CASE("summary formatting")
{
    CHECK(format_rate(std::nullopt) == "NA");
    CHECK(format_rate(0.5, 2) == "0.50");
    std::vector<SummaryRow> rows;
    rows.push_back({"joint", 1, score_support({{0, 1}}, {{0, 1}}, 3)});
    rows.push_back({"joint", 2, score_support({{0, 1}}, {}, 3)});
    const std::string table = format_summary(rows);
    CHECK(table.find("joint") != std::string::npos);
    CHECK(table.find("100.0") != std::string::npos);
    CHECK(table.find("NA") != std::string::npos);
}
