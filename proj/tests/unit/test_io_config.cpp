#include "diffnet/config.hpp"
#include "diffnet/io.hpp"
#include "diffnet/netfeat.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>

using namespace diffnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::path(TEST_SCRATCH) / "io" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("matrix csv round trip")
{
    const fs::path dir = scratch("matrix");
    Matrix m(2, 3);
    m << 1.0 / 3.0, -2e-300, 5, 0.1, 1e10, -7.25;
    io::write_matrix_csv(dir / "m.csv", m);
    CHECK(io::read_matrix_csv(dir / "m.csv") == m);

    io::write_text(dir / "bad.csv", "1,2\n3,x\n");
    try {
        io::read_matrix_csv(dir / "bad.csv");
        FAIL("expected an error");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("bad.csv:2") != std::string::npos);
    }
    io::write_text(dir / "ragged.csv", "1,2\n3\n");
    CHECK_THROWS_AS(io::read_matrix_csv(dir / "ragged.csv"), IoError);
    CHECK_THROWS_AS(io::read_matrix_csv(dir / "missing.csv"), IoError);
}

TEST_CASE("manifest round trip")
{
    const fs::path dir = scratch("manifest");
    io::Manifest mf;
    mf.p = 5;
    mf.q = 7;
    mf.replication = 3;
    mf.design = simgen::StudyDesign{};
    mf.design->seed = 99;
    mf.temporal_rho_case = 0.5;
    mf.temporal_rho_control = 0.6;
    io::DatasetEntry d;
    d.scans = {{"scans/a.csv", simgen::Group::Case}, {"scans/b.csv", simgen::Group::Control}};
    d.truth = std::vector<simgen::Edge>{{0, 1}, {2, 4}};
    d.rho = 0.4;
    mf.datasets = {d, io::DatasetEntry{}};
    io::write_manifest(dir / "manifest.json", mf);
    const auto back = io::read_manifest(dir / "manifest.json");
    CHECK(back.p == 5);
    CHECK(back.q == 7);
    CHECK(back.replication == 3);
    CHECK(back.design->seed == 99);
    CHECK(*back.temporal_rho_control == 0.6);
    REQUIRE(back.datasets.size() == 2);
    CHECK(back.datasets[0].scans[1].group == simgen::Group::Control);
    CHECK(*back.datasets[0].truth == *d.truth);
    CHECK_FALSE(back.datasets[1].truth.has_value());
    // truth pairs are 1-based on disk
    const auto raw = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
    CHECK(raw["datasets"][0]["truth"] == nlohmann::json::parse("[[1, 2], [3, 5]]"));

    io::write_text(dir / "broken.json", "{\"p\": 3");
    CHECK_THROWS_AS(io::read_manifest(dir / "broken.json"), IoError);
}

TEST_CASE("edges, features, fit and psi round trips")
{
    const fs::path dir = scratch("tables");
    const std::vector<simgen::Edge> edges{{0, 3}, {1, 2}};
    io::write_edges(dir / "e.csv", edges);
    CHECK(io::read_text(dir / "e.csv") == "i,j\n1,4\n2,3\n");
    CHECK(io::read_edges(dir / "e.csv") == edges);

    io::FeatureTable t;
    t.p = 4;
    t.subjects = {"case_001", "control_001"};
    t.dataset = {2, 2};
    t.group = {simgen::Group::Case, simgen::Group::Control};
    t.confounders = Matrix::Zero(2, 0);
    t.features = Matrix::Random(2, 6);
    io::write_features(dir / "f.csv", t);
    CHECK(io::read_text(dir / "f.csv").rfind("subject,dataset,group,1_2,1_3,1_4,2_3,2_4,3_4\n", 0) == 0);
    const auto tb = io::read_features(dir / "f.csv");
    CHECK(tb.p == 4);
    CHECK(tb.features == t.features);
    CHECK(tb.subjects == t.subjects);
    const auto des = io::design_from_tables({tb});
    CHECK(des.datasets[0].labels == (Vector(2) << 1, 0).finished());

    sgmcp::CoefficientFit f;
    f.theta_eta = {(Vector(1) << 0.5).finished(), (Vector(1) << -0.25).finished()};
    f.theta_beta = Matrix::Zero(6, 2);
    f.theta_beta(2, 1) = 1.5;
    f.theta_beta(5, 0) = -1e-7;
    f.params = {0.1, 0.2, 10.0, 5.0};
    f.objective_trace = {0.7, 0.6};
    f.converged = true;
    f.iterations = 4;
    io::write_fit(dir / "fit.json", f, 4);
    int p = 0;
    const auto fb = io::read_fit(dir / "fit.json", &p);
    CHECK(p == 4);
    CHECK(fb.theta_beta == f.theta_beta);
    CHECK(fb.theta_eta[1] == f.theta_eta[1]);
    CHECK(fb.params.gamma2 == 5.0);
    CHECK(fb.objective_trace == f.objective_trace);
    CHECK(fb.converged);

    ensemble::EdgeWeightMatrix w;
    w.p = 4;
    w.B = 4;
    w.psi = Matrix::Zero(6, 2);
    w.psi(1, 0) = 0.75;
    w.psi(4, 1) = 0.25;
    io::write_psi(dir / "psi.csv", w);
    const auto wb = io::read_psi(dir / "psi.csv", 4);
    CHECK(wb.psi == w.psi);
    CHECK(wb.counts(1, 0) == 3);
    CHECK(wb.p == 4);

    io::write_scores(dir / "scores.csv", {{"joint", 1, 0.5, metrics::score_support({{0, 1}}, {}, 3)}});
    const std::string scores = io::read_text(dir / "scores.csv");
    CHECK(scores.rfind("method,dataset,tau,tp,fp,tn,fn,tpr,tnr,tdr\n", 0) == 0);
    CHECK(scores.find(",NA") != std::string::npos);
}

TEST_CASE("config defaults, parsing and round trip")
{
    const auto desk = config::desk_profile();
    CHECK(desk.simulation.p == 30);
    CHECK(desk.simulation.q == 30);
    CHECK(desk.simulation.datasets == 3);
    CHECK(desk.simulation.n_case + desk.simulation.n_control == 60);
    CHECK(desk.ensemble.B == 50);
    CHECK(desk.replications == 10);

    const auto c = config::parse_config(R"(
seed = 7
[simulation]
p = 12
rho_list = [0.5, 0.3, 0.2]
structure = "small_world"
sw_neighbors = 4
[sgmcp]
pairs = [[0.0, 0.1], [0.05, 0.2]]
objective_tol = 0.0
[ensemble]
tau_rule = "fixed"
)", desk);
    CHECK(c.seed == 7);
    CHECK(c.simulation.p == 12);
    CHECK(c.simulation.q == 30); // untouched keys keep the base value
    CHECK(c.simulation.structure == simgen::GraphKind::SmallWorld);
    CHECK(c.sgmcp.grid.pairs.size() == 2);
    CHECK(c.sgmcp.fit.objective_tol == 0.0);
    CHECK(c.ensemble.tau_rule == config::TauRule::Fixed);

    const std::string text = config::to_toml(c);
    CHECK(config::to_toml(config::parse_config(text)) == text);

    CHECK_THROWS_AS(config::parse_config("colour = 1\n"), InvalidParameter);
    CHECK_THROWS_AS(config::parse_config("[simulation]\npp = 3\n"), InvalidParameter);
    CHECK_THROWS_AS(config::parse_config("[simulation]\np = \"ten\"\n"), InvalidParameter);
    CHECK_THROWS_AS(config::parse_config("[ensemble]\ntau = 1.5\n"), InvalidParameter);
    CHECK_THROWS_AS(config::parse_config("[simulation]\nrho_list = [0.4]\n"), InvalidParameter);
    CHECK_THROWS_AS(config::parse_config("seed = \n"), InvalidParameter);
    try {
        config::parse_config("[clime]\nwhat = 1\n", {}, "x.toml");
        FAIL("expected an error");
    } catch (const InvalidParameter& e) {
        CHECK(std::string(e.what()).find("clime.what") != std::string::npos);
    }
}
