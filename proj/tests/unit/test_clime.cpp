#include "diffnet/clime.hpp"
#include "diffnet/lp.hpp"
#include "diffnet/rng.hpp"
#include "diffnet/simgen.hpp"
#include "oracles/lp_ipm.hpp"

#include <doctest.h>

#include <random>

using namespace diffnet;
using namespace diffnet::clime;

namespace {

Matrix random_spd(Engine& rng, int p)
{
    std::normal_distribution<double> z;
    Matrix a(p, p + 3);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = z(rng);
    return a * a.transpose() / static_cast<double>(p + 3) + 0.1 * Matrix::Identity(p, p);
}

} // namespace

TEST_CASE("sample covariance")
{
    Matrix same(3, 4);
    same.colwise() = Vector::LinSpaced(3, 1.0, 3.0);
    CHECK(sample_covariance(same).isZero(1e-15));

    Matrix x(2, 2);
    x << 1, 0, 0, 1;
    Matrix expected(2, 2);
    expected << 0.5, -0.5, -0.5, 0.5;
    CHECK((sample_covariance(x) - expected).cwiseAbs().maxCoeff() < 1e-15);

    Engine rng = keyed_engine(1, {stream::subject});
    const Matrix x0 = simgen::MatrixNormalSampler(Matrix::Identity(4, 4), Matrix::Identity(7, 7)).draw(rng);
    CHECK((sample_covariance(3.0 * x0) - 9.0 * sample_covariance(x0)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(sample_covariance(Matrix::Ones(3, 1)), InvalidParameter);
}

TEST_CASE("dual simplex agrees with the interior point oracle")
{
    Engine rng = keyed_engine(77, {});
    std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.1, 2.0);
    for (int trial = 0; trial < 30; ++trial) {
        const int m = 3 + trial % 4, n = 2 + trial % 5;
        Matrix a(m, n);
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = u(rng);
        Vector c(n), b(m);
        for (int j = 0; j < n; ++j) c(j) = pos(rng);
        // a feasible x0 keeps the problem feasible
        Vector x0(n);
        for (int j = 0; j < n; ++j) x0(j) = pos(rng);
        for (int i = 0; i < m; ++i) b(i) = a.row(i).dot(x0) + pos(rng);
        lp::DualSimplex s(a, c);
        REQUIRE(s.solve(b) == lp::Status::Optimal);
        // maximize -c'x written as min with slacks
        Matrix as(m, n + m);
        as << a, Matrix::Identity(m, m);
        Vector cs = Vector::Zero(n + m);
        cs.head(n) = c;
        const auto ref = oracle::solve_standard_lp(as, b, cs);
        REQUIRE(ref.ok);
        CHECK(s.objective() == doctest::Approx(ref.objective).epsilon(1e-8));
        CHECK(((a * s.primal() - b).array() <= 1e-9).all());
    }
}

TEST_CASE("closed-form CLIME solutions")
{
    const auto eye = clime_solve(Matrix::Identity(4, 4), 0.2);
    CHECK((eye.omega - 0.8 * Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);

    const Vector d = Vector::LinSpaced(3, 1.0, 3.0);
    const auto diag = clime_solve(d.asDiagonal().toDenseMatrix(), 0.3);
    const Matrix expected = (0.7 * d.cwiseInverse()).asDiagonal().toDenseMatrix();
    CHECK((diag.omega - expected).cwiseAbs().maxCoeff() < 1e-10);

    const Matrix ar = simgen::ar_covariance(5, 0.4);
    CHECK(clime_solve(ar, 1.0).omega.isZero(1e-12));
    CHECK(clime_solve(ar, 1.5).omega.isZero(1e-12));
    CHECK_THROWS_AS(clime_solve(ar, 0.0), InvalidParameter);
}

TEST_CASE("CLIME matches the LP oracle, is feasible, symmetric and l1-monotone")
{
    Engine rng = keyed_engine(21, {});
    for (int trial = 0; trial < 10; ++trial) {
        const int p = 2 + trial % 5;
        const Matrix sigma = random_spd(rng, p);
        const double top = sigma.cwiseAbs().maxCoeff();
        double previous_l1 = -1.0;
        for (double frac : {0.6, 0.3, 0.1}) {
            const double lambda = frac * top;
            const auto sol = clime_solve(sigma, lambda);
            CHECK(sol.omega == sol.omega.transpose());
            for (int j = 0; j < p; ++j) {
                const Vector ref = oracle::clime_column_by_lp(sigma, j, lambda);
                CHECK((sol.raw_omega.col(j) - ref).cwiseAbs().maxCoeff() < 1e-6);
                Vector e = Vector::Zero(p);
                e(j) = 1.0;
                CHECK((sigma * sol.raw_omega.col(j) - e).cwiseAbs().maxCoeff() <= lambda + 1e-6);
            }
            CHECK(sol.feasibility_gap <= lambda + 1e-6);
            // decreasing lambda can only increase the l1 norm
            const double l1 = sol.raw_omega.cwiseAbs().sum();
            CHECK(l1 >= previous_l1 - 1e-9);
            previous_l1 = l1;
        }
    }
}

TEST_CASE("symmetrization keeps the smaller magnitude")
{
    Matrix raw(2, 2);
    raw << 1, -0.2, 0.3, 1;
    Matrix s = symmetrize_min_magnitude(raw);
    CHECK(s(0, 1) == -0.2);
    CHECK(s(1, 0) == -0.2);
    raw << 1, 0.3, -0.3, 1; // tie keeps the upper entry
    s = symmetrize_min_magnitude(raw);
    CHECK(s(1, 0) == 0.3);
}

TEST_CASE("warm-started path equals independent solves")
{
    Engine rng = keyed_engine(5, {});
    const Matrix sigma = random_spd(rng, 6);
    const auto grid = default_grid(sigma, 8, 0.05);
    const auto path = clime_path(sigma, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        REQUIRE(path[k]);
        CHECK((path[k]->raw_omega - clime_solve(sigma, grid[k]).raw_omega).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("default grid")
{
    Matrix sigma = simgen::ar_covariance(4, 0.5) * 2.0;
    const auto g = default_grid(sigma);
    REQUIRE(g.size() == 20);
    CHECK(g.front() == doctest::Approx(2.0));
    CHECK(g.back() == doctest::Approx(0.02));
    for (std::size_t k = 1; k < g.size(); ++k) CHECK(g[k] < g[k - 1]);
}

TEST_CASE("density tuning")
{
    // identity: every lambda gives density 0, so the largest lambda wins
    const auto eye = select_lambda_dens(Matrix::Identity(4, 4), 0.5, {0.1, 0.5, 0.3});
    CHECK(eye.lambda_grid == std::vector<double>{0.5, 0.3, 0.1});
    CHECK(eye.chosen == 0);

    // AR(10, 0.5): the choice is the grid point closest to the target by brute evaluation
    const Matrix ar = simgen::ar_covariance(10, 0.5);
    std::vector<double> grid;
    for (int k = 0; k < 10; ++k) grid.push_back(std::pow(10.0, -2.0 + 2.0 * k / 9.0));
    const auto res = select_lambda_dens(ar, 0.5, grid);
    int best = -1;
    double gap = 0.0;
    for (std::size_t k = 0; k < res.lambda_grid.size(); ++k) {
        const auto sol = clime_solve(ar, res.lambda_grid[k]);
        const auto dens = edge_density(sol.omega);
        if (!dens) continue;
        const double g = std::abs(*dens - 0.5);
        if (best < 0 || g < gap - 1e-12) {
            best = static_cast<int>(k);
            gap = g;
        }
    }
    CHECK(res.chosen == best);
    for (const auto& d : res.densities)
        if (d) {
            CHECK(*d >= 0.0);
            CHECK(*d <= 1.0);
        }

    // a grid where one value reaches density 0.5 exactly: p = 3 has 3 pairs, so use p = 5 (10 pairs)
    Matrix five = simgen::ar_covariance(5, 0.5);
    const auto full = select_lambda_dens(five, 0.5, default_grid(five, 40, 0.001));
    const double chosen = *full.densities[full.chosen];
    for (const auto& d : full.densities)
        if (d) CHECK(std::abs(chosen - 0.5) <= std::abs(*d - 0.5));
}

TEST_CASE("edge density")
{
    Matrix o = Matrix::Identity(3, 3);
    CHECK(*edge_density(o) == 0.0);
    o(0, 1) = o(1, 0) = 0.2;
    CHECK(*edge_density(o) == doctest::Approx(1.0 / 3.0));
    o(2, 2) = -1.0;
    CHECK_FALSE(edge_density(o).has_value());
}
