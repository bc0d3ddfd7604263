#include "diffnet/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace diffnet::simgen {

void StudyDesign::validate() const
{
    if (datasets <= 0 || p <= 1 || q < 2 || n_case <= 0 || n_control <= 0)
        throw InvalidParameter("study design: counts must be positive (p >= 2, q >= 2)");
    if (static_cast<int>(rho_list.size()) != datasets)
        throw InvalidParameter("study design: rho_list must have one entry per dataset");
    for (double r : rho_list)
        if (!(r > 0.0 && r <= 1.0)) throw InvalidParameter("study design: rho values must lie in (0,1]");
    if (std::abs(temporal_rho_case) >= 1.0 || std::abs(temporal_rho_control) >= 1.0)
        throw InvalidParameter("study design: temporal AR parameters must satisfy |rho| < 1");
}

Matrix ar_covariance(int q, double rho)
{
    if (q < 1) throw InvalidParameter("ar_covariance: q must be >= 1");
    if (!(std::abs(rho) < 1.0)) throw InvalidParameter("ar_covariance: |rho| must be < 1");
    Matrix s(q, q);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j)
            s(i, j) = std::pow(rho, std::abs(i - j));
    return s;
}

GraphStructure generate_hub_graph(int p, int n_groups)
{
    if (n_groups < 1 || n_groups > p) throw InvalidParameter("generate_hub_graph: need 1 <= n_groups <= p");
    GraphStructure g{p, {}, GraphKind::Hub};
    const int block = p / n_groups;
    for (int b = 0; b < n_groups; ++b) {
        const int begin = b * block;
        const int end = (b == n_groups - 1) ? p : begin + block;
        for (int v = begin + 1; v < end; ++v) g.edges.push_back({begin, v});
    }
    std::sort(g.edges.begin(), g.edges.end());
    return g;
}

GraphStructure generate_small_world(int p, int neighbors, double rewire_prob, Engine& rng)
{
    if (neighbors < 2 || neighbors % 2 != 0) throw InvalidParameter("generate_small_world: neighbors must be even and >= 2");
    if (neighbors >= p) throw InvalidParameter("generate_small_world: neighbors must be < p");
    if (!(rewire_prob >= 0.0 && rewire_prob <= 1.0)) throw InvalidParameter("generate_small_world: rewire_prob must lie in [0,1]");

    std::vector<std::vector<char>> adj(p, std::vector<char>(p, 0));
    auto link = [&](int a, int b, char on) { adj[a][b] = on; adj[b][a] = on; };
    const int half = neighbors / 2;
    for (int u = 0; u < p; ++u)
        for (int k = 1; k <= half; ++k) link(u, (u + k) % p, 1);

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<int> candidates;
    candidates.reserve(p);
    for (int k = 1; k <= half; ++k) {
        for (int u = 0; u < p; ++u) {
            const int v = (u + k) % p;
            if (unif(rng) >= rewire_prob) continue;
            if (!adj[u][v]) continue; // already rewired away
            candidates.clear();
            for (int w = 0; w < p; ++w)
                if (w != u && !adj[u][w]) candidates.push_back(w);
            if (candidates.empty()) continue;
            std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
            const int w = candidates[pick(rng)];
            link(u, v, 0);
            link(u, w, 1);
        }
    }

    GraphStructure g{p, {}, GraphKind::SmallWorld};
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            if (adj[i][j]) g.edges.push_back({i, j});
    return g;
}

Matrix fill_precision(const GraphStructure& graph, Engine& rng)
{
    Matrix omega = Matrix::Zero(graph.p, graph.p);
    std::uniform_real_distribution<double> mag(0.3, 0.5);
    std::bernoulli_distribution negative(0.5);
    for (const auto& e : graph.edges) {
        if (e.i == e.j || e.i < 0 || e.j >= graph.p) throw InvalidParameter("fill_precision: invalid edge");
        double v = mag(rng);
        if (negative(rng)) v = -v;
        omega(e.i, e.j) = v;
        omega(e.j, e.i) = v;
    }
    return omega;
}

int flip_bound(double rho, int p)
{
    return static_cast<int>(std::floor(rho * p + 1e-9));
}

namespace {

double min_eigenvalue(const Matrix& a)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw SolverError("eigendecomposition failed");
    return es.eigenvalues().minCoeff();
}

void shift_to_pd(Matrix& a)
{
    const double shift = std::abs(min_eigenvalue(a)) + 0.5;
    a.diagonal().array() += shift;
}

} // namespace

PrecisionPair make_pair(const Matrix& omega_base, double rho)
{
    const int p = static_cast<int>(omega_base.rows());
    if (omega_base.cols() != p) throw InvalidParameter("make_pair: omega_base must be square");
    if (omega_base != omega_base.transpose())
        throw InvalidParameter("make_pair: omega_base must be symmetric");
    if (!(rho > 0.0 && rho <= 1.0)) throw InvalidParameter("make_pair: rho must lie in (0,1]");
    if (rho * p < 2.0) {
        std::ostringstream msg;
        msg << "make_pair: rho*p = " << rho * p << " < 2, the flip set may be empty";
        warn(msg.str());
    }

    PrecisionPair pair;
    pair.rho = rho;
    pair.omega_x = omega_base;
    pair.omega_x.diagonal().setZero();
    pair.omega_y = pair.omega_x;

    const int bound = std::min(flip_bound(rho, p), p);
    for (int i = 0; i < bound; ++i) {
        for (int j = i + 1; j < bound; ++j) {
            if (pair.omega_x(i, j) != 0.0) {
                pair.flip_set.push_back({i, j});
                pair.omega_y(i, j) = -pair.omega_x(i, j);
                pair.omega_y(j, i) = -pair.omega_x(j, i);
            }
        }
    }
    shift_to_pd(pair.omega_x);
    shift_to_pd(pair.omega_y);
    pair.delta = pair.omega_x - pair.omega_y;
    return pair;
}

MatrixNormalSampler::MatrixNormalSampler(const Matrix& sigma_s, const Matrix& sigma_t)
{
    Eigen::LLT<Matrix> ls(sigma_s);
    if (sigma_s.rows() != sigma_s.cols() || ls.info() != Eigen::Success)
        throw InvalidParameter("matrix normal: sigma_s is not symmetric positive definite");
    Eigen::LLT<Matrix> lt(sigma_t);
    if (sigma_t.rows() != sigma_t.cols() || lt.info() != Eigen::Success)
        throw InvalidParameter("matrix normal: sigma_t is not symmetric positive definite");
    left_ = ls.matrixL();
    right_t_ = lt.matrixL().transpose();
}

Matrix MatrixNormalSampler::draw(Engine& rng) const
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix z(left_.cols(), right_t_.rows());
    for (Eigen::Index c = 0; c < z.cols(); ++c)
        for (Eigen::Index r = 0; r < z.rows(); ++r) z(r, c) = normal(rng);
    return left_.triangularView<Eigen::Lower>() * z * right_t_.triangularView<Eigen::Upper>();
}

Matrix MatrixNormalSampler::draw(const Matrix& mean, Engine& rng) const
{
    if (mean.rows() != left_.rows() || mean.cols() != right_t_.cols())
        throw InvalidParameter("matrix normal: mean has the wrong shape");
    return mean + draw(rng);
}

Matrix sample_matrix_normal(const Matrix& mean, const Matrix& sigma_s, const Matrix& sigma_t, Engine& rng)
{
    return MatrixNormalSampler(sigma_s, sigma_t).draw(mean, rng);
}

Matrix inverse_sqrt(const Matrix& spd)
{
    if (spd.rows() != spd.cols()) throw InvalidParameter("inverse_sqrt: matrix must be square");
    Eigen::SelfAdjointEigenSolver<Matrix> es(spd);
    if (es.info() != Eigen::Success) throw SolverError("inverse_sqrt: eigendecomposition failed");
    const Vector& ev = es.eigenvalues();
    if (ev.minCoeff() <= 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff()))
        throw InvalidParameter("inverse_sqrt: matrix is not positive definite");
    return es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

Matrix whiten(const Matrix& x, const Matrix& sigma_t)
{
    if (x.cols() != sigma_t.rows()) throw InvalidParameter("whiten: sigma_t does not match the number of columns");
    return x * inverse_sqrt(sigma_t);
}

double estimate_ar1(const Matrix& x)
{
    if (x.cols() < 3) return 0.0;
    Matrix c = x.colwise() - x.rowwise().mean();
    double num = 0.0, den = 0.0;
    for (Eigen::Index t = 0; t + 1 < c.cols(); ++t) num += c.col(t).dot(c.col(t + 1));
    for (Eigen::Index t = 0; t < c.cols(); ++t) den += c.col(t).squaredNorm();
    if (den <= 0.0) return 0.0;
    return std::clamp(num / den, -0.95, 0.95);
}

Study generate_study(const StudyDesign& design)
{
    design.validate();
    Study study;
    study.design = design;
    const int M = design.datasets;

    auto draw_graph = [&](int m) {
        if (design.structure == GraphKind::Hub) return generate_hub_graph(design.p, design.hub_groups);
        Engine g = keyed_engine(design.seed, {stream::graph, static_cast<std::uint64_t>(m)});
        return generate_small_world(design.p, design.sw_neighbors, design.sw_rewire, g);
    };
    auto draw_base = [&](int m, const GraphStructure& g) {
        Engine f = keyed_engine(design.seed, {stream::fill, static_cast<std::uint64_t>(m)});
        return fill_precision(g, f);
    };

    std::optional<Matrix> shared;
    for (int m = 0; m < M; ++m) {
        const int key = design.shared_base ? 0 : m;
        if (m == 0 || !design.shared_base) {
            study.graphs.push_back(draw_graph(key));
            shared = draw_base(key, study.graphs.back());
        } else {
            study.graphs.push_back(study.graphs.front());
        }
        study.pairs.push_back(make_pair(*shared, design.rho_list[m]));
    }

    const Matrix sigma_t_case = ar_covariance(design.q, design.temporal_rho_case);
    const Matrix sigma_t_control = ar_covariance(design.q, design.temporal_rho_control);
    std::vector<MatrixNormalSampler> case_samplers, control_samplers;
    for (int m = 0; m < M; ++m) {
        case_samplers.emplace_back(study.pairs[m].omega_x.inverse(), sigma_t_case);
        control_samplers.emplace_back(study.pairs[m].omega_y.inverse(), sigma_t_control);
    }

    const int per = design.n_case + design.n_control;
    study.scans.assign(M, std::vector<SubjectScan>(per));
#pragma omp parallel for collapse(2) schedule(static)
    for (int m = 0; m < M; ++m) {
        for (int k = 0; k < per; ++k) {
            const bool is_case = k < design.n_case;
            const int idx = is_case ? k : k - design.n_case;
            Engine rng = keyed_engine(design.seed, {stream::subject, static_cast<std::uint64_t>(m),
                                                    is_case ? 0ULL : 1ULL, static_cast<std::uint64_t>(idx)});
            SubjectScan& s = study.scans[m][k];
            s.data = is_case ? case_samplers[m].draw(rng) : control_samplers[m].draw(rng);
            s.group = is_case ? Group::Case : Group::Control;
            s.dataset_id = m;
        }
    }
    return study;
}

std::vector<Edge> support_of(const Matrix& delta, double tol)
{
    std::vector<Edge> out;
    for (Eigen::Index i = 0; i < delta.rows(); ++i)
        for (Eigen::Index j = i + 1; j < delta.cols(); ++j)
            if (std::abs(delta(i, j)) > tol) out.push_back({static_cast<int>(i), static_cast<int>(j)});
    return out;
}

} // namespace diffnet::simgen
