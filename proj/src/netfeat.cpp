#include "diffnet/netfeat.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

namespace diffnet::netfeat {

namespace {
constexpr double kClamp = 1.0 - 1e-6;
}

EdgeIndex::EdgeIndex(int p) : p_(p)
{
    if (p < 2) throw InvalidParameter("EdgeIndex: need p >= 2");
    pairs_.reserve(static_cast<std::size_t>(edge_count(p)));
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j) pairs_.emplace_back(i, j);
}

int EdgeIndex::position(int i, int j) const
{
    if (i > j) std::swap(i, j);
    if (i < 0 || j >= p_ || i == j) throw InvalidParameter("EdgeIndex: pair out of range");
    return i * p_ - i * (i + 1) / 2 + (j - i - 1);
}

std::string EdgeIndex::label(int pos) const
{
    const auto& [i, j] = pair(pos);
    return std::to_string(i + 1) + "_" + std::to_string(j + 1);
}

Matrix partial_correlation(const Matrix& omega)
{
    if (omega.rows() != omega.cols()) throw InvalidParameter("partial_correlation: matrix must be square");
    const Vector d = omega.diagonal();
    if ((d.array() <= 0.0).any()) throw InvalidParameter("partial_correlation: diagonal must be strictly positive");
    // sqrt(d_i * d_j) is symmetric in (i, j), so a symmetric omega gives an exactly symmetric result
    Matrix r(omega.rows(), omega.cols());
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        for (Eigen::Index j = 0; j < r.cols(); ++j)
            if (i != j) r(i, j) = std::clamp(omega(i, j) / std::sqrt(d(i) * d(j)), -kClamp, kClamp);
        r(i, i) = 1.0;
    }
    return r;
}

double fisher_transform(double r)
{
    if (std::isnan(r)) throw InvalidParameter("fisher_transform: NaN input");
    return std::atanh(std::clamp(r, -kClamp, kClamp));
}

Vector upper_triangle(const Matrix& m)
{
    const Eigen::Index p = m.rows();
    Vector v(p * (p - 1) / 2);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = i + 1; j < p; ++j) v(k++) = m(i, j);
    return v;
}

EdgeFeatureVector features_from_scan(const simgen::SubjectScan& scan, const clime::ClimeConfig& config)
{
    if (!scan.data.allFinite()) throw InvalidParameter("features_from_scan: scan has non-finite entries");
    const Matrix sigma = clime::sample_covariance(scan.data);
    const clime::TuningResult tuned = clime::select_lambda_dens(sigma, config);
    Vector w = upper_triangle(partial_correlation(tuned.solution.omega));
    for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = fisher_transform(w(k));
    return {std::move(w), scan.group, scan.dataset_id, tuned.solution.lambda};
}

std::vector<EdgeFeatureVector> features_for_scans_serial(std::span<const simgen::SubjectScan> scans,
                                                         const clime::ClimeConfig& config)
{
    std::vector<EdgeFeatureVector> out;
    out.reserve(scans.size());
    for (const auto& s : scans) out.push_back(features_from_scan(s, config));
    return out;
}

std::vector<EdgeFeatureVector> features_for_scans(std::span<const simgen::SubjectScan> scans,
                                                  const clime::ClimeConfig& config)
{
    const long n = static_cast<long>(scans.size());
    std::vector<EdgeFeatureVector> out(scans.size());
    std::vector<std::exception_ptr> errors(scans.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (long k = 0; k < n; ++k) {
        try {
            out[k] = features_from_scan(scans[k], config);
        } catch (...) {
            errors[k] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

} // namespace diffnet::netfeat
