#pragma once

#include "diffnet/rng.hpp"
#include "diffnet/sgmcp.hpp"

#include <cmath>
#include <random>

namespace testing {

// Random joint design with labels drawn from a logistic model. `signal`
// scales the true coefficients; small values keep the classes overlapping.
inline diffnet::sgmcp::JointDesign random_design(diffnet::Engine& rng, int M, int n, int d, int L, double signal = 0.5,
                                                 int informative = -1)
{
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (informative < 0) informative = d;
    diffnet::sgmcp::JointDesign design;
    for (int m = 0; m < M; ++m) {
        diffnet::sgmcp::DatasetBlock b;
        b.features.resize(n, d);
        b.confounders.resize(n, L);
        b.labels.resize(n);
        diffnet::Vector beta = diffnet::Vector::Zero(d);
        for (int l = 0; l < informative; ++l) beta(l) = signal * (l % 2 == 0 ? 1.0 : -1.0);
        for (int k = 0; k < n; ++k) {
            double xi = 0.0;
            for (int l = 0; l < d; ++l) {
                b.features(k, l) = z(rng) * (1.0 + 0.3 * l) + 0.1 * m;
                xi += beta(l) * b.features(k, l);
            }
            for (int c = 0; c < L; ++c) {
                b.confounders(k, c) = z(rng);
                xi += 0.3 * b.confounders(k, c);
            }
            b.labels(k) = u(rng) < 1.0 / (1.0 + std::exp(-xi)) ? 1.0 : 0.0;
        }
        // both classes present
        b.labels(0) = 1.0;
        b.labels(1) = 0.0;
        design.datasets.push_back(std::move(b));
    }
    return design;
}

} // namespace testing
