#pragma once

#include "diffnet/common.hpp"

#include <vector>

namespace diffnet::lp {

enum class Status { Optimal, Infeasible, IterationLimit };

/// Dense-tableau dual simplex for
///
///     min c'x  s.t.  A x <= b,  x >= 0,   with c >= 0.
///
/// The all-slack basis is dual feasible because c >= 0, so no phase one is
/// needed. Changing b keeps the last optimal basis dual feasible: successive
/// solve() calls on a parametric right-hand side only pay for the pivots
/// between neighbouring optima.
class DualSimplex
{
public:
    DualSimplex(Matrix a, Vector c);

    Status solve(const Vector& b);

    /// Structural part of the current basic solution.
    Vector primal() const;
    double objective() const;
    long pivots() const { return pivots_; }
    int rows() const { return m_; }
    int cols() const { return n_; }

private:
    void refactor();
    void pivot(int r, int j);
    int choose_leaving(bool bland) const;
    int choose_entering(int r, bool bland) const;

    Matrix a_;
    Vector c_;
    Vector b_;
    int m_ = 0;
    int n_ = 0;
    Matrix tab_;              // B^{-1} [A I]
    Vector d_;                // reduced costs over all n + m columns
    Vector xb_;               // B^{-1} b
    std::vector<int> basis_;  // column index basic in each row
    std::vector<int> where_;  // row of a basic column, -1 if nonbasic
    long pivots_ = 0;
    long pivots_since_refactor_ = 0;
};

} // namespace diffnet::lp
