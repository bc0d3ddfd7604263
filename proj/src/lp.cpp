#include "diffnet/lp.hpp"

#include <cmath>
#include <limits>

namespace diffnet::lp {

namespace {
constexpr double kFeasTol = 1e-10;
constexpr double kPivotTol = 1e-11;
constexpr double kRatioTieTol = 1e-13;
constexpr int kDegenerateBeforeBland = 64;
} // namespace

DualSimplex::DualSimplex(Matrix a, Vector c)
    : a_(std::move(a)), c_(std::move(c))
{
    m_ = static_cast<int>(a_.rows());
    n_ = static_cast<int>(a_.cols());
    if (c_.size() != n_) throw InvalidParameter("DualSimplex: cost vector size mismatch");
    if ((c_.array() < 0.0).any()) throw InvalidParameter("DualSimplex: costs must be nonnegative");

    tab_.resize(m_, n_ + m_);
    tab_.leftCols(n_) = a_;
    tab_.rightCols(m_).setIdentity();
    d_.resize(n_ + m_);
    d_.head(n_) = c_;
    d_.tail(m_).setZero();
    basis_.resize(m_);
    where_.assign(n_ + m_, -1);
    for (int i = 0; i < m_; ++i) {
        basis_[i] = n_ + i;
        where_[n_ + i] = i;
    }
    xb_ = Vector::Zero(m_);
}

void DualSimplex::refactor()
{
    Matrix basis_cols(m_, m_);
    for (int i = 0; i < m_; ++i) {
        const int col = basis_[i];
        if (col < n_) basis_cols.col(i) = a_.col(col);
        else basis_cols.col(i) = Vector::Unit(m_, col - n_);
    }
    Eigen::PartialPivLU<Matrix> lu(basis_cols);
    tab_.leftCols(n_) = lu.solve(a_);
    tab_.rightCols(m_) = lu.inverse();
    Vector cb(m_);
    for (int i = 0; i < m_; ++i) cb(i) = basis_[i] < n_ ? c_(basis_[i]) : 0.0;
    d_.head(n_) = c_ - tab_.leftCols(n_).transpose() * cb;
    d_.tail(m_) = -tab_.rightCols(m_).transpose() * cb;
    for (int i = 0; i < m_; ++i) d_(basis_[i]) = 0.0;
    pivots_since_refactor_ = 0;
}

int DualSimplex::choose_leaving(bool bland) const
{
    int r = -1;
    double worst = -kFeasTol;
    for (int i = 0; i < m_; ++i) {
        if (xb_(i) >= -kFeasTol) continue;
        if (bland) {
            if (r < 0 || basis_[i] < basis_[r]) r = i;
        } else if (xb_(i) < worst) {
            worst = xb_(i);
            r = i;
        }
    }
    return r;
}

int DualSimplex::choose_entering(int r, bool bland) const
{
    int best = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    double best_mag = 0.0;
    for (int j = 0; j < n_ + m_; ++j) {
        if (where_[j] >= 0) continue;
        const double alpha = tab_(r, j);
        if (alpha >= -kPivotTol) continue;
        const double ratio = std::max(d_(j), 0.0) / -alpha;
        if (ratio < best_ratio - kRatioTieTol) {
            best = j;
            best_ratio = ratio;
            best_mag = -alpha;
        } else if (ratio <= best_ratio + kRatioTieTol && !bland && -alpha > best_mag) {
            best = j;
            best_ratio = std::min(best_ratio, ratio);
            best_mag = -alpha;
        }
    }
    return best;
}

void DualSimplex::pivot(int r, int j)
{
    const double piv = tab_(r, j);
    tab_.row(r) /= piv;
    xb_(r) /= piv;

    Vector col = tab_.col(j);
    col(r) = 0.0;
    tab_.noalias() -= col * tab_.row(r);
    xb_ -= col * xb_(r);
    d_ -= d_(j) * tab_.row(r).transpose();
    d_(j) = 0.0;

    where_[basis_[r]] = -1;
    basis_[r] = j;
    where_[j] = r;
    ++pivots_;
    ++pivots_since_refactor_;
}

Status DualSimplex::solve(const Vector& b)
{
    if (b.size() != m_) throw InvalidParameter("DualSimplex: rhs size mismatch");
    b_ = b;
    if (pivots_since_refactor_ > 0) refactor();
    xb_ = tab_.rightCols(m_) * b_;

    const long limit = 50L * (m_ + n_) + 1000;
    long iterations = 0;
    int degenerate = 0;
    bool refined = false;
    while (true) {
        const bool bland = degenerate > kDegenerateBeforeBland;
        const int r = choose_leaving(bland);
        if (r < 0) {
            if (refined) return Status::Optimal;
            // Recompute the basic solution from scratch before declaring optimality.
            refactor();
            xb_ = tab_.rightCols(m_) * b_;
            refined = true;
            continue;
        }
        refined = false;
        const int j = choose_entering(r, bland);
        if (j < 0) return Status::Infeasible;
        degenerate = (d_(j) <= kRatioTieTol) ? degenerate + 1 : 0;
        pivot(r, j);
        if (++iterations > limit) return Status::IterationLimit;
    }
}

Vector DualSimplex::primal() const
{
    Vector x = Vector::Zero(n_);
    for (int i = 0; i < m_; ++i)
        if (basis_[i] < n_) x(basis_[i]) = std::max(xb_(i), 0.0);
    return x;
}

double DualSimplex::objective() const
{
    return c_.dot(primal());
}

} // namespace diffnet::lp
