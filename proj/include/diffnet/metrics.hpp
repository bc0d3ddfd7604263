#pragma once

#include "diffnet/common.hpp"
#include "diffnet/simgen.hpp"

#include <optional>
#include <string>
#include <vector>

namespace diffnet::metrics {

using simgen::Edge;

/// Counts over the p(p-1)/2 node pairs. A rate is empty when its denominator
/// is zero.
struct RecoveryScore
{
    long tp = 0, fp = 0, tn = 0, fn = 0;
    std::optional<double> tpr, tnr, tdr;
};

/// Edges are 0-based with i < j; duplicates are ignored.
RecoveryScore score_support(const std::vector<Edge>& truth, const std::vector<Edge>& estimate, int p);

struct PrPoint
{
    double tau = 0.0;
    std::optional<double> recall;
    std::optional<double> precision;
};

/// Scores of {l : psi(l) > tau} for tau = 0, 1/B, ..., (B-1)/B. psi is
/// indexed by feature position (netfeat::EdgeIndex order).
std::vector<PrPoint> pr_curve(const Vector& psi, const std::vector<Edge>& truth, int p, int B);

/// Grid tau maximizing TPR + TDR, counting an undefined TDR as 0; ties go to
/// the larger tau. Throws InvalidParameter when truth is empty.
double select_tau_max_tpr_tdr(const Vector& psi, const std::vector<Edge>& truth, int p, int B);

struct SummaryRow
{
    std::string method;
    int dataset = 0; // 1-based in the rendered table
    RecoveryScore score;
};

/// Plain-text table, one line per method, with TPR/TNR/TDR columns per
/// dataset in percent. Undefined rates print as "NA".
std::string format_summary(const std::vector<SummaryRow>& rows);

/// Rate or "NA".
std::string format_rate(const std::optional<double>& rate, int precision = 6);

} // namespace diffnet::metrics
