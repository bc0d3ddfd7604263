#include "diffnet/metrics.hpp"
#include "diffnet/netfeat.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

namespace diffnet::metrics {

namespace {

std::vector<char> mark(const std::vector<Edge>& edges, const netfeat::EdgeIndex& index, const char* what)
{
    std::vector<char> in(static_cast<std::size_t>(index.size()), 0);
    for (const auto& e : edges) {
        if (e.i < 0 || e.j >= index.p() || e.i >= e.j) {
            std::ostringstream msg;
            msg << "score_support: " << what << " edge (" << e.i + 1 << "," << e.j + 1 << ") is outside 1 <= i < j <= "
                << index.p();
            throw InvalidParameter(msg.str());
        }
        in[static_cast<std::size_t>(index.position(e.i, e.j))] = 1;
    }
    return in;
}

std::optional<double> ratio(long num, long den)
{
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

RecoveryScore from_counts(long tp, long fp, long tn, long fn)
{
    RecoveryScore s{tp, fp, tn, fn, {}, {}, {}};
    s.tpr = ratio(tp, tp + fn);
    s.tnr = ratio(tn, tn + fp);
    s.tdr = ratio(tp, tp + fp);
    return s;
}

void check_grid(const Vector& psi, int p, int B)
{
    if (B < 1) throw InvalidParameter("pr_curve: B must be at least 1");
    if (psi.size() != netfeat::edge_count(p)) throw InvalidParameter("pr_curve: psi length does not match p");
    for (Eigen::Index l = 0; l < psi.size(); ++l) {
        const double c = psi(l) * B;
        if (!(psi(l) >= 0.0 && psi(l) <= 1.0) || std::abs(c - std::round(c)) > 1e-9)
            throw InvalidParameter("pr_curve: psi entries must be multiples of 1/B in [0,1]");
    }
}

} // namespace

RecoveryScore score_support(const std::vector<Edge>& truth, const std::vector<Edge>& estimate, int p)
{
    if (p < 2) throw InvalidParameter("score_support: p must be at least 2");
    const netfeat::EdgeIndex index(p);
    const auto t = mark(truth, index, "truth");
    const auto e = mark(estimate, index, "estimate");
    long tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t l = 0; l < t.size(); ++l) {
        if (t[l]) (e[l] ? tp : fn)++;
        else (e[l] ? fp : tn)++;
    }
    return from_counts(tp, fp, tn, fn);
}

std::vector<PrPoint> pr_curve(const Vector& psi, const std::vector<Edge>& truth, int p, int B)
{
    check_grid(psi, p, B);
    const netfeat::EdgeIndex index(p);
    const auto t = mark(truth, index, "truth");
    // counts[k]: positions whose psi equals k / B
    std::vector<long> pos(B + 1, 0), neg(B + 1, 0);
    for (Eigen::Index l = 0; l < psi.size(); ++l) {
        const auto k = static_cast<std::size_t>(std::lround(psi(l) * B));
        (t[static_cast<std::size_t>(l)] ? pos : neg)[k]++;
    }
    long total_pos = 0, total_neg = 0;
    for (int k = 0; k <= B; ++k) {
        total_pos += pos[k];
        total_neg += neg[k];
    }
    std::vector<PrPoint> curve;
    // predictions at tau = k/B are the positions with count > k
    long tp = total_pos, fp = total_neg;
    for (int k = 0; k < B; ++k) {
        tp -= pos[k];
        fp -= neg[k];
        const RecoveryScore s = from_counts(tp, fp, total_neg - fp, total_pos - tp);
        curve.push_back({static_cast<double>(k) / B, s.tpr, s.tdr});
    }
    return curve;
}

double select_tau_max_tpr_tdr(const Vector& psi, const std::vector<Edge>& truth, int p, int B)
{
    if (truth.empty()) throw InvalidParameter("select_tau_max_tpr_tdr: empty truth, TPR is undefined");
    const auto curve = pr_curve(psi, truth, p, B);
    double best_tau = curve.front().tau;
    double best = -1.0;
    for (const auto& pt : curve) {
        const double v = pt.recall.value_or(0.0) + pt.precision.value_or(0.0);
        if (v >= best) {
            best = v;
            best_tau = pt.tau;
        }
    }
    return best_tau;
}

std::string format_rate(const std::optional<double>& rate, int precision)
{
    if (!rate) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, *rate);
    return buf;
}

std::string format_summary(const std::vector<SummaryRow>& rows)
{
    std::vector<std::string> methods;
    std::map<int, int> dataset_cols;
    for (const auto& r : rows) {
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
        dataset_cols.emplace(r.dataset, 0);
    }
    std::size_t width = 6;
    for (const auto& m : methods) width = std::max(width, m.size());

    std::ostringstream out;
    char buf[64];
    out << std::string(width, ' ');
    for (const auto& [ds, _] : dataset_cols) {
        std::snprintf(buf, sizeof buf, " | %-20s", ("Dataset " + std::to_string(ds)).c_str());
        out << buf;
    }
    out << '\n' << std::string(width, ' ');
    for (std::size_t k = 0; k < dataset_cols.size(); ++k) out << " | " << "TPR    TNR    TDR   ";
    out << '\n';
    auto pct = [](const std::optional<double>& r) {
        char b[16];
        if (!r) return std::string("NA    ");
        std::snprintf(b, sizeof b, "%-6.1f", 100.0 * *r);
        return std::string(b);
    };
    for (const auto& m : methods) {
        out << m << std::string(width - m.size(), ' ');
        for (const auto& [ds, _] : dataset_cols) {
            const auto it = std::find_if(rows.begin(), rows.end(),
                                         [&](const SummaryRow& r) { return r.method == m && r.dataset == ds; });
            if (it == rows.end()) {
                out << " | " << "NA     NA     NA    ";
                continue;
            }
            out << " | " << pct(it->score.tpr) << ' ' << pct(it->score.tnr) << ' ' << pct(it->score.tdr);
        }
        out << '\n';
    }
    return out.str();
}

} // namespace diffnet::metrics
