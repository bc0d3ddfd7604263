#include "diffnet/io.hpp"
#include "diffnet/netfeat.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace diffnet::io {

using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& line, char sep = ',')
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::string trim(std::string s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& raw, const fs::path& path, std::size_t line)
{
    const std::string s = trim(raw);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        std::ostringstream msg;
        msg << path.string() << ":" << line << ": not a number: '" << s << "'";
        throw IoError(msg.str());
    }
    return v;
}

int parse_int(const std::string& raw, const fs::path& path, std::size_t line)
{
    const std::string s = trim(raw);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        std::ostringstream msg;
        msg << path.string() << ":" << line << ": not an integer: '" << s << "'";
        throw IoError(msg.str());
    }
    return v;
}

std::ofstream open_out(const fs::path& path)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    return in;
}

void close(std::ofstream& out, const fs::path& path)
{
    out.close();
    if (!out) throw IoError("error while writing " + path.string());
}

// Parses "i_j" (1-based) into a 0-based pair.
simgen::Edge parse_label(const std::string& label, int p, const fs::path& path, std::size_t line)
{
    const auto us = label.find('_');
    if (us == std::string::npos) throw IoError(path.string() + ":" + std::to_string(line) + ": bad edge label '" + label + "'");
    const int i = parse_int(label.substr(0, us), path, line) - 1;
    const int j = parse_int(label.substr(us + 1), path, line) - 1;
    if (i < 0 || j <= i || (p > 0 && j >= p))
        throw IoError(path.string() + ":" + std::to_string(line) + ": edge label '" + label + "' out of range");
    return {i, j};
}

int nodes_for_edges(long d, const fs::path& path)
{
    int p = 2;
    while (netfeat::edge_count(p) < d) ++p;
    if (netfeat::edge_count(p) != d)
        throw IoError(path.string() + ": " + std::to_string(d) + " edge columns is not p(p-1)/2 for any p");
    return p;
}

json edges_json(const std::vector<simgen::Edge>& edges)
{
    json arr = json::array();
    for (const auto& e : edges) arr.push_back({e.i + 1, e.j + 1});
    return arr;
}

std::vector<simgen::Edge> edges_from_json(const json& arr)
{
    std::vector<simgen::Edge> out;
    for (const auto& e : arr) out.push_back({e.at(0).get<int>() - 1, e.at(1).get<int>() - 1});
    return out;
}

json design_json(const simgen::StudyDesign& d)
{
    return {{"datasets", d.datasets},
            {"p", d.p},
            {"q", d.q},
            {"n_case", d.n_case},
            {"n_control", d.n_control},
            {"rho_list", d.rho_list},
            {"temporal_rho_case", d.temporal_rho_case},
            {"temporal_rho_control", d.temporal_rho_control},
            {"structure", d.structure == simgen::GraphKind::Hub ? "hub" : "small_world"},
            {"hub_groups", d.hub_groups},
            {"sw_neighbors", d.sw_neighbors},
            {"sw_rewire", d.sw_rewire},
            {"shared_base", d.shared_base},
            {"seed", d.seed}};
}

simgen::StudyDesign design_from_json(const json& j)
{
    simgen::StudyDesign d;
    d.datasets = j.at("datasets");
    d.p = j.at("p");
    d.q = j.at("q");
    d.n_case = j.at("n_case");
    d.n_control = j.at("n_control");
    d.rho_list = j.at("rho_list").get<std::vector<double>>();
    d.temporal_rho_case = j.at("temporal_rho_case");
    d.temporal_rho_control = j.at("temporal_rho_control");
    const std::string kind = j.at("structure");
    d.structure = kind == "hub" ? simgen::GraphKind::Hub : simgen::GraphKind::SmallWorld;
    d.hub_groups = j.at("hub_groups");
    d.sw_neighbors = j.at("sw_neighbors");
    d.sw_rewire = j.at("sw_rewire");
    d.shared_base = j.at("shared_base");
    d.seed = j.at("seed");
    return d;
}

const char* group_name(simgen::Group g)
{
    return g == simgen::Group::Case ? "case" : "control";
}

simgen::Group parse_group(const std::string& s, const fs::path& path, std::size_t line)
{
    if (s == "case") return simgen::Group::Case;
    if (s == "control") return simgen::Group::Control;
    throw IoError(path.string() + ":" + std::to_string(line) + ": group must be 'case' or 'control', got '" + s + "'");
}

} // namespace

std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text)
{
    auto out = open_out(path);
    out << text;
    close(out, path);
}

std::string read_text(const fs::path& path)
{
    auto in = open_in(path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_matrix_csv(const fs::path& path, const Matrix& m)
{
    auto out = open_out(path);
    std::string line;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        line.clear();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) line += ',';
            line += format_double(m(r, c));
        }
        line += '\n';
        out << line;
    }
    close(out, path);
}

Matrix read_matrix_csv(const fs::path& path)
{
    auto in = open_in(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<double> row;
        for (const auto& cell : split(line)) row.push_back(parse_double(cell, path, lineno));
        if (!rows.empty() && row.size() != rows.front().size()) {
            std::ostringstream msg;
            msg << path.string() << ":" << lineno << ": expected " << rows.front().size() << " columns, found "
                << row.size();
            throw IoError(msg.str());
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError(path.string() + ": empty matrix file");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            if (!std::isfinite(rows[r][c]))
                throw IoError(path.string() + ":" + std::to_string(r + 1) + ": non-finite value");
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    return m;
}

void write_manifest(const fs::path& path, const Manifest& mf)
{
    json j;
    j["format"] = "diffnet-study/1";
    j["p"] = mf.p;
    j["q"] = mf.q;
    j["replication"] = mf.replication;
    if (mf.design) j["design"] = design_json(*mf.design);
    if (mf.temporal_rho_case || mf.temporal_rho_control) {
        json t;
        if (mf.temporal_rho_case) t["case"] = *mf.temporal_rho_case;
        if (mf.temporal_rho_control) t["control"] = *mf.temporal_rho_control;
        j["temporal_ar"] = t;
    }
    json ds = json::array();
    for (std::size_t m = 0; m < mf.datasets.size(); ++m) {
        const auto& d = mf.datasets[m];
        json e;
        e["id"] = m + 1;
        json scans = json::array();
        for (const auto& s : d.scans) scans.push_back({{"file", s.file}, {"group", group_name(s.group)}});
        e["scans"] = scans;
        if (d.truth) e["truth"] = edges_json(*d.truth);
        if (d.rho) e["rho"] = *d.rho;
        ds.push_back(e);
    }
    j["datasets"] = ds;
    write_text(path, j.dump(2) + "\n");
}

Manifest read_manifest(const fs::path& path)
{
    try {
        const json j = json::parse(read_text(path));
        Manifest mf;
        mf.p = j.at("p");
        mf.q = j.at("q");
        mf.replication = j.value("replication", 0);
        if (j.contains("design")) mf.design = design_from_json(j["design"]);
        if (j.contains("temporal_ar")) {
            const auto& t = j["temporal_ar"];
            if (t.contains("case")) mf.temporal_rho_case = t["case"].get<double>();
            if (t.contains("control")) mf.temporal_rho_control = t["control"].get<double>();
        }
        for (const auto& e : j.at("datasets")) {
            DatasetEntry d;
            for (const auto& s : e.at("scans"))
                d.scans.push_back({s.at("file").get<std::string>(), parse_group(s.at("group"), path, 0)});
            if (e.contains("truth")) d.truth = edges_from_json(e["truth"]);
            if (e.contains("rho")) d.rho = e["rho"].get<double>();
            mf.datasets.push_back(std::move(d));
        }
        if (mf.p < 2 || mf.q < 2) throw IoError(path.string() + ": p and q must be at least 2");
        return mf;
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": malformed manifest: " + e.what());
    }
}

void write_edges(const fs::path& path, const std::vector<simgen::Edge>& edges)
{
    auto out = open_out(path);
    out << "i,j\n";
    for (const auto& e : edges) out << e.i + 1 << ',' << e.j + 1 << '\n';
    close(out, path);
}

std::vector<simgen::Edge> read_edges(const fs::path& path)
{
    auto in = open_in(path);
    std::string line;
    std::size_t lineno = 0;
    std::vector<simgen::Edge> out;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 || trim(line).empty()) continue;
        const auto cells = split(line);
        if (cells.size() != 2) throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 'i,j'");
        const int i = parse_int(cells[0], path, lineno) - 1;
        const int j = parse_int(cells[1], path, lineno) - 1;
        if (i < 0 || j <= i) throw IoError(path.string() + ":" + std::to_string(lineno) + ": need 1 <= i < j");
        out.push_back({i, j});
    }
    return out;
}

void write_features(const fs::path& path, const FeatureTable& t)
{
    const netfeat::EdgeIndex index(t.p);
    if (t.features.cols() != index.size()) throw InvalidParameter("write_features: column count does not match p");
    auto out = open_out(path);
    out << "subject,dataset,group";
    for (Eigen::Index c = 0; c < t.confounders.cols(); ++c) out << ",q_" << c + 1;
    for (int l = 0; l < index.size(); ++l) out << ',' << index.label(l);
    out << '\n';
    std::string line;
    for (Eigen::Index r = 0; r < t.features.rows(); ++r) {
        const auto k = static_cast<std::size_t>(r);
        line = t.subjects[k] + ',' + std::to_string(t.dataset[k]) + ',' + group_name(t.group[k]);
        for (Eigen::Index c = 0; c < t.confounders.cols(); ++c) line += ',' + format_double(t.confounders(r, c));
        for (Eigen::Index c = 0; c < t.features.cols(); ++c) line += ',' + format_double(t.features(r, c));
        line += '\n';
        out << line;
    }
    close(out, path);
}

FeatureTable read_features(const fs::path& path)
{
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": empty feature file");
    const auto header = split(trim(line));
    if (header.size() < 4 || header[0] != "subject" || header[1] != "dataset" || header[2] != "group")
        throw IoError(path.string() + ":1: header must start with subject,dataset,group");
    std::size_t L = 0;
    while (3 + L < header.size() && header[3 + L].rfind("q_", 0) == 0) ++L;
    const std::size_t d = header.size() - 3 - L;
    FeatureTable t;
    t.p = nodes_for_edges(static_cast<long>(d), path);
    const netfeat::EdgeIndex index(t.p);
    for (std::size_t l = 0; l < d; ++l)
        if (header[3 + L + l] != index.label(static_cast<int>(l)))
            throw IoError(path.string() + ":1: edge column " + std::to_string(l + 1) + " should be " +
                          index.label(static_cast<int>(l)) + ", found " + header[3 + L + l]);

    std::vector<std::vector<double>> q, w;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split(trim(line));
        if (cells.size() != header.size()) {
            std::ostringstream msg;
            msg << path.string() << ":" << lineno << ": expected " << header.size() << " columns, found " << cells.size();
            throw IoError(msg.str());
        }
        t.subjects.push_back(cells[0]);
        t.dataset.push_back(parse_int(cells[1], path, lineno));
        t.group.push_back(parse_group(trim(cells[2]), path, lineno));
        std::vector<double> qr, wr;
        for (std::size_t c = 0; c < L; ++c) qr.push_back(parse_double(cells[3 + c], path, lineno));
        for (std::size_t c = 0; c < d; ++c) wr.push_back(parse_double(cells[3 + L + c], path, lineno));
        q.push_back(std::move(qr));
        w.push_back(std::move(wr));
    }
    const auto n = static_cast<Eigen::Index>(w.size());
    t.confounders.resize(n, static_cast<Eigen::Index>(L));
    t.features.resize(n, static_cast<Eigen::Index>(d));
    for (Eigen::Index r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < L; ++c) t.confounders(r, static_cast<Eigen::Index>(c)) = q[r][c];
        for (std::size_t c = 0; c < d; ++c) t.features(r, static_cast<Eigen::Index>(c)) = w[r][c];
    }
    return t;
}

sgmcp::JointDesign design_from_tables(const std::vector<FeatureTable>& tables)
{
    sgmcp::JointDesign design;
    for (const auto& t : tables) {
        sgmcp::DatasetBlock b;
        b.features = t.features;
        b.confounders = t.confounders;
        b.labels.resize(t.features.rows());
        for (Eigen::Index r = 0; r < b.labels.size(); ++r)
            b.labels(r) = t.group[static_cast<std::size_t>(r)] == simgen::Group::Case ? 1.0 : 0.0;
        design.datasets.push_back(std::move(b));
    }
    design.validate();
    return design;
}

void write_fit(const fs::path& path, const sgmcp::CoefficientFit& fit, int p)
{
    const netfeat::EdgeIndex index(p);
    if (index.size() != fit.theta_beta.rows()) throw InvalidParameter("write_fit: p does not match theta_beta");
    json j;
    j["p"] = p;
    j["datasets"] = fit.theta_beta.cols();
    j["params"] = {{"lambda1", fit.params.lambda1},
                   {"lambda2", fit.params.lambda2},
                   {"gamma1", fit.params.gamma1},
                   {"gamma2", fit.params.gamma2}};
    json eta = json::array();
    for (const auto& e : fit.theta_eta) eta.push_back(std::vector<double>(e.data(), e.data() + e.size()));
    j["theta_eta"] = eta;
    json beta = json::array();
    for (int l = 0; l < index.size(); ++l)
        for (Eigen::Index m = 0; m < fit.theta_beta.cols(); ++m)
            if (fit.theta_beta(l, m) != 0.0)
                beta.push_back({{"edge", index.label(l)}, {"dataset", m + 1}, {"value", fit.theta_beta(l, m)}});
    j["theta_beta"] = beta;
    j["objective_trace"] = fit.objective_trace;
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    write_text(path, j.dump(2) + "\n");
}

sgmcp::CoefficientFit read_fit(const fs::path& path, int* p_out)
{
    try {
        const json j = json::parse(read_text(path));
        const int p = j.at("p");
        const int M = j.at("datasets");
        const netfeat::EdgeIndex index(p);
        sgmcp::CoefficientFit fit;
        const auto& pp = j.at("params");
        fit.params = {pp.at("lambda1"), pp.at("lambda2"), pp.at("gamma1"), pp.at("gamma2")};
        for (const auto& e : j.at("theta_eta")) {
            const auto v = e.get<std::vector<double>>();
            fit.theta_eta.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
        }
        fit.theta_beta = Matrix::Zero(index.size(), M);
        for (const auto& t : j.at("theta_beta")) {
            const auto e = parse_label(t.at("edge"), p, path, 0);
            const int m = t.at("dataset").get<int>() - 1;
            if (m < 0 || m >= M) throw IoError(path.string() + ": dataset id out of range");
            fit.theta_beta(index.position(e.i, e.j), m) = t.at("value").get<double>();
        }
        fit.objective_trace = j.value("objective_trace", std::vector<double>{});
        fit.converged = j.value("converged", false);
        fit.iterations = j.value("iterations", 0);
        if (static_cast<int>(fit.theta_eta.size()) != M) throw IoError(path.string() + ": theta_eta needs one entry per dataset");
        if (p_out) *p_out = p;
        return fit;
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": malformed fit file: " + e.what());
    }
}

void write_psi(const fs::path& path, const ensemble::EdgeWeightMatrix& w)
{
    const netfeat::EdgeIndex index(w.p);
    if (index.size() != w.psi.rows()) throw InvalidParameter("write_psi: p does not match psi");
    auto out = open_out(path);
    out << "edge";
    for (Eigen::Index m = 0; m < w.psi.cols(); ++m) out << ',' << m + 1;
    out << '\n';
    for (int l = 0; l < index.size(); ++l) {
        out << index.label(l);
        for (Eigen::Index m = 0; m < w.psi.cols(); ++m) out << ',' << format_double(w.psi(l, m));
        out << '\n';
    }
    close(out, path);
}

ensemble::EdgeWeightMatrix read_psi(const fs::path& path, int B)
{
    if (B < 1) throw InvalidParameter("read_psi: B must be at least 1");
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": empty psi file");
    const auto header = split(trim(line));
    if (header.size() < 2 || header[0] != "edge") throw IoError(path.string() + ":1: header must be edge,1,...,M");
    const std::size_t M = header.size() - 1;
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split(trim(line));
        if (cells.size() != M + 1) throw IoError(path.string() + ":" + std::to_string(lineno) + ": wrong column count");
        std::vector<double> r;
        for (std::size_t m = 0; m < M; ++m) r.push_back(parse_double(cells[m + 1], path, lineno));
        rows.push_back(std::move(r));
    }
    ensemble::EdgeWeightMatrix w;
    w.p = nodes_for_edges(static_cast<long>(rows.size()), path);
    w.B = w.requested = B;
    w.psi.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(M));
    w.counts.resize(w.psi.rows(), w.psi.cols());
    for (Eigen::Index l = 0; l < w.psi.rows(); ++l)
        for (Eigen::Index m = 0; m < w.psi.cols(); ++m) {
            const double v = rows[static_cast<std::size_t>(l)][static_cast<std::size_t>(m)];
            w.psi(l, m) = v;
            w.counts(l, m) = static_cast<int>(std::lround(v * B));
        }
    return w;
}

void write_scores(const fs::path& path, const std::vector<ScoreRow>& rows)
{
    auto out = open_out(path);
    out << "method,dataset,tau,tp,fp,tn,fn,tpr,tnr,tdr\n";
    for (const auto& r : rows) {
        const auto& s = r.score;
        out << r.method << ',' << r.dataset << ',' << format_double(r.tau) << ',' << s.tp << ',' << s.fp << ',' << s.tn
            << ',' << s.fn << ',' << (s.tpr ? format_double(*s.tpr) : "NA") << ','
            << (s.tnr ? format_double(*s.tnr) : "NA") << ',' << (s.tdr ? format_double(*s.tdr) : "NA") << '\n';
    }
    close(out, path);
}

void write_pr_curve(const fs::path& path, const std::vector<metrics::PrPoint>& curve)
{
    auto out = open_out(path);
    out << "tau,recall,precision\n";
    for (const auto& pt : curve)
        out << format_double(pt.tau) << ',' << (pt.recall ? format_double(*pt.recall) : "NA") << ','
            << (pt.precision ? format_double(*pt.precision) : "NA") << '\n';
    close(out, path);
}

} // namespace diffnet::io
