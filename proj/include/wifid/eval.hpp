#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace wifid {

struct RocPoint {
    double threshold;
    double tpr;
    double fpr;
};

struct RocCurve {
    std::vector<RocPoint> points;  // FPR non-decreasing, (0,0) .. (1,1)
    std::size_t n_id = 0;
    std::size_t n_ood = 0;
};

// OOD is the positive class; prediction is positive when score >= threshold.
inline RocCurve roc(const std::vector<float>& id_scores,
                    const std::vector<float>& ood_scores) {
    if (id_scores.empty() || ood_scores.empty())
        throw std::invalid_argument("roc: both score lists must be non-empty");
    std::vector<double> thresholds;
    thresholds.reserve(id_scores.size() + ood_scores.size());
    for (float v : id_scores) thresholds.push_back(v);
    for (float v : ood_scores) thresholds.push_back(v);
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    std::vector<double> id_sorted(id_scores.begin(), id_scores.end());
    std::vector<double> ood_sorted(ood_scores.begin(), ood_scores.end());
    std::sort(id_sorted.begin(), id_sorted.end(), std::greater<>());
    std::sort(ood_sorted.begin(), ood_sorted.end(), std::greater<>());

    RocCurve curve;
    curve.n_id = id_scores.size();
    curve.n_ood = ood_scores.size();
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    for (double tau : thresholds) {
        while (tp < ood_sorted.size() && ood_sorted[tp] >= tau) ++tp;
        while (fp < id_sorted.size() && id_sorted[fp] >= tau) ++fp;
        curve.points.push_back({tau, double(tp) / curve.n_ood, double(fp) / curve.n_id});
    }
    if (curve.points.back().tpr != 1.0 || curve.points.back().fpr != 1.0)
        curve.points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});
    return curve;
}

// trapezoidal area over FPR; equals the Mann-Whitney statistic
// P(s_ood > s_id) + 0.5 P(tie) for the same score sets
inline double auroc(const RocCurve& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
    }
    return area;
}

inline double auroc(const std::vector<float>& id_scores,
                    const std::vector<float>& ood_scores) {
    return auroc(roc(id_scores, ood_scores));
}

// Per-example scores for one dataset, cell-addressable by (mod, sir_bin).
struct ScoreTable {
    int n_mod = 0;
    int n_sir_bins = 0;
    std::vector<double> sir_grid_db;
    std::string model;    // e.g. "msp"
    bool oe = false;
    std::string dataset;  // dataset kind name
    std::uint64_t seed = 0;
    // cells[mod * n_sir_bins + sir_bin] -> scores in example order
    std::vector<std::vector<float>> cells;

    void init(int nm, int ns) {
        n_mod = nm;
        n_sir_bins = ns;
        cells.assign(std::size_t(nm) * ns, {});
    }
    std::vector<float>& cell(int mod, int sir_bin) {
        return cells.at(std::size_t(mod) * n_sir_bins + sir_bin);
    }
    const std::vector<float>& cell(int mod, int sir_bin) const {
        return cells.at(std::size_t(mod) * n_sir_bins + sir_bin);
    }
    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& c : cells) n += c.size();
        return n;
    }
};

struct AurocGrid {
    int n_mod = 0;
    int n_sir_bins = 0;
    std::vector<double> sir_grid_db;
    std::string model;
    bool oe = false;
    std::string dataset;
    std::uint64_t seed = 0;
    std::vector<double> values;  // n_mod x n_sir_bins, row-major

    double& at(int mod, int sir_bin) {
        return values.at(std::size_t(mod) * n_sir_bins + sir_bin);
    }
    double at(int mod, int sir_bin) const {
        return values.at(std::size_t(mod) * n_sir_bins + sir_bin);
    }
};

// One ROC + AUROC per (mod, sir_bin) cell; ID scores come from the matching
// Din cell, OOD scores from the test-dataset cell.
inline AurocGrid evaluate_experiment(const ScoreTable& din, const ScoreTable& dout,
                                     std::vector<RocCurve>* curves = nullptr) {
    if (din.n_mod != dout.n_mod || din.n_sir_bins != dout.n_sir_bins)
        throw std::invalid_argument("evaluate_experiment: table geometry mismatch");
    if (!din.sir_grid_db.empty() && !dout.sir_grid_db.empty() &&
        din.sir_grid_db != dout.sir_grid_db)
        throw std::invalid_argument("evaluate_experiment: SIR grids differ between tables");
    AurocGrid grid;
    grid.n_mod = dout.n_mod;
    grid.n_sir_bins = dout.n_sir_bins;
    grid.sir_grid_db = dout.sir_grid_db;
    grid.model = dout.model;
    grid.oe = dout.oe;
    grid.dataset = dout.dataset;
    grid.seed = dout.seed;
    grid.values.resize(std::size_t(grid.n_mod) * grid.n_sir_bins);
    for (int m = 0; m < grid.n_mod; ++m)
        for (int s = 0; s < grid.n_sir_bins; ++s) {
            const auto& id = din.cell(m, s);
            const auto& ood = dout.cell(m, s);
            if (id.empty() || ood.empty())
                throw std::runtime_error("evaluate_experiment: missing scores at cell (mod=" +
                                         std::to_string(m) + ", sir_bin=" +
                                         std::to_string(s) + ")");
            RocCurve c = roc(id, ood);
            grid.at(m, s) = auroc(c);
            if (curves) curves->push_back(std::move(c));
        }
    return grid;
}

// ---- persistence: columnar score table and grid CSV, '#' header lines ----

inline void write_score_table(const ScoreTable& t, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("write_score_table: cannot open " + path);
    f << "# wifid-scores v1\n";
    f << "# model=" << t.model << " oe=" << (t.oe ? 1 : 0) << " dataset=" << t.dataset
      << " seed=" << t.seed << "\n";
    f << "# n_mod=" << t.n_mod << " n_sir_bins=" << t.n_sir_bins << "\n";
    f << "# sir_grid_db=";
    for (std::size_t i = 0; i < t.sir_grid_db.size(); ++i)
        f << (i ? "," : "") << t.sir_grid_db[i];
    f << "\n";
    f << "mod,sir_bin,index,score\n";
    f.precision(9);
    for (int m = 0; m < t.n_mod; ++m)
        for (int s = 0; s < t.n_sir_bins; ++s) {
            const auto& c = t.cell(m, s);
            for (std::size_t i = 0; i < c.size(); ++i)
                f << m << "," << s << "," << i << "," << c[i] << "\n";
        }
    if (!f) throw std::runtime_error("write_score_table: write failed for " + path);
}

inline ScoreTable read_score_table(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_score_table: cannot open " + path);
    ScoreTable t;
    std::string line;
    auto parse_kv = [](const std::string& s, const std::string& key) -> std::string {
        const auto pos = s.find(key + "=");
        if (pos == std::string::npos) return {};
        auto end = s.find(' ', pos);
        return s.substr(pos + key.size() + 1,
                        end == std::string::npos ? std::string::npos
                                                 : end - pos - key.size() - 1);
    };
    int nm = 0, ns = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (auto v = parse_kv(line, "model"); !v.empty()) t.model = v;
            if (auto v = parse_kv(line, "oe"); !v.empty()) t.oe = v == "1";
            if (auto v = parse_kv(line, "dataset"); !v.empty()) t.dataset = v;
            if (auto v = parse_kv(line, "seed"); !v.empty()) t.seed = std::stoull(v);
            if (auto v = parse_kv(line, "n_mod"); !v.empty()) nm = std::stoi(v);
            if (auto v = parse_kv(line, "n_sir_bins"); !v.empty()) ns = std::stoi(v);
            if (auto v = parse_kv(line, "sir_grid_db"); !v.empty()) {
                std::stringstream ss(v);
                std::string tok;
                while (std::getline(ss, tok, ',')) t.sir_grid_db.push_back(std::stod(tok));
            }
            continue;
        }
        if (line.rfind("mod,", 0) == 0) break;  // column header
    }
    if (nm <= 0 || ns <= 0)
        throw std::runtime_error("read_score_table: missing geometry header in " + path);
    t.init(nm, ns);
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string tok;
        int vals[3];
        for (int i = 0; i < 3; ++i) {
            if (!std::getline(ss, tok, ','))
                throw std::runtime_error("read_score_table: malformed row '" + line + "'");
            vals[i] = std::stoi(tok);
        }
        if (!std::getline(ss, tok, ','))
            throw std::runtime_error("read_score_table: malformed row '" + line + "'");
        t.cell(vals[0], vals[1]).push_back(std::stof(tok));
    }
    return t;
}

// grid as CSV: rows = modulations, columns = SIR dB values
inline void write_grid_csv(const AurocGrid& g, const std::string& path) {
    if (g.values.empty()) throw std::invalid_argument("write_grid_csv: empty grid");
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("write_grid_csv: cannot open " + path);
    f << "# wifid-auroc-grid v1\n";
    f << "# model=" << g.model << " oe=" << (g.oe ? 1 : 0) << " dataset=" << g.dataset
      << " seed=" << g.seed << "\n";
    f << "mod";
    for (int s = 0; s < g.n_sir_bins; ++s)
        f << ",sir_" << (s < static_cast<int>(g.sir_grid_db.size())
                             ? std::to_string(g.sir_grid_db[s])
                             : std::to_string(s));
    f << "\n";
    f.precision(9);
    for (int m = 0; m < g.n_mod; ++m) {
        f << m;
        for (int s = 0; s < g.n_sir_bins; ++s) f << "," << g.at(m, s);
        f << "\n";
    }
    if (!f) throw std::runtime_error("write_grid_csv: write failed for " + path);
}

inline AurocGrid read_grid_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_grid_csv: cannot open " + path);
    AurocGrid g;
    std::string line;
    std::vector<std::vector<double>> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') continue;
        if (line.rfind("mod", 0) == 0) continue;
        std::stringstream ss(line);
        std::string tok;
        std::getline(ss, tok, ',');  // mod index
        std::vector<double> row;
        while (std::getline(ss, tok, ',')) row.push_back(std::stod(tok));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("read_grid_csv: no data rows in " + path);
    g.n_mod = static_cast<int>(rows.size());
    g.n_sir_bins = static_cast<int>(rows[0].size());
    for (const auto& r : rows)
        g.values.insert(g.values.end(), r.begin(), r.end());
    return g;
}

inline void write_roc_points(const RocCurve& c, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("write_roc_points: cannot open " + path);
    f << "# wifid-roc v1  n_id=" << c.n_id << " n_ood=" << c.n_ood << "\n";
    f << "threshold,tpr,fpr\n";
    f.precision(9);
    for (const auto& p : c.points)
        f << p.threshold << "," << p.tpr << "," << p.fpr << "\n";
}

}  // namespace wifid
