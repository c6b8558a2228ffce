#include "mfg/model.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mfg/errors.hpp"

namespace mfg {

namespace {

using nlohmann::json;

void check_shape(const Schedule& s, const char* name, long r, long c, int nodes) {
    if (s.nodes() != nodes)
        throw StructuralError(std::string(name) + ": expected " +
                              std::to_string(nodes) + " nodes, got " +
                              std::to_string(s.nodes()));
    if (!s.uniform_shape(r, c))
        throw StructuralError(std::string(name) + ": expected shape " +
                              std::to_string(r) + "x" + std::to_string(c));
}

double asymmetry(const Mat& X) {
    return (X - X.transpose()).cwiseAbs().maxCoeff();
}

double min_eig_sym(const Mat& X) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (X + X.transpose()),
                                          Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

bool all_finite(const Mat& X) { return X.allFinite(); }

}  // namespace

ValidationReport validate_spec(const ModelSpec& spec, const TimeGrid& grid,
                               double epd) {
    const int n = spec.dims.n, k = spec.dims.k, m = spec.dims.m, d = spec.dims.d;
    if (!spec.dims.valid())
        throw StructuralError("dimensions must all be >= 1");
    const int nodes = grid.K + 1;
    check_shape(spec.A, "A", n, n, nodes);
    check_shape(spec.Atil, "Atil", n, n, nodes);
    check_shape(spec.B, "B", n, k, nodes);
    check_shape(spec.Btil, "Btil", n, k, nodes);
    check_shape(spec.Bhat, "Bhat", n, k, nodes);
    check_shape(spec.sigma, "sigma", n, m, nodes);
    check_shape(spec.sigma0, "sigma0", n, d, nodes);
    check_shape(spec.R, "R", n, n, nodes);
    check_shape(spec.Rtil, "Rtil", n, n, nodes);
    check_shape(spec.Nc, "Nc", k, k, nodes);
    check_shape(spec.Nctil, "Nctil", k, k, nodes);
    if (spec.M.rows() != n || spec.M.cols() != n)
        throw StructuralError("M: expected shape n x n");
    if (spec.a.size() != n) throw StructuralError("a: expected length n");
    if (static_cast<int>(spec.xi_hist.size()) != grid.p)
        throw StructuralError("xi_hist: expected p samples");
    if (static_cast<int>(spec.eta_hist.size()) != grid.q)
        throw StructuralError("eta_hist: expected q samples");
    for (const Vec& v : spec.xi_hist)
        if (v.size() != n) throw StructuralError("xi_hist entry: expected length n");
    for (const Vec& v : spec.eta_hist)
        if (v.size() != k) throw StructuralError("eta_hist entry: expected length k");

    ValidationReport rep;
    auto violate = [&](const std::string& id, int node, double diag) {
        rep.ok = false;
        rep.violations.push_back({id, node, diag});
    };

    const double sym_tol = 1e-12;
    for (int s = 0; s <= grid.K; ++s) {
        for (auto [sched, id] : {std::pair<const Schedule*, const char*>{&spec.R, "H2:R_sym"},
                                 {&spec.Rtil, "H2:Rtil_sym"},
                                 {&spec.Nc, "H2:Nc_sym"},
                                 {&spec.Nctil, "H2:Nctil_sym"}}) {
            double as = asymmetry(sched->at(s));
            if (!(as <= sym_tol)) violate(id, s, as);
        }
        for (auto [sched, id] : {std::pair<const Schedule*, const char*>{&spec.A, "H1:A_finite"},
                                 {&spec.Atil, "H1:Atil_finite"},
                                 {&spec.B, "H1:B_finite"},
                                 {&spec.Btil, "H1:Btil_finite"},
                                 {&spec.Bhat, "H1:Bhat_finite"},
                                 {&spec.sigma, "H1:sigma_finite"},
                                 {&spec.sigma0, "H1:sigma0_finite"}}) {
            if (!all_finite(sched->at(s))) violate(id, s, std::nan(""));
        }
    }

    // Extension convention: the delayed weights vanish at t = T. Shifted
    // reads past the last node use the zero extension, so only node K can
    // disagree with the convention.
    if (spec.Rtil.at(grid.K).cwiseAbs().maxCoeff() != 0.0)
        violate("H2:Rtil_extension", grid.K, spec.Rtil.at(grid.K).cwiseAbs().maxCoeff());
    if (spec.Nctil.at(grid.K).cwiseAbs().maxCoeff() != 0.0)
        violate("H2:Nctil_extension", grid.K, spec.Nctil.at(grid.K).cwiseAbs().maxCoeff());

    for (int s = 0; s <= grid.K; ++s) {
        double er = min_eig_sym(spec.rbar(s, grid));
        if (!(er >= -1e-10)) violate("H2:rbar_psd", s, er);
        double eg = min_eig_sym(spec.gamma(s, grid));
        if (!(eg >= epd)) violate("H2:gamma_pd", s, eg);
    }
    double em = min_eig_sym(spec.M);
    if (!(em >= -1e-10)) violate("H2:M_psd", grid.K, em);
    if (!spec.a.allFinite()) violate("H1:a_finite", 0, std::nan(""));

    return rep;
}

// ---------------------------------------------------------------------------
// JSON I/O

namespace {

Mat parse_matrix(const json& j, long r, long c, const char* name) {
    Mat out(r, c);
    if (j.is_number()) {
        if (r != 1 || c != 1)
            throw StructuralError(std::string(name) + ": scalar given for a " +
                                  std::to_string(r) + "x" + std::to_string(c) +
                                  " coefficient");
        out(0, 0) = j.get<double>();
        return out;
    }
    if (!j.is_array())
        throw StructuralError(std::string(name) + ": expected number or array");
    // Row-major nested array, or a flat array of r*c entries.
    if (!j.empty() && j.front().is_array()) {
        if (static_cast<long>(j.size()) != r)
            throw StructuralError(std::string(name) + ": wrong row count");
        for (long i = 0; i < r; ++i) {
            const json& row = j[static_cast<size_t>(i)];
            if (static_cast<long>(row.size()) != c)
                throw StructuralError(std::string(name) + ": wrong column count");
            for (long jj = 0; jj < c; ++jj)
                out(i, jj) = row[static_cast<size_t>(jj)].get<double>();
        }
        return out;
    }
    if (static_cast<long>(j.size()) != r * c)
        throw StructuralError(std::string(name) + ": expected " +
                              std::to_string(r * c) + " entries");
    for (long i = 0; i < r; ++i)
        for (long jj = 0; jj < c; ++jj)
            out(i, jj) = j[static_cast<size_t>(i * c + jj)].get<double>();
    return out;
}

Schedule parse_schedule(const json& j, long r, long c, int nodes, const char* name) {
    // {"nodes": [...]} or a bare value broadcast to every node.
    if (j.is_object() && j.contains("nodes")) {
        const json& arr = j.at("nodes");
        if (!arr.is_array() || static_cast<int>(arr.size()) != nodes)
            throw StructuralError(std::string(name) + ": nodes array must carry " +
                                  std::to_string(nodes) + " entries");
        std::vector<Mat> vals;
        vals.reserve(arr.size());
        for (const json& e : arr) vals.push_back(parse_matrix(e, r, c, name));
        return Schedule::from_nodes(std::move(vals));
    }
    return Schedule::constant(parse_matrix(j, r, c, name), nodes);
}

std::vector<Vec> parse_history(const json& j, int count, long dim, const char* name) {
    std::vector<Vec> out;
    out.reserve(static_cast<size_t>(count));
    if (j.is_number()) {
        out.assign(static_cast<size_t>(count),
                   Vec::Constant(dim, j.get<double>()));
        return out;
    }
    if (!j.is_array())
        throw StructuralError(std::string(name) + ": expected number or array");
    if (static_cast<int>(j.size()) != count)
        throw StructuralError(std::string(name) + ": expected " +
                              std::to_string(count) + " samples");
    for (const json& e : j) {
        Mat m = parse_matrix(e, dim, 1, name);
        out.push_back(m.col(0));
    }
    return out;
}

json read_json_file(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw StructuralError("cannot open model file " + file);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw StructuralError("model file parse error: " + std::string(e.what()));
    }
    return j;
}

}  // namespace

ModelHeader read_model_header(const std::string& file) {
    json j = read_json_file(file);
    ModelHeader h{};
    const json& dims = j.at("dims");
    h.dims.n = dims.at("n").get<int>();
    h.dims.k = dims.at("k").get<int>();
    h.dims.m = dims.at("m").get<int>();
    h.dims.d = dims.at("d").get<int>();
    h.T = j.at("T").get<double>();
    h.delta = j.at("delta").get<double>();
    h.theta = j.at("theta").get<double>();
    if (j.contains("h")) h.default_h = j.at("h").get<double>();
    return h;
}

ModelSpec load_model_json(const std::string& json_text, const TimeGrid& grid) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw StructuralError("model parse error: " + std::string(e.what()));
    }
    ModelSpec spec;
    const json& dims = j.at("dims");
    spec.dims.n = dims.at("n").get<int>();
    spec.dims.k = dims.at("k").get<int>();
    spec.dims.m = dims.at("m").get<int>();
    spec.dims.d = dims.at("d").get<int>();
    if (!spec.dims.valid()) throw StructuralError("dims must all be >= 1");
    spec.T = j.at("T").get<double>();
    spec.delta = j.at("delta").get<double>();
    spec.theta = j.at("theta").get<double>();

    const long n = spec.dims.n, k = spec.dims.k, m = spec.dims.m, d = spec.dims.d;
    const int nodes = grid.K + 1;
    spec.A = parse_schedule(j.at("A"), n, n, nodes, "A");
    spec.Atil = parse_schedule(j.at("Atil"), n, n, nodes, "Atil");
    spec.B = parse_schedule(j.at("B"), n, k, nodes, "B");
    spec.Btil = parse_schedule(j.at("Btil"), n, k, nodes, "Btil");
    spec.Bhat = parse_schedule(j.at("Bhat"), n, k, nodes, "Bhat");
    spec.sigma = parse_schedule(j.at("sigma"), n, m, nodes, "sigma");
    spec.sigma0 = parse_schedule(j.at("sigma0"), n, d, nodes, "sigma0");
    spec.R = parse_schedule(j.at("R"), n, n, nodes, "R");
    spec.Rtil = parse_schedule(j.at("Rtil"), n, n, nodes, "Rtil");
    spec.Nc = parse_schedule(j.at("Nc"), k, k, nodes, "Nc");
    spec.Nctil = parse_schedule(j.at("Nctil"), k, k, nodes, "Nctil");
    spec.M = parse_matrix(j.at("M"), n, n, "M");
    spec.a = parse_matrix(j.at("a"), n, 1, "a").col(0);
    spec.xi_hist = parse_history(j.at("xi_hist"), grid.p, n, "xi_hist");
    spec.eta_hist = parse_history(j.at("eta_hist"), grid.q, k, "eta_hist");
    return spec;
}

ModelSpec load_model(const std::string& file, const TimeGrid& grid) {
    std::ifstream in(file);
    if (!in) throw StructuralError("cannot open model file " + file);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_model_json(ss.str(), grid);
}

namespace {

json dump_matrix(const Mat& m) {
    if (m.rows() == 1 && m.cols() == 1) return m(0, 0);
    json rows = json::array();
    for (long i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

json dump_schedule(const Schedule& s) {
    // Constant schedules collapse to a single value.
    bool constant = true;
    for (int i = 1; i < s.nodes(); ++i)
        if (s.at(i) != s.at(0)) {
            constant = false;
            break;
        }
    if (constant) return dump_matrix(s.at(0));
    json nodes = json::array();
    for (int i = 0; i < s.nodes(); ++i) nodes.push_back(dump_matrix(s.at(i)));
    return json{{"nodes", nodes}};
}

}  // namespace

void save_model(const std::string& file, const ModelSpec& spec) {
    json j;
    j["dims"] = {{"n", spec.dims.n}, {"k", spec.dims.k}, {"m", spec.dims.m}, {"d", spec.dims.d}};
    j["T"] = spec.T;
    j["delta"] = spec.delta;
    j["theta"] = spec.theta;
    j["A"] = dump_schedule(spec.A);
    j["Atil"] = dump_schedule(spec.Atil);
    j["B"] = dump_schedule(spec.B);
    j["Btil"] = dump_schedule(spec.Btil);
    j["Bhat"] = dump_schedule(spec.Bhat);
    j["sigma"] = dump_schedule(spec.sigma);
    j["sigma0"] = dump_schedule(spec.sigma0);
    j["R"] = dump_schedule(spec.R);
    j["Rtil"] = dump_schedule(spec.Rtil);
    j["Nc"] = dump_schedule(spec.Nc);
    j["Nctil"] = dump_schedule(spec.Nctil);
    j["M"] = dump_matrix(spec.M);
    j["a"] = dump_matrix(spec.a);
    json xi = json::array();
    for (const Vec& v : spec.xi_hist) xi.push_back(dump_matrix(v));
    j["xi_hist"] = xi;
    json eta = json::array();
    for (const Vec& v : spec.eta_hist) eta.push_back(dump_matrix(v));
    j["eta_hist"] = eta;
    std::ofstream out(file);
    if (!out) throw StructuralError("cannot open " + file + " for writing");
    out << j.dump(2) << "\n";
}

}  // namespace mfg
