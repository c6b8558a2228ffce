#include "mfg/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Sparse>
#include <cmath>

#include "mfg/errors.hpp"

namespace mfg {

namespace {

bool schedule_is_zero(const Schedule& s) {
    for (int i = 0; i < s.nodes(); ++i)
        if (s.at(i).cwiseAbs().maxCoeff() != 0.0) return false;
    return true;
}

long ipow(long b, int e) {
    long r = 1;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
}

}  // namespace

long ScenarioTree::level_size(int s) const { return ipow(branching, s); }

long ScenarioTree::level_offset(int s) const {
    if (branching == 1) return s;
    return (ipow(branching, s) - 1) / (branching - 1);
}

long ScenarioTree::ancestor_word(long word, int r) const {
    return word / ipow(branching, r);
}

double ScenarioTree::zeta_i(int c) const {
    if (branching == 1) return 0.0;
    if (branching == 2) return c == 0 ? 1.0 : -1.0;
    return (c / 2) == 0 ? 1.0 : -1.0;  // branching 4: c = 2*ci + cc
}

double ScenarioTree::zeta_0(int c) const {
    if (branching != 4) return 0.0;
    return (c % 2) == 0 ? 1.0 : -1.0;
}

ScenarioTree make_tree(const ModelSpec& spec, const TimeGrid& grid) {
    bool has_idio = !schedule_is_zero(spec.sigma);
    bool has_common = !schedule_is_zero(spec.sigma0);
    if (has_idio && spec.dims.m != 1)
        throw StructuralError("oracle: at most one idiosyncratic noise column");
    if (has_common && spec.dims.d != 1)
        throw StructuralError("oracle: at most one common noise column");
    ScenarioTree tree;
    tree.depth = grid.K;
    tree.branching = (has_idio ? 2 : 1) * (has_common ? 2 : 1);
    if (tree.branching == 2 && tree.depth > 8)
        throw StructuralError("oracle: stochastic tree depth capped at 8");
    if (tree.branching == 4 && tree.depth > 4)
        throw StructuralError("oracle: two-source tree depth capped at 4");
    if (grid.p > grid.K || grid.q > grid.K)
        throw StructuralError("oracle: delays exceed the horizon");
    return tree;
}

namespace {

// Shared assembly context: variable layout and the discrete equations.
struct TreeSystem {
    const ModelSpec& spec;
    const TimeGrid& grid;
    const NceField* m0;
    ScenarioTree tree;
    long NT;  // nodes through level K
    long NU;  // nodes through level K-1
    int n, k;

    TreeSystem(const ModelSpec& s, const TimeGrid& g, const NceField* f)
        : spec(s), grid(g), m0(f), tree(make_tree(s, g)) {
        NT = tree.total_nodes();
        NU = tree.level_offset(grid.K);
        n = spec.dims.n;
        k = spec.dims.k;
    }

    long x_var(long id) const { return id * n; }
    long y_var(long id) const { return NT * n + id * n; }
    long u_var(long id) const { return 2 * NT * n + id * k; }
    long n_vars() const { return 2 * NT * n + NU * k; }

    Vec field(int s) const {
        if (!m0) return Vec::Zero(n);
        return m0->m0[static_cast<size_t>(s)];
    }
};

using Triplets = std::vector<Eigen::Triplet<double>>;

void add_block(Triplets& t, long row, long col, const Mat& m, double scale) {
    for (long i = 0; i < m.rows(); ++i)
        for (long j = 0; j < m.cols(); ++j) {
            double v = scale * m(i, j);
            if (v != 0.0) t.emplace_back(row + i, col + j, v);
        }
}

// Average of y over the descendants of (s, w) at level s2, scaled by
// `coeff` (n x n or k x n block starting at `row`).
void add_descendant_average(const TreeSystem& sys, Triplets& t, long row,
                            int s, long w, int s2, const Mat& coeff) {
    long fan = ipow(sys.tree.branching, s2 - s);
    double inv = 1.0 / static_cast<double>(fan);
    long base = w * fan;
    for (long d = 0; d < fan; ++d) {
        long id = sys.tree.node_id(s2, base + d);
        add_block(t, row, sys.y_var(id), coeff, inv);
    }
}

// Assembles the first-order-condition system rows into (A, rhs).
void assemble(const TreeSystem& sys, Eigen::SparseMatrix<double>& A, Vec& rhs) {
    const ModelSpec& spec = sys.spec;
    const TimeGrid& grid = sys.grid;
    const ScenarioTree& tree = sys.tree;
    const int n = sys.n, k = sys.k, K = grid.K, b = tree.branching;
    const double h = grid.h, sh = std::sqrt(grid.h);
    const Mat In = Mat::Identity(n, n);

    long rows = sys.n_vars();
    rhs = Vec::Zero(rows);
    Triplets t;
    long row = 0;

    // Root condition x = a.
    add_block(t, row, sys.x_var(0), In, 1.0);
    rhs.segment(row, n) = spec.a;
    row += n;

    for (int s = 0; s < K; ++s) {
        for (long w = 0; w < tree.level_size(s); ++w) {
            long v = tree.node_id(s, w);
            // Forward transition to each child.
            for (int c = 0; c < b; ++c) {
                long child = tree.node_id(s + 1, w * b + c);
                add_block(t, row, sys.x_var(child), In, 1.0);
                add_block(t, row, sys.x_var(v), In, -1.0);
                add_block(t, row, sys.x_var(v), spec.A.at(s), -h);
                if (s - grid.p >= 0) {
                    long anc = tree.node_id(s - grid.p,
                                            tree.ancestor_word(w, grid.p));
                    add_block(t, row, sys.x_var(anc), spec.Atil.at(s), -h);
                } else {
                    rhs.segment(row, n) += h * spec.Atil.at(s) * spec.xi(s - grid.p);
                }
                add_block(t, row, sys.u_var(v), spec.B.at(s), -h);
                if (s - grid.q >= 0) {
                    long anc = tree.node_id(s - grid.q,
                                            tree.ancestor_word(w, grid.q));
                    add_block(t, row, sys.u_var(anc), spec.Btil.at(s), -h);
                } else {
                    rhs.segment(row, n) += h * spec.Btil.at(s) * spec.eta(s - grid.q);
                }
                rhs.segment(row, n) += h * sys.field(s);
                if (b >= 2)
                    rhs.segment(row, n) +=
                        sh * tree.zeta_i(c) * spec.sigma.at(s).col(0);
                if (b == 4)
                    rhs.segment(row, n) +=
                        sh * tree.zeta_0(c) * spec.sigma0.at(s).col(0);
                row += n;
            }
            // Stationarity.
            add_block(t, row, sys.u_var(v), spec.gamma(s, grid), 1.0);
            add_descendant_average(sys, t, row, s, w, s + 1,
                                   spec.B.at(s).transpose());
            if (s + grid.q + 1 <= K)
                add_descendant_average(sys, t, row, s, w, s + grid.q + 1,
                                       spec.Btil.at_or_zero(s + grid.q).transpose());
            row += k;
            // Backward recursion.
            add_block(t, row, sys.y_var(v), In, 1.0);
            Mat back = -(In + h * spec.A.at(s).transpose());
            add_descendant_average(sys, t, row, s, w, s + 1, back);
            if (s + grid.p + 1 <= K) {
                Mat ant = -h * spec.Atil.at_or_zero(s + grid.p).transpose();
                add_descendant_average(sys, t, row, s, w, s + grid.p + 1, ant);
            }
            add_block(t, row, sys.x_var(v), spec.rbar(s, grid), -h);
            row += n;
        }
    }
    // Terminal coupling.
    for (long w = 0; w < tree.level_size(K); ++w) {
        long v = tree.node_id(K, w);
        add_block(t, row, sys.y_var(v), In, 1.0);
        add_block(t, row, sys.x_var(v), spec.M, -1.0);
        row += n;
    }
    if (row != rows) throw SolvabilityError("oracle assembly row mismatch");

    A.resize(rows, rows);
    A.setFromTriplets(t.begin(), t.end());
}

// Per-equation-class residuals of a candidate solution.
void fill_residuals(const TreeSystem& sys, TreeSolution& sol) {
    const ModelSpec& spec = sys.spec;
    const TimeGrid& grid = sys.grid;
    const ScenarioTree& tree = sol.tree;
    const int K = grid.K, b = tree.branching, n = sys.n;
    const double h = grid.h, sh = std::sqrt(grid.h);

    auto desc_avg_y = [&](int s, long w, int s2) {
        long fan = ipow(b, s2 - s);
        Vec acc = Vec::Zero(n);
        for (long d = 0; d < fan; ++d)
            acc += sol.y[static_cast<size_t>(tree.node_id(s2, w * fan + d))];
        return acc / static_cast<double>(fan);
    };

    double rf = 0, rs = 0, rb = 0, rt = 0;
    rf = std::max(rf, (sol.x[0] - spec.a).cwiseAbs().maxCoeff());
    for (int s = 0; s < K; ++s) {
        for (long w = 0; w < tree.level_size(s); ++w) {
            long v = tree.node_id(s, w);
            const Vec& xv = sol.x[static_cast<size_t>(v)];
            const Vec& uv = sol.u[static_cast<size_t>(v)];
            Vec xd = (s - grid.p >= 0)
                         ? sol.x[static_cast<size_t>(tree.node_id(
                               s - grid.p, tree.ancestor_word(w, grid.p)))]
                         : spec.xi(s - grid.p);
            Vec ud = (s - grid.q >= 0)
                         ? sol.u[static_cast<size_t>(tree.node_id(
                               s - grid.q, tree.ancestor_word(w, grid.q)))]
                         : spec.eta(s - grid.q);
            Vec drift = spec.A.at(s) * xv + spec.Atil.at(s) * xd +
                        spec.B.at(s) * uv + spec.Btil.at(s) * ud + sys.field(s);
            for (int c = 0; c < b; ++c) {
                long child = tree.node_id(s + 1, w * b + c);
                Vec pred = xv + h * drift;
                if (b >= 2) pred += sh * tree.zeta_i(c) * spec.sigma.at(s).col(0);
                if (b == 4) pred += sh * tree.zeta_0(c) * spec.sigma0.at(s).col(0);
                rf = std::max(rf, (sol.x[static_cast<size_t>(child)] - pred)
                                      .cwiseAbs()
                                      .maxCoeff());
            }
            Vec stat = spec.gamma(s, grid) * uv +
                       spec.B.at(s).transpose() * desc_avg_y(s, w, s + 1);
            if (s + grid.q + 1 <= K)
                stat += spec.Btil.at_or_zero(s + grid.q).transpose() *
                        desc_avg_y(s, w, s + grid.q + 1);
            rs = std::max(rs, stat.cwiseAbs().maxCoeff());
            Vec back = (Mat::Identity(n, n) + h * spec.A.at(s).transpose()) *
                       desc_avg_y(s, w, s + 1);
            if (s + grid.p + 1 <= K)
                back += h * spec.Atil.at_or_zero(s + grid.p).transpose() *
                        desc_avg_y(s, w, s + grid.p + 1);
            back += h * spec.rbar(s, grid) * xv;
            rb = std::max(rb, (sol.y[static_cast<size_t>(v)] - back)
                                  .cwiseAbs()
                                  .maxCoeff());
        }
    }
    for (long w = 0; w < tree.level_size(K); ++w) {
        long v = tree.node_id(K, w);
        rt = std::max(rt, (sol.y[static_cast<size_t>(v)] -
                           spec.M * sol.x[static_cast<size_t>(v)])
                              .cwiseAbs()
                              .maxCoeff());
    }
    sol.forward_residual = rf;
    sol.stationarity_residual = rs;
    sol.backward_residual = rb;
    sol.terminal_residual = rt;
}

// Martingale-difference recovery of the diffusion coefficients.
void recover_z(const TreeSystem& sys, TreeSolution& sol) {
    const ScenarioTree& tree = sol.tree;
    const int K = sys.grid.K, b = tree.branching;
    const double sh = std::sqrt(sys.grid.h);
    if (b == 1) return;
    sol.z.assign(static_cast<size_t>(sys.NU), Vec::Zero(sys.n));
    if (b == 4) sol.z0.assign(static_cast<size_t>(sys.NU), Vec::Zero(sys.n));
    for (int s = 0; s < K; ++s) {
        for (long w = 0; w < tree.level_size(s); ++w) {
            long v = tree.node_id(s, w);
            auto child_y = [&](int c) -> const Vec& {
                return sol.y[static_cast<size_t>(tree.node_id(s + 1, w * b + c))];
            };
            if (b == 2) {
                sol.z[static_cast<size_t>(v)] = (child_y(0) - child_y(1)) / (2 * sh);
            } else {
                sol.z[static_cast<size_t>(v)] =
                    ((child_y(0) + child_y(1)) - (child_y(2) + child_y(3))) /
                    (4 * sh);
                sol.z0[static_cast<size_t>(v)] =
                    ((child_y(0) + child_y(2)) - (child_y(1) + child_y(3))) /
                    (4 * sh);
            }
        }
    }
}

void unpack(const TreeSystem& sys, const Vec& sol_vec, TreeSolution& sol) {
    sol.x.assign(static_cast<size_t>(sys.NT), Vec::Zero(sys.n));
    sol.y.assign(static_cast<size_t>(sys.NT), Vec::Zero(sys.n));
    sol.u.assign(static_cast<size_t>(sys.NU), Vec::Zero(sys.k));
    for (long id = 0; id < sys.NT; ++id) {
        sol.x[static_cast<size_t>(id)] = sol_vec.segment(sys.x_var(id), sys.n);
        sol.y[static_cast<size_t>(id)] = sol_vec.segment(sys.y_var(id), sys.n);
    }
    for (long id = 0; id < sys.NU; ++id)
        sol.u[static_cast<size_t>(id)] = sol_vec.segment(sys.u_var(id), sys.k);
}

}  // namespace

Vec TreeSolution::mean_x(int level) const {
    Vec acc = Vec::Zero(x.front().size());
    for (long w = 0; w < tree.level_size(level); ++w)
        acc += x[static_cast<size_t>(tree.node_id(level, w))];
    return acc / static_cast<double>(tree.level_size(level));
}

Vec TreeSolution::mean_y(int level) const {
    Vec acc = Vec::Zero(y.front().size());
    for (long w = 0; w < tree.level_size(level); ++w)
        acc += y[static_cast<size_t>(tree.node_id(level, w))];
    return acc / static_cast<double>(tree.level_size(level));
}

Vec TreeSolution::mean_u(int level) const {
    Vec acc = Vec::Zero(u.front().size());
    for (long w = 0; w < tree.level_size(level); ++w)
        acc += u[static_cast<size_t>(tree.node_id(level, w))];
    return acc / static_cast<double>(tree.level_size(level));
}

TreeSolution tree_solve_hamiltonian(const ModelSpec& spec, const TimeGrid& grid,
                                    const NceField* m0) {
    TreeSystem sys(spec, grid, m0);
    Eigen::SparseMatrix<double> A;
    Vec rhs;
    assemble(sys, A, rhs);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success)
        throw SolvabilityError("tree system singular for this spec/grid");
    Vec sol_vec = lu.solve(rhs);
    TreeSolution sol;
    sol.tree = sys.tree;
    unpack(sys, sol_vec, sol);
    sol.solve_residual = (A * sol_vec - rhs).cwiseAbs().maxCoeff();
    fill_residuals(sys, sol);
    recover_z(sys, sol);
    return sol;
}

double tree_cost(const ModelSpec& spec, const TimeGrid& grid,
                 const ScenarioTree& tree, const std::vector<Vec>& u,
                 const NceField* m0) {
    TreeSystem sys(spec, grid, m0);
    const int K = grid.K, b = tree.branching;
    const double h = grid.h, sh = std::sqrt(grid.h);
    // Forward propagation of states under the given controls.
    std::vector<Vec> x(static_cast<size_t>(sys.NT));
    x[0] = spec.a;
    for (int s = 0; s < K; ++s) {
        for (long w = 0; w < tree.level_size(s); ++w) {
            long v = tree.node_id(s, w);
            Vec xd = (s - grid.p >= 0)
                         ? x[static_cast<size_t>(tree.node_id(
                               s - grid.p, tree.ancestor_word(w, grid.p)))]
                         : spec.xi(s - grid.p);
            Vec ud = (s - grid.q >= 0)
                         ? u[static_cast<size_t>(tree.node_id(
                               s - grid.q, tree.ancestor_word(w, grid.q)))]
                         : spec.eta(s - grid.q);
            Vec drift = spec.A.at(s) * x[static_cast<size_t>(v)] +
                        spec.Atil.at(s) * xd +
                        spec.B.at(s) * u[static_cast<size_t>(v)] +
                        spec.Btil.at(s) * ud + sys.field(s);
            for (int c = 0; c < b; ++c) {
                Vec nx = x[static_cast<size_t>(v)] + h * drift;
                if (b >= 2) nx += sh * tree.zeta_i(c) * spec.sigma.at(s).col(0);
                if (b == 4) nx += sh * tree.zeta_0(c) * spec.sigma0.at(s).col(0);
                x[static_cast<size_t>(tree.node_id(s + 1, w * b + c))] = nx;
            }
        }
    }
    // Probability-weighted discretized cost.
    double J = 0.0;
    for (int s = 0; s < K; ++s) {
        double prob = 1.0 / static_cast<double>(tree.level_size(s));
        double acc = 0.0;
        for (long w = 0; w < tree.level_size(s); ++w) {
            long v = tree.node_id(s, w);
            const Vec& xv = x[static_cast<size_t>(v)];
            Vec xd = (s - grid.p >= 0)
                         ? x[static_cast<size_t>(tree.node_id(
                               s - grid.p, tree.ancestor_word(w, grid.p)))]
                         : spec.xi(s - grid.p);
            Vec ud = (s - grid.q >= 0)
                         ? u[static_cast<size_t>(tree.node_id(
                               s - grid.q, tree.ancestor_word(w, grid.q)))]
                         : spec.eta(s - grid.q);
            const Vec& uv = u[static_cast<size_t>(v)];
            acc += xv.dot(spec.R.at(s) * xv) + xd.dot(spec.Rtil.at(s) * xd) +
                   uv.dot(spec.Nc.at(s) * uv) + ud.dot(spec.Nctil.at(s) * ud);
        }
        J += 0.5 * h * prob * acc;
    }
    double probK = 1.0 / static_cast<double>(tree.level_size(K));
    double accK = 0.0;
    for (long w = 0; w < tree.level_size(K); ++w) {
        const Vec& xv = x[static_cast<size_t>(tree.node_id(K, w))];
        accK += xv.dot(spec.M * xv);
    }
    J += 0.5 * probK * accK;
    return J;
}

TreeSolution brute_force_optimize(const ModelSpec& spec, const TimeGrid& grid,
                                  const NceField* m0) {
    TreeSystem sys(spec, grid, m0);
    const ScenarioTree& tree = sys.tree;
    const int K = grid.K, b = tree.branching, n = sys.n, k = sys.k;
    const double h = grid.h, sh = std::sqrt(grid.h);
    const long U = sys.NU * k;

    // x_v = base_v + L_v * u, propagated forward.
    std::vector<Vec> base(static_cast<size_t>(sys.NT));
    std::vector<Mat> L(static_cast<size_t>(sys.NT));
    base[0] = spec.a;
    L[0] = Mat::Zero(n, U);
    for (int s = 0; s < K; ++s) {
        for (long w = 0; w < tree.level_size(s); ++w) {
            long v = tree.node_id(s, w);
            Vec cbase = base[static_cast<size_t>(v)] +
                        h * (spec.A.at(s) * base[static_cast<size_t>(v)]) +
                        h * sys.field(s);
            Mat cL = L[static_cast<size_t>(v)] +
                     h * (spec.A.at(s) * L[static_cast<size_t>(v)]);
            if (s - grid.p >= 0) {
                long anc = tree.node_id(s - grid.p, tree.ancestor_word(w, grid.p));
                cbase += h * spec.Atil.at(s) * base[static_cast<size_t>(anc)];
                cL += h * spec.Atil.at(s) * L[static_cast<size_t>(anc)];
            } else {
                cbase += h * spec.Atil.at(s) * spec.xi(s - grid.p);
            }
            cL.middleCols(sys.u_var(v) - 2 * sys.NT * n, k) += h * spec.B.at(s);
            if (s - grid.q >= 0) {
                long anc = tree.node_id(s - grid.q, tree.ancestor_word(w, grid.q));
                cL.middleCols(sys.u_var(anc) - 2 * sys.NT * n, k) +=
                    h * spec.Btil.at(s);
            } else {
                cbase += h * spec.Btil.at(s) * spec.eta(s - grid.q);
            }
            for (int c = 0; c < b; ++c) {
                long child = tree.node_id(s + 1, w * b + c);
                Vec nb = cbase;
                if (b >= 2) nb += sh * tree.zeta_i(c) * spec.sigma.at(s).col(0);
                if (b == 4) nb += sh * tree.zeta_0(c) * spec.sigma0.at(s).col(0);
                base[static_cast<size_t>(child)] = nb;
                L[static_cast<size_t>(child)] = cL;
            }
        }
    }

    // J(u) = 1/2 u'Hu + g'u + const from the literal discretized cost.
    Mat H = Mat::Zero(U, U);
    Vec g = Vec::Zero(U);
    auto add_state_term = [&](long id, const Mat& W, double weight) {
        if (W.cwiseAbs().maxCoeff() == 0.0) return;
        const Mat& Lv = L[static_cast<size_t>(id)];
        const Vec& bv = base[static_cast<size_t>(id)];
        H.noalias() += weight * Lv.transpose() * W * Lv;
        g.noalias() += weight * Lv.transpose() * (W * bv);
    };
    for (int s = 0; s < K; ++s) {
        double wgt = h / static_cast<double>(tree.level_size(s));
        for (long w = 0; w < tree.level_size(s); ++w) {
            long v = tree.node_id(s, w);
            add_state_term(v, spec.R.at(s), wgt);
            if (s - grid.p >= 0) {
                long anc = tree.node_id(s - grid.p, tree.ancestor_word(w, grid.p));
                add_state_term(anc, spec.Rtil.at(s), wgt);
            }
            long uc = sys.u_var(v) - 2 * sys.NT * n;
            H.block(uc, uc, k, k) += wgt * spec.Nc.at(s);
            if (s - grid.q >= 0) {
                long anc = tree.node_id(s - grid.q, tree.ancestor_word(w, grid.q));
                long uac = sys.u_var(anc) - 2 * sys.NT * n;
                H.block(uac, uac, k, k) += wgt * spec.Nctil.at(s);
            }
        }
    }
    double wK = 1.0 / static_cast<double>(tree.level_size(K));
    for (long w = 0; w < tree.level_size(K); ++w)
        add_state_term(tree.node_id(K, w), spec.M, wK);

    Eigen::LLT<Mat> llt(0.5 * (H + H.transpose()));
    if (llt.info() != Eigen::Success)
        throw SolvabilityError(
            "brute-force Hessian not positive definite (assumption violation)");
    Vec ustar = llt.solve(-g);

    TreeSolution sol;
    sol.tree = tree;
    sol.u.resize(static_cast<size_t>(sys.NU));
    for (long id = 0; id < sys.NU; ++id)
        sol.u[static_cast<size_t>(id)] = ustar.segment(id * k, k);
    // Reconstruct states from the affine maps and the costate from the
    // backward recursion; residuals then certify the agreement with the
    // stationarity formulation.
    sol.x.resize(static_cast<size_t>(sys.NT));
    for (long id = 0; id < sys.NT; ++id)
        sol.x[static_cast<size_t>(id)] =
            base[static_cast<size_t>(id)] + L[static_cast<size_t>(id)] * ustar;
    sol.y.assign(static_cast<size_t>(sys.NT), Vec::Zero(n));
    for (long w = 0; w < tree.level_size(K); ++w) {
        long v = tree.node_id(K, w);
        sol.y[static_cast<size_t>(v)] = spec.M * sol.x[static_cast<size_t>(v)];
    }
    for (int s = K - 1; s >= 0; --s) {
        for (long w = 0; w < tree.level_size(s); ++w) {
            long v = tree.node_id(s, w);
            auto desc_avg_y = [&](int s2) {
                long fan = ipow(b, s2 - s);
                Vec acc = Vec::Zero(n);
                for (long d = 0; d < fan; ++d)
                    acc += sol.y[static_cast<size_t>(tree.node_id(s2, w * fan + d))];
                return acc / static_cast<double>(fan);
            };
            Vec yv = (Mat::Identity(n, n) + h * spec.A.at(s).transpose()) *
                     desc_avg_y(s + 1);
            if (s + grid.p + 1 <= K)
                yv += h * spec.Atil.at_or_zero(s + grid.p).transpose() *
                      desc_avg_y(s + grid.p + 1);
            yv += h * spec.rbar(s, grid) * sol.x[static_cast<size_t>(v)];
            sol.y[static_cast<size_t>(v)] = yv;
        }
    }
    sol.solve_residual = 0.0;
    fill_residuals(sys, sol);
    recover_z(sys, sol);
    return sol;
}

double decomposition_check(const ModelSpec& spec, const TimeGrid& grid,
                           const NceField& m0, const Vec& a1, const Vec& a2,
                           const std::vector<Vec>& xi1,
                           const std::vector<Vec>& xi2) {
    const int n = spec.dims.n;
    if (a1.size() != n || a2.size() != n)
        throw StructuralError("decomposition split: wrong dimension");
    if (static_cast<int>(xi1.size()) != grid.p ||
        static_cast<int>(xi2.size()) != grid.p)
        throw StructuralError("decomposition split: history length must be p");
    if ((a1 + a2 - spec.a).cwiseAbs().maxCoeff() > 1e-12)
        throw StructuralError("decomposition split: a1 + a2 != a");
    for (int i = 0; i < grid.p; ++i)
        if ((xi1[static_cast<size_t>(i)] + xi2[static_cast<size_t>(i)] -
             spec.xi(i - grid.p))
                .cwiseAbs()
                .maxCoeff() > 1e-12)
            throw StructuralError("decomposition split: xi1 + xi2 != xi");
    if (!schedule_is_zero(spec.sigma0))
        throw StructuralError("decomposition check requires sigma0 = 0");

    TreeSolution full = tree_solve_hamiltonian(spec, grid, &m0);

    ModelSpec spec1 = spec;  // idiosyncratic part: no field, keeps eta
    spec1.a = a1;
    spec1.xi_hist = xi1;
    TreeSolution part1 = tree_solve_hamiltonian(spec1, grid, nullptr);

    ModelSpec spec2 = spec;  // common part: deterministic, carries the field
    spec2.a = a2;
    spec2.xi_hist = xi2;
    spec2.eta_hist.assign(static_cast<size_t>(grid.q), Vec::Zero(spec.dims.k));
    spec2.sigma = Schedule::constant(Mat::Zero(n, spec.dims.m), grid.K + 1);
    TreeSolution part2 = tree_solve_hamiltonian(spec2, grid, &m0);

    double worst = 0.0;
    const ScenarioTree& tree = full.tree;
    for (int s = 0; s <= grid.K; ++s) {
        for (long w = 0; w < tree.level_size(s); ++w) {
            long v = tree.node_id(s, w);
            long v2 = part2.tree.node_id(s, 0);
            double dx = (full.x[static_cast<size_t>(v)] -
                         part1.x[static_cast<size_t>(v)] -
                         part2.x[static_cast<size_t>(v2)])
                            .cwiseAbs()
                            .maxCoeff();
            double dy = (full.y[static_cast<size_t>(v)] -
                         part1.y[static_cast<size_t>(v)] -
                         part2.y[static_cast<size_t>(v2)])
                            .cwiseAbs()
                            .maxCoeff();
            worst = std::max(worst, dx + dy);
        }
    }
    return worst;
}

DelayedPath openloop_from_tree(const ModelSpec& spec, const TimeGrid& grid,
                               const TreeSolution& sol) {
    if (sol.tree.branching != 1)
        throw StructuralError("openloop_from_tree needs a deterministic solution");
    DelayedPath u(PathRole::Control, grid, spec.dims.k);
    for (int s = -grid.q; s <= -1; ++s) u.at(s) = spec.eta(s);
    for (int s = 0; s < grid.K; ++s) u.at(s) = sol.u[static_cast<size_t>(s)];
    u.at(grid.K) = Vec::Zero(spec.dims.k);
    return u;
}

}  // namespace mfg
