#include "mfg/strategies.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "mfg/errors.hpp"

namespace mfg {

Vec Strategy::control(int s, const Vec& x) const {
    switch (kind) {
        case Kind::FeedbackCase1:
            return G[static_cast<size_t>(s)] * x + g[static_cast<size_t>(s)];
        case Kind::OpenLoop:
            return path.at(s);
        case Kind::History:
            return Vec::Zero(eta.empty() ? 0 : eta.front().size());
    }
    return Vec();
}

Strategy strategy_from_ypath(const ModelSpec& spec, const TimeGrid& grid,
                             const DelayedPath& ypath) {
    if (ypath.hi() < grid.K + grid.q)
        throw RangeError("costate path lacks the anticipation pad through T + theta");
    Strategy st;
    st.kind = Strategy::Kind::OpenLoop;
    st.eta = spec.eta_hist;
    st.path = DelayedPath(PathRole::Control, grid, spec.dims.k);
    for (int s = -grid.q; s <= -1; ++s) st.path.at(s) = spec.eta(s);
    for (int s = 0; s <= grid.K; ++s) {
        Vec rhs = spec.B.at(s).transpose() * ypath.at(s) +
                  spec.Btil.at_or_zero(s + grid.q).transpose() * ypath.at(s + grid.q);
        Eigen::LLT<Mat> llt(spec.gamma(s, grid));
        if (llt.info() != Eigen::Success)
            throw SolvabilityError("control weight not PD at node " + std::to_string(s));
        st.path.at(s) = -llt.solve(rhs);
    }
    return st;
}

Strategy case1_feedback(const ModelSpec& spec, const TimeGrid& grid,
                        const RiccatiSolution& P, const PhiPath& phi) {
    Strategy st;
    st.kind = Strategy::Kind::FeedbackCase1;
    st.eta = spec.eta_hist;
    st.G.resize(static_cast<size_t>(grid.K) + 1);
    st.g.resize(static_cast<size_t>(grid.K) + 1);
    for (int s = 0; s <= grid.K; ++s) {
        Eigen::LLT<Mat> llt(spec.gamma(s, grid));
        if (llt.info() != Eigen::Success)
            throw SolvabilityError("control weight not PD at node " + std::to_string(s));
        Mat BT = spec.B.at(s).transpose();
        st.G[static_cast<size_t>(s)] = -llt.solve(BT * P.P[static_cast<size_t>(s)]);
        st.g[static_cast<size_t>(s)] = -llt.solve(BT * phi.phi[static_cast<size_t>(s)]);
    }
    return st;
}

Strategy case1_feedback_discrete(const ModelSpec& spec, const TimeGrid& grid,
                                 const RiccatiSolution& P, const PhiPath& phi,
                                 const std::vector<Vec>& field) {
    const int n = spec.dims.n, k = spec.dims.k;
    const double h = grid.h;
    Strategy st;
    st.kind = Strategy::Kind::FeedbackCase1;
    st.eta = spec.eta_hist;
    st.G.assign(static_cast<size_t>(grid.K) + 1, Mat::Zero(k, n));
    st.g.assign(static_cast<size_t>(grid.K) + 1, Vec::Zero(k));
    for (int s = 0; s < grid.K; ++s) {
        const Mat& Pn = P.P[static_cast<size_t>(s + 1)];
        const Mat& Bs = spec.B.at(s);
        Mat gbar = spec.gamma(s, grid) + h * Bs.transpose() * Pn * Bs;
        Eigen::LLT<Mat> llt(gbar);
        if (llt.info() != Eigen::Success)
            throw SolvabilityError("effective control weight not PD at node " +
                                   std::to_string(s));
        Mat Ad = Mat::Identity(n, n) + h * spec.A.at(s);
        st.G[static_cast<size_t>(s)] = -llt.solve(Bs.transpose() * Pn * Ad);
        st.g[static_cast<size_t>(s)] =
            -llt.solve(Bs.transpose() * (h * Pn * field[static_cast<size_t>(s)] +
                                         phi.phi[static_cast<size_t>(s + 1)]));
    }
    return st;
}

Strategy openloop_strategy(const ModelSpec& spec, const TimeGrid& grid,
                           const DelayedPath& controls) {
    Strategy st;
    st.kind = Strategy::Kind::OpenLoop;
    st.eta = spec.eta_hist;
    st.path = controls;
    return st;
}

// ---------------------------------------------------------------------------
// Case II

namespace {

double poly_eval(const std::vector<double>& c, double tau) {
    double v = 0.0;
    for (size_t i = c.size(); i-- > 0;) v = v * tau + c[i];
    return v;
}

// Antiderivative with Q(0) = 0.
std::vector<double> poly_antiderivative(const std::vector<double>& c) {
    std::vector<double> q(c.size() + 1, 0.0);
    for (size_t i = 0; i < c.size(); ++i) q[i + 1] = c[i] / static_cast<double>(i + 1);
    return q;
}

bool schedule_is_zero(const Schedule& s) {
    for (int i = 0; i < s.nodes(); ++i)
        if (s.at(i).cwiseAbs().maxCoeff() != 0.0) return false;
    return true;
}

}  // namespace

double Case2Costate::eval(double t) const {
    double T = K * h;
    if (t > T + p * h + 1e-12) throw RangeError("case2 costate queried beyond T + delta");
    if (t > T) return 0.0;
    if (t >= T - p * h) return -M;
    int j = static_cast<int>(std::floor(t / h + 1e-12));
    if (j < 0) throw RangeError("case2 costate queried before 0");
    if (j >= K) j = K - 1;
    return poly_eval(cells[static_cast<size_t>(j)], t - j * h);
}

DelayedPath Case2Costate::to_costate_path(const TimeGrid& grid) const {
    DelayedPath y(PathRole::Costate, grid, 1);
    for (int s = 0; s <= grid.K; ++s) y.at(s)[0] = eval(grid.time(s));
    return y;  // pad beyond K stays zero
}

Case2Costate case2_solve(const ModelSpec& spec, const TimeGrid& grid) {
    if (spec.dims.n != 1 || spec.dims.k != 1)
        throw StructuralError("case2_solve: scalar structure required (n = k = 1)");
    if (!schedule_is_zero(spec.A) || !schedule_is_zero(spec.B))
        throw StructuralError("case2_solve: requires A = B = 0");
    if (grid.p != grid.q)
        throw StructuralError("case2_solve: requires delta = theta");

    Case2Costate out;
    out.K = grid.K;
    out.p = grid.p;
    out.h = grid.h;
    out.M = spec.M(0, 0);
    out.cells.assign(static_cast<size_t>(grid.K), {});

    // ybar(t_j + tau) one delay ahead of cell j; zero beyond T.
    auto shifted_cell = [&](int j) -> std::vector<double> {
        int jp = j + grid.p;
        if (jp >= grid.K) return {0.0};
        return out.cells[static_cast<size_t>(jp)];
    };

    // Terminal delay interval [T - delta, T]: constant -M.
    for (int j = grid.K - grid.p; j < grid.K; ++j)
        out.cells[static_cast<size_t>(j)] = {-out.M};

    // Remaining cells backward:
    //   ybar(t_j + tau) = ybar(t_{j+1}) + Atil_j * (Q(h) - Q(tau)),
    // with Q the antiderivative of the cell one delay ahead. Exact
    // integration keeps the piecewise polynomial structure.
    for (int j = grid.K - grid.p - 1; j >= 0; --j) {
        double atil = spec.Atil.at(j)(0, 0);
        std::vector<double> Q = poly_antiderivative(shifted_cell(j));
        double anchor = poly_eval(out.cells[static_cast<size_t>(j + 1)], 0.0);
        std::vector<double> c(Q.size(), 0.0);
        c[0] = anchor + atil * poly_eval(Q, grid.h);
        for (size_t i = 0; i < Q.size(); ++i) c[i] -= atil * Q[i];
        out.cells[static_cast<size_t>(j)] = std::move(c);
    }
    return out;
}

}  // namespace mfg
