#include "mfg/det_solvers.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "mfg/errors.hpp"

namespace mfg {

namespace {

bool schedule_is_zero(const Schedule& s) {
    for (int i = 0; i < s.nodes(); ++i)
        if (s.at(i).cwiseAbs().maxCoeff() != 0.0) return false;
    return true;
}

// Shared description of one expectation-level forward/backward system.
// The forward drift is
//   A Ex + Atil Ex(-p) + B u + C * (lagged control) + forcing,
// where C = Btil (+ Bhat for the common component / Case I field), the
// current control attains the discrete stationarity condition and the
// lagged control reads the control history on [0, theta).
struct SweepConfig {
    bool include_bhat = false;
    Vec x0;
    const std::vector<Vec>* xi = nullptr;   // p samples or nullptr for zeros
    const std::vector<Vec>* eta = nullptr;  // q samples or nullptr for zeros
    const std::vector<Vec>* forcing = nullptr;  // 0..K or nullptr
};

struct Sweeper {
    const ModelSpec& spec;
    const TimeGrid& grid;
    const SweepConfig& cfg;
    std::vector<Eigen::LLT<Mat>> gamma_llt;  // Gamma_s factors, s = 0..K

    Sweeper(const ModelSpec& s, const TimeGrid& g, const SweepConfig& c)
        : spec(s), grid(g), cfg(c) {
        gamma_llt.reserve(static_cast<size_t>(grid.K) + 1);
        for (int i = 0; i <= grid.K; ++i) {
            Eigen::LLT<Mat> llt(spec.gamma(i, grid));
            if (llt.info() != Eigen::Success)
                throw SolvabilityError("control weight Nc + Nctil(.+theta) not PD at node " +
                                       std::to_string(i));
            gamma_llt.push_back(std::move(llt));
        }
    }

    Vec eta_at(int s) const {  // s in [-q, -1]
        if (cfg.eta) return (*cfg.eta)[static_cast<size_t>(s + grid.q)];
        return Vec::Zero(spec.dims.k);
    }
    Vec xi_at(int s) const {  // s in [-p, -1]
        if (cfg.xi) return (*cfg.xi)[static_cast<size_t>(s + grid.p)];
        return Vec::Zero(spec.dims.n);
    }

    // u_s = -Gamma_s^{-1} (B_s' y_{s+1} + Btil_{s+q}' y_{s+q+1})
    Vec control(int s, const DelayedPath& Ey) const {
        Vec rhs = spec.B.at(s).transpose() * Ey.at(s + 1) +
                  spec.Btil.at_or_zero(s + grid.q).transpose() * Ey.at(s + grid.q + 1);
        return -gamma_llt[static_cast<size_t>(s)].solve(rhs);
    }

    // Control in force at s - q: the stationarity map at the lagged node,
    // or the control history before t = 0.
    Vec lagged_control(int s, const DelayedPath& Ey) const {
        if (s < grid.q) return eta_at(s - grid.q);
        int l = s - grid.q;
        Vec rhs = spec.B.at(l).transpose() * Ey.at(l + 1) +
                  spec.Btil.at(s).transpose() * Ey.at(s + 1);
        return -gamma_llt[static_cast<size_t>(l)].solve(rhs);
    }

    Mat coupling(int s) const {
        if (cfg.include_bhat) return spec.Btil.at(s) + spec.Bhat.at(s);
        return spec.Btil.at(s);
    }

    Vec forcing(int s) const {
        if (cfg.forcing) return (*cfg.forcing)[static_cast<size_t>(s)];
        return Vec::Zero(spec.dims.n);
    }

    Vec forward_rhs(int s, const DelayedPath& Ex, const DelayedPath& Ey) const {
        const Vec xd = (s - grid.p < Ex.lo()) ? xi_at(s - grid.p) : Ex.at(s - grid.p);
        Vec drift = spec.A.at(s) * Ex.at(s) + spec.Atil.at(s) * xd +
                    spec.B.at(s) * control(s, Ey) +
                    coupling(s) * lagged_control(s, Ey) + forcing(s);
        return Ex.at(s) + grid.h * drift;
    }

    void forward(const DelayedPath& Ey, DelayedPath& Ex) const {
        for (int s = -grid.p; s <= -1; ++s) Ex.at(s) = xi_at(s);
        Ex.at(0) = cfg.x0;
        for (int s = 0; s < grid.K; ++s) Ex.at(s + 1) = forward_rhs(s, Ex, Ey);
    }

    Vec backward_rhs(int s, const DelayedPath& Ex, const DelayedPath& Ey) const {
        return (Mat::Identity(spec.dims.n, spec.dims.n) +
                grid.h * spec.A.at(s).transpose()) * Ey.at(s + 1) +
               grid.h * spec.Atil.at_or_zero(s + grid.p).transpose() *
                   Ey.at(s + grid.p + 1) +
               grid.h * spec.rbar(s, grid) * Ex.at(s);
    }

    // Anticipated values are resolved within the same pass: index s reads
    // only indices > s, all already updated.
    void backward(const DelayedPath& Ex, DelayedPath& Ey) const {
        Ey.at(grid.K) = spec.M * Ex.at(grid.K);
        for (int s = grid.K - 1; s >= 0; --s) Ey.at(s) = backward_rhs(s, Ex, Ey);
    }

    double pair_residual(const MeanPair& pair) const {
        double r = 0.0;
        for (int s = 0; s < grid.K; ++s) {
            r = std::max(r, (pair.Ex.at(s + 1) - forward_rhs(s, pair.Ex, pair.Ey))
                                .cwiseAbs()
                                .maxCoeff());
            r = std::max(r, (pair.Ey.at(s) - backward_rhs(s, pair.Ex, pair.Ey))
                                .cwiseAbs()
                                .maxCoeff());
        }
        r = std::max(r, (pair.Ey.at(grid.K) - spec.M * pair.Ex.at(grid.K))
                            .cwiseAbs()
                            .maxCoeff());
        for (int s = -grid.p; s <= -1; ++s)
            r = std::max(r, (pair.Ex.at(s) - xi_at(s)).cwiseAbs().maxCoeff());
        return r;
    }
};

std::pair<MeanPair, PicardReport> picard_solve(const ModelSpec& spec,
                                               const TimeGrid& grid,
                                               const SweepConfig& cfg,
                                               const PicardOptions& opts) {
    Sweeper sw(spec, grid, cfg);
    MeanPair pair{DelayedPath(PathRole::State, grid, spec.dims.n),
                  DelayedPath(PathRole::Costate, grid, spec.dims.n)};
    DelayedPath Ey_new(PathRole::Costate, grid, spec.dims.n);

    PicardReport rep;
    for (int it = 1; it <= opts.max_iter; ++it) {
        sw.forward(pair.Ey, pair.Ex);
        sw.backward(pair.Ex, Ey_new);
        double step = 0.0;
        for (int s = 0; s <= grid.K; ++s) {
            Vec upd = opts.damping * (Ey_new.at(s) - pair.Ey.at(s));
            step = std::max(step, upd.cwiseAbs().maxCoeff());
            pair.Ey.at(s) += upd;
        }
        if (!std::isfinite(step))
            throw NumericError("picard iteration diverged (non-finite update)", it);
        rep.iterations = it;
        rep.residual = step;
        rep.trace.push_back(step);
        if (step <= opts.tolerance) {
            rep.converged = true;
            break;
        }
    }
    if (!rep.converged)
        throw ConvergenceError("picard iteration did not converge within " +
                                   std::to_string(opts.max_iter) + " iterations",
                               rep.residual);
    // Final forward pass so the forward equation holds exactly at the
    // returned pair.
    sw.forward(pair.Ey, pair.Ex);
    return {std::move(pair), std::move(rep)};
}

SweepConfig config_for(const ModelSpec& spec, const TimeGrid& grid,
                       AfboddeMode mode,
                       const std::optional<std::vector<Vec>>& forcing) {
    SweepConfig cfg;
    if (forcing) {
        if (static_cast<int>(forcing->size()) != grid.K + 1)
            throw StructuralError("extra_forcing must carry K+1 nodes");
        cfg.forcing = &*forcing;
    }
    // Initial data always comes from the spec handed in; the common system
    // is solved on a spec carrying the split (a2, xi2, zero eta).
    cfg.include_bhat = (mode == AfboddeMode::Eq13);
    cfg.x0 = spec.a;
    cfg.xi = &spec.xi_hist;
    cfg.eta = &spec.eta_hist;
    return cfg;
}

void require_case1(const ModelSpec& spec) {
    if (!schedule_is_zero(spec.Atil) || !schedule_is_zero(spec.Btil))
        throw StructuralError("Case I requires Atil = Btil = 0");
}

}  // namespace

RiccatiSolution solve_riccati(const ModelSpec& spec, const TimeGrid& grid) {
    const int n = spec.dims.n;
    const double h = grid.h;
    RiccatiSolution out;
    out.P.assign(static_cast<size_t>(grid.K) + 1, Mat::Zero(n, n));
    out.P[static_cast<size_t>(grid.K)] = 0.5 * (spec.M + spec.M.transpose());
    for (int s = grid.K - 1; s >= 0; --s) {
        const Mat& Pn = out.P[static_cast<size_t>(s + 1)];
        const Mat& Bs = spec.B.at(s);
        Mat Ad = Mat::Identity(n, n) + h * spec.A.at(s);
        Mat gbar = spec.gamma(s, grid) + h * Bs.transpose() * Pn * Bs;
        Eigen::LLT<Mat> llt(gbar);
        if (llt.info() != Eigen::Success)
            throw SolvabilityError("riccati step: effective control weight not PD at node " +
                                   std::to_string(s));
        Mat PnB = Pn * Bs;
        Mat W = Pn - h * PnB * llt.solve(PnB.transpose());
        Mat Ps = Ad.transpose() * W * Ad + h * spec.rbar(s, grid);
        Ps = 0.5 * (Ps + Ps.transpose());
        if (!(Ps.cwiseAbs().maxCoeff() <= 1e12) || !Ps.allFinite())
            throw NumericError("riccati blow-up", s);
        out.P[static_cast<size_t>(s)] = std::move(Ps);
    }
    return out;
}

PhiPath solve_phi(const ModelSpec& spec, const TimeGrid& grid,
                  const RiccatiSolution& P, const std::vector<Vec>& field) {
    const int n = spec.dims.n;
    const double h = grid.h;
    if (static_cast<int>(P.P.size()) != grid.K + 1)
        throw StructuralError("solve_phi: P must carry K+1 nodes");
    if (static_cast<int>(field.size()) < grid.K)
        throw StructuralError("solve_phi: forcing must carry at least K nodes");
    PhiPath out;
    out.phi.assign(static_cast<size_t>(grid.K) + 1, Vec::Zero(n));
    for (int s = grid.K - 1; s >= 0; --s) {
        const Mat& Pn = P.P[static_cast<size_t>(s + 1)];
        const Mat& Bs = spec.B.at(s);
        Mat Ad = Mat::Identity(n, n) + h * spec.A.at(s);
        Mat gbar = spec.gamma(s, grid) + h * Bs.transpose() * Pn * Bs;
        Eigen::LLT<Mat> llt(gbar);
        if (llt.info() != Eigen::Success)
            throw SolvabilityError("phi step: effective control weight not PD");
        Vec inner = out.phi[static_cast<size_t>(s + 1)] +
                    h * Pn * field[static_cast<size_t>(s)];
        Vec corrected = inner - h * (Pn * Bs) * llt.solve(Bs.transpose() * inner);
        out.phi[static_cast<size_t>(s)] = Ad.transpose() * corrected;
    }
    return out;
}

std::pair<MeanPair, PicardReport> solve_afbodde(
    const ModelSpec& spec, const TimeGrid& grid,
    const std::optional<std::vector<Vec>>& extra_forcing, AfboddeMode mode,
    const PicardOptions& opts) {
    return picard_solve(spec, grid, config_for(spec, grid, mode, extra_forcing),
                        opts);
}

std::pair<MeanPair, PicardReport> solve_mean_case1(const ModelSpec& spec,
                                                   const TimeGrid& grid,
                                                   const PicardOptions& opts) {
    require_case1(spec);
    // With Btil = 0 the Btil+Bhat coupling reduces to the self-referential
    // field Bhat * (lagged mean control), and to Bhat * eta before theta.
    SweepConfig cfg;
    cfg.include_bhat = true;
    cfg.x0 = spec.a;
    cfg.xi = &spec.xi_hist;
    cfg.eta = &spec.eta_hist;
    return picard_solve(spec, grid, cfg, opts);
}

DelayedPath control_path_from_mean(const ModelSpec& spec, const TimeGrid& grid,
                                   const MeanPair& mean) {
    DelayedPath u(PathRole::Control, grid, spec.dims.k);
    for (int s = -grid.q; s <= -1; ++s)
        u.at(s) = spec.eta_hist[static_cast<size_t>(s + grid.q)];
    for (int s = 0; s <= grid.K; ++s) {
        Vec rhs = spec.B.at(s).transpose() * mean.Ey.at(s + 1) +
                  spec.Btil.at_or_zero(s + grid.q).transpose() *
                      mean.Ey.at(s + grid.q + 1);
        Eigen::LLT<Mat> llt(spec.gamma(s, grid));
        if (llt.info() != Eigen::Success)
            throw SolvabilityError("control weight not PD at node " + std::to_string(s));
        u.at(s) = -llt.solve(rhs);
    }
    return u;
}

double afbodde_residual(const ModelSpec& spec, const TimeGrid& grid,
                        const std::optional<std::vector<Vec>>& extra_forcing,
                        AfboddeMode mode, const MeanPair& pair) {
    SweepConfig cfg = config_for(spec, grid, mode, extra_forcing);
    return Sweeper(spec, grid, cfg).pair_residual(pair);
}

double mean_case1_residual(const ModelSpec& spec, const TimeGrid& grid,
                           const MeanPair& pair) {
    require_case1(spec);
    SweepConfig cfg;
    cfg.include_bhat = true;
    cfg.x0 = spec.a;
    cfg.xi = &spec.xi_hist;
    cfg.eta = &spec.eta_hist;
    return Sweeper(spec, grid, cfg).pair_residual(pair);
}

}  // namespace mfg
