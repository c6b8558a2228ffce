#pragma once

#include <vector>

#include "mfg/det_solvers.hpp"
#include "mfg/model.hpp"

namespace mfg {

/// Decentralized strategy. Feedback strategies are affine time-varying maps
/// u_s(x) = G_s x + g_s; open-loop strategies carry a control path with the
/// eta history attached. Immutable after construction; control() is pure.
struct Strategy {
    enum class Kind { FeedbackCase1, OpenLoop, History };
    Kind kind = Kind::History;

    std::vector<Mat> G;  // feedback gains, 0..K
    std::vector<Vec> g;  // feedback offsets, 0..K
    DelayedPath path;    // open-loop path on [-q, K]
    std::vector<Vec> eta;  // history controls, index -q..-1

    Vec control(int s, const Vec& x) const;
    const Vec& history(int s, int q) const {  // s in [-q, -1]
        return eta[static_cast<size_t>(s + q)];
    }
};

/// The pointwise optimality map applied to a costate path: for every node
///   u_s = -(Nc_s + Nctil_{s+q})^{-1} (B_s' y_s + Btil_{s+q}' y_{s+q}),
/// reading the zero pad beyond T for the anticipated value. The costate
/// must be deterministic (mean reduction, closed form, or tree mean), so
/// conditional expectations are path values. Throws RangeError when the
/// anticipation pad is missing.
Strategy strategy_from_ypath(const ModelSpec& spec, const TimeGrid& grid,
                             const DelayedPath& ypath);

/// Case I state feedback u(s, x) = -Gamma_s^{-1} B_s' (P_s x + phi_s).
Strategy case1_feedback(const ModelSpec& spec, const TimeGrid& grid,
                        const RiccatiSolution& P, const PhiPath& phi);

/// Discrete-exact variant of the Case I feedback: the affine law whose
/// closed loop attains the discrete stationarity condition node by node,
///   u_s(x) = -(Gamma_s + h B'P_{s+1}B)^{-1} B' (P_{s+1}(I+hA_s)x
///            + h P_{s+1} m0_s + phi_{s+1}).
/// Its population mean reproduces the mean system exactly, so simulated
/// control averages are centered on the field with no discretization bias.
Strategy case1_feedback_discrete(const ModelSpec& spec, const TimeGrid& grid,
                                 const RiccatiSolution& P, const PhiPath& phi,
                                 const std::vector<Vec>& field);

Strategy openloop_strategy(const ModelSpec& spec, const TimeGrid& grid,
                           const DelayedPath& controls);

/// Costate of the pure-delay scalar problem (A = B = 0, delta = theta,
/// linear terminal weight M): piecewise polynomial on [0, T], equal to -M
/// on [T - delta, T], zero beyond T, with the martingale terms identically
/// zero. Solved interval by interval with exact polynomial integration.
struct Case2Costate {
    int K = 0, p = 0;
    double h = 0.0;
    double M = 0.0;
    /// Ascending coefficients of ybar(t_j + tau) in tau, one entry per cell
    /// j = 0..K-1; degree grows by one per delay interval.
    std::vector<std::vector<double>> cells;
    bool zbar_is_zero = true;

    double eval(double t) const;
    /// Node samples as a costate path (value -M at t = T, zero pad beyond).
    DelayedPath to_costate_path(const TimeGrid& grid) const;
};

/// Requires A = B = 0, delta = theta, n = k = 1. spec.M(0,0) is read as the
/// linear terminal weight. Throws StructuralError otherwise.
Case2Costate case2_solve(const ModelSpec& spec, const TimeGrid& grid);

}  // namespace mfg
