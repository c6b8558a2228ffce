#pragma once

#include <optional>
#include <vector>

#include "mfg/model.hpp"
#include "mfg/timegrid.hpp"

namespace mfg {

/// Backward Riccati factor on [0, T]; P(T) = M, symmetric PSD for a
/// validated spec. Case I structure (Atil = Btil = 0) is the caller's
/// responsibility.
struct RiccatiSolution {
    std::vector<Mat> P;  // index 0..K
};

/// Offset of the affine costate representation y = P x + phi; phi(T) = 0.
struct PhiPath {
    std::vector<Vec> phi;  // index 0..K
};

/// Mean state/costate pair of the expectation-level systems.
/// Ex lives on [-delta, T] (history = E xi), Ey on [0, T + max(delta,theta)]
/// with an exact zero tail beyond T; Ey(T) = M Ex(T).
struct MeanPair {
    DelayedPath Ex;  // PathRole::State
    DelayedPath Ey;  // PathRole::Costate
};

struct PicardReport {
    int iterations = 0;
    double residual = 0.0;  // sup norm of the last applied update
    bool converged = false;
    std::vector<double> trace;  // update norms per iteration
};

struct PicardOptions {
    double damping = 0.5;
    double tolerance = 1e-10;
    int max_iter = 500;
};

/// Discrete Riccati recursion, the exact factorization of the one-step
/// transition (Ad = I + hA, Bd = hB, weight h*Gamma): solutions represent
/// the solver costate as Ey_s = P_s Ex_s + phi_s identically, and closed
/// forms of the continuous equation are reproduced exactly at the nodes.
/// Throws NumericError when ||P|| exceeds 1e12 (blow-up).
RiccatiSolution solve_riccati(const ModelSpec& spec, const TimeGrid& grid);

/// Backward offset equation, terminal phi(T) = 0, driven by the mean-field
/// forcing `field` (the drift term m0(s), s = 0..K; zero forcing or zero
/// Bhat upstream give phi == 0). Uses the recursion that keeps the
/// representation y = P x + phi exact for solve_mean_case1 fixed points.
PhiPath solve_phi(const ModelSpec& spec, const TimeGrid& grid,
                  const RiccatiSolution& P, const std::vector<Vec>& field);

enum class AfboddeMode {
    Eq12,  ///< idiosyncratic mean system: Btil-only delayed-control coupling
    Eq13   ///< common component: Btil+Bhat delayed-control coupling; the
           ///< external forcing carries the idiosyncratic contribution.
           ///< Initial data comes from the spec handed in (the split).
};

/// Damped Picard solver for the coupled anticipated forward/backward mean
/// systems. The forward sweep uses the current costate for the control
/// terms; the backward sweep resolves anticipated values within the same
/// pass. extra_forcing, when present, is added to the drift (index 0..K).
/// Throws ConvergenceError after max_iter without reaching tolerance.
std::pair<MeanPair, PicardReport> solve_afbodde(
    const ModelSpec& spec, const TimeGrid& grid,
    const std::optional<std::vector<Vec>>& extra_forcing, AfboddeMode mode,
    const PicardOptions& opts = {});

/// Mean of the Case I tracking system with its self-referential delayed
/// forcing Bhat * (lagged mean control); requires Atil = Btil = 0.
std::pair<MeanPair, PicardReport> solve_mean_case1(
    const ModelSpec& spec, const TimeGrid& grid,
    const PicardOptions& opts = {});

/// The control path attaining the discrete stationarity condition for a
/// mean pair: u_s = -Gamma_s^{-1} (B_s' Ey_{s+1} + Btil_{s+q}' Ey_{s+q+1}),
/// with eta attached on [-q, -1]. (u at t = T is unused by dynamics/cost.)
DelayedPath control_path_from_mean(const ModelSpec& spec, const TimeGrid& grid,
                                   const MeanPair& mean);

/// Sup-norm defect of a pair under the discrete equations of the given
/// mode; test/diagnostic hook for the fixed-point property.
double afbodde_residual(const ModelSpec& spec, const TimeGrid& grid,
                        const std::optional<std::vector<Vec>>& extra_forcing,
                        AfboddeMode mode, const MeanPair& pair);

/// Same defect for the Case I self-referential system.
double mean_case1_residual(const ModelSpec& spec, const TimeGrid& grid,
                           const MeanPair& pair);

}  // namespace mfg
