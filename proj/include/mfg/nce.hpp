#pragma once

#include <vector>

#include "mfg/det_solvers.hpp"
#include "mfg/model.hpp"

namespace mfg {

/// Consistency field replacing the population control-average term.
/// m0 = sigma1 + sigma2 at every node; on [0, theta) the field equals
/// Bhat(t) * eta(t - theta) (agents still play history controls there).
struct NceField {
    std::vector<Vec> m0;      // 0..K
    std::vector<Vec> sigma1;  // deterministic component
    std::vector<Vec> sigma2;  // common component (deterministic here)
};

struct NceOptions {
    PicardOptions picard;
    /// Initial-data split between the idiosyncratic and common systems;
    /// empty means (a, xi) idiosyncratic, zero common. The shared control
    /// history always rides with the idiosyncratic part.
    std::vector<Vec> xi2;
    Vec a2;
    /// Drops the field's own coupling inside the common system (the Bhat
    /// augmentation of the delayed-control term and the forcing), making
    /// the assembled field linear in Bhat. Test hook.
    bool disable_field_feedback = false;
};

/// Field Bhat_s * u(s - q) for a lagged control path carrying eta history.
NceField field_from_control(const ModelSpec& spec, const TimeGrid& grid,
                            const DelayedPath& control);

/// General two-system route: the idiosyncratic mean system feeds its lagged
/// mean control into the common system, and the field is the sum of the two
/// lagged-control contributions. Computed under sigma0 = 0.
NceField compute_m0_general(const ModelSpec& spec, const TimeGrid& grid,
                            const NceOptions& opts = {});

/// Case I route (Atil = Btil = 0): field of the self-referential mean
/// system; the whole field sits in sigma1.
NceField compute_m0_case1(const ModelSpec& spec, const TimeGrid& grid,
                          const PicardOptions& opts = {});

/// Last Picard reports of the component solves (diagnostics).
struct NceDiagnostics {
    PicardReport eq12;
    PicardReport eq13;
};
NceField compute_m0_general(const ModelSpec& spec, const TimeGrid& grid,
                            const NceOptions& opts, NceDiagnostics* diag);

void write_field_csv(const std::string& file, const TimeGrid& grid,
                     const NceField& field);

}  // namespace mfg
