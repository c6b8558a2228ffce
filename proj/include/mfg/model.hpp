#pragma once

#include <string>
#include <vector>

#include "mfg/timegrid.hpp"
#include "mfg/types.hpp"

namespace mfg {

/// All coefficients and data of the game, sampled on a common grid.
///
/// Time-varying coefficients carry K+1 nodes (t = 0 .. T). The delayed
/// weights Rtil and Nctil follow the extension convention: they vanish at
/// and beyond t = T, so shifted reads Rtil(s+p), Nctil(s+q) use at_or_zero.
/// The paper's control weight N is named Nc here (N is the population size).
struct ModelSpec {
    Dimensions dims;
    double T = 0.0;
    double delta = 0.0;  ///< state delay
    double theta = 0.0;  ///< control delay

    Schedule A, Atil;        // n x n
    Schedule B, Btil, Bhat;  // n x k
    Schedule sigma;          // n x m
    Schedule sigma0;         // n x d
    Schedule R, Rtil;        // n x n, symmetric
    Schedule Nc, Nctil;      // k x k, symmetric
    Mat M;                   // n x n terminal weight
    Vec a;                   // initial state
    std::vector<Vec> xi_hist;   // state history, index -p..-1
    std::vector<Vec> eta_hist;  // control history, index -q..-1

    /// xi(s) for s in [-p, -1].
    const Vec& xi(int s) const { return xi_hist[static_cast<size_t>(s + static_cast<int>(xi_hist.size()))]; }
    /// eta(s) for s in [-q, -1].
    const Vec& eta(int s) const { return eta_hist[static_cast<size_t>(s + static_cast<int>(eta_hist.size()))]; }

    /// Nc(s) + Nctil(s+q): the control weight the strategy map inverts.
    Mat gamma(int s, const TimeGrid& grid) const {
        return Nc.at(s) + Nctil.at_or_zero(s + grid.q);
    }
    /// R(s) + Rtil(s+p): the effective running state weight.
    Mat rbar(int s, const TimeGrid& grid) const {
        return R.at(s) + Rtil.at_or_zero(s + grid.p);
    }
};

struct Violation {
    std::string assumption;  // e.g. "H2:gamma_pd"
    int node;
    double diagnostic;  // offending eigenvalue / asymmetry norm
};

struct ValidationReport {
    bool ok = true;
    std::vector<Violation> violations;
};

/// Checks the standing assumptions on a fully populated spec:
///   - R, Rtil, Nc, Nctil symmetric at every node (1e-12),
///   - Rtil = 0 on [T, T+delta], Nctil = 0 on [T, T+theta],
///   - R + Rtil(.+delta) PSD, Nc + Nctil(.+theta) PD with min eig >= epd,
///   - M PSD, all entries finite.
/// Dimension mismatches throw StructuralError instead of being reported.
ValidationReport validate_spec(const ModelSpec& spec, const TimeGrid& grid,
                               double epd = 1e-8);

/// JSON model file. Scalars broadcast to constant schedules; arrays must
/// carry K+1 nodes. Matrices are row-major. See README for the schema.
ModelSpec load_model(const std::string& file, const TimeGrid& grid);
ModelSpec load_model_json(const std::string& json_text, const TimeGrid& grid);

/// Grid parameters (T, delta, theta) stored in a model file, needed to
/// build the grid before sampling coefficients.
struct ModelHeader {
    Dimensions dims;
    double T, delta, theta;
    double default_h = 0.0;  // optional "h" entry
};
ModelHeader read_model_header(const std::string& file);

void save_model(const std::string& file, const ModelSpec& spec);

}  // namespace mfg
