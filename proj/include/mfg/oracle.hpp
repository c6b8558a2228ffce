#pragma once

#include <vector>

#include "mfg/model.hpp"
#include "mfg/nce.hpp"

namespace mfg {

/// Binomial scenario tree: one two-point branch per active noise source,
/// increments +-sqrt(h), so conditional expectations are exact averages
/// over descendants. Branching is 2 with idiosyncratic noise only, 4 with
/// a common source as well, 1 for deterministic specs (sigma = sigma0 = 0).
/// Node count is branching^depth; stochastic trees cap the depth (8 for
/// branching 2, 4 for branching 4), deterministic chains may go deeper.
struct ScenarioTree {
    int depth = 0;
    int branching = 1;

    long level_size(int s) const;
    long level_offset(int s) const;  ///< id of the first node at level s
    long total_nodes() const { return level_offset(depth + 1); }
    long node_id(int s, long word) const { return level_offset(s) + word; }
    /// Word of the ancestor r levels above (s, word).
    long ancestor_word(long word, int r) const;

    /// Idiosyncratic / common increment sign of child branch c.
    double zeta_i(int c) const;
    double zeta_0(int c) const;
};

ScenarioTree make_tree(const ModelSpec& spec, const TimeGrid& grid);

/// Exact solution of the discrete coupled system on the tree.
struct TreeSolution {
    ScenarioTree tree;
    std::vector<Vec> x;  // per node, levels 0..K
    std::vector<Vec> y;  // per node, levels 0..K (zero beyond by convention)
    std::vector<Vec> u;  // per node, levels 0..K-1
    std::vector<Vec> z;   // recovered martingale differences, levels 0..K-1
    std::vector<Vec> z0;  // common-noise part (branching 4 only)

    double solve_residual = 0.0;        // assembled-system defect
    double stationarity_residual = 0.0; // per-equation-class defects
    double forward_residual = 0.0;
    double backward_residual = 0.0;
    double terminal_residual = 0.0;

    /// Mean over the (uniform) nodes of a level.
    Vec mean_x(int level) const;
    Vec mean_y(int level) const;
    Vec mean_u(int level) const;
};

/// Assembles the discrete coupled system - forward transitions, backward
/// recursion with exact tree conditional expectations for the anticipated
/// terms, terminal coupling y = M x and the stationarity equation - into
/// one sparse linear system and solves it directly. The system is the
/// first-order condition set of the discrete cost, so its solution is the
/// exact optimizer brute_force_optimize finds independently.
/// m0 == nullptr means zero field. Throws SolvabilityError when singular.
TreeSolution tree_solve_hamiltonian(const ModelSpec& spec, const TimeGrid& grid,
                                    const NceField* m0);

/// Treats the node controls as unknowns of the discretized cost with the
/// dynamics substituted linearly and solves the normal equations. Throws
/// SolvabilityError if the Hessian fails to be positive definite.
TreeSolution brute_force_optimize(const ModelSpec& spec, const TimeGrid& grid,
                                  const NceField* m0);

/// Cost of a control assignment on the tree (probability-weighted
/// discretized cost); used by the sampled-optimality certificate.
double tree_cost(const ModelSpec& spec, const TimeGrid& grid,
                 const ScenarioTree& tree, const std::vector<Vec>& u,
                 const NceField* m0);

/// Additivity check of the two-system decomposition: solves the full
/// system, the idiosyncratic system (split initial data, no field) and the
/// deterministic common system (complementary split, field attached) and
/// returns max over nodes of |x - (x1 + x2)| + |y - (y1 + y2)| under the
/// matched noise embedding. Requires sigma0 = 0.
double decomposition_check(const ModelSpec& spec, const TimeGrid& grid,
                           const NceField& m0, const Vec& a1, const Vec& a2,
                           const std::vector<Vec>& xi1,
                           const std::vector<Vec>& xi2);

/// Open-loop strategy from a deterministic (branching-1) tree solution.
DelayedPath openloop_from_tree(const ModelSpec& spec, const TimeGrid& grid,
                               const TreeSolution& sol);

}  // namespace mfg
