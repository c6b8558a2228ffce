#pragma once

#include <cstdint>
#include <vector>

#include "mfg/model.hpp"
#include "mfg/nce.hpp"
#include "mfg/rng.hpp"
#include "mfg/strategies.hpp"

namespace mfg {

/// Monte Carlo configuration. Noise streams are counter-based functions of
/// (seed, agent, replication, node), so results do not depend on execution
/// order; see rng.hpp for the exact layout.
struct NoiseConfig {
    uint64_t seed = 42;
    int n_agents = 2;
    int replications = 1;
};

struct PopulationPaths {
    std::vector<DelayedPath> states;    // one per agent
    std::vector<DelayedPath> controls;  // one per agent
};

enum class SimMode { Centralized, Decentralized };

/// Euler-Maruyama simulation of one replication of the N-agent system.
/// Centralized mode couples agent i through the realized average
/// (1/(N-1)) sum_{j != i} Bhat u^j(t - theta); decentralized mode replaces
/// it by the field m0 (required then). Throws NumericError on blow-up.
PopulationPaths simulate_population(const ModelSpec& spec, const TimeGrid& grid,
                                    const std::vector<Strategy>& strategies,
                                    const NoiseConfig& noise, SimMode mode,
                                    const NceField* m0, int replication);

/// Single agent under the limit dynamics (its own streams from `agent_id`),
/// used for decentralized paths and the deviation comparison system.
void simulate_limit_agent(const ModelSpec& spec, const TimeGrid& grid,
                          const Strategy& strategy, const NoiseConfig& noise,
                          const NceField& m0, int agent_id, int replication,
                          DelayedPath& state_out, DelayedPath& control_out);

/// Cost of one realized path pair: left-endpoint quadrature of the running
/// terms plus the terminal term; delayed terms before delta/theta read the
/// attached histories.
struct CostValue {
    double J = 0.0;
    double run_state = 0.0;
    double run_state_delayed = 0.0;
    double run_control = 0.0;
    double run_control_delayed = 0.0;
    double terminal = 0.0;
};
CostValue evaluate_cost(const ModelSpec& spec, const TimeGrid& grid,
                        const DelayedPath& state, const DelayedPath& control);

/// Agent i deviates to u_dev while every other agent keeps `others`; the
/// centralized system and the limit system run on the same noise streams.
struct DeviationRun {
    PopulationPaths centralized;   // the deviated N-agent system
    DelayedPath limit_state;       // agent i under the limit dynamics
    DelayedPath limit_control;
};
DeviationRun deviation_run(const ModelSpec& spec, const TimeGrid& grid,
                           const NoiseConfig& noise, int agent_i,
                           const Strategy& u_dev, const Strategy& others,
                           const NceField& m0, int replication);

/// Per-node squared deviation |(1/(N-1)) sum_{j != i} Bhat u^j(s-q) - m0|^2
/// of one centralized run; Monte Carlo drivers average over replications
/// and take the sup over nodes.
Vec control_average_sq_error(const ModelSpec& spec, const TimeGrid& grid,
                             const PopulationPaths& paths, const NceField& m0,
                             int agent_i);

/// Replication-averaged sup-node control-average mean squared error.
double control_average_error(const ModelSpec& spec, const TimeGrid& grid,
                             const std::vector<Strategy>& strategies,
                             const NoiseConfig& noise, const NceField& m0,
                             int agent_i);

/// Least squares on (log N, log value). Throws on non-positive values or
/// fewer than 3 points.
struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;  // in log space
    double r2 = 0.0;
};
FitResult rate_fit(const std::vector<int>& Ns, const std::vector<double>& values);

/// Order-independent accumulator (Kahan compensated sum).
class KahanSum {
  public:
    void add(double x) {
        double y = x - c_;
        double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

  private:
    double s_ = 0.0, c_ = 0.0;
};

}  // namespace mfg
