#include "mfg/population_sim.hpp"

#include <cmath>

#include "mfg/errors.hpp"

namespace mfg {

namespace {

Vec idiosyncratic_increment(const NoiseGenerator& gen, int rep, int agent,
                            int node, int m) {
    Vec z(m);
    for (int c = 0; c < m; ++c)
        z[c] = gen.normal(static_cast<uint32_t>(rep), static_cast<uint32_t>(agent),
                          static_cast<uint32_t>(node), static_cast<uint32_t>(c));
    return z;
}

Vec common_increment(const NoiseGenerator& gen, int rep, int node, int d) {
    Vec z(d);
    for (int c = 0; c < d; ++c)
        z[c] = gen.normal(static_cast<uint32_t>(rep), NoiseGenerator::kCommonStream,
                          static_cast<uint32_t>(node), static_cast<uint32_t>(c));
    return z;
}

void check_finite(const Vec& x, int node) {
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e12)
        throw NumericError("state blow-up during simulation", node);
}

}  // namespace

PopulationPaths simulate_population(const ModelSpec& spec, const TimeGrid& grid,
                                    const std::vector<Strategy>& strategies,
                                    const NoiseConfig& noise, SimMode mode,
                                    const NceField* m0, int replication) {
    const int N = noise.n_agents;
    if (static_cast<int>(strategies.size()) != N)
        throw StructuralError("simulate_population: one strategy per agent required");
    if (mode == SimMode::Centralized && N < 2)
        throw StructuralError("centralized mode needs at least 2 agents");
    if (mode == SimMode::Decentralized && m0 == nullptr)
        throw StructuralError("decentralized mode needs the field m0");

    const int n = spec.dims.n, k = spec.dims.k, m = spec.dims.m, d = spec.dims.d;
    const double h = grid.h, sh = std::sqrt(grid.h);
    NoiseGenerator gen(noise.seed);

    PopulationPaths out;
    out.states.reserve(static_cast<size_t>(N));
    out.controls.reserve(static_cast<size_t>(N));
    for (int i = 0; i < N; ++i) {
        DelayedPath x(PathRole::State, grid, n);
        DelayedPath u(PathRole::Control, grid, k);
        for (int s = -grid.p; s <= -1; ++s) x.at(s) = spec.xi(s);
        x.at(0) = spec.a;
        for (int s = -grid.q; s <= -1; ++s) u.at(s) = strategies[static_cast<size_t>(i)].history(s, grid.q);
        out.states.push_back(std::move(x));
        out.controls.push_back(std::move(u));
    }

    for (int s = 0; s < grid.K; ++s) {
        for (int i = 0; i < N; ++i)
            out.controls[static_cast<size_t>(i)].at(s) =
                strategies[static_cast<size_t>(i)].control(s, out.states[static_cast<size_t>(i)].at(s));

        // Realized coupling: sum once, subtract own contribution per agent.
        Vec coupling_sum = Vec::Zero(n);
        if (mode == SimMode::Centralized) {
            for (int j = 0; j < N; ++j)
                coupling_sum += spec.Bhat.at(s) * out.controls[static_cast<size_t>(j)].at(s - grid.q);
        }

        Vec zc = common_increment(gen, replication, s, d);
        for (int i = 0; i < N; ++i) {
            DelayedPath& x = out.states[static_cast<size_t>(i)];
            const DelayedPath& u = out.controls[static_cast<size_t>(i)];
            Vec coupling;
            if (mode == SimMode::Centralized) {
                coupling = (coupling_sum -
                            spec.Bhat.at(s) * u.at(s - grid.q)) /
                           static_cast<double>(N - 1);
            } else {
                coupling = m0->m0[static_cast<size_t>(s)];
            }
            Vec drift = spec.A.at(s) * x.at(s) + spec.Atil.at(s) * x.at(s - grid.p) +
                        spec.B.at(s) * u.at(s) + spec.Btil.at(s) * u.at(s - grid.q) +
                        coupling;
            Vec zi = idiosyncratic_increment(gen, replication, i, s, m);
            x.at(s + 1) = x.at(s) + h * drift + sh * (spec.sigma.at(s) * zi) +
                          sh * (spec.sigma0.at(s) * zc);
            check_finite(x.at(s + 1), s + 1);
        }
    }
    for (int i = 0; i < N; ++i)
        out.controls[static_cast<size_t>(i)].at(grid.K) =
            strategies[static_cast<size_t>(i)].control(grid.K, out.states[static_cast<size_t>(i)].at(grid.K));
    return out;
}

void simulate_limit_agent(const ModelSpec& spec, const TimeGrid& grid,
                          const Strategy& strategy, const NoiseConfig& noise,
                          const NceField& m0, int agent_id, int replication,
                          DelayedPath& state_out, DelayedPath& control_out) {
    const int n = spec.dims.n, k = spec.dims.k, m = spec.dims.m, d = spec.dims.d;
    const double h = grid.h, sh = std::sqrt(grid.h);
    NoiseGenerator gen(noise.seed);

    state_out = DelayedPath(PathRole::State, grid, n);
    control_out = DelayedPath(PathRole::Control, grid, k);
    for (int s = -grid.p; s <= -1; ++s) state_out.at(s) = spec.xi(s);
    state_out.at(0) = spec.a;
    for (int s = -grid.q; s <= -1; ++s) control_out.at(s) = strategy.history(s, grid.q);

    for (int s = 0; s < grid.K; ++s) {
        control_out.at(s) = strategy.control(s, state_out.at(s));
        Vec drift = spec.A.at(s) * state_out.at(s) +
                    spec.Atil.at(s) * state_out.at(s - grid.p) +
                    spec.B.at(s) * control_out.at(s) +
                    spec.Btil.at(s) * control_out.at(s - grid.q) +
                    m0.m0[static_cast<size_t>(s)];
        Vec zi = idiosyncratic_increment(gen, replication, agent_id, s, m);
        Vec zc = common_increment(gen, replication, s, d);
        state_out.at(s + 1) = state_out.at(s) + h * drift +
                              sh * (spec.sigma.at(s) * zi) +
                              sh * (spec.sigma0.at(s) * zc);
        check_finite(state_out.at(s + 1), s + 1);
    }
    control_out.at(grid.K) = strategy.control(grid.K, state_out.at(grid.K));
}

CostValue evaluate_cost(const ModelSpec& spec, const TimeGrid& grid,
                        const DelayedPath& state, const DelayedPath& control) {
    CostValue cv;
    KahanSum rs, rsd, rc, rcd;
    for (int s = 0; s < grid.K; ++s) {
        const Vec& x = state.at(s);
        const Vec& xd = state.at(s - grid.p);
        const Vec& u = control.at(s);
        const Vec& ud = control.at(s - grid.q);
        rs.add(x.dot(spec.R.at(s) * x));
        rsd.add(xd.dot(spec.Rtil.at(s) * xd));
        rc.add(u.dot(spec.Nc.at(s) * u));
        rcd.add(ud.dot(spec.Nctil.at(s) * ud));
    }
    const double half_h = 0.5 * grid.h;
    cv.run_state = half_h * rs.value();
    cv.run_state_delayed = half_h * rsd.value();
    cv.run_control = half_h * rc.value();
    cv.run_control_delayed = half_h * rcd.value();
    const Vec& xT = state.at(grid.K);
    cv.terminal = 0.5 * xT.dot(spec.M * xT);
    cv.J = cv.run_state + cv.run_state_delayed + cv.run_control +
           cv.run_control_delayed + cv.terminal;
    return cv;
}

DeviationRun deviation_run(const ModelSpec& spec, const TimeGrid& grid,
                           const NoiseConfig& noise, int agent_i,
                           const Strategy& u_dev, const Strategy& others,
                           const NceField& m0, int replication) {
    if (agent_i < 0 || agent_i >= noise.n_agents)
        throw StructuralError("deviation_run: agent index out of range");
    std::vector<Strategy> profile(static_cast<size_t>(noise.n_agents), others);
    profile[static_cast<size_t>(agent_i)] = u_dev;
    DeviationRun run;
    run.centralized = simulate_population(spec, grid, profile, noise,
                                          SimMode::Centralized, nullptr,
                                          replication);
    simulate_limit_agent(spec, grid, u_dev, noise, m0, agent_i, replication,
                         run.limit_state, run.limit_control);
    return run;
}

Vec control_average_sq_error(const ModelSpec& spec, const TimeGrid& grid,
                             const PopulationPaths& paths, const NceField& m0,
                             int agent_i) {
    const int N = static_cast<int>(paths.controls.size());
    Vec out(grid.K + 1);
    for (int s = 0; s <= grid.K; ++s) {
        Vec avg = Vec::Zero(spec.dims.n);
        for (int j = 0; j < N; ++j) {
            if (j == agent_i) continue;
            avg += spec.Bhat.at(s) * paths.controls[static_cast<size_t>(j)].at(s - grid.q);
        }
        avg /= static_cast<double>(N - 1);
        out[s] = (avg - m0.m0[static_cast<size_t>(s)]).squaredNorm();
    }
    return out;
}

double control_average_error(const ModelSpec& spec, const TimeGrid& grid,
                             const std::vector<Strategy>& strategies,
                             const NoiseConfig& noise, const NceField& m0,
                             int agent_i) {
    std::vector<KahanSum> acc(static_cast<size_t>(grid.K) + 1);
    for (int rep = 0; rep < noise.replications; ++rep) {
        PopulationPaths paths = simulate_population(
            spec, grid, strategies, noise, SimMode::Centralized, nullptr, rep);
        Vec curve = control_average_sq_error(spec, grid, paths, m0, agent_i);
        for (int s = 0; s <= grid.K; ++s) acc[static_cast<size_t>(s)].add(curve[s]);
    }
    double sup = 0.0;
    for (int s = 0; s <= grid.K; ++s)
        sup = std::max(sup, acc[static_cast<size_t>(s)].value() / noise.replications);
    return sup;
}

FitResult rate_fit(const std::vector<int>& Ns, const std::vector<double>& values) {
    if (Ns.size() != values.size() || Ns.size() < 3)
        throw StructuralError("rate_fit: need at least 3 matching points");
    const size_t n = Ns.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        if (!(values[i] > 0.0))
            throw StructuralError("rate_fit: values must be positive");
        double x = std::log(static_cast<double>(Ns[i]));
        double y = std::log(values[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    double dn = static_cast<double>(n);
    double vx = sxx - sx * sx / dn;
    double vy = syy - sy * sy / dn;
    double cxy = sxy - sx * sy / dn;
    FitResult fit;
    fit.slope = cxy / vx;
    fit.intercept = (sy - fit.slope * sx) / dn;
    fit.r2 = (vy > 0.0) ? (cxy * cxy) / (vx * vy) : 1.0;
    return fit;
}

}  // namespace mfg
