#include "mfg/nce.hpp"

#include <cstdio>
#include <fstream>

#include "mfg/errors.hpp"

namespace mfg {

namespace {

// Bhat_s * u(s - q), reading eta through the path's history segment.
std::vector<Vec> lagged_field(const ModelSpec& spec, const TimeGrid& grid,
                              const DelayedPath& control) {
    std::vector<Vec> out(static_cast<size_t>(grid.K) + 1);
    for (int s = 0; s <= grid.K; ++s)
        out[static_cast<size_t>(s)] = spec.Bhat.at(s) * control.at(s - grid.q);
    return out;
}

}  // namespace

NceField field_from_control(const ModelSpec& spec, const TimeGrid& grid,
                            const DelayedPath& control) {
    NceField f;
    f.m0 = lagged_field(spec, grid, control);
    f.sigma1 = f.m0;
    f.sigma2.assign(f.m0.size(), Vec::Zero(spec.dims.n));
    return f;
}

NceField compute_m0_general(const ModelSpec& spec, const TimeGrid& grid,
                            const NceOptions& opts, NceDiagnostics* diag) {
    const int n = spec.dims.n;

    // Idiosyncratic mean system with the full shared data.
    auto [mean1, rep1] = solve_afbodde(spec, grid, std::nullopt,
                                       AfboddeMode::Eq12, opts.picard);
    DelayedPath u1 = control_path_from_mean(spec, grid, mean1);
    std::vector<Vec> sigma1 = lagged_field(spec, grid, u1);

    // Common system. Its forcing carries the idiosyncratic contribution
    // (and through u1's history segment the Bhat*eta values before theta).
    ModelSpec split = spec;
    split.a = opts.a2.size() == n ? opts.a2 : Vec::Zero(n);
    if (!opts.xi2.empty()) {
        if (static_cast<int>(opts.xi2.size()) != grid.p)
            throw StructuralError("xi2 split must carry p samples");
        split.xi_hist = opts.xi2;
    } else {
        split.xi_hist.assign(static_cast<size_t>(grid.p), Vec::Zero(n));
    }
    split.eta_hist.assign(static_cast<size_t>(grid.q), Vec::Zero(spec.dims.k));

    // With feedback disabled the common system keeps only its Btil coupling
    // and no forcing; Eq12 mode on the split data provides exactly that.
    auto [mean2, rep2] =
        opts.disable_field_feedback
            ? solve_afbodde(split, grid, std::nullopt, AfboddeMode::Eq12,
                            opts.picard)
            : solve_afbodde(split, grid, std::optional(sigma1),
                            AfboddeMode::Eq13, opts.picard);
    DelayedPath u2 = control_path_from_mean(split, grid, mean2);
    std::vector<Vec> sigma2 = lagged_field(split, grid, u2);

    NceField f;
    f.sigma1 = std::move(sigma1);
    f.sigma2 = std::move(sigma2);
    f.m0.resize(f.sigma1.size());
    for (size_t i = 0; i < f.m0.size(); ++i) f.m0[i] = f.sigma1[i] + f.sigma2[i];
    if (diag) {
        diag->eq12 = rep1;
        diag->eq13 = rep2;
    }
    return f;
}

NceField compute_m0_general(const ModelSpec& spec, const TimeGrid& grid,
                            const NceOptions& opts) {
    return compute_m0_general(spec, grid, opts, nullptr);
}

NceField compute_m0_case1(const ModelSpec& spec, const TimeGrid& grid,
                          const PicardOptions& opts) {
    auto [mean, rep] = solve_mean_case1(spec, grid, opts);
    DelayedPath u = control_path_from_mean(spec, grid, mean);
    return field_from_control(spec, grid, u);
}

void write_field_csv(const std::string& file, const TimeGrid& grid,
                     const NceField& field) {
    std::ofstream out(file);
    if (!out) throw StructuralError("cannot open " + file);
    const int n = static_cast<int>(field.m0.front().size());
    out << "time";
    for (int c = 0; c < n; ++c) out << ",m0_" << c;
    for (int c = 0; c < n; ++c) out << ",sigma1_" << c;
    for (int c = 0; c < n; ++c) out << ",sigma2_" << c;
    out << "\n";
    char buf[32];
    for (int s = 0; s <= grid.K; ++s) {
        std::snprintf(buf, sizeof(buf), "%.12g", grid.time(s));
        out << buf;
        for (const auto* col : {&field.m0, &field.sigma1, &field.sigma2})
            for (int c = 0; c < n; ++c) {
                std::snprintf(buf, sizeof(buf), "%.12g",
                              (*col)[static_cast<size_t>(s)][c]);
                out << "," << buf;
            }
        out << "\n";
    }
}

}  // namespace mfg
