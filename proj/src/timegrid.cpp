#include "mfg/timegrid.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mfg/errors.hpp"

namespace mfg {

namespace {

// Nearest-integer ratio a/h, or -1 when the ratio is off an integer by more
// than 1e-12 relative.
int exact_ratio(double a, double h) {
    double r = a / h;
    double n = std::round(r);
    if (n < 1.0) return -1;
    if (std::abs(r - n) > 1e-12 * std::max(1.0, std::abs(r))) return -1;
    return static_cast<int>(n);
}

}  // namespace

TimeGrid build_grid(double T, double h, double delta, double theta) {
    if (!(T > 0.0) || !(h > 0.0) || !(delta > 0.0) || !(theta > 0.0))
        throw StructuralError("build_grid: T, h, delta, theta must be > 0");
    TimeGrid g;
    g.T = T;
    g.h = h;
    g.K = exact_ratio(T, h);
    g.p = exact_ratio(delta, h);
    g.q = exact_ratio(theta, h);
    if (g.K < 1 || g.p < 1 || g.q < 1)
        throw DivisibilityError("build_grid: h must divide T, delta and theta exactly");
    return g;
}

DelayedPath::DelayedPath(PathRole role, const TimeGrid& grid, int dim)
    : role_(role), dim_(dim) {
    switch (role) {
        case PathRole::State:
            lo_ = -grid.p;
            hi_ = grid.K;
            break;
        case PathRole::Control:
            lo_ = -grid.q;
            hi_ = grid.K;
            break;
        case PathRole::Costate:
            lo_ = 0;
            hi_ = grid.K + grid.pad();
            break;
    }
    values_.assign(static_cast<size_t>(hi_ - lo_ + 1), Vec::Zero(dim));
}

const Vec& DelayedPath::at(int s) const {
    if (s < lo_ || s > hi_)
        throw RangeError("path index " + std::to_string(s) + " outside [" +
                         std::to_string(lo_) + ", " + std::to_string(hi_) + "]");
    return values_[static_cast<size_t>(s - lo_)];
}

Vec& DelayedPath::at(int s) {
    if (s < lo_ || s > hi_)
        throw RangeError("path index " + std::to_string(s) + " outside [" +
                         std::to_string(lo_) + ", " + std::to_string(hi_) + "]");
    return values_[static_cast<size_t>(s - lo_)];
}

bool DelayedPath::pad_is_zero(const TimeGrid& grid) const {
    if (role_ != PathRole::Costate) return true;
    for (int s = grid.K + 1; s <= hi_; ++s)
        if (at(s).cwiseAbs().maxCoeff() != 0.0) return false;
    return true;
}

ShiftedView shift(const DelayedPath& path, const TimeGrid& grid, int steps) {
    int limit = grid.pad();
    if (steps > limit || steps < -limit)
        throw RangeError("shift of " + std::to_string(steps) +
                         " steps exceeds max(p, q) = " + std::to_string(limit));
    return ShiftedView(path, steps);
}

void write_path_csv(const std::string& file, const TimeGrid& grid,
                    const DelayedPath& path) {
    std::ofstream out(file);
    if (!out) throw StructuralError("cannot open " + file);
    out << "time";
    for (int c = 0; c < path.dim(); ++c) out << ",c" << c;
    out << "\n";
    char buf[32];
    for (int s = path.lo(); s <= path.hi(); ++s) {
        std::snprintf(buf, sizeof(buf), "%.12g", grid.time(s));
        out << buf;
        const Vec& v = path.at(s);
        for (int c = 0; c < path.dim(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.12g", v[c]);
            out << "," << buf;
        }
        out << "\n";
    }
}

}  // namespace mfg
