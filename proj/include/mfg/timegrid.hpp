#pragma once

#include <string>
#include <vector>

#include "mfg/types.hpp"

namespace mfg {

/// Uniform grid on [0, T] with exact integer delay offsets.
/// K*h = T, p*h = delta, q*h = theta.
struct TimeGrid {
    double T = 0.0;
    double h = 0.0;
    int K = 0;  ///< number of steps
    int p = 0;  ///< state delay in steps
    int q = 0;  ///< control delay in steps

    double time(int s) const { return s * h; }
    int pad() const { return p > q ? p : q; }
};

/// Builds the grid; throws DivisibilityError unless h divides T, delta and
/// theta to 1e-12 relative accuracy.
TimeGrid build_grid(double T, double h, double delta, double theta);

enum class PathRole { State, Control, Costate };

/// Vector-valued samples on the grid, with the index ranges of the role:
///   State   : [-p, K]           (history on [-p, -1] holds xi)
///   Control : [-q, K]           (history on [-q, -1] holds eta)
///   Costate : [0, K + max(p,q)] (pad on [K+1, ...] is identically zero)
class DelayedPath {
  public:
    DelayedPath() = default;
    DelayedPath(PathRole role, const TimeGrid& grid, int dim);

    PathRole role() const { return role_; }
    int lo() const { return lo_; }
    int hi() const { return hi_; }
    int dim() const { return dim_; }

    const Vec& at(int s) const;
    Vec& at(int s);

    /// True when every pad entry (costate beyond K) is exactly zero.
    bool pad_is_zero(const TimeGrid& grid) const;

  private:
    PathRole role_ = PathRole::State;
    int lo_ = 0, hi_ = -1, dim_ = 0;
    std::vector<Vec> values_;
};

/// Read-only shifted view: view.at(s) == base.at(s + steps).
/// Negative steps reach into the history segment; positive steps on a
/// costate read the zero pad beyond K. Positive shifts past the end of a
/// state/control path are a contract violation and throw RangeError.
class ShiftedView {
  public:
    ShiftedView(const DelayedPath& base, int steps)
        : base_(&base), steps_(steps) {}
    const Vec& at(int s) const { return base_->at(s + steps_); }
    int steps() const { return steps_; }

  private:
    const DelayedPath* base_;
    int steps_;
};

/// Precondition: |steps| <= max(p, q).
ShiftedView shift(const DelayedPath& path, const TimeGrid& grid, int steps);

/// CSV serialization: column 0 is time (history times are negative),
/// remaining columns are the components.
void write_path_csv(const std::string& file, const TimeGrid& grid,
                    const DelayedPath& path);

}  // namespace mfg
