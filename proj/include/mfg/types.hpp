#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mfg/errors.hpp"

namespace mfg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// State/control/noise dimensions of the game. All must be >= 1.
struct Dimensions {
    int n = 1;  ///< state
    int k = 1;  ///< control
    int m = 1;  ///< idiosyncratic noise
    int d = 1;  ///< common noise

    bool valid() const { return n >= 1 && k >= 1 && m >= 1 && d >= 1; }
};

/// Time-indexed matrix coefficient, sampled node-major on a uniform grid.
/// Values are piecewise constant on [t_s, t_{s+1}).
class Schedule {
  public:
    Schedule() = default;

    static Schedule constant(const Mat& value, int nodes) {
        Schedule s;
        s.values_.assign(static_cast<size_t>(nodes), value);
        return s;
    }
    static Schedule from_nodes(std::vector<Mat> values) {
        Schedule s;
        s.values_ = std::move(values);
        return s;
    }

    int nodes() const { return static_cast<int>(values_.size()); }
    long rows() const { return values_.empty() ? 0 : values_.front().rows(); }
    long cols() const { return values_.empty() ? 0 : values_.front().cols(); }

    const Mat& at(int s) const {
        if (s < 0 || s >= nodes())
            throw RangeError("schedule index " + std::to_string(s) +
                             " outside [0, " + std::to_string(nodes()) + ")");
        return values_[static_cast<size_t>(s)];
    }

    /// Zero extension beyond the stored range. Used for the terminal
    /// conventions on the delayed weights (zero on [T, T+delta] etc.).
    Mat at_or_zero(int s) const {
        if (s >= 0 && s < nodes()) return values_[static_cast<size_t>(s)];
        return Mat::Zero(rows(), cols());
    }

    bool uniform_shape(long r, long c) const {
        for (const Mat& v : values_)
            if (v.rows() != r || v.cols() != c) return false;
        return true;
    }

  private:
    std::vector<Mat> values_;
};

}  // namespace mfg
