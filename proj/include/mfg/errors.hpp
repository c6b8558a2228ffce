#pragma once

#include <stdexcept>
#include <string>

namespace mfg {

// Structural problems (wrong dimensions, malformed input). Distinct from
// assumption violations, which are reported through ValidationReport.
struct StructuralError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Grid step does not divide T, delta or theta.
struct DivisibilityError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Out-of-range path access (missing history or anticipation pad).
struct RangeError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

// Iterative solver failed to reach tolerance.
struct ConvergenceError : std::runtime_error {
    double residual;
    ConvergenceError(const std::string& what, double r)
        : std::runtime_error(what), residual(r) {}
};

// Divergence / NaN / overflow detected during a solve or simulation.
struct NumericError : std::runtime_error {
    long node;
    NumericError(const std::string& what, long at = -1)
        : std::runtime_error(what), node(at) {}
};

// Linear system could not be solved (singular assembly, indefinite Hessian).
struct SolvabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace mfg
