#pragma once

#include <cstddef>
#include <functional>

namespace treedtn {

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;  // estimated absolute error
    std::size_t evaluations = 0;
};

struct QuadratureOptions {
    double abs_tol = 1e-12;
    std::size_t max_evaluations = 1'000'000;
    int max_depth = 60;
};

/// Adaptive Simpson quadrature of f over [a, b] with Richardson-corrected
/// panels. Throws ToleranceNotMetError (carrying the best estimate) when the
/// evaluation budget or recursion depth runs out before abs_tol is met.
QuadratureResult adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                                  const QuadratureOptions& options = {});

struct DerivativeEstimate {
    double value = 0.0;
    double error = 0.0;
};

/// Central differences with Richardson extrapolation on a halving step
/// sequence starting at h. One-sided differences are used when t is within h
/// of the ends of [0,1].
DerivativeEstimate richardson_derivative(const std::function<double(double)>& f, double t,
                                         double h = 0.05);

}  // namespace treedtn
