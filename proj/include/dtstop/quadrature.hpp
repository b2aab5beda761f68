#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace dtstop {

struct QuadratureOptions {
    double abs_tolerance = 1e-9;
    std::size_t max_panels = 10000;
};

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    std::size_t panels = 0;
};

/// Globally adaptive 15-point Gauss-Kronrod on [a, b]: the panel with the
/// largest error estimate is bisected until the summed estimate is below the
/// tolerance. NumericalFailure once the panel budget is spent. Panels are
/// processed in a fixed order, so results are deterministic.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           const QuadratureOptions& options = {});

/// Integral of f over (a, b) with 0 <= a < b <= inf, computed on u = t / (t + scale)
/// so the tail is mapped onto a finite interval.
QuadratureResult integrate_time(const std::function<double(double)>& f, double a, double b, double scale,
                                const QuadratureOptions& options = {});

/// Gauss-Legendre nodes and weights on [-1, 1], ascending.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const GaussRule& gauss_legendre(int n);

}  // namespace dtstop
