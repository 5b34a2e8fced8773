#pragma once

#include <functional>

namespace stdpzo {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;  // accumulated Kronrod error estimate
};

// Adaptive Gauss–Kronrod (G7/K15) integration of f over [a, b]; intervals are
// bisected until each local error estimate falls below its share of abs_tol
// or max_depth is reached.
QuadratureResult integrate(const std::function<double(double)>& f, double a,
                           double b, double abs_tol = 1e-12,
                           unsigned max_depth = 30);

}  // namespace stdpzo
