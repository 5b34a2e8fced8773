#include "stdpzo/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace stdpzo {

namespace {

using Rule = boost::math::quadrature::gauss_kronrod<double, 15>;

QuadratureResult adapt(const std::function<double(double)>& f, double a,
                       double b, double tol, unsigned depth) {
  double err = 0.0;
  // max_depth = 0 evaluates the rule on [a, b] only.
  const double est = Rule::integrate(f, a, b, 0, 0.0, &err);
  if (err <= tol || depth == 0) return {est, err};
  const double mid = 0.5 * (a + b);
  const auto left = adapt(f, a, mid, 0.5 * tol, depth - 1);
  const auto right = adapt(f, mid, b, 0.5 * tol, depth - 1);
  return {left.value + right.value, left.error + right.error};
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& f, double a,
                           double b, double abs_tol, unsigned max_depth) {
  if (a == b) return {};
  if (b < a) {
    auto r = adapt(f, b, a, abs_tol, max_depth);
    r.value = -r.value;
    return r;
  }
  return adapt(f, a, b, abs_tol, max_depth);
}

}  // namespace stdpzo
