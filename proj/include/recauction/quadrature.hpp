#pragma once

#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace recauction {

/// Adaptive 15-point Gauss-Kronrod quadrature. Subdivision stops once the
/// error estimate is below abs_tol or below a relative 1e-14 of |f|'s L1 norm.
class GaussKronrod
{
public:
  explicit GaussKronrod(double abs_tol = 1e-10, int max_depth = 24)
    : abs_tol_(abs_tol)
    , max_depth_(max_depth)
  {}

  template <class F>
  double integrate(F &&f, double a, double b) const
  {
    if (!(b > a))
    {
      return (a == b) ? 0.0 : -integrate(f, b, a);
    }
    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    auto       g  = [&](double x) { return static_cast<double>(f(x)); };
    double     l1 = 0.0;
    double     err = 0.0;
    // coarse pass sizes the relative target
    double const rough = GK::integrate(g, a, b, 0, 0.0, &err, &l1);
    if (err <= abs_tol_ || !std::isfinite(err))
    {
      return rough;
    }
    double const rel = l1 > 0.0 ? std::fmax(abs_tol_ / l1, 1e-14) : 1e-14;
    return GK::integrate(g, a, b, static_cast<unsigned>(max_depth_), rel, &err, &l1);
  }

private:
  double abs_tol_;
  int    max_depth_;
};

}  // namespace recauction
