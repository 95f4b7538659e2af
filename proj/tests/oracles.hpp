#pragma once

// Reference computations written independently of the library internals.

#include <cmath>
#include <functional>

namespace oracle {

/// Composite Simpson rule on [a, b] with n (even) panels.
inline double simpson(std::function<double(double)> const &f, double a, double b, int n = 2000)
{
  if (!(b > a))
  {
    return 0.0;
  }
  n += n % 2;
  double const h = (b - a) / n;
  double       s = f(a) + f(b);
  for (int i = 1; i < n; ++i)
  {
    s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  }
  return s * h / 3.0;
}

/// Plain bisection for a sign change of f on [a, b].
inline double bisect(std::function<double(double)> const &f, double a, double b, int iters = 200)
{
  double fa = f(a);
  for (int i = 0; i < iters; ++i)
  {
    double const m  = 0.5 * (a + b);
    double const fm = f(m);
    if ((fm < 0.0) == (fa < 0.0))
    {
      a  = m;
      fa = fm;
    }
    else
    {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

inline double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
inline double Phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace oracle
