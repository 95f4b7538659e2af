#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "recauction/quadrature.hpp"
#include "recauction/random.hpp"

namespace recauction {

/// Thrown when a density is too small to form a virtual value.
class DegenerateDensityError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

enum class Family
{
  Uniform,
  Power,
  TruncatedLogNormal,
  TruncatedNormal
};

std::string to_string(Family family);

namespace detail {

/// Standard-normal helpers accurate in both tails.
double norm_cdf(double z);
double norm_sf(double z);
double norm_pdf(double z);
double norm_quantile(double p);
double norm_isf(double q);

struct UniformLaw
{
  double lo;
  double hi;
};

struct PowerLaw
{
  double k;
};

/// Normal law in a transformed variable, truncated to [lo, hi] in value
/// units. With `log_scale` the value is exp(mu + sigma z).
struct TruncatedLaw
{
  double mu;
  double sigma;
  double lo;
  double hi;
  bool   log_scale;
  double z_lo;
  double z_hi;
  double cdf_lo;  // Phi(z_lo)
  double sf_hi;   // 1 - Phi(z_hi)
  double mass;    // Phi(z_hi) - Phi(z_lo)

  double sf_lo;   // 1 - Phi(z_lo)
  double cdf_hi;  // Phi(z_hi)

  double to_z(double v) const { return ((log_scale ? std::log(v) : v) - mu) / sigma; }
  double from_z(double z) const { return log_scale ? std::exp(mu + sigma * z) : mu + sigma * z; }
  /// Truncated cdf / survival at standardized score z in [z_lo, z_hi].
  double cdf_z(double z) const
  {
    return z > 0.0 ? (sf_lo - norm_sf(z)) / mass : (norm_cdf(z) - cdf_lo) / mass;
  }
  double sf_z(double z) const
  {
    return z > 0.0 ? (norm_sf(z) - sf_hi) / mass : (cdf_hi - norm_cdf(z)) / mass;
  }
};

/// x^n for small non-negative integer n.
inline double ipow(double x, int n)
{
  double r = 1.0;
  while (n > 0)
  {
    if (n & 1)
    {
      r *= x;
    }
    x *= x;
    n >>= 1;
  }
  return r;
}

}  // namespace detail

/// Buyer value law F on [lower, upper].
///
/// All queries are pure; instances are immutable once built. Values outside
/// the support clamp (cdf 0 below, 1 above) because root finders probe
/// slightly past bracket edges.
class ValueDistribution
{
public:
  static ValueDistribution uniform(double a, double b);
  /// F(v) = v^k on [0, 1].
  static ValueDistribution power(double k);
  /// Log-normal(mu, sigma) truncated to [lo, hi]; requires 0 < lo.
  static ValueDistribution trunc_lognormal(double mu, double sigma, double lo, double hi);
  static ValueDistribution trunc_normal(double mu, double sigma, double lo, double hi);

  Family              family() const;
  std::vector<double> params() const;
  std::string         describe() const;

  double lower() const { return lower_; }
  double upper() const { return upper_; }

  double cdf(double v) const;
  /// 1 - F(v), computed without cancellation in the upper tail.
  double survival(double v) const;
  double pdf(double v) const;
  double quantile(double p) const;

  /// F(v)^m; m = 0 gives 1 (empty maximum).
  double order_stat_cdf(int m, double v) const;

  /// Integral of x dF(x)^m over [a, b] (clamped to the support).
  double partial_expectation(int m, double a, double b) const;

  /// psi(v) = v - (1 - F(v)) / f(v).
  double virtual_value(double v) const;

  double sample(Rng &rng) const { return quantile(rng.uniform()); }

  /// Integral over [a, b] of h(x, F(x)) dF(x). Each family integrates in
  /// its natural variable: probability for Uniform/Power, standardized
  /// normal score for the truncated families.
  template <class H>
  double integrate_dF(double a, double b, H &&h, double abs_tol = 1e-10) const;

private:
  using Law = std::variant<detail::UniformLaw, detail::PowerLaw, detail::TruncatedLaw>;

  ValueDistribution(Law law, double lower, double upper);

  Law    law_;
  double lower_;
  double upper_;
};

template <class H>
double ValueDistribution::integrate_dF(double a, double b, H &&h, double abs_tol) const
{
  a = std::clamp(a, lower_, upper_);
  b = std::clamp(b, lower_, upper_);
  if (!(b > a))
  {
    return 0.0;
  }
  GaussKronrod const gk(abs_tol);
  if (auto const *u = std::get_if<detail::UniformLaw>(&law_))
  {
    double const w = u->hi - u->lo;
    return gk.integrate([&](double p) { return h(u->lo + w * p, p); }, (a - u->lo) / w,
                        (b - u->lo) / w);
  }
  if (auto const *pw = std::get_if<detail::PowerLaw>(&law_))
  {
    double const inv = 1.0 / pw->k;
    return gk.integrate([&](double p) { return h(std::pow(p, inv), p); }, std::pow(a, pw->k),
                        std::pow(b, pw->k));
  }
  auto const &t  = std::get<detail::TruncatedLaw>(law_);
  double const za = std::max(t.to_z(a), t.z_lo);
  double const zb = std::min(t.to_z(b), t.z_hi);
  auto integrand  = [&](double z) {
    double const x  = t.from_z(z);
    double const fz = detail::norm_pdf(z) / t.mass;
    return h(x, std::clamp(t.cdf_z(z), 0.0, 1.0)) * fz;
  };
  return gk.integrate(integrand, za, zb);
}

}  // namespace recauction
