#include "recauction/distributions.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <sstream>

namespace recauction {

namespace detail {

namespace {
constexpr double kInvSqrt2   = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kSqrt2      = 1.41421356237309504880;
}  // namespace

double norm_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }
double norm_sf(double z) { return 0.5 * std::erfc(z * kInvSqrt2); }
double norm_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double norm_quantile(double p)
{
  if (p <= 0.0)
  {
    return -HUGE_VAL;
  }
  if (p >= 1.0)
  {
    return HUGE_VAL;
  }
  return -kSqrt2 * boost::math::erfc_inv(2.0 * p);
}

double norm_isf(double q) { return -norm_quantile(q); }

}  // namespace detail

namespace {

detail::TruncatedLaw make_truncated(double mu, double sigma, double lo, double hi, bool log_scale)
{
  if (!(sigma > 0.0) || !std::isfinite(sigma))
  {
    throw std::invalid_argument("truncated law requires sigma > 0");
  }
  if (!(lo < hi))
  {
    throw std::invalid_argument("truncated law requires lo < hi");
  }
  if (log_scale && !(lo > 0.0))
  {
    throw std::invalid_argument("truncated log-normal requires lo > 0");
  }
  detail::TruncatedLaw t{};
  t.mu        = mu;
  t.sigma     = sigma;
  t.lo        = lo;
  t.hi        = hi;
  t.log_scale = log_scale;
  t.z_lo      = t.to_z(lo);
  t.z_hi      = t.to_z(hi);
  t.cdf_lo    = detail::norm_cdf(t.z_lo);
  t.sf_lo     = detail::norm_sf(t.z_lo);
  t.cdf_hi    = detail::norm_cdf(t.z_hi);
  t.sf_hi     = detail::norm_sf(t.z_hi);
  if (t.z_lo > 0.0)
  {
    t.mass = t.sf_lo - t.sf_hi;
  }
  else if (t.z_hi < 0.0)
  {
    t.mass = t.cdf_hi - t.cdf_lo;
  }
  else
  {
    t.mass = 1.0 - t.cdf_lo - t.sf_hi;
  }
  if (!(t.mass >= 1e-12))
  {
    throw std::invalid_argument("truncated law has mass below 1e-12 on its support");
  }
  return t;
}

}  // namespace

std::string to_string(Family family)
{
  switch (family)
  {
  case Family::Uniform:
    return "uniform";
  case Family::Power:
    return "power";
  case Family::TruncatedLogNormal:
    return "trln";
  case Family::TruncatedNormal:
    return "trn";
  }
  return "?";
}

ValueDistribution::ValueDistribution(Law law, double lower, double upper)
  : law_(std::move(law))
  , lower_(lower)
  , upper_(upper)
{}

ValueDistribution ValueDistribution::uniform(double a, double b)
{
  if (!(a < b) || !std::isfinite(a) || !std::isfinite(b))
  {
    throw std::invalid_argument("uniform law requires finite a < b");
  }
  return ValueDistribution(detail::UniformLaw{a, b}, a, b);
}

ValueDistribution ValueDistribution::power(double k)
{
  if (!(k > 0.0) || !std::isfinite(k))
  {
    throw std::invalid_argument("power law requires k > 0");
  }
  return ValueDistribution(detail::PowerLaw{k}, 0.0, 1.0);
}

ValueDistribution ValueDistribution::trunc_lognormal(double mu, double sigma, double lo, double hi)
{
  return ValueDistribution(make_truncated(mu, sigma, lo, hi, true), lo, hi);
}

ValueDistribution ValueDistribution::trunc_normal(double mu, double sigma, double lo, double hi)
{
  return ValueDistribution(make_truncated(mu, sigma, lo, hi, false), lo, hi);
}

Family ValueDistribution::family() const
{
  if (std::holds_alternative<detail::UniformLaw>(law_))
  {
    return Family::Uniform;
  }
  if (std::holds_alternative<detail::PowerLaw>(law_))
  {
    return Family::Power;
  }
  return std::get<detail::TruncatedLaw>(law_).log_scale ? Family::TruncatedLogNormal
                                                        : Family::TruncatedNormal;
}

std::vector<double> ValueDistribution::params() const
{
  if (auto const *u = std::get_if<detail::UniformLaw>(&law_))
  {
    return {u->lo, u->hi};
  }
  if (auto const *p = std::get_if<detail::PowerLaw>(&law_))
  {
    return {p->k};
  }
  auto const &t = std::get<detail::TruncatedLaw>(law_);
  return {t.mu, t.sigma, t.lo, t.hi};
}

std::string ValueDistribution::describe() const
{
  std::ostringstream os;
  os << to_string(family()) << '(';
  auto const p = params();
  for (std::size_t i = 0; i < p.size(); ++i)
  {
    os << (i ? ", " : "") << p[i];
  }
  os << ')';
  return os.str();
}

double ValueDistribution::cdf(double v) const
{
  if (v <= lower_)
  {
    return 0.0;
  }
  if (v >= upper_)
  {
    return 1.0;
  }
  if (auto const *u = std::get_if<detail::UniformLaw>(&law_))
  {
    return (v - u->lo) / (u->hi - u->lo);
  }
  if (auto const *p = std::get_if<detail::PowerLaw>(&law_))
  {
    return std::pow(v, p->k);
  }
  auto const &t = std::get<detail::TruncatedLaw>(law_);
  return std::clamp(t.cdf_z(t.to_z(v)), 0.0, 1.0);
}

double ValueDistribution::survival(double v) const
{
  if (v <= lower_)
  {
    return 1.0;
  }
  if (v >= upper_)
  {
    return 0.0;
  }
  if (auto const *t = std::get_if<detail::TruncatedLaw>(&law_))
  {
    return std::clamp(t->sf_z(t->to_z(v)), 0.0, 1.0);
  }
  return 1.0 - cdf(v);
}

double ValueDistribution::pdf(double v) const
{
  if (v < lower_ || v > upper_)
  {
    return 0.0;
  }
  if (auto const *u = std::get_if<detail::UniformLaw>(&law_))
  {
    return 1.0 / (u->hi - u->lo);
  }
  if (auto const *p = std::get_if<detail::PowerLaw>(&law_))
  {
    return p->k * std::pow(v, p->k - 1.0);
  }
  auto const &t     = std::get<detail::TruncatedLaw>(law_);
  double const z    = t.to_z(v);
  double const jac  = t.log_scale ? t.sigma * v : t.sigma;
  return detail::norm_pdf(z) / (t.mass * jac);
}

double ValueDistribution::quantile(double p) const
{
  if (p <= 0.0)
  {
    return lower_;
  }
  if (p >= 1.0)
  {
    return upper_;
  }
  if (auto const *u = std::get_if<detail::UniformLaw>(&law_))
  {
    return u->lo + p * (u->hi - u->lo);
  }
  if (auto const *pw = std::get_if<detail::PowerLaw>(&law_))
  {
    return std::pow(p, 1.0 / pw->k);
  }
  auto const &t     = std::get<detail::TruncatedLaw>(law_);
  double const left = t.cdf_lo + p * t.mass;
  double z          = left <= 0.5 ? detail::norm_quantile(left)
                                  : detail::norm_isf(t.sf_hi + (1.0 - p) * t.mass);
  z = std::clamp(z, t.z_lo, t.z_hi);
  return std::clamp(t.from_z(z), lower_, upper_);
}

double ValueDistribution::order_stat_cdf(int m, double v) const
{
  if (m <= 0)
  {
    return 1.0;
  }
  return detail::ipow(cdf(v), m);
}

double ValueDistribution::partial_expectation(int m, double a, double b) const
{
  a = std::clamp(a, lower_, upper_);
  b = std::clamp(b, lower_, upper_);
  if (m <= 0 || !(b > a))
  {
    return 0.0;
  }
  if (auto const *u = std::get_if<detail::UniformLaw>(&law_))
  {
    double const w  = u->hi - u->lo;
    double const pa = (a - u->lo) / w;
    double const pb = (b - u->lo) / w;
    double const am = detail::ipow(pa, m);
    double const bm = detail::ipow(pb, m);
    return u->lo * (bm - am) + w * m / (m + 1.0) * (bm * pb - am * pa);
  }
  if (auto const *p = std::get_if<detail::PowerLaw>(&law_))
  {
    double const e = p->k * m;
    return e / (e + 1.0) * (std::pow(b, e + 1.0) - std::pow(a, e + 1.0));
  }
  return integrate_dF(a, b, [m](double x, double u) { return x * m * detail::ipow(u, m - 1); });
}

double ValueDistribution::virtual_value(double v) const
{
  double const sf = survival(v);
  if (sf <= 0.0)
  {
    return v;
  }
  double const f = pdf(v);
  if (!(f >= 1e-12))
  {
    throw DegenerateDensityError("density below 1e-12 at v = " + std::to_string(v));
  }
  return v - sf / f;
}

}  // namespace recauction
