#include "recauction/outcomes.hpp"

#include <boost/math/tools/toms748_solve.hpp>

#include <cmath>
#include <cstdint>
#include <ostream>

#include "recauction/io.hpp"

namespace recauction {

namespace {

using detail::ipow;

/// psi, taking the limit v where both density and survival vanish.
double safe_virtual_value(ValueDistribution const &d, double v)
{
  if (!(d.pdf(v) >= 1e-12))
  {
    return d.survival(v) < 1e-12 ? v : -HUGE_VAL;
  }
  return d.virtual_value(v);
}

/// Root of an increasing function on [a, b]; returns the edge when f keeps
/// one sign.
template <class F>
double increasing_root(F &&f, double a, double b, double tol = 1e-13)
{
  double const fa = f(a);
  if (fa >= 0.0)
  {
    return a;
  }
  double const fb = f(b);
  if (fb <= 0.0)
  {
    return b;
  }
  std::uintmax_t it = 300;
  auto const     br = boost::math::tools::toms748_solve(
      f, a, b, fa, fb, [tol](double x, double y) { return std::fabs(y - x) <= tol * std::max(1.0, std::fabs(y)); }, it);
  return 0.5 * (br.first + br.second);
}

}  // namespace

bool virtual_value_increasing(ValueDistribution const &d, double a, double b, int points)
{
  double const pa   = d.cdf(a);
  double const pb   = d.cdf(b);
  double       prev = -HUGE_VAL;
  for (int i = 0; i < points; ++i)
  {
    double const v = d.quantile(pa + (pb - pa) * i / std::max(points - 1, 1));
    if (!(d.pdf(v) >= 1e-12))
    {
      continue;
    }
    double const psi = d.virtual_value(v);
    if (psi < prev - 1e-9 * std::max(1.0, std::fabs(prev)))
    {
      return false;
    }
    prev = std::max(prev, psi);
  }
  return true;
}

double expected_surplus(ThresholdSequence const &thr, AuctionPrimitives const &p)
{
  auto const &d  = p.dist;
  double      ts = 0.0;
  for (int t = 1; t <= thr.T(); ++t)
  {
    double const a  = thr[t];
    double const b  = thr[t - 1];
    double const Fa = d.cdf(a);
    double const Fb = d.cdf(b);
    double const alloc =
        d.partial_expectation(p.N, a, b) - p.v_s * (ipow(Fb, p.N) - ipow(Fa, p.N));
    double const cost = p.N * ipow(Fb, p.N - 1) * (Fb - Fa) * p.K;
    ts += p.discount(t) * (alloc - cost);
  }
  return ts + p.v_s;
}

double expected_revenue(ThresholdSequence const &thr, AuctionPrimitives const &p)
{
  auto const  &d = p.dist;
  int const    T = thr.T();
  int const    N = p.N;
  double const m = N - 1;
  double       R = 0.0;
  for (int t = 1; t <= T; ++t)
  {
    double const a  = thr[t];
    double const b  = thr[t - 1];
    double const Fa = d.cdf(a);
    double const Fb = d.cdf(b);
    double info     = 0.0;
    if (N >= 2)
    {
      info = d.integrate_dF(a, b, [&](double x, double u) {
        return x * (1.0 - u) * m * ipow(u, N - 2);
      });
    }
    R += p.discount(t) * (N * info + N * (1.0 - p.delta) * d.survival(a) * p.G(a) * a -
                          N * p.G(b) * (Fb - Fa) * p.K - p.v_s * (ipow(Fb, N) - ipow(Fa, N)));
  }
  double const vT = thr[T];
  R += std::pow(p.delta, T) * N * d.survival(vT) * p.G(vT) * vT;
  return R;
}

double expected_revenue_given_reserves(ThresholdSequence const &thr, AuctionPrimitives const &p)
{
  auto const &d = p.dist;
  int const   N = p.N;
  double      R = 0.0;
  for (int t = 1; t <= thr.T(); ++t)
  {
    double const a  = thr[t];
    double const b  = thr[t - 1];
    double const Fa = d.cdf(a);
    double const Fb = d.cdf(b);
    double       second = 0.0;
    if (N >= 2)
    {
      second = d.integrate_dF(a, b, [&](double x, double u) {
        return N * (N - 1.0) * (x - p.v_s) * (Fb - u) * ipow(u, N - 2);
      });
    }
    double const single = N * (Fb - Fa) * ipow(Fa, N - 1) * (p.reserve(t) - p.v_s);
    R += p.discount(t) * (second + single);
  }
  return R;
}

double failure_probability(ThresholdSequence const &thr, AuctionPrimitives const &p)
{
  return ipow(p.dist.cdf(thr[thr.T()]), p.N);
}

std::vector<double> sale_probabilities(ThresholdSequence const &thr, AuctionPrimitives const &p)
{
  std::vector<double> out(static_cast<std::size_t>(thr.T()));
  for (int t = 1; t <= thr.T(); ++t)
  {
    out[t - 1] = ipow(p.dist.cdf(thr[t - 1]), p.N) - ipow(p.dist.cdf(thr[t]), p.N);
  }
  return out;
}

std::vector<double> expected_entrants(ThresholdSequence const &thr, AuctionPrimitives const &p)
{
  std::vector<double> out(static_cast<std::size_t>(thr.T()));
  for (int t = 1; t <= thr.T(); ++t)
  {
    double const Fb = p.dist.cdf(thr[t - 1]);
    double const Fa = p.dist.cdf(thr[t]);
    out[t - 1]      = p.N * ipow(Fb, p.N - 1) * (Fb - Fa);
  }
  return out;
}

double expected_buyer_rents(ThresholdSequence const &thr, AuctionPrimitives const &p)
{
  // Each type in (v_t, v_{t-1}] earns Pi_t(v); integrate over F and sum buyers.
  double total = 0.0;
  for (int t = 1; t <= thr.T(); ++t)
  {
    if (thr.skipped(t))
    {
      continue;
    }
    total += p.dist.integrate_dF(thr[t], thr[t - 1], [&](double x, double) {
      return interim_payoff(x, t, thr, p);
    }, 1e-11);
  }
  return p.N * total;
}

OutcomeSummary summarize(ThresholdSequence const &thr, AuctionPrimitives const &p)
{
  OutcomeSummary s;
  s.total_surplus               = expected_surplus(thr, p);
  s.revenue                     = expected_revenue_given_reserves(thr, p);
  s.failure_probability         = failure_probability(thr, p);
  s.per_round_sale_probability  = sale_probabilities(thr, p);
  s.expected_entrants_per_round = expected_entrants(thr, p);
  return s;
}

double single_round_cutoff(AuctionPrimitives const &p, double r)
{
  double const lo = std::min(std::max(r, p.dist.lower()), p.dist.upper());
  return increasing_root([&](double v) { return (v - r) * p.G(v) - p.K; }, lo, p.dist.upper());
}

SingleRoundEfficient single_round_efficient(AuctionPrimitives const &p)
{
  double const      c   = single_round_cutoff(p, p.v_s);
  AuctionPrimitives one = p.with_reserves({p.v_s});
  ThresholdSequence thr{{p.dist.upper(), c}};
  return {c, expected_surplus(thr, one)};
}

SingleRoundRevenue single_round_revenue_optimal(AuctionPrimitives const &p)
{
  auto const  &d  = p.dist;
  double const hi = d.upper();
  auto         foc = [&](double v) {
    double const G = p.G(v);
    return G > 0.0 ? safe_virtual_value(d, v) - p.v_s - p.K / G : -HUGE_VAL;
  };
  // top-down scan on a quantile grid for the highest sign change
  int const M     = 512;
  double    upper = hi;
  double    fu    = foc(hi);
  double    lower = d.lower();
  bool      found = false;
  for (int i = M - 2; i >= 0; --i)
  {
    double const v  = d.quantile(static_cast<double>(i) / (M - 1));
    double const fv = foc(v);
    if (fv <= 0.0 && fu > 0.0)
    {
      lower = v;
      found = true;
      break;
    }
    upper = v;
    fu    = fv;
  }
  double c = hi;
  if (found)
  {
    if (!virtual_value_increasing(d, lower, hi))
    {
      throw NonRegularError("virtual value not increasing above the candidate cutoff");
    }
    c = increasing_root(foc, lower, upper);
  }
  double const      G   = p.G(c);
  double const      r   = G > 0.0 ? c - p.K / G : hi;
  AuctionPrimitives one = p.with_reserves({r});
  ThresholdSequence thr{{hi, c}};
  return {c, r, expected_revenue(thr, one)};
}

double always_enter_partner_cutoff(ValueDistribution const &d, double K)
{
  return increasing_root(
      [&](double c) { return c * d.cdf(c) - d.partial_expectation(1, d.lower(), c) - K; },
      d.lower(), d.upper());
}

DuopolyOutcome asymmetric_duopoly_single_round(AuctionPrimitives const &p, double c1, double c2)
{
  if (p.N != 2)
  {
    throw std::invalid_argument("asymmetric duopoly requires N = 2");
  }
  if (c1 > c2)
  {
    std::swap(c1, c2);
  }
  auto const  &d  = p.dist;
  double const F2 = d.cdf(c2);
  // winner law: density F(c2) f on (c1, c2], 2 F f on (c2, v_hi]
  auto expect = [&](auto &&h) {
    return F2 * d.integrate_dF(c1, c2, [&](double x, double) { return h(x); }) +
           d.integrate_dF(c2, d.upper(), [&](double x, double u) { return 2.0 * u * h(x); });
  };
  double const entrants = d.survival(c1) + d.survival(c2);
  double const surplus  = expect([&](double x) { return x - p.v_s; }) + p.v_s - p.K * entrants;
  double const revenue  = expect([&](double x) { return safe_virtual_value(d, x) - p.v_s; }) -
                         p.K * entrants;
  return {surplus, revenue, entrants};
}

std::string summary_csv_header()
{
  return "total_surplus,revenue,failure_probability,sale_probabilities,expected_entrants";
}

std::string summary_csv_row(OutcomeSummary const &s)
{
  return fmt6(s.total_surplus) + ',' + fmt6(s.revenue) + ',' + fmt6(s.failure_probability) + ',' +
         join6(s.per_round_sale_probability, ';') + ',' + join6(s.expected_entrants_per_round, ';');
}

}  // namespace recauction
