#include "recauction/design.hpp"

#include <boost/math/tools/toms748_solve.hpp>
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "recauction/io.hpp"

namespace recauction {

std::string to_string(Objective o) { return o == Objective::Efficiency ? "efficiency" : "revenue"; }

Objective parse_objective(std::string const &s)
{
  if (s == "efficiency")
  {
    return Objective::Efficiency;
  }
  if (s == "revenue")
  {
    return Objective::Revenue;
  }
  throw std::invalid_argument("unknown objective '" + s + "' (expected efficiency or revenue)");
}

namespace {

using detail::ipow;

double allocation_value(Objective o, ValueDistribution const &d, double v)
{
  if (o == Objective::Efficiency)
  {
    return v;
  }
  if (!(d.pdf(v) >= 1e-12) && d.survival(v) < 1e-12)
  {
    return v;
  }
  return d.virtual_value(v);
}

struct Unrolled
{
  std::vector<double> v;
  double              residual = 0.0;
  bool                feasible = true;
};

/// Thresholds implied by a guess for v_1; each t < T condition is linear in
/// F(v_{t+1}). Infeasible steps return a unit residual with the sign the
/// terminal condition would take.
Unrolled unroll(Objective o, AuctionPrimitives const &p, double v1)
{
  auto const &d = p.dist;
  int const   T = p.T;
  Unrolled    u;
  u.v.assign(static_cast<std::size_t>(T) + 1, d.upper());
  std::vector<double> F(static_cast<std::size_t>(T) + 1, 1.0);
  u.v[1] = v1;
  F[1]   = d.cdf(v1);
  if (!(F[1] > 0.0))
  {
    u.feasible = false;
    u.residual = 1.0;
    return u;
  }
  double const denom = p.delta * (p.N - 1) * p.K;
  for (int t = 1; t < T; ++t)
  {
    double const val   = allocation_value(o, d, u.v[t]);
    double const ratio = ipow(F[t - 1] / F[t], p.N - 1);
    double const next  = F[t] / denom *
                        ((1.0 - p.delta) * (val - p.v_s) - ratio * p.K + p.delta * p.N * p.K);
    if (!(next > 0.0))
    {
      u.feasible = false;
      u.residual = 1.0;
      return u;
    }
    if (next > F[t])
    {
      u.feasible = false;
      u.residual = -1.0;
      return u;
    }
    F[t + 1]   = next;
    u.v[t + 1] = d.quantile(next);
  }
  u.residual = ipow(F[T - 1] / F[T], p.N - 1) * p.K - (allocation_value(o, d, u.v[T]) - p.v_s);
  return u;
}

/// One buyer: every period has the same condition, so the period-1 cutoff is
/// repeated and later periods carry no entry.
ThresholdSequence single_buyer_design(Objective o, AuctionPrimitives const &p)
{
  auto const  &d  = p.dist;
  double const lo = d.lower();
  double const hi = d.upper();
  auto         f  = [&](double v) { return allocation_value(o, d, v) - p.v_s - p.K; };
  double       c;
  if (f(lo) >= 0.0)
  {
    c = lo;
  }
  else if (f(hi) <= 0.0)
  {
    c = hi;
  }
  else
  {
    std::uintmax_t it = 300;
    auto const     br = boost::math::tools::toms748_solve(
        f, lo, hi, [](double a, double b) { return std::fabs(b - a) <= 1e-13 * std::max(1.0, std::fabs(b)); }, it);
    c = 0.5 * (br.first + br.second);
  }
  ThresholdSequence thr{std::vector<double>(static_cast<std::size_t>(p.T) + 1, c)};
  thr.v[0] = hi;
  return thr;
}

DesignResult finish(Objective o, AuctionPrimitives const &p, ThresholdSequence thr)
{
  DesignResult r;
  r.objective       = o;
  r.thresholds      = std::move(thr);
  r.reserves        = reserves_from_thresholds(r.thresholds, p);
  r.objective_value = design_objective(o, r.thresholds, p);
  r.foc_residuals   = foc_residuals(o, r.thresholds, p);
  if (o == Objective::Revenue)
  {
    r.regular = virtual_value_increasing(p.dist, r.thresholds[p.T], p.dist.upper());
  }
  return r;
}

}  // namespace

double foc_residual(Objective o, ThresholdSequence const &thr, AuctionPrimitives const &p, int t)
{
  auto const  &d    = p.dist;
  int const    T    = thr.T();
  double const Fp   = d.cdf(thr[t - 1]);
  double const Ft   = d.cdf(thr[t]);
  double const val  = allocation_value(o, d, thr[t]);
  double const grow = ipow(Fp / Ft, p.N - 1);
  if (t == T)
  {
    return grow * p.K - (val - p.v_s);
  }
  double const Fn = d.cdf(thr[t + 1]);
  return (grow - p.delta * (p.N * Ft - (p.N - 1) * Fn) / Ft) * p.K - (1.0 - p.delta) * (val - p.v_s);
}

std::vector<double> foc_residuals(Objective o, ThresholdSequence const &thr,
                                  AuctionPrimitives const &p)
{
  std::vector<double> out(static_cast<std::size_t>(thr.T()));
  for (int t = 1; t <= thr.T(); ++t)
  {
    out[t - 1] = foc_residual(o, thr, p, t);
  }
  return out;
}

double design_objective(Objective o, ThresholdSequence const &thr, AuctionPrimitives const &p)
{
  return o == Objective::Efficiency ? expected_surplus(thr, p) : expected_revenue(thr, p);
}

DesignResult optimal_design(Objective o, AuctionPrimitives const &p, DesignOptions const &opts)
{
  AuctionPrimitives q = p.with_horizon(p.T);
  q.validate();
  if (!(q.K > 0.0))
  {
    throw std::invalid_argument("design requires K > 0");
  }
  if (q.N == 1)
  {
    return finish(o, q, single_buyer_design(o, q));
  }

  auto const &d = q.dist;
  int const   M = std::max(opts.grid_points, 3);
  std::vector<double> grid(static_cast<std::size_t>(M));
  std::vector<double> res(static_cast<std::size_t>(M));
  for (int i = 0; i < M; ++i)
  {
    grid[i] = i == 0 ? d.lower() : (i == M - 1 ? d.upper() : d.quantile(double(i) / (M - 1)));
    res[i]  = unroll(o, q, grid[i]).residual;
  }

  auto resid = [&](double x) { return unroll(o, q, x).residual; };
  auto tol   = [&](double a, double b) { return std::fabs(b - a) <= opts.tol * std::max(1.0, std::fabs(b)); };

  std::vector<DesignResult> found;
  double                    worst = 0.0;
  for (int i = 0; i + 1 < M; ++i)
  {
    double const fa = res[i];
    double const fb = res[i + 1];
    if (!(fa * fb <= 0.0) || (fb == 0.0 && i + 2 < M))
    {
      continue;
    }
    double root = fa == 0.0 ? grid[i] : grid[i + 1];
    if (fa != 0.0 && fb != 0.0)
    {
      std::uintmax_t it = 300;
      auto const     br = boost::math::tools::toms748_solve(resid, grid[i], grid[i + 1], fa, fb, tol, it);
      root              = std::fabs(resid(br.first)) <= std::fabs(resid(br.second)) ? br.first : br.second;
    }
    auto const u = unroll(o, q, root);
    if (!u.feasible)
    {
      continue;
    }
    DesignResult r = finish(o, q, ThresholdSequence{u.v});
    double       mx = 0.0;
    for (double e : r.foc_residuals)
    {
      mx = std::max(mx, std::fabs(e));
    }
    worst = std::max(worst, mx);
    if (mx < 1e-8)
    {
      found.push_back(std::move(r));
    }
  }
  if (found.empty())
  {
    std::ostringstream os;
    os << "design first-order system not bracketed: objective=" << to_string(o)
       << " dist=" << d.describe() << " N=" << q.N << " T=" << q.T << " K=" << q.K
       << " delta=" << q.delta << " worst residual among candidates=" << worst;
    throw SolverError(os.str());
  }
  auto best = std::max_element(found.begin(), found.end(), [](auto const &a, auto const &b) {
    return a.objective_value < b.objective_value;
  });
  best->candidates = static_cast<int>(found.size());
  return *best;
}

std::vector<TradeoffRow> design_tradeoff_report(AuctionPrimitives const &p,
                                                ThresholdSequence const &thr, Objective o)
{
  auto const              &d = p.dist;
  std::vector<TradeoffRow> rows;
  for (int t = 1; t < thr.T(); ++t)
  {
    double const Fp  = d.cdf(thr[t - 1]);
    double const Ft  = d.cdf(thr[t]);
    double const Fn  = d.cdf(thr[t + 1]);
    double const rho = ipow(Ft / Fp, p.N - 1);
    TradeoffRow  row{};
    row.t                       = t;
    row.entry_cost_saving       = (1.0 - p.delta * rho) * p.K;
    row.delayed_allocation_loss = (1.0 - p.delta) * rho * (allocation_value(o, d, thr[t]) - p.v_s);
    row.next_entry_loss         = p.delta * rho * (p.N - 1) * (Ft - Fn) / Ft * p.K;
    rows.push_back(row);
  }
  return rows;
}

PerturbationReport perturbation_check(DesignResult const &res, AuctionPrimitives const &p,
                                      double eps)
{
  auto const        &thr  = res.thresholds;
  double const       base = design_objective(res.objective, thr, p);
  PerturbationReport rep;
  for (int t = 1; t <= thr.T(); ++t)
  {
    for (double s : {-1.0, 1.0})
    {
      ThresholdSequence q = thr;
      q.v[t] = std::clamp(q.v[t] + s * eps, p.dist.lower(), p.dist.upper());
      for (int k = t + 1; k <= q.T(); ++k)
      {
        q.v[k] = std::min(q.v[k], q.v[k - 1]);
      }
      for (int k = t - 1; k >= 1; --k)
      {
        q.v[k] = std::max(q.v[k], q.v[k + 1]);
      }
      double const gain = design_objective(res.objective, q, p) - base;
      ++rep.probes;
      if (gain > rep.max_gain || rep.probes == 1)
      {
        rep.max_gain = gain;
        rep.worst_t  = t;
      }
    }
  }
  return rep;
}

std::string design_to_json(DesignResult const &res, AuctionPrimitives const &p)
{
  nlohmann::ordered_json j;
  j["objective"]       = to_string(res.objective);
  j["distribution"]    = p.dist.describe();
  j["N"]               = p.N;
  j["T"]               = p.T;
  j["K"]               = p.K;
  j["delta"]           = p.delta;
  j["v_s"]             = p.v_s;
  j["thresholds"]      = res.thresholds.v;
  j["reserves"]        = res.reserves;
  j["objective_value"] = res.objective_value;
  j["foc_residuals"]   = res.foc_residuals;
  j["regular"]         = res.regular;
  return j.dump(2);
}

std::string design_csv_header(int T)
{
  std::string h = "objective,N,T,K,delta,objective_value";
  for (int t = 1; t <= T; ++t)
  {
    h += ",v" + std::to_string(t);
  }
  for (int t = 1; t <= T; ++t)
  {
    h += ",r" + std::to_string(t) + "_fraction";
  }
  return h;
}

std::string design_csv_row(DesignResult const &res, AuctionPrimitives const &p, double reference)
{
  std::string row = to_string(res.objective) + ',' + std::to_string(p.N) + ',' +
                    std::to_string(p.T) + ',' + fmt6(p.K) + ',' + fmt6(p.delta) + ',' +
                    fmt6(res.objective_value);
  for (int t = 1; t <= res.thresholds.T(); ++t)
  {
    row += ',' + fmt6(res.thresholds[t]);
  }
  for (double r : res.reserves)
  {
    row += ',' + fmt6(r / reference);
  }
  return row;
}

}  // namespace recauction
