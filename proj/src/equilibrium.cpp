#include "recauction/equilibrium.hpp"

#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>

namespace recauction {

void AuctionPrimitives::validate() const
{
  if (N < 1)
  {
    throw std::invalid_argument("N must be >= 1");
  }
  if (T < 1)
  {
    throw std::invalid_argument("T must be >= 1");
  }
  if (!(delta > 0.0 && delta < 1.0))
  {
    throw std::invalid_argument("delta must lie in (0, 1)");
  }
  if (!(K >= 0.0) || !std::isfinite(K))
  {
    throw std::invalid_argument("K must be finite and non-negative");
  }
  if (!(v_s < dist.upper() - K))
  {
    throw std::invalid_argument("v_s must be below v_bar - K");
  }
  if (static_cast<int>(reserves.size()) != T)
  {
    throw std::invalid_argument("reserve sequence length must equal T");
  }
  for (double r : reserves)
  {
    if (!std::isfinite(r))
    {
      throw std::invalid_argument("reserves must be finite");
    }
  }
}

double AuctionPrimitives::g(double v) const
{
  if (N < 2)
  {
    return 0.0;
  }
  return (N - 1) * detail::ipow(dist.cdf(v), N - 2) * dist.pdf(v);
}

double AuctionPrimitives::discount(int t) const { return std::pow(delta, t - 1); }

AuctionPrimitives AuctionPrimitives::with_horizon(int T_new) const
{
  AuctionPrimitives q = *this;
  q.T                 = T_new;
  double const pad    = reserves.empty() ? v_s : reserves.back();
  q.reserves.resize(static_cast<std::size_t>(std::max(T_new, 0)), pad);
  return q;
}

AuctionPrimitives AuctionPrimitives::with_reserves(std::vector<double> r) const
{
  AuctionPrimitives q = *this;
  q.reserves          = std::move(r);
  q.T                 = static_cast<int>(q.reserves.size());
  return q;
}

void ThresholdSequence::validate(double lo, double hi) const
{
  if (v.size() < 2)
  {
    throw std::invalid_argument("threshold sequence needs v_0 and at least one cutoff");
  }
  if (v.front() != hi)
  {
    throw std::invalid_argument("v_0 must equal the upper support bound");
  }
  for (std::size_t t = 1; t < v.size(); ++t)
  {
    if (v[t] > v[t - 1] || v[t] < lo)
    {
      throw std::invalid_argument("thresholds must be weakly decreasing inside the support");
    }
  }
}

ThresholdSequence ThresholdSequence::no_entry(int T, double hi)
{
  return ThresholdSequence{std::vector<double>(static_cast<std::size_t>(T) + 1, hi)};
}

double interim_payoff(double v, int t, ThresholdSequence const &thr, AuctionPrimitives const &p)
{
  if (t < 1 || t > thr.T())
  {
    throw std::out_of_range("round index out of range");
  }
  double const lo   = thr[t];
  double const prev = thr[t - 1];
  double const top  = std::min(std::max(v, lo), prev);
  double const Gp   = p.G(prev);
  double const Gt   = p.G(lo);
  double const Gtop = p.G(top);
  double const inner =
      v * (Gtop - Gt) - p.dist.partial_expectation(p.N - 1, lo, top);
  return p.discount(t) * (inner + (v - p.reserve(t)) * Gt - Gp * p.K);
}

EquilibriumCheck check_equilibrium(ThresholdSequence const &thr, AuctionPrimitives const &p,
                                   double tol)
{
  int const        T = thr.T();
  EquilibriumCheck c;
  c.residuals.assign(T, 0.0);
  c.deviation.assign(T, 0.0);
  for (int t = 1; t <= T; ++t)
  {
    double const vt   = thr[t];
    double const here = interim_payoff(vt, t, thr, p);
    double       best = 0.0;
    for (int tau = t + 1; tau <= T; ++tau)
    {
      best = std::max(best, interim_payoff(vt, tau, thr, p));
    }
    double const scale = p.discount(t);
    c.deviation[t - 1] = (best - here) / scale;
    if (thr.skipped(t))
    {
      if (here - best > tol * scale)
      {
        c.definition_holds = false;
      }
      continue;
    }
    int next = t + 1;
    while (next <= T && thr.skipped(next))
    {
      ++next;
    }
    double const cont  = next <= T ? interim_payoff(vt, next, thr, p) : 0.0;
    c.residuals[t - 1] = (here - cont) / scale;
    c.max_residual     = std::max(c.max_residual, std::fabs(c.residuals[t - 1]));
    if (best - here > tol * scale)
    {
      c.definition_holds = false;
    }
  }
  return c;
}

namespace {

/// Forward shooting on the indifference system. A guess for the first
/// active cutoff is unrolled period by period; the final marginal type's
/// payoff is the residual.
class Shooter
{
public:
  explicit Shooter(AuctionPrimitives const &p)
    : p_(p)
    , lo_(p.dist.lower())
    , hi_(p.dist.upper())
    , m_(p.N - 1)
  {
    disc_.resize(static_cast<std::size_t>(p.T) + 2);
    for (int t = 1; t <= p.T + 1; ++t)
    {
      disc_[t] = p.discount(t);
    }
  }

  struct Trace
  {
    std::vector<double> v;
    double              residual = 0.0;
    bool                clamped  = false;
  };

  Trace run(int start, double guess) const
  {
    ++evaluations;
    Trace tr;
    tr.v.assign(static_cast<std::size_t>(p_.T) + 1, hi_);
    tr.v[start]  = guess;
    double act   = guess;
    double P     = disc_[start] * ((guess - p_.reserve(start)) * p_.G(guess) - p_.G(hi_) * p_.K);
    int    last  = start;
    for (int tau = start + 1; tau <= p_.T; ++tau)
    {
      double const d    = disc_[tau];
      double const r    = p_.reserve(tau);
      double const Gp   = p_.G(act);
      double const top  = act;
      double const low  = std::min(std::max(r, lo_), top);
      double const payh = d * ((act - r) * Gp - Gp * p_.K);
      if (P >= payh)
      {
        tr.v[tau] = act;
        continue;
      }
      double const pe_low = p_.dist.partial_expectation(m_, low, top);
      double const payl   = d * (act * Gp - pe_low - r * p_.G(low) - Gp * p_.K);
      double       w;
      if (P < payl)
      {
        w          = low;
        tr.clamped = true;
      }
      else
      {
        w = inner(P, d, r, act, Gp, low, top);
      }
      P         = d * ((w - r) * p_.G(w) - Gp * p_.K);
      act       = w;
      last      = tau;
      tr.v[tau] = w;
    }
    tr.residual = P / disc_[last];
    return tr;
  }

  double residual(int start, double guess) const { return run(start, guess).residual; }

  mutable long evaluations = 0;

private:
  /// Solve pay(w) = P on [a, b] where pay is increasing. Safeguarded Newton;
  /// partial expectations are accumulated from the previous iterate so each
  /// step integrates only a short interval.
  double inner(double P, double d, double r, double act, double Gp, double a, double b) const
  {
    double anchor = b;
    double pe     = 0.0;  // PE(anchor, top)
    auto   h      = [&](double w) {
      if (w < anchor)
      {
        pe += p_.dist.partial_expectation(m_, w, anchor);
      }
      else if (w > anchor)
      {
        pe -= p_.dist.partial_expectation(m_, anchor, w);
      }
      anchor = w;
      return d * (act * Gp - pe - r * p_.G(w) - Gp * p_.K) - P;
    };
    double w  = b;
    double hw = h(w);
    for (int it = 0; it < 200; ++it)
    {
      if (hw == 0.0)
      {
        return w;
      }
      (hw > 0.0 ? b : a) = w;
      double const slope = d * (w - r) * p_.g(w);
      double       next  = slope > 0.0 ? w - hw / slope : 0.5 * (a + b);
      if (!(next > a && next < b))
      {
        next = 0.5 * (a + b);
      }
      double const step = std::fabs(next - w);
      w                 = next;
      hw                = h(w);
      if (step <= 1e-15 * std::max(1.0, std::fabs(w)) || b - a <= 1e-15 * std::max(1.0, b))
      {
        break;
      }
    }
    return w;
  }

  AuctionPrimitives const &p_;
  double                   lo_;
  double                   hi_;
  int                      m_;
  std::vector<double>      disc_;
};

/// Single potential buyer: entry time is a pure timing choice between lines
/// delta^(t-1)(v - r_t - K), so cutoffs follow from envelope crossings.
ThresholdSequence solve_single_buyer(AuctionPrimitives const &p)
{
  double const lo = p.dist.lower();
  double const hi = p.dist.upper();
  auto         line = [&](int t, double v) {
    return t > p.T ? 0.0 : p.discount(t) * (v - p.reserve(t) - p.K);
  };
  ThresholdSequence thr{std::vector<double>(static_cast<std::size_t>(p.T) + 1, hi)};
  for (int t = 1; t <= p.T; ++t)
  {
    auto gap = [&](double v) {
      double early = -HUGE_VAL;
      double late  = -HUGE_VAL;
      for (int s = 1; s <= t; ++s)
      {
        early = std::max(early, line(s, v));
      }
      for (int s = t + 1; s <= p.T + 1; ++s)
      {
        late = std::max(late, line(s, v));
      }
      return early - late;
    };
    double cut;
    if (gap(lo) >= 0.0)
    {
      cut = lo;
    }
    else if (gap(hi) <= 0.0)
    {
      cut = hi;
    }
    else
    {
      std::uintmax_t it = 200;
      auto const     br = boost::math::tools::toms748_solve(
          gap, lo, hi, [](double a, double b) { return std::fabs(b - a) <= 1e-13 * std::max(1.0, std::fabs(b)); }, it);
      cut = 0.5 * (br.first + br.second);
    }
    thr.v[t] = std::min(cut, thr.v[t - 1]);
  }
  return thr;
}

std::string describe_failure(AuctionPrimitives const &p, std::vector<double> const &grid,
                             std::vector<double> const &res, int rejected)
{
  std::ostringstream os;
  os << "shooting residual not bracketed: dist=" << p.dist.describe() << " N=" << p.N
     << " T=" << p.T << " K=" << p.K << " delta=" << p.delta << " r=(";
  for (std::size_t i = 0; i < p.reserves.size(); ++i)
  {
    os << (i ? "," : "") << p.reserves[i];
  }
  os << ")";
  if (!res.empty())
  {
    auto mm = std::minmax_element(res.begin(), res.end());
    os << " residual range [" << *mm.first << ", " << *mm.second << "] over " << grid.size()
       << " grid points";
  }
  os << " rejected candidates=" << rejected;
  return os.str();
}

}  // namespace

EquilibriumResult solve_equilibrium(AuctionPrimitives const &p, EquilibriumOptions const &opts)
{
  p.validate();
  double const      lo = p.dist.lower();
  double const      hi = p.dist.upper();
  EquilibriumResult out;

  bool profitable = false;
  for (int t = 1; t <= p.T; ++t)
  {
    profitable = profitable || (hi - p.reserve(t) - p.K > 0.0);
  }
  if (!profitable)
  {
    out.thresholds = ThresholdSequence::no_entry(p.T, hi);
    out.no_entry   = true;
    out.check      = check_equilibrium(out.thresholds, p, opts.residual_tol);
    return out;
  }

  if (p.N == 1)
  {
    out.thresholds = solve_single_buyer(p);
    out.check      = check_equilibrium(out.thresholds, p, opts.residual_tol);
    out.candidates = {out.thresholds[1]};
    return out;
  }

  int const           M = std::max(opts.grid_points, 3);
  std::vector<double> grid(static_cast<std::size_t>(M));
  for (int i = 0; i < M; ++i)
  {
    grid[i] = p.dist.quantile(static_cast<double>(i) / (M - 1));
  }
  grid.front() = lo;
  grid.back()  = hi;

  Shooter shoot(p);
  auto    tol = [&](double a, double b) { return std::fabs(b - a) <= opts.tol; };

  std::vector<double> last_res;
  int                 rejected = 0;
  for (int start = 1; start <= p.T; ++start)
  {
    std::vector<double> res(static_cast<std::size_t>(M), 0.0);
    std::vector<ThresholdSequence> found;

    auto accept = [&](double a, double fa, double b, double fb) {
      double root = a;
      if (fa != 0.0 && fb != 0.0)
      {
        std::uintmax_t it = 200;
        auto const     br = boost::math::tools::toms748_solve(
            [&](double x) { return shoot.residual(start, x); }, a, b, fa, fb, tol, it);
        double const ra = shoot.residual(start, br.first);
        double const rb = shoot.residual(start, br.second);
        root            = std::fabs(ra) <= std::fabs(rb) ? br.first : br.second;
      }
      else if (fb == 0.0)
      {
        root = b;
      }
      auto const tr = shoot.run(start, root);
      if (tr.clamped)
      {
        ++rejected;
        return false;
      }
      ThresholdSequence thr{tr.v};
      auto const        chk = check_equilibrium(thr, p, opts.residual_tol);
      if (!(chk.max_residual < opts.residual_tol))
      {
        ++rejected;
        return false;
      }
      if (found.empty())
      {
        out.check = chk;
      }
      found.push_back(thr);
      out.candidates.push_back(root);
      return true;
    };

    res[M - 1] = shoot.residual(start, grid[M - 1]);
    for (int i = M - 2; i >= 0; --i)
    {
      res[i] = shoot.residual(start, grid[i]);
      bool const change = (res[i] <= 0.0 && res[i + 1] >= 0.0) || (res[i] >= 0.0 && res[i + 1] <= 0.0);
      if (!change || (res[i + 1] == 0.0 && i + 1 < M - 1 && !found.empty() &&
                      out.candidates.back() == grid[i + 1]))
      {
        continue;
      }
      if (accept(grid[i], res[i], grid[i + 1], res[i + 1]) && !opts.scan_all)
      {
        break;
      }
    }
    if (!found.empty())
    {
      out.thresholds   = found.front();
      out.start_period = start;
      out.multiple     = found.size() > 1;
      out.evaluations  = shoot.evaluations;
      return out;
    }
    last_res = std::move(res);
  }
  throw SolverError(describe_failure(p, grid, last_res, rejected));
}

ThresholdSequence solve_thresholds(AuctionPrimitives const &p, EquilibriumOptions const &opts)
{
  auto res = solve_equilibrium(p, opts);
  if (res.no_entry)
  {
    throw NoEntryCorner(res.thresholds);
  }
  return res.thresholds;
}

std::vector<double> reserves_from_thresholds(ThresholdSequence const &thr,
                                             AuctionPrimitives const &p)
{
  int const T = thr.T();
  // A_t = r_t G(v_t), unrolled backward from the terminal indifference.
  std::vector<double> A(static_cast<std::size_t>(T) + 2, 0.0);
  std::vector<double> r(static_cast<std::size_t>(T), 0.0);
  for (int t = T; t >= 1; --t)
  {
    double const Gt = p.G(thr[t]);
    double const Gp = p.G(thr[t - 1]);
    if (t == T)
    {
      A[t] = Gt * thr[t] - p.K * Gp;
    }
    else
    {
      double const I = p.dist.partial_expectation(p.N - 1, thr[t + 1], thr[t]);
      A[t] = (1.0 - p.delta) * Gt * thr[t] - p.K * Gp + p.delta * p.K * Gt + p.delta * I +
             p.delta * A[t + 1];
    }
    if (!(Gt > 0.0))
    {
      throw std::domain_error("reserve undefined: G(v_" + std::to_string(t) + ") = 0");
    }
    r[t - 1] = A[t] / Gt;
  }
  return r;
}

int best_entry_time(double v, ThresholdSequence const &thr, AuctionPrimitives const &p)
{
  int    best_t = 0;
  double best   = 0.0;
  for (int t = 1; t <= thr.T(); ++t)
  {
    double const pay = interim_payoff(v, t, thr, p);
    if (pay > best)
    {
      best   = pay;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace recauction
