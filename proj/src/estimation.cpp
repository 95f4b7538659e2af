#include "recauction/estimation.hpp"

#include <boost/math/special_functions/binomial.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <atomic>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "recauction/io.hpp"
#include "recauction/simulate.hpp"

namespace recauction {

namespace {

constexpr double kLogFloor   = -690.77552789821368;  // log(1e-300)
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double log_norm_sf(double z)
{
  if (z < 35.0)
  {
    return std::log(detail::norm_sf(z));
  }
  double const iz2 = 1.0 / (z * z);
  return -0.5 * z * z - std::log(z) - kLogSqrt2Pi + std::log1p(-iz2 + 3.0 * iz2 * iz2);
}

bool degenerate_scale(double s) { return !(s > 1e-300) || !std::isfinite(s); }

}  // namespace

double log_normal_mass(double a, double b)
{
  if (!(b > a))
  {
    return -HUGE_VAL;
  }
  if (a > 0.0)
  {
    double const la = log_norm_sf(a);
    double const lb = log_norm_sf(b);
    return la + std::log1p(-std::exp(lb - la));
  }
  if (b < 0.0)
  {
    double const la = log_norm_sf(-b);
    double const lb = log_norm_sf(-a);
    return la + std::log1p(-std::exp(lb - la));
  }
  return std::log(detail::norm_cdf(b) - detail::norm_cdf(a));
}

double trn_sample(double m, double s, double lo, double hi, double u)
{
  if (degenerate_scale(s))
  {
    return std::clamp(m, lo, hi);
  }
  double const a = (lo - m) / s;
  double const b = (hi - m) / s;
  double       z;
  if (a > 0.0)
  {
    double const sa = detail::norm_sf(a);
    double const sb = detail::norm_sf(b);
    if (!(sa > 0.0))
    {
      return lo;
    }
    z = detail::norm_isf(sa - u * (sa - sb));
  }
  else if (b < 0.0)
  {
    double const ca = detail::norm_cdf(a);
    double const cb = detail::norm_cdf(b);
    if (!(cb > 0.0))
    {
      return hi;
    }
    z = detail::norm_quantile(ca + u * (cb - ca));
  }
  else
  {
    double const ca = detail::norm_cdf(a);
    double const cb = detail::norm_cdf(b);
    double const q  = ca + u * (cb - ca);
    z               = q < 0.5 ? detail::norm_quantile(q) : detail::norm_isf(1.0 - q);
  }
  return std::clamp(m + s * z, lo, hi);
}

double trn_log_pdf(double x, double m, double s, double lo, double hi)
{
  if (x < lo || x > hi)
  {
    return -HUGE_VAL;
  }
  if (degenerate_scale(s))
  {
    return x == std::clamp(m, lo, hi) ? HUGE_VAL : -HUGE_VAL;
  }
  double const z = (x - m) / s;
  return -0.5 * z * z - kLogSqrt2Pi - std::log(s) - log_normal_mass((lo - m) / s, (hi - m) / s);
}

double trn_mean(double m, double s, double lo, double hi)
{
  if (degenerate_scale(s))
  {
    return std::clamp(m, lo, hi);
  }
  double const a  = (lo - m) / s;
  double const b  = (hi - m) / s;
  double const lz = log_normal_mass(a, b);
  if (!std::isfinite(lz))
  {
    return std::clamp(m, lo, hi);
  }
  auto ratio = [&](double z) { return std::exp(-0.5 * z * z - kLogSqrt2Pi - lz); };
  return std::clamp(m + s * (ratio(a) - ratio(b)), lo, hi);
}

std::vector<double> HyperParams::to_vector() const
{
  std::vector<double> v;
  for (auto const *b : {&beta_mu, &beta_sigma, &beta_K})
  {
    v.insert(v.end(), b->begin(), b->end());
  }
  v.push_back(omega_mu);
  v.push_back(omega_sigma);
  v.push_back(omega_K);
  return v;
}

HyperParams HyperParams::from_vector(std::vector<double> const &v)
{
  if (v.size() != static_cast<std::size_t>(kSize))
  {
    throw std::invalid_argument("hyper-parameter vector must have 15 entries");
  }
  HyperParams B;
  std::copy(v.begin(), v.begin() + 4, B.beta_mu.begin());
  std::copy(v.begin() + 4, v.begin() + 8, B.beta_sigma.begin());
  std::copy(v.begin() + 8, v.begin() + 12, B.beta_K.begin());
  B.omega_mu    = v[12];
  B.omega_sigma = v[13];
  B.omega_K     = v[14];
  return B;
}

std::vector<double> HyperParams::to_theta() const
{
  auto v = to_vector();
  for (int k = 12; k < 15; ++k)
  {
    v[k] = std::log(v[k]);
  }
  return v;
}

HyperParams HyperParams::from_theta(std::vector<double> const &theta)
{
  auto v = theta;
  for (int k = 12; k < 15; ++k)
  {
    v[k] = std::exp(v[k]);
  }
  return from_vector(v);
}

void HyperParams::validate() const
{
  for (double x : to_vector())
  {
    if (!std::isfinite(x))
    {
      throw std::invalid_argument("hyper-parameters must be finite");
    }
  }
  if (!(omega_mu > 0.0 && omega_sigma > 0.0 && omega_K > 0.0))
  {
    throw std::invalid_argument("omegas must be positive");
  }
}

HyperParams reference_hyperparams()
{
  HyperParams B;
  B.beta_mu     = {-0.198, 0.994, -0.036, -0.040};
  B.beta_sigma  = {0.249, -0.028, 0.031, 0.023};
  B.beta_K      = {-2.971, 0.634, 0.301, -0.260};
  B.omega_mu    = 0.162;
  B.omega_sigma = 0.100;
  B.omega_K     = 0.479;
  return B;
}

void AuctionObservation::validate(int T) const
{
  auto bad = [&](std::string const &why) {
    throw std::invalid_argument("observation " + std::to_string(id) + ": " + why);
  };
  if (N < 1)
  {
    bad("N must be >= 1");
  }
  if (static_cast<int>(reserves.size()) != T)
  {
    bad("reserve sequence length must equal T");
  }
  if (round_sold < 0 || round_sold > T)
  {
    bad("round_sold out of range");
  }
  if (round_sold == 0)
  {
    if (!std::isnan(price) || entrants != 0)
    {
      bad("unsold auction carries a price or entrants");
    }
    return;
  }
  if (std::isnan(price))
  {
    bad("sold auction without a deal price");
  }
  if (entrants < 1 || entrants > N)
  {
    bad("entrant count outside 1..N");
  }
}

AuctionParams draw_primitives(HyperParams const &B, Covariates const &X, Rng &rng,
                              EstimationModel const &model)
{
  AuctionParams L{};
  L.mu    = trn_sample(X.dot(B.beta_mu), B.omega_mu, model.mu_bounds.lo, model.mu_bounds.hi,
                       rng.uniform());
  L.sigma = trn_sample(X.dot(B.beta_sigma), B.omega_sigma, model.sigma_bounds.lo,
                       model.sigma_bounds.hi, rng.uniform());
  L.K     = trn_sample(X.dot(B.beta_K), B.omega_K, model.K_bounds.lo, model.K_bounds.hi,
                       rng.uniform());
  return L;
}

double log_hyper_density(AuctionParams const &L, HyperParams const &B, Covariates const &X,
                         EstimationModel const &model)
{
  return trn_log_pdf(L.mu, X.dot(B.beta_mu), B.omega_mu, model.mu_bounds.lo, model.mu_bounds.hi) +
         trn_log_pdf(L.sigma, X.dot(B.beta_sigma), B.omega_sigma, model.sigma_bounds.lo,
                     model.sigma_bounds.hi) +
         trn_log_pdf(L.K, X.dot(B.beta_K), B.omega_K, model.K_bounds.lo, model.K_bounds.hi);
}

AuctionPrimitives auction_primitives(AuctionParams const &L, int N, std::vector<double> reserves,
                                     EstimationModel const &model)
{
  AuctionPrimitives p{ValueDistribution::trunc_lognormal(L.mu, L.sigma, model.v_lo, model.v_hi), N,
                      model.T, model.delta, model.v_s, L.K, std::move(reserves)};
  return p;
}

double outcome_log_likelihood(AuctionObservation const &y, AuctionParams const &L,
                              ThresholdSequence const &thr, EstimationModel const &model)
{
  y.validate(thr.T());
  auto const d = ValueDistribution::trunc_lognormal(L.mu, L.sigma, model.v_lo, model.v_hi);
  int const  N = y.N;
  int const  T = thr.T();
  if (y.round_sold == 0)
  {
    return N * std::log(d.cdf(thr[T]));
  }
  int const    t     = y.round_sold;
  double const r     = y.reserves[t - 1];
  double const Ft    = d.cdf(thr[t]);
  double const Sprev = d.survival(thr[t - 1]);
  double const St    = d.survival(thr[t]);
  bool const   at_reserve =
      std::fabs(y.price - r) <= 1e-9 * std::max(std::fabs(r), std::numeric_limits<double>::min());
  if (y.entrants == 1)
  {
    if (!at_reserve || !(St > Sprev))
    {
      return -HUGE_VAL;
    }
    return std::log(static_cast<double>(N)) + std::log(St - Sprev) + (N - 1) * std::log(Ft);
  }
  int const    Ne = y.entrants;
  double const ph = y.price;
  if (at_reserve || !(ph > thr[t]) || ph > thr[t - 1])
  {
    return -HUGE_VAL;
  }
  double const fp = d.pdf(ph);
  double const Sp = d.survival(ph);
  double const inner = St - Sp;    // F(p) - F(v_t)
  double const upper = Sp - Sprev; // F(v_{t-1}) - F(p)
  if (!(fp > 0.0) || !(inner > 0.0) || !(upper > 0.0))
  {
    return -HUGE_VAL;
  }
  double const logC = std::log(boost::math::binomial_coefficient<double>(N, Ne));
  double       out  = logC + std::log(static_cast<double>(Ne) * (Ne - 1)) + std::log(fp) +
               (Ne - 2) * std::log(inner) + std::log(upper);
  if (N > Ne)
  {
    out += (N - Ne) * std::log(Ft);
  }
  return out;
}

std::uint64_t bank_key(HyperParams const &B0, std::uint64_t seed, int S, long P)
{
  std::uint64_t h   = 1469598103934665603ULL;
  auto          eat = [&](void const *p, std::size_t n) {
    auto const *c = static_cast<unsigned char const *>(p);
    for (std::size_t i = 0; i < n; ++i)
    {
      h = (h ^ c[i]) * 1099511628211ULL;
    }
  };
  for (double x : B0.to_vector())
  {
    eat(&x, sizeof x);
  }
  eat(&seed, sizeof seed);
  eat(&S, sizeof S);
  eat(&P, sizeof P);
  return h;
}

std::uint64_t DrawBank::key() const { return bank_key(B0, seed, S, P); }

void save_bank(DrawBank const &bank, std::string const &path)
{
  std::ofstream os(path);
  if (!os)
  {
    throw std::runtime_error("cannot write draw bank '" + path + "'");
  }
  os << "# key=" << bank.key() << " P=" << bank.P << " S=" << bank.S << " seed=" << bank.seed
     << " failures=" << bank.failures << '\n';
  os << "B0";
  for (double x : bank.B0.to_vector())
  {
    os << ',' << fmt_exact(x);
  }
  os << '\n';
  for (std::size_t k = 0; k < bank.lambda.size(); ++k)
  {
    auto const &L = bank.lambda[k];
    os << fmt_exact(L.mu) << ',' << fmt_exact(L.sigma) << ',' << fmt_exact(L.K) << ','
       << fmt_exact(bank.log_g[k]) << ',' << fmt_exact(bank.log_L[k]) << ','
       << int(bank.ok[k]) << '\n';
  }
}

std::optional<DrawBank> load_bank(std::string const &path, std::uint64_t expected_key)
{
  std::ifstream is(path);
  if (!is)
  {
    return std::nullopt;
  }
  std::string line;
  std::getline(is, line);
  DrawBank           b;
  unsigned long long key = 0;
  if (std::sscanf(line.c_str(), "# key=%llu P=%ld S=%d seed=%lu failures=%ld", &key, &b.P, &b.S,
                  &b.seed, &b.failures) != 5 ||
      key != expected_key)
  {
    return std::nullopt;
  }
  std::getline(is, line);
  {
    std::stringstream   ss(line.substr(3));
    std::vector<double> v;
    for (std::string cell; std::getline(ss, cell, ',');)
    {
      v.push_back(std::stod(cell));
    }
    b.B0 = HyperParams::from_vector(v);
  }
  std::size_t const n = static_cast<std::size_t>(b.P) * b.S;
  b.lambda.resize(n);
  b.log_g.resize(n);
  b.log_L.resize(n);
  b.ok.resize(n);
  for (std::size_t k = 0; k < n; ++k)
  {
    if (!std::getline(is, line))
    {
      return std::nullopt;
    }
    std::stringstream ss(line);
    std::string       c[6];
    for (auto &cell : c)
    {
      std::getline(ss, cell, ',');
    }
    auto num        = [](std::string const &s) { return s == "-inf" ? -HUGE_VAL : std::stod(s); };
    b.lambda[k]     = {num(c[0]), num(c[1]), num(c[2])};
    b.log_g[k]      = num(c[3]);
    b.log_L[k]      = num(c[4]);
    b.ok[k]         = static_cast<unsigned char>(std::stoi(c[5]));
  }
  if (b.key() != expected_key)
  {
    return std::nullopt;
  }
  return b;
}

DrawBank precompute_draws(HyperParams const &B0, Dataset const &data, int S, std::uint64_t seed,
                          EstimationModel const &model, int workers,
                          std::string const &cache_path)
{
  if (S < 1)
  {
    throw std::invalid_argument("S must be >= 1");
  }
  long const          P   = static_cast<long>(data.size());
  std::uint64_t const key = bank_key(B0, seed, S, P);
  if (!cache_path.empty())
  {
    if (auto cached = load_bank(cache_path, key))
    {
      return *cached;
    }
  }
  DrawBank bank;
  bank.B0   = B0;
  bank.seed = seed;
  bank.S    = S;
  bank.P    = P;
  std::size_t const n = static_cast<std::size_t>(P) * S;
  bank.lambda.resize(n);
  bank.log_g.resize(n);
  bank.log_L.resize(n);
  bank.ok.assign(n, 1);

  auto one = [&](std::size_t k) {
    auto const &y   = data[k / S];
    Rng         rng = Rng::substream(seed, k);
    auto const  L   = draw_primitives(B0, y.X, rng, model);
    bank.lambda[k]  = L;
    bank.log_g[k]   = log_hyper_density(L, B0, y.X, model);
    try
    {
      auto const p   = auction_primitives(L, y.N, y.reserves, model);
      auto const eq  = solve_equilibrium(p, model.solver);
      bank.log_L[k]  = outcome_log_likelihood(y, L, eq.thresholds, model);
    }
    catch (SolverError const &)
    {
      bank.ok[k]    = 0;
      bank.log_L[k] = -HUGE_VAL;
    }
  };
  int const nw = std::max(1, workers);
  if (nw == 1)
  {
    for (std::size_t k = 0; k < n; ++k)
    {
      one(k);
    }
  }
  else
  {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < nw; ++w)
    {
      pool.emplace_back([&] {
        for (std::size_t k; (k = next.fetch_add(1)) < n;)
        {
          one(k);
        }
      });
    }
    for (auto &th : pool)
    {
      th.join();
    }
  }
  bank.failures = std::count(bank.ok.begin(), bank.ok.end(), 0);
  if (!cache_path.empty())
  {
    save_bank(bank, cache_path);
  }
  return bank;
}

double simulated_loglik(HyperParams const &B, Dataset const &data, DrawBank const &bank,
                        EstimationModel const &model, LoglikDiagnostics *diag)
{
  if (static_cast<long>(data.size()) != bank.P)
  {
    throw std::invalid_argument("draw bank does not match the dataset");
  }
  int const                 S = bank.S;
  std::vector<double>       a(static_cast<std::size_t>(S));
  std::vector<double>       lw(static_cast<std::size_t>(S));
  double                    total = 0.0;
  struct Eq
  {
    Coef const *beta;
    double      omega;
    ParamBounds b;
  };
  std::array<Eq, 3> const eqs{Eq{&B.beta_mu, B.omega_mu, model.mu_bounds},
                              Eq{&B.beta_sigma, B.omega_sigma, model.sigma_bounds},
                              Eq{&B.beta_K, B.omega_K, model.K_bounds}};
  if (diag)
  {
    diag->floored = 0;
    diag->ess.assign(data.size(), 0.0);
  }
  for (std::size_t i = 0; i < data.size(); ++i)
  {
    Covariates const &X = data[i].X;
    std::array<double, 3> idx{}, norm{};
    for (int c = 0; c < 3; ++c)
    {
      idx[c]  = X.dot(*eqs[c].beta);
      norm[c] = -kLogSqrt2Pi - std::log(eqs[c].omega) -
                log_normal_mass((eqs[c].b.lo - idx[c]) / eqs[c].omega,
                                (eqs[c].b.hi - idx[c]) / eqs[c].omega);
    }
    double amax  = -HUGE_VAL;
    int    valid = 0;
    for (int s = 0; s < S; ++s)
    {
      std::size_t const k = i * S + s;
      if (!bank.ok[k])
      {
        a[s]  = -HUGE_VAL;
        lw[s] = -HUGE_VAL;
        continue;
      }
      ++valid;
      auto const  &L   = bank.lambda[k];
      double const x[3] = {L.mu, L.sigma, L.K};
      double       lphi = 0.0;
      for (int c = 0; c < 3; ++c)
      {
        double const z = (x[c] - idx[c]) / eqs[c].omega;
        lphi += norm[c] - 0.5 * z * z;
      }
      lw[s] = lphi - bank.log_g[k];
      a[s]  = bank.log_L[k] + lw[s];
      amax  = std::max(amax, a[s]);
    }
    double contrib = kLogFloor;
    if (valid > 0 && std::isfinite(amax))
    {
      double sum = 0.0;
      for (int s = 0; s < S; ++s)
      {
        if (a[s] > -HUGE_VAL)
        {
          sum += std::exp(a[s] - amax);
        }
      }
      contrib = std::max(kLogFloor, amax + std::log(sum) - std::log(static_cast<double>(valid)));
    }
    else if (diag)
    {
      ++diag->floored;
    }
    if (!std::isfinite(contrib))
    {
      contrib = kLogFloor;
    }
    total += contrib;
    if (diag)
    {
      double wmax = -HUGE_VAL;
      for (int s = 0; s < S; ++s)
      {
        wmax = std::max(wmax, lw[s]);
      }
      double s1 = 0.0, s2 = 0.0;
      if (std::isfinite(wmax))
      {
        for (int s = 0; s < S; ++s)
        {
          if (lw[s] > -HUGE_VAL)
          {
            double const w = std::exp(lw[s] - wmax);
            s1 += w;
            s2 += w * w;
          }
        }
      }
      diag->ess[i] = s2 > 0.0 ? s1 * s1 / s2 : 0.0;
    }
  }
  return total;
}

NelderMeadResult nelder_mead_max(std::function<double(std::vector<double> const &)> const &f,
                                 std::vector<double> x0, std::vector<double> const &step,
                                 NelderMeadOptions const &opts)
{
  int const    n     = static_cast<int>(x0.size());
  double const alpha = 1.0;
  double const gamma = 1.0 + 2.0 / n;
  double const rho   = 0.75 - 0.5 / n;
  double const sigma = 1.0 - 1.0 / n;
  auto         obj   = [&](std::vector<double> const &x) {
    double const v = f(x);
    return std::isfinite(v) ? -v : HUGE_VAL;  // minimize
  };

  NelderMeadResult out;
  out.x = x0;
  out.f = -obj(x0);
  for (int restart = 0; restart <= opts.restarts; ++restart)
  {
    std::vector<std::vector<double>> X(n + 1, out.x);
    std::vector<double>              F(n + 1);
    F[0] = -out.f;
    for (int j = 0; j < n; ++j)
    {
      X[j + 1][j] += step[j];
      F[j + 1] = obj(X[j + 1]);
    }
    bool converged = false;
    int  it        = 0;
    for (; it < opts.max_iter; ++it)
    {
      std::vector<int> ord(n + 1);
      std::iota(ord.begin(), ord.end(), 0);
      std::sort(ord.begin(), ord.end(), [&](int a, int b) { return F[a] < F[b]; });
      {
        auto X2 = X;
        auto F2 = F;
        for (int j = 0; j <= n; ++j)
        {
          X[j] = X2[ord[j]];
          F[j] = F2[ord[j]];
        }
      }
      double spread = 0.0;
      for (int j = 1; j <= n; ++j)
      {
        for (int k = 0; k < n; ++k)
        {
          spread = std::max(spread, std::fabs(X[j][k] - X[0][k]));
        }
      }
      if (std::fabs(F[n] - F[0]) <= opts.ftol * (1.0 + std::fabs(F[0])) && spread <= opts.xtol * 1e3)
      {
        converged = true;
        break;
      }
      if (spread <= opts.xtol)
      {
        converged = true;
        break;
      }
      std::vector<double> c(n, 0.0);
      for (int j = 0; j < n; ++j)
      {
        for (int k = 0; k < n; ++k)
        {
          c[k] += X[j][k] / n;
        }
      }
      auto along = [&](double t) {
        std::vector<double> y(n);
        for (int k = 0; k < n; ++k)
        {
          y[k] = c[k] + t * (X[n][k] - c[k]);
        }
        return y;
      };
      auto         xr = along(-alpha);
      double const fr = obj(xr);
      if (fr < F[0])
      {
        auto         xe = along(-gamma);
        double const fe = obj(xe);
        if (fe < fr)
        {
          X[n] = xe;
          F[n] = fe;
        }
        else
        {
          X[n] = xr;
          F[n] = fr;
        }
        continue;
      }
      if (fr < F[n - 1])
      {
        X[n] = xr;
        F[n] = fr;
        continue;
      }
      bool const   outside = fr < F[n];
      auto         xc      = along(outside ? -rho : rho);
      double const fc      = obj(xc);
      if (fc < (outside ? fr : F[n]))
      {
        X[n] = xc;
        F[n] = fc;
        continue;
      }
      for (int j = 1; j <= n; ++j)
      {
        for (int k = 0; k < n; ++k)
        {
          X[j][k] = X[0][k] + sigma * (X[j][k] - X[0][k]);
        }
        F[j] = obj(X[j]);
      }
    }
    out.iterations += it;
    int const best = static_cast<int>(std::min_element(F.begin(), F.end()) - F.begin());
    double const improvement = -F[best] - out.f;
    out.x         = X[best];
    out.f         = -F[best];
    out.converged = converged;
    if (restart > 0 && improvement <= opts.ftol * (1.0 + std::fabs(out.f)))
    {
      break;
    }
  }
  return out;
}

ImpliedMeans implied_means(HyperParams const &B, Dataset const &data, EstimationModel const &model)
{
  ImpliedMeans m{0.0, 0.0, 0.0};
  for (auto const &y : data)
  {
    m.mu += trn_mean(y.X.dot(B.beta_mu), B.omega_mu, model.mu_bounds.lo, model.mu_bounds.hi);
    m.sigma += trn_mean(y.X.dot(B.beta_sigma), B.omega_sigma, model.sigma_bounds.lo,
                        model.sigma_bounds.hi);
    m.K += trn_mean(y.X.dot(B.beta_K), B.omega_K, model.K_bounds.lo, model.K_bounds.hi);
  }
  double const n = std::max<double>(1.0, static_cast<double>(data.size()));
  return {m.mu / n, m.sigma / n, m.K / n};
}

FitResult fit(Dataset const &data, HyperParams const &B0, FitSettings const &settings,
              EstimationModel const &model)
{
  if (data.empty())
  {
    throw std::invalid_argument("dataset is empty");
  }
  B0.validate();
  FitResult   res;
  HyperParams centre = B0;
  int const   rounds = std::max(1, settings.rounds);
  int const   keep   = std::clamp(settings.average_last < 0 ? rounds / 2 : settings.average_last, 1, rounds);
  std::vector<double> mean(HyperParams::kSize, 0.0);
  DrawBank            last;
  for (int round = 0; round < rounds; ++round)
  {
    std::uint64_t const seed = mix64(settings.seed + static_cast<std::uint64_t>(round));
    std::string         cache;
    if (!settings.cache_dir.empty())
    {
      std::ostringstream os;
      os << settings.cache_dir << "/bank_" << std::hex << bank_key(centre, seed, settings.S,
                                                                  static_cast<long>(data.size()))
         << ".csv";
      cache = os.str();
    }
    DrawBank bank = precompute_draws(centre, data, settings.S, seed, model, settings.workers, cache);
    auto objective = [&](std::vector<double> const &theta) {
      return simulated_loglik(HyperParams::from_theta(theta), data, bank, model);
    };
    std::vector<double> theta = centre.to_theta();
    std::vector<double> step(theta.size());
    for (std::size_t k = 0; k < theta.size(); ++k)
    {
      step[k] = k >= 12 ? 0.2 : 0.1 * std::max(std::fabs(theta[k]), 0.05);
    }
    auto const nm = nelder_mead_max(objective, theta, step, settings.optimizer);
    centre        = HyperParams::from_theta(nm.x);
    res.iterations += nm.iterations;
    res.converged       = nm.converged;
    res.solver_failures = bank.failures;
    res.trace.push_back(nm.f);
    res.incumbents.push_back(centre);
    if (round >= rounds - keep)
    {
      for (std::size_t k = 0; k < mean.size(); ++k)
      {
        mean[k] += nm.x[k] / keep;
      }
    }
    last = std::move(bank);
  }
  res.B = HyperParams::from_theta(mean);

  LoglikDiagnostics diag;
  res.loglik   = simulated_loglik(res.B, data, last, model, &diag);
  res.floored  = diag.floored;
  res.ess_mean = std::accumulate(diag.ess.begin(), diag.ess.end(), 0.0) / diag.ess.size();
  res.ess_min  = *std::min_element(diag.ess.begin(), diag.ess.end());
  return res;
}

Dataset generate_synthetic(HyperParams const &B_true, long P, std::uint64_t seed,
                           GeneratorSettings const &gen, EstimationModel const &model,
                           std::vector<AuctionParams> *truth)
{
  B_true.validate();
  double const theta_g = (gen.N_extra_var - gen.N_extra_mean) / gen.N_extra_mean;
  double const shape_g = gen.N_extra_mean / theta_g;
  Dataset      data;
  data.reserve(static_cast<std::size_t>(P));
  if (truth)
  {
    truth->clear();
  }
  for (long i = 0; i < P; ++i)
  {
    Rng                rng = Rng::substream(seed, static_cast<std::uint64_t>(i));
    AuctionObservation y;
    y.id               = i;
    double const la    = gen.log_assess_mean + gen.log_assess_sd * detail::norm_quantile(rng.uniform());
    double const area  = std::max(gen.area_min, gen.area_mean + gen.area_sd * detail::norm_quantile(rng.uniform()));
    double const ld    = gen.log_dist_mean + gen.log_dist_sd * detail::norm_quantile(rng.uniform());
    y.X.x              = {1.0, la, area, ld};

    // negative binomial count as a gamma mixture of Poissons, by inversion
    double const lambda = boost::math::gamma_p_inv(shape_g, rng.uniform()) * theta_g;
    double const u      = rng.uniform();
    int          k      = 0;
    double       pk     = std::exp(-lambda);
    double       cum    = pk;
    while (cum < u && k < gen.N_max)
    {
      ++k;
      pk *= lambda / k;
      cum += pk;
    }
    y.N = std::min(gen.N_base + k, gen.N_max);

    double const r1 = (gen.r1_lo + (gen.r1_hi - gen.r1_lo) * rng.uniform()) * std::exp(la);
    y.reserves.assign(static_cast<std::size_t>(model.T), gen.decline * r1);
    y.reserves[0] = r1;

    for (int attempt = 0;; ++attempt)
    {
      AuctionParams L = draw_primitives(B_true, y.X, rng, model);
      L.K *= gen.K_scale;
      try
      {
        auto const p   = auction_primitives(L, y.N, y.reserves, model);
        auto const eq  = solve_equilibrium(p, model.solver);
        auto const out = simulate_auction(eq.thresholds, p, rng);
        y.round_sold   = out.round;
        y.price        = out.sold ? out.price : std::nan("");
        y.entrants     = out.sold ? out.entrants_per_round[out.round - 1] : 0;
        if (truth)
        {
          truth->push_back(L);
        }
        break;
      }
      catch (SolverError const &)
      {
        if (attempt >= 10)
        {
          throw;
        }
      }
    }
    data.push_back(std::move(y));
  }
  return data;
}

void write_dataset_csv(std::ostream &os, Dataset const &data, int T)
{
  os << "id,round_sold,deal_price,entrants,N";
  for (int t = 1; t <= T; ++t)
  {
    os << ",r" << t;
  }
  os << ",log_assess,area_100m2,log_dist\n";
  for (auto const &y : data)
  {
    os << y.id << ',' << y.round_sold << ',' << fmt_exact(y.price) << ',' << y.entrants << ','
       << y.N;
    for (double r : y.reserves)
    {
      os << ',' << fmt_exact(r);
    }
    os << ',' << fmt_exact(y.X.x[1]) << ',' << fmt_exact(y.X.x[2]) << ',' << fmt_exact(y.X.x[3])
       << '\n';
  }
}

Dataset read_dataset_csv(std::istream &is, int T)
{
  std::string line;
  if (!std::getline(is, line))
  {
    throw std::invalid_argument("dataset is empty");
  }
  std::size_t const cols = 5 + static_cast<std::size_t>(T) + 3;
  Dataset           data;
  long              lineno = 1;
  while (std::getline(is, line))
  {
    ++lineno;
    if (line.empty())
    {
      continue;
    }
    std::vector<std::string> c;
    std::stringstream        ss(line);
    for (std::string cell; std::getline(ss, cell, ',');)
    {
      c.push_back(cell);
    }
    if (!line.empty() && line.back() == ',')
    {
      c.emplace_back();
    }
    if (c.size() != cols)
    {
      throw std::invalid_argument("dataset line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(cols) + " columns");
    }
    try
    {
      AuctionObservation y;
      y.id         = std::stol(c[0]);
      y.round_sold = std::stoi(c[1]);
      y.price      = c[2].empty() ? std::nan("") : std::stod(c[2]);
      y.entrants   = std::stoi(c[3]);
      y.N          = std::stoi(c[4]);
      for (int t = 0; t < T; ++t)
      {
        y.reserves.push_back(std::stod(c[5 + t]));
      }
      y.X.x = {1.0, std::stod(c[5 + T]), std::stod(c[6 + T]), std::stod(c[7 + T])};
      y.validate(T);
      data.push_back(std::move(y));
    }
    catch (std::logic_error const &e)
    {
      throw std::invalid_argument("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return data;
}

}  // namespace recauction
