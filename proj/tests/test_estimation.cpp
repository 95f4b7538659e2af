#include "doctest.h"
#include "oracles.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <unistd.h>

#include "recauction/estimation.hpp"

using namespace recauction;

namespace {

EstimationModel const kModel{};

AuctionObservation observation(int round, double price, int entrants, int N)
{
  AuctionObservation y;
  y.round_sold = round;
  y.price      = price;
  y.entrants   = entrants;
  y.N          = N;
  y.reserves   = {70.0, 56.0, 56.0};
  y.X.x        = {1.0, 4.4, 1.2, 0.9};
  return y;
}

}  // namespace

TEST_CASE("truncated normal helpers")
{
  double const m = 0.7, s = 1.3, lo = 0.0, hi = 15.0;
  double const Z = oracle::Phi((hi - m) / s) - oracle::Phi((lo - m) / s);
  double const mean =
      oracle::simpson([&](double x) { return x * oracle::phi((x - m) / s) / (s * Z); }, lo, hi, 8000);
  CHECK(trn_mean(m, s, lo, hi) == doctest::Approx(mean).epsilon(1e-10));
  CHECK(trn_log_pdf(2.0, m, s, lo, hi) == doctest::Approx(std::log(oracle::phi((2.0 - m) / s) / (s * Z))).epsilon(1e-12));
  CHECK(std::exp(log_normal_mass(-1.0, 2.0)) == doctest::Approx(oracle::Phi(2.0) - oracle::Phi(-1.0)).epsilon(1e-14));
  // far tail stays finite and close to the Mills-ratio asymptote
  double const lm = log_normal_mass(40.0, 41.0);
  CHECK(std::isfinite(lm));
  CHECK(lm == doctest::Approx(-800.0 - std::log(40.0) - 0.5 * std::log(2 * M_PI)).epsilon(1e-4));
  CHECK(std::isfinite(trn_mean(-30.0, 1.0, 0.0, 15.0)));
  CHECK(trn_mean(-30.0, 1.0, 0.0, 15.0) < 0.05);

  Rng    rng(5);
  double sum = 0.0, sum2 = 0.0;
  int    n   = 100000;
  for (int i = 0; i < n; ++i)
  {
    double const x = trn_sample(m, s, lo, hi, rng.uniform());
    REQUIRE(x >= lo);
    REQUIRE(x <= hi);
    sum += x;
    sum2 += x * x;
  }
  double const se = std::sqrt((sum2 / n - (sum / n) * (sum / n)) / n);
  CHECK(std::fabs(sum / n - mean) < 3.5 * se);
}

TEST_CASE("vanishing omegas give the clamped index")
{
  HyperParams B = reference_hyperparams();
  B.omega_mu = B.omega_sigma = B.omega_K = 1e-320;
  Covariates X;
  X.x = {1.0, 4.5, 1.3, 0.9};
  Rng        rng(1);
  auto const L = draw_primitives(B, X, rng);
  CHECK(L.mu == doctest::Approx(std::clamp(X.dot(B.beta_mu), 1.0, 7.0)));
  CHECK(L.sigma == doctest::Approx(std::clamp(X.dot(B.beta_sigma), 0.01, 3.0)));
  CHECK(L.K == doctest::Approx(std::clamp(X.dot(B.beta_K), 0.0, 15.0)));
}

TEST_CASE("scenario likelihoods")
{
  AuctionParams const L{4.3, 0.2, 0.8};
  int const           N   = 6;
  auto const          p   = auction_primitives(L, N, {70.0, 56.0, 56.0}, kModel);
  auto const          thr = solve_thresholds(p, kModel.solver);
  auto const         &d   = p.dist;

  auto const y1 = observation(0, std::nan(""), 0, N);
  CHECK(outcome_likelihood(y1, L, thr) == doctest::Approx(std::pow(d.cdf(thr[3]), N)).epsilon(1e-12));

  auto const y2 = observation(2, 56.0, 1, N);
  CHECK(outcome_likelihood(y2, L, thr) ==
        doctest::Approx(N * (d.cdf(thr[1]) - d.cdf(thr[2])) * std::pow(d.cdf(thr[2]), N - 1)).epsilon(1e-10));

  double const ph = 0.5 * (thr[1] + thr[2]);
  auto const   y3 = observation(2, ph, 3, N);
  double const l3 = 20.0 * 6.0 * std::pow(d.cdf(thr[2]), N - 3) * d.pdf(ph) * (d.cdf(ph) - d.cdf(thr[2])) *
                    (d.cdf(thr[1]) - d.cdf(ph));
  CHECK(outcome_likelihood(y3, L, thr) == doctest::Approx(l3).epsilon(1e-10));

  // deal price below the round threshold is ruled out
  CHECK(outcome_likelihood(observation(2, 0.5 * thr[2], 3, N), L, thr) == 0.0);
  // a single entrant must pay the reserve
  CHECK(outcome_likelihood(observation(1, 80.0, 1, N), L, thr) == 0.0);

  CHECK_THROWS_AS(outcome_likelihood(observation(2, std::nan(""), 2, N), L, thr), std::invalid_argument);
  CHECK_THROWS_AS(outcome_likelihood(observation(1, 70.0, 9, N), L, thr), std::invalid_argument);
}

TEST_CASE("property: scenario masses integrate to one")
{
  Rng rng(77);
  for (int k = 0; k < 10; ++k)
  {
    AuctionParams const L{3.5 + rng.uniform(), 0.1 + 0.4 * rng.uniform(), 2.0 * rng.uniform()};
    int const           N = 2 + static_cast<int>(6 * rng.uniform());
    double const        m = std::exp(L.mu);
    auto const          p = auction_primitives(L, N, {0.9 * m, 0.72 * m, 0.72 * m}, kModel);
    auto const          eq = solve_equilibrium(p, kModel.solver);
    auto const         &thr = eq.thresholds;
    double              total = outcome_likelihood(observation(0, std::nan(""), 0, N), L, thr);
    for (int t = 1; t <= 3; ++t)
    {
      double round = 0.0;
      if (thr[t - 1] > thr[t])
      {
        auto y    = observation(t, p.reserves[t - 1], 1, N);
        y.reserves = p.reserves;
        round += outcome_likelihood(y, L, thr);
        for (int ne = 2; ne <= N; ++ne)
        {
          // integrate on the probability scale, u = F(p), where f(p) dp = du;
          // the price interval is open, so endpoints are taken just inside
          double const ua = p.dist.cdf(thr[t]);
          double const ub = p.dist.cdf(thr[t - 1]);
          round += oracle::simpson(
              [&](double u) {
                double const x = p.dist.quantile(std::clamp(u, ua + 1e-10 * (ub - ua), ub - 1e-10 * (ub - ua)));
                if (!(x > thr[t] && x < thr[t - 1]))
                {
                  return 0.0;
                }
                auto z     = observation(t, x, ne, N);
                z.reserves = p.reserves;
                return outcome_likelihood(z, L, thr) / p.dist.pdf(x);
              },
              ua, ub, 2000);
        }
      }
      double const tele = std::pow(p.dist.cdf(thr[t - 1]), N) - std::pow(p.dist.cdf(thr[t]), N);
      CHECK(round == doctest::Approx(tele).epsilon(1e-6));
      total += round;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("draw bank: deterministic, sized, and consistent with direct evaluation")
{
  auto const B    = reference_hyperparams();
  auto const data = generate_synthetic(B, 6, 3);
  auto const a    = precompute_draws(B, data, 8, 11);
  auto const b    = precompute_draws(B, data, 8, 11, {}, 2);
  REQUIRE(a.lambda.size() == 48);
  CHECK(a.log_L == b.log_L);
  for (std::size_t k : {0u, 13u, 47u})
  {
    auto const &L  = a.lambda[k];
    auto const &y  = data[k / 8];
    auto const  eq = solve_equilibrium(auction_primitives(L, y.N, y.reserves), kModel.solver);
    CHECK(a.log_L[k] == outcome_log_likelihood(y, L, eq.thresholds));
    CHECK(a.log_g[k] == doctest::Approx(log_hyper_density(L, B, y.X)).epsilon(1e-14));
  }

  // unit weights at the base point
  double plain = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
  {
    double s = 0.0;
    for (int k = 0; k < 8; ++k)
    {
      s += std::exp(a.log_L[i * 8 + k]);
    }
    plain += std::log(std::max(s / 8, 1e-300));
  }
  LoglikDiagnostics diag;
  CHECK(simulated_loglik(B, data, a, {}, &diag) == doctest::Approx(plain).epsilon(1e-10));
  for (double e : diag.ess)
  {
    CHECK(e == doctest::Approx(8.0));
  }

  char path[] = "/tmp/recauction_bankXXXXXX";
  int  fd     = mkstemp(path);
  REQUIRE(fd >= 0);
  close(fd);
  save_bank(a, path);
  auto const c = load_bank(path, a.key());
  REQUIRE(c.has_value());
  CHECK(c->log_L == a.log_L);
  CHECK(c->lambda[5].K == a.lambda[5].K);
  CHECK_FALSE(load_bank(path, a.key() + 1).has_value());
  std::remove(path);
}

TEST_CASE("importance weights reproduce the likelihood at another B")
{
  auto const B0   = reference_hyperparams();
  auto       v    = B0.to_vector();
  v[0] += 0.05;
  v[12] *= 1.15;
  auto const B    = HyperParams::from_vector(v);
  auto const data = generate_synthetic(B0, 5, 21);
  int const  S    = 1500;
  auto const is   = precompute_draws(B0, data, S, 1);
  auto const mc   = precompute_draws(B, data, S, 2);
  for (std::size_t i = 0; i < data.size(); ++i)
  {
    double a = 0, a2 = 0, b = 0, b2 = 0;
    for (int s = 0; s < S; ++s)
    {
      std::size_t const k = i * S + s;
      double const w = std::exp(log_hyper_density(is.lambda[k], B, data[i].X) - is.log_g[k]);
      double const x = std::exp(is.log_L[k]) * w;
      a += x;
      a2 += x * x;
      double const y = std::exp(mc.log_L[k]);
      b += y;
      b2 += y * y;
    }
    a /= S;
    b /= S;
    double const se = std::sqrt((a2 / S - a * a) / S + (b2 / S - b * b) / S);
    CHECK(std::fabs(a - b) <= 4.0 * se + 1e-300);
  }
}

TEST_CASE("Nelder-Mead finds a quadratic maximum")
{
  auto f = [](std::vector<double> const &x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
      s -= (i + 1.0) * (x[i] - 0.5 * i) * (x[i] - 0.5 * i);
    }
    return s;
  };
  auto const r = nelder_mead_max(f, std::vector<double>(5, 2.0), std::vector<double>(5, 0.5));
  CHECK(r.converged);
  for (int i = 0; i < 5; ++i)
  {
    CHECK(r.x[i] == doctest::Approx(0.5 * i).epsilon(1e-4));
  }
}

TEST_CASE("fit averages the late-round optima")
{
  auto const  data = generate_synthetic(reference_hyperparams(), 10, 3);
  FitSettings fs;
  fs.S                  = 4;
  fs.rounds             = 3;
  fs.average_last       = 2;
  fs.optimizer.max_iter = 40;
  fs.optimizer.restarts = 0;
  auto const res = fit(data, reference_hyperparams(), fs);
  REQUIRE(res.incumbents.size() == 3);
  REQUIRE(res.trace.size() == 3);
  auto const a = res.incumbents[1].to_theta();
  auto const b = res.incumbents[2].to_theta();
  auto const m = res.B.to_theta();
  for (std::size_t k = 0; k < m.size(); ++k)
  {
    CHECK(m[k] == doctest::Approx(0.5 * (a[k] + b[k])).epsilon(1e-12));
  }
  CHECK(std::isfinite(res.loglik));
}

TEST_CASE("generator: deterministic, consistent, and round-trips through CSV")
{
  auto const B = reference_hyperparams();
  std::vector<AuctionParams> truth;
  auto const a = generate_synthetic(B, 40, 9, {}, kModel, &truth);
  auto const b = generate_synthetic(B, 40, 9);
  std::ostringstream sa, sb;
  write_dataset_csv(sa, a, 3);
  write_dataset_csv(sb, b, 3);
  CHECK(sa.str() == sb.str());

  std::istringstream in(sa.str());
  auto const back = read_dataset_csv(in, 3);
  REQUIRE(back.size() == a.size());
  std::ostringstream sc;
  write_dataset_csv(sc, back, 3);
  CHECK(sc.str() == sa.str());

  for (std::size_t i = 0; i < a.size(); ++i)
  {
    auto const &y = a[i];
    CHECK(y.N >= 3);
    CHECK(y.reserves[1] == doctest::Approx(0.8 * y.reserves[0]));
    auto const eq = solve_equilibrium(auction_primitives(truth[i], y.N, y.reserves), kModel.solver);
    CHECK(outcome_log_likelihood(y, truth[i], eq.thresholds) > -HUGE_VAL);
  }
}

TEST_CASE("failure shares rise with the entry-cost scale")
{
  auto const B = reference_hyperparams();
  GeneratorSettings lo, hi;
  lo.K_scale = 0.5;
  hi.K_scale = 2.0;
  auto failed = [](Dataset const &d) {
    long n = 0;
    for (auto const &y : d)
    {
      n += y.round_sold == 0;
    }
    return n;
  };
  CHECK(failed(generate_synthetic(B, 300, 4, lo)) < failed(generate_synthetic(B, 300, 4, hi)));
}

TEST_CASE("dataset reader rejects malformed rows")
{
  std::istringstream bad("header\n1,2,,0,5,70,56,56,4.4,1.2,0.9\n");
  CHECK_THROWS_AS(read_dataset_csv(bad, 3), std::invalid_argument);
  std::istringstream shortrow("header\n1,0,,0,5,70\n");
  CHECK_THROWS_AS(read_dataset_csv(shortrow, 3), std::invalid_argument);
}
