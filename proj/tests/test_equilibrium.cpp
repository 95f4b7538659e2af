#include "doctest.h"
#include "oracles.hpp"

#include <algorithm>

#include "recauction/equilibrium.hpp"

using namespace recauction;

namespace {

AuctionPrimitives example1(std::vector<double> r)
{
  return AuctionPrimitives{ValueDistribution::uniform(0.0, 1.0), 2, static_cast<int>(r.size()),
                           0.97, 0.0, 0.2, r};
}

// Interim payoff written out from the definition, G and g supplied by the test.
double payoff(double v, int t, std::vector<double> const &thr, AuctionPrimitives const &p,
              std::function<double(double)> const &G, std::function<double(double)> const &g)
{
  double const lo  = thr[t];
  double const hi  = std::min(std::max(v, lo), thr[t - 1]);
  double const win = oracle::simpson([&](double x) { return (v - x) * g(x); }, lo, hi, 4000);
  return std::pow(p.delta, t - 1) * (win + (v - p.reserves[t - 1]) * G(lo) - G(thr[t - 1]) * p.K);
}

}  // namespace

TEST_CASE("single round: cutoff solves v G(v) = K + r G(v)")
{
  auto const p   = example1({0.0});
  auto const thr = solve_thresholds(p);
  REQUIRE(thr.T() == 1);
  CHECK(thr[0] == 1.0);
  CHECK(thr[1] == doctest::Approx(std::sqrt(0.2)).epsilon(1e-9));
}

TEST_CASE("two rounds at r = (0.14, 0): independent indifference check")
{
  auto const p   = example1({0.14, 0.0});
  auto const res = solve_equilibrium(p);
  auto const &v  = res.thresholds.v;
  CHECK(v[1] == doctest::Approx(0.666321).epsilon(1e-5));
  CHECK(v[2] == doctest::Approx(0.365054).epsilon(1e-5));
  auto G = [](double x) { return std::clamp(x, 0.0, 1.0); };
  auto g = [](double) { return 1.0; };
  CHECK(payoff(v[1], 1, v, p, G, g) == doctest::Approx(payoff(v[1], 2, v, p, G, g)).epsilon(1e-9));
  CHECK(std::fabs(payoff(v[2], 2, v, p, G, g)) < 1e-9);
  CHECK(interim_payoff(0.8, 1, res.thresholds, p) == doctest::Approx(payoff(0.8, 1, v, p, G, g)).epsilon(1e-9));
  CHECK(interim_payoff(0.5, 2, res.thresholds, p) == doctest::Approx(payoff(0.5, 2, v, p, G, g)).epsilon(1e-9));
  CHECK(res.check.max_residual < 1e-8);
  CHECK(res.check.definition_holds);
  CHECK_FALSE(res.multiple);
}

TEST_CASE("reserves round-trip through thresholds")
{
  auto const p   = example1({0.14, 0.0});
  auto const thr = solve_thresholds(p);
  auto const r   = reserves_from_thresholds(thr, p);
  CHECK(r[0] == doctest::Approx(0.14).epsilon(1e-8));
  CHECK(std::fabs(r[1]) < 1e-8);
}

TEST_CASE("equal reserves in both rounds")
{
  auto const p   = example1({0.0, 0.0});
  auto const res = solve_equilibrium(p);
  auto const &v  = res.thresholds.v;
  CHECK(v[1] >= v[2]);
  CHECK(res.check.max_residual < 1e-8);
}

TEST_CASE("no-entry corner")
{
  auto p = example1({0.9});
  p.K    = 0.2;
  auto const res = solve_equilibrium(p);
  CHECK(res.no_entry);
  CHECK(res.thresholds[1] == 1.0);
  CHECK_THROWS_AS(solve_thresholds(p), NoEntryCorner);
}

TEST_CASE("single potential buyer enters where v - r_t - K clears")
{
  AuctionPrimitives p{ValueDistribution::uniform(0.0, 1.0), 1, 2, 0.9, 0.0, 0.1, {0.5, 0.1}};
  auto const res = solve_equilibrium(p);
  // v - 0.6 < 0.9 (v - 0.2) on the whole support, so round 1 is skipped
  CHECK(res.thresholds[1] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(res.thresholds[2] == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("best entry time follows the sorted pattern")
{
  auto const p   = example1({0.14, 0.0});
  auto const thr = solve_thresholds(p);
  CHECK(best_entry_time(0.9, thr, p) == 1);
  CHECK(best_entry_time(0.5, thr, p) == 2);
  CHECK(best_entry_time(0.2, thr, p) == 0);
}

TEST_CASE("validation rejects malformed primitives")
{
  auto p = example1({0.14, 0.0});
  p.delta = 1.2;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = example1({0.14});
  p.T = 2;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = example1({0.14, 0.0});
  p.N = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("property: random primitives give monotone verified thresholds")
{
  Rng rng(2024);
  int solved = 0;
  for (int k = 0; k < 40; ++k)
  {
    double const mu = 1.0 + 3.0 * rng.uniform();
    double const s  = 0.1 + 0.6 * rng.uniform();
    double const m  = std::exp(mu);
    AuctionPrimitives p{ValueDistribution::trunc_lognormal(mu, s, 1e-4, 1200.0),
                        2 + static_cast<int>(8 * rng.uniform()), 3, 0.95, 0.0,
                        0.02 * m * rng.uniform(), {}};
    double const r1 = (0.8 + 0.2 * rng.uniform()) * m;
    p.reserves      = {r1, 0.8 * r1, 0.8 * r1};
    auto const res  = solve_equilibrium(p);
    res.thresholds.validate(p.dist.lower(), p.dist.upper());
    if (!res.no_entry)
    {
      CHECK(res.check.max_residual < 1e-8);
      ++solved;
    }
  }
  CHECK(solved > 30);
}

TEST_CASE("horizon helpers")
{
  auto const p = example1({0.3, 0.2});
  auto const q = p.with_horizon(3);
  CHECK(q.T == 3);
  CHECK(q.reserves == std::vector<double>{0.3, 0.2, 0.2});
  CHECK(p.with_horizon(1).reserves == std::vector<double>{0.3});
}
