#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "recauction/equilibrium.hpp"
#include "recauction/random.hpp"

namespace recauction {

using Coef = std::array<double, 4>;

/// (1, log assessed price, area in 100 m^2, log distance to centre).
struct Covariates
{
  Coef x{1.0, 0.0, 0.0, 0.0};
  double dot(Coef const &b) const { return x[0] * b[0] + x[1] * b[1] + x[2] * b[2] + x[3] * b[3]; }
};

struct HyperParams
{
  Coef   beta_mu{};
  Coef   beta_sigma{};
  Coef   beta_K{};
  double omega_mu    = 1.0;
  double omega_sigma = 1.0;
  double omega_K     = 1.0;

  static constexpr int kSize = 15;
  /// Betas then log omegas; the optimizer's coordinates.
  std::vector<double> to_theta() const;
  static HyperParams  from_theta(std::vector<double> const &theta);
  /// Betas then omegas, in natural units.
  std::vector<double> to_vector() const;
  static HyperParams  from_vector(std::vector<double> const &v);
  void                validate() const;
};

/// Coefficients used to generate the synthetic recovery data.
HyperParams reference_hyperparams();

struct ParamBounds
{
  double lo;
  double hi;
};

struct EstimationModel
{
  int                T     = 3;
  double             delta = 0.95;
  double             v_s   = 0.0;
  double             v_lo  = 1e-4;
  double             v_hi  = 1200.0;
  ParamBounds        mu_bounds{1.0, 7.0};
  ParamBounds        sigma_bounds{0.01, 3.0};
  ParamBounds        K_bounds{0.0, 15.0};
  EquilibriumOptions solver{512, 1e-10, 1e-8, false};
};

struct AuctionParams
{
  double mu;
  double sigma;
  double K;
};

struct AuctionObservation
{
  long                id         = 0;
  int                 round_sold = 0;  // 0: failed every round
  double              price      = std::nan("");
  int                 entrants   = 0;  // in the transaction round
  int                 N          = 1;
  std::vector<double> reserves;
  Covariates          X;

  /// Throws std::invalid_argument for impossible records.
  void validate(int T) const;
};

using Dataset = std::vector<AuctionObservation>;

/// Truncated normal helpers accurate far into either tail. A vanishing (or
/// non-finite) scale returns the index clamped to [lo, hi].
double trn_sample(double m, double s, double lo, double hi, double u);
double trn_log_pdf(double x, double m, double s, double lo, double hi);
double trn_mean(double m, double s, double lo, double hi);
/// log of the standard normal mass on [a, b].
double log_normal_mass(double a, double b);

AuctionParams draw_primitives(HyperParams const &B, Covariates const &X, Rng &rng,
                              EstimationModel const &model = {});
/// log phi(Lambda | B, X): sum of the three truncated normal log densities.
double log_hyper_density(AuctionParams const &L, HyperParams const &B, Covariates const &X,
                         EstimationModel const &model = {});

/// Auction environment implied by Lambda for one observation.
AuctionPrimitives auction_primitives(AuctionParams const &L, int N, std::vector<double> reserves,
                                     EstimationModel const &model = {});

/// Scenario likelihood of y given Lambda and its equilibrium thresholds;
/// -inf for outcomes the equilibrium rules out.
double outcome_log_likelihood(AuctionObservation const &y, AuctionParams const &L,
                              ThresholdSequence const &thr, EstimationModel const &model = {});
inline double outcome_likelihood(AuctionObservation const &y, AuctionParams const &L,
                                 ThresholdSequence const &thr, EstimationModel const &model = {})
{
  return std::exp(outcome_log_likelihood(y, L, thr, model));
}

/// Importance-sampling draws shared by every candidate B.
struct DrawBank
{
  HyperParams                B0;
  std::uint64_t              seed = 0;
  int                        S    = 0;
  long                       P    = 0;
  std::vector<AuctionParams> lambda;  // [i * S + s]
  std::vector<double>        log_g;
  std::vector<double>        log_L;
  std::vector<unsigned char> ok;      // 0: equilibrium solve failed
  long                       failures = 0;

  std::uint64_t key() const;
};

std::uint64_t bank_key(HyperParams const &B0, std::uint64_t seed, int S, long P);

/// Draw Lambda_is ~ phi(.|B0, X_i), solve each equilibrium once, store the
/// outcome likelihoods. With `cache_path`, a bank with a matching key is
/// loaded instead, and a fresh bank is written there.
DrawBank precompute_draws(HyperParams const &B0, Dataset const &data, int S, std::uint64_t seed,
                          EstimationModel const &model = {}, int workers = 1,
                          std::string const &cache_path = {});

void                    save_bank(DrawBank const &bank, std::string const &path);
std::optional<DrawBank> load_bank(std::string const &path, std::uint64_t expected_key);

struct LoglikDiagnostics
{
  long                floored = 0;  // observations with zero simulated likelihood
  std::vector<double> ess;          // importance-weight effective sample size per auction
};

/// Importance-weighted simulated log-likelihood; floored observations
/// contribute log(1e-300).
double simulated_loglik(HyperParams const &B, Dataset const &data, DrawBank const &bank,
                        EstimationModel const &model = {}, LoglikDiagnostics *diag = nullptr);

struct NelderMeadOptions
{
  int    max_iter = 3000;
  int    restarts = 2;
  double ftol     = 1e-7;
  double xtol     = 1e-7;
};

struct NelderMeadResult
{
  std::vector<double> x;
  double              f          = 0.0;
  int                 iterations = 0;
  bool                converged  = false;
};

/// Derivative-free maximization with adaptive coefficients and restarts
/// from the incumbent.
NelderMeadResult nelder_mead_max(std::function<double(std::vector<double> const &)> const &f,
                                 std::vector<double> x0, std::vector<double> const &step,
                                 NelderMeadOptions const &opts = {});

struct FitSettings
{
  int               S       = 1000;
  std::uint64_t     seed    = 1;
  int               rounds  = 3;  // bank redraws recentred at the incumbent
  /// The estimate is the mean (optimizer coordinates) of the last
  /// `average_last` round optima; -1 means rounds / 2, at least 1.
  int               average_last = -1;
  int               workers = 1;
  NelderMeadOptions optimizer;
  std::string       cache_dir;  // empty: no persistence
};

struct FitResult
{
  HyperParams         B;
  double              loglik = 0.0;
  std::vector<double> trace;  // final loglik of each round
  std::vector<HyperParams> incumbents;  // optimum of each round
  bool                converged  = false;
  int                 iterations = 0;
  long                floored    = 0;
  long                solver_failures = 0;
  double              ess_mean = 0.0;
  double              ess_min  = 0.0;
};

FitResult fit(Dataset const &data, HyperParams const &B0, FitSettings const &settings,
              EstimationModel const &model = {});

struct ImpliedMeans
{
  double mu;
  double sigma;
  double K;
};
/// Sample mean over auctions of E[Lambda | B, X_i].
ImpliedMeans implied_means(HyperParams const &B, Dataset const &data,
                           EstimationModel const &model = {});

struct GeneratorSettings
{
  double log_assess_mean = 4.5056;
  double log_assess_sd   = 0.751;
  double area_mean       = 1.30;
  double area_sd         = 0.46;
  double area_min        = 0.2;
  double log_dist_mean   = 0.8755;  // log 2.4
  double log_dist_sd     = 1.0;
  int    N_base          = 3;
  double N_extra_mean    = 6.58;
  double N_extra_var     = 36.0;
  int    N_max           = 60;
  double r1_lo           = 0.8;  // r1 / assessed price
  double r1_hi           = 1.0;
  double decline         = 0.8;  // r2 / r1; later rounds keep r2
  double K_scale         = 1.0;
};

/// Auctions drawn from the model at B_true; `truth` (optional) receives
/// each auction's Lambda.
Dataset generate_synthetic(HyperParams const &B_true, long P, std::uint64_t seed,
                           GeneratorSettings const &gen = {}, EstimationModel const &model = {},
                           std::vector<AuctionParams> *truth = nullptr);

/// Columns id, round_sold, deal_price, entrants, N, r1..rT, log_assess,
/// area_100m2, log_dist. Values are written round-trip exact.
void    write_dataset_csv(std::ostream &os, Dataset const &data, int T);
Dataset read_dataset_csv(std::istream &is, int T);

}  // namespace recauction
