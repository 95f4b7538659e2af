#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "recauction/estimation.hpp"
#include "recauction/outcomes.hpp"

namespace recauction::cli {

enum ExitCode
{
  kOk            = 0,
  kConfigError   = 2,
  kSolverFailure = 3,
  kGoldenFailure = 4,
};

/// One row of a reproduce report.
struct GoldenCheck
{
  std::string name;
  double      expected;
  double      computed;
  double      tolerance;
  bool        pass() const;
};

std::vector<std::string> golden_targets();
/// Throws ConfigError for an unknown target.
std::vector<GoldenCheck> golden_suite(std::string const &target);
std::string              golden_csv(std::vector<GoldenCheck> const &checks);

/// Mean outcomes over synthetic primitive draws under the observed reserve
/// policy, for each horizon and entry-cost scale.
struct SyntheticCell
{
  int    T;
  double cost_scale;
  double surplus;
  double revenue;
  double failure;
};

struct SyntheticCounterfactual
{
  long                       draws = 0;
  std::vector<int>           horizons;
  std::vector<double>        cost_scales;
  std::vector<SyntheticCell> cells;  // horizon-major within each scale
  long                       solver_failures = 0;

  SyntheticCell const &at(int T, double cost_scale) const;
};

SyntheticCounterfactual synthetic_counterfactual(long draws, std::uint64_t seed,
                                                 std::vector<int> const    &horizons    = {1, 2, 3},
                                                 std::vector<double> const &cost_scales = {1.0, 1.1},
                                                 HyperParams const &B = reference_hyperparams(),
                                                 EstimationModel const &model = {});
std::string synthetic_counterfactual_csv(SyntheticCounterfactual const &sc);

/// Files are staged in memory and written only when a command succeeds.
using Outputs = std::map<std::string, std::string>;

int run(int argc, char const *const *argv);

}  // namespace recauction::cli
