#pragma once

#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "recauction/equilibrium.hpp"

namespace recauction {

using Json = nlohmann::json;

/// Malformed or schema-violating configuration.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// 6 significant digits, the precision of every report CSV.
std::string fmt6(double x);
std::string join6(std::vector<double> const &xs, char sep);
/// Round-trip exact rendering (17 significant digits).
std::string fmt_exact(double x);

/// Throws ConfigError if `obj` is not an object or carries keys outside
/// `allowed`; `where` names the enclosing section in the message.
void require_keys(Json const &obj, std::initializer_list<char const *> allowed,
                  std::string const &where);

double              get_number(Json const &obj, char const *key, std::string const &where);
int                 get_int(Json const &obj, char const *key, std::string const &where);
std::vector<double> get_numbers(Json const &obj, char const *key, std::string const &where);

/// {"family": "uniform"|"power"|"trln"|"trn", "params": [...]}
ValueDistribution   parse_distribution(Json const &j);
Json                distribution_to_json(ValueDistribution const &d);

/// {"distribution", "N", "T", "delta", "v_s", "K", "reserves"}; reserves
/// optional unless `need_reserves`. Missing reserves default to v_s.
AuctionPrimitives   parse_primitives(Json const &j, bool need_reserves);

EquilibriumOptions  parse_solver_options(Json const &j);

Json                read_json_file(std::string const &path);

}  // namespace recauction
