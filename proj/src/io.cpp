#include "recauction/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace recauction {

std::string fmt6(double x)
{
  if (std::isnan(x))
  {
    return "";
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string fmt_exact(double x)
{
  if (std::isnan(x))
  {
    return "";
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string join6(std::vector<double> const &xs, char sep)
{
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i)
  {
    if (i)
    {
      out += sep;
    }
    out += fmt6(xs[i]);
  }
  return out;
}

void require_keys(Json const &obj, std::initializer_list<char const *> allowed,
                  std::string const &where)
{
  if (!obj.is_object())
  {
    throw ConfigError(where + ": expected an object");
  }
  for (auto it = obj.begin(); it != obj.end(); ++it)
  {
    bool ok = std::any_of(allowed.begin(), allowed.end(),
                          [&](char const *k) { return it.key() == k; });
    if (!ok)
    {
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
  }
}

double get_number(Json const &obj, char const *key, std::string const &where)
{
  auto it = obj.find(key);
  if (it == obj.end())
  {
    throw ConfigError(where + ": missing '" + key + "'");
  }
  if (!it->is_number())
  {
    throw ConfigError(where + ": '" + key + "' must be a number");
  }
  return it->get<double>();
}

int get_int(Json const &obj, char const *key, std::string const &where)
{
  auto it = obj.find(key);
  if (it == obj.end())
  {
    throw ConfigError(where + ": missing '" + key + "'");
  }
  if (!it->is_number_integer())
  {
    throw ConfigError(where + ": '" + key + "' must be an integer");
  }
  return it->get<int>();
}

std::vector<double> get_numbers(Json const &obj, char const *key, std::string const &where)
{
  auto it = obj.find(key);
  if (it == obj.end())
  {
    throw ConfigError(where + ": missing '" + key + "'");
  }
  if (!it->is_array())
  {
    throw ConfigError(where + ": '" + key + "' must be an array");
  }
  std::vector<double> out;
  for (auto const &x : *it)
  {
    if (!x.is_number())
    {
      throw ConfigError(where + ": '" + key + "' must hold numbers");
    }
    out.push_back(x.get<double>());
  }
  return out;
}

ValueDistribution parse_distribution(Json const &j)
{
  std::string const where = "distribution";
  require_keys(j, {"family", "params"}, where);
  if (!j.contains("family") || !j["family"].is_string())
  {
    throw ConfigError(where + ": 'family' must be a string");
  }
  auto const fam = j["family"].get<std::string>();
  auto const ps  = get_numbers(j, "params", where);
  auto need      = [&](std::size_t n) {
    if (ps.size() != n)
    {
      throw ConfigError(where + ": family '" + fam + "' takes " + std::to_string(n) + " params");
    }
  };
  try
  {
    if (fam == "uniform")
    {
      need(2);
      return ValueDistribution::uniform(ps[0], ps[1]);
    }
    if (fam == "power")
    {
      need(1);
      return ValueDistribution::power(ps[0]);
    }
    if (fam == "trln")
    {
      need(4);
      return ValueDistribution::trunc_lognormal(ps[0], ps[1], ps[2], ps[3]);
    }
    if (fam == "trn")
    {
      need(4);
      return ValueDistribution::trunc_normal(ps[0], ps[1], ps[2], ps[3]);
    }
  }
  catch (std::invalid_argument const &e)
  {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ": unknown family '" + fam + "'");
}

Json distribution_to_json(ValueDistribution const &d)
{
  return Json{{"family", to_string(d.family())}, {"params", d.params()}};
}

AuctionPrimitives parse_primitives(Json const &j, bool need_reserves)
{
  std::string const where = "primitives";
  require_keys(j, {"distribution", "N", "T", "delta", "v_s", "K", "reserves"}, where);
  if (!j.contains("distribution"))
  {
    throw ConfigError(where + ": missing 'distribution'");
  }
  AuctionPrimitives p{parse_distribution(j["distribution"]), 2, 1, 0.95, 0.0, 0.0, {}};
  p.N     = get_int(j, "N", where);
  p.T     = get_int(j, "T", where);
  p.delta = get_number(j, "delta", where);
  p.v_s   = j.contains("v_s") ? get_number(j, "v_s", where) : 0.0;
  p.K     = get_number(j, "K", where);
  if (j.contains("reserves"))
  {
    p.reserves = get_numbers(j, "reserves", where);
  }
  else if (need_reserves)
  {
    throw ConfigError(where + ": missing 'reserves'");
  }
  else
  {
    p.reserves.assign(static_cast<std::size_t>(std::max(p.T, 0)), p.v_s);
  }
  try
  {
    p.validate();
  }
  catch (std::invalid_argument const &e)
  {
    throw ConfigError(where + ": " + e.what());
  }
  return p;
}

EquilibriumOptions parse_solver_options(Json const &j)
{
  EquilibriumOptions o;
  require_keys(j, {"grid_points", "tol", "residual_tol"}, "solver");
  if (j.contains("grid_points"))
  {
    o.grid_points = get_int(j, "grid_points", "solver");
  }
  if (j.contains("tol"))
  {
    o.tol = get_number(j, "tol", "solver");
  }
  if (j.contains("residual_tol"))
  {
    o.residual_tol = get_number(j, "residual_tol", "solver");
  }
  if (o.grid_points < 3 || !(o.tol > 0.0) || !(o.residual_tol > 0.0))
  {
    throw ConfigError("solver: grid_points >= 3 and positive tolerances required");
  }
  return o;
}

Json read_json_file(std::string const &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw ConfigError("cannot open config '" + path + "'");
  }
  try
  {
    return Json::parse(in);
  }
  catch (Json::parse_error const &e)
  {
    throw ConfigError("malformed JSON in '" + path + "': " + e.what());
  }
}

}  // namespace recauction
