#pragma once

#include <fstream>
#include <memory>
#include <set>

#include <nlohmann/json.hpp>

#include "kvda/core/determinize.hpp"
#include "kvda/envs/connect4.hpp"
#include "kvda/envs/game_of_life.hpp"
#include "kvda/envs/sailing_wind.hpp"
#include "kvda/envs/sysadmin.hpp"
#include "kvda/oracle/explicit_mdp.hpp"

namespace kvda {

/// A configured domain instance. Episodes of a determinized environment run
/// on determinize(model, episode seed); the search sees that wrapper too.
struct Environment {
  std::string id;  // e.g. "d-sysadmin"
  std::shared_ptr<const Mdp> model;
  bool determinized = true;
  std::uint32_t search_horizon = 50;

  /// The model an episode with this seed runs on.
  std::shared_ptr<const Mdp> episode_model(std::uint64_t episode_seed) const {
    return determinized ? determinize(model, episode_seed) : model;
  }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw ConfigError("unknown environment key '" + key + "'");
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("environment key '") + key + "': " + e.what());
  }
}

}  // namespace detail

/// Builds an environment from its JSON description. Keys (all optional
/// except "environment"):
///   environment      sysadmin | game_of_life | sailing_wind | connect4 | explicit
///   determinized     bool, default true
///   horizon          episode horizon (default 50; 200 for connect4)
///   search_horizon   search depth limit (default = horizon; 50 for connect4)
///   sysadmin:        machines, reboot_probability, reboot_penalty
///   game_of_life:    width, height, noise, set_cost, initial (row strings)
///   sailing_wind:    size, initial_wind
///   explicit:        file (text-format MDP; relative to `base_dir`)
inline Environment make_environment(const nlohmann::json& j, const std::string& base_dir = ".") {
  if (!j.is_object() || !j.contains("environment")) throw ConfigError("environment config needs an 'environment' key");
  const auto kind = detail::get_or<std::string>(j, "environment", "");
  Environment env;
  env.determinized = detail::get_or(j, "determinized", true);
  std::uint32_t horizon = detail::get_or<std::uint32_t>(j, "horizon", kind == "connect4" ? 200 : 50);
  if (kind == "sysadmin") {
    detail::check_keys(j, {"environment", "determinized", "horizon", "search_horizon", "machines",
                           "reboot_probability", "reboot_penalty"});
    SysAdminConfig c;
    c.machines = detail::get_or<std::size_t>(j, "machines", c.machines);
    c.reboot_probability = detail::get_or(j, "reboot_probability", c.reboot_probability);
    c.reboot_penalty = detail::get_or(j, "reboot_penalty", c.reboot_penalty);
    c.horizon = horizon;
    env.model = std::make_shared<SysAdmin>(c);
  } else if (kind == "game_of_life") {
    detail::check_keys(j, {"environment", "determinized", "horizon", "search_horizon", "width", "height", "noise",
                           "set_cost", "initial"});
    GameOfLifeConfig c;
    c.width = detail::get_or<std::size_t>(j, "width", c.width);
    c.height = detail::get_or<std::size_t>(j, "height", c.height);
    c.noise = detail::get_or(j, "noise", c.noise);
    c.set_cost = detail::get_or(j, "set_cost", c.set_cost);
    c.initial = detail::get_or(j, "initial", c.initial);
    c.horizon = horizon;
    env.model = std::make_shared<GameOfLife>(c);
  } else if (kind == "sailing_wind") {
    detail::check_keys(j, {"environment", "determinized", "horizon", "search_horizon", "size", "initial_wind"});
    SailingWindConfig c;
    c.size = detail::get_or<std::size_t>(j, "size", c.size);
    c.initial_wind = detail::get_or(j, "initial_wind", c.initial_wind);
    c.horizon = horizon;
    env.model = std::make_shared<SailingWind>(c);
  } else if (kind == "connect4") {
    detail::check_keys(j, {"environment", "determinized", "horizon", "search_horizon"});
    env.model = make_connect4(horizon);
    env.determinized = false;  // already deterministic
  } else if (kind == "explicit") {
    detail::check_keys(j, {"environment", "determinized", "horizon", "search_horizon", "file"});
    const auto file = detail::get_or<std::string>(j, "file", "");
    std::ifstream in(base_dir + "/" + file);
    if (!in) throw ConfigError("cannot open explicit MDP file '" + file + "'");
    auto mdp = std::make_shared<ExplicitMdp>(read_explicit_mdp(in));
    horizon = mdp->horizon();
    env.model = std::move(mdp);
  } else {
    throw ConfigError("unknown environment '" + kind + "'");
  }
  env.search_horizon = detail::get_or<std::uint32_t>(j, "search_horizon", kind == "connect4" ? 50 : horizon);
  if (env.search_horizon == 0) throw ConfigError("search_horizon must be positive");
  const bool deterministic_kind = kind == "connect4";
  env.id = (env.determinized || deterministic_kind ? "d-" : "s-") + kind;
  return env;
}

inline Environment load_environment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open environment config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("environment config '" + path + "': " + e.what());
  }
  const auto slash = path.find_last_of('/');
  return make_environment(j, slash == std::string::npos ? "." : path.substr(0, slash));
}

}  // namespace kvda
