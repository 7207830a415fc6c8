#pragma once

#include <nlohmann/json.hpp>

#include "kvda/oracle/battery.hpp"
#include "kvda/oracle/fixed_point.hpp"
#include "kvda/oracle/verify_search.hpp"
#include "kvda/search/search.hpp"

namespace kvda {

struct OracleCheckOptions {
  std::size_t mdps = 100;
  std::size_t search_mdps = 20;
  std::size_t search_iterations = 2000;
  std::uint64_t seed = 0;
  /// Fault injection for exercising the checker: negates every KVDA offset
  /// before the soundness check.
  bool inject_sign_flip = false;
};

struct PropertyResult {
  std::string name;
  std::size_t checked = 0;
  std::size_t passed = 0;
  std::size_t minimum = 0;  // required passes

  bool ok() const { return passed >= minimum && (checked == passed || name == "strict_coarsening"); }
};

struct OracleCheckReport {
  std::vector<PropertyResult> properties;

  bool ok() const {
    return std::all_of(properties.begin(), properties.end(), [](const auto& p) { return p.ok(); });
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["ok"] = ok();
    j["properties"] = nlohmann::json::array();
    for (const auto& p : properties) {
      j["properties"].push_back(
          {{"name", p.name}, {"checked", p.checked}, {"passed", p.passed}, {"minimum", p.minimum}, {"ok", p.ok()}});
    }
    return j;
  }
};

/// Runs the exact-abstraction property battery:
///   four_state         the three-class reference instance
///   asap_soundness     ASAP classes have equal optimal values
///   kvda_soundness     KVDA offsets equal optimal value differences
///   coarsening         every ASAP class lies inside a KVDA class
///   strict_coarsening  KVDA is strictly coarser on at least one instance
///   search_exactness   fully expanded OGA/KVDA search graphs agree with Q*
/// strict_coarsening only needs its minimum; every other property must hold
/// on every instance checked.
inline OracleCheckReport oracle_check(const OracleCheckOptions& opt = {}) {
  OracleCheckReport rep;
  {
    PropertyResult p{"four_state", 1, 0, 1};
    const auto mdp = make_four_state_mdp();
    const auto asap = asap_fixed_point(mdp);
    auto kvda = kvda_fixed_point(mdp);
    if (opt.inject_sign_flip) {
      for (auto& d : kvda.state_offset) d = -d;
    }
    const bool good = count_non_trivial(asap.state_class) + count_non_trivial(asap.q_class) == 0 &&
                      count_non_trivial(kvda.state_class) + count_non_trivial(kvda.q_class) == 3 &&
                      std::abs(std::abs(kvda.d_s(1, 2)) - 1.0) <= kOracleTolerance &&
                      check_soundness(mdp, kvda, value_iteration(mdp)).violations == 0;
    p.passed = good;
    rep.properties.push_back(p);
  }

  PropertyResult asap_sound{"asap_soundness", 0, 0, opt.mdps};
  PropertyResult kvda_sound{"kvda_soundness", 0, 0, opt.mdps};
  PropertyResult coarse{"coarsening", 0, 0, opt.mdps};
  PropertyResult strict{"strict_coarsening", 0, 0, 1};
  for (const auto& mdp : oracle_battery(opt.mdps, opt.seed)) {
    const auto values = value_iteration(mdp);
    const auto asap = asap_fixed_point(mdp);
    auto kvda = kvda_fixed_point(mdp);
    if (opt.inject_sign_flip) {
      for (auto& d : kvda.q_offset) d = -d;
      for (auto& d : kvda.state_offset) d = -d;
    }
    ++asap_sound.checked;
    asap_sound.passed += asap.converged && check_soundness(mdp, asap, values).violations == 0;
    ++kvda_sound.checked;
    kvda_sound.passed += kvda.converged && check_soundness(mdp, kvda, values).violations == 0;
    ++coarse.checked;
    const bool coarser = refines(asap.state_class, kvda.state_class) && refines(asap.q_class, kvda.q_class);
    coarse.passed += coarser;
    ++strict.checked;
    strict.passed += coarser && !(same_partition(asap.state_class, kvda.state_class) &&
                                  same_partition(asap.q_class, kvda.q_class));
  }
  rep.properties.push_back(asap_sound);
  rep.properties.push_back(kvda_sound);
  rep.properties.push_back(coarse);
  rep.properties.push_back(strict);

  PropertyResult exact{"search_exactness", 0, 0, 2 * opt.search_mdps};
  for (std::size_t i = 0; i < opt.search_mdps; ++i) {
    RandomMdpOptions o;
    o.seed = opt.seed + 1000 + i;
    o.n_states = 15;
    const auto mdp = random_explicit_mdp(o);
    for (auto mode : {AbstractionMode::oga, AbstractionMode::kvda}) {
      SearchParams p;
      p.mode = mode;
      p.iterations = opt.search_iterations;
      p.seed = i;
      SearchTree tree(mdp, mdp.handle(0), p);
      tree.run();
      ++exact.checked;
      exact.passed += verify_search_against_oracle(mdp, tree).ok();
    }
  }
  rep.properties.push_back(exact);
  return rep;
}

}  // namespace kvda
