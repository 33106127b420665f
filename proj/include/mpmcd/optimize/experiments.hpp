#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mpmcd/optimize/codesign.hpp"
#include "mpmcd/optimize/desk.hpp"

namespace mpmcd {

inline Real median(std::vector<Real> v) {
  if (v.empty()) throw ConfigError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Rewards of one seed of the desk comparison (best evaluated reward of
/// each run).
struct DeskSeedResult {
  std::uint64_t seed = 0;
  Real control_only = 0;
  Real design_only = 0;  // SDF-Lerp
  Real codesign = 0;     // SDF-Lerp
  Real cmaes = 0;        // SDF-Lerp, gradient-free, same rollout count as codesign
  std::map<std::string, Real> representation;  // design-only by representation
};

/// One seed of the swimmer study:
///  - control only: the controller is trained on a fixed fish that is not
///    among the SDF-Lerp primitives;
///  - design only: that trained controller is frozen and each
///    representation optimizes the design;
///  - co-design: SDF-Lerp and the trained controller optimized jointly;
///  - CMA-ES: the same joint problem without gradients at equal rollouts.
inline DeskSeedResult run_desk_seed(const DeskAquatic& desk, std::uint64_t seed, int budget,
                                    const std::vector<std::string>& representations = {},
                                    bool with_cmaes = true) {
  DeskSeedResult out;
  out.seed = seed;
  CodesignOptions opt;
  opt.budget = budget;

  FixedDesignDecoder<2> reference(desk.reference_fish());
  auto controller = desk.controller(seed);
  opt.mode = CodesignMode::ControlOnly;
  const auto c = run_codesign<2>(desk.env, reference, *controller, opt);
  out.control_only = c.best_reward;
  controller->set_params(c.best_control);

  auto design_only = [&](const std::string& kind) {
    auto dec = desk.decoder(kind, seed);
    auto ctl = controller->clone();
    opt.mode = CodesignMode::DesignOnly;
    return run_codesign<2>(desk.env, *dec, *ctl, opt).best_reward;
  };
  out.design_only = design_only("sdf_lerp");
  out.representation["sdf_lerp"] = out.design_only;
  for (const auto& kind : representations) {
    if (kind != "sdf_lerp") out.representation[kind] = design_only(kind);
  }

  {
    auto dec = desk.decoder("sdf_lerp", seed);
    auto ctl = controller->clone();
    opt.mode = CodesignMode::Codesign;
    const auto r = run_codesign<2>(desk.env, *dec, *ctl, opt);
    out.codesign = r.best_reward;
    if (with_cmaes) {
      auto dec2 = desk.decoder("sdf_lerp", seed);
      auto ctl2 = controller->clone();
      CmaesOptions co;
      co.mode = CodesignMode::Codesign;
      co.rollout_budget = r.rollouts;
      co.seed = seed;
      out.cmaes = run_cmaes<2>(desk.env, *dec2, *ctl2, co).best_reward;
    }
  }
  return out;
}

}  // namespace mpmcd
