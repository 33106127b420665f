#pragma once

#include <string>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/core/types.hpp"

namespace mpmcd {

enum class BoundaryCondition { Sticky, Slip, Separate, Friction };

inline const char* to_string(BoundaryCondition bc) {
  switch (bc) {
    case BoundaryCondition::Sticky: return "Sticky";
    case BoundaryCondition::Slip: return "Slip";
    case BoundaryCondition::Separate: return "Separate";
    case BoundaryCondition::Friction: return "Friction";
  }
  return "?";
}

inline BoundaryCondition boundary_condition_from_string(const std::string& s) {
  for (auto bc : {BoundaryCondition::Sticky, BoundaryCondition::Slip, BoundaryCondition::Separate,
                  BoundaryCondition::Friction}) {
    if (s == to_string(bc)) return bc;
  }
  throw ConfigError("unknown boundary condition '" + s + "'");
}

template <int D>
struct SimConfig {
  Real dt = 2e-4;
  int substeps_per_control = 10;
  Vec<D> gravity = Vec<D>::Zero();

  // Grid spans [0, domain]^D with grid_cells cells per axis.
  Real domain = 1.0;
  int grid_cells = 64;

  // Mass cutoff relative to the reference particle mass; decode time only.
  Real tau_m = 1e-3;

  bool deterministic = true;
  int threads = 1;

  BoundaryCondition terrain_bc = BoundaryCondition::Friction;
  Real terrain_friction = 0.5;
  BoundaryCondition wall_bc = BoundaryCondition::Separate;
  int wall_cells = 3;

  // Muscle target is actuation_offset + a_p, with a_p = u . r_p.
  Real actuation_offset = 1.0;
  Real muscle_stiffness = 50.0;

  // dt <= cfl * dx / v_max is checked each substep (warning only).
  Real cfl = 0.5;
  bool check_finite = true;

  Real dx() const { return domain / grid_cells; }
  Real inv_dx() const { return grid_cells / domain; }

  void validate() const {
    if (!(dt > 0)) throw ConfigError("dt must be positive");
    if (substeps_per_control < 1) throw ConfigError("substeps_per_control must be >= 1");
    if (grid_cells < 4) throw ConfigError("grid_cells must be >= 4");
    if (!(domain > 0)) throw ConfigError("domain must be positive");
    if (tau_m < 0) throw ConfigError("tau_m must be nonnegative");
    if (terrain_friction < 0) throw ConfigError("friction coefficient must be nonnegative");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (wall_cells < 0) throw ConfigError("wall_cells must be >= 0");
  }
};

}  // namespace mpmcd
