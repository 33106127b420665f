#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"
#include "mpmcd/core/errors.hpp"
#include "mpmcd/core/types.hpp"
#include "mpmcd/environment/heightmap.hpp"
#include "mpmcd/optimize/codesign.hpp"
#include "mpmcd/sim/config.hpp"

namespace mpmcd::cli {

using Json = nlohmann::json;
using Pair = std::array<Real, 2>;

struct SceneConfig {
  std::string biome = "Ground";
  std::uint64_t seed = 0;
  std::string terrain = "flat";  // none | flat | perlin
  Real ground_height = 0.1;
  HeightmapParams heightmap;     // perlin only
  Real fluid_level = -1;         // < 0 keeps the biome default
  Pair offset{0.5, 0.0};
  bool drop_to_ground = true;
  Real clearance = 0.01;
  Real youngs = 1e3;
  Real poisson = 0.3;
  Real stiffness_floor = 0;
};

struct DesignConfig {
  std::string representation = "box";  // box | particle | implicit | cppn | sdf_lerp
  Pair lo{-0.1, -0.04};
  Pair hi{0.1, 0.04};
  Real spacing = 0;  // 0: half a grid cell
  int actuators = 2;
  std::vector<std::string> primitives;  // sdf_lerp primitive files
  std::string params;                   // params file to load, optional
};

struct ControllerConfig {
  std::string type = "sine";  // sine | open_loop | zero
  Real scale = 0.1;           // std of random sine weights
};

struct TaskConfig {
  std::string type = "speed";  // speed | turning | waypoint
  Pair direction{1, 0};
  Pair start{0.5, 0.15};
  Pair target{0.7, 0.15};
  Real duration = 1.0;
};

struct SweepConfig {
  std::string group = "design";  // design | control
  int index = 0;
  Real lo = 0;
  Real hi = 1;
  int points = 64;
};

struct OptimizerConfig {
  std::string mode = "codesign";
  std::string algorithm = "adam";  // adam | cmaes
  int budget = 250;
  Real lr = 0.01;
  int seeds = 1;
  int checkpoint = 16;
  long substeps = 400;
  Real sigma0 = 0.1;
  int lambda = 10;
  int snapshot_every = 0;  // 0 disables design snapshots
  SweepConfig sweep;
};

struct SimSection {
  Real dt = 5e-4;
  int substeps_per_control = 10;
  Pair gravity{0, -9.8};
  Real domain = 1.0;
  int grid_cells = 32;
  Real tau_m = 1e-3;
  std::string terrain_bc = "Friction";
  Real terrain_friction = 0.5;
  std::string wall_bc = "Separate";
  int wall_cells = 3;
  Real actuation_offset = 1.0;
  Real muscle_stiffness = 50.0;
  Real cfl = 0.5;
};

struct ExperimentConfig {
  SceneConfig scene;
  DesignConfig design;
  ControllerConfig controller;
  TaskConfig task;
  SimSection sim;
  OptimizerConfig optimizer;

  SimConfig<2> sim_config(bool deterministic = true, int threads = 1) const {
    SimConfig<2> c;
    c.dt = sim.dt;
    c.substeps_per_control = sim.substeps_per_control;
    c.gravity = Vec<2>(sim.gravity[0], sim.gravity[1]);
    c.domain = sim.domain;
    c.grid_cells = sim.grid_cells;
    c.tau_m = sim.tau_m;
    c.terrain_bc = boundary_condition_from_string(sim.terrain_bc);
    c.terrain_friction = sim.terrain_friction;
    c.wall_bc = boundary_condition_from_string(sim.wall_bc);
    c.wall_cells = sim.wall_cells;
    c.actuation_offset = sim.actuation_offset;
    c.muscle_stiffness = sim.muscle_stiffness;
    c.cfl = sim.cfl;
    c.deterministic = deterministic;
    c.threads = threads;
    c.validate();
    return c;
  }
};

namespace detail {

/// Reads one JSON object, tracking which keys were consumed so leftovers can
/// be rejected.
class Reader {
 public:
  Reader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const Json& v = j_.at(key);
    check_type<T>(v, key);
    try {
      out = v.get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path(key) + ": " + e.what());
    }
  }

  const Json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown key '" + path(k) + "'");
    }
  }

 private:
  template <class T>
  void check_type(const Json& v, const char* key) const {
    bool ok = true;
    if constexpr (std::is_same_v<T, bool>) {
      ok = v.is_boolean();
    } else if constexpr (std::is_integral_v<T>) {
      ok = v.is_number_integer() && (std::is_signed_v<T> || v.is_number_unsigned());
    } else if constexpr (std::is_floating_point_v<T>) {
      ok = v.is_number();
    } else if constexpr (std::is_same_v<T, std::string>) {
      ok = v.is_string();
    } else if constexpr (std::is_same_v<T, Pair>) {
      ok = v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number();
    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
      ok = v.is_array();
      for (const auto& e : v) ok = ok && e.is_string();
    }
    if (!ok) throw ConfigError(path(key) + " has the wrong type");
  }

  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline Json to_json(const HeightmapParams& h) {
  return {{"samples", h.samples},       {"extent", h.extent},       {"h_min", h.h_min},
          {"h_max", h.h_max},           {"amplitude", h.amplitude}, {"base_frequency", h.base_frequency},
          {"octaves", h.octaves},       {"lacunarity", h.lacunarity}, {"persistence", h.persistence}};
}

inline Json to_json(const ExperimentConfig& c) {
  const auto& s = c.scene;
  const auto& d = c.design;
  const auto& o = c.optimizer;
  const auto& m = c.sim;
  return {
      {"scene",
       {{"biome", s.biome}, {"seed", s.seed}, {"terrain", s.terrain}, {"ground_height", s.ground_height},
        {"heightmap", to_json(s.heightmap)}, {"fluid_level", s.fluid_level}, {"offset", s.offset},
        {"drop_to_ground", s.drop_to_ground}, {"clearance", s.clearance}, {"youngs", s.youngs},
        {"poisson", s.poisson}, {"stiffness_floor", s.stiffness_floor}}},
      {"design",
       {{"representation", d.representation}, {"lo", d.lo}, {"hi", d.hi}, {"spacing", d.spacing},
        {"actuators", d.actuators}, {"primitives", d.primitives}, {"params", d.params}}},
      {"controller", {{"type", c.controller.type}, {"scale", c.controller.scale}}},
      {"task",
       {{"type", c.task.type}, {"direction", c.task.direction}, {"start", c.task.start},
        {"target", c.task.target}, {"duration", c.task.duration}}},
      {"sim",
       {{"dt", m.dt}, {"substeps_per_control", m.substeps_per_control}, {"gravity", m.gravity},
        {"domain", m.domain}, {"grid_cells", m.grid_cells}, {"tau_m", m.tau_m},
        {"terrain_bc", m.terrain_bc}, {"terrain_friction", m.terrain_friction}, {"wall_bc", m.wall_bc},
        {"wall_cells", m.wall_cells}, {"actuation_offset", m.actuation_offset},
        {"muscle_stiffness", m.muscle_stiffness}, {"cfl", m.cfl}}},
      {"optimizer",
       {{"mode", o.mode}, {"algorithm", o.algorithm}, {"budget", o.budget}, {"lr", o.lr},
        {"seeds", o.seeds}, {"checkpoint", o.checkpoint}, {"substeps", o.substeps},
        {"sigma0", o.sigma0}, {"lambda", o.lambda}, {"snapshot_every", o.snapshot_every},
        {"sweep",
         {{"group", o.sweep.group}, {"index", o.sweep.index}, {"lo", o.sweep.lo}, {"hi", o.sweep.hi},
          {"points", o.sweep.points}}}}},
  };
}

inline void validate(const ExperimentConfig& c);

/// Strict parse: unknown keys and mistyped values are ConfigErrors; absent
/// keys keep their defaults.
inline ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  detail::Reader top(j, "config");
  if (const Json* v = top.sub("scene")) {
    auto& s = c.scene;
    detail::Reader r(*v, "scene");
    r.get("biome", s.biome);
    r.get("seed", s.seed);
    r.get("terrain", s.terrain);
    r.get("ground_height", s.ground_height);
    if (const Json* h = r.sub("heightmap")) {
      detail::Reader hr(*h, "scene.heightmap");
      auto& hp = s.heightmap;
      hr.get("samples", hp.samples);
      hr.get("extent", hp.extent);
      hr.get("h_min", hp.h_min);
      hr.get("h_max", hp.h_max);
      hr.get("amplitude", hp.amplitude);
      hr.get("base_frequency", hp.base_frequency);
      hr.get("octaves", hp.octaves);
      hr.get("lacunarity", hp.lacunarity);
      hr.get("persistence", hp.persistence);
      hr.finish();
    }
    r.get("fluid_level", s.fluid_level);
    r.get("offset", s.offset);
    r.get("drop_to_ground", s.drop_to_ground);
    r.get("clearance", s.clearance);
    r.get("youngs", s.youngs);
    r.get("poisson", s.poisson);
    r.get("stiffness_floor", s.stiffness_floor);
    r.finish();
  }
  if (const Json* v = top.sub("design")) {
    auto& d = c.design;
    detail::Reader r(*v, "design");
    r.get("representation", d.representation);
    r.get("lo", d.lo);
    r.get("hi", d.hi);
    r.get("spacing", d.spacing);
    r.get("actuators", d.actuators);
    r.get("primitives", d.primitives);
    r.get("params", d.params);
    r.finish();
  }
  if (const Json* v = top.sub("controller")) {
    detail::Reader r(*v, "controller");
    r.get("type", c.controller.type);
    r.get("scale", c.controller.scale);
    r.finish();
  }
  if (const Json* v = top.sub("task")) {
    detail::Reader r(*v, "task");
    r.get("type", c.task.type);
    r.get("direction", c.task.direction);
    r.get("start", c.task.start);
    r.get("target", c.task.target);
    r.get("duration", c.task.duration);
    r.finish();
  }
  if (const Json* v = top.sub("sim")) {
    auto& m = c.sim;
    detail::Reader r(*v, "sim");
    r.get("dt", m.dt);
    r.get("substeps_per_control", m.substeps_per_control);
    r.get("gravity", m.gravity);
    r.get("domain", m.domain);
    r.get("grid_cells", m.grid_cells);
    r.get("tau_m", m.tau_m);
    r.get("terrain_bc", m.terrain_bc);
    r.get("terrain_friction", m.terrain_friction);
    r.get("wall_bc", m.wall_bc);
    r.get("wall_cells", m.wall_cells);
    r.get("actuation_offset", m.actuation_offset);
    r.get("muscle_stiffness", m.muscle_stiffness);
    r.get("cfl", m.cfl);
    r.finish();
  }
  if (const Json* v = top.sub("optimizer")) {
    auto& o = c.optimizer;
    detail::Reader r(*v, "optimizer");
    r.get("mode", o.mode);
    r.get("algorithm", o.algorithm);
    r.get("budget", o.budget);
    r.get("lr", o.lr);
    r.get("seeds", o.seeds);
    r.get("checkpoint", o.checkpoint);
    r.get("substeps", o.substeps);
    r.get("sigma0", o.sigma0);
    r.get("lambda", o.lambda);
    r.get("snapshot_every", o.snapshot_every);
    if (const Json* w = r.sub("sweep")) {
      detail::Reader sr(*w, "optimizer.sweep");
      sr.get("group", o.sweep.group);
      sr.get("index", o.sweep.index);
      sr.get("lo", o.sweep.lo);
      sr.get("hi", o.sweep.hi);
      sr.get("points", o.sweep.points);
      sr.finish();
    }
    r.finish();
  }
  top.finish();
  validate(c);
  return c;
}

/// Value checks that do not need a scene.
inline void validate(const ExperimentConfig& c) {
  const auto& o = c.optimizer;
  codesign_mode_from_string(o.mode);
  if (o.budget < 0) throw ConfigError("optimizer.budget must be nonnegative");
  if (!(o.lr > 0)) throw ConfigError("optimizer.lr must be positive");
  if (o.seeds < 1) throw ConfigError("optimizer.seeds must be >= 1");
  if (o.checkpoint < 1) throw ConfigError("optimizer.checkpoint must be >= 1");
  if (o.substeps < 0) throw ConfigError("optimizer.substeps must be nonnegative");
  if (o.lambda < 2) throw ConfigError("optimizer.lambda must be >= 2");
  if (!(o.sigma0 > 0)) throw ConfigError("optimizer.sigma0 must be positive");
  if (o.snapshot_every < 0) throw ConfigError("optimizer.snapshot_every must be nonnegative");
  if (o.algorithm != "adam" && o.algorithm != "cmaes") throw ConfigError("optimizer.algorithm must be adam or cmaes");
  if (o.sweep.points < 1) throw ConfigError("optimizer.sweep.points must be >= 1");
  if (o.sweep.group != "design" && o.sweep.group != "control")
    throw ConfigError("optimizer.sweep.group must be design or control");
  if (c.design.actuators < 1) throw ConfigError("design.actuators must be >= 1");
  for (int a = 0; a < 2; ++a) {
    if (!(c.design.lo[a] < c.design.hi[a])) throw ConfigError("design.lo must lie below design.hi");
  }
  const std::set<std::string> reprs{"box", "particle", "implicit", "cppn", "sdf_lerp"};
  if (!reprs.count(c.design.representation))
    throw ConfigError("unknown design.representation '" + c.design.representation + "'");
  const std::set<std::string> ctls{"sine", "open_loop", "zero"};
  if (!ctls.count(c.controller.type)) throw ConfigError("unknown controller.type '" + c.controller.type + "'");
  const std::set<std::string> tasks{"speed", "turning", "waypoint"};
  if (!tasks.count(c.task.type)) throw ConfigError("unknown task.type '" + c.task.type + "'");
  const std::set<std::string> terrains{"none", "flat", "perlin"};
  if (!terrains.count(c.scene.terrain)) throw ConfigError("unknown scene.terrain '" + c.scene.terrain + "'");
  c.sim_config();
}

inline ExperimentConfig config_from_string(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

}  // namespace mpmcd::cli
