#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mpmcd/core/errors.hpp"
#include "mpmcd/core/types.hpp"
#include "mpmcd/design/spec.hpp"
#include "mpmcd/optimize/codesign.hpp"

namespace mpmcd {

// Run directory layout:
//   config.json        frozen experiment config
//   log.csv            iter,reward,wall_time
//   params_best.json   {"reward", "design": [...], "control": [...]}
//   events.txt         one line per recorded event (skipped steps etc.)
//   snapshots/         design_<iter>.json every N iterations (optional)

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline std::vector<Real> to_std(const VecX& v) { return std::vector<Real>(v.data(), v.data() + v.size()); }

inline VecX from_std(const std::vector<Real>& v) {
  VecX out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

inline void write_log_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& log) {
  auto out = open_output(path);
  out.precision(17);
  out << "iter,reward,wall_time\n";
  for (const auto& r : log) out << r.iter << ',' << r.reward << ',' << r.wall_time << '\n';
}

inline nlohmann::json params_json(const VecX& design, const VecX& control, Real reward) {
  return {{"reward", reward}, {"design", to_std(design)}, {"control", to_std(control)}};
}

struct ParamsFile {
  VecX design;
  VecX control;
};

inline ParamsFile read_params(const std::filesystem::path& path) {
  const auto j = read_json(path);
  ParamsFile p;
  try {
    if (j.contains("design")) p.design = from_std(j.at("design").get<std::vector<Real>>());
    if (j.contains("control")) p.control = from_std(j.at("control").get<std::vector<Real>>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return p;
}

template <int D>
nlohmann::json design_json(const DesignSpec<D>& d) {
  nlohmann::json j;
  auto pts = nlohmann::json::array(), f = nlohmann::json::array(), r = nlohmann::json::array();
  for (std::size_t i = 0; i < d.size(); ++i) {
    pts.push_back(std::vector<Real>(d.base[i].data(), d.base[i].data() + D));
    f.push_back(std::vector<Real>(d.f[i].data(), d.f[i].data() + D));
    const VecX col = d.r.col(static_cast<Eigen::Index>(i));
    r.push_back(to_std(col));
  }
  j["base"] = pts;
  j["m"] = d.m;
  j["s"] = d.s;
  j["r"] = r;
  j["f"] = f;
  j["m0"] = d.m0;
  j["s0"] = d.s0;
  return j;
}

/// Writes log.csv, params_best.json and events.txt for a finished run.
inline void write_run(const std::filesystem::path& dir, const CodesignResult& res) {
  write_log_csv(dir / "log.csv", res.log);
  write_json(dir / "params_best.json", params_json(res.best_design, res.best_control, res.best_reward));
  auto ev = open_output(dir / "events.txt");
  for (const auto& e : res.events) ev << e << '\n';
}

}  // namespace mpmcd
