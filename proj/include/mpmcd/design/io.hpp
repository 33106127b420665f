#pragma once

#include <fstream>
#include <string>

#include "json.hpp"
#include "mpmcd/core/errors.hpp"
#include "mpmcd/design/sdf_lerp.hpp"

namespace mpmcd {

/// Columnar primitive record: {"sdf": [n], "s": [n], "r": [[K] x n],
/// "f_euler": [[1 or 3] x n]}.
template <int D>
nlohmann::json primitive_to_json(const DesignPrimitive<D>& p) {
  nlohmann::json j;
  j["sdf"] = p.sdf;
  j["s"] = p.s;
  auto r = nlohmann::json::array();
  for (Eigen::Index c = 0; c < p.r.cols(); ++c) {
    r.push_back(std::vector<Real>(p.r.col(c).data(), p.r.col(c).data() + p.r.rows()));
  }
  j["r"] = r;
  auto f = nlohmann::json::array();
  for (const auto& e : p.f_euler) f.push_back(std::vector<Real>(e.data(), e.data() + e.size()));
  j["f_euler"] = f;
  return j;
}

template <int D>
DesignPrimitive<D> primitive_from_json(const nlohmann::json& j) {
  for (const char* key : {"sdf", "s", "r", "f_euler"}) {
    if (!j.contains(key)) throw ConfigError(std::string("primitive record lacks '") + key + "'");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k != "sdf" && k != "s" && k != "r" && k != "f_euler") {
      throw ConfigError("unknown primitive field '" + k + "'");
    }
  }
  DesignPrimitive<D> p;
  try {
    p.sdf = j.at("sdf").get<std::vector<Real>>();
    p.s = j.at("s").get<std::vector<Real>>();
    const auto r = j.at("r").get<std::vector<std::vector<Real>>>();
    const auto f = j.at("f_euler").get<std::vector<std::vector<Real>>>();
    const std::size_t n = p.sdf.size();
    if (p.s.size() != n || r.size() != n || f.size() != n) {
      throw SizeMismatch("primitive columns have different lengths");
    }
    const int K = n > 0 ? static_cast<int>(r[0].size()) : 0;
    p.r = MatX(K, static_cast<Eigen::Index>(n));
    for (std::size_t c = 0; c < n; ++c) {
      if (static_cast<int>(r[c].size()) != K) throw SizeMismatch("ragged membership rows");
      for (int k = 0; k < K; ++k) p.r(k, static_cast<Eigen::Index>(c)) = r[c][k];
      if (static_cast<int>(f[c].size()) != euler_dim<D>()) {
        throw SizeMismatch("f_euler entries need " + std::to_string(euler_dim<D>()) + " angles");
      }
      typename DesignPrimitive<D>::Euler e;
      for (int a = 0; a < euler_dim<D>(); ++a) e[a] = f[c][a];
      p.f_euler.push_back(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed primitive record: ") + e.what());
  }
  return p;
}

template <int D>
DesignPrimitive<D> load_primitive(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open primitive file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("primitive file " + path + ": " + e.what());
  }
  return primitive_from_json<D>(j);
}

}  // namespace mpmcd
