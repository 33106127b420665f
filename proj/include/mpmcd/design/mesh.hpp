#pragma once

#include <array>
#include <cmath>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/core/types.hpp"

namespace mpmcd {

struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> triangles;

  /// Every undirected edge shared by exactly two triangles.
  bool is_closed() const {
    std::map<std::pair<int, int>, int> edges;
    for (const auto& t : triangles) {
      for (int e = 0; e < 3; ++e) {
        int a = t[e], b = t[(e + 1) % 3];
        if (a > b) std::swap(a, b);
        ++edges[{a, b}];
      }
    }
    for (const auto& [edge, c] : edges) {
      if (c != 2) return false;
    }
    return !triangles.empty();
  }

  TriangleMesh translated(const Eigen::Vector3d& t) const {
    TriangleMesh m = *this;
    for (auto& v : m.vertices) v += t;
    return m;
  }
};

/// Parses the `v x y z` and `f a b c ...` records of an OBJ file. Face
/// entries may carry `/vt/vn` suffixes and negative (relative) indices;
/// polygons are fan-triangulated. Other records are ignored.
inline TriangleMesh parse_obj(std::istream& in) {
  TriangleMesh mesh;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      Eigen::Vector3d v;
      if (!(ss >> v[0] >> v[1] >> v[2])) {
        throw MeshError("bad vertex record on line " + std::to_string(lineno));
      }
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ss >> tok) {
        const int i = std::stoi(tok.substr(0, tok.find('/')));
        const int nv = static_cast<int>(mesh.vertices.size());
        const int z = i > 0 ? i - 1 : nv + i;
        if (i == 0 || z < 0 || z >= nv) {
          throw MeshError("face index out of range on line " + std::to_string(lineno));
        }
        idx.push_back(z);
      }
      if (idx.size() < 3) throw MeshError("face with fewer than 3 vertices on line " + std::to_string(lineno));
      for (std::size_t j = 1; j + 1 < idx.size(); ++j) mesh.triangles.push_back({idx[0], idx[j], idx[j + 1]});
    }
  }
  return mesh;
}

inline TriangleMesh parse_obj_string(const std::string& text) {
  std::istringstream in(text);
  return parse_obj(in);
}

namespace detail {

/// Moller-Trumbore ray/triangle test; true when the ray hits at t > 0.
inline bool ray_hits(const Eigen::Vector3d& o, const Eigen::Vector3d& dir, const Eigen::Vector3d& a,
                     const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  const Eigen::Vector3d e1 = b - a, e2 = c - a;
  const Eigen::Vector3d pv = dir.cross(e2);
  const Real det = e1.dot(pv);
  if (std::abs(det) < 1e-14) return false;
  const Real inv = 1.0 / det;
  const Eigen::Vector3d tv = o - a;
  const Real u = tv.dot(pv) * inv;
  if (u < 0 || u > 1) return false;
  const Eigen::Vector3d qv = tv.cross(e1);
  const Real v = dir.dot(qv) * inv;
  if (v < 0 || u + v > 1) return false;
  return e2.dot(qv) * inv > 0;
}

}  // namespace detail

/// Inside test by crossing parity along a slightly tilted +x ray (the tilt
/// keeps axis-aligned lattices off triangle edges).
inline bool mesh_contains(const TriangleMesh& mesh, const Eigen::Vector3d& p) {
  static const Eigen::Vector3d dir = Eigen::Vector3d(1.0, 1.3e-3, 2.9e-3).normalized();
  int hits = 0;
  for (const auto& t : mesh.triangles) {
    if (detail::ray_hits(p, dir, mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]])) {
      ++hits;
    }
  }
  return hits % 2 == 1;
}

struct MeshOccupancy {
  std::vector<Real> m;  // m0 inside, 0 outside
  std::vector<bool> inside;
  bool closed = true;
};

/// Marks base particles inside the mesh. An open mesh only produces a
/// warning since parity is then unreliable.
inline MeshOccupancy ingest_mesh(const TriangleMesh& mesh, const std::vector<Vec<3>>& base,
                                 Real m0 = 1.0, std::ostream* warn = &std::cerr) {
  MeshOccupancy out;
  out.closed = mesh.is_closed();
  if (!out.closed && warn) *warn << "warning: mesh is not closed; inside test may be wrong\n";
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(1e300), hi = -lo;
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  out.inside.resize(base.size());
  out.m.resize(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    const auto& p = base[i];
    const bool in_box = (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
    out.inside[i] = in_box && mesh_contains(mesh, p);
    out.m[i] = out.inside[i] ? m0 : 0.0;
  }
  return out;
}

}  // namespace mpmcd
