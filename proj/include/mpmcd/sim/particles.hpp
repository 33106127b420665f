#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/core/types.hpp"
#include "mpmcd/sim/material.hpp"

namespace mpmcd {

enum class ParticleLabel : std::uint8_t { Robot = 0, Cover = 1 };

/// Lagrangian particle state plus the per-particle design attributes
/// (stiffness scale s, muscle membership r, fiber direction f).
///
/// Rest volume is m / density, so a particle with reduced mass also carries
/// proportionally less stress.
template <int D>
struct ParticleSystem {
  std::vector<Vec<D>> x;
  std::vector<Vec<D>> v;
  std::vector<Mat<D>> F;
  std::vector<Mat<D>> C;
  std::vector<Real> m;
  std::vector<Real> s;
  MatX r;  // K x n
  std::vector<Vec<D>> f;
  std::vector<int> material_id;
  std::vector<ParticleLabel> label;

  std::vector<MaterialParams> materials;

  std::size_t size() const { return x.size(); }
  int num_actuators() const { return static_cast<int>(r.rows()); }

  bool is_actuated(std::size_t p) const {
    return label[p] == ParticleLabel::Robot && r.rows() > 0;
  }

  void set_num_actuators(int k) { r = MatX::Zero(k, static_cast<Eigen::Index>(size())); }

  /// Appends one particle at rest with F = I, C = 0.
  std::size_t add(const Vec<D>& pos, Real mass, int material, ParticleLabel lbl,
                  Real stiffness = 1.0) {
    x.push_back(pos);
    v.push_back(Vec<D>::Zero());
    F.push_back(Mat<D>::Identity());
    C.push_back(Mat<D>::Zero());
    m.push_back(mass);
    s.push_back(stiffness);
    f.push_back(Vec<D>::Zero());
    material_id.push_back(material);
    label.push_back(lbl);
    r.conservativeResize(r.rows(), static_cast<Eigen::Index>(x.size()));
    if (r.rows() > 0) r.col(r.cols() - 1).setZero();
    return x.size() - 1;
  }

  Real volume(std::size_t p) const { return m[p] / materials[material_id[p]].density; }

  std::vector<std::size_t> robot_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < size(); ++p) {
      if (label[p] == ParticleLabel::Robot) out.push_back(p);
    }
    return out;
  }

  /// Approximate heap footprint of the per-particle arrays.
  std::size_t state_bytes() const {
    const std::size_t n = size();
    return n * (3 * sizeof(Vec<D>) + 2 * sizeof(Mat<D>) + 2 * sizeof(Real) + sizeof(int) +
                sizeof(ParticleLabel)) +
           static_cast<std::size_t>(r.size()) * sizeof(Real);
  }

  void check_consistent() const {
    const std::size_t n = size();
    if (v.size() != n || F.size() != n || C.size() != n || m.size() != n || s.size() != n ||
        f.size() != n || material_id.size() != n || label.size() != n ||
        static_cast<std::size_t>(r.cols()) != n) {
      throw SizeMismatch("particle arrays have inconsistent lengths");
    }
    for (int id : material_id) {
      if (id < 0 || static_cast<std::size_t>(id) >= materials.size()) {
        throw SizeMismatch("material id out of range");
      }
    }
  }
};

}  // namespace mpmcd
