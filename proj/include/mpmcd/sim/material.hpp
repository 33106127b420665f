#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/core/types.hpp"

namespace mpmcd {

enum class MaterialModel {
  NeoHookean,
  FixedCorotated,
  StVK,
  WeaklyCompressibleFluid,
  DruckerPragerSand,
  SnowElastoplastic,
};

inline const char* to_string(MaterialModel m) {
  switch (m) {
    case MaterialModel::NeoHookean: return "NeoHookean";
    case MaterialModel::FixedCorotated: return "FixedCorotated";
    case MaterialModel::StVK: return "StVK";
    case MaterialModel::WeaklyCompressibleFluid: return "WeaklyCompressibleFluid";
    case MaterialModel::DruckerPragerSand: return "DruckerPragerSand";
    case MaterialModel::SnowElastoplastic: return "SnowElastoplastic";
  }
  return "?";
}

inline MaterialModel material_model_from_string(const std::string& s) {
  for (auto m : {MaterialModel::NeoHookean, MaterialModel::FixedCorotated, MaterialModel::StVK,
                 MaterialModel::WeaklyCompressibleFluid, MaterialModel::DruckerPragerSand,
                 MaterialModel::SnowElastoplastic}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown material model '" + s + "'");
}

struct MaterialParams {
  MaterialModel model = MaterialModel::NeoHookean;
  Real mu = 0.0;
  Real lambda = 0.0;
  Real bulk_modulus = 0.0;    // fluid
  Real gamma = 7.0;           // fluid Tait exponent
  Real friction_angle = 30.0; // sand, degrees
  Real theta_c = 2.5e-2;      // snow critical compression
  Real theta_s = 7.5e-3;      // snow critical stretch
  Real density = 1.0;

  static MaterialParams from_youngs(MaterialModel model, Real E, Real nu, Real density = 1.0) {
    MaterialParams p;
    p.model = model;
    p.mu = E / (2.0 * (1.0 + nu));
    p.lambda = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    p.density = density;
    return p;
  }

  static MaterialParams fluid(Real bulk_modulus, Real density = 1.0) {
    MaterialParams p;
    p.model = MaterialModel::WeaklyCompressibleFluid;
    p.bulk_modulus = bulk_modulus;
    p.density = density;
    return p;
  }

  bool is_plastic() const {
    return model == MaterialModel::DruckerPragerSand || model == MaterialModel::SnowElastoplastic;
  }
  bool is_fluid() const { return model == MaterialModel::WeaklyCompressibleFluid; }

  void validate() const {
    if (mu < 0 || lambda < 0) throw ConfigError("Lame parameters must be nonnegative");
    if (bulk_modulus < 0) throw ConfigError("bulk modulus must be nonnegative");
    if (density <= 0) throw ConfigError("density must be positive");
  }
};

template <int D>
struct Polar {
  Mat<D> R;
  Mat<D> S;
};

/// Polar decomposition F = R S with R a proper rotation.
template <int D>
inline Polar<D> polar_decompose(const Mat<D>& F) {
  Eigen::JacobiSVD<Mat<D>> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat<D> U = svd.matrixU();
  Mat<D> V = svd.matrixV();
  Vec<D> sig = svd.singularValues();
  if (U.determinant() * V.determinant() < 0) {
    U.col(D - 1) *= -1.0;
    sig[D - 1] *= -1.0;
  }
  return {U * V.transpose(), V * sig.asDiagonal() * V.transpose()};
}

/// Directional derivative of the rotation factor of F along dF.
template <int D>
inline Mat<D> polar_rotation_differential(const Polar<D>& pd, const Mat<D>& dF) {
  const Mat<D> M = pd.R.transpose() * dF;
  const Mat<D> K = M - M.transpose();
  Mat<D> Omega = Mat<D>::Zero();
  if constexpr (D == 2) {
    const Real tr = pd.S.trace();
    const Real theta = tr != 0 ? K(1, 0) / tr : 0.0;
    Omega(0, 1) = -theta;
    Omega(1, 0) = theta;
  } else {
    // axial vector of the skew part; (tr(S) I - S) w = k
    const Vec<3> k(K(2, 1), K(0, 2), K(1, 0));
    const Mat<3> A = pd.S.trace() * Mat<3>::Identity() - pd.S;
    const Vec<3> w = A.fullPivLu().solve(k);
    Omega << 0, -w[2], w[1], w[2], 0, -w[0], -w[1], w[0], 0;
  }
  return pd.R * Omega;
}

namespace detail {

template <int D>
inline void require_invertible(const Mat<D>& F, MaterialModel m) {
  const Real J = F.determinant();
  if (!(J > 0)) {
    throw NonInvertibleF(std::string(to_string(m)) + " requires det(F) > 0, got " +
                         std::to_string(J));
  }
}

}  // namespace detail

/// First Piola-Kirchhoff stress of the isotropic constitutive model.
/// Plastic models return the stress of their elastic part (fixed corotated).
template <int D>
inline Mat<D> pk1_stress(const Mat<D>& F, const MaterialParams& p) {
  const Mat<D> I = Mat<D>::Identity();
  switch (p.model) {
    case MaterialModel::NeoHookean: {
      detail::require_invertible<D>(F, p.model);
      const Real J = F.determinant();
      const Mat<D> FinvT = F.inverse().transpose();
      return p.mu * (F - FinvT) + p.lambda * std::log(J) * FinvT;
    }
    case MaterialModel::StVK: {
      detail::require_invertible<D>(F, p.model);
      const Mat<D> E = 0.5 * (F.transpose() * F - I);
      return F * (2.0 * p.mu * E + p.lambda * E.trace() * I);
    }
    case MaterialModel::WeaklyCompressibleFluid: {
      detail::require_invertible<D>(F, p.model);
      const Real J = F.determinant();
      const Real h = -p.bulk_modulus * (std::pow(J, 1.0 - p.gamma) - J);
      return h * F.inverse().transpose();
    }
    case MaterialModel::FixedCorotated:
    case MaterialModel::DruckerPragerSand:
    case MaterialModel::SnowElastoplastic: {
      const Real J = F.determinant();
      const auto pd = polar_decompose<D>(F);
      Mat<D> P = 2.0 * p.mu * (F - pd.R);
      if (p.lambda != 0) {
        // (J - 1) J F^{-T} written as (J - 1) cof(F) to stay finite when J -> 0
        Mat<D> cof;
        if constexpr (D == 2) {
          cof << F(1, 1), -F(1, 0), -F(0, 1), F(0, 0);
        } else {
          cof = J * F.inverse().transpose();
        }
        P += p.lambda * (J - 1.0) * cof;
      }
      return P;
    }
  }
  return Mat<D>::Zero();
}

/// Directional derivative dP = (dP/dF)[dF]. The stress derivative of a
/// hyperelastic model is self-adjoint, so this also maps a stress cotangent
/// to an F cotangent.
template <int D>
inline Mat<D> pk1_differential(const Mat<D>& F, const Mat<D>& dF, const MaterialParams& p) {
  const Mat<D> I = Mat<D>::Identity();
  switch (p.model) {
    case MaterialModel::NeoHookean: {
      const Real J = F.determinant();
      const Mat<D> Finv = F.inverse();
      const Mat<D> FinvT = Finv.transpose();
      const Real dlogJ = (Finv * dF).trace();
      return p.mu * dF + (p.mu - p.lambda * std::log(J)) * FinvT * dF.transpose() * FinvT +
             p.lambda * dlogJ * FinvT;
    }
    case MaterialModel::StVK: {
      const Mat<D> E = 0.5 * (F.transpose() * F - I);
      const Mat<D> dE = 0.5 * (dF.transpose() * F + F.transpose() * dF);
      return dF * (2.0 * p.mu * E + p.lambda * E.trace() * I) +
             F * (2.0 * p.mu * dE + p.lambda * dE.trace() * I);
    }
    case MaterialModel::WeaklyCompressibleFluid: {
      const Real J = F.determinant();
      const Mat<D> Finv = F.inverse();
      const Mat<D> FinvT = Finv.transpose();
      const Real k = p.bulk_modulus;
      const Real h = -k * (std::pow(J, 1.0 - p.gamma) - J);
      const Real dh = -k * ((1.0 - p.gamma) * std::pow(J, -p.gamma) - 1.0);
      const Real dJ = J * (Finv * dF).trace();
      return dh * dJ * FinvT - h * FinvT * dF.transpose() * FinvT;
    }
    case MaterialModel::FixedCorotated:
    case MaterialModel::DruckerPragerSand:
    case MaterialModel::SnowElastoplastic: {
      const auto pd = polar_decompose<D>(F);
      const Mat<D> dR = polar_rotation_differential<D>(pd, dF);
      Mat<D> dP = 2.0 * p.mu * (dF - dR);
      if (p.lambda != 0) {
        const Real J = F.determinant();
        if constexpr (D == 2) {
          Mat<D> cof;
          cof << F(1, 1), -F(1, 0), -F(0, 1), F(0, 0);
          Mat<D> dcof;
          dcof << dF(1, 1), -dF(1, 0), -dF(0, 1), dF(0, 0);
          const Real dJ = ddot(cof, dF);
          dP += p.lambda * (dJ * cof + (J - 1.0) * dcof);
        } else {
          const Mat<D> Finv = F.inverse();
          const Mat<D> cof = J * Finv.transpose();
          const Real dJ = ddot(cof, dF);
          const Mat<D> dcof = dJ * Finv.transpose() - cof * dF.transpose() * Finv.transpose();
          dP += p.lambda * (dJ * cof + (J - 1.0) * dcof);
        }
      }
      return dP;
    }
  }
  return Mat<D>::Zero();
}

/// Elastic energy density, used by tests as the finite-difference reference.
template <int D>
inline Real elastic_energy(const Mat<D>& F, const MaterialParams& p) {
  const Mat<D> I = Mat<D>::Identity();
  const Real J = F.determinant();
  switch (p.model) {
    case MaterialModel::NeoHookean: {
      const Real lj = std::log(J);
      return 0.5 * p.mu * ((F.transpose() * F).trace() - D) - p.mu * lj + 0.5 * p.lambda * lj * lj;
    }
    case MaterialModel::StVK: {
      const Mat<D> E = 0.5 * (F.transpose() * F - I);
      return p.mu * E.squaredNorm() + 0.5 * p.lambda * E.trace() * E.trace();
    }
    case MaterialModel::WeaklyCompressibleFluid: {
      // psi'(J) = -k (J^-gamma - 1)
      const Real g = p.gamma;
      return -p.bulk_modulus * (std::pow(J, 1.0 - g) / (1.0 - g) - J) +
             p.bulk_modulus * (1.0 / (1.0 - g) - 1.0);
    }
    default: {
      const auto pd = polar_decompose<D>(F);
      return p.mu * (F - pd.R).squaredNorm() + 0.5 * p.lambda * (J - 1.0) * (J - 1.0);
    }
  }
}

// ---------------------------------------------------------------------------
// Muscle: Psi = s (l - a)^2 with l = |F f|^2.

template <int D>
inline Real muscle_energy(const Mat<D>& F, const Vec<D>& f, Real s, Real a) {
  const Real l = (F * f).squaredNorm();
  return s * (l - a) * (l - a);
}

template <int D>
inline Mat<D> muscle_pk1(const Mat<D>& F, const Vec<D>& f, Real s, Real a) {
  const Vec<D> Ff = F * f;
  const Real l = Ff.squaredNorm();
  return 4.0 * s * (l - a) * Ff * f.transpose();
}

template <int D>
inline Mat<D> muscle_pk1_differential(const Mat<D>& F, const Vec<D>& f, Real s, Real a,
                                      const Mat<D>& dF) {
  const Vec<D> Ff = F * f;
  const Vec<D> dFf = dF * f;
  const Real l = Ff.squaredNorm();
  const Real dl = 2.0 * Ff.dot(dFf);
  return 4.0 * s * (dl * Ff * f.transpose() + (l - a) * dFf * f.transpose());
}

/// Cotangents of muscle_pk1 with respect to the fiber direction and the
/// actuation target, given a stress cotangent Pbar.
template <int D>
struct MusclePartials {
  Vec<D> fbar;
  Real abar;
};

template <int D>
inline MusclePartials<D> muscle_pk1_param_vjp(const Mat<D>& F, const Vec<D>& f, Real s, Real a,
                                              const Mat<D>& Pbar) {
  const Vec<D> Ff = F * f;
  const Real l = Ff.squaredNorm();
  // P = 4 s (l - a) (F f) f^T
  const Real c = 4.0 * s;
  const Real Pbar_dot = Ff.dot(Pbar * f);  // Pbar : (F f) f^T
  MusclePartials<D> out;
  out.abar = -c * Pbar_dot;
  // d/df: l depends on f via 2 F^T F f; (F f) f^T depends on f in two slots
  out.fbar = c * Pbar_dot * 2.0 * (F.transpose() * Ff) +
             c * (l - a) * (F.transpose() * (Pbar * f) + Pbar.transpose() * Ff);
  return out;
}

// ---------------------------------------------------------------------------
// Plasticity.

/// Projects a trial deformation gradient back onto the elastic region of a
/// plastic model. Non-plastic models pass through unchanged.
template <int D>
inline Mat<D> plastic_project(const Mat<D>& F, const MaterialParams& p) {
  if (!p.is_plastic()) return F;
  Eigen::JacobiSVD<Mat<D>> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat<D> U = svd.matrixU();
  const Mat<D> V = svd.matrixV();
  Vec<D> sig = svd.singularValues();
  if (p.model == MaterialModel::SnowElastoplastic) {
    bool changed = false;
    for (int a = 0; a < D; ++a) {
      const Real c = std::clamp(sig[a], 1.0 - p.theta_c, 1.0 + p.theta_s);
      changed |= c != sig[a];
      sig[a] = c;
    }
    if (!changed) return F;
    return U * sig.asDiagonal() * V.transpose();
  }
  // Drucker-Prager return mapping on the Hencky strain.
  Vec<D> eps;
  for (int a = 0; a < D; ++a) eps[a] = std::log(std::max(sig[a], 1e-12));
  const Real tr = eps.sum();
  if (tr >= 0) {
    // expansion: project to the cone apex
    return U * V.transpose();
  }
  const Vec<D> dev = eps - Vec<D>::Constant(tr / D);
  const Real dev_norm = dev.norm();
  if (dev_norm == 0) return F;
  const Real sin_phi = std::sin(p.friction_angle * std::numbers::pi / 180.0);
  const Real alpha = std::sqrt(2.0 / 3.0) * 2.0 * sin_phi / (3.0 - sin_phi);
  const Real mu = std::max(p.mu, 1e-12);
  const Real dgamma = dev_norm + (D * p.lambda + 2.0 * mu) / (2.0 * mu) * tr * alpha;
  if (dgamma <= 0) return F;
  const Vec<D> eps_new = eps - dgamma / dev_norm * dev;
  return U * eps_new.array().exp().matrix().asDiagonal() * V.transpose();
}

}  // namespace mpmcd
