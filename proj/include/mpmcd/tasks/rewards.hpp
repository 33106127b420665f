#pragma once

#include <cmath>
#include <vector>

#include "mpmcd/autodiff/adjoint.hpp"
#include "mpmcd/core/errors.hpp"
#include "mpmcd/sim/material.hpp"
#include "mpmcd/sim/particles.hpp"

namespace mpmcd {

namespace detail {

/// Robot particles with positive mass and their total mass.
template <int D>
std::vector<std::size_t> live_robot(const ParticleSystem<D>& ps, Real& total) {
  std::vector<std::size_t> idx;
  total = 0;
  for (std::size_t p = 0; p < ps.size(); ++p) {
    if (ps.label[p] == ParticleLabel::Robot && ps.m[p] > 0) {
      idx.push_back(p);
      total += ps.m[p];
    }
  }
  if (idx.empty()) throw EmptyRobot("no robot particle with positive mass");
  return idx;
}

/// Linear map taking a relative position to its counter-clockwise tangent:
/// the planar quarter turn in 2D, up x (.) in 3D.
template <int D>
Mat<D> tangent_map(const Vec<D>& up) {
  Mat<D> A;
  if constexpr (D == 2) {
    (void)up;
    A << 0, -1, 1, 0;
  } else {
    A << 0, -up[2], up[1], up[2], 0, -up[0], -up[1], up[0], 0;
  }
  return A;
}

}  // namespace detail

template <int D>
Vec<D> robot_centroid(const ParticleSystem<D>& ps) {
  Real M;
  const auto idx = detail::live_robot(ps, M);
  Vec<D> c = Vec<D>::Zero();
  for (auto p : idx) c += ps.m[p] * ps.x[p];
  return c / M;
}

template <int D>
Vec<D> robot_mean_velocity(const ParticleSystem<D>& ps) {
  Real M;
  const auto idx = detail::live_robot(ps, M);
  Vec<D> c = Vec<D>::Zero();
  for (auto p : idx) c += ps.m[p] * ps.v[p];
  return c / M;
}

/// Mass-weighted mean robot velocity projected on `dir`.
template <int D>
Real reward_speed(const ParticleSystem<D>& ps, const Vec<D>& dir) {
  return robot_mean_velocity(ps).dot(dir);
}

template <int D>
void reward_speed_grad(const ParticleSystem<D>& ps, const Vec<D>& dir, Real scale,
                       ParticleAdjoint<D>& adj) {
  Real M;
  const auto idx = detail::live_robot(ps, M);
  const Real r = reward_speed(ps, dir);
  for (auto p : idx) {
    adj.v[p] += scale * ps.m[p] / M * dir;
    adj.m[p] += scale * (ps.v[p].dot(dir) - r) / M;
  }
}

/// Mass-weighted mean of each particle's velocity along its counter-clockwise
/// tangent about `up` through the centroid. In 2D the axis is out of plane.
template <int D>
Real reward_turning(const ParticleSystem<D>& ps, const Vec<D>& up = Vec<D>::UnitY()) {
  Real M;
  const auto idx = detail::live_robot(ps, M);
  const Vec<D> xc = robot_centroid(ps);
  const Mat<D> A = detail::tangent_map<D>(up);
  Real r = 0;
  for (auto p : idx) {
    const Vec<D> u = A * (ps.x[p] - xc);
    const Real n = u.norm();
    if (n < 1e-9) continue;
    r += ps.m[p] * ps.v[p].dot(u) / n;
  }
  return r / M;
}

template <int D>
void reward_turning_grad(const ParticleSystem<D>& ps, const Vec<D>& up, Real scale,
                         ParticleAdjoint<D>& adj) {
  Real M;
  const auto idx = detail::live_robot(ps, M);
  const Vec<D> xc = robot_centroid(ps);
  const Mat<D> A = detail::tangent_map<D>(up);
  const Real r = reward_turning(ps, up);
  Vec<D> xc_bar = Vec<D>::Zero();
  for (auto p : idx) {
    const Vec<D> u = A * (ps.x[p] - xc);
    const Real n = u.norm();
    adj.m[p] -= scale * r / M;
    if (n < 1e-9) continue;
    const Vec<D> tau = u / n;
    adj.v[p] += scale * ps.m[p] / M * tau;
    adj.m[p] += scale * ps.v[p].dot(tau) / M;
    const Vec<D> ubar = scale * ps.m[p] / M * (ps.v[p] - tau * tau.dot(ps.v[p])) / n;
    const Vec<D> xbar = A.transpose() * ubar;
    adj.x[p] += xbar;
    xc_bar -= xbar;
  }
  for (auto p : idx) {
    adj.x[p] += ps.m[p] / M * xc_bar;
    adj.m[p] += (ps.x[p] - xc).dot(xc_bar) / M;
  }
}

/// Negated squared distance between the robot centroid and the target.
template <int D>
Real reward_waypoint(const ParticleSystem<D>& ps, const Vec<D>& target) {
  return -(target - robot_centroid(ps)).squaredNorm();
}

template <int D>
void reward_waypoint_grad(const ParticleSystem<D>& ps, const Vec<D>& target, Real scale,
                          ParticleAdjoint<D>& adj) {
  Real M;
  const auto idx = detail::live_robot(ps, M);
  const Vec<D> xc = robot_centroid(ps);
  const Vec<D> xc_bar = 2 * scale * (target - xc);
  for (auto p : idx) {
    adj.x[p] += ps.m[p] / M * xc_bar;
    adj.m[p] += (ps.x[p] - xc).dot(xc_bar) / M;
  }
}

/// Unit vector from the tail markers' centroid to the head markers' centroid.
template <int D>
Vec<D> estimate_heading(const ParticleSystem<D>& ps, const std::vector<std::size_t>& head,
                        const std::vector<std::size_t>& tail) {
  if (head.empty() || tail.empty()) throw CoincidentMarkers("head and tail markers are required");
  Vec<D> h = Vec<D>::Zero(), t = Vec<D>::Zero();
  for (auto p : head) h += ps.x[p];
  for (auto p : tail) t += ps.x[p];
  const Vec<D> d = h / static_cast<Real>(head.size()) - t / static_cast<Real>(tail.size());
  if (d.norm() < 1e-12) throw CoincidentMarkers("head and tail markers coincide");
  return d.normalized();
}

/// Velocity in the particle's material frame: R^T v with F = R S.
template <int D>
Vec<D> derotated_velocity(const Mat<D>& F, const Vec<D>& v) {
  return polar_decompose<D>(F).R.transpose() * v;
}

struct TrackingWeights {
  Real magnitude = 0.1;
  Real direction = 0.9;
};

/// Mass-weighted mean of the de-rotated velocities projected on the heading.
template <int D>
Vec<D> projected_mean_velocity(const ParticleSystem<D>& ps, const Vec<D>& heading) {
  Real M;
  const auto idx = detail::live_robot(ps, M);
  Real s = 0;
  for (auto p : idx) s += ps.m[p] * derotated_velocity<D>(ps.F[p], ps.v[p]).dot(heading);
  return (s / M) * heading;
}

/// w_mag * -(|v_target| - |vbar|)^2 + w_dir * v_target . vbar / |vbar|; the
/// direction term is 0 when |vbar| <= 1e-12.
template <int D>
Real tracking_reward(const Vec<D>& v_target, const Vec<D>& vbar, const TrackingWeights& w = {}) {
  const Real nv = vbar.norm();
  const Real mag = -std::pow(v_target.norm() - nv, 2);
  const Real dir = nv > 1e-12 ? v_target.dot(vbar) / nv : 0.0;
  return w.magnitude * mag + w.direction * dir;
}

template <int D>
Real reward_velocity_tracking(const ParticleSystem<D>& ps, const Vec<D>& v_target,
                              const std::vector<std::size_t>& head,
                              const std::vector<std::size_t>& tail, const TrackingWeights& w = {}) {
  const Vec<D> d = estimate_heading(ps, head, tail);
  return tracking_reward<D>(v_target, projected_mean_velocity(ps, d), w);
}

/// Gradient through the velocities and masses; the heading and the polar
/// rotations are held fixed. The direction term is piecewise constant in the
/// velocities and contributes nothing.
template <int D>
void reward_velocity_tracking_grad(const ParticleSystem<D>& ps, const Vec<D>& v_target,
                                   const std::vector<std::size_t>& head,
                                   const std::vector<std::size_t>& tail, const TrackingWeights& w,
                                   Real scale, ParticleAdjoint<D>& adj) {
  Real M;
  const auto idx = detail::live_robot(ps, M);
  const Vec<D> d = estimate_heading(ps, head, tail);
  Real s = 0;
  std::vector<Vec<D>> Rd(ps.size());
  for (auto p : idx) {
    Rd[p] = polar_decompose<D>(ps.F[p]).R * d;
    s += ps.m[p] * ps.v[p].dot(Rd[p]);
  }
  s /= M;
  const Real sgn = s > 0 ? 1.0 : (s < 0 ? -1.0 : 0.0);
  const Real sbar = scale * w.magnitude * 2 * (v_target.norm() - std::abs(s)) * sgn;
  for (auto p : idx) {
    adj.v[p] += sbar * ps.m[p] / M * Rd[p];
    adj.m[p] += sbar * (ps.v[p].dot(Rd[p]) - s) / M;
  }
}

}  // namespace mpmcd
