#pragma once

#include <string>
#include <vector>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/core/parallel.hpp"
#include "mpmcd/core/types.hpp"
#include "mpmcd/sim/stepper.hpp"

namespace mpmcd {

/// Cotangents of every differentiable particle field. State fields (x, v, F,
/// C) are per-time; design fields (m, s, r, f) accumulate over the rollout.
template <int D>
struct ParticleAdjoint {
  std::vector<Vec<D>> x;
  std::vector<Vec<D>> v;
  std::vector<Mat<D>> F;
  std::vector<Mat<D>> C;
  std::vector<Real> m;
  std::vector<Real> s;
  MatX r;
  std::vector<Vec<D>> f;

  static ParticleAdjoint zeros_like(const ParticleSystem<D>& ps) {
    ParticleAdjoint a;
    const std::size_t n = ps.size();
    a.x.assign(n, Vec<D>::Zero());
    a.v.assign(n, Vec<D>::Zero());
    a.F.assign(n, Mat<D>::Zero());
    a.C.assign(n, Mat<D>::Zero());
    a.m.assign(n, 0.0);
    a.s.assign(n, 0.0);
    a.r = MatX::Zero(ps.r.rows(), ps.r.cols());
    a.f.assign(n, Vec<D>::Zero());
    return a;
  }

  std::size_t size() const { return x.size(); }

  void check_matches(const ParticleSystem<D>& ps) const {
    const std::size_t n = ps.size();
    if (x.size() != n || v.size() != n || F.size() != n || C.size() != n || m.size() != n ||
        s.size() != n || f.size() != n || r.rows() != ps.r.rows() ||
        static_cast<std::size_t>(r.cols()) != n) {
      throw ShapeMismatch("adjoint has " + std::to_string(x.size()) + " particles, primal has " +
                          std::to_string(n));
    }
  }

  void scale(Real a) {
    for (auto& e : x) e *= a;
    for (auto& e : v) e *= a;
    for (auto& e : F) e *= a;
    for (auto& e : C) e *= a;
    for (auto& e : m) e *= a;
    for (auto& e : s) e *= a;
    r *= a;
    for (auto& e : f) e *= a;
  }
};

namespace detail {

/// Grid quantities of one substep that the backward pass needs.
template <int D>
struct GridTrace {
  std::vector<Real> mass;
  std::vector<Vec<D>> mom;     // P2G momentum
  std::vector<Vec<D>> v_out;   // after boundary conditions
};

template <int D>
GridTrace<D> forward_grid(const ParticleSystem<D>& ps, GridField<D>& grid,
                          const std::vector<Real>& act, const SimConfig<D>& cfg) {
  grid.clear();
  p2g<D>(ps, grid, act, cfg);
  GridTrace<D> tr;
  tr.mass = grid.mass;
  tr.mom = grid.mom;
  grid_update<D>(grid, cfg);
  tr.v_out = grid.mom;
  return tr;
}

}  // namespace detail

/// Reverse-mode adjoint of one substep.
///
/// `primal_in` is the exact state before the substep and `act` its per-particle
/// actuation. `adj` holds the cotangent of the post-substep state on entry and
/// the cotangent of the pre-substep state on exit; design cotangents (m, s, r,
/// f) are accumulated in place. Returns the per-particle actuation cotangent.
template <int D>
std::vector<Real> backward_substep(const ParticleSystem<D>& primal_in, const std::vector<Real>& act,
                                   ParticleAdjoint<D>& adj, GridField<D>& grid,
                                   const SimConfig<D>& cfg) {
  adj.check_matches(primal_in);
  const auto& ps = primal_in;
  const std::size_t n = ps.size();
  const Real dx = cfg.dx();
  const Real inv_dx = cfg.inv_dx();
  const Real dt = cfg.dt;
  const Real k4 = 4.0 * inv_dx * inv_dx;
  const std::size_t nodes = grid.num_nodes();

  const auto trace = detail::forward_grid<D>(ps, grid, act, cfg);

  // Output-state cotangents, consumed below.
  const std::vector<Vec<D>> xbar_out = adj.x;
  const std::vector<Vec<D>> vbar_out = adj.v;
  const std::vector<Mat<D>> Fbar_out = adj.F;
  const std::vector<Mat<D>> Cbar_out = adj.C;

  std::vector<Vec<D>> xbar(n, Vec<D>::Zero());
  std::vector<Mat<D>> Fbar(n, Mat<D>::Zero());

  // ---- G2P backward: particle cotangents -> grid velocity cotangents.
  const int workers = std::max(1, cfg.threads);
  std::vector<std::vector<Vec<D>>> gv_bar_w(workers, std::vector<Vec<D>>(nodes, Vec<D>::Zero()));
  parallel_ranges(n, workers, [&](std::size_t b, std::size_t e, int w) {
    auto& gv_bar = gv_bar_w[w];
    for (std::size_t p = b; p < e; ++p) {
      const auto st = Stencil<D>::make(ps.x[p], inv_dx);
      Vec<D> vnew = Vec<D>::Zero();
      Mat<D> Cnew = Mat<D>::Zero();
      for (int k = 0; k < Stencil<D>::size(); ++k) {
        const IVec<D> o = Stencil<D>::offset(k);
        const Real wgt = st.weight(o);
        const Vec<D> dpos = (o.template cast<Real>() - st.frac) * dx;
        const Vec<D>& gv = trace.v_out[grid.index(st.base + o)];
        vnew += wgt * gv;
        Cnew += (k4 * wgt) * gv * dpos.transpose();
      }
      const auto& mat = ps.materials[ps.material_id[p]];
      const Mat<D> Fn = (Mat<D>::Identity() + dt * Cnew) * ps.F[p];

      // post-step projection
      Mat<D> Fn_bar = Fbar_out[p];
      if (mat.is_fluid()) {
        const Real J = Fn.determinant();
        Fn_bar = (std::pow(J, 1.0 / D) / D) * Fbar_out[p].trace() * Fn.inverse().transpose();
      }
      // plastic projection uses a straight-through adjoint

      Vec<D> vbar = vbar_out[p] + dt * xbar_out[p];
      const Mat<D> Cbar = Cbar_out[p] + dt * Fn_bar * ps.F[p].transpose();
      Fbar[p] += (Mat<D>::Identity() + dt * Cnew).transpose() * Fn_bar;
      Vec<D> xb = xbar_out[p];

      for (int k = 0; k < Stencil<D>::size(); ++k) {
        const IVec<D> o = Stencil<D>::offset(k);
        const Real wgt = st.weight(o);
        const Vec<D> dpos = (o.template cast<Real>() - st.frac) * dx;
        const std::size_t idx = grid.index(st.base + o);
        const Vec<D>& gv = trace.v_out[idx];
        const Vec<D> Cbar_dpos = Cbar * dpos;
        gv_bar[idx] += wgt * vbar + (k4 * wgt) * Cbar_dpos;
        const Real wbar = vbar.dot(gv) + k4 * gv.dot(Cbar_dpos);
        const Vec<D> dpos_bar = (k4 * wgt) * (Cbar.transpose() * gv);
        xb -= dpos_bar;
        xb += wbar * st.weight_grad(o) * inv_dx;
      }
      xbar[p] = xb;
    }
  });
  std::vector<Vec<D>> gv_bar = std::move(gv_bar_w[0]);
  for (int w = 1; w < workers; ++w) {
    for (std::size_t i = 0; i < nodes; ++i) gv_bar[i] += gv_bar_w[w][i];
  }

  // ---- grid update backward: velocity cotangent -> (mass, momentum) cotangents.
  std::vector<Real> gm_bar(nodes, 0.0);
  std::vector<Vec<D>> gp_bar(nodes, Vec<D>::Zero());
  for (std::size_t i = 0; i < nodes; ++i) {
    const Real mi = trace.mass[i];
    if (mi <= 0) continue;
    const Vec<D> vn = trace.mom[i] / mi;
    const Vec<D> vg = vn + dt * cfg.gravity;
    const bool terrain = grid.sdf[i] <= 0;
    const Vec<D> vt = terrain ? apply_terrain_bc<D>(vg, grid.normal[i], cfg.terrain_bc,
                                                     cfg.terrain_friction)
                              : vg;
    Vec<D> b = gv_bar[i];
    if (grid.wall_cells > 0) {
      const unsigned mask = wall_mask<D>(grid.coord(i), grid.dims, grid.wall_cells, vt, cfg.wall_bc);
      b = apply_wall_mask<D>(b, mask);
    }
    if (terrain) {
      b = apply_terrain_bc_vjp<D>(vg, grid.normal[i], cfg.terrain_bc, cfg.terrain_friction, b);
    }
    gp_bar[i] = b / mi;
    gm_bar[i] = -b.dot(vn) / mi;
  }

  // ---- P2G backward: grid cotangents -> particle cotangents.
  std::vector<Real> abar(n, 0.0);
  const Real kstress = -k4 * dt;
  parallel_ranges(n, workers, [&](std::size_t b, std::size_t e, int) {
    for (std::size_t p = b; p < e; ++p) {
      const auto st = Stencil<D>::make(ps.x[p], inv_dx);
      const auto& mat = ps.materials[ps.material_id[p]];
      const Real mp = ps.m[p];
      const Real rho = mat.density;
      const Real a_p = act.empty() ? 0.0 : act[p];
      const Mat<D>& F = ps.F[p];
      const Mat<D> Pmat = pk1_stress<D>(F, mat);
      Mat<D> P = ps.s[p] * Pmat;
      const bool actuated = ps.is_actuated(p);
      const Real target = cfg.actuation_offset + a_p;
      if (actuated) P += muscle_pk1<D>(F, ps.f[p], cfg.muscle_stiffness, target);
      const Mat<D> PFt = P * F.transpose();
      const Mat<D> A = kstress * (mp / rho) * PFt + mp * ps.C[p];
      const Vec<D> mv = mp * ps.v[p];

      Real mbar = 0;
      Vec<D> vbar = Vec<D>::Zero();
      Mat<D> Abar = Mat<D>::Zero();
      Vec<D> xb = Vec<D>::Zero();
      for (int k = 0; k < Stencil<D>::size(); ++k) {
        const IVec<D> o = Stencil<D>::offset(k);
        const Real wgt = st.weight(o);
        const Vec<D> dpos = (o.template cast<Real>() - st.frac) * dx;
        const std::size_t idx = grid.index(st.base + o);
        const Vec<D>& pb = gp_bar[idx];
        const Real mb = gm_bar[idx];
        mbar += wgt * (mb + ps.v[p].dot(pb));
        vbar += (wgt * mp) * pb;
        Abar += wgt * pb * dpos.transpose();
        xb -= wgt * (A.transpose() * pb);
        const Real wbar = mp * mb + pb.dot(mv + A * dpos);
        xb += wbar * st.weight_grad(o) * inv_dx;
      }
      // A = kstress (m / rho) P F^T + m C
      adj.C[p] = mp * Abar;
      mbar += ddot(Abar, ps.C[p]) + kstress / rho * ddot(Abar, PFt);
      const Mat<D> Sbar = kstress * (mp / rho) * Abar;
      const Mat<D> Pbar = Sbar * F;
      Mat<D> Fb = Sbar.transpose() * P;
      adj.s[p] += ddot(Pbar, Pmat);
      Fb += ps.s[p] * pk1_differential<D>(F, Pbar, mat);
      if (actuated) {
        Fb += muscle_pk1_differential<D>(F, ps.f[p], cfg.muscle_stiffness, target, Pbar);
        const auto mpart = muscle_pk1_param_vjp<D>(F, ps.f[p], cfg.muscle_stiffness, target, Pbar);
        abar[p] = mpart.abar;
        adj.f[p] += mpart.fbar;
      }
      adj.m[p] += mbar;
      adj.v[p] = vbar;
      adj.x[p] = xbar[p] + xb;
      adj.F[p] = Fbar[p] + Fb;
    }
  });
  return abar;
}

}  // namespace mpmcd
