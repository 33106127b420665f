#pragma once

#include <memory>
#include <string>

#include "mpmcd/autodiff/adjoint.hpp"
#include "mpmcd/core/types.hpp"
#include "mpmcd/sim/particles.hpp"

namespace mpmcd {

/// Maps (control step, time, state) to the K-dim action vector u. The same u
/// drives every substep of a control step.
template <int D>
class Controller {
 public:
  virtual ~Controller() = default;

  virtual std::string kind() const = 0;
  virtual int num_actuators() const = 0;
  virtual VecX params() const = 0;
  virtual void set_params(const VecX& p) = 0;
  int num_params() const { return static_cast<int>(params().size()); }

  virtual VecX act(int control_step, Real t, const ParticleSystem<D>& ps) const = 0;

  /// Accumulates d(ubar . u)/d(params) into grad; closed-loop controllers
  /// also add the state cotangent into state_bar when it is non-null.
  virtual void act_vjp(int control_step, Real t, const ParticleSystem<D>& ps, const VecX& ubar,
                       VecX& grad, ParticleAdjoint<D>* state_bar) const = 0;

  virtual std::unique_ptr<Controller> clone() const = 0;
};

/// Coordinate-wise action bound.
inline constexpr Real kActionBound = 0.3;

}  // namespace mpmcd
