#pragma once

#include <cmath>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/core/types.hpp"

namespace mpmcd {

struct AdamState {
  long t = 0;
  VecX m;
  VecX v;
  Real lr = 0.01;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;

  static AdamState for_size(Eigen::Index n, Real lr = 0.01) {
    AdamState s;
    s.m = VecX::Zero(n);
    s.v = VecX::Zero(n);
    s.lr = lr;
    return s;
  }
};

/// One bias-corrected Adam update of params (descending grad).
inline void adam_step(AdamState& st, VecX& params, const VecX& grad) {
  if (grad.size() != params.size()) throw SizeMismatch("gradient and parameter sizes differ");
  if (!grad.allFinite()) throw NonFiniteGradient("non-finite gradient passed to Adam");
  if (st.m.size() != params.size()) {
    st.m = VecX::Zero(params.size());
    st.v = VecX::Zero(params.size());
    st.t = 0;
  }
  ++st.t;
  st.m = st.beta1 * st.m + (1 - st.beta1) * grad;
  st.v = st.beta2 * st.v + (1 - st.beta2) * grad.cwiseAbs2();
  const Real c1 = 1 - std::pow(st.beta1, static_cast<Real>(st.t));
  const Real c2 = 1 - std::pow(st.beta2, static_cast<Real>(st.t));
  const VecX mhat = st.m / c1;
  const VecX vhat = st.v / c2;
  params.array() -= st.lr * mhat.array() / (vhat.array().sqrt() + st.eps);
  if (!params.allFinite()) throw NonFiniteGradient("Adam produced non-finite parameters");
}

}  // namespace mpmcd
