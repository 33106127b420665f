#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/core/types.hpp"

namespace mpmcd {

struct GradCheckReport {
  Real max_rel_error = 0;
  Eigen::Index worst = -1;
  VecX central;
};

/// Central differences of f at p0 compared against `analytic`, entry-wise
/// relative error |a - c| / max(1e-12, |c|).
inline GradCheckReport grad_check_report(const std::function<Real(const VecX&)>& f, const VecX& p0,
                                         const VecX& analytic, Real h = 1e-5) {
  if (analytic.size() != p0.size()) throw SizeMismatch("analytic gradient size");
  GradCheckReport rep;
  rep.central.resize(p0.size());
  VecX p = p0;
  for (Eigen::Index k = 0; k < p0.size(); ++k) {
    p[k] = p0[k] + h;
    const Real fp = f(p);
    p[k] = p0[k] - h;
    const Real fm = f(p);
    p[k] = p0[k];
    const Real c = (fp - fm) / (2.0 * h);
    rep.central[k] = c;
    const Real err = std::abs(analytic[k] - c) / std::max(1e-12, std::abs(c));
    if (err > rep.max_rel_error || rep.worst < 0) {
      rep.max_rel_error = std::max(rep.max_rel_error, err);
      rep.worst = k;
    }
  }
  return rep;
}

inline Real grad_check(const std::function<Real(const VecX&)>& f, const VecX& p0,
                       const VecX& analytic, Real h = 1e-5) {
  return grad_check_report(f, p0, analytic, h).max_rel_error;
}

}  // namespace mpmcd
