#pragma once

#include <memory>
#include <string>

#include "mpmcd/core/types.hpp"
#include "mpmcd/design/spec.hpp"

namespace mpmcd {

/// A design-space representation: a flat parameter vector decoded into a
/// DesignSpec over a fixed base particle set, with a VJP back to the
/// parameters.
template <int D>
class DesignDecoder {
 public:
  virtual ~DesignDecoder() = default;
  virtual std::string kind() const = 0;
  virtual VecX params() const = 0;
  virtual void set_params(const VecX& p) = 0;
  int num_params() const { return static_cast<int>(params().size()); }
  virtual DesignSpec<D> decode() const = 0;
  /// Gradient of <g, decode()> with respect to params().
  virtual VecX vjp(const DesignGrad<D>& g) const = 0;
  virtual std::unique_ptr<DesignDecoder> clone() const = 0;
};

/// A frozen design with no parameters.
template <int D>
class FixedDesignDecoder final : public DesignDecoder<D> {
 public:
  explicit FixedDesignDecoder(DesignSpec<D> design) : design_(std::move(design)) {}
  std::string kind() const override { return "fixed"; }
  VecX params() const override { return VecX(); }
  void set_params(const VecX& p) override {
    if (p.size() != 0) throw SizeMismatch("a fixed design has no parameters");
  }
  DesignSpec<D> decode() const override { return design_; }
  VecX vjp(const DesignGrad<D>&) const override { return VecX(); }
  std::unique_ptr<DesignDecoder<D>> clone() const override {
    return std::make_unique<FixedDesignDecoder>(*this);
  }

 private:
  DesignSpec<D> design_;
};

namespace detail {

/// m = m0 sigmoid(zm), s = s0 sigmoid(zs), r = softmax(zr).
template <int D>
void apply_heads(DesignSpec<D>& d, std::size_t p, Real zm, Real zs, const VecX& zr) {
  d.m[p] = d.m0 * sigmoid(zm);
  d.s[p] = d.s0 * sigmoid(zs);
  if (zr.size() > 0) d.r.col(static_cast<Eigen::Index>(p)) = softmax(zr);
}

struct HeadGrad {
  Real zm;
  Real zs;
  VecX zr;
};

template <int D>
HeadGrad head_vjp(const DesignSpec<D>& d, const DesignGrad<D>& g, std::size_t p) {
  const auto col = static_cast<Eigen::Index>(p);
  const Real sm = d.m[p] / d.m0;
  const Real ss = d.s[p] / d.s0;
  HeadGrad h;
  h.zm = g.m[p] * d.m0 * sm * (1 - sm);
  h.zs = g.s[p] * d.s0 * ss * (1 - ss);
  if (d.r.rows() > 0) {
    h.zr = softmax_vjp(d.r.col(col), g.r.col(col));
  }
  return h;
}

}  // namespace detail

}  // namespace mpmcd
