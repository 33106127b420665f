#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/design/decoder.hpp"

namespace mpmcd {

enum class Activation { Sin, Sigmoid, Tanh, Gaussian, Selu, Abs, Log, Exp };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::Sin: return "sin";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Gaussian: return "gaussian";
    case Activation::Selu: return "selu";
    case Activation::Abs: return "abs";
    case Activation::Log: return "log";
    case Activation::Exp: return "exp";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  for (auto a : {Activation::Sin, Activation::Sigmoid, Activation::Tanh, Activation::Gaussian,
                 Activation::Selu, Activation::Abs, Activation::Log, Activation::Exp}) {
    if (s == to_string(a)) return a;
  }
  throw ConfigError("unknown activation '" + s + "'");
}

namespace detail {

constexpr Real kSeluAlpha = 1.6732632423543772;
constexpr Real kSeluScale = 1.0507009873554805;

// log and exp are made total: log1p(|z|) with the sign of z, exp capped at 20.
inline Real activate(Activation a, Real z) {
  switch (a) {
    case Activation::Sin: return std::sin(z);
    case Activation::Sigmoid: return sigmoid(z);
    case Activation::Tanh: return std::tanh(z);
    case Activation::Gaussian: return std::exp(-z * z);
    case Activation::Selu: return kSeluScale * (z > 0 ? z : kSeluAlpha * std::expm1(z));
    case Activation::Abs: return std::abs(z);
    case Activation::Log: return std::copysign(std::log1p(std::abs(z)), z);
    case Activation::Exp: return std::exp(std::min(z, 20.0));
  }
  return z;
}

inline Real activate_grad(Activation a, Real z) {
  switch (a) {
    case Activation::Sin: return std::cos(z);
    case Activation::Sigmoid: {
      const Real s = sigmoid(z);
      return s * (1 - s);
    }
    case Activation::Tanh: {
      const Real t = std::tanh(z);
      return 1 - t * t;
    }
    case Activation::Gaussian: return -2 * z * std::exp(-z * z);
    case Activation::Selu: return kSeluScale * (z > 0 ? 1.0 : kSeluAlpha * std::exp(z));
    case Activation::Abs: return z >= 0 ? 1.0 : -1.0;
    case Activation::Log: return 1.0 / (1.0 + std::abs(z));
    case Activation::Exp: return z < 20.0 ? std::exp(z) : 0.0;
  }
  return 1.0;
}

}  // namespace detail

/// Fully-connected network with a per-node activation on every hidden layer
/// and a linear output layer. Parameters are stored flat, layer by layer, as
/// W (out x in, column-major) followed by b.
class FeatureNet {
 public:
  FeatureNet() = default;
  FeatureNet(std::vector<int> sizes, std::vector<std::vector<Activation>> acts)
      : sizes_(std::move(sizes)), acts_(std::move(acts)) {
    if (sizes_.size() < 2 || acts_.size() != sizes_.size() - 2) {
      throw ConfigError("network needs one activation list per hidden layer");
    }
    for (std::size_t l = 0; l + 2 < sizes_.size(); ++l) {
      if (static_cast<int>(acts_[l].size()) != sizes_[l + 1]) {
        throw ConfigError("activation list length must match its layer width");
      }
    }
    theta_ = VecX::Zero(count());
  }

  static FeatureNet uniform(int in, const std::vector<int>& hidden, int out, Activation a) {
    std::vector<int> sizes{in};
    std::vector<std::vector<Activation>> acts;
    for (int h : hidden) {
      sizes.push_back(h);
      acts.emplace_back(h, a);
    }
    sizes.push_back(out);
    return FeatureNet(sizes, acts);
  }

  int count() const {
    int c = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) c += sizes_[l + 1] * (sizes_[l] + 1);
    return c;
  }
  int inputs() const { return sizes_.front(); }
  int outputs() const { return sizes_.back(); }
  const std::vector<std::vector<Activation>>& activations() const { return acts_; }
  const std::vector<int>& sizes() const { return sizes_; }

  const VecX& params() const { return theta_; }
  void set_params(const VecX& p) {
    if (p.size() != theta_.size()) throw SizeMismatch("network parameter count");
    theta_ = p;
  }

  void randomize(std::mt19937_64& rng, Real scale) {
    int o = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const int in = sizes_[l], out = sizes_[l + 1];
      std::normal_distribution<Real> nd(0.0, scale / std::sqrt(static_cast<Real>(in)));
      for (int i = 0; i < in * out; ++i) theta_[o + i] = nd(rng);
      o += in * out;
      for (int i = 0; i < out; ++i) theta_[o + i] = 0.0;
      o += out;
    }
  }

  /// Pre-activations of every layer, kept for the backward pass.
  struct Trace {
    std::vector<VecX> pre;   // per layer after the affine map
    std::vector<VecX> post;  // layer inputs (post[0] = network input)
  };

  VecX forward(const VecX& x, Trace* trace = nullptr) const {
    VecX h = x;
    int o = 0;
    if (trace) {
      trace->pre.clear();
      trace->post.assign(1, x);
    }
    const std::size_t L = sizes_.size() - 1;
    for (std::size_t l = 0; l < L; ++l) {
      const int in = sizes_[l], out = sizes_[l + 1];
      Eigen::Map<const MatX> W(theta_.data() + o, out, in);
      o += in * out;
      VecX z = W * h + theta_.segment(o, out);
      o += out;
      if (trace) trace->pre.push_back(z);
      if (l + 1 < L) {
        for (int i = 0; i < out; ++i) z[i] = detail::activate(acts_[l][i], z[i]);
        if (trace) trace->post.push_back(z);
      }
      h = std::move(z);
    }
    return h;
  }

  /// Adds d(ybar . y)/d(theta) into grad; returns the input cotangent.
  VecX backward(const Trace& tr, const VecX& ybar, VecX& grad) const {
    const std::size_t L = sizes_.size() - 1;
    std::vector<int> offset(L);
    int o = 0;
    for (std::size_t l = 0; l < L; ++l) {
      offset[l] = o;
      o += sizes_[l + 1] * (sizes_[l] + 1);
    }
    VecX zbar = ybar;
    for (std::size_t l = L; l-- > 0;) {
      const int in = sizes_[l], out = sizes_[l + 1];
      if (l + 1 < L) {
        for (int i = 0; i < out; ++i) zbar[i] *= detail::activate_grad(acts_[l][i], tr.pre[l][i]);
      }
      Eigen::Map<const MatX> W(theta_.data() + offset[l], out, in);
      Eigen::Map<MatX> gW(grad.data() + offset[l], out, in);
      gW += zbar * tr.post[l].transpose();
      grad.segment(offset[l] + in * out, out) += zbar;
      zbar = W.transpose() * zbar;
    }
    return zbar;
  }

 private:
  std::vector<int> sizes_;
  std::vector<std::vector<Activation>> acts_;
  VecX theta_;
};

/// Centered, per-axis standardized base positions.
template <int D>
std::vector<Vec<D>> standardize(const std::vector<Vec<D>>& base) {
  std::vector<Vec<D>> out(base.size());
  if (base.empty()) return out;
  Vec<D> mean = Vec<D>::Zero();
  for (const auto& x : base) mean += x;
  mean /= static_cast<Real>(base.size());
  Vec<D> var = Vec<D>::Zero();
  for (const auto& x : base) var += (x - mean).cwiseAbs2();
  var /= static_cast<Real>(base.size());
  for (std::size_t p = 0; p < base.size(); ++p) {
    for (int a = 0; a < D; ++a) {
      const Real sd = std::sqrt(var[a]);
      out[p][a] = sd > 0 ? (base[p][a] - mean[a]) / sd : 0.0;
    }
  }
  return out;
}

/// Coordinate featurization: the coordinates, their pairwise planar radii
/// (3D only) and the full radius from the body center.
template <int D>
VecX coordinate_features(const Vec<D>& xh) {
  if constexpr (D == 2) {
    VecX f(3);
    f << xh[0], xh[1], xh.norm();
    return f;
  } else {
    VecX f(7);
    f << xh[0], xh[1], xh[2], std::hypot(xh[0], xh[1]), std::hypot(xh[0], xh[2]),
        std::hypot(xh[1], xh[2]), xh.norm();
    return f;
  }
}

template <int D>
constexpr int num_coordinate_features() {
  return D == 2 ? 3 : 7;
}

/// Coordinate network decoder: three networks (geometry, stiffness, muscle
/// membership) over the shared coordinate features, with sigmoid / sigmoid /
/// softmax heads. Serves both the implicit-function and the Diff-CPPN
/// representations; they differ in depth, width and activations.
template <int D>
class NetworkDecoder final : public DesignDecoder<D> {
 public:
  NetworkDecoder(std::string kind, std::vector<Vec<D>> base, int K, FeatureNet m_net,
                 FeatureNet s_net, FeatureNet r_net, Real m0 = 1.0, Real s0 = 1.0)
      : kind_(std::move(kind)), base_(std::move(base)), K_(K), m0_(m0), s0_(s0) {
    nets_[0] = std::move(m_net);
    nets_[1] = std::move(s_net);
    nets_[2] = std::move(r_net);
    const auto xh = standardize<D>(base_);
    features_.reserve(xh.size());
    for (const auto& x : xh) features_.push_back(coordinate_features<D>(x));
  }

  std::string kind() const override { return kind_; }
  const FeatureNet& net(int i) const { return nets_[i]; }

  VecX params() const override {
    VecX p(nets_[0].count() + nets_[1].count() + nets_[2].count());
    p << nets_[0].params(), nets_[1].params(), nets_[2].params();
    return p;
  }

  void set_params(const VecX& p) override {
    if (p.size() != nets_[0].count() + nets_[1].count() + nets_[2].count()) {
      throw SizeMismatch(kind_ + " design parameter count");
    }
    int o = 0;
    for (auto& n : nets_) {
      n.set_params(p.segment(o, n.count()));
      o += n.count();
    }
  }

  void randomize(std::mt19937_64& rng, Real scale = 1.0) {
    for (auto& n : nets_) n.randomize(rng, scale);
  }

  DesignSpec<D> decode() const override {
    auto d = DesignSpec<D>::uniform(base_, K_, m0_, s0_);
    for (std::size_t p = 0; p < base_.size(); ++p) {
      const Real zm = nets_[0].forward(features_[p])[0];
      const Real zs = nets_[1].forward(features_[p])[0];
      const VecX zr = K_ > 0 ? nets_[2].forward(features_[p]) : VecX();
      detail::apply_heads<D>(d, p, zm, zs, zr);
    }
    return d;
  }

  VecX vjp(const DesignGrad<D>& g) const override {
    const auto d = decode();
    VecX grad = VecX::Zero(params().size());
    const int o1 = nets_[0].count(), o2 = o1 + nets_[1].count();
    VecX g0 = VecX::Zero(nets_[0].count()), g1 = VecX::Zero(nets_[1].count()),
         g2 = VecX::Zero(nets_[2].count());
    FeatureNet::Trace tr;
    for (std::size_t p = 0; p < base_.size(); ++p) {
      const auto h = detail::head_vjp<D>(d, g, p);
      VecX b(1);
      nets_[0].forward(features_[p], &tr);
      b[0] = h.zm;
      nets_[0].backward(tr, b, g0);
      nets_[1].forward(features_[p], &tr);
      b[0] = h.zs;
      nets_[1].backward(tr, b, g1);
      if (K_ > 0) {
        nets_[2].forward(features_[p], &tr);
        nets_[2].backward(tr, h.zr, g2);
      }
    }
    grad.head(o1) = g0;
    grad.segment(o1, o2 - o1) = g1;
    grad.tail(nets_[2].count()) = g2;
    return grad;
  }

  std::unique_ptr<DesignDecoder<D>> clone() const override {
    return std::make_unique<NetworkDecoder>(*this);
  }

 private:
  std::string kind_;
  std::vector<Vec<D>> base_;
  int K_;
  Real m0_, s0_;
  FeatureNet nets_[3];
  std::vector<VecX> features_;
};

/// Implicit function: 2 hidden tanh layers of width 32.
template <int D>
NetworkDecoder<D> make_implicit_decoder(std::vector<Vec<D>> base, int K, Real m0 = 1.0,
                                        Real s0 = 1.0, int width = 32, int depth = 2) {
  const int in = num_coordinate_features<D>();
  const std::vector<int> hidden(depth, width);
  return NetworkDecoder<D>("implicit", std::move(base), K,
                           FeatureNet::uniform(in, hidden, 1, Activation::Tanh),
                           FeatureNet::uniform(in, hidden, 1, Activation::Tanh),
                           FeatureNet::uniform(in, hidden, std::max(K, 1), Activation::Tanh), m0, s0);
}

/// Diff-CPPN: 3 hidden layers of 20 nodes; node activations cycle through
/// `palette` (default {sin, sigmoid}).
template <int D>
NetworkDecoder<D> make_cppn_decoder(std::vector<Vec<D>> base, int K, Real m0 = 1.0, Real s0 = 1.0,
                                    std::vector<Activation> palette = {Activation::Sin,
                                                                       Activation::Sigmoid},
                                    int width = 20, int depth = 3) {
  if (palette.empty()) throw ConfigError("CPPN activation palette is empty");
  const int in = num_coordinate_features<D>();
  auto make = [&](int out) {
    std::vector<int> sizes{in};
    std::vector<std::vector<Activation>> acts;
    for (int l = 0; l < depth; ++l) {
      sizes.push_back(width);
      std::vector<Activation> layer(width);
      for (int i = 0; i < width; ++i) layer[i] = palette[(i + l) % palette.size()];
      acts.push_back(layer);
    }
    sizes.push_back(out);
    return FeatureNet(sizes, acts);
  };
  return NetworkDecoder<D>("cppn", std::move(base), K, make(1), make(1), make(std::max(K, 1)), m0,
                           s0);
}

}  // namespace mpmcd
