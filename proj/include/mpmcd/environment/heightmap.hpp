#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/environment/terrain.hpp"

namespace mpmcd {

/// 2D gradient (Perlin) noise with a permutation table drawn from a seed.
class PerlinNoise {
 public:
  explicit PerlinNoise(std::uint64_t seed) {
    std::iota(perm_.begin(), perm_.begin() + 256, 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm_.begin(), perm_.begin() + 256, rng);
    std::copy(perm_.begin(), perm_.begin() + 256, perm_.begin() + 256);
  }

  /// Roughly in [-1, 1].
  Real operator()(Real x, Real y) const {
    const int xi = static_cast<int>(std::floor(x)) & 255;
    const int yi = static_cast<int>(std::floor(y)) & 255;
    const Real xf = x - std::floor(x);
    const Real yf = y - std::floor(y);
    const Real u = fade(xf), v = fade(yf);
    const int aa = perm_[perm_[xi] + yi], ab = perm_[perm_[xi] + yi + 1];
    const int ba = perm_[perm_[xi + 1] + yi], bb = perm_[perm_[xi + 1] + yi + 1];
    const Real x1 = lerp(grad(aa, xf, yf), grad(ba, xf - 1, yf), u);
    const Real x2 = lerp(grad(ab, xf, yf - 1), grad(bb, xf - 1, yf - 1), u);
    return lerp(x1, x2, v) * std::numbers::sqrt2;
  }

 private:
  static Real fade(Real t) { return t * t * t * (t * (t * 6 - 15) + 10); }
  static Real lerp(Real a, Real b, Real t) { return a + t * (b - a); }
  static Real grad(int h, Real x, Real y) {
    switch (h & 7) {
      case 0: return x + y;
      case 1: return -x + y;
      case 2: return x - y;
      case 3: return -x - y;
      case 4: return x;
      case 5: return -x;
      case 6: return y;
      default: return -y;
    }
  }

  std::array<int, 512> perm_{};
};

struct HeightmapParams {
  int samples = 65;          // per lateral axis
  Real extent = 1.0;         // world length covered
  Real h_min = 0.1;
  Real h_max = 0.15;
  Real amplitude = 1.0;      // 0 gives a flat map at h_min
  Real base_frequency = 3.0; // features per extent
  int octaves = 3;
  Real lacunarity = 2.0;
  Real persistence = 0.5;
};

/// Fractal Perlin heightmap with every value in [h_min, h_max].
template <int D>
TerrainSDF<D> gen_heightmap(std::uint64_t seed, const HeightmapParams& hp) {
  if (hp.h_min > hp.h_max) throw ConfigError("heightmap range has h_min > h_max");
  if (hp.samples < 2) throw ConfigError("heightmap needs at least two samples per axis");
  if (hp.octaves < 1) throw ConfigError("heightmap needs at least one octave");
  const PerlinNoise noise(seed);
  TerrainSDF<D> t;
  t.nx = hp.samples;
  t.nz = D == 3 ? hp.samples : 1;
  t.spacing = hp.extent / (hp.samples - 1);
  t.heights.resize(static_cast<std::size_t>(t.nx) * t.nz);
  Real norm = 0, amp = 1;
  for (int o = 0; o < hp.octaves; ++o, amp *= hp.persistence) norm += amp;
  const Real a = std::clamp(hp.amplitude, 0.0, 1.0);
  for (int i = 0; i < t.nx; ++i) {
    for (int k = 0; k < t.nz; ++k) {
      const Real u = static_cast<Real>(i) / (t.nx - 1);
      // 2D maps take a slice off the integer lattice so it is not identically zero
      const Real w = D == 3 ? static_cast<Real>(k) / (t.nz - 1) : 0.37;
      Real n = 0, freq = hp.base_frequency, am = 1;
      for (int o = 0; o < hp.octaves; ++o) {
        n += am * noise(u * freq, w * freq);
        freq *= hp.lacunarity;
        am *= hp.persistence;
      }
      const Real unit = std::clamp(0.5 * (n / norm + 1.0), 0.0, 1.0);
      t.heights[static_cast<std::size_t>(i) * t.nz + k] = hp.h_min + (hp.h_max - hp.h_min) * a * unit;
    }
  }
  return t;
}

}  // namespace mpmcd
