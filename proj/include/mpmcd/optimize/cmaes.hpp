#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/core/types.hpp"

namespace mpmcd {

/// CMA-ES with cumulative step-size adaptation and rank-one plus rank-mu
/// covariance updates (minimization).
struct CmaEsState {
  VecX mean;
  Real sigma = 0.1;
  MatX C;
  VecX p_sigma;
  VecX p_c;
  int lambda = 10;
  long generation = 0;
  Real eigen_floor = 1e-14;

  // Derived constants.
  int mu = 5;
  VecX weights;
  Real mu_eff = 0, c_sigma = 0, d_sigma = 0, c_c = 0, c_1 = 0, c_mu = 0, chi_n = 0;

  // Cached factorization C = B diag(d^2) B^T.
  MatX B;
  VecX d;

  static CmaEsState init(const VecX& x0, Real sigma0 = 0.1, int lambda = 10) {
    if (lambda < 2) throw ConfigError("CMA-ES population must be at least 2");
    CmaEsState s;
    const auto n = x0.size();
    const Real N = static_cast<Real>(n);
    s.mean = x0;
    s.sigma = sigma0;
    s.lambda = lambda;
    s.C = MatX::Identity(n, n);
    s.B = MatX::Identity(n, n);
    s.d = VecX::Ones(n);
    s.p_sigma = VecX::Zero(n);
    s.p_c = VecX::Zero(n);
    s.mu = lambda / 2;
    s.weights.resize(s.mu);
    for (int i = 0; i < s.mu; ++i) s.weights[i] = std::log((lambda + 1) / 2.0) - std::log(i + 1.0);
    s.weights /= s.weights.sum();
    s.mu_eff = 1.0 / s.weights.squaredNorm();
    s.c_sigma = (s.mu_eff + 2) / (N + s.mu_eff + 5);
    s.d_sigma = 1 + 2 * std::max(0.0, std::sqrt((s.mu_eff - 1) / (N + 1)) - 1) + s.c_sigma;
    s.c_c = (4 + s.mu_eff / N) / (N + 4 + 2 * s.mu_eff / N);
    s.c_1 = 2 / ((N + 1.3) * (N + 1.3) + s.mu_eff);
    s.c_mu = std::min(1 - s.c_1, 2 * (s.mu_eff - 2 + 1 / s.mu_eff) / ((N + 2) * (N + 2) + s.mu_eff));
    s.chi_n = std::sqrt(N) * (1 - 1 / (4 * N) + 1 / (21 * N * N));
    return s;
  }

  Eigen::Index dim() const { return mean.size(); }

  /// lambda samples from N(mean, sigma^2 C).
  std::vector<VecX> ask(std::mt19937_64& rng) const {
    std::normal_distribution<Real> nd(0.0, 1.0);
    std::vector<VecX> out;
    out.reserve(lambda);
    for (int k = 0; k < lambda; ++k) {
      VecX z(dim());
      for (Eigen::Index i = 0; i < dim(); ++i) z[i] = nd(rng);
      out.push_back(mean + sigma * (B * d.cwiseProduct(z)));
    }
    return out;
  }

  /// Rank-based update from the asked samples and their fitness (lower is
  /// better). When all fitness values tie there is no ranking information and
  /// the state is left unchanged.
  void tell(const std::vector<VecX>& xs, const std::vector<Real>& fitness) {
    if (static_cast<int>(xs.size()) != lambda || fitness.size() != xs.size()) {
      throw SizeMismatch("CMA-ES expects lambda samples and fitness values");
    }
    const auto [lo, hi] = std::minmax_element(fitness.begin(), fitness.end());
    ++generation;
    if (*lo == *hi) return;
    std::vector<int> order(lambda);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fitness[a] < fitness[b]; });

    const auto n = dim();
    const Real N = static_cast<Real>(n);
    const VecX old = mean;
    MatX Y(n, mu);
    for (int i = 0; i < mu; ++i) Y.col(i) = (xs[order[i]] - old) / sigma;
    const VecX yw = Y * weights;
    mean = old + sigma * yw;

    // C^{-1/2} yw
    const VecX inv_sqrt_yw = B * (B.transpose() * yw).cwiseQuotient(d);
    p_sigma = (1 - c_sigma) * p_sigma + std::sqrt(c_sigma * (2 - c_sigma) * mu_eff) * inv_sqrt_yw;
    const Real ps_norm = p_sigma.norm();
    const Real denom = std::sqrt(1 - std::pow(1 - c_sigma, 2.0 * static_cast<Real>(generation)));
    const bool h_sigma = ps_norm / denom / chi_n < 1.4 + 2 / (N + 1);
    p_c = (1 - c_c) * p_c + (h_sigma ? std::sqrt(c_c * (2 - c_c) * mu_eff) : 0.0) * yw;

    const Real delta_h = h_sigma ? 0.0 : c_c * (2 - c_c);
    MatX rank_mu = MatX::Zero(n, n);
    for (int i = 0; i < mu; ++i) rank_mu += weights[i] * Y.col(i) * Y.col(i).transpose();
    C = (1 - c_1 - c_mu + c_1 * delta_h) * C + c_1 * p_c * p_c.transpose() + c_mu * rank_mu;
    C = 0.5 * (C + C.transpose());

    sigma *= std::exp((c_sigma / d_sigma) * (ps_norm / chi_n - 1));
    refactor();
  }

  /// Re-diagonalizes C, flooring eigenvalues to keep it positive definite.
  void refactor() {
    Eigen::SelfAdjointEigenSolver<MatX> es(C);
    VecX ev = es.eigenvalues();
    const Real top = std::max(ev.maxCoeff(), 1e-300);
    for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = std::max(ev[i], eigen_floor * top);
    B = es.eigenvectors();
    d = ev.cwiseSqrt();
    C = B * ev.asDiagonal() * B.transpose();
  }
};

}  // namespace mpmcd
