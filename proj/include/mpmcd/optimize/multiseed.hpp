#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/core/types.hpp"

namespace mpmcd {

template <class R>
struct MultiSeedResult {
  std::vector<std::uint64_t> seeds;
  std::vector<std::optional<R>> runs;  // one per seed, empty when the run failed
  std::vector<Real> scores;            // +inf for failed runs
  std::vector<std::string> errors;     // empty string for completed runs
  std::size_t best_index = 0;

  const R& best() const { return *runs[best_index]; }
};

/// Runs `run(seed)` for seeds base_seed .. base_seed + n - 1 and keeps every
/// result; the best is the completed run with the lowest score (ties go to
/// the earliest seed). Runs throwing mpmcd::Error are recorded as failed.
template <class R>
MultiSeedResult<R> multi_seed_best(const std::function<R(std::uint64_t)>& run,
                                   const std::function<Real(const R&)>& score, int n_seeds = 8,
                                   std::uint64_t base_seed = 0) {
  if (n_seeds < 1) throw ConfigError("multi_seed_best needs at least one seed");
  MultiSeedResult<R> out;
  Real best = std::numeric_limits<Real>::infinity();
  bool any = false;
  for (int i = 0; i < n_seeds; ++i) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
    out.seeds.push_back(seed);
    try {
      R r = run(seed);
      const Real sc = score(r);
      out.runs.emplace_back(std::move(r));
      out.scores.push_back(sc);
      out.errors.emplace_back();
      if (!any || sc < best) {
        best = sc;
        out.best_index = static_cast<std::size_t>(i);
        any = true;
      }
    } catch (const Error& e) {
      out.runs.emplace_back(std::nullopt);
      out.scores.push_back(std::numeric_limits<Real>::infinity());
      out.errors.emplace_back(e.what());
    }
  }
  if (!any) throw AllRunsFailed("all " + std::to_string(n_seeds) + " seeded runs failed: " + out.errors.front());
  return out;
}

}  // namespace mpmcd
