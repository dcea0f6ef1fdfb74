#pragma once

#include "driftlab/env.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace driftlab {

/// Environment site on the full torus plus integer displacement in Z^d.
struct WalkState {
  std::size_t env_site = 0;
  std::vector<long long> displacement;
  long long steps = 0;
};

/// One step of the embedded discrete-time chain. The unit interval is cut in
/// the order +e1, -e1, +e2, -e2, ... with lengths 1/2d + b, 1/2d - b, 1/2d, ...
WalkState step_chain(const WalkState& state, const DriftField& b, double rng_draw);

/// Site drawn from the symmetric extension of phi* over the full torus.
std::size_t sample_initial(const TorusShape& shape, const HalfField& phi_star, std::uint64_t seed);

struct McReport {
  double q_hat = 0.0;
  double stderr_q = 0.0;
  double mean_drift = 0.0;
  double stderr_drift = 0.0;
  /// Var(X_j(N)) / 2N and its standard error for j = 2..d.
  std::vector<double> q_perp;
  std::vector<double> stderr_perp;
  long long steps = 0;
  long long paths = 0;
  std::uint64_t seed = 0;
};

/// Per-path streams are seeded from (seed, path index), so the report does not
/// depend on `workers`. workers <= 0 means worker_count().
/// BudgetError for steps < 1000, paths < 100 or more than 10^12 total steps.
McReport estimate_q_mc(const DriftField& b, long long steps, long long paths, std::uint64_t seed,
                       int workers = 0);

/// The random engine used for path `path` of a run with `seed`.
std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t path);

}  // namespace driftlab
