#pragma once

#include "driftlab/env.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <random>

namespace driftlab::fixtures {

inline Eigen::VectorXd uniform_vector(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = lo + (hi - lo) * unit_interval(rng());
  return v;
}

/// Random field with amplitude frac * 1/(2d).
inline DriftField field(std::vector<int> dims, std::uint64_t seed, double frac = 0.9) {
  TorusShape shape(std::move(dims));
  return random_drift(shape, frac * drift_bound(shape.dim()), seed);
}

}  // namespace driftlab::fixtures
