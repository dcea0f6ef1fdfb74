#pragma once

#include "driftlab/env.hpp"

#include <optional>
#include <span>
#include <vector>

namespace driftlab {

/// A frequency on the dual grid of antisymmetric fields: xi1 = pi k / L,
/// xi_j = 2 pi m_j / L_j for the transverse axes.
struct Mode {
  int k = 0;
  std::vector<int> m;
  double xi1 = 0.0;
  std::vector<double> xi_perp;
  double eigenvalue = 0.0;
};

/// 2d {cos xi1 - sin^2 xi1 / S} / S with S = sum_j (1 - cos xi_j).
/// ZeroDenominatorError when S = 0.
double mode_eigenvalue(int d, std::span<const double> xi);

struct SecondOrder {
  double direct = 0.0;    // <phi* psi> to second order, full-torus evaluation
  double spectral = 0.0;  // same, via the sine decomposition in x1
  double q = 0.0;         // 1/2d + 2 * direct
};

/// Checks direct against spectral to 1e-11 (ConsistencyError).
SecondOrder second_order(const DriftField& b);
double q_second_order(const DriftField& b);

/// All modes on the grid, eigenvalue descending, ties by (k, m) ascending.
std::vector<Mode> mode_scan(const TorusShape& shape);
/// Largest-eigenvalue mode if it is positive.
std::optional<Mode> find_amplifying_mode(const TorusShape& shape);

struct Counterexample {
  DriftField field;
  double q = 0.0;
  Mode mode;
  double amplitude = 0.0;  // amplitude actually used
};

/// b = amplitude sin(xi1 (x1 + 1/2)) cos(xi_perp . y) on the amplifying mode.
/// Halves the amplitude while q <= 1/2d + 1e-6; SearchFailed below 1e-4.
/// NoModeError if the shape has no amplifying mode.
Counterexample construct_counterexample(const TorusShape& shape, double amplitude);

struct RefineOptions {
  int levels = 9;      // trial values per coordinate, evenly spaced in [-a, a]
  int max_sweeps = 20;
};

/// Coordinate ascent of q over half-torus fields with sup|b| <= amplitude,
/// starting from `start`. Deterministic; never returns a lower q than `start`.
Counterexample refine_counterexample(const Counterexample& start, double amplitude,
                                     const RefineOptions& opts = {});

}  // namespace driftlab
