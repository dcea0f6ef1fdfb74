#include "driftlab/walk.hpp"

#include "driftlab/error.hpp"
#include "driftlab/parallel.hpp"
#include "driftlab/qcore.hpp"

#include <algorithm>
#include <cmath>

namespace driftlab {

namespace {

// Inverse-CDF table over full-torus sites.
class SiteSampler {
 public:
  SiteSampler(const TorusShape& shape, const HalfField& phi_star) {
    if (static_cast<std::size_t>(phi_star.size()) != shape.half_sites()) {
      throw ShapeError("phi* must live on the half torus");
    }
    const TorusField weights = symmetric_extension(shape, phi_star);
    cdf_.resize(static_cast<std::size_t>(weights.size()));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
      if (!(weights[i] > 0.0)) throw NonPositiveError("phi* must be positive");
      acc += weights[i];
      cdf_[static_cast<std::size_t>(i)] = acc;
    }
    for (double& c : cdf_) c /= acc;
    cdf_.back() = 1.0;
  }

  std::size_t draw(double u) const {
    return static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
};

// Precomputed neighbour and threshold tables for fast stepping.
struct StepTable {
  int moves = 0;
  std::vector<std::size_t> next;  // site * moves + move
  std::vector<double> cut;        // cumulative thresholds, same layout

  explicit StepTable(const DriftField& b) {
    const auto& shape = b.shape();
    const int d = shape.dim();
    const double w = drift_bound(d);
    moves = 2 * d;
    next.resize(shape.sites() * static_cast<std::size_t>(moves));
    cut.resize(next.size());
    for (std::size_t s = 0; s < shape.sites(); ++s) {
      const double bx = b.at_index(s);
      double acc = 0.0;
      for (int m = 0; m < moves; ++m) {
        const int axis = m / 2;
        const int step = m % 2 == 0 ? +1 : -1;
        double p = w;
        if (axis == 0) p += step * bx;
        acc += p;
        next[s * static_cast<std::size_t>(moves) + static_cast<std::size_t>(m)] = shape.neighbor(s, axis, step);
        cut[s * static_cast<std::size_t>(moves) + static_cast<std::size_t>(m)] = acc;
      }
    }
  }

  // Index of the move selected by u in [0, 1); the last interval absorbs rounding.
  int select(std::size_t site, double u) const {
    const double* c = &cut[site * static_cast<std::size_t>(moves)];
    for (int m = 0; m + 1 < moves; ++m) {
      if (u < c[m]) return m;
    }
    return moves - 1;
  }
};

struct Moments {
  double mean = 0.0, m2 = 0.0, m4 = 0.0;
};

// Central moments of the values, summed in index order.
Moments moments(const std::vector<double>& x) {
  Moments m;
  const double n = static_cast<double>(x.size());
  for (double v : x) m.mean += v;
  m.mean /= n;
  for (double v : x) {
    const double c = (v - m.mean) * (v - m.mean);
    m.m2 += c;
    m.m4 += c * c;
  }
  m.m2 /= n;
  m.m4 /= n;
  return m;
}

}  // namespace

std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t path) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
  return std::mt19937_64(seq);
}

WalkState step_chain(const WalkState& state, const DriftField& b, double rng_draw) {
  const auto& shape = b.shape();
  const int d = shape.dim();
  const double w = drift_bound(d);
  const double bx = b.at_index(state.env_site);
  double acc = 0.0;
  int move = 2 * d - 1;
  for (int m = 0; m + 1 < 2 * d; ++m) {
    acc += m == 0 ? w + bx : m == 1 ? w - bx : w;
    if (rng_draw < acc) {
      move = m;
      break;
    }
  }
  const int axis = move / 2;
  const int step = move % 2 == 0 ? +1 : -1;
  WalkState out = state;
  if (out.displacement.size() != static_cast<std::size_t>(d)) out.displacement.assign(static_cast<std::size_t>(d), 0);
  out.env_site = shape.neighbor(state.env_site, axis, step);
  out.displacement[static_cast<std::size_t>(axis)] += step;
  ++out.steps;
  return out;
}

std::size_t sample_initial(const TorusShape& shape, const HalfField& phi_star, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return SiteSampler(shape, phi_star).draw(unit_interval(rng()));
}

McReport estimate_q_mc(const DriftField& b, long long steps, long long paths, std::uint64_t seed, int workers) {
  if (steps < 1000 || paths < 100) throw BudgetError("Monte Carlo needs steps >= 1000 and paths >= 100");
  if (static_cast<double>(steps) * static_cast<double>(paths) > 1e12) {
    throw BudgetError("Monte Carlo budget above 10^12 steps");
  }
  const auto& shape = b.shape();
  const int d = shape.dim();
  const SiteSampler sampler(shape, invariant_phi_star(b));
  const StepTable table(b);

  const auto P = static_cast<std::size_t>(paths);
  std::vector<std::vector<double>> finals(static_cast<std::size_t>(d), std::vector<double>(P));
  parallel_for(P, workers > 0 ? workers : worker_count(), [&](std::size_t p) {
    auto rng = path_engine(seed, p);
    std::size_t site = sampler.draw(unit_interval(rng()));
    std::vector<long long> x(static_cast<std::size_t>(d), 0);
    for (long long s = 0; s < steps; ++s) {
      const int m = table.select(site, unit_interval(rng()));
      x[static_cast<std::size_t>(m / 2)] += m % 2 == 0 ? 1 : -1;
      site = table.next[site * static_cast<std::size_t>(table.moves) + static_cast<std::size_t>(m)];
    }
    for (int j = 0; j < d; ++j) finals[static_cast<std::size_t>(j)][p] = static_cast<double>(x[static_cast<std::size_t>(j)]);
  });

  const double N = static_cast<double>(steps);
  const double Pn = static_cast<double>(paths);
  auto rate = [&](const std::vector<double>& x, double& value, double& err) {
    const Moments m = moments(x);
    value = m.m2 * Pn / (Pn - 1.0) / (2.0 * N);
    err = std::sqrt(std::max(0.0, m.m4 - m.m2 * m.m2) / Pn) / (2.0 * N);
    return m;
  };

  McReport r;
  r.steps = steps;
  r.paths = paths;
  r.seed = seed;
  const Moments m1 = rate(finals[0], r.q_hat, r.stderr_q);
  r.mean_drift = m1.mean / N;
  r.stderr_drift = std::sqrt(m1.m2 / Pn) / N;
  for (int j = 1; j < d; ++j) {
    double v = 0.0, e = 0.0;
    rate(finals[static_cast<std::size_t>(j)], v, e);
    r.q_perp.push_back(v);
    r.stderr_perp.push_back(e);
  }
  return r;
}

}  // namespace driftlab
