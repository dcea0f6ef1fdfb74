#include "driftlab/perturb.hpp"

#include "driftlab/error.hpp"
#include "driftlab/lattice.hpp"
#include "driftlab/qcore.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace driftlab {

namespace {

double mean(const Eigen::VectorXd& v) { return v.size() ? v.sum() / static_cast<double>(v.size()) : 0.0; }

// f(x + step e1) on the full torus.
Eigen::VectorXd shift1(const TorusShape& shape, const Eigen::VectorXd& f, int step) {
  Eigen::VectorXd out(f.size());
  for (std::size_t i = 0; i < shape.sites(); ++i) {
    out[static_cast<Eigen::Index>(i)] = f[static_cast<Eigen::Index>(shape.neighbor(i, 0, step))];
  }
  return out;
}

// (-Delta/2d + P) on the full torus; on mean-zero data its inverse is the
// mean-zero inverse of -Delta/2d.
Eigen::MatrixXd pseudo_laplacian(const TorusShape& shape) {
  const auto n = static_cast<Eigen::Index>(shape.sites());
  const double w = drift_bound(shape.dim());
  Eigen::MatrixXd A = Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < shape.sites(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (int a = 0; a < shape.dim(); ++a) {
      A(r, static_cast<Eigen::Index>(shape.neighbor(i, a, +1))) -= w;
      A(r, static_cast<Eigen::Index>(shape.neighbor(i, a, -1))) -= w;
      A(r, r) += 2.0 * w;
    }
  }
  return A;
}

bool mode_less(const Mode& a, const Mode& b) {
  if (a.eigenvalue != b.eigenvalue) return a.eigenvalue > b.eigenvalue;
  if (a.k != b.k) return a.k < b.k;
  return a.m < b.m;
}

}  // namespace

double mode_eigenvalue(int d, std::span<const double> xi) {
  if (static_cast<int>(xi.size()) != d || d < 1) throw ShapeError("xi needs d components");
  double S = 0.0;
  for (double x : xi) S += 1.0 - std::cos(x);
  if (!(S > 1e-300)) throw ZeroDenominatorError("all frequency components vanish mod 2 pi");
  const double s1 = std::sin(xi[0]);
  return 2.0 * d * (std::cos(xi[0]) - s1 * s1 / S) / S;
}

SecondOrder second_order(const DriftField& b) {
  const auto& shape = b.shape();
  const int d = shape.dim();
  const double w = drift_bound(d);

  // Full-torus quadratic form.
  const Eigen::VectorXd bf = b.full_values();
  const Eigen::PartialPivLU<Eigen::MatrixXd> G(pseudo_laplacian(shape));
  const Eigen::VectorXd g = G.solve(bf);
  const Eigen::VectorXd gp = shift1(shape, g, +1), gm = shift1(shape, g, -1);
  const Eigen::VectorXd h = G.solve(Eigen::VectorXd(gp - gm));
  const double term1 = mean(bf.cwiseProduct(gp + gm));
  const double term2 = w * mean(bf.cwiseProduct(shift1(shape, h, +1) - shift1(shape, h, -1)));

  // Sine decomposition over the half torus.
  const TransverseTorus torus = TransverseTorus::of(shape);
  const int L = shape.half_length();
  const auto T = static_cast<Eigen::Index>(torus.sites());
  const HalfField& half = b.half_values();
  TransverseField alt = TransverseField::Zero(T);
  for (int y = 0; y < L; ++y) alt += (y % 2 ? -1.0 : 1.0) * half.segment(y * T, T);
  double spectral = -4.0 * d / (L * L) * mean(alt.cwiseProduct(inv_shifted_laplacian(torus, alt, 4.0)));
  for (int k = 1; k < L; ++k) {
    const double theta = std::numbers::pi * k / L;
    const double c = 2.0 * (1.0 - std::cos(theta));
    TransverseField S = TransverseField::Zero(T);
    for (int y = 0; y < L; ++y) S += std::sin(theta * (y + 0.5)) * half.segment(y * T, T);
    const TransverseField u = inv_shifted_laplacian(torus, S, c);
    const double s2 = std::sin(theta) * std::sin(theta);
    const TransverseField v = std::cos(theta) * u - 2.0 * s2 * inv_shifted_laplacian(torus, u, c);
    spectral += 8.0 * d / (L * L) * mean(S.cwiseProduct(v));
  }

  SecondOrder out;
  out.direct = term1 + term2;
  out.spectral = spectral;
  out.q = w + 2.0 * out.direct;
  if (!(std::abs(out.direct - out.spectral) <= 1e-11)) {
    std::ostringstream os;
    os.precision(17);
    os << "second-order forms disagree: " << out.direct << " vs " << out.spectral;
    throw ConsistencyError(os.str());
  }
  return out;
}

double q_second_order(const DriftField& b) { return second_order(b).q; }

std::vector<Mode> mode_scan(const TorusShape& shape) {
  const int d = shape.dim();
  const int L = shape.half_length();
  const TransverseTorus torus = TransverseTorus::of(shape);
  std::vector<Mode> modes;
  modes.reserve(static_cast<std::size_t>(L) * torus.sites());
  for (int k = 1; k <= L; ++k) {
    for (std::size_t y = 0; y < torus.sites(); ++y) {
      Mode m;
      m.k = k;
      m.m = torus.coords(y);
      m.xi1 = std::numbers::pi * k / L;
      std::vector<double> xi{m.xi1};
      for (int j = 1; j < d; ++j) {
        const double x = 2.0 * std::numbers::pi * m.m[static_cast<std::size_t>(j - 1)] / shape.extent(j);
        m.xi_perp.push_back(x);
        xi.push_back(x);
      }
      m.eigenvalue = mode_eigenvalue(d, xi);
      modes.push_back(std::move(m));
    }
  }
  std::stable_sort(modes.begin(), modes.end(), mode_less);
  return modes;
}

std::optional<Mode> find_amplifying_mode(const TorusShape& shape) {
  auto modes = mode_scan(shape);
  if (modes.empty() || !(modes.front().eigenvalue > 0.0)) return std::nullopt;
  return modes.front();
}

Counterexample construct_counterexample(const TorusShape& shape, double amplitude) {
  const int d = shape.dim();
  if (!(amplitude > 0.0) || amplitude >= drift_bound(d)) {
    throw AmplitudeError("amplitude must lie in (0, 1/(2d))");
  }
  auto mode = find_amplifying_mode(shape);
  if (!mode) throw NoModeError("no mode with positive second-order coefficient on this torus");
  const double target = drift_bound(d) + 1e-6;
  for (double a = amplitude; a >= 1e-4; a *= 0.5) {
    DriftField b = mode_drift(shape, mode->k, mode->m, a);
    const double q = q_direct(b);
    if (q > target) return {std::move(b), q, *mode, a};
  }
  throw SearchFailed("no amplitude above 1e-4 gives q > 1/2d");
}

Counterexample refine_counterexample(const Counterexample& start, double amplitude, const RefineOptions& opts) {
  const auto& shape = start.field.shape();
  if (!(amplitude > 0.0) || amplitude >= drift_bound(shape.dim())) {
    throw AmplitudeError("amplitude must lie in (0, 1/(2d))");
  }
  if (opts.levels < 2 || opts.max_sweeps < 1) throw ValidationError("refine needs levels >= 2 and a sweep");
  if (start.field.sup_norm() > amplitude) throw AmplitudeError("start field exceeds the amplitude");

  Counterexample best = start;
  // Optima sit on the faces of the box, so try the sign pattern of the start
  // pushed out to full amplitude before the coordinate sweeps.
  HalfField h = start.field.half_values();
  HalfField corner = h.unaryExpr([amplitude](double v) { return v > 0 ? amplitude : v < 0 ? -amplitude : 0.0; });
  {
    DriftField trial(shape, corner);
    const double q = q_direct(trial);
    if (q > best.q) {
      best.field = std::move(trial);
      best.q = q;
      h = corner;
    }
  }
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    bool improved = false;
    for (Eigen::Index i = 0; i < h.size(); ++i) {
      for (int l = 0; l < opts.levels; ++l) {
        h[i] = -amplitude + 2.0 * amplitude * l / (opts.levels - 1);
        DriftField trial(shape, h);
        const double q = q_direct(trial);
        if (q > best.q + 1e-15) {
          best.field = std::move(trial);
          best.q = q;
          improved = true;
        }
      }
      h = best.field.half_values();
    }
    if (!improved) break;
  }
  best.amplitude = best.field.sup_norm();
  return best;
}

}  // namespace driftlab
