#include "driftlab/verify.hpp"

#include "driftlab/error.hpp"
#include "driftlab/lattice.hpp"
#include "driftlab/parallel.hpp"
#include "driftlab/qcore.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace driftlab {

namespace {

constexpr double kQuadratureBound = 1e-10;

std::vector<double> orders(const std::vector<double>& eps, const std::vector<double>& err) {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < eps.size(); ++i) {
    out.push_back(std::log(err[i] / err[i + 1]) / std::log(eps[i] / eps[i + 1]));
  }
  return out;
}

void require_decreasing(const std::vector<double>& eps) {
  if (eps.empty()) throw ValidationError("need at least one epsilon");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0.0)) throw ValidationError("epsilons must be positive");
    if (i > 0 && !(eps[i] < eps[i - 1])) throw ValidationError("epsilons must be strictly decreasing");
  }
}

}  // namespace

void SourceSpec::validate(int d) const {
  if (!(width > 0.0) || !std::isfinite(width)) throw ValidationError("source width must be positive");
  if (static_cast<int>(center.size()) != d) throw ShapeError("source center needs d coordinates");
}

double SourceSpec::operator()(std::span<const double> x) const {
  double r2 = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) r2 += (x[j] - center[j]) * (x[j] - center[j]);
  return std::exp(-r2 / (2.0 * width * width));
}

double SourceSpec::support_radius(double tol) const { return width * std::sqrt(2.0 * std::log(1.0 / tol)); }

bool ConvergenceReport::decreasing() const {
  for (std::size_t i = 1; i < sup_errors.size(); ++i) {
    if (!(sup_errors[i] < sup_errors[i - 1])) return false;
  }
  return true;
}

std::vector<int> GridSolution::point(std::size_t i) const {
  std::vector<int> p(lo.size());
  for (std::size_t a = lo.size(); a-- > 0;) {
    const auto n = static_cast<std::size_t>(hi[a] - lo[a] + 1);
    p[a] = lo[a] + static_cast<int>(i % n);
    i /= n;
  }
  return p;
}

Eigen::VectorXcd apply_T(const DriftField& b, double eta, const std::vector<double>& zeta) {
  if (!(eta > 0.0)) throw ValidationError("eta must be positive");
  OperatorSpec spec{b, Domain::FullTorus, BoundaryKind::None, zeta, eta, OperatorKind::Generator};
  const auto n = static_cast<Eigen::Index>(spec.size());
  const Eigen::VectorXcd rhs = Eigen::VectorXcd::Constant(n, Complex(eta, 0.0));
  Eigen::VectorXcd T = solve(spec, rhs);
  const double sup = T.size() ? T.cwiseAbs().maxCoeff() : 0.0;
  if (sup > 1.0 + 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "sup |T| = " << sup << " exceeds 1";
    throw ConsistencyError(os.str());
  }
  return T;
}

ConvergenceReport symbol_limit_report(const DriftField& b, const std::vector<double>& xi,
                                      const std::vector<double>& epsilons) {
  const int d = b.dim();
  if (static_cast<int>(xi.size()) != d) throw ShapeError("xi needs d components");
  require_decreasing(epsilons);
  const double q = q_direct(b);
  double denom = 1.0 + q * xi[0] * xi[0];
  for (int j = 1; j < d; ++j) denom += xi[static_cast<std::size_t>(j)] * xi[static_cast<std::size_t>(j)] / (2.0 * d);
  const double target = 1.0 / denom;

  ConvergenceReport r;
  r.epsilons = epsilons;
  for (double eps : epsilons) {
    std::vector<double> zeta(xi.size());
    for (std::size_t j = 0; j < xi.size(); ++j) {
      zeta[j] = eps * xi[j];
      if (std::abs(zeta[j]) > std::numbers::pi) throw ValidationError("eps * xi leaves [-pi, pi]");
    }
    const Eigen::VectorXcd T = apply_T(b, eps * eps, zeta);
    r.sup_errors.push_back((T.array() - Complex(target, 0.0)).abs().maxCoeff());
  }
  r.observed_orders = orders(r.epsilons, r.sup_errors);
  return r;
}

double box_radius(const DriftField& b, const SourceSpec& f, double tol) {
  const double slack = 1.0 - 2.0 * b.dim() * b.sup_norm();
  const double decay = 1.0 / std::sqrt(slack);
  return f.support_radius(tol) + decay * std::log(1.0 / tol);
}

GridSolution solve_u_eps(const DriftField& b, const SourceSpec& f, double eps, std::size_t omega,
                         const BoxOptions& opts) {
  const auto& shape = b.shape();
  const int d = shape.dim();
  if (d > 2) throw DimensionError("lattice resolvent solves are limited to d <= 2");
  if (!(eps > 0.0) || eps > 0.5) throw ValidationError("eps must lie in (0, 0.5]");
  if (!(opts.tol > 0.0) || opts.tol >= 1.0) throw ValidationError("tol must lie in (0, 1)");
  if (omega >= shape.sites()) throw ShapeError("environment offset outside the torus");
  f.validate(d);

  GridSolution g;
  g.eps = eps;
  const double R = box_radius(b, f, opts.tol);
  const int half = static_cast<int>(std::ceil(R / eps));
  double total = 1.0;
  for (int j = 0; j < d; ++j) {
    const int c = static_cast<int>(std::lround(f.center[static_cast<std::size_t>(j)] / eps));
    g.lo.push_back(c - half);
    g.hi.push_back(c + half);
    total *= 2.0 * half + 1.0;
  }
  if (total > static_cast<double>(opts.max_unknowns)) {
    std::ostringstream os;
    os << "box needs " << total << " unknowns, cap is " << opts.max_unknowns;
    throw BudgetError(os.str());
  }
  const auto n = static_cast<std::size_t>(total);
  const auto width = static_cast<std::size_t>(2 * half + 1);
  const double w = drift_bound(d);
  const std::vector<int> origin = shape.site(omega);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n * static_cast<std::size_t>(2 * d + 1));
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
  std::vector<int> env(static_cast<std::size_t>(d));
  std::vector<double> x(static_cast<std::size_t>(d));
  std::size_t stride[2] = {d == 2 ? width : 1, 1};
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = g.point(i);
    for (int j = 0; j < d; ++j) {
      env[static_cast<std::size_t>(j)] = origin[static_cast<std::size_t>(j)] + p[static_cast<std::size_t>(j)];
      x[static_cast<std::size_t>(j)] = eps * p[static_cast<std::size_t>(j)];
    }
    const double bx = b.at_index(shape.index(env));
    const int row = static_cast<int>(i);
    trip.emplace_back(row, row, 1.0 + eps * eps);
    for (int j = 0; j < d; ++j) {
      const int pos = p[static_cast<std::size_t>(j)] - g.lo[static_cast<std::size_t>(j)];
      const double up = j == 0 ? w + bx : w;
      const double down = j == 0 ? w - bx : w;
      const auto s = stride[j];
      if (pos + 1 < static_cast<int>(width)) trip.emplace_back(row, static_cast<int>(i + s), -up);
      if (pos > 0) trip.emplace_back(row, static_cast<int>(i - s), -down);
    }
    rhs[static_cast<Eigen::Index>(i)] = eps * eps * f(x);
  }
  Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw SingularError("sparse LU failed on the resolvent system");
  g.values = lu.solve(rhs);
  g.residual = (A * g.values - rhs).cwiseAbs().maxCoeff();
  if (!(g.residual <= opts.tol)) {
    std::ostringstream os;
    os << "resolvent residual " << g.residual << " above tol " << opts.tol;
    throw ConvergenceError(os.str());
  }
  return g;
}

double solve_homogenized(double q, const SourceSpec& f, std::span<const double> x, int d) {
  if (!(q > 0.0)) throw ValidationError("q must be positive");
  if (static_cast<int>(x.size()) != d) throw ShapeError("x needs d coordinates");
  f.validate(d);
  const double w2 = f.width * f.width;
  std::vector<double> a(static_cast<std::size_t>(d), 1.0 / (2.0 * d));
  a[0] = q;
  auto integrand = [&](double t) {
    double log_v = -t;
    for (int j = 0; j < d; ++j) {
      const double s2 = w2 + 2.0 * a[static_cast<std::size_t>(j)] * t;
      const double z = x[static_cast<std::size_t>(j)] - f.center[static_cast<std::size_t>(j)];
      log_v += 0.5 * std::log(w2 / s2) - z * z / (2.0 * s2);
    }
    return std::exp(log_v);
  };
  double error = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      integrand, 0.0, std::numeric_limits<double>::infinity(), 12, 1e-13, &error);
  if (!(error <= kQuadratureBound) || !std::isfinite(value)) {
    std::ostringstream os;
    os << "quadrature error estimate " << error << " above " << kQuadratureBound;
    throw QuadratureError(os.str());
  }
  return value;
}

double homogenized_1d_closed(double q, const SourceSpec& f, double x) {
  if (!(q > 0.0)) throw ValidationError("q must be positive");
  f.validate(1);
  const double l = std::sqrt(q);
  const double s = f.width;
  const double z = x - f.center[0];
  const double m = s * s / l;
  auto side = [&](double zz) {
    const double e = std::erfc((m - zz) / (s * std::numbers::sqrt2));
    return e == 0.0 ? 0.0 : std::exp(-zz / l + s * s / (2.0 * l * l)) * e;
  };
  const double k = s * std::sqrt(std::numbers::pi / 2.0);
  return k * (side(z) + side(-z)) / (2.0 * l);
}

double homogenized_2d_radial(const SourceSpec& f, std::span<const double> x) {
  f.validate(2);
  if (x.size() != 2) throw ShapeError("x needs 2 coordinates");
  const double D = 0.25;
  const double s2 = f.width * f.width;
  const double r = std::hypot(x[0] - f.center[0], x[1] - f.center[1]);
  auto integrand = [&](double rho) {
    if (rho <= 0.0) return 0.0;
    const double zb = rho * r / s2;
    // I0(z) e^{-z} keeps the Bessel factor bounded.
    const double i0 = zb < 700.0 ? boost::math::cyl_bessel_i(0, zb) * std::exp(-zb)
                                 : 1.0 / std::sqrt(2.0 * std::numbers::pi * zb);
    const double k0 = boost::math::cyl_bessel_k(0, rho / std::sqrt(D));
    return rho / D * k0 * std::exp(-(rho - r) * (rho - r) / (2.0 * s2)) * i0;
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  double error = 0.0;
  const double value = integrator.integrate(integrand, 0.0, std::numeric_limits<double>::infinity(), 1e-13, &error);
  if (!(error <= kQuadratureBound * std::max(1.0, std::abs(value)))) {
    throw QuadratureError("radial quadrature did not converge");
  }
  return value;
}

ConvergenceReport convergence_report(const DriftField& b, const SourceSpec& f, const std::vector<double>& epsilons,
                                     const ConvergenceOptions& opts) {
  require_decreasing(epsilons);
  if (!(opts.q_scale > 0.0)) throw ValidationError("q_scale must be positive");
  const auto& shape = b.shape();
  const int d = shape.dim();
  const double q = q_direct(b) * opts.q_scale;
  const int workers = opts.workers > 0 ? opts.workers : worker_count();

  ConvergenceReport r;
  r.epsilons = epsilons;
  for (double eps : epsilons) {
    const GridSolution first = solve_u_eps(b, f, eps, 0, opts.box);
    Eigen::VectorXd u(static_cast<Eigen::Index>(first.size()));
    parallel_for(first.size(), workers, [&](std::size_t i) {
      const auto p = first.point(i);
      std::vector<double> x(p.size());
      for (std::size_t j = 0; j < p.size(); ++j) x[j] = eps * p[j];
      u[static_cast<Eigen::Index>(i)] = solve_homogenized(q, f, x, d);
    });
    std::vector<double> errs(shape.sites(), 0.0);
    errs[0] = (first.values - u).cwiseAbs().maxCoeff();
    parallel_for(shape.sites() - 1, workers, [&](std::size_t k) {
      const GridSolution g = solve_u_eps(b, f, eps, k + 1, opts.box);
      errs[k + 1] = (g.values - u).cwiseAbs().maxCoeff();
    });
    r.sup_errors.push_back(*std::max_element(errs.begin(), errs.end()));
  }
  r.observed_orders = orders(r.epsilons, r.sup_errors);
  return r;
}

}  // namespace driftlab
