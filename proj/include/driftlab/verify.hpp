#pragma once

#include "driftlab/env.hpp"

#include <Eigen/Core>

#include <complex>
#include <span>
#include <vector>

namespace driftlab {

/// f(x) = exp(-|x - center|^2 / (2 width^2)).
struct SourceSpec {
  double width = 1.0;
  std::vector<double> center;

  void validate(int d) const;
  double operator()(std::span<const double> x) const;
  /// Distance beyond which f < tol.
  double support_radius(double tol) const;
};

struct ConvergenceReport {
  std::vector<double> epsilons;
  std::vector<double> sup_errors;
  /// log(e_i / e_{i+1}) / log(eps_i / eps_{i+1}); one fewer than epsilons.
  std::vector<double> observed_orders;
  bool decreasing() const;
};

/// T_{eta,zeta}(1) = eta (L_zeta + eta)^{-1} 1 on the full torus.
/// ConsistencyError if sup|T| exceeds 1 + 1e-12.
Eigen::VectorXcd apply_T(const DriftField& b, double eta, const std::vector<double>& zeta);

/// For each eps: sup over the torus of |T_{eps^2, eps xi}(1) - 1/(1 + q xi1^2 + sum_{j>1} xi_j^2 / 2d)|.
ConvergenceReport symbol_limit_report(const DriftField& b, const std::vector<double>& xi,
                                      const std::vector<double>& epsilons);

/// u_eps on the box eps * {lo..hi}^d for one environment offset.
struct GridSolution {
  double eps = 0.0;
  std::vector<int> lo, hi;  // lattice index range per axis (inclusive)
  Eigen::VectorXd values;   // row-major, axis 0 slowest
  double residual = 0.0;
  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
  /// Lattice coordinates of entry i.
  std::vector<int> point(std::size_t i) const;
};

struct BoxOptions {
  double tol = 1e-10;
  std::size_t max_unknowns = 400000;
};

/// Box half-width in x units: support radius of f plus the decay length
/// 1 / sqrt(1 - 2d sup|b|) times log(1/tol).
double box_radius(const DriftField& b, const SourceSpec& f, double tol);

/// Solves the scaled lattice resolvent equation with environment offset
/// `omega` (a full-torus site index) and zero values outside the box.
/// d <= 2; BudgetError above opts.max_unknowns.
GridSolution solve_u_eps(const DriftField& b, const SourceSpec& f, double eps, std::size_t omega,
                         const BoxOptions& opts = {});

/// Homogenised solution at x, by the subordination integral
/// u(x) = int_0^inf e^{-t} prod_j [w / s_j] exp(-z_j^2 / (2 s_j^2)) dt,
/// s_j^2 = w^2 + 2 a_j t, a_1 = q, a_j = 1/2d. QuadratureError above 1e-10.
double solve_homogenized(double q, const SourceSpec& f, std::span<const double> x, int d);

/// d = 1 closed form with complementary error functions.
double homogenized_1d_closed(double q, const SourceSpec& f, double x);
/// d = 2 isotropic (q = 1/4) value by radial quadrature against the K0 kernel.
double homogenized_2d_radial(const SourceSpec& f, std::span<const double> x);

struct ConvergenceOptions {
  BoxOptions box;
  double q_scale = 1.0;  // multiplies q in the homogenised problem (control runs)
  int workers = 0;
};

/// Sup over grid points and all environment offsets of |u_eps - u|.
ConvergenceReport convergence_report(const DriftField& b, const SourceSpec& f, const std::vector<double>& epsilons,
                                     const ConvergenceOptions& opts = {});

}  // namespace driftlab
