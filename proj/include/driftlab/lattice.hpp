#pragma once

#include "driftlab/env.hpp"

#include <Eigen/Core>

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

namespace driftlab {

using Complex = std::complex<double>;

enum class Domain { FullTorus, HalfTorus };

/// Ghost-cell rules at the x1 faces of the half torus.
///   Antisymmetric:              Psi(-1,y) = -Psi(0,y),  Psi(L,y) = -Psi(L-1,y)
///   Symmetric:                  Psi(-1,y) =  Psi(0,y),  Psi(L,y) =  Psi(L-1,y)
///   AntisymmetricInhomogeneous: Psi(-1,y) = -Psi(0,y),  Psi(L,y) = 1 - Psi(L-1,y)
enum class BoundaryKind { None, Antisymmetric, Symmetric, AntisymmetricInhomogeneous };

/// Which operator: the walk generator L_zeta or the formal adjoint L*.
enum class OperatorKind { Generator, Adjoint };

/// Describes the operator (L_zeta + eta) on one of the two domains.
struct OperatorSpec {
  DriftField drift;
  Domain domain = Domain::FullTorus;
  BoundaryKind bc = BoundaryKind::None;
  /// Empty means zeta = 0. Otherwise one entry per axis, each in [-pi, pi].
  std::vector<double> zeta;
  double eta = 0.0;
  OperatorKind kind = OperatorKind::Generator;

  /// Throws ShapeError / ValidationError on inconsistent combinations.
  void validate() const;
  bool is_real() const;
  std::size_t size() const;
  std::string cache_key() const;
};

/// (L_zeta + eta) v, ghost values per spec.bc. For the inhomogeneous boundary
/// this includes the affine contribution of the unit ghost source.
Eigen::VectorXd apply_generator(const OperatorSpec& spec, const Eigen::VectorXd& v);
Eigen::VectorXcd apply_generator(const OperatorSpec& spec, const Eigen::VectorXcd& v);

/// L* v on the half torus with symmetric ghosts; spec.bc must be Symmetric.
HalfField apply_adjoint(const OperatorSpec& spec, const HalfField& v);

/// Matrix of the linear part of the operator; the inhomogeneous boundary
/// contributes `affine_term` separately, so that apply(v) = A v - affine.
Eigen::MatrixXd assemble_dense(const OperatorSpec& spec);
Eigen::MatrixXcd assemble_dense_complex(const OperatorSpec& spec);
/// [1/(2d) + b] on the x1 = L-1 layer for AntisymmetricInhomogeneous, else 0.
Eigen::VectorXd affine_term(const OperatorSpec& spec);

/// Solves apply_generator(spec, v) = rhs (or the adjoint, per spec.kind).
/// Dense LU up to 10^4 unknowns, BiCGSTAB above. The residual sup-norm is
/// checked against tol * (1 + sup|rhs|).
Eigen::VectorXd solve(const OperatorSpec& spec, const Eigen::VectorXd& rhs, double tol = 1e-12);
Eigen::VectorXcd solve(const OperatorSpec& spec, const Eigen::VectorXcd& rhs, double tol = 1e-12);

/// Dense LU solve with a pivot check (SingularError) and residual check.
Eigen::VectorXd solve_dense(const Eigen::MatrixXd& A, const Eigen::VectorXd& rhs, double tol = 1e-12);

/// Number of cached factorisations kept per scalar type ("lattice.cache_max").
void set_cache_max(std::size_t n);
std::size_t cache_max();
std::size_t cache_size();
void clear_cache();

// Transverse torus operators. Delta is the (d-1)-dimensional second-difference
// Laplacian with periodic wrap.

Eigen::MatrixXd laplacian_matrix(const TransverseTorus& torus);
TransverseField apply_laplacian(const TransverseTorus& torus, const TransverseField& v);

/// (-Delta + c)^{-1} f, c > 0.
TransverseField inv_shifted_laplacian(const TransverseTorus& torus, const TransverseField& f, double c);
/// (-Delta + diag(shift))^{-1} f.
TransverseField inv_shifted_laplacian(const TransverseTorus& torus, const TransverseField& f,
                                      const TransverseField& shift);

/// Green's function of (-Delta/4 + 1) on Z:
/// G(y) = ((1-r)/(1+r)) r^|y| with r + 1/r = 6, 0 < r < 1.
double green_1d(long long y);
double green_1d_ratio();

}  // namespace driftlab
