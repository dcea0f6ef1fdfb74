#pragma once

#include "driftlab/env.hpp"
#include "driftlab/lattice.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace driftlab {

/// Correctors on the half torus, 0-based layers x1 = 0..L-1.
struct CorrectorBundle {
  HalfField phi;       // L phi = b, antisymmetric ghosts
  HalfField phi_star;  // L* phi* = 0, symmetric ghosts, mean 1
  HalfField psi;       // flux
  HalfField psi0;      // L psi0 = 0, psi0(L) = 1 - psi0(L-1)
};

HalfField corrector_phi(const DriftField& b);
/// Throws NonPositiveError if the computed measure has a nonpositive entry.
HalfField invariant_phi_star(const DriftField& b);
/// psi = (1/2d + b) phi(x + e1) - (1/2d - b) phi(x - e1), phi extended antisymmetrically.
HalfField flux_psi(const DriftField& b, const HalfField& phi);
/// Throws NonPositiveError if psi0 has a nonpositive entry.
HalfField psi0(const DriftField& b);
/// [2 x1 + 1 + 4 phi] / (2 L1).
HalfField psi0_from_phi(const DriftField& b, const HalfField& phi);
CorrectorBundle correctors(const DriftField& b);

/// Symmetric extension of a half-torus function to the full torus.
TorusField symmetric_extension(const TorusShape& shape, const HalfField& half);
/// Antisymmetric extension of a half-torus function to the full torus.
TorusField antisymmetric_extension(const TorusShape& shape, const HalfField& half);

/// Average over the half torus.
double half_mean(const HalfField& v);

/// x1 = layer slice of a half-torus field, as a transverse field.
TransverseField layer(const TorusShape& shape, const HalfField& v, int x1);

double q_direct(const DriftField& b);
double q_direct(const DriftField& b, const CorrectorBundle& c);
double q_boundary(const DriftField& b);
double q_boundary(const DriftField& b, const CorrectorBundle& c);

/// Chain operators L_0..L_L over the transverse torus; `reflected` swaps b -> -b.
std::vector<Eigen::MatrixXd> chain_operators(const DriftField& b, bool reflected = false);
/// A_k = L_{k-1} L_k^{-1}, k = 2..L.
Eigen::MatrixXd chain_transfer(const DriftField& b, int k, bool reflected = false);
double q_chain(const DriftField& b);

struct Closed1d {
  double phi_star_delta;  // phi*(1) delta_1
  double two_psi0;        // 2 psi0(1)
  double q;
};
/// d = 1 only; DimensionError otherwise.
Closed1d closed_1d(const DriftField& b);
double q_closed_1d(const DriftField& b);

/// L1 = 2 only. Also checks the alternative boundary form and q <= 1/2d.
double q_slab2(const DriftField& b);
/// L1 = 4 only. For d = 2 also checks q <= 1/4.
double q_slab4(const DriftField& b);

struct QReport {
  double q_direct = 0.0;
  double q_boundary = 0.0;
  double q_chain = 0.0;
  std::optional<double> q_closed_1d;
  std::optional<double> q_slab2;
  std::optional<double> q_slab4;
  double max_rel_disagreement = 0.0;
  CorrectorBundle bundle;
  std::vector<int> shape;
  std::string digest;
};

/// Evaluates every applicable route. Throws NonPositiveError if q_direct < 1e-12.
QReport compute_report(const DriftField& b);

/// Relative difference with the denominator floored at 1e-14.
double rel_diff(double a, double b);

struct QVForm {
  TransverseField V, U, f, w_plus, w_minus;
  double value = 0.0;      // expanded form
  double value_alt = 0.0;  // form with U V and Laplacian cross terms
};

/// Requires |V| < 2. Checks that the two evaluations agree to 1e-12.
QVForm qv_form(const TransverseTorus& torus, const TransverseField& V, const TransverseField& f);

struct LpmResult {
  TransverseField w_plus, w_minus, f;
  double identity_residual = 0.0;  // sup |[-D+2+V]w+ - [-D+2-V]w-|
};

/// w+ = (-D+2)Phi/V - Phi, w- = (-D+2)Phi/V + Phi. ZeroVError if V vanishes somewhere.
LpmResult lpm_apply(const TransverseTorus& torus, const TransverseField& V, const TransverseField& Phi);

}  // namespace driftlab
