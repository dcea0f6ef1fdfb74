#include "driftlab/qcore.hpp"

#include "driftlab/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace driftlab {

namespace {

OperatorSpec half_spec(const DriftField& b, BoundaryKind bc, OperatorKind kind = OperatorKind::Generator) {
  return OperatorSpec{b, Domain::HalfTorus, bc, {}, 0.0, kind};
}

double mean(const Eigen::VectorXd& v) {
  // Neumaier summation keeps the averages independent of magnitude ordering.
  double sum = 0.0, comp = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double t = sum + v[i];
    comp += std::abs(sum) >= std::abs(v[i]) ? (sum - t) + v[i] : (v[i] - t) + sum;
    sum = t;
  }
  return v.size() ? (sum + comp) / static_cast<double>(v.size()) : 0.0;
}

void require_positive(const Eigen::VectorXd& v, const char* what) {
  if (v.size() && !(v.minCoeff() > 0.0)) {
    std::ostringstream os;
    os << what << " has a nonpositive entry (min " << v.minCoeff() << ")";
    throw NonPositiveError(os.str());
  }
}

TransverseField layer_of_drift(const DriftField& b, int x1) {
  const auto T = b.shape().transverse_sites();
  TransverseField out(static_cast<Eigen::Index>(T));
  for (std::size_t y = 0; y < T; ++y) out[static_cast<Eigen::Index>(y)] = b.at(x1, y);
  return out;
}

void check_close(double a, double b, double tol, const char* what) {
  if (!(std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b))))) {
    std::ostringstream os;
    os.precision(17);
    os << what << ": " << a << " vs " << b;
    throw ConsistencyError(os.str());
  }
}

}  // namespace

double half_mean(const HalfField& v) { return mean(v); }

TransverseField layer(const TorusShape& shape, const HalfField& v, int x1) {
  const auto T = static_cast<Eigen::Index>(shape.transverse_sites());
  return v.segment(static_cast<Eigen::Index>(x1) * T, T);
}

TorusField symmetric_extension(const TorusShape& shape, const HalfField& half) {
  const auto T = shape.transverse_sites();
  const int L1 = shape.extent(0);
  const int L = shape.half_length();
  TorusField out(static_cast<Eigen::Index>(shape.sites()));
  for (int x1 = 0; x1 < L1; ++x1) {
    const int src = x1 < L ? x1 : L1 - 1 - x1;
    for (std::size_t y = 0; y < T; ++y) {
      out[static_cast<Eigen::Index>(static_cast<std::size_t>(x1) * T + y)] =
          half[static_cast<Eigen::Index>(static_cast<std::size_t>(src) * T + y)];
    }
  }
  return out;
}

TorusField antisymmetric_extension(const TorusShape& shape, const HalfField& half) {
  TorusField out = symmetric_extension(shape, half);
  const auto start = static_cast<Eigen::Index>(shape.half_sites());
  out.tail(out.size() - start) *= -1.0;
  return out;
}

HalfField corrector_phi(const DriftField& b) {
  return solve(half_spec(b, BoundaryKind::Antisymmetric), b.half_values());
}

HalfField invariant_phi_star(const DriftField& b) {
  // (L* + P) v = 1 with P the averaging projector; the range of L* is
  // orthogonal to constants, so mean(v) = 1 and L* v = 0.
  Eigen::MatrixXd A = assemble_dense(half_spec(b, BoundaryKind::Symmetric, OperatorKind::Adjoint));
  const auto n = A.rows();
  A.array() += 1.0 / static_cast<double>(n);
  HalfField v = solve_dense(A, Eigen::VectorXd::Ones(n), 1e-13);
  v /= mean(v);
  require_positive(v, "invariant measure");
  return v;
}

HalfField flux_psi(const DriftField& b, const HalfField& phi) {
  const auto& shape = b.shape();
  if (static_cast<std::size_t>(phi.size()) != shape.half_sites()) throw ShapeError("phi has the wrong size");
  const auto T = shape.transverse_sites();
  const int L = shape.half_length();
  const double w = drift_bound(shape.dim());
  auto at = [&](int x1, std::size_t y) {
    if (x1 < 0) return -phi[static_cast<Eigen::Index>(y)];
    if (x1 >= L) return -phi[static_cast<Eigen::Index>(static_cast<std::size_t>(L - 1) * T + y)];
    return phi[static_cast<Eigen::Index>(static_cast<std::size_t>(x1) * T + y)];
  };
  HalfField psi(phi.size());
  for (int x1 = 0; x1 < L; ++x1) {
    for (std::size_t y = 0; y < T; ++y) {
      const double bx = b.at(x1, y);
      psi[static_cast<Eigen::Index>(static_cast<std::size_t>(x1) * T + y)] =
          (w + bx) * at(x1 + 1, y) - (w - bx) * at(x1 - 1, y);
    }
  }
  return psi;
}

HalfField psi0(const DriftField& b) {
  const auto n = static_cast<Eigen::Index>(b.shape().half_sites());
  HalfField v = solve(half_spec(b, BoundaryKind::AntisymmetricInhomogeneous), Eigen::VectorXd(Eigen::VectorXd::Zero(n)));
  require_positive(v, "psi0");
  return v;
}

HalfField psi0_from_phi(const DriftField& b, const HalfField& phi) {
  const auto& shape = b.shape();
  const auto T = shape.transverse_sites();
  const double L1 = shape.extent(0);
  HalfField out(phi.size());
  for (Eigen::Index i = 0; i < phi.size(); ++i) {
    const double x1 = static_cast<double>(static_cast<std::size_t>(i) / T);
    out[i] = (2.0 * x1 + 1.0 + 4.0 * phi[i]) / (2.0 * L1);
  }
  return out;
}

CorrectorBundle correctors(const DriftField& b) {
  CorrectorBundle c;
  c.phi = corrector_phi(b);
  c.phi_star = invariant_phi_star(b);
  c.psi = flux_psi(b, c.phi);
  c.psi0 = psi0(b);
  return c;
}

double q_direct(const DriftField& b, const CorrectorBundle& c) {
  return drift_bound(b.dim()) + 2.0 * mean(c.phi_star.cwiseProduct(c.psi));
}

double q_direct(const DriftField& b) {
  const HalfField phi = corrector_phi(b);
  CorrectorBundle c;
  c.phi_star = invariant_phi_star(b);
  c.psi = flux_psi(b, phi);
  return q_direct(b, c);
}

double q_boundary(const DriftField& b, const CorrectorBundle& c) {
  const auto& shape = b.shape();
  const auto T = shape.transverse_sites();
  const double w = drift_bound(shape.dim());
  const double L1 = shape.extent(0);
  TransverseField t(static_cast<Eigen::Index>(T));
  for (std::size_t y = 0; y < T; ++y) {
    const auto i = static_cast<Eigen::Index>(y);
    t[i] = c.phi_star[i] * (w - b.at(0, y)) * c.psi0[i];
  }
  // The x1 = 0 layer carries 1/L of the half-torus mass.
  return L1 * L1 * mean(t) / shape.half_length();
}

double q_boundary(const DriftField& b) {
  CorrectorBundle c;
  c.phi_star = invariant_phi_star(b);
  c.psi0 = psi0(b);
  return q_boundary(b, c);
}

std::vector<Eigen::MatrixXd> chain_operators(const DriftField& b, bool reflected) {
  const auto& shape = b.shape();
  const int L = shape.half_length();
  const double w = drift_bound(shape.dim());
  const double s = reflected ? -1.0 : 1.0;
  const TransverseTorus torus = TransverseTorus::of(shape);
  const auto T = static_cast<Eigen::Index>(torus.sites());
  const Eigen::MatrixXd minus_lap = -laplacian_matrix(torus) / (2.0 * shape.dim());

  // 1-based delta_j = 1/2d - b(j-1), delta_bar_j = 1/2d + b(j-1).
  auto delta = [&](int j) { return TransverseField((w - s * layer_of_drift(b, j - 1).array()).matrix()); };
  auto delta_bar = [&](int j) { return TransverseField((w + s * layer_of_drift(b, j - 1).array()).matrix()); };

  std::vector<Eigen::MatrixXd> Ls;
  Ls.reserve(static_cast<std::size_t>(L) + 1);
  Ls.push_back(Eigen::MatrixXd::Zero(T, T));
  Ls.push_back(Eigen::MatrixXd::Identity(T, T));
  for (int k = 1; k < L; ++k) {
    const TransverseField dn = delta(k + 1);
    const TransverseField db = delta_bar(k);
    const TransverseField inv = dn.cwiseInverse();
    Eigen::MatrixXd M = minus_lap;
    M.diagonal() += db + dn;
    Ls.push_back(inv.asDiagonal() * (M * Ls[static_cast<std::size_t>(k)]) -
                 (inv.cwiseProduct(db)).asDiagonal() * Ls[static_cast<std::size_t>(k - 1)]);
  }
  return Ls;
}

Eigen::MatrixXd chain_transfer(const DriftField& b, int k, bool reflected) {
  const int L = b.shape().half_length();
  if (k < 2 || k > L) throw ValidationError("chain_transfer needs 2 <= k <= L");
  const auto Ls = chain_operators(b, reflected);
  const auto& Lk = Ls[static_cast<std::size_t>(k)];
  // A_k = L_{k-1} L_k^{-1}, i.e. A_k^T = L_k^{-T} L_{k-1}^T.
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(Lk.transpose());
  return lu.solve(Ls[static_cast<std::size_t>(k - 1)].transpose()).transpose();
}

double q_chain(const DriftField& b) {
  const auto& shape = b.shape();
  const int d = shape.dim();
  const int L = shape.half_length();
  const double w = drift_bound(d);
  const TransverseTorus torus = TransverseTorus::of(shape);
  const auto T = static_cast<Eigen::Index>(torus.sites());
  const TransverseField ones = TransverseField::Ones(T);
  const TransverseField b0 = layer_of_drift(b, 0);

  const Eigen::MatrixXd LL = chain_operators(b, false).back();
  const Eigen::MatrixXd LR = chain_operators(b, true).back();
  const TransverseField left = (w - b0.array()).matrix().cwiseProduct(solve_dense(LL, ones, 1e-12));
  const TransverseField right = (w + b0.array()).matrix().cwiseProduct(solve_dense(LR, ones, 1e-12));
  const TransverseField g = inv_shifted_laplacian(torus, right, 4.0);
  return 8.0 * L * L * d * mean(left.cwiseProduct(g));
}

Closed1d closed_1d(const DriftField& b) {
  if (b.dim() != 1) throw DimensionError("closed 1-d formula needs d = 1");
  const int L = b.shape().half_length();
  std::vector<double> dl(static_cast<std::size_t>(L) + 2), db(dl.size());
  for (int j = 1; j <= L; ++j) {
    dl[static_cast<std::size_t>(j)] = 0.5 - b.at(j - 1, 0);
    db[static_cast<std::size_t>(j)] = 0.5 + b.at(j - 1, 0);
  }
  // sum_r prod_{j<r} u_j prod_{j>r} v_j via prefix and suffix products.
  auto mixed = [L](const std::vector<double>& u, const std::vector<double>& v) {
    std::vector<double> suffix(static_cast<std::size_t>(L) + 2, 1.0);
    for (int j = L; j >= 1; --j) {
      suffix[static_cast<std::size_t>(j)] = suffix[static_cast<std::size_t>(j) + 1] * v[static_cast<std::size_t>(j)];
    }
    double prefix = 1.0, total = 0.0;
    for (int r = 1; r <= L; ++r) {
      total += prefix * suffix[static_cast<std::size_t>(r) + 1];
      prefix *= u[static_cast<std::size_t>(r)];
    }
    return total;
  };
  double prod_d = 1.0, prod_db = 1.0;
  for (int j = 1; j <= L; ++j) {
    prod_d *= dl[static_cast<std::size_t>(j)];
    prod_db *= db[static_cast<std::size_t>(j)];
  }
  Closed1d out;
  out.phi_star_delta = L * prod_d / mixed(db, dl);
  out.two_psi0 = prod_db / mixed(dl, db);
  out.q = 2.0 * L * out.phi_star_delta * out.two_psi0;
  return out;
}

double q_closed_1d(const DriftField& b) { return closed_1d(b).q; }

double q_slab2(const DriftField& b) {
  const auto& shape = b.shape();
  if (shape.extent(0) != 2) throw ShapeError("slab formula needs L1 = 2");
  const int d = shape.dim();
  const double w = drift_bound(d);
  const TransverseTorus torus = TransverseTorus::of(shape);
  const TransverseField b0 = layer_of_drift(b, 0);
  const double q = w - 8.0 * d * mean(b0.cwiseProduct(inv_shifted_laplacian(torus, b0, 4.0)));
  const TransverseField lo = (w - b0.array()).matrix();
  const TransverseField hi = (w + b0.array()).matrix();
  const double alt = 8.0 * d * mean(lo.cwiseProduct(inv_shifted_laplacian(torus, hi, 4.0)));
  check_close(q, alt, 1e-12, "slab forms disagree");
  if (q > w + 1e-12) throw ConsistencyError("slab value exceeds 1/2d");
  return q;
}

double q_slab4(const DriftField& b) {
  const auto& shape = b.shape();
  if (shape.extent(0) != 4) throw ShapeError("two-layer slab formula needs L1 = 4");
  const int d = shape.dim();
  const double w = drift_bound(d);
  const TransverseTorus torus = TransverseTorus::of(shape);
  const TransverseField b0 = layer_of_drift(b, 0);
  const TransverseField b1 = layer_of_drift(b, 1);
  const TransverseField delta = (w - b0.array()).matrix();
  const TransverseField delta_bar = (w + b0.array()).matrix();
  const TransverseField eps = (w + b1.array()).matrix();
  const TransverseField eps_bar = (w - b1.array()).matrix();
  const TransverseField V = 2.0 * d * (b1 - b0);
  if ((V.array().abs() >= 2.0).any()) throw SingularError("|V| reached 2");
  const auto two = TransverseField::Constant(V.size(), 2.0);
  const TransverseField left = delta.cwiseProduct(inv_shifted_laplacian(torus, eps_bar, two - V));
  const TransverseField right = delta_bar.cwiseProduct(inv_shifted_laplacian(torus, eps, two + V));
  const double q = 128.0 * d * d * d * mean(left.cwiseProduct(inv_shifted_laplacian(torus, right, 4.0)));
  if (d == 2 && q > 0.25 + 1e-12) throw ConsistencyError("two-layer slab value exceeds 1/4 in d = 2");
  return q;
}

double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-14});
}

QReport compute_report(const DriftField& b) {
  QReport r;
  r.bundle = correctors(b);
  r.q_direct = q_direct(b, r.bundle);
  if (!(r.q_direct >= 1e-12)) throw NonPositiveError("effective diffusion constant is not positive");
  r.q_boundary = q_boundary(b, r.bundle);
  r.q_chain = q_chain(b);
  const auto& shape = b.shape();
  if (shape.dim() == 1) r.q_closed_1d = q_closed_1d(b);
  if (shape.extent(0) == 2) r.q_slab2 = q_slab2(b);
  if (shape.extent(0) == 4) r.q_slab4 = q_slab4(b);
  r.shape = shape.dims();
  r.digest = b.digest();

  std::vector<double> all{r.q_direct, r.q_boundary, r.q_chain};
  for (const auto& opt : {r.q_closed_1d, r.q_slab2, r.q_slab4}) {
    if (opt) all.push_back(*opt);
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      r.max_rel_disagreement = std::max(r.max_rel_disagreement, rel_diff(all[i], all[j]));
    }
  }
  return r;
}

QVForm qv_form(const TransverseTorus& torus, const TransverseField& V, const TransverseField& f) {
  if (V.size() != f.size() || static_cast<std::size_t>(V.size()) != torus.sites()) {
    throw ShapeError("V and f must live on the transverse torus");
  }
  if (!(V.array().abs() < 2.0).all()) throw ValidationError("|V| must stay below 2");
  QVForm q;
  q.V = V;
  q.f = f;
  const auto two = TransverseField::Constant(V.size(), 2.0);
  q.w_plus = inv_shifted_laplacian(torus, f, two + V);
  q.w_minus = inv_shifted_laplacian(torus, f, two - V);
  q.U = inv_shifted_laplacian(torus, V, 4.0);

  const TransverseField& wp = q.w_plus;
  const TransverseField& wm = q.w_minus;
  const TransverseField penalty =
      (2.0 - V.array().abs()).square().matrix().cwiseProduct(wm.cwiseAbs2() + wp.cwiseAbs2());
  const TransverseField shifted_wp = 4.0 * wp - apply_laplacian(torus, wp);

  q.value = mean(wm.cwiseProduct(shifted_wp)) - 0.5 * mean(f.cwiseProduct(wp + wm)) -
            mean(f.cwiseProduct(q.U).cwiseProduct(wp - wm)) - 0.125 * mean(penalty);

  const TransverseField one_uv = (1.0 + q.U.array() * V.array()).matrix();
  q.value_alt = 2.0 * mean(wm.cwiseProduct(wp).cwiseProduct(one_uv)) +
                mean(q.U.cwiseProduct(wp).cwiseProduct(apply_laplacian(torus, wm))) -
                mean(q.U.cwiseProduct(wm).cwiseProduct(apply_laplacian(torus, wp))) - 0.125 * mean(penalty);

  const double scale = mean(f.cwiseAbs2()) + mean(wp.cwiseAbs2()) + mean(wm.cwiseAbs2());
  if (!(std::abs(q.value - q.value_alt) <= 1e-12 * std::max(1.0, scale))) {
    std::ostringstream os;
    os.precision(17);
    os << "quadratic form evaluations disagree: " << q.value << " vs " << q.value_alt;
    throw ConsistencyError(os.str());
  }
  return q;
}

LpmResult lpm_apply(const TransverseTorus& torus, const TransverseField& V, const TransverseField& Phi) {
  if (V.size() != Phi.size() || static_cast<std::size_t>(V.size()) != torus.sites()) {
    throw ShapeError("V and Phi must live on the transverse torus");
  }
  if ((V.array() == 0.0).any()) throw ZeroVError("V vanishes at some site");
  const TransverseField base = (2.0 * Phi - apply_laplacian(torus, Phi)).cwiseQuotient(V);
  LpmResult r;
  r.w_plus = base - Phi;
  r.w_minus = base + Phi;
  auto shifted = [&](const TransverseField& v, double sign) -> TransverseField {
    return 2.0 * v - apply_laplacian(torus, v) + sign * V.cwiseProduct(v);
  };
  r.f = shifted(r.w_plus, +1.0);
  const TransverseField other = shifted(r.w_minus, -1.0);
  r.identity_residual = r.f.size() ? (r.f - other).cwiseAbs().maxCoeff() : 0.0;
  return r;
}

}  // namespace driftlab
