#include "driftlab/lattice.hpp"

#include "driftlab/error.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdio>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

namespace driftlab {

namespace {

constexpr std::size_t kDenseLimit = 10000;
constexpr int kMaxIterations = 20000;

std::string hex_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v == 0.0 ? 0.0 : v);
  return buf;
}

template <typename Scalar>
Scalar phase(double angle) {
  if constexpr (std::is_same_v<Scalar, Complex>) {
    return std::polar(1.0, angle);
  } else {
    return 1.0;
  }
}

double zeta_of(const OperatorSpec& spec, int axis) {
  return spec.zeta.empty() ? 0.0 : spec.zeta[static_cast<std::size_t>(axis)];
}

// Ghost value Psi(x1, y) for x1 = -1 or x1 = L on the half torus, as
// sign * Psi(boundary layer) + constant.
struct Ghost {
  double sign;
  double constant;
};

Ghost ghost_rule(BoundaryKind bc, bool upper) {
  switch (bc) {
    case BoundaryKind::Antisymmetric:
      return {-1.0, 0.0};
    case BoundaryKind::Symmetric:
      return {1.0, 0.0};
    case BoundaryKind::AntisymmetricInhomogeneous:
      return {-1.0, upper ? 1.0 : 0.0};
    case BoundaryKind::None:
      break;
  }
  throw ValidationError("half-torus operator needs a boundary condition");
}

// One coupling of the stencil: row x reads Psi at layer x1 + step (same y'),
// where x1 + step may be a ghost layer.
template <typename Scalar, typename Visit>
void visit_stencil(const OperatorSpec& spec, std::size_t row, Visit&& visit) {
  const auto& shape = spec.drift.shape();
  const auto& b = spec.drift;
  const int d = shape.dim();
  const double w = 1.0 / (2.0 * d);
  const auto T = shape.transverse_sites();
  const int x1 = static_cast<int>(row / T);
  const std::size_t y = row % T;
  const bool adjoint = spec.kind == OperatorKind::Adjoint;

  visit(x1, y, Scalar(1.0 + spec.eta));
  for (int j = 1; j < d; ++j) {
    const double z = zeta_of(spec, j);
    const Scalar up = adjoint ? Scalar(w) : Scalar(w) * phase<Scalar>(-z);
    const Scalar down = adjoint ? Scalar(w) : Scalar(w) * phase<Scalar>(z);
    visit(x1, shape.transverse_neighbor(y, j, +1), -up);
    visit(x1, shape.transverse_neighbor(y, j, -1), -down);
  }
  const double z1 = zeta_of(spec, 0);
  if (adjoint) {
    visit(x1 + 1, y, Scalar(-(w - b.at(x1 + 1, y))));
    visit(x1 - 1, y, Scalar(-(w + b.at(x1 - 1, y))));
  } else {
    visit(x1 + 1, y, -Scalar(w + b.at(x1, y)) * phase<Scalar>(-z1));
    visit(x1 - 1, y, -Scalar(w - b.at(x1, y)) * phase<Scalar>(z1));
  }
}

template <typename Vec>
Vec apply_impl(const OperatorSpec& spec, const Vec& v) {
  using Scalar = typename Vec::Scalar;
  spec.validate();
  const std::size_t n = spec.size();
  if (static_cast<std::size_t>(v.size()) != n) {
    throw ShapeError("field has " + std::to_string(v.size()) + " entries, operator acts on " +
                     std::to_string(n));
  }
  const auto& shape = spec.drift.shape();
  const auto T = shape.transverse_sites();
  const bool half = spec.domain == Domain::HalfTorus;
  const int layers = half ? shape.half_length() : shape.extent(0);

  // Literal ghost-cell read of Psi at (x1, y).
  auto read = [&](int x1, std::size_t y) -> Scalar {
    if (!half) {
      const int r = ((x1 % layers) + layers) % layers;
      return v[static_cast<Eigen::Index>(static_cast<std::size_t>(r) * T + y)];
    }
    if (x1 < 0) {
      const Ghost g = ghost_rule(spec.bc, false);
      return g.sign * v[static_cast<Eigen::Index>(y)] + g.constant;
    }
    if (x1 >= layers) {
      const Ghost g = ghost_rule(spec.bc, true);
      return g.sign * v[static_cast<Eigen::Index>(static_cast<std::size_t>(layers - 1) * T + y)] +
             g.constant;
    }
    return v[static_cast<Eigen::Index>(static_cast<std::size_t>(x1) * T + y)];
  };

  Vec out(static_cast<Eigen::Index>(n));
  for (std::size_t row = 0; row < n; ++row) {
    Scalar acc(0.0);
    visit_stencil<Scalar>(spec, row, [&](int x1, std::size_t y, Scalar c) { acc += c * read(x1, y); });
    out[static_cast<Eigen::Index>(row)] = acc;
  }
  return out;
}

// Folds ghost couplings into boundary columns. Constants go to `affine`.
template <typename Scalar, typename Emit>
void fold_stencil(const OperatorSpec& spec, Emit&& emit) {
  const auto& shape = spec.drift.shape();
  const auto T = shape.transverse_sites();
  const bool half = spec.domain == Domain::HalfTorus;
  const int layers = half ? shape.half_length() : shape.extent(0);
  const std::size_t n = spec.size();
  for (std::size_t row = 0; row < n; ++row) {
    visit_stencil<Scalar>(spec, row, [&](int x1, std::size_t y, Scalar c) {
      double sign = 1.0;
      int layer = x1;
      if (!half) {
        layer = ((x1 % layers) + layers) % layers;
      } else if (x1 < 0 || x1 >= layers) {
        const bool upper = x1 >= layers;
        sign = ghost_rule(spec.bc, upper).sign;
        layer = upper ? layers - 1 : 0;
      }
      emit(row, static_cast<std::size_t>(layer) * T + y, sign * c);
    });
  }
}

template <typename Matrix>
Matrix assemble_impl(const OperatorSpec& spec) {
  using Scalar = typename Matrix::Scalar;
  spec.validate();
  const auto n = static_cast<Eigen::Index>(spec.size());
  Matrix A = Matrix::Zero(n, n);
  fold_stencil<Scalar>(spec, [&](std::size_t r, std::size_t c, Scalar v) {
    A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) += v;
  });
  return A;
}

template <typename Scalar>
Eigen::SparseMatrix<Scalar> assemble_sparse(const OperatorSpec& spec) {
  std::vector<Eigen::Triplet<Scalar>> triplets;
  triplets.reserve(spec.size() * static_cast<std::size_t>(2 * spec.drift.dim() + 1));
  fold_stencil<Scalar>(spec, [&](std::size_t r, std::size_t c, Scalar v) {
    triplets.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
  });
  const auto n = static_cast<Eigen::Index>(spec.size());
  Eigen::SparseMatrix<Scalar> A(n, n);
  A.setFromTriplets(triplets.begin(), triplets.end());  // duplicates are summed
  return A;
}

template <typename Matrix>
void check_pivots(const Eigen::PartialPivLU<Matrix>& lu) {
  const auto diag = lu.matrixLU().diagonal().cwiseAbs();
  const double big = diag.size() ? diag.maxCoeff() : 0.0;
  const double small = diag.size() ? diag.minCoeff() : 0.0;
  if (!(small > 1e-14 * big) || !std::isfinite(big)) {
    throw SingularError("LU pivot below threshold (min |u_ii| = " + hex_double(small) + ")");
  }
}

// FIFO cache of dense LU factorisations keyed by OperatorSpec::cache_key().
template <typename Matrix>
class LuCache {
 public:
  using Lu = Eigen::PartialPivLU<Matrix>;

  std::shared_ptr<const Lu> find(const std::string& key) {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : it->second;
  }

  void insert(const std::string& key, std::shared_ptr<const Lu> lu, std::size_t max) {
    std::lock_guard lock(mutex_);
    if (max == 0 || entries_.count(key)) return;
    while (entries_.size() >= max && !order_.empty()) {
      entries_.erase(order_.front());
      order_.pop_front();
    }
    entries_.emplace(key, std::move(lu));
    order_.push_back(key);
  }

  void trim(std::size_t max) {
    std::lock_guard lock(mutex_);
    while (entries_.size() > max && !order_.empty()) {
      entries_.erase(order_.front());
      order_.pop_front();
    }
  }

  std::size_t size() {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }

 private:
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const Lu>> entries_;
  std::deque<std::string> order_;
};

std::mutex g_config_mutex;
std::size_t g_cache_max = 64;

LuCache<Eigen::MatrixXd>& real_cache() {
  static LuCache<Eigen::MatrixXd> c;
  return c;
}

LuCache<Eigen::MatrixXcd>& complex_cache() {
  static LuCache<Eigen::MatrixXcd> c;
  return c;
}

template <typename Vec>
double sup_norm(const Vec& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

template <typename Matrix, typename Vec>
Vec solve_impl(const OperatorSpec& spec, const Vec& rhs, double tol, LuCache<Matrix>& cache) {
  using Scalar = typename Vec::Scalar;
  spec.validate();
  const std::size_t n = spec.size();
  if (static_cast<std::size_t>(rhs.size()) != n) throw ShapeError("right-hand side has the wrong length");

  // The affine boundary part moves to the right-hand side.
  Vec b = rhs;
  const Eigen::VectorXd affine = affine_term(spec);
  for (Eigen::Index i = 0; i < b.size(); ++i) b[i] += affine[i];
  const double bound = tol * (1.0 + sup_norm(rhs));

  Vec x;
  if (n <= kDenseLimit) {
    const std::string key = spec.cache_key();
    auto lu = cache.find(key);
    std::shared_ptr<const Eigen::PartialPivLU<Matrix>> A_lu = lu;
    Matrix A;
    if (!A_lu) {
      A = assemble_impl<Matrix>(spec);
      auto fresh = std::make_shared<Eigen::PartialPivLU<Matrix>>(A);
      check_pivots(*fresh);
      A_lu = fresh;
      cache.insert(key, A_lu, cache_max());
    }
    x = A_lu->solve(b);
    Vec r = apply_impl(spec, x) - rhs;
    if (sup_norm(r) > bound) {
      x -= A_lu->solve(r);  // one step of iterative refinement
      r = apply_impl(spec, x) - rhs;
    }
    if (!(sup_norm(r) <= bound)) {
      throw SingularError("residual " + hex_double(sup_norm(r)) + " exceeds tolerance after LU solve");
    }
    return x;
  }

  const Eigen::SparseMatrix<Scalar> A = assemble_sparse<Scalar>(spec);
  Eigen::BiCGSTAB<Eigen::SparseMatrix<Scalar>, Eigen::IncompleteLUT<Scalar>> solver;
  solver.setMaxIterations(kMaxIterations);
  solver.setTolerance(std::max(tol * 1e-2, 1e-15));
  solver.compute(A);
  if (solver.info() != Eigen::Success) throw SingularError("incomplete LU preconditioner failed");
  x = solver.solve(b);
  const Vec r = apply_impl(spec, x) - rhs;
  if (solver.info() == Eigen::NumericalIssue) throw SingularError("BiCGSTAB breakdown");
  if (!(sup_norm(r) <= bound)) {
    throw ConvergenceError("BiCGSTAB residual " + hex_double(sup_norm(r)) + " after " +
                           std::to_string(solver.iterations()) + " iterations");
  }
  return x;
}

}  // namespace

void OperatorSpec::validate() const {
  const int d = drift.dim();
  if (!zeta.empty()) {
    if (static_cast<int>(zeta.size()) != d) throw ShapeError("zeta needs one entry per axis");
    for (double z : zeta) {
      if (!std::isfinite(z) || std::abs(z) > std::numbers::pi) {
        throw ValidationError("zeta components must lie in [-pi, pi]");
      }
    }
  }
  if (!std::isfinite(eta) || eta < 0.0) throw ValidationError("eta must be a nonnegative real");
  if (domain == Domain::HalfTorus) {
    if (bc == BoundaryKind::None) throw ValidationError("half-torus operator needs a boundary condition");
    if (!is_real()) throw ValidationError("zeta must vanish on the half torus");
  }
  if (kind == OperatorKind::Adjoint && !is_real()) throw ValidationError("adjoint is defined at zeta = 0");
}

bool OperatorSpec::is_real() const {
  for (double z : zeta) {
    if (z != 0.0) return false;
  }
  return true;
}

std::size_t OperatorSpec::size() const {
  const auto& s = drift.shape();
  return domain == Domain::HalfTorus ? s.half_sites() : s.sites();
}

std::string OperatorSpec::cache_key() const {
  std::ostringstream os;
  os << (kind == OperatorKind::Adjoint ? "A" : "G") << (domain == Domain::HalfTorus ? "H" : "F")
     << static_cast<int>(bc) << ':' << drift.digest() << ':' << hex_double(eta);
  for (double z : zeta) os << ':' << hex_double(z);
  return os.str();
}

Eigen::VectorXd apply_generator(const OperatorSpec& spec, const Eigen::VectorXd& v) {
  if (!spec.is_real()) throw ValidationError("real overload needs zeta = 0");
  return apply_impl(spec, v);
}

Eigen::VectorXcd apply_generator(const OperatorSpec& spec, const Eigen::VectorXcd& v) {
  return apply_impl(spec, v);
}

HalfField apply_adjoint(const OperatorSpec& spec, const HalfField& v) {
  if (spec.domain != Domain::HalfTorus || spec.bc != BoundaryKind::Symmetric) {
    throw ValidationError("apply_adjoint acts on the half torus with symmetric bc");
  }
  OperatorSpec adj = spec;
  adj.kind = OperatorKind::Adjoint;
  return apply_impl(adj, v);
}

Eigen::MatrixXd assemble_dense(const OperatorSpec& spec) {
  if (!spec.is_real()) throw ValidationError("real assembly needs zeta = 0");
  return assemble_impl<Eigen::MatrixXd>(spec);
}

Eigen::MatrixXcd assemble_dense_complex(const OperatorSpec& spec) {
  return assemble_impl<Eigen::MatrixXcd>(spec);
}

Eigen::VectorXd affine_term(const OperatorSpec& spec) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.size()));
  if (spec.domain != Domain::HalfTorus || spec.bc != BoundaryKind::AntisymmetricInhomogeneous) return out;
  const auto& shape = spec.drift.shape();
  const auto T = shape.transverse_sites();
  const int top = shape.half_length() - 1;
  const double w = drift_bound(shape.dim());
  for (std::size_t y = 0; y < T; ++y) {
    const double c = spec.kind == OperatorKind::Adjoint ? w - spec.drift.at(top + 1, y)
                                                          : w + spec.drift.at(top, y);
    out[static_cast<Eigen::Index>(static_cast<std::size_t>(top) * T + y)] = c;
  }
  return out;
}

Eigen::VectorXd solve(const OperatorSpec& spec, const Eigen::VectorXd& rhs, double tol) {
  if (!spec.is_real()) throw ValidationError("real solve needs zeta = 0");
  return solve_impl(spec, rhs, tol, real_cache());
}

Eigen::VectorXcd solve(const OperatorSpec& spec, const Eigen::VectorXcd& rhs, double tol) {
  return solve_impl(spec, rhs, tol, complex_cache());
}

Eigen::VectorXd solve_dense(const Eigen::MatrixXd& A, const Eigen::VectorXd& rhs, double tol) {
  if (A.rows() != A.cols() || A.rows() != rhs.size()) throw ShapeError("solve_dense: size mismatch");
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  check_pivots(lu);
  Eigen::VectorXd x = lu.solve(rhs);
  const double bound = tol * (1.0 + sup_norm(rhs));
  Eigen::VectorXd r = A * x - rhs;
  if (sup_norm(r) > bound) {
    x -= lu.solve(r);
    r = A * x - rhs;
  }
  if (!(sup_norm(r) <= bound)) throw SingularError("dense solve residual exceeds tolerance");
  return x;
}

void set_cache_max(std::size_t n) {
  {
    std::lock_guard lock(g_config_mutex);
    g_cache_max = n;
  }
  real_cache().trim(n);
  complex_cache().trim(n);
}

std::size_t cache_max() {
  std::lock_guard lock(g_config_mutex);
  return g_cache_max;
}

std::size_t cache_size() { return real_cache().size() + complex_cache().size(); }

void clear_cache() {
  real_cache().trim(0);
  complex_cache().trim(0);
}

Eigen::MatrixXd laplacian_matrix(const TransverseTorus& torus) {
  const auto n = static_cast<Eigen::Index>(torus.sites());
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t y = 0; y < torus.sites(); ++y) {
    const auto r = static_cast<Eigen::Index>(y);
    for (int a = 0; a < torus.axes(); ++a) {
      D(r, static_cast<Eigen::Index>(torus.neighbor(y, a, +1))) += 1.0;
      D(r, static_cast<Eigen::Index>(torus.neighbor(y, a, -1))) += 1.0;
      D(r, r) -= 2.0;
    }
  }
  return D;
}

TransverseField apply_laplacian(const TransverseTorus& torus, const TransverseField& v) {
  if (static_cast<std::size_t>(v.size()) != torus.sites()) throw ShapeError("transverse field size mismatch");
  TransverseField out = TransverseField::Zero(v.size());
  for (std::size_t y = 0; y < torus.sites(); ++y) {
    double acc = 0.0;
    for (int a = 0; a < torus.axes(); ++a) {
      acc += v[static_cast<Eigen::Index>(torus.neighbor(y, a, +1))] +
             v[static_cast<Eigen::Index>(torus.neighbor(y, a, -1))] - 2.0 * v[static_cast<Eigen::Index>(y)];
    }
    out[static_cast<Eigen::Index>(y)] = acc;
  }
  return out;
}

TransverseField inv_shifted_laplacian(const TransverseTorus& torus, const TransverseField& f, double c) {
  if (!(c > 0.0)) throw ValidationError("shift must be positive");
  return inv_shifted_laplacian(torus, f, TransverseField::Constant(f.size(), c));
}

TransverseField inv_shifted_laplacian(const TransverseTorus& torus, const TransverseField& f,
                                      const TransverseField& shift) {
  if (static_cast<std::size_t>(f.size()) != torus.sites() || shift.size() != f.size()) {
    throw ShapeError("transverse field size mismatch");
  }
  Eigen::MatrixXd A = -laplacian_matrix(torus);
  A.diagonal() += shift;
  return solve_dense(A, f, 1e-13);
}

double green_1d_ratio() { return 3.0 - 2.0 * std::numbers::sqrt2; }

double green_1d(long long y) {
  const double r = green_1d_ratio();
  return (1.0 - r) / (1.0 + r) * std::pow(r, static_cast<double>(y < 0 ? -y : y));
}

}  // namespace driftlab
