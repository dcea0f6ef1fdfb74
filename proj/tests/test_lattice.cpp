#include "driftlab/error.hpp"
#include "driftlab/lattice.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace driftlab;

namespace {

OperatorSpec half_spec(const DriftField& b, BoundaryKind bc, OperatorKind kind = OperatorKind::Generator) {
  return OperatorSpec{b, Domain::HalfTorus, bc, {}, 0.0, kind};
}

double half_mean(const Eigen::VectorXd& v) { return v.mean(); }

}  // namespace

TEST(Generator, ConstantsOnFullTorus) {
  // (L + eta) 1 = eta; constants are harmonic for any drift.
  const DriftField b = fixtures::field({4, 4}, 5);
  OperatorSpec spec{b, Domain::FullTorus, BoundaryKind::None, {}, 0.3, OperatorKind::Generator};
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(spec.size()));
  EXPECT_LT((apply_generator(spec, one) - 0.3 * one).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Generator, LinearFunctionGivesDrift) {
  // L x1 = -2 b(x) away from the seam.
  const DriftField b = fixtures::field({8}, 2);
  OperatorSpec spec{b, Domain::FullTorus, BoundaryKind::None, {}, 0.0, OperatorKind::Generator};
  Eigen::VectorXd x(8);
  for (int i = 0; i < 8; ++i) x[i] = i;
  const Eigen::VectorXd Lx = apply_generator(spec, x);
  for (int i = 1; i < 7; ++i) EXPECT_NEAR(Lx[i], -2.0 * b.at(i, 0), 1e-15);
}

TEST(Generator, DenseMatchesApply) {
  std::mt19937_64 rng(11);
  for (auto bc : {BoundaryKind::Antisymmetric, BoundaryKind::Symmetric, BoundaryKind::AntisymmetricInhomogeneous}) {
    const DriftField b = fixtures::field({6, 3}, 4);
    const OperatorSpec spec = half_spec(b, bc);
    const Eigen::VectorXd v = fixtures::uniform_vector(rng, static_cast<Eigen::Index>(spec.size()), -1, 1);
    const Eigen::VectorXd direct = apply_generator(spec, v);
    const Eigen::VectorXd dense = assemble_dense(spec) * v - affine_term(spec);
    EXPECT_LT((direct - dense).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Generator, ComplexDenseMatchesApply) {
  std::mt19937_64 rng(12);
  const DriftField b = fixtures::field({4, 4}, 6);
  OperatorSpec spec{b, Domain::FullTorus, BoundaryKind::None, {0.7, -1.2}, 0.05, OperatorKind::Generator};
  const auto n = static_cast<Eigen::Index>(spec.size());
  Eigen::VectorXcd v(n);
  v.real() = fixtures::uniform_vector(rng, n, -1, 1);
  v.imag() = fixtures::uniform_vector(rng, n, -1, 1);
  EXPECT_LT((apply_generator(spec, v) - assemble_dense_complex(spec) * v).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Adjoint, DualityOnHalfTorus) {
  std::mt19937_64 rng(21);
  for (const auto& dims : std::vector<std::vector<int>>{{8}, {4, 4}, {6, 2}, {4, 2, 2}}) {
    for (int t = 0; t < 20; ++t) {
      const DriftField b = fixtures::field(dims, static_cast<std::uint64_t>(100 + t));
      const OperatorSpec gen = half_spec(b, BoundaryKind::Symmetric);
      const OperatorSpec adj = half_spec(b, BoundaryKind::Symmetric, OperatorKind::Adjoint);
      const auto n = static_cast<Eigen::Index>(gen.size());
      const Eigen::VectorXd Phi = fixtures::uniform_vector(rng, n, -1, 1);
      const Eigen::VectorXd Psi = fixtures::uniform_vector(rng, n, -1, 1);
      const double lhs = half_mean(Phi.cwiseProduct(apply_adjoint(adj, Psi)));
      const double rhs = half_mean(Psi.cwiseProduct(apply_generator(gen, Phi)));
      EXPECT_NEAR(lhs, rhs, 1e-13);
    }
  }
}

TEST(Adjoint, AnnihilatesNothingForZeroDrift) {
  const DriftField b = DriftField::zero(TorusShape({4, 2}));
  const OperatorSpec adj = half_spec(b, BoundaryKind::Symmetric, OperatorKind::Adjoint);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(adj.size()));
  EXPECT_LT(apply_adjoint(adj, one).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(OperatorSpec, Validation) {
  const DriftField b = fixtures::field({4, 2}, 1);
  EXPECT_THROW(half_spec(b, BoundaryKind::None).validate(), ValidationError);
  OperatorSpec z{b, Domain::HalfTorus, BoundaryKind::Symmetric, {0.1, 0.0}, 0.0, OperatorKind::Generator};
  EXPECT_THROW(z.validate(), ValidationError);
  OperatorSpec big{b, Domain::FullTorus, BoundaryKind::None, {4.0, 0.0}, 0.0, OperatorKind::Generator};
  EXPECT_THROW(big.validate(), ValidationError);
  OperatorSpec wrong{b, Domain::FullTorus, BoundaryKind::None, {0.1}, 0.0, OperatorKind::Generator};
  EXPECT_THROW(wrong.validate(), ShapeError);
  OperatorSpec neg{b, Domain::FullTorus, BoundaryKind::None, {}, -1.0, OperatorKind::Generator};
  EXPECT_THROW(neg.validate(), ValidationError);
}

TEST(Solve, ResidualAndCache) {
  clear_cache();
  std::mt19937_64 rng(31);
  const DriftField b = fixtures::field({8, 4}, 8);
  const OperatorSpec spec = half_spec(b, BoundaryKind::Antisymmetric);
  const Eigen::VectorXd rhs = fixtures::uniform_vector(rng, static_cast<Eigen::Index>(spec.size()), -1, 1);
  const Eigen::VectorXd v = solve(spec, rhs);
  EXPECT_LT((apply_generator(spec, v) - rhs).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(cache_size(), 1u);
  const Eigen::VectorXd again = solve(spec, rhs);
  EXPECT_EQ(v, again);
  EXPECT_EQ(cache_size(), 1u);
  const std::size_t old = cache_max();
  set_cache_max(0);
  EXPECT_EQ(cache_size(), 0u);
  set_cache_max(old);
}

TEST(Solve, SingularSystemIsReported) {
  // Symmetric bc has constants in the kernel of the generator.
  const DriftField b = fixtures::field({4, 2}, 9);
  const OperatorSpec spec = half_spec(b, BoundaryKind::Symmetric);
  const Eigen::VectorXd rhs = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(spec.size()));
  EXPECT_THROW(solve(spec, rhs), SingularError);
}

TEST(Solve, ComplexFullTorus) {
  const DriftField b = fixtures::field({6, 4}, 10);
  OperatorSpec spec{b, Domain::FullTorus, BoundaryKind::None, {0.3, -0.4}, 0.01, OperatorKind::Generator};
  const auto n = static_cast<Eigen::Index>(spec.size());
  const Eigen::VectorXcd rhs = Eigen::VectorXcd::Constant(n, Complex(1.0, 0.5));
  const Eigen::VectorXcd v = solve(spec, rhs);
  EXPECT_LT((apply_generator(spec, v) - rhs).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(Transverse, ShiftedLaplacianInverse) {
  std::mt19937_64 rng(41);
  const TransverseTorus torus({5, 3});
  const Eigen::VectorXd f = fixtures::uniform_vector(rng, 15, -1, 1);
  const Eigen::VectorXd u = inv_shifted_laplacian(torus, f, 4.0);
  EXPECT_LT((-apply_laplacian(torus, u) + 4.0 * u - f).cwiseAbs().maxCoeff(), 1e-14);
  const Eigen::VectorXd shift = fixtures::uniform_vector(rng, 15, 0.5, 3.5);
  const Eigen::VectorXd w = inv_shifted_laplacian(torus, f, shift);
  EXPECT_LT((-apply_laplacian(torus, w) + shift.cwiseProduct(w) - f).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(inv_shifted_laplacian(torus, f, 0.0), ValidationError);
  // Constants: Laplacian vanishes.
  EXPECT_LT(apply_laplacian(torus, Eigen::VectorXd::Ones(15)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Transverse, EmptyTorusIsOneSite) {
  const TransverseTorus torus({});
  EXPECT_EQ(torus.sites(), 1u);
  EXPECT_EQ(laplacian_matrix(torus).size(), 1);
  EXPECT_DOUBLE_EQ(laplacian_matrix(torus)(0, 0), 0.0);
}

TEST(Green, TableToFourPlaces) {
  EXPECT_NEAR(green_1d(0), 0.7071, 5e-5);
  EXPECT_NEAR(green_1d(1), 0.1213, 5e-5);
  EXPECT_NEAR(green_1d(2), 0.0208, 5e-5);
  EXPECT_EQ(green_1d(-3), green_1d(3));
  EXPECT_NEAR(green_1d_ratio(), 3.0 - 2.0 * std::sqrt(2.0), 1e-16);
}

TEST(Green, MatchesTruncatedSolve) {
  // (-Delta/4 + 1) G = delta_0 on {-200..200} with zero exterior.
  const int R = 200, n = 2 * R + 1;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    A(i, i) = 1.5;
    if (i > 0) A(i, i - 1) = -0.25;
    if (i + 1 < n) A(i, i + 1) = -0.25;
  }
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  e[R] = 1.0;
  const Eigen::VectorXd G = solve_dense(A, e);
  for (int y = 0; y <= 10; ++y) EXPECT_NEAR(G[R + y], green_1d(y), 1e-15);
}

TEST(Green, ConditionsForPositivity) {
  for (long long y = 1; y <= 10; ++y) {
    EXPECT_LE(4.0 * green_1d(y) - green_1d(y + 1) - green_1d(y - 1), 0.0);
  }
  EXPECT_LT(1.0 - green_1d(0) - 2.0 * green_1d(1), green_1d(1) / 2.0);
  EXPECT_LT(green_1d(2), green_1d(1) / 5.0);
}
