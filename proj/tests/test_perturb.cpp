#include "driftlab/error.hpp"
#include "driftlab/perturb.hpp"
#include "driftlab/qcore.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace driftlab;

TEST(ModeEigenvalue, KnownValues) {
  const double pi = std::numbers::pi;
  // (6,2): xi = (pi/3, pi) gives 0.32.
  const std::vector<double> best{pi / 3, pi};
  EXPECT_NEAR(mode_eigenvalue(2, best), 0.32, 1e-15);
  // d = 1: 2 (cos x - (1 + cos x)) / (1 - cos x) = -2 / (1 - cos x) < 0.
  const std::vector<double> one{pi / 2};
  EXPECT_NEAR(mode_eigenvalue(1, one), -2.0, 1e-15);
  const std::vector<double> zero{0.0, 0.0};
  EXPECT_THROW(mode_eigenvalue(2, zero), ZeroDenominatorError);
  EXPECT_THROW(mode_eigenvalue(2, one), ShapeError);
}

TEST(ModeScan, OrderAndCount) {
  const TorusShape shape({6, 4});
  const auto modes = mode_scan(shape);
  EXPECT_EQ(modes.size(), 3u * 4u);
  for (std::size_t i = 1; i < modes.size(); ++i) {
    const auto& a = modes[i - 1];
    const auto& b = modes[i];
    EXPECT_TRUE(a.eigenvalue > b.eigenvalue || (a.eigenvalue == b.eigenvalue && std::tie(a.k, a.m) < std::tie(b.k, b.m)));
  }
}

TEST(ModeScan, AmplifyingModes) {
  EXPECT_FALSE(find_amplifying_mode(TorusShape({8})).has_value());
  EXPECT_FALSE(find_amplifying_mode(TorusShape({2, 4})).has_value());
  const auto m = find_amplifying_mode(TorusShape({6, 2}));
  ASSERT_TRUE(m.has_value());
  EXPECT_EQ(m->k, 1);
  EXPECT_EQ(m->m, std::vector<int>{1});
  EXPECT_NEAR(m->eigenvalue, 0.32, 1e-15);
}

TEST(SecondOrder, ZeroAndSmallDrift) {
  const SecondOrder z = second_order(DriftField::zero(TorusShape({4, 4})));
  EXPECT_EQ(z.direct, 0.0);
  EXPECT_EQ(z.q, 0.25);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const DriftField b = fixtures::field({6, 4}, s, 0.01);
    const SecondOrder so = second_order(b);
    EXPECT_NEAR(so.direct, so.spectral, 1e-11);
    const double gap = std::abs(q_direct(b) - so.q);
    EXPECT_LT(gap, 1e-2 * std::abs(so.q - 0.25) + 1e-15);
  }
}

TEST(SecondOrder, ModeFieldCurvature) {
  // q(a b_mode) - 1/4 ~ lambda a^2 / 2 for small a, with the mode normalised to sup 1 on layers.
  const TorusShape shape({6, 2});
  const std::vector<int> m{1};
  const DriftField b = mode_drift(shape, 1, m, 1e-3);
  const SecondOrder so = second_order(b);
  EXPECT_GT(so.q, 0.25);
  EXPECT_NEAR((q_direct(b) - 0.25) / (so.q - 0.25), 1.0, 1e-4);
}

TEST(Counterexample, SixByTwo) {
  const Counterexample ce = construct_counterexample(TorusShape({6, 2}), 0.2);
  EXPECT_GE(ce.q, 0.25 + 1e-4);
  EXPECT_NEAR(q_direct(ce.field), ce.q, 1e-15);
  EXPECT_EQ(ce.amplitude, 0.2);
  EXPECT_LE(ce.field.sup_norm(), 0.2);
}

TEST(Counterexample, Errors) {
  EXPECT_THROW(construct_counterexample(TorusShape({8}), 0.2), NoModeError);
  EXPECT_THROW(construct_counterexample(TorusShape({6, 2}), 0.25), AmplitudeError);
  EXPECT_THROW(construct_counterexample(TorusShape({6, 2}), 0.0), AmplitudeError);
}

TEST(Counterexample, RefineNeverLowers) {
  const TorusShape shape({6, 2});
  const Counterexample start = construct_counterexample(shape, 0.1);
  RefineOptions opts;
  opts.levels = 5;
  opts.max_sweeps = 3;
  const Counterexample r = refine_counterexample(start, 0.1, opts);
  EXPECT_GE(r.q, start.q);
  EXPECT_LE(r.field.sup_norm(), 0.1 + 1e-15);
  EXPECT_NEAR(q_direct(r.field), r.q, 1e-15);
  // Square wave in y, constant in x1: the corner of the box.
  for (int x1 = 0; x1 < 3; ++x1) {
    EXPECT_NEAR(std::abs(r.field.at(x1, 0)), 0.1, 1e-15);
  }
  EXPECT_THROW(refine_counterexample(start, 0.05, opts), AmplitudeError);
}
