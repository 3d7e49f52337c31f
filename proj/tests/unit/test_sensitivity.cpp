#include "lacal/error.hpp"
#include "lacal/parameter_space.hpp"
#include "lacal/sensitivity.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace lacal;
using namespace lacal::sensitivity;

namespace {

ParameterSpace box(std::size_t d, double lo, double hi) {
  std::vector<ParameterDescriptor> p;
  for (std::size_t i = 0; i < d; ++i) p.push_back({"x" + std::to_string(i + 1), "-", lo, hi});
  return ParameterSpace(p);
}

template <class F>
Vector evaluate(const SaltelliDesign& design, F f) {
  Vector y(design.points.rows());
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = f(design.points.row(i).transpose());
  return y;
}

double ishigami(const Vector& x) {
  return std::sin(x[0]) + 7.0 * std::sin(x[1]) * std::sin(x[1]) + 0.1 * std::pow(x[2], 4) * std::sin(x[0]);
}

}  // namespace

TEST(Saltelli, LayoutAndCount) {
  const auto space = box(4, -1.0, 2.0);
  const auto d = saltelli_design(space, 64, 3);
  ASSERT_EQ(d.size(), 64u * 6u);
  EXPECT_TRUE(d.warnings.empty());
  for (Eigen::Index r = 0; r < d.points.rows(); ++r) EXPECT_TRUE(space.contains(d.points.row(r).transpose()));
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t r = 0; r < 64; ++r) {
      const auto row = static_cast<Eigen::Index>(d.block_start(2 + i) + r);
      for (Eigen::Index c = 0; c < 4; ++c) {
        const double expect = c == static_cast<Eigen::Index>(i) ? d.points(static_cast<Eigen::Index>(64 + r), c)
                                                                : d.points(static_cast<Eigen::Index>(r), c);
        EXPECT_EQ(d.points(row, c), expect);
      }
    }
  }
}

TEST(Saltelli, DeterministicAndWarnsOnNonPowerOfTwo) {
  const auto space = box(3, 0.0, 1.0);
  const auto a = saltelli_design(space, 100, 7);
  const auto b = saltelli_design(space, 100, 7);
  EXPECT_EQ(a.points, b.points);
  EXPECT_EQ(a.warnings.size(), 1u);
  EXPECT_NE(saltelli_design(space, 100, 8).points, a.points);
}

TEST(Saltelli, EmptySpaceRejected) {
  try {
    saltelli_design(ParameterSpace{}, 16, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_space);
  }
}

TEST(Sobol, IshigamiMatchesAnalyticDecomposition) {
  const double pi = std::numbers::pi;
  const double a = 7.0;
  const double b = 0.1;
  const double v1 = 0.5 * std::pow(1.0 + b * std::pow(pi, 4) / 5.0, 2);
  const double v2 = a * a / 8.0;
  const double v13 = b * b * std::pow(pi, 8) * (1.0 / 18.0 - 1.0 / 50.0);
  const double v = v1 + v2 + v13;

  const auto d = saltelli_design(box(3, -pi, pi), 1 << 14, 11);
  const auto r = sobol_indices(d, evaluate(d, ishigami), {}, 50, 1);
  EXPECT_NEAR(r.first[0], v1 / v, 0.02);
  EXPECT_NEAR(r.first[1], v2 / v, 0.02);
  EXPECT_NEAR(r.first[2], 0.0, 0.02);
  EXPECT_NEAR(r.total[2], v13 / v, 0.02);
  EXPECT_NEAR(r.total[0], (v1 + v13) / v, 0.02);
  EXPECT_NEAR(v1 / v, 0.3139, 1e-4);
  EXPECT_NEAR(v13 / v, 0.2437, 1e-4);
}

TEST(Sobol, AdditiveTotalEffectsFollowVarianceRatio) {
  const auto d = saltelli_design(box(2, 0.0, 1.0), 1 << 14, 2);
  const auto r = sobol_indices(d, evaluate(d, [](const Vector& x) { return x[0] + 2.0 * x[1]; }), {}, 0);
  EXPECT_NEAR(r.total[0], 0.2, 0.02);
  EXPECT_NEAR(r.total[1], 0.8, 0.02);
  EXPECT_NEAR(r.first.sum(), 1.0, 0.02);
}

TEST(Sobol, IrrelevantInputNearZero) {
  const auto d = saltelli_design(box(3, 0.0, 1.0), 1 << 12, 4);
  const auto r = sobol_indices(d, evaluate(d, [](const Vector& x) { return std::exp(x[0]) * x[1]; }), {}, 100, 2);
  EXPECT_NEAR(r.first[2], 0.0, 1e-12);
  EXPECT_NEAR(r.total[2], 0.0, 1e-12);
  EXPECT_LE(r.total_ci[2], 1e-12);
}

TEST(Sobol, AffineRescalingLeavesIndicesUnchanged) {
  const auto d = saltelli_design(box(3, -3.0, 3.0), 1 << 10, 5);
  const Vector y = evaluate(d, ishigami);
  const Vector z = (-4.0 * y.array() + 17.0).matrix();
  const auto ry = sobol_indices(d, y, {}, 0);
  const auto rz = sobol_indices(d, z, {}, 0);
  for (Eigen::Index i = 0; i < 3; ++i) {
    EXPECT_NEAR(ry.first[i], rz.first[i], 1e-9);
    EXPECT_NEAR(ry.total[i], rz.total[i], 1e-9);
  }
}

TEST(Sobol, BootstrapWidthsShrinkWithSampleSize) {
  const double pi = std::numbers::pi;
  std::vector<double> widths;
  for (std::size_t n : {256u, 512u, 1024u, 2048u}) {
    const auto d = saltelli_design(box(3, -pi, pi), n, 9);
    const auto r = sobol_indices(d, evaluate(d, ishigami), {}, 200, 3);
    widths.push_back(r.first_ci.sum() + r.total_ci.sum());
  }
  for (std::size_t i = 1; i < widths.size(); ++i) EXPECT_LT(widths[i], widths[i - 1]);
}

TEST(Sobol, ZeroVarianceAndShapeErrors) {
  const auto d = saltelli_design(box(2, 0.0, 1.0), 32, 0);
  try {
    sobol_indices(d, Vector::Constant(static_cast<Eigen::Index>(d.size()), 3.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::undefined_indices);
  }
  EXPECT_THROW(sobol_indices(d, Vector::Ones(5)), Error);
  EXPECT_THROW(sobol_indices(d, evaluate(d, [](const Vector& x) { return x[0]; }), {"only_one"}), Error);
}

namespace {

SobolResult fake(std::vector<double> total) {
  SobolResult r;
  r.total = Eigen::Map<Vector>(total.data(), static_cast<Eigen::Index>(total.size()));
  r.first = Vector::Zero(r.total.size());
  for (std::size_t i = 0; i < total.size(); ++i) r.inputs.push_back("p" + std::to_string(i));
  return r;
}

}  // namespace

TEST(Ranking, SingleOutputOrdersByTotalEffect) {
  const auto ranked = rank_parameters({fake({0.1, 0.5, 0.3})});
  ASSERT_EQ(ranked.size(), 3u);
  EXPECT_EQ(ranked[0].name, "p1");
  EXPECT_EQ(ranked[1].name, "p2");
  EXPECT_EQ(ranked[2].name, "p0");
  double sum = 0.0;
  for (const auto& r : ranked) sum += r.score;
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(Ranking, MaxOverOutputsNegativeClippedTiesKeepOrder) {
  const auto ranked = rank_parameters({fake({0.2, -0.3, 0.4}), fake({0.4, 0.0, 0.1})});
  EXPECT_EQ(ranked[0].name, "p0");
  EXPECT_EQ(ranked[1].name, "p2");
  EXPECT_EQ(ranked[2].name, "p1");
  EXPECT_DOUBLE_EQ(ranked[0].score, 0.5);
  EXPECT_DOUBLE_EQ(ranked[2].score, 0.0);
}
