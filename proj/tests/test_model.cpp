#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "dsm/model.hpp"
#include "dsm/problems.hpp"
#include "eigen_oracle.hpp"

using namespace dsm;

namespace {

DsmProblem make(const Matrix& l, NonlinearMap g, Vector u0, double eps = 0.0, double r = 1.0) {
  return DsmProblem(DenseOperator(l), std::move(g), std::move(u0), r, eps);
}

void expect_vec_near(const Vector& a, const Vector& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

void expect_mat_near(const Matrix& a, const Matrix& b, double tol) {
  ASSERT_EQ(a.rows(), b.rows());
  ASSERT_EQ(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) EXPECT_NEAR(a(i, j), b(i, j), tol) << i << "," << j;
}

} // namespace

TEST(DsmProblem, ValidatesInvariants) {
  EXPECT_THROW(make(Matrix::identity(2), nonlinear::zero(3), Vector(2)), DimensionMismatch);
  EXPECT_THROW(make(Matrix::identity(2), nonlinear::zero(2), Vector(3)), DimensionMismatch);
  EXPECT_THROW(make(Matrix::identity(2), nonlinear::zero(2), Vector(2), 0.0, 0.0), InvalidArgument);
  EXPECT_THROW(make(Matrix::identity(2), nonlinear::zero(2), Vector(2), -1.0), InvalidArgument);
}

TEST(DsmProblem, SingularOperatorOnlyFailsWhenInverted) {
  const auto p = make(Matrix::diagonal(Vector{1, 0}), nonlinear::constant(Vector{-1, 0}), Vector(2));
  EXPECT_FALSE(p.shifted_invertible());
  EXPECT_THROW(preconditioned_residual(p, Vector(2)), SingularOperator);
  EXPECT_TRUE(p.with_epsilon(0.1).shifted_invertible());
}

TEST(FullResidual, Examples) {
  const auto p1 = make(Matrix::identity(2), nonlinear::zero(2), Vector(2));
  expect_vec_near(full_residual(p1, Vector{1, 2}), Vector{1, 2}, 0.0);
  const auto p2 = make(Matrix::diagonal(Vector{1, 0}), nonlinear::constant(Vector{-1, 0}), Vector(2));
  expect_vec_near(full_residual(p2, Vector{1, 0}), Vector{0, 0}, 0.0);
  const auto p3 = p2.with_epsilon(0.5);
  expect_vec_near(full_residual(p3, Vector{2.0 / 3.0, 0}), Vector{0, 0}, 1e-15);
}

TEST(PreconditionedResidual, Examples) {
  const auto p1 = make(Matrix{{3, 1}, {1, 2}}, nonlinear::zero(2), Vector(2));
  expect_vec_near(preconditioned_residual(p1, Vector{0.3, -4}), Vector{0.3, -4}, 0.0);
  const auto p2 = make(Matrix::identity(2), nonlinear::affine(-1.0 * Matrix::identity(2), Vector(2)), Vector(2));
  expect_vec_near(preconditioned_residual(p2, Vector{1.7, -2.2}), Vector{0, 0}, 1e-15);
  const auto p3 = make(Matrix::diagonal(Vector{2, 2}), nonlinear::constant(Vector{2, 4}), Vector(2));
  expect_vec_near(preconditioned_residual(p3, Vector{0, 0}), Vector{1, 2}, 1e-15);
}

TEST(LinearizedOperator, Examples) {
  const auto p1 = make(Matrix{{3, 1}, {1, 2}}, nonlinear::constant(Vector{1, 1}), Vector(2));
  expect_mat_near(linearized_operator(p1, Vector{0.5, 0.5}), Matrix::identity(2), 0.0);
  const auto p2 = make(Matrix::identity(2), nonlinear::affine(Matrix::identity(2), Vector(2)), Vector(2));
  expect_mat_near(linearized_operator(p2, Vector{1, 1}), 2.0 * Matrix::identity(2), 1e-15);
  const auto p3 = make(Matrix::diagonal(Vector{1, 2}), nonlinear::affine(Matrix{{0, 1}, {1, 0}}, Vector(2)), Vector(2));
  expect_mat_near(linearized_operator(p3, Vector(2)), Matrix{{1, 1}, {0.5, 1}}, 1e-15);
}

TEST(ModelInvariants, FullResidualIsShiftedTimesPreconditioned) {
  const auto gp = gen_wellposed_cubic(6, 0.5, 3);
  const auto p = gp.problem.with_epsilon(0.3);
  for (const auto& u : ball_samples(p.u0(), p.radius(), 20, 5)) {
    const Vector lhs = full_residual(p, u);
    const Vector rhs = p.L().matrix().shifted(p.epsilon()) * preconditioned_residual(p, u);
    EXPECT_LE(distance(lhs, rhs), 1e-10 * std::max(1.0, norm(lhs)));
  }
}

TEST(ModelInvariants, LinearizedOperatorIsJacobianOfPreconditionedResidual) {
  const auto gp = gen_wellposed_cubic(5, 1.0, 9);
  const auto& p = gp.problem;
  const double h = 1e-5;
  for (const auto& u : ball_samples(p.u0(), p.radius(), 5, 2)) {
    const Matrix j = linearized_operator(p, u);
    for (std::size_t k = 0; k < u.size(); ++k) {
      Vector up = u, um = u;
      up[k] += h;
      um[k] -= h;
      Vector fd = preconditioned_residual(p, up) - preconditioned_residual(p, um);
      fd *= 1.0 / (2 * h);
      const Vector col = j.column(k);
      EXPECT_LE(distance(fd, col), 1e-6 * std::max(1.0, norm(col)));
    }
  }
}

TEST(EstimateM1, ConstantNonlinearityGivesOne) {
  const auto p = make(Matrix{{4, 1}, {1, 3}}, nonlinear::constant(Vector{1, -2}), Vector(2));
  const auto c = estimate_m1(p, ball_samples(p.u0(), 1.0, 10));
  EXPECT_TRUE(c.passed);
  EXPECT_NEAR(c.at("m1"), 1.0, 1e-14);
}

TEST(EstimateM1, IdentityDerivativeGivesHalf) {
  const auto p = make(Matrix::identity(3), nonlinear::affine(Matrix::identity(3), Vector(3)), Vector(3));
  EXPECT_NEAR(estimate_m1(p, ball_samples(p.u0(), 1.0, 10)).at("m1"), 0.5, 1e-14);
}

TEST(EstimateM1, SingularLinearizationThrows) {
  const auto p = make(Matrix::identity(2), nonlinear::affine(-1.0 * Matrix::identity(2), Vector(2)), Vector(2));
  EXPECT_THROW(estimate_m1(p, {Vector(2)}), SingularLinearization);
}

TEST(EstimateM1, CubicMatchesDenseSamplingOracle) {
  const auto gp = gen_wellposed_cubic(10, 0.1, 42);
  const auto p = gp.problem.with_radius(1.0);
  const double est = estimate_m1(p, ball_samples(p.u0(), 1.0, 50, 42)).at("m1");
  // Oracle: 1e4 samples, inverse of sigma_min through Eigen's SVD.
  const Eigen::MatrixXd linv = dsm_test::to_eigen(p.L().matrix()).inverse();
  double brute = 0.0;
  for (const auto& u : ball_samples(p.u0(), 1.0, 10000, 4242)) {
    const Eigen::MatrixXd j = Eigen::MatrixXd::Identity(10, 10) + linv * dsm_test::to_eigen(p.g().jacobian(u));
    brute = std::max(brute, 1.0 / Eigen::JacobiSVD<Eigen::MatrixXd>(j).singularValues().minCoeff());
  }
  EXPECT_NEAR(est, brute, 0.1 * brute);
}

TEST(EstimateM1, NondecreasingInSampleSet) {
  const auto gp = gen_wellposed_cubic(6, 1.0, 8);
  const auto samples = ball_samples(gp.problem.u0(), gp.problem.radius(), 60, 1);
  double prev = 0.0;
  for (std::size_t k = 5; k <= 60; k += 5) {
    const double m1 = estimate_m1(gp.problem, {samples.begin(), samples.begin() + k}).at("m1");
    EXPECT_GE(m1, prev);
    prev = m1;
  }
}

TEST(BallSamples, CentreFirstAndInsideBall) {
  const Vector c{1, -1, 2};
  const auto s = ball_samples(c, 0.5, 100, 3);
  ASSERT_EQ(s.size(), 100u);
  EXPECT_EQ(s.front(), c);
  for (const auto& u : s) EXPECT_LE(distance(u, c), 0.5 + 1e-15);
  EXPECT_EQ(ball_samples(c, 0.5, 100, 3), s);
}

TEST(TrustCondition, StartAtSolutionPasses) {
  const auto p = make(Matrix::diagonal(Vector{2, 2}), nonlinear::constant(Vector{2, 4}), Vector{-1, -2}, 0.0, 1e-3);
  const auto c = check_trust_condition(p, 7.0);
  EXPECT_TRUE(c.passed);
  EXPECT_EQ(c.at("p0"), 0.0);
}

TEST(TrustCondition, ExplicitFailure) {
  const auto p = make(Matrix::identity(2), nonlinear::zero(2), Vector{1, 0}, 0.0, 0.5);
  const auto c = check_trust_condition(p, 1.0);
  EXPECT_FALSE(c.passed);
  EXPECT_DOUBLE_EQ(c.at("p0"), 1.0);
  EXPECT_DOUBLE_EQ(c.at("margin"), -0.5);
}

TEST(TrustCondition, CubicWithDoubledRadiusHasMarginP0M1) {
  const auto gp = gen_wellposed_cubic(8, 0.1, 5);
  const auto& p = gp.problem;
  const double m1 = estimate_m1(p, ball_samples(p.u0(), p.radius(), 64, 5)).at("m1");
  const double p0 = norm(preconditioned_residual(p, p.u0()));
  const auto c = check_trust_condition(p.with_radius(2 * p0 * m1), m1);
  EXPECT_TRUE(c.passed);
  EXPECT_NEAR(c.at("margin"), p0 * m1, 1e-14);
}

TEST(TrustCondition, RejectsNonpositiveM1) {
  const auto p = make(Matrix::identity(2), nonlinear::zero(2), Vector(2));
  EXPECT_THROW(check_trust_condition(p, 0.0), InvalidArgument);
}

TEST(ResolventBound, Examples) {
  const auto p1 = make(Matrix::diagonal(Vector{0, 1}), nonlinear::zero(2), Vector(2));
  const auto c1 = check_resolvent_bound(p1, {0.5});
  EXPECT_TRUE(c1.passed);
  EXPECT_NEAR(c1.at("norm_0"), 2.0, 1e-12);
  EXPECT_DOUBLE_EQ(c1.at("bound_0"), 2.0);
  const auto p2 = make(Matrix::identity(3), nonlinear::zero(3), Vector(3));
  const auto c2 = check_resolvent_bound(p2, {1.0});
  EXPECT_TRUE(c2.passed);
  EXPECT_NEAR(c2.at("norm_0"), 0.5, 1e-14);
}

TEST(ResolventBound, HilbertMatchesEigenvalueFormula) {
  const Matrix h = dsm_test::hilbert(6);
  const auto p = DsmProblem(DenseOperator(h, {true, true}), nonlinear::zero(6), Vector(6), 1.0);
  const std::vector<double> grid{1e-1, 1e-2, 1e-3};
  const auto c = check_resolvent_bound(p, grid);
  EXPECT_TRUE(c.passed);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dsm_test::to_eigen(h));
  const double lmin = es.eigenvalues().minCoeff();
  double prev_rel_margin = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double expected = 1.0 / (lmin + grid[k]);
    EXPECT_NEAR(c.at("norm_" + std::to_string(k)), expected, 1e-8 * expected);
    // relative margin lambda_min / (lambda_min + eps) grows as eps shrinks
    const double rel = 1.0 - c.at("norm_" + std::to_string(k)) * grid[k];
    EXPECT_NEAR(rel, lmin / (lmin + grid[k]), 1e-8);
    EXPECT_GT(rel, prev_rel_margin);
    prev_rel_margin = rel;
  }
}

TEST(ResolventBound, RandomPsdAlwaysPasses) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    Matrix b(5, 3);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 3; ++j) b(i, j) = g(rng);
    const Matrix l = b * b.transpose();
    const auto p = DsmProblem(DenseOperator(l), nonlinear::zero(5), Vector(5), 1.0);
    EXPECT_TRUE(check_resolvent_bound(p, {1, 1e-2, 1e-4, 1e-6}).passed);
  }
}

TEST(ResolventBound, NonsymmetricNeedsSector) {
  const auto p = make(Matrix{{0, 1}, {-1, 0}}, nonlinear::zero(2), Vector(2));
  EXPECT_THROW(check_resolvent_bound(p, {0.5}), NotApplicable);
  const auto c = check_resolvent_bound(p, {0.5, 0.1}, SectorAssumption{0.5, std::numbers::pi / 6});
  EXPECT_TRUE(c.passed);
  EXPECT_NEAR(c.at("sin_delta"), 0.5, 1e-15);
}

TEST(ResolventBound, IndefiniteWithoutSectorNotApplicable) {
  const auto p = make(Matrix::diagonal(Vector{-1, 1}), nonlinear::zero(2), Vector(2));
  EXPECT_THROW(check_resolvent_bound(p, {0.5}), NotApplicable);
}

TEST(Sector, Examples) {
  EXPECT_TRUE(check_sector(DenseOperator(Matrix::identity(3)), 0.5, 0.3).passed);
  EXPECT_FALSE(check_sector(DenseOperator(Matrix::diagonal(Vector{-0.1, 1})), 0.5, 0.3).passed);
  const auto c = check_sector(DenseOperator(Matrix{{0, 1}, {-1, 0}}), 0.5, std::numbers::pi / 6);
  EXPECT_TRUE(c.passed);
  EXPECT_GT(c.at("margin"), 0.0);
  EXPECT_EQ(c.at("grid_points"), 72.0);  // 9 angles x ceil(64 / 9) moduli
}

TEST(Sector, NonsymmetricWithSpectrumInSectorFails) {
  // eigenvalues -0.2 +- 0.05 i lie inside the sector around the negative axis
  const Matrix l{{-0.2, 0.05}, {-0.05, -0.2}};
  EXPECT_FALSE(check_sector(DenseOperator(l), 0.5, std::numbers::pi / 6, 400).passed);
}

TEST(Sector, RejectsBadParameters) {
  const DenseOperator l(Matrix::identity(2));
  EXPECT_THROW(check_sector(l, 0.0, 0.3), InvalidArgument);
  EXPECT_THROW(check_sector(l, 0.5, 2.0), InvalidArgument);
}

TEST(FdJacobianCheck, Examples) {
  EXPECT_LE(fd_jacobian_check(nonlinear::affine(Matrix{{1, 2}, {3, 4}}, Vector(2)), Vector{0.3, -0.7}), 1e-9);
  EXPECT_LE(fd_jacobian_check(nonlinear::cubic(1.0, Vector(2)), Vector{1, 1}, 1e-5), 1e-6);
  EXPECT_LE(fd_jacobian_check(nonlinear::constant(Vector{5, -3}), Vector{2, 2}), 1e-12);
}

TEST(FdJacobianCheck, DetectsWrongJacobian) {
  const NonlinearMap bad(
      2, [](const Vector& u) { return Vector{u[0] * u[0], u[1]}; }, [](const Vector&) { return Matrix::identity(2); });
  EXPECT_GT(fd_jacobian_check(bad, Vector{2, 1}), 0.5);
}

TEST(FdJacobianCheck, StepOutOfRangeThrows) {
  EXPECT_THROW(fd_jacobian_check(nonlinear::zero(2), Vector(2), 1e-3), InvalidArgument);
  EXPECT_THROW(fd_jacobian_check(nonlinear::zero(2), Vector(2), 1e-9), InvalidArgument);
}

TEST(Monotonicity, Examples) {
  const auto samples = ball_samples(Vector(2), 2.0, 20, 1);
  EXPECT_TRUE(monotonicity_certificate(nonlinear::cubic(1.0, Vector(2)), samples).passed);
  EXPECT_FALSE(monotonicity_certificate(nonlinear::affine(-1.0 * Matrix::identity(2), Vector(2)), samples).passed);
  const auto c = monotonicity_certificate(nonlinear::affine(Matrix{{1, 2}, {0, 1}}, Vector(2)), samples);
  EXPECT_TRUE(c.passed);
  EXPECT_NEAR(c.at("min_symmetric_eigenvalue"), 0.0, 1e-14);
}

TEST(Certificate, JsonCarriesQuantities) {
  const auto p = make(Matrix::identity(2), nonlinear::zero(2), Vector{1, 0}, 0.0, 0.5);
  const auto j = to_json(check_trust_condition(p, 1.0));
  EXPECT_EQ(j["kind"], "TrustCondition");
  EXPECT_EQ(j["passed"], false);
  EXPECT_DOUBLE_EQ(j["quantities"]["p0"].get<double>(), 1.0);
}

TEST(Certificate, InvertibleRecordsBound) {
  const auto p = make(Matrix::diagonal(Vector{2, 4}), nonlinear::zero(2), Vector(2));
  const auto c = check_invertible(p);
  EXPECT_TRUE(c.passed);
  EXPECT_NEAR(c.at("m"), 0.5, 1e-14);
  EXPECT_NEAR(c.at("condition"), 2.0, 1e-13);
  EXPECT_FALSE(check_invertible(make(Matrix::diagonal(Vector{1, 0}), nonlinear::zero(2), Vector(2))).passed);
}
