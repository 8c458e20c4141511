#include <cmath>
#include <complex>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "robustkf/cases.hpp"
#include "robustkf/design.hpp"
#include "robustkf/lmi.hpp"
#include "robustkf/model.hpp"
#include "robustkf/solver.hpp"
#include "robustkf/verify.hpp"

namespace robustkf {
namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix M(rows.size(), rows.begin()->size());
  int i = 0;
  for (const auto& r : rows) {
    int j = 0;
    for (double v : r) M(i, j++) = v;
    ++i;
  }
  return M;
}

LtiModel scalar_model(double a, bool discrete, double Ts = 1.0) {
  return discrete ? LtiModel::discrete(mat({{a}}), mat({{1}}), mat({{1}}), Ts)
                  : LtiModel::continuous(mat({{a}}), mat({{1}}), mat({{1}}));
}

TEST(ModelTest, DoubleIntegratorIsControllableAndObservable) {
  const auto m = LtiModel::continuous(mat({{0, 1}, {0, 0}}), mat({{0}, {1}}),
                                      mat({{1, 0}}));
  const ValidationReport r = validate_model(m);
  EXPECT_TRUE(r.controllable);
  EXPECT_TRUE(r.observable);
  EXPECT_EQ(r.controllability_rank, 2);
}

TEST(ModelTest, DecoupledIdentityIsNeither) {
  const auto m = LtiModel::continuous(Matrix::Identity(2, 2), mat({{1}, {0}}),
                                      mat({{1, 0}}));
  const ValidationReport r = validate_model(m);
  EXPECT_FALSE(r.controllable);
  EXPECT_FALSE(r.observable);
  EXPECT_EQ(r.controllability_rank, 1);
  EXPECT_EQ(r.observability_rank, 1);
}

TEST(ModelTest, CwhIsControllableAndObservable) {
  const ValidationReport r = validate_model(cwh_model());
  EXPECT_TRUE(r.controllable);
  EXPECT_TRUE(r.observable);
}

TEST(ModelTest, ValidationRanksSurviveSimilarity) {
  const LtiModel m = f16_model();
  Matrix T = Matrix::Identity(4, 4);
  T(0, 1) = 2.0;
  T(2, 3) = -0.5;
  T(3, 0) = 0.25;
  const Matrix Ti = T.inverse();
  const auto mt = LtiModel::continuous(T * m.A() * Ti, T * m.B(), m.C() * Ti);
  const ValidationReport a = validate_model(m), b = validate_model(mt);
  EXPECT_EQ(a.controllability_rank, b.controllability_rank);
  EXPECT_EQ(a.observability_rank, b.observability_rank);
}

TEST(ModelTest, DimensionMismatchNamesMatrix) {
  try {
    LtiModel::continuous(Matrix::Identity(2, 2), mat({{1}, {0}, {0}}),
                         mat({{1, 0}}));
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.matrix(), "B");
  }
}

TEST(ModelTest, DiscreteModelNeedsSampleTime) {
  EXPECT_THROW(LtiModel(mat({{1}}), mat({{1}}), mat({{1}}), TimeDomain::Discrete),
               ValidationError);
}

TEST(TustinTest, Integrator) {
  const LtiModel d = tustin_discretize(scalar_model(0.0, false), 0.01);
  EXPECT_TRUE(d.is_discrete());
  EXPECT_DOUBLE_EQ(*d.sample_time(), 0.01);
  EXPECT_NEAR(d.A()(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(d.B()(0, 0), 0.01, 1e-15);
  EXPECT_NEAR(d.C()(0, 0), 1.0, 1e-15);
}

TEST(TustinTest, ScalarBilinear) {
  const LtiModel d = tustin_discretize(scalar_model(-2.0, false), 0.1);
  EXPECT_NEAR(d.A()(0, 0), 0.9 / 1.1, 1e-14);
}

TEST(TustinTest, CwhEigenvaluesOnUnitCircle) {
  const LtiModel d = tustin_discretize(cwh_model(), kCwhSampleTime);
  EXPECT_EQ(d.n(), 6);
  EXPECT_EQ(d.m(), 3);
  EXPECT_EQ(d.p(), 6);
  // The in-track pair is a Jordan block at 1, which a dense eigensolver only
  // resolves to sqrt(eps). Snap each eigenvalue onto the unit circle and
  // require A_d - mu I to stay singular to 1e-10 relative.
  const Eigen::MatrixXcd Ad = d.A().cast<std::complex<double>>();
  const Eigen::VectorXcd ev = d.A().eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    EXPECT_NEAR(std::abs(ev(i)), 1.0, 1e-8);
    const std::complex<double> mu = ev(i) / std::abs(ev(i));
    const Eigen::MatrixXcd shifted = Ad - mu * Eigen::MatrixXcd::Identity(6, 6);
    const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(shifted);
    EXPECT_LE(svd.singularValues()(5), 1e-10 * d.A().norm()) << ev(i);
  }
}

TEST(TustinTest, HurwitzMapsToSchur) {
  const LtiModel d = tustin_discretize(f16_model(), 0.05);
  EXPECT_LT(linalg::spectral_radius(d.A()), 1.0);
}

TEST(TustinTest, SingularLeftFactorThrows) {
  EXPECT_THROW(tustin_discretize(scalar_model(20.0, false), 0.1),
               DiscretizationError);
  EXPECT_THROW(tustin_discretize(scalar_model(1.0, true), 0.1), DomainError);
}

TEST(PsdSqrtTest, IdentityAndDiagonal) {
  EXPECT_TRUE(psd_sqrt(Matrix::Identity(3, 3)).isApprox(Matrix::Identity(3, 3)));
  const Matrix S = psd_sqrt(Eigen::Vector2d(4, 9).asDiagonal().toDenseMatrix());
  EXPECT_NEAR(S(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(S(1, 1), 3.0, 1e-14);
  EXPECT_NEAR(S(0, 1), 0.0, 1e-14);
}

TEST(PsdSqrtTest, RandomSpdReconstructs) {
  std::srand(3);
  const Matrix G = Matrix::Random(5, 5);
  const Matrix M = G * G.transpose() + 0.1 * Matrix::Identity(5, 5);
  const Matrix S = psd_sqrt(M);
  EXPECT_LT((S * S - M).norm() / M.norm(), 1e-12);
  EXPECT_LT((S * M - M * S).norm() / M.norm(), 1e-12);
}

TEST(PsdSqrtTest, RejectsIndefinite) {
  try {
    psd_sqrt(mat({{1, 0}, {0, -1}}));
    FAIL() << "expected NotPsdError";
  } catch (const NotPsdError& e) {
    EXPECT_DOUBLE_EQ(e.eigenvalue(), -1.0);
  }
}

// Minimizes the epigraph cost with v pinned to `fixed`.
double pinned_norm(const Vector& fixed, double lambda, const Vector& weight) {
  ProgramBuilder b;
  const auto v = b.add_vector("v", static_cast<int>(fixed.size()));
  for (int i = 0; i < fixed.size(); ++i) {
    b.add_equality("pin_" + std::to_string(i), v[i] - fixed(i));
    b.add_nonnegative("nonneg_" + std::to_string(i), v[i]);
  }
  b.set_objective(norm_epigraph(b, v, lambda, weight, "v"));
  const SolveResult r = solve(b.build());
  EXPECT_EQ(r.status, SolverStatus::Optimal) << r.message;
  return r.objective;
}

TEST(NormEpigraphTest, OneNormIsWeightedSum) {
  EXPECT_NEAR(pinned_norm(Eigen::Vector3d(1, 2, 3), 1.0, Eigen::Vector3d::Ones()), 6.0, 1e-7);
}

TEST(NormEpigraphTest, TwoNorm) {
  EXPECT_NEAR(pinned_norm(Eigen::Vector2d(3, 4), 2.0, Eigen::Vector2d::Ones()), 5.0, 1e-7);
  EXPECT_NEAR(pinned_norm(Eigen::Vector3d(1, 1, 1), 2.0, Eigen::Vector3d(1, 100, 10)),
              std::sqrt(10101.0), 1e-6);
}

TEST(NormEpigraphTest, TwoNormAddsOneScalarAndOneCone) {
  ProgramBuilder b;
  const auto v = b.add_vector("v", 3);
  norm_epigraph(b, v, 2.0, Eigen::Vector3d::Ones(), "v");
  EXPECT_EQ(b.peek().num_scalars(), 4);
  EXPECT_EQ(b.peek().soc_constraints().size(), 1u);
  ProgramBuilder b1;
  norm_epigraph(b1, b1.add_vector("v", 3), 1.0, Eigen::Vector3d::Ones(), "v");
  EXPECT_EQ(b1.peek().num_scalars(), 3);
  EXPECT_TRUE(b1.peek().soc_constraints().empty());
}

TEST(NormEpigraphTest, RejectsUnsupportedNormAndBadWeights) {
  ProgramBuilder b;
  const auto v = b.add_vector("v", 2);
  EXPECT_THROW(norm_epigraph(b, v, 1.5, Eigen::Vector2d::Ones(), "v"),
               UnsupportedNormError);
  EXPECT_THROW(norm_epigraph(b, v, 2.0, Eigen::Vector2d(1, 0), "v"), PreconditionError);
  EXPECT_THROW(norm_epigraph(b, v, 2.0, Eigen::Vector3d::Ones(), "v"), PreconditionError);
}

TEST(LmiBuildTest, DiscreteExactCovarianceShape) {
  const LtiModel d = tustin_discretize(cwh_model(), kCwhSampleTime);
  const ConicProgram p = build_thm1(d, 0.01 * Matrix::Identity(6, 6), {});
  ASSERT_EQ(p.psd_blocks().size(), 1u);
  EXPECT_EQ(p.psd_blocks()[0].expr.rows(), 21);
  // K, eta, zeta plus one epigraph scalar for each of the two norms.
  EXPECT_EQ(p.num_scalars(), 6 * 6 + 3 + 6 + 2);
  EXPECT_EQ(p.recovery().kind, ProgramKind::Theorem1);
}

TEST(LmiBuildTest, DiscreteTraceBoundShape) {
  const LtiModel d = tustin_discretize(cwh_model(), kCwhSampleTime);
  const ConicProgram p = build_cor1(d, 0.1, {});
  ASSERT_EQ(p.psd_blocks().size(), 2u);
  EXPECT_EQ(p.psd_blocks()[0].expr.rows(), 21);
  EXPECT_EQ(p.psd_blocks()[1].expr.rows(), 12);
  EXPECT_GT(p.psd_blocks()[1].margin, 0.0);
  int trace_rows = 0;
  for (const auto& l : p.linear_constraints()) trace_rows += l.name == "trace_bound";
  EXPECT_EQ(trace_rows, 1);
}

TEST(LmiBuildTest, ContinuousShapes) {
  const ConicProgram t2 = build_thm2(cwh_model(), Matrix::Identity(6, 6), {});
  EXPECT_EQ(t2.psd_blocks()[0].expr.rows(), 15);
  const ConicProgram c2 = build_cor2(f16_model(), 0.1, {});
  ASSERT_EQ(c2.psd_blocks().size(), 2u);
  EXPECT_EQ(c2.psd_blocks()[0].expr.rows(), 12);
  EXPECT_EQ(c2.psd_blocks()[1].expr.rows(), 8);
}

TEST(LmiBuildTest, BlocksAreExactlySymmetric) {
  const LtiModel d = tustin_discretize(cwh_model(), kCwhSampleTime);
  for (const ConicProgram& p :
       {build_thm1(d, Matrix::Identity(6, 6), {}), build_cor1(d, 0.1, {}),
        build_thm2(f16_model(), Matrix::Identity(4, 4), {}),
        build_cor2(f16_model(), 0.1, {})}) {
    const Vector x = Vector::Random(p.num_scalars());
    for (const auto& b : p.psd_blocks()) {
      const Matrix M = b.expr.evaluate(x);
      EXPECT_EQ((M - M.transpose()).norm(), 0.0) << b.name;
    }
  }
}

TEST(LmiBuildTest, ScalarDiscreteBlockBySubstitution) {
  const double a = 0.7, k = 0.3, eta = 2.0, zeta = 5.0;
  const ConicProgram p =
      build_thm1(scalar_model(a, true), Matrix::Identity(1, 1), {});
  const Vector x = make_assignment(
      p, {{"K", mat({{k}})}, {"eta", mat({{eta}})}, {"zeta", mat({{zeta}})}});
  const Matrix M = p.psd_blocks()[0].expr.evaluate(x);
  EXPECT_TRUE(M.isApprox(test::scalar_discrete_block(a, 1.0)(k, eta, zeta), 1e-15));
}

TEST(LmiBuildTest, ScalarContinuousBlockBySubstitution) {
  const double k = 0.4, eta = 3.0, zeta = 0.5;
  const ConicProgram p =
      build_thm2(scalar_model(0.0, false), Matrix::Identity(1, 1), {});
  const Vector x = make_assignment(
      p, {{"K", mat({{k}})}, {"eta", mat({{eta}})}, {"zeta", mat({{zeta}})}});
  const Matrix M = p.psd_blocks()[0].expr.evaluate(x);
  EXPECT_TRUE(M.isApprox(mat({{2 * k, -1, -k}, {-1, eta, 0}, {-k, 0, zeta}}), 1e-15));
}

TEST(LmiBuildTest, IdentityCongruenceRecoversW) {
  const LtiModel d = tustin_discretize(cwh_model(), kCwhSampleTime);
  const ConicProgram p = build_cor1(d, 10.0, {});
  const Matrix W = 0.1 * Matrix::Identity(6, 6);
  const Vector x = make_assignment(p, {{"W", W},
                                       {"Z", Matrix::Identity(6, 6)},
                                       {"X", Matrix::Identity(6, 6)},
                                       {"eta", Eigen::Vector3d::Ones()},
                                       {"zeta", Vector::Ones(6)}});
  DesignSolution s;
  recover_solution(p, x, s);
  EXPECT_TRUE(s.K.isApprox(W, 1e-14));
  EXPECT_TRUE(s.sigma_inf.isApprox(Matrix::Identity(6, 6), 1e-14));
}

TEST(LmiBuildTest, DomainAndPreconditionErrors) {
  const LtiModel c = scalar_model(0.0, false);
  const LtiModel d = scalar_model(0.5, true);
  EXPECT_THROW(build_thm1(c, Matrix::Identity(1, 1), {}), DomainError);
  EXPECT_THROW(build_cor1(c, 1.0, {}), DomainError);
  EXPECT_THROW(build_thm2(d, Matrix::Identity(1, 1), {}), DomainError);
  EXPECT_THROW(build_cor2(d, 1.0, {}), DomainError);
  EXPECT_THROW(build_thm1(d, -Matrix::Identity(1, 1), {}), PreconditionError);
  EXPECT_THROW(build_cor1(d, 0.0, {}), PreconditionError);
  LmiSettings bad;
  bad.lambda = 1.5;
  EXPECT_THROW(build_cor1(d, 1.0, bad), UnsupportedNormError);
}

DesignSolution solve_scalar(double a, bool discrete, PerformanceTarget target) {
  DesignSpec spec;
  spec.target = std::move(target);
  return design_robust_filter(scalar_model(a, discrete), spec);
}

// Grid optima below were computed with a numpy brute-force search over the
// same blocks (step 2e-2 refined to 1e-4) before the solver existed.
constexpr double kDiscreteExactOptimum = 1.0;   // a = 0.5, sigma = 1
constexpr double kDiscreteTraceOptimum = 1.0;   // a = 0.5, theta = 1
constexpr double kContinuousExactOptimum = 2.0; // a = 0, sigma = 1
constexpr double kContinuousTraceOptimum = 0.5; // a = -1, theta = 1

TEST(ScalarOracleTest, DiscreteExactCovarianceMatchesGrid) {
  const auto grid = test::scalar_grid_oracle(
      test::scalar_discrete_block(0.5, 1.0), 2.0, 3.0, 10.0);
  EXPECT_NEAR(grid.objective, kDiscreteExactOptimum, 1e-3);
  const DesignSolution s =
      solve_scalar(0.5, true, ExactCovariance{Matrix::Identity(1, 1)});
  ASSERT_EQ(s.status, DesignStatus::Optimal) << s.message;
  EXPECT_NEAR(s.objective, grid.objective, 0.01 * grid.objective);
}

TEST(ScalarOracleTest, DiscreteTraceBoundMatchesExactProgram) {
  const DesignSolution s = solve_scalar(0.5, true, TraceBound{1.0});
  ASSERT_EQ(s.status, DesignStatus::Optimal) << s.message;
  EXPECT_NEAR(s.objective, kDiscreteTraceOptimum, 0.01 * kDiscreteTraceOptimum);
  const DesignSolution e =
      solve_scalar(0.5, true, ExactCovariance{Matrix::Identity(1, 1)});
  EXPECT_NEAR(s.objective, e.objective, 0.01 * e.objective);
}

TEST(ScalarOracleTest, ContinuousExactCovarianceMatchesGrid) {
  const auto grid = test::scalar_grid_oracle(
      test::scalar_continuous_block(0.0, 1.0), 3.0, 3.0, 10.0);
  EXPECT_NEAR(grid.objective, kContinuousExactOptimum, 2e-3);
  const DesignSolution s =
      solve_scalar(0.0, false, ExactCovariance{Matrix::Identity(1, 1)});
  ASSERT_EQ(s.status, DesignStatus::Optimal) << s.message;
  EXPECT_NEAR(s.objective, grid.objective, 0.01 * grid.objective);
  EXPECT_NEAR(s.K(0, 0), grid.k, 0.01);
  EXPECT_NEAR(s.eta(0), grid.eta, 0.01);
  EXPECT_NEAR(s.zeta(0), grid.zeta, 0.01);
}

TEST(ScalarOracleTest, ContinuousTraceBoundMatchesGrid) {
  const DesignSolution s = solve_scalar(-1.0, false, TraceBound{1.0});
  ASSERT_EQ(s.status, DesignStatus::Optimal) << s.message;
  EXPECT_NEAR(s.objective, kContinuousTraceOptimum, 0.01 * kContinuousTraceOptimum);
}

}  // namespace
}  // namespace robustkf
