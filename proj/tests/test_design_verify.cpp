#include <cmath>

#include <gtest/gtest.h>

#include "robustkf/cases.hpp"
#include "robustkf/design.hpp"
#include "robustkf/verify.hpp"

namespace robustkf {
namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

LtiModel scalar_discrete(double a) {
  return LtiModel::discrete(scalar(a), scalar(1), scalar(1), 1.0);
}

LtiModel scalar_continuous(double a) {
  return LtiModel::continuous(scalar(a), scalar(1), scalar(1));
}

// Paper cases are solved once per process; each solve takes well under a
// second but several tests share them.
const DesignSolution& solved(const std::string& name) {
  static std::map<std::string, DesignSolution> cache;
  auto it = cache.find(name);
  if (it == cache.end()) {
    const PaperCase c = paper_case(name);
    it = cache.emplace(name, design_robust_filter(c.model, c.spec)).first;
  }
  return it->second;
}

TEST(DesignTest, CwhContinuousMeetsBudget) {
  const PaperCase c = paper_case("cwh-cont-c1");
  const DesignSolution& s = solved(c.name);
  ASSERT_EQ(s.status, DesignStatus::Optimal) << s.message;
  EXPECT_EQ(s.program, ProgramKind::Corollary2);
  const Matrix sigma =
      care_lyapunov_steady_state(c.model, s.K, s.finite_Q(), s.finite_R());
  EXPECT_LE(sigma.trace(), 0.1 + 1e-4);
}

TEST(DesignTest, DispatcherMatchesDirectBuild) {
  const LtiModel m = scalar_discrete(0.5);
  DesignSpec spec;
  spec.target = ExactCovariance{scalar(1.0)};
  const DesignSolution via = design_robust_filter(m, spec);
  const SolveResult direct = solve(build_thm1(m, scalar(1.0), spec.settings()));
  ASSERT_EQ(via.status, DesignStatus::Optimal);
  EXPECT_EQ(via.program, ProgramKind::Theorem1);
  EXPECT_NEAR(via.objective, direct.objective, 1e-12);
  EXPECT_TRUE(via.assignment.isApprox(direct.x, 1e-12));
}

TEST(DesignTest, RecoveryRoundTripsZK) {
  const DesignSolution& s = solved("f16-c1");
  ASSERT_TRUE(s.Z && s.W);
  EXPECT_LE((*s.Z * s.K - *s.W).norm(), 1e-6 * s.W->norm());
  EXPECT_TRUE((s.sigma_inf * *s.Z).isApprox(Matrix::Identity(4, 4), 1e-8));
}

TEST(DesignTest, SolverIsDeterministic) {
  const PaperCase c = paper_case("cwh-disc-c1");
  const DesignSolution a = design_robust_filter(c.model, c.spec);
  const DesignSolution b = design_robust_filter(c.model, c.spec);
  EXPECT_NEAR(a.objective, b.objective, 1e-9 * std::abs(a.objective));
}

TEST(DesignTest, CwhCase2ShiftsVarianceTowardWeightedChannels) {
  const DesignSolution& c1 = solved("cwh-cont-c1");
  const DesignSolution& c2 = solved("cwh-cont-c2");
  // Case 2 weights penalize w_Fy, n_x and n_xdot precision.
  EXPECT_GT(c2.Q(1, 1), 1.01 * c1.Q(1, 1));
  EXPECT_GT(c2.R(0, 0), 1.01 * c1.R(0, 0));
  EXPECT_GT(c2.R(3, 3), 1.01 * c1.R(3, 3));
}

TEST(DesignTest, F16Case2RaisesAlphaProcessAndLowersAlphaSensor) {
  const DesignSolution& c1 = solved("f16-c1");
  const DesignSolution& c2 = solved("f16-c2");
  ASSERT_TRUE(has_solution(c1.status) && has_solution(c2.status));
  EXPECT_GT(c2.Q(1, 1), c1.Q(1, 1));
  EXPECT_LT(c2.R(2, 2), c1.R(2, 2));
}

TEST(DesignTest, ObjectiveNonIncreasingInTheta) {
  const PaperCase c = paper_case("cwh-cont-c1");
  double previous = std::numeric_limits<double>::infinity();
  for (double theta : {0.05, 0.1, 0.2}) {
    DesignSpec spec = c.spec;
    spec.target = TraceBound{theta};
    const DesignSolution s = design_robust_filter(c.model, spec);
    ASSERT_EQ(s.status, DesignStatus::Optimal);
    EXPECT_LE(s.objective, previous * (1 + 1e-6));
    previous = s.objective;
  }
}

TEST(DesignTest, LargerGammaDoesNotLowerProcessTerm) {
  const LtiModel m = scalar_continuous(-1.0);
  DesignSpec spec;
  spec.target = TraceBound{0.5};
  const DesignSolution lo = design_robust_filter(m, spec);
  spec.gamma = 4.0;
  const DesignSolution hi = design_robust_filter(m, spec);
  ASSERT_TRUE(has_solution(lo.status) && has_solution(hi.status));
  EXPECT_GE(hi.eta.norm(), lo.eta.norm() - 1e-6);
}

TEST(DesignTest, TightBoundsAreInfeasible) {
  DesignSpec spec;
  spec.target = TraceBound{0.01};
  spec.eta_max = Vector::Constant(1, 0.1);
  spec.zeta_max = Vector::Constant(1, 0.1);
  const DesignSolution s = design_robust_filter(scalar_continuous(0.0), spec);
  EXPECT_EQ(s.status, DesignStatus::Infeasible);
  EXPECT_FALSE(has_solution(s.status));
}

TEST(DesignTest, InfeasibleExactTargetSuggestsTraceBound) {
  // The a = 0 scalar needs 2k sigma >= 1/eta + k^2/zeta; with eta, zeta
  // capped at 1 no sigma below 1 works.
  DesignSpec spec;
  spec.target = ExactCovariance{scalar(0.25)};
  spec.eta_max = Vector::Ones(1);
  spec.zeta_max = Vector::Ones(1);
  const DesignSolution s = design_robust_filter(scalar_continuous(0.0), spec);
  EXPECT_EQ(s.status, DesignStatus::Infeasible);
  EXPECT_NE(s.message.find("trace"), std::string::npos) << s.message;
}

TEST(DesignTest, UnobservableModelIsRejected) {
  const LtiModel m = LtiModel::continuous(Matrix::Identity(2, 2),
                                          Matrix::Identity(2, 2),
                                          Matrix::Identity(1, 2));
  EXPECT_THROW(design_robust_filter(m, DesignSpec{}), PreconditionError);
}

TEST(OracleTest, JosephScalarLyapunov) {
  const Matrix S = joseph_fixed_point(scalar_discrete(0.5), scalar(0.0),
                                      scalar(0.75), scalar(1.0));
  EXPECT_NEAR(S(0, 0), 1.0, 1e-10);
}

TEST(OracleTest, JosephFullGainReturnsR) {
  const PaperCase c = paper_case("cwh-disc-c1");
  Matrix R = Matrix::Zero(6, 6);
  R.diagonal() << 1, 2, 3, 4, 5, 6;
  const Matrix S = joseph_fixed_point(c.model, Matrix::Identity(6, 6),
                                      Matrix::Identity(3, 3), R);
  EXPECT_TRUE(S.isApprox(R, 1e-14));
}

TEST(OracleTest, JosephRejectsUnstableGain) {
  EXPECT_THROW(joseph_fixed_point(scalar_discrete(2.0), scalar(0.0), scalar(1),
                                  scalar(1)),
               StabilityError);
}

TEST(OracleTest, ScalarDareQuadraticRoot) {
  // sigma- = 0.25 sigma- + 1 - 0.25 sigma-^2 / (sigma- + 1)
  //   <=> sigma-^2 - 0.25 sigma- - 1 = 0
  const double prior = (0.25 + std::sqrt(0.0625 + 4.0)) / 2.0;
  const double post = prior / (prior + 1.0);
  const LtiModel m = scalar_discrete(0.5);
  const RiccatiSolution r = dare_steady_state(m, scalar(1), scalar(1));
  EXPECT_NEAR(r.prior(0, 0), prior, 1e-10);
  EXPECT_NEAR(r.posterior(0, 0), post, 1e-10);
  EXPECT_NEAR(r.gain(0, 0), post, 1e-10);
  const Matrix S = joseph_fixed_point(m, r.gain, scalar(1), scalar(1));
  EXPECT_NEAR(S(0, 0), r.posterior(0, 0), 1e-10);
}

TEST(OracleTest, DareWithoutDynamicsIsBayesFusion) {
  const LtiModel m = LtiModel::discrete(Matrix::Zero(2, 2), Matrix::Identity(2, 2),
                                        Matrix::Identity(2, 2), 1.0);
  const Matrix Q = Eigen::Vector2d(2, 3).asDiagonal();
  const Matrix R = Eigen::Vector2d(1, 6).asDiagonal();
  const RiccatiSolution r = dare_steady_state(m, Q, R);
  EXPECT_NEAR(r.posterior(0, 0), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.posterior(1, 1), 2.0, 1e-12);
  EXPECT_NEAR(r.posterior(0, 1), 0.0, 1e-12);
}

TEST(OracleTest, DareWithoutProcessNoiseConvergesToZero) {
  const RiccatiSolution r =
      dare_steady_state(scalar_discrete(0.5), scalar(0.0), scalar(1.0));
  EXPECT_NEAR(r.posterior(0, 0), 0.0, 1e-9);
}

TEST(OracleTest, ContinuousScalarLyapunov) {
  const Matrix S = care_lyapunov_steady_state(scalar_continuous(-1.0), scalar(0),
                                              scalar(2.0), scalar(1.0));
  EXPECT_NEAR(S(0, 0), 1.0, 1e-12);
}

TEST(OracleTest, ContinuousUnitDecayGivesHalfForcing) {
  // A - K C = -I with C = I, so Sigma = (K R K' + B Q B') / 2.
  const LtiModel m = f16_model();
  const LtiModel full = LtiModel::continuous(m.A(), m.B(), Matrix::Identity(4, 4));
  const Matrix K = m.A() + Matrix::Identity(4, 4);
  const Matrix Q = Eigen::Vector3d(1, 2, 3).asDiagonal();
  const Matrix R = 0.5 * Matrix::Identity(4, 4);
  const Matrix M = K * R * K.transpose() + m.B() * Q * m.B().transpose();
  const Matrix S = care_lyapunov_steady_state(full, K, Q, R);
  EXPECT_TRUE(S.isApprox(0.5 * M, 1e-10));
  EXPECT_LE(lyapunov_residual(-Matrix::Identity(4, 4), S, M), 1e-10 * M.norm());
}

TEST(OracleTest, ContinuousRejectsNonHurwitz) {
  EXPECT_THROW(care_lyapunov_steady_state(scalar_continuous(1.0), scalar(0),
                                          scalar(1), scalar(1)),
               StabilityError);
}

TEST(OracleTest, KalmanBucyScalar) {
  // a = 0: 0 = q - sigma^2 / r  ->  sigma = sqrt(q r)
  const RiccatiSolution r =
      kalman_bucy_steady_state(scalar_continuous(0.0), scalar(4.0), scalar(9.0));
  EXPECT_NEAR(r.posterior(0, 0), 6.0, 1e-10);
  EXPECT_NEAR(r.gain(0, 0), 6.0 / 9.0, 1e-10);
}

TEST(OracleTest, DoublingProcessNoiseRaisesTrace) {
  const PaperCase c = paper_case("cwh-disc-c1");
  const DesignSolution& s = solved(c.name);
  const Matrix Q = s.finite_Q(), R = s.finite_R();
  const double base = joseph_fixed_point(c.model, s.K, Q, R).trace();
  EXPECT_GT(joseph_fixed_point(c.model, s.K, 2.0 * Q, R).trace(), base);
}

TEST(LmiResidualTest, ConstantBlocks) {
  ProgramBuilder b;
  b.add_scalar("x");
  b.add_psd("identity", AffineMatrix::identity(2));
  b.add_psd("indefinite",
            AffineMatrix::constant(Matrix(Eigen::Vector2d(1, -0.5).asDiagonal())));
  const auto blocks = check_lmi_residual(b.build(), Vector::Zero(1));
  ASSERT_EQ(blocks.size(), 2u);
  EXPECT_NEAR(blocks[0].min_eig, 1.0, 1e-15);
  EXPECT_NEAR(blocks[1].min_eig, -0.5, 1e-15);
}

TEST(VerifyTest, CwhCase1Passes) {
  const PaperCase c = paper_case("cwh-cont-c1");
  const VerificationReport r = verify_solution(c.model, solved(c.name), c.spec);
  EXPECT_TRUE(r.passed);
  EXPECT_TRUE(r.stable);
  EXPECT_GE(r.trace_margin, -1e-4);
  EXPECT_GE(r.lmi_worst_relative, -kLmiTolerance);
  EXPECT_LE(r.riccati_trace, r.oracle_trace + kRiccatiTolerance);
  const Matrix F = c.model.A() - solved(c.name).K * c.model.C();
  const Matrix M = solved(c.name).K * solved(c.name).finite_R() *
                       solved(c.name).K.transpose() +
                   c.model.B() * solved(c.name).finite_Q() * c.model.B().transpose();
  EXPECT_LE(lyapunov_residual(F, r.oracle_sigma, M), 1e-8 * M.norm());
}

TEST(VerifyTest, F16Case2IsStable) {
  const PaperCase c = paper_case("f16-c2");
  const VerificationReport r = verify_solution(c.model, solved(c.name), c.spec);
  EXPECT_TRUE(r.stable);
  EXPECT_LT(r.stability_measure, 0.0);
  EXPECT_TRUE(r.passed);
}

TEST(VerifyTest, CorruptedGainLosesMargin) {
  const PaperCase c = paper_case("cwh-cont-c2");
  const DesignSolution& s = solved(c.name);
  const VerificationReport good = verify_solution(c.model, s, c.spec);
  DesignSolution bad = s;
  Matrix perturbation = Matrix::Zero(6, 6);
  perturbation(0, 1) = perturbation(3, 4) = perturbation(2, 5) = 0.01;
  bad.K = s.K + 10.0 * perturbation;
  bad.assignment.resize(0);
  const VerificationReport r = verify_solution(c.model, bad, c.spec);
  EXPECT_TRUE(!r.passed || r.trace_margin < good.trace_margin);
  EXPECT_LT(r.trace_margin, good.trace_margin);
}

TEST(VerifyTest, DiscreteCaseRiccatiSandwich) {
  for (const char* name : {"cwh-disc-c1", "cwh-disc-c2"}) {
    const PaperCase c = paper_case(name);
    const VerificationReport r = verify_solution(c.model, solved(name), c.spec);
    EXPECT_TRUE(r.passed) << name;
    EXPECT_LE(r.riccati_trace, r.oracle_trace + kRiccatiTolerance) << name;
    EXPECT_LE(r.oracle_trace, 0.1 + 1e-4) << name;
  }
}

TEST(VerifyTest, TraceBoundSolutionsSatisfyExactPrograms) {
  for (const char* name : {"cwh-disc-c1", "f16-c1"}) {
    const PaperCase c = paper_case(name);
    const CrossCheck x = theorem_cross_check(c.model, solved(name), c.spec);
    EXPECT_GE(x.relative_residual, -1e-6) << name;
  }
}

}  // namespace
}  // namespace robustkf
