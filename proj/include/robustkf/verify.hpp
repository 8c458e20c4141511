#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "robustkf/design.hpp"

namespace robustkf {

inline constexpr double kFixedPointTolerance = 1e-12;
inline constexpr long kFixedPointMaxIterations = 100000;
/// Allowed excess of the oracle trace over the budget, relative to
/// max(1, budget).
inline constexpr double kTraceTolerance = 1e-4;
/// LMI blocks count as certified when min eig >= -kLmiTolerance * ||block||.
inline constexpr double kLmiTolerance = 1e-7;
inline constexpr double kRiccatiTolerance = 1e-6;

/// Steady-state posterior covariance of x+ = x- + K (y - C x-) for a fixed
/// gain, by iterating the Joseph recursion from zero.
inline Matrix joseph_fixed_point(const LtiModel& model, const Matrix& K,
                                 const Matrix& Q, const Matrix& R,
                                 double tol = kFixedPointTolerance,
                                 long max_iter = kFixedPointMaxIterations) {
  if (!model.is_discrete())
    throw DomainError("joseph_fixed_point needs a discrete model");
  const int n = model.n();
  const Matrix IKC = Matrix::Identity(n, n) - K * model.C();
  const double rho = linalg::spectral_radius(IKC * model.A());
  if (!(rho < 1.0))
    throw StabilityError("(I - K C) A is not Schur stable; spectral radius " +
                             std::to_string(rho),
                         rho);
  const Matrix A = model.A();
  const Matrix BQB = model.B() * Q * model.B().transpose();
  const Matrix KRK = K * R * K.transpose();
  Matrix S = Matrix::Zero(n, n);
  for (long it = 0; it < max_iter; ++it) {
    Matrix next = IKC * (A * S * A.transpose() + BQB) * IKC.transpose() + KRK;
    next = linalg::symmetrize(next);
    const double delta = (next - S).norm();
    S = std::move(next);
    if (!S.allFinite())
      throw StabilityError("Joseph recursion produced non-finite values", rho);
    if (delta < tol * (1.0 + S.norm())) return S;
  }
  throw ConvergenceError("Joseph recursion did not converge", max_iter);
}

struct RiccatiSolution {
  /// Steady-state posterior (discrete) or filtering (continuous) covariance.
  Matrix posterior;
  /// Discrete only: steady-state prior covariance.
  Matrix prior;
  Matrix gain;
  long iterations = 0;
};

/// Optimal steady-state filter for (Q, R) by iterating the measurement
/// update and time propagation until the prior covariance settles.
inline RiccatiSolution dare_steady_state(const LtiModel& model, const Matrix& Q,
                                         const Matrix& R,
                                         double tol = kFixedPointTolerance,
                                         long max_iter = kFixedPointMaxIterations) {
  if (!model.is_discrete())
    throw DomainError("dare_steady_state needs a discrete model");
  const int n = model.n();
  const Matrix& A = model.A();
  const Matrix& C = model.C();
  const Matrix BQB = linalg::symmetrize(model.B() * Q * model.B().transpose());
  const Matrix I = Matrix::Identity(n, n);
  Matrix prior = BQB;
  RiccatiSolution out;
  for (long it = 1; it <= max_iter; ++it) {
    const Matrix S = linalg::symmetrize(C * prior * C.transpose() + R);
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success)
      throw PreconditionError("innovation covariance C P C' + R is singular");
    const Matrix K = llt.solve(C * prior).transpose();
    const Matrix IKC = I - K * C;
    const Matrix post = linalg::symmetrize(IKC * prior * IKC.transpose() +
                                           K * R * K.transpose());
    const Matrix next = linalg::symmetrize(A * post * A.transpose() + BQB);
    const double delta = (next - prior).norm();
    prior = next;
    if (!prior.allFinite())
      throw ConvergenceError("Riccati recursion produced non-finite values", it);
    if (delta < tol * (1.0 + prior.norm())) {
      const Matrix S2 = linalg::symmetrize(C * prior * C.transpose() + R);
      Eigen::LLT<Matrix> l2(S2);
      out.gain = l2.solve(C * prior).transpose();
      const Matrix IKC2 = I - out.gain * C;
      out.prior = prior;
      out.posterior = linalg::symmetrize(IKC2 * prior * IKC2.transpose() +
                                         out.gain * R * out.gain.transpose());
      out.iterations = it;
      return out;
    }
  }
  throw ConvergenceError("Riccati recursion did not converge", max_iter);
}

/// Solves F S + S F' + M = 0 by Kronecker vectorization.
inline Matrix solve_lyapunov(const Matrix& F, const Matrix& M) {
  const auto n = F.rows();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix L = linalg::kron(I, F) + linalg::kron(F, I);
  Eigen::PartialPivLU<Matrix> lu(L);
  const Vector rhs = -linalg::vec(M);
  Vector v = lu.solve(rhs);
  v += lu.solve(rhs - L * v);
  return linalg::symmetrize(linalg::unvec(v, n, n));
}

inline double lyapunov_residual(const Matrix& F, const Matrix& S,
                                const Matrix& M) {
  return (F * S + S * F.transpose() + M).norm();
}

/// Steady-state error covariance of the continuous filter with gain K:
///   (A - K C) S + S (A - K C)' + K R K' + B Q B' = 0.
inline Matrix care_lyapunov_steady_state(const LtiModel& model, const Matrix& K,
                                         const Matrix& Q, const Matrix& R) {
  if (model.is_discrete())
    throw DomainError("care_lyapunov_steady_state needs a continuous model");
  const Matrix F = model.A() - K * model.C();
  const double abscissa = linalg::spectral_abscissa(F);
  if (!(abscissa < 0.0))
    throw StabilityError("A - K C is not Hurwitz; spectral abscissa " +
                             std::to_string(abscissa),
                         abscissa);
  const Matrix M = linalg::symmetrize(K * R * K.transpose() +
                                      model.B() * Q * model.B().transpose());
  return solve_lyapunov(F, M);
}

namespace detail {

/// Matrix sign function by the scaled Newton iteration.
inline Matrix matrix_sign(Matrix Z, int max_iter = 100) {
  const auto n = Z.rows();
  for (int it = 0; it < max_iter; ++it) {
    Eigen::PartialPivLU<Matrix> lu(Z);
    const double c = std::pow(std::abs(lu.determinant()), 1.0 / n);
    const double scale = (c > 0.0 && std::isfinite(c)) ? c : 1.0;
    const Matrix next = 0.5 * (Z / scale + scale * lu.inverse());
    const double delta = (next - Z).norm();
    Z = next;
    if (delta <= 1e-13 * Z.norm()) return Z;
  }
  return Z;
}

}  // namespace detail

/// Optimal continuous filter: A P + P A' - P C' R^-1 C P + B Q B' = 0.
/// Initial solution from the Hamiltonian sign function, then Newton-Kleinman
/// steps until the update is negligible.
inline RiccatiSolution kalman_bucy_steady_state(const LtiModel& model,
                                                const Matrix& Q,
                                                const Matrix& R) {
  if (model.is_discrete())
    throw DomainError("kalman_bucy_steady_state needs a continuous model");
  const int n = model.n();
  const Matrix& A = model.A();
  const Matrix& C = model.C();
  Eigen::LLT<Matrix> rllt(linalg::symmetrize(R));
  if (rllt.info() != Eigen::Success)
    throw PreconditionError("R must be positive definite");
  const Matrix G = linalg::symmetrize(C.transpose() * rllt.solve(C));
  const Matrix BQB = linalg::symmetrize(model.B() * Q * model.B().transpose());

  Matrix H(2 * n, 2 * n);
  H << A.transpose(), -G, -BQB, -A;
  const Matrix S = detail::matrix_sign(H);
  Matrix lhs(2 * n, n), rhs(2 * n, n);
  lhs << S.topRightCorner(n, n),
      S.bottomRightCorner(n, n) + Matrix::Identity(n, n);
  rhs << S.topLeftCorner(n, n) + Matrix::Identity(n, n),
      S.bottomLeftCorner(n, n);
  Matrix P = linalg::symmetrize(
      lhs.colPivHouseholderQr().solve(-rhs));

  RiccatiSolution out;
  for (int it = 1; it <= 50; ++it) {
    const Matrix F = A - P * G;
    if (!(linalg::spectral_abscissa(F) < 0.0)) break;
    const Matrix next = solve_lyapunov(F, BQB + P * G * P);
    const double delta = (next - P).norm();
    P = next;
    out.iterations = it;
    if (delta <= 1e-14 * (1.0 + P.norm())) break;
  }
  if (!P.allFinite())
    throw ConvergenceError("continuous Riccati solve failed", out.iterations);
  out.posterior = P;
  out.gain = rllt.solve(C * P).transpose();
  return out;
}

inline double care_residual(const LtiModel& model, const Matrix& Q,
                            const Matrix& R, const Matrix& P) {
  const Matrix& C = model.C();
  const Matrix G = C.transpose() * R.llt().solve(C);
  return (model.A() * P + P * model.A().transpose() - P * G * P +
          model.B() * Q * model.B().transpose())
      .norm();
}

struct BlockResidual {
  std::string name;
  double min_eig = 0.0;
  /// Frobenius norm of the evaluated block.
  double norm = 0.0;
  /// min_eig / max(1, norm); the certification compares this to
  /// -kLmiTolerance.
  double relative() const { return min_eig / std::max(1.0, norm); }
};

/// Evaluates every PSD block of `program` at `x`. Blocks are evaluated as
/// written, without the margin the solver enforces.
inline std::vector<BlockResidual> check_lmi_residual(const ConicProgram& program,
                                                     const Vector& x) {
  if (x.size() != program.num_scalars())
    throw PreconditionError("assignment has " + std::to_string(x.size()) +
                            " entries, program has " +
                            std::to_string(program.num_scalars()));
  std::vector<BlockResidual> out;
  for (const auto& blk : program.psd_blocks()) {
    const Matrix M = linalg::symmetrize(blk.expr.evaluate(x));
    out.push_back({blk.name, linalg::min_eigenvalue(M), M.norm()});
  }
  return out;
}

/// Fills a program assignment from named variable values. Missing variables
/// stay zero; epigraph variables "t_<name>" can be supplied as 1x1 matrices.
inline Vector make_assignment(const ConicProgram& program,
                              const std::map<std::string, Matrix>& values) {
  Vector x = Vector::Zero(program.num_scalars());
  for (const auto& [name, M] : values) {
    const Variable& v = program.variable(name);
    switch (v.structure) {
      case VariableStructure::FullMatrix:
        if (M.rows() != v.rows || M.cols() != v.cols)
          throw PreconditionError("value for '" + name + "' has wrong shape");
        for (int i = 0; i < v.rows; ++i)
          for (int j = 0; j < v.cols; ++j) x(v.offset + i * v.cols + j) = M(i, j);
        break;
      case VariableStructure::Symmetric: {
        if (M.rows() != v.rows || M.cols() != v.rows)
          throw PreconditionError("value for '" + name + "' has wrong shape");
        int k = v.offset;
        for (int i = 0; i < v.rows; ++i)
          for (int j = i; j < v.rows; ++j) x(k++) = 0.5 * (M(i, j) + M(j, i));
        break;
      }
      case VariableStructure::DiagonalVector:
        if (M.size() != v.rows)
          throw PreconditionError("value for '" + name + "' has wrong length");
        for (int i = 0; i < v.rows; ++i) x(v.offset + i) = M.data()[i];
        break;
      case VariableStructure::Scalar:
        if (M.size() != 1)
          throw PreconditionError("value for '" + name + "' must be scalar");
        x(v.offset) = M(0, 0);
        break;
    }
  }
  return x;
}

struct CrossCheck {
  /// Worst min_eig / max(1, ||block||) of the exact-covariance block.
  double relative_residual = 0.0;
  std::vector<BlockResidual> blocks;
};

/// Plugs a trace-bound solution (K, eta, zeta, Sigma = Z^-1) into the
/// matching exact-covariance program and evaluates its blocks there.
inline CrossCheck theorem_cross_check(const LtiModel& model,
                                      const DesignSolution& sol,
                                      const DesignSpec& spec) {
  if (!sol.Z)
    throw PreconditionError("cross-check needs a trace-bound solution");
  DesignSpec exact = spec;
  exact.target = ExactCovariance{sol.sigma_inf};
  const ConicProgram prog = build_program(model, exact);
  std::map<std::string, Matrix> values{
      {"K", sol.K}, {"eta", sol.eta}, {"zeta", sol.zeta}};
  const Vector x = make_assignment(prog, values);
  CrossCheck out;
  out.blocks = check_lmi_residual(prog, x);
  out.relative_residual = std::numeric_limits<double>::infinity();
  for (const auto& b : out.blocks)
    out.relative_residual = std::min(out.relative_residual, b.relative());
  return out;
}

struct VerificationReport {
  ProgramKind program = ProgramKind::Generic;
  /// Posterior steady-state covariance of the designed gain under the
  /// recovered (Q, R), from the fixed-point or Lyapunov oracle.
  Matrix oracle_sigma;
  double oracle_trace = std::numeric_limits<double>::quiet_NaN();
  double trace_budget = 0.0;
  /// trace_budget - oracle_trace
  double trace_margin = std::numeric_limits<double>::quiet_NaN();
  /// Relative residual of the steady-state equation at oracle_sigma.
  double oracle_residual = std::numeric_limits<double>::quiet_NaN();
  bool stable = false;
  /// Spectral radius of (I - K C) A, or spectral abscissa of A - K C.
  double stability_measure = std::numeric_limits<double>::quiet_NaN();
  std::vector<BlockResidual> lmi;
  double lmi_worst_relative = 0.0;
  /// Trace of the Riccati-optimal covariance for the same (Q, R).
  double riccati_trace = std::numeric_limits<double>::quiet_NaN();
  Matrix riccati_sigma;
  Matrix riccati_gain;
  bool budget_met = false;
  bool lmi_certified = false;
  bool riccati_consistent = false;
  bool passed = false;
  std::vector<std::string> warnings;
};

/// Re-evaluates a design with oracles that do not involve the SDP.
inline VerificationReport verify_solution(const LtiModel& model,
                                          const DesignSolution& sol,
                                          const DesignSpec& spec) {
  if (!has_solution(sol.status))
    throw PreconditionError(std::string("cannot verify a design with status ") +
                            to_string(sol.status));
  VerificationReport rep;
  rep.program = sol.program;
  rep.trace_budget = spec.trace_budget();
  const Matrix Q = sol.finite_Q();
  const Matrix R = sol.finite_R();
  const Matrix& K = sol.K;
  const int n = model.n();

  if (model.is_discrete()) {
    const Matrix IKC = Matrix::Identity(n, n) - K * model.C();
    rep.stability_measure = linalg::spectral_radius(IKC * model.A());
    rep.stable = rep.stability_measure < 1.0;
  } else {
    rep.stability_measure = linalg::spectral_abscissa(model.A() - K * model.C());
    rep.stable = rep.stability_measure < 0.0;
  }

  if (rep.stable) {
    if (model.is_discrete()) {
      rep.oracle_sigma = joseph_fixed_point(model, K, Q, R);
      const Matrix IKC = Matrix::Identity(n, n) - K * model.C();
      const Matrix& A = model.A();
      const Matrix rhs =
          IKC * (A * rep.oracle_sigma * A.transpose() +
                 model.B() * Q * model.B().transpose()) *
              IKC.transpose() +
          K * R * K.transpose();
      rep.oracle_residual =
          (rep.oracle_sigma - rhs).norm() / std::max(1.0, rhs.norm());
      const RiccatiSolution opt = dare_steady_state(model, Q, R);
      rep.riccati_sigma = opt.posterior;
      rep.riccati_gain = opt.gain;
    } else {
      rep.oracle_sigma = care_lyapunov_steady_state(model, K, Q, R);
      const Matrix M = K * R * K.transpose() +
                       model.B() * Q * model.B().transpose();
      rep.oracle_residual =
          lyapunov_residual(model.A() - K * model.C(), rep.oracle_sigma, M) /
          std::max(1.0, M.norm());
      const RiccatiSolution opt = kalman_bucy_steady_state(model, Q, R);
      rep.riccati_sigma = opt.posterior;
      rep.riccati_gain = opt.gain;
    }
    rep.oracle_trace = rep.oracle_sigma.trace();
    rep.trace_margin = rep.trace_budget - rep.oracle_trace;
    rep.riccati_trace = rep.riccati_sigma.trace();
    rep.budget_met =
        rep.trace_margin >= -kTraceTolerance * std::max(1.0, rep.trace_budget);
    rep.riccati_consistent =
        rep.riccati_trace <= rep.oracle_trace + kRiccatiTolerance;
  } else {
    rep.trace_margin = -std::numeric_limits<double>::infinity();
    rep.warnings.push_back("error dynamics are unstable; no steady state");
  }

  if (sol.assignment.size() > 0) {
    rep.lmi = check_lmi_residual(build_program(model, spec), sol.assignment);
    rep.lmi_worst_relative = std::numeric_limits<double>::infinity();
    for (const auto& b : rep.lmi)
      rep.lmi_worst_relative = std::min(rep.lmi_worst_relative, b.relative());
    rep.lmi_certified = rep.lmi_worst_relative >= -kLmiTolerance;
  } else {
    rep.warnings.push_back("no solver assignment; LMI residuals not checked");
  }
  for (const auto& w : sol.warnings) rep.warnings.push_back(w);
  rep.passed = rep.stable && rep.budget_met && rep.lmi_certified &&
               rep.riccati_consistent;
  return rep;
}

}  // namespace robustkf
