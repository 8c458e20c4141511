#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "robustkf/lmi.hpp"
#include "robustkf/model.hpp"
#include "robustkf/solver.hpp"

namespace robustkf {

/// Required steady-state covariance (exact-covariance programs).
struct ExactCovariance {
  Matrix sigma;
};

/// tr(Sigma) <= theta (trace-bound programs).
struct TraceBound {
  double theta = 0.1;
};

using PerformanceTarget = std::variant<ExactCovariance, TraceBound>;

struct DesignSpec {
  PerformanceTarget target = TraceBound{};
  double gamma = 1.0;
  double lambda = 2.0;
  /// Diagonal of W_q; empty means identity.
  Vector process_weights;
  /// Diagonal of W_r; empty means identity.
  Vector sensor_weights;
  std::optional<Vector> eta_max;
  std::optional<Vector> zeta_max;
  SolverOptions solver;

  bool is_trace_bound() const {
    return std::holds_alternative<TraceBound>(target);
  }

  LmiSettings settings() const {
    LmiSettings s;
    s.gamma = gamma;
    s.lambda = lambda;
    s.process_weights = process_weights;
    s.sensor_weights = sensor_weights;
    s.eta_max = eta_max;
    s.zeta_max = zeta_max;
    return s;
  }

  /// The trace the oracle covariance is checked against.
  double trace_budget() const {
    if (const auto* t = std::get_if<TraceBound>(&target)) return t->theta;
    return std::get<ExactCovariance>(target).sigma.trace();
  }
};

enum class DesignStatus { Optimal, NearOptimal, Infeasible, NumericalFailure };

inline const char* to_string(DesignStatus s) {
  switch (s) {
    case DesignStatus::Optimal: return "Optimal";
    case DesignStatus::NearOptimal: return "NearOptimal";
    case DesignStatus::Infeasible: return "Infeasible";
    case DesignStatus::NumericalFailure: return "NumericalFailure";
  }
  return "?";
}

inline bool has_solution(DesignStatus s) {
  return s == DesignStatus::Optimal || s == DesignStatus::NearOptimal;
}

/// Precisions below this fraction of the largest one are treated as zero.
inline constexpr double kInactiveFraction = 1e-8;
/// Condition number of Z above which recovery attaches a warning.
inline constexpr double kZConditionWarning = 1e10;

struct DesignSolution {
  DesignStatus status = DesignStatus::NumericalFailure;
  SolverStatus solver_status = SolverStatus::NumericalFailure;
  ProgramKind program = ProgramKind::Generic;

  Matrix K;
  Vector eta;
  Vector zeta;
  /// diag(eta)^-1 and diag(zeta)^-1; inactive entries are +inf.
  Matrix Q;
  Matrix R;
  std::vector<int> inactive_process;
  std::vector<int> inactive_sensors;
  Matrix sigma_inf;
  std::optional<Matrix> Z;
  std::optional<Matrix> W;
  std::optional<Matrix> X;

  double objective = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double solve_time = 0.0;
  double certificate_norm = 0.0;
  double z_condition = std::numeric_limits<double>::quiet_NaN();
  /// Raw solver assignment of the program's scalars.
  Vector assignment;
  std::vector<std::string> warnings;
  std::string message;

  std::vector<int> active_sensors() const {
    std::vector<int> out;
    for (int j = 0; j < zeta.size(); ++j)
      if (std::find(inactive_sensors.begin(), inactive_sensors.end(), j) ==
          inactive_sensors.end())
        out.push_back(j);
    return out;
  }

  /// Q and R with inactive entries replaced by the finite reciprocals of the
  /// returned precisions (what the oracles consume).
  Matrix finite_Q() const { return reciprocal_diag(eta); }
  Matrix finite_R() const { return reciprocal_diag(zeta); }

 private:
  static Matrix reciprocal_diag(const Vector& v) {
    return v.cwiseInverse().asDiagonal();
  }
};

/// Selects and builds the program for the model's time domain and the
/// spec's target.
inline ConicProgram build_program(const LtiModel& model, const DesignSpec& spec) {
  const LmiSettings s = spec.settings();
  if (const auto* t = std::get_if<TraceBound>(&spec.target))
    return model.is_discrete() ? build_cor1(model, t->theta, s)
                               : build_cor2(model, t->theta, s);
  const Matrix& sigma = std::get<ExactCovariance>(spec.target).sigma;
  return model.is_discrete() ? build_thm1(model, sigma, s)
                             : build_thm2(model, sigma, s);
}

namespace detail {

inline std::vector<int> inactive_entries(const Vector& v) {
  std::vector<int> out;
  if (v.size() == 0) return out;
  const double cut = kInactiveFraction * v.maxCoeff();
  for (int i = 0; i < v.size(); ++i)
    if (v(i) < cut) out.push_back(i);
  return out;
}

inline Matrix covariance_from(const Vector& precision,
                              const std::vector<int>& inactive) {
  Matrix M = Matrix::Zero(precision.size(), precision.size());
  for (int i = 0; i < precision.size(); ++i) M(i, i) = 1.0 / precision(i);
  for (int i : inactive) M(i, i) = std::numeric_limits<double>::infinity();
  return M;
}

}  // namespace detail

/// Maps a solver assignment of `program` to engineering quantities.
inline void recover_solution(const ConicProgram& program, const Vector& x,
                             DesignSolution& sol) {
  const RecoveryMap& map = program.recovery();
  const RecoveredVariables v = map.extract(program, x);
  sol.program = map.kind;
  sol.eta = v.eta;
  sol.zeta = v.zeta;
  sol.inactive_process = detail::inactive_entries(sol.eta);
  sol.inactive_sensors = detail::inactive_entries(sol.zeta);
  sol.Q = detail::covariance_from(sol.eta, sol.inactive_process);
  sol.R = detail::covariance_from(sol.zeta, sol.inactive_sensors);

  if (!map.uses_congruence()) {
    sol.K = v.gain_or_w;
    sol.sigma_inf = *map.sigma_inf;
    return;
  }
  const Matrix Z = linalg::symmetrize(*v.Z);
  sol.Z = Z;
  sol.W = v.gain_or_w;
  sol.X = v.X;
  Eigen::SelfAdjointEigenSolver<Matrix> es(Z, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0);
  const double hi = es.eigenvalues()(es.eigenvalues().size() - 1);
  sol.z_condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  Eigen::LLT<Matrix> llt(Z);
  if (llt.info() != Eigen::Success || !(lo > 0.0)) {
    sol.status = DesignStatus::NumericalFailure;
    sol.message = "Z is not positive definite (condition estimate " +
                  std::to_string(sol.z_condition) + ")";
    return;
  }
  if (sol.z_condition > kZConditionWarning)
    sol.warnings.push_back("Z is ill-conditioned (condition number " +
                           std::to_string(sol.z_condition) + ")");
  sol.K = llt.solve(*sol.W);
  sol.sigma_inf =
      linalg::symmetrize(llt.solve(Matrix::Identity(Z.rows(), Z.cols())));
}

inline DesignStatus design_status(SolverStatus s) {
  switch (s) {
    case SolverStatus::Optimal: return DesignStatus::Optimal;
    case SolverStatus::NearOptimal: return DesignStatus::NearOptimal;
    case SolverStatus::PrimalInfeasible:
    case SolverStatus::DualInfeasible: return DesignStatus::Infeasible;
    default: return DesignStatus::NumericalFailure;
  }
}

/// Solves an already built program and recovers the design.
inline DesignSolution solve_design(const ConicProgram& program,
                                   const DesignSpec& spec) {
  const SolveResult r = solve(program, spec.solver);
  DesignSolution sol;
  sol.solver_status = r.status;
  sol.status = design_status(r.status);
  sol.program = program.recovery().kind;
  sol.iterations = r.iterations;
  sol.solve_time = r.solve_time;
  sol.message = r.message;
  if (!has_solution(sol.status)) {
    sol.certificate_norm = r.certificate_norm;
    if (sol.status == DesignStatus::Infeasible && !spec.is_trace_bound())
      sol.message +=
          "; the exact covariance target cannot be met, consider a trace bound";
    return sol;
  }
  sol.assignment = r.x;
  sol.objective = r.objective;
  recover_solution(program, r.x, sol);
  return sol;
}

/// Builds, solves and recovers the robust filter for `model` and `spec`.
/// Throws PreconditionError when (C, A) is not observable.
inline DesignSolution design_robust_filter(const LtiModel& model,
                                           const DesignSpec& spec) {
  const ValidationReport rep = validate_model(model);
  if (!rep.observable)
    throw PreconditionError("(C, A) is not observable (rank " +
                            std::to_string(rep.observability_rank) + " of " +
                            std::to_string(model.n()) + ")");
  return solve_design(build_program(model, spec), spec);
}

}  // namespace robustkf
