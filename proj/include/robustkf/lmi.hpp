#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "robustkf/conic_program.hpp"
#include "robustkf/model.hpp"

namespace robustkf {

enum class PrecisionNorm { L1 = 1, L2 = 2 };

/// Maps the user-facing lambda to a supported norm. Fractional values in
/// (1, 2) would need a power cone and are rejected.
inline PrecisionNorm precision_norm(double lambda) {
  if (lambda == 1.0) return PrecisionNorm::L1;
  if (lambda == 2.0) return PrecisionNorm::L2;
  throw UnsupportedNormError(lambda);
}

/// Cost and side constraints shared by the four synthesis programs.
struct LmiSettings {
  double gamma = 1.0;
  double lambda = 2.0;
  /// Diagonal of W_q (length m); empty means identity.
  Vector process_weights;
  /// Diagonal of W_r (length p); empty means identity.
  Vector sensor_weights;
  /// Optional per-entry upper bounds on the precisions.
  std::optional<Vector> eta_max;
  std::optional<Vector> zeta_max;
};

/// Margin used on blocks whose solution must be invertible for recovery.
inline double psd_margin(const LtiModel& model) {
  return 1e-9 * (1.0 + model.A().norm());
}

/// Adds the epigraph of || diag(weight) v ||_lambda to `builder` and returns
/// the cost term. For lambda = 2 a scalar `t` with t >= ||W v||_2 is
/// introduced; for lambda = 1 the cost is sum_i w_i v_i, which equals the
/// 1-norm because v is constrained nonnegative by the caller.
inline LinExpr norm_epigraph(ProgramBuilder& builder,
                             const std::vector<LinExpr>& v, double lambda,
                             const Vector& weight, const std::string& name) {
  const PrecisionNorm norm = precision_norm(lambda);
  if (weight.size() != static_cast<Eigen::Index>(v.size()))
    throw PreconditionError("weight for '" + name + "' has length " +
                            std::to_string(weight.size()) + ", expected " +
                            std::to_string(v.size()));
  if (!(weight.array() > 0.0).all() || !weight.allFinite())
    throw PreconditionError("weights for '" + name + "' must be positive");
  if (norm == PrecisionNorm::L1) {
    LinExpr cost;
    for (size_t i = 0; i < v.size(); ++i)
      cost.add_scaled(v[i], weight(static_cast<Eigen::Index>(i)));
    return cost;
  }
  LinExpr t = builder.add_scalar("t_" + name);
  std::vector<LinExpr> wv;
  wv.reserve(v.size());
  for (size_t i = 0; i < v.size(); ++i)
    wv.push_back(weight(static_cast<Eigen::Index>(i)) * v[i]);
  builder.add_soc("epigraph_" + name, t, std::move(wv));
  return t;
}

namespace detail {

inline Vector weights_or_ones(const Vector& w, int size, const char* what) {
  if (w.size() == 0) return Vector::Ones(size);
  if (w.size() != size)
    throw PreconditionError(std::string(what) + " has length " +
                            std::to_string(w.size()) + ", expected " +
                            std::to_string(size));
  return w;
}

inline void require_spd(const Matrix& S, int n, const char* what) {
  if (S.rows() != n || S.cols() != n)
    throw PreconditionError(std::string(what) + " must be " +
                            std::to_string(n) + "x" + std::to_string(n));
  if (linalg::asymmetry(S) > kSymmetryTolerance * S.norm())
    throw PreconditionError(std::string(what) + " is not symmetric");
  Eigen::LLT<Matrix> llt(linalg::symmetrize(S));
  if (llt.info() != Eigen::Success || !(linalg::min_eigenvalue(S) > 0.0))
    throw PreconditionError(std::string(what) + " is not positive definite");
}

struct PrecisionVariables {
  std::vector<LinExpr> eta;
  std::vector<LinExpr> zeta;
};

/// Declares eta, zeta with explicit nonnegativity and optional upper bounds.
inline PrecisionVariables add_precisions(ProgramBuilder& b, int m, int p,
                                         const LmiSettings& s) {
  PrecisionVariables v{b.add_vector("eta", m), b.add_vector("zeta", p)};
  for (int i = 0; i < m; ++i)
    b.add_nonnegative("eta_nonneg_" + std::to_string(i), v.eta[i]);
  for (int j = 0; j < p; ++j)
    b.add_nonnegative("zeta_nonneg_" + std::to_string(j), v.zeta[j]);
  if (s.eta_max) {
    if (s.eta_max->size() != m)
      throw PreconditionError("eta_max must have length m");
    for (int i = 0; i < m; ++i)
      b.add_nonnegative("eta_max_" + std::to_string(i),
                        LinExpr((*s.eta_max)(i)) - v.eta[i]);
  }
  if (s.zeta_max) {
    if (s.zeta_max->size() != p)
      throw PreconditionError("zeta_max must have length p");
    for (int j = 0; j < p; ++j)
      b.add_nonnegative("zeta_max_" + std::to_string(j),
                        LinExpr((*s.zeta_max)(j)) - v.zeta[j]);
  }
  return v;
}

inline void set_cost(ProgramBuilder& b, const PrecisionVariables& v, int m,
                     int p, const LmiSettings& s) {
  if (!(s.gamma > 0.0) || !std::isfinite(s.gamma))
    throw PreconditionError("gamma must be positive");
  const Vector wq = weights_or_ones(s.process_weights, m, "process weights");
  const Vector wr = weights_or_ones(s.sensor_weights, p, "sensor weights");
  // The process-noise term is always a 2-norm; lambda applies to sensors.
  LinExpr cost = norm_epigraph(b, v.eta, 2.0, wq, "eta");
  cost.add_scaled(norm_epigraph(b, v.zeta, s.lambda, wr, "zeta"), s.gamma);
  b.set_objective(std::move(cost));
}

/// [X I; I Z] >= margin I together with tr(X) <= theta.
inline void add_trace_epigraph(ProgramBuilder& b, const AffineMatrix& X,
                               const AffineMatrix& Z, double theta,
                               double margin) {
  const Eigen::Index n = Z.rows();
  b.add_psd("trace_epigraph",
            AffineMatrix::symmetric_blocks(
                {n, n}, {{X, AffineMatrix::identity(n)}, {std::nullopt, Z}}),
            margin);
  LinExpr slack(theta);
  for (Eigen::Index i = 0; i < n; ++i) slack -= X(i, i);
  b.add_nonnegative("trace_bound", slack);
}

inline void require_theta(double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta))
    throw PreconditionError("trace bound theta must be positive");
}

}  // namespace detail

/// Discrete time, exact steady-state covariance Sigma:
///   [Sigma  (I-KC)A sqrt(Sigma)  (I-KC)B  K      ]
///   [*      I                    0        0      ]  >= 0
///   [*      0                    diag(eta) 0     ]
///   [*      *                    *        diag(zeta)]
inline ConicProgram build_thm1(const LtiModel& model, const Matrix& sigma_inf,
                               const LmiSettings& settings) {
  if (!model.is_discrete())
    throw DomainError("the exact-covariance discrete program needs a discrete model");
  const int n = model.n(), m = model.m(), p = model.p();
  detail::require_spd(sigma_inf, n, "sigma_inf");
  const Matrix root = psd_sqrt(sigma_inf);

  ProgramBuilder b;
  const AffineMatrix K =
      b.add_variable("K", n, p, VariableStructure::FullMatrix);
  const auto prec = detail::add_precisions(b, m, p, settings);
  const AffineMatrix IKC = Matrix::Identity(n, n) - K * model.C();

  b.add_psd("covariance_lmi",
            AffineMatrix::symmetric_blocks(
                {n, n, m, p},
                {{AffineMatrix::constant(linalg::symmetrize(sigma_inf)),
                  IKC * (model.A() * root), IKC * model.B(), K},
                 {std::nullopt, AffineMatrix::identity(n)},
                 {std::nullopt, std::nullopt, AffineMatrix::diagonal(prec.eta)},
                 {std::nullopt, std::nullopt, std::nullopt,
                  AffineMatrix::diagonal(prec.zeta)}}));
  detail::set_cost(b, prec, m, p, settings);

  RecoveryMap r;
  r.kind = ProgramKind::Theorem1;
  r.gain_variable = "K";
  r.eta_variable = "eta";
  r.zeta_variable = "zeta";
  r.sigma_inf = linalg::symmetrize(sigma_inf);
  b.set_recovery(std::move(r));
  return b.build();
}

/// Discrete time, trace budget tr(Sigma) <= theta, via Z = Sigma^-1, W = Z K.
inline ConicProgram build_cor1(const LtiModel& model, double theta,
                               const LmiSettings& settings) {
  if (!model.is_discrete())
    throw DomainError("the trace-bound discrete program needs a discrete model");
  detail::require_theta(theta);
  const int n = model.n(), m = model.m(), p = model.p();

  ProgramBuilder b;
  const AffineMatrix W =
      b.add_variable("W", n, p, VariableStructure::FullMatrix);
  const auto prec = detail::add_precisions(b, m, p, settings);
  const AffineMatrix Z = b.add_variable("Z", n, n, VariableStructure::Symmetric);
  const AffineMatrix X = b.add_variable("X", n, n, VariableStructure::Symmetric);
  const AffineMatrix ZWC = Z - W * model.C();

  b.add_psd("covariance_lmi",
            AffineMatrix::symmetric_blocks(
                {n, n, m, p},
                {{Z, ZWC * model.A(), ZWC * model.B(), W},
                 {std::nullopt, Z},
                 {std::nullopt, std::nullopt, AffineMatrix::diagonal(prec.eta)},
                 {std::nullopt, std::nullopt, std::nullopt,
                  AffineMatrix::diagonal(prec.zeta)}}));
  detail::add_trace_epigraph(b, X, Z, theta, psd_margin(model));
  detail::set_cost(b, prec, m, p, settings);

  RecoveryMap r;
  r.kind = ProgramKind::Corollary1;
  r.gain_variable = "W";
  r.eta_variable = "eta";
  r.zeta_variable = "zeta";
  r.z_variable = "Z";
  r.x_variable = "X";
  b.set_recovery(std::move(r));
  return b.build();
}

/// Continuous time, exact covariance. The paper-form block
///   [sym((A-KC)Sigma)  B  K; *  -diag(eta)  0; *  *  -diag(zeta)] <= 0
/// is stored negated as a PSD block.
inline ConicProgram build_thm2(const LtiModel& model, const Matrix& sigma_inf,
                               const LmiSettings& settings) {
  if (model.is_discrete())
    throw DomainError("the exact-covariance continuous program needs a continuous model");
  const int n = model.n(), m = model.m(), p = model.p();
  detail::require_spd(sigma_inf, n, "sigma_inf");
  const Matrix sigma = linalg::symmetrize(sigma_inf);

  ProgramBuilder b;
  const AffineMatrix K =
      b.add_variable("K", n, p, VariableStructure::FullMatrix);
  const auto prec = detail::add_precisions(b, m, p, settings);
  const AffineMatrix drift = ((model.A() - K * model.C()) * sigma).sym();

  b.add_psd("covariance_lmi",
            AffineMatrix::symmetric_blocks(
                {n, m, p},
                {{-drift, AffineMatrix::constant(-model.B()), -K},
                 {std::nullopt, AffineMatrix::diagonal(prec.eta)},
                 {std::nullopt, std::nullopt,
                  AffineMatrix::diagonal(prec.zeta)}}));
  detail::set_cost(b, prec, m, p, settings);

  RecoveryMap r;
  r.kind = ProgramKind::Theorem2;
  r.gain_variable = "K";
  r.eta_variable = "eta";
  r.zeta_variable = "zeta";
  r.sigma_inf = sigma;
  b.set_recovery(std::move(r));
  return b.build();
}

/// Continuous time, trace budget. Negated form of
///   [sym(ZA - WC)  ZB  W; *  -diag(eta)  0; *  *  -diag(zeta)] <= 0.
inline ConicProgram build_cor2(const LtiModel& model, double theta,
                               const LmiSettings& settings) {
  if (model.is_discrete())
    throw DomainError("the trace-bound continuous program needs a continuous model");
  detail::require_theta(theta);
  const int n = model.n(), m = model.m(), p = model.p();

  ProgramBuilder b;
  const AffineMatrix W =
      b.add_variable("W", n, p, VariableStructure::FullMatrix);
  const auto prec = detail::add_precisions(b, m, p, settings);
  const AffineMatrix Z = b.add_variable("Z", n, n, VariableStructure::Symmetric);
  const AffineMatrix X = b.add_variable("X", n, n, VariableStructure::Symmetric);
  const AffineMatrix drift = (Z * model.A() - W * model.C()).sym();

  b.add_psd("covariance_lmi",
            AffineMatrix::symmetric_blocks(
                {n, m, p},
                {{-drift, -(Z * model.B()), -W},
                 {std::nullopt, AffineMatrix::diagonal(prec.eta)},
                 {std::nullopt, std::nullopt,
                  AffineMatrix::diagonal(prec.zeta)}}));
  detail::add_trace_epigraph(b, X, Z, theta, psd_margin(model));
  detail::set_cost(b, prec, m, p, settings);

  RecoveryMap r;
  r.kind = ProgramKind::Corollary2;
  r.gain_variable = "W";
  r.eta_variable = "eta";
  r.zeta_variable = "zeta";
  r.z_variable = "Z";
  r.x_variable = "X";
  b.set_recovery(std::move(r));
  return b.build();
}

}  // namespace robustkf
