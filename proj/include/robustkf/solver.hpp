#pragma once

// Dense primal-dual interior-point method for linear cone programs over
// products of the nonnegative orthant, second-order cones and PSD cones:
//
//   minimize    c'x
//   subject to  G x + s = h,  A x = b,  s in K
//
// The iteration runs on the homogeneous self-dual embedding with
// Nesterov-Todd scaling and a Mehrotra predictor-corrector step, so it
// returns either an optimal point or an infeasibility certificate. PSD cone
// elements are stored as full column-major d*d vectors; the inner product is
// the plain dot product, which equals trace(X Y) for symmetric X and Y.

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "robustkf/conic_program.hpp"
#include "robustkf/linalg.hpp"

namespace robustkf {

enum class SolverStatus {
  Optimal,
  NearOptimal,
  PrimalInfeasible,
  DualInfeasible,
  NumericalFailure,
  IterationLimit
};

inline const char* to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::Optimal: return "Optimal";
    case SolverStatus::NearOptimal: return "NearOptimal";
    case SolverStatus::PrimalInfeasible: return "PrimalInfeasible";
    case SolverStatus::DualInfeasible: return "DualInfeasible";
    case SolverStatus::NumericalFailure: return "NumericalFailure";
    case SolverStatus::IterationLimit: return "IterationLimit";
  }
  return "?";
}

struct SolverOptions {
  double abstol = 1e-8;
  double reltol = 1e-8;
  double feastol = 1e-8;
  int max_iterations = 200;
  /// Iterative-refinement passes on each KKT solve.
  int refinement_steps = 1;
  double step_fraction = 0.99;
  /// Tolerance multiplier under which a stalled run is reported NearOptimal.
  double near_optimal_factor = 1e3;
};

struct SolveResult {
  SolverStatus status = SolverStatus::NumericalFailure;
  /// Values of the program's scalar variables.
  Vector x;
  /// Cone slack and dual variables of the standard form.
  Vector s;
  Vector z;
  Vector y;
  double objective = 0.0;
  double dual_objective = 0.0;
  double gap = 0.0;
  double relative_gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  /// Norm of the normalized infeasibility certificate, when one was found.
  double certificate_norm = 0.0;
  int iterations = 0;
  double solve_time = 0.0;
  std::string message;
};

struct ConeDims {
  int linear = 0;
  std::vector<int> soc;
  std::vector<int> psd;

  int size() const {
    int t = linear;
    for (int q : soc) t += q;
    for (int d : psd) t += d * d;
    return t;
  }
  int degree() const {
    int t = linear + static_cast<int>(soc.size());
    for (int d : psd) t += d;
    return t;
  }
};

struct StandardForm {
  Vector c;
  double objective_constant = 0.0;
  Matrix G;
  Vector h;
  Matrix A;
  Vector b;
  ConeDims dims;
};

/// Lowers a ConicProgram to the standard form above. Cone order is: linear
/// inequalities, second-order cones, PSD blocks (each in declaration order).
inline StandardForm to_standard_form(const ConicProgram& program) {
  StandardForm P;
  const int N = program.num_scalars();
  int n_eq = 0;
  for (const auto& l : program.linear_constraints()) {
    if (l.kind == LinearKind::NonNegative)
      ++P.dims.linear;
    else
      ++n_eq;
  }
  for (const auto& q : program.soc_constraints())
    P.dims.soc.push_back(1 + static_cast<int>(q.vec.size()));
  for (const auto& blk : program.psd_blocks())
    P.dims.psd.push_back(static_cast<int>(blk.expr.rows()));

  const int total = P.dims.size();
  P.G = Matrix::Zero(total, N);
  P.h = Vector::Zero(total);
  P.A = Matrix::Zero(n_eq, N);
  P.b = Vector::Zero(n_eq);

  // s = h - G x equals the affine expression e(x) = e0 + a'x.
  auto put = [&](int row, const LinExpr& e, double shift) {
    P.h(row) = e.constant() - shift;
    for (const auto& [k, a] : e.terms()) P.G(row, k) = -a;
  };

  int row = 0;
  int eq = 0;
  for (const auto& l : program.linear_constraints()) {
    if (l.kind == LinearKind::NonNegative) {
      put(row++, l.expr, 0.0);
    } else {
      P.b(eq) = -l.expr.constant();
      for (const auto& [k, a] : l.expr.terms()) P.A(eq, k) = a;
      ++eq;
    }
  }
  for (const auto& q : program.soc_constraints()) {
    put(row++, q.bound, 0.0);
    for (const auto& e : q.vec) put(row++, e, 0.0);
  }
  for (const auto& blk : program.psd_blocks()) {
    const auto d = blk.expr.rows();
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index i = 0; i < d; ++i)
        put(row + static_cast<int>(i + j * d), blk.expr(i, j),
            i == j ? blk.margin : 0.0);
    row += static_cast<int>(d * d);
  }

  P.c = Vector::Zero(N);
  for (const auto& [k, a] : program.objective().terms()) P.c(k) = a;
  P.objective_constant = program.objective().constant();
  return P;
}

namespace detail::cone {

struct Layout {
  int l = 0;
  std::vector<int> q, q_off;
  std::vector<int> s, s_off;
  int total = 0;
  int degree = 0;

  explicit Layout(const ConeDims& d) : l(d.linear), q(d.soc), s(d.psd) {
    int off = l;
    for (int m : q) {
      q_off.push_back(off);
      off += m;
    }
    for (int m : s) {
      s_off.push_back(off);
      off += m * m;
    }
    total = off;
    degree = d.degree();
  }
};

inline Eigen::Map<const Matrix> block(const Layout& L, const Vector& x, size_t k) {
  return {x.data() + L.s_off[k], L.s[k], L.s[k]};
}
inline Eigen::Map<Matrix> block(const Layout& L, Vector& x, size_t k) {
  return {x.data() + L.s_off[k], L.s[k], L.s[k]};
}

inline Vector identity(const Layout& L) {
  Vector e = Vector::Zero(L.total);
  e.head(L.l).setOnes();
  for (int o : L.q_off) e(o) = 1.0;
  for (size_t k = 0; k < L.s.size(); ++k)
    for (int i = 0; i < L.s[k]; ++i) e(L.s_off[k] + i * L.s[k] + i) = 1.0;
  return e;
}

/// Jordan product x o y.
inline Vector jordan(const Layout& L, const Vector& x, const Vector& y) {
  Vector r(L.total);
  r.head(L.l) = x.head(L.l).cwiseProduct(y.head(L.l));
  for (size_t k = 0; k < L.q.size(); ++k) {
    const int o = L.q_off[k], m = L.q[k];
    r(o) = x.segment(o, m).dot(y.segment(o, m));
    r.segment(o + 1, m - 1) =
        x(o) * y.segment(o + 1, m - 1) + y(o) * x.segment(o + 1, m - 1);
  }
  for (size_t k = 0; k < L.s.size(); ++k) {
    const Matrix X = block(L, x, k), Y = block(L, y, k);
    block(L, r, k) = 0.5 * (X * Y + Y * X);
  }
  return r;
}

/// Solves lambda o u = w for u, where the PSD parts of lambda are diagonal.
inline Vector jordan_solve(const Layout& L, const Vector& lam, const Vector& w) {
  Vector u(L.total);
  u.head(L.l) = w.head(L.l).cwiseQuotient(lam.head(L.l));
  for (size_t k = 0; k < L.q.size(); ++k) {
    const int o = L.q_off[k], m = L.q[k];
    const double l0 = lam(o);
    const auto l1 = lam.segment(o + 1, m - 1);
    const auto w1 = w.segment(o + 1, m - 1);
    const double det = l0 * l0 - l1.squaredNorm();
    const double u0 = (l0 * w(o) - l1.dot(w1)) / det;
    u(o) = u0;
    u.segment(o + 1, m - 1) = (w1 - u0 * l1) / l0;
  }
  for (size_t k = 0; k < L.s.size(); ++k) {
    const int d = L.s[k];
    const auto W = block(L, w, k);
    auto U = block(L, u, k);
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) {
        const double li = lam(L.s_off[k] + i * d + i);
        const double lj = lam(L.s_off[k] + j * d + j);
        U(i, j) = 2.0 * W(i, j) / (li + lj);
      }
  }
  return u;
}

/// Smallest "eigenvalue" of x with respect to the cone (negative if outside).
inline double min_eig(const Layout& L, const Vector& x) {
  double m = std::numeric_limits<double>::infinity();
  if (L.l > 0) m = std::min(m, x.head(L.l).minCoeff());
  for (size_t k = 0; k < L.q.size(); ++k) {
    const int o = L.q_off[k], n = L.q[k];
    m = std::min(m, x(o) - x.segment(o + 1, n - 1).norm());
  }
  for (size_t k = 0; k < L.s.size(); ++k)
    m = std::min(m, linalg::min_eigenvalue(Matrix(block(L, x, k))));
  return m;
}

/// Largest alpha with lam + alpha*d in the cone; lam is interior with
/// diagonal PSD parts. Returns +inf when the ray never leaves the cone.
inline double max_step(const Layout& L, const Vector& lam, const Vector& d) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  double amax = inf;
  for (int i = 0; i < L.l; ++i)
    if (d(i) < 0.0) amax = std::min(amax, -lam(i) / d(i));
  for (size_t k = 0; k < L.q.size(); ++k) {
    const int o = L.q_off[k], m = L.q[k];
    const auto l1 = lam.segment(o + 1, m - 1);
    const auto d1 = d.segment(o + 1, m - 1);
    // f(a) = (l0 + a d0)^2 - ||l1 + a d1||^2 = qa a^2 + 2 qb a + qc
    const double qa = d(o) * d(o) - d1.squaredNorm();
    const double qb = lam(o) * d(o) - l1.dot(d1);
    const double qc = lam(o) * lam(o) - l1.squaredNorm();
    const double disc = qb * qb - qa * qc;
    if (qa > 0.0 && qb >= 0.0) continue;
    if (disc < 0.0) continue;
    const double den = -qb + std::sqrt(disc);
    if (den > 0.0) amax = std::min(amax, qc / den);
  }
  for (size_t k = 0; k < L.s.size(); ++k) {
    const int dd = L.s[k];
    Vector root(dd);
    for (int i = 0; i < dd; ++i) root(i) = 1.0 / std::sqrt(lam(L.s_off[k] + i * dd + i));
    const Matrix D = block(L, d, k);
    const Matrix S = root.asDiagonal() * D * root.asDiagonal();
    const double me = linalg::min_eigenvalue(S);
    if (me < 0.0) amax = std::min(amax, -1.0 / me);
  }
  return amax;
}

/// Nesterov-Todd scaling W with W z = W^-T s = lambda.
///   linear: W = diag(d)
///   SOC:    W = beta (2 v v' - J),  W^-1 = (2 J v v' J - J) / beta
///   PSD:    W(X) = R' X R,  W^-T(X) = Rti' X Rti  with Rti = R^-T
struct Scaling {
  bool is_identity = false;
  Vector d;
  std::vector<Vector> v;
  std::vector<double> beta;
  std::vector<Matrix> r, rti;
};

enum class ScaleOp { W, WT, Winv, WinvT };

inline void apply(const Layout& L, const Scaling& S, ScaleOp op, double* x) {
  if (S.is_identity) return;
  Eigen::Map<Vector> lin(x, L.l);
  if (op == ScaleOp::W || op == ScaleOp::WT)
    lin = lin.cwiseProduct(S.d);
  else
    lin = lin.cwiseQuotient(S.d);
  for (size_t k = 0; k < L.q.size(); ++k) {
    const int m = L.q[k];
    Eigen::Map<Vector> xs(x + L.q_off[k], m);
    const Vector& v = S.v[k];
    Vector Jx = xs;
    Jx.tail(m - 1) *= -1.0;
    if (op == ScaleOp::W || op == ScaleOp::WT) {
      xs = S.beta[k] * (2.0 * v * v.dot(xs) - Jx);
    } else {
      Vector Jv = v;
      Jv.tail(m - 1) *= -1.0;
      xs = (2.0 * Jv * v.dot(Jx) - Jx) / S.beta[k];
    }
  }
  for (size_t k = 0; k < L.s.size(); ++k) {
    const int d = L.s[k];
    Eigen::Map<Matrix> X(x + L.s_off[k], d, d);
    switch (op) {
      case ScaleOp::W: X = S.r[k].transpose() * X * S.r[k]; break;
      case ScaleOp::WT: X = S.r[k] * X * S.r[k].transpose(); break;
      case ScaleOp::Winv: X = S.rti[k] * X * S.rti[k].transpose(); break;
      case ScaleOp::WinvT: X = S.rti[k].transpose() * X * S.rti[k]; break;
    }
  }
}

inline Vector apply(const Layout& L, const Scaling& S, ScaleOp op, Vector x) {
  apply(L, S, op, x.data());
  return x;
}

inline bool soc_scaling(const Eigen::Ref<const Vector>& s,
                        const Eigen::Ref<const Vector>& z, Vector& v,
                        double& beta, Eigen::Ref<Vector> lam) {
  const int m = static_cast<int>(s.size());
  const double sJs = s(0) * s(0) - s.tail(m - 1).squaredNorm();
  const double zJz = z(0) * z(0) - z.tail(m - 1).squaredNorm();
  if (!(s(0) > 0.0 && z(0) > 0.0 && sJs > 0.0 && zJz > 0.0)) return false;
  const double aa = std::sqrt(sJs), bb = std::sqrt(zJz);
  beta = std::sqrt(aa / bb);
  const double cc = std::sqrt((s.dot(z) / aa / bb + 1.0) / 2.0);
  v = s / aa;
  v(0) += z(0) / bb;
  v.tail(m - 1) -= z.tail(m - 1) / bb;
  v /= 2.0 * cc;
  v(0) += 1.0;
  v /= std::sqrt(2.0 * v(0));
  const double dd = 2.0 * cc + s(0) / aa + z(0) / bb;
  lam(0) = cc;
  lam.tail(m - 1) = s.tail(m - 1) * ((cc + z(0) / bb) / dd / aa) +
                    z.tail(m - 1) * ((cc + s(0) / aa) / dd / bb);
  lam *= std::sqrt(aa * bb);
  return true;
}

/// Builds the scaling at interior (s, z) and writes lambda.
inline bool compute_scaling(const Layout& L, const Vector& s, const Vector& z,
                            Scaling& S, Vector& lam) {
  S = Scaling{};
  lam = Vector::Zero(L.total);
  const auto sl = s.head(L.l), zl = z.head(L.l);
  if (L.l > 0 && !((sl.array() > 0.0).all() && (zl.array() > 0.0).all()))
    return false;
  S.d = sl.cwiseQuotient(zl).cwiseSqrt();
  lam.head(L.l) = sl.cwiseProduct(zl).cwiseSqrt();
  S.v.resize(L.q.size());
  S.beta.resize(L.q.size());
  for (size_t k = 0; k < L.q.size(); ++k) {
    const int o = L.q_off[k], m = L.q[k];
    if (!soc_scaling(s.segment(o, m), z.segment(o, m), S.v[k], S.beta[k],
                     lam.segment(o, m)))
      return false;
  }
  for (size_t k = 0; k < L.s.size(); ++k) {
    const int d = L.s[k];
    Eigen::LLT<Matrix> ls(linalg::symmetrize(Matrix(block(L, s, k))));
    Eigen::LLT<Matrix> lz(linalg::symmetrize(Matrix(block(L, z, k))));
    if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
    const Matrix Ls = ls.matrixL(), Lz = lz.matrixL();
    Eigen::JacobiSVD<Matrix> svd(Lz.transpose() * Ls,
                                 Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector sv = svd.singularValues();
    if (!(sv.minCoeff() > 0.0)) return false;
    const Vector isq = sv.cwiseSqrt().cwiseInverse();
    S.r.push_back(Ls * svd.matrixV() * isq.asDiagonal());
    S.rti.push_back(Lz * svd.matrixU() * isq.asDiagonal());
    auto lamk = block(L, lam, k);
    lamk.setZero();
    lamk.diagonal() = sv;
  }
  return true;
}

/// Moves the scaling to the new point given in current scaled coordinates:
/// st = W^-T s_new and zt = W z_new.
inline bool update_scaling(const Layout& L, Scaling& S, Vector& lam,
                           const Vector& st, const Vector& zt) {
  const auto sl = st.head(L.l), zl = zt.head(L.l);
  if (L.l > 0 && !((sl.array() > 0.0).all() && (zl.array() > 0.0).all()))
    return false;
  S.d = S.d.cwiseProduct(sl.cwiseQuotient(zl).cwiseSqrt());
  lam.head(L.l) = sl.cwiseProduct(zl).cwiseSqrt();

  // Second-order cones: map back to unscaled coordinates and rescale.
  for (size_t k = 0; k < L.q.size(); ++k) {
    const int o = L.q_off[k], m = L.q[k];
    const Vector& v = S.v[k];
    Vector sk = st.segment(o, m), zk = zt.segment(o, m);
    Vector Js = sk;
    Js.tail(m - 1) *= -1.0;
    sk = S.beta[k] * (2.0 * v * v.dot(sk) - Js);
    Vector Jz = zk;
    Jz.tail(m - 1) *= -1.0;
    Vector Jv = v;
    Jv.tail(m - 1) *= -1.0;
    zk = (2.0 * Jv * v.dot(Jz) - Jz) / S.beta[k];
    if (!soc_scaling(sk, zk, S.v[k], S.beta[k], lam.segment(o, m)))
      return false;
  }

  for (size_t k = 0; k < L.s.size(); ++k) {
    Eigen::LLT<Matrix> ls(linalg::symmetrize(Matrix(block(L, st, k))));
    Eigen::LLT<Matrix> lz(linalg::symmetrize(Matrix(block(L, zt, k))));
    if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
    const Matrix Ls = ls.matrixL(), Lz = lz.matrixL();
    Eigen::JacobiSVD<Matrix> svd(Lz.transpose() * Ls,
                                 Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector sv = svd.singularValues();
    if (!(sv.minCoeff() > 0.0)) return false;
    const Vector isq = sv.cwiseSqrt().cwiseInverse();
    S.r[k] = S.r[k] * Ls * svd.matrixV() * isq.asDiagonal();
    S.rti[k] = S.rti[k] * Lz * svd.matrixU() * isq.asDiagonal();
    auto lamk = block(L, lam, k);
    lamk.setZero();
    lamk.diagonal() = sv;
  }
  return true;
}

}  // namespace detail::cone

namespace detail {

/// Factored reduced KKT system
///   [0  A'  G'   ] [x]   [rx]
///   [-A 0   0    ] [y] = [ry]
///   [-G 0   W'W  ] [z]   [rz]
/// eliminated to [H A'; A 0] with H = G' W^-1 W^-T G.
class KktSolver {
 public:
  KktSolver(const StandardForm& P, const cone::Layout& L, int refinement)
      : P_(P), L_(L), refinement_(refinement) {}

  bool factor(const cone::Scaling& S) {
    S_ = &S;
    Gs_ = P_.G;
    for (Eigen::Index j = 0; j < Gs_.cols(); ++j)
      cone::apply(L_, S, cone::ScaleOp::WinvT, Gs_.col(j).data());
    Matrix H = Gs_.transpose() * Gs_;
    const auto n = H.rows();
    const auto p = P_.A.rows();
    const double scale = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
    if (p == 0) {
      llt_.compute(H);
      for (double reg = 1e-14; llt_.info() != Eigen::Success && reg < 1e-6;
           reg *= 100.0) {
        llt_.compute(H + reg * scale * Matrix::Identity(n, n));
      }
      return llt_.info() == Eigen::Success;
    }
    Matrix K = Matrix::Zero(n + p, n + p);
    K.topLeftCorner(n, n) = H;
    K.topRightCorner(n, p) = P_.A.transpose();
    K.bottomLeftCorner(p, n) = P_.A;
    lu_.compute(K);
    return std::isfinite(lu_.rcond()) && lu_.rcond() > 1e-300;
  }

  /// Solves the system; z is returned in scaled form W z.
  void solve(const Vector& rx, const Vector& ry, const Vector& rz, Vector& x,
             Vector& y, Vector& zt) const {
    solve_once(rx, ry, rz, x, y, zt);
    for (int it = 0; it < refinement_; ++it) {
      const Vector z = cone::apply(L_, *S_, cone::ScaleOp::Winv, zt);
      const Vector ex = rx - (P_.A.transpose() * y + P_.G.transpose() * z);
      const Vector ey = ry + P_.A * x;
      const Vector ez =
          rz - (-P_.G * x + cone::apply(L_, *S_, cone::ScaleOp::WT, zt));
      Vector cx, cy, czt;
      solve_once(ex, ey, ez, cx, cy, czt);
      x += cx;
      y += cy;
      zt += czt;
    }
  }

 private:
  void solve_once(const Vector& rx, const Vector& ry, const Vector& rz,
                  Vector& x, Vector& y, Vector& zt) const {
    const Vector rzs = cone::apply(L_, *S_, cone::ScaleOp::WinvT, rz);
    const Vector r1 = rx - Gs_.transpose() * rzs;
    const auto n = P_.G.cols();
    const auto p = P_.A.rows();
    if (p == 0) {
      x = llt_.solve(r1);
      y = Vector::Zero(0);
    } else {
      Vector rhs(n + p);
      rhs << r1, -ry;
      const Vector sol = lu_.solve(rhs);
      x = sol.head(n);
      y = sol.tail(p);
    }
    zt = rzs + Gs_ * x;
  }

  const StandardForm& P_;
  const cone::Layout& L_;
  int refinement_;
  const cone::Scaling* S_ = nullptr;
  Matrix Gs_;
  Eigen::LLT<Matrix> llt_;
  Eigen::PartialPivLU<Matrix> lu_;
};

}  // namespace detail

inline SolveResult solve_standard_form(const StandardForm& P,
                                       const SolverOptions& opt = {}) {
  using namespace detail::cone;
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  constexpr double inf = std::numeric_limits<double>::infinity();

  const Layout L(P.dims);
  const auto n = P.c.size();
  SolveResult res;
  if (P.G.rows() != L.total || P.G.cols() != n || P.h.size() != L.total ||
      P.A.cols() != n || P.A.rows() != P.b.size())
    throw PreconditionError("standard form has inconsistent dimensions");

  auto finish = [&](SolverStatus st, std::string msg) {
    res.status = st;
    res.message = std::move(msg);
    res.solve_time =
        std::chrono::duration<double>(clock::now() - t_start).count();
    return res;
  };

  const Vector e = identity(L);
  detail::KktSolver kkt(P, L, opt.refinement_steps);

  // Starting point from two least-squares problems with W = I.
  Scaling S;
  S.is_identity = true;
  if (!kkt.factor(S))
    return finish(SolverStatus::NumericalFailure,
                  "KKT system is singular at the starting point");
  Vector x, y, s, z, tmp;
  kkt.solve(Vector::Zero(n), -P.b, -P.h, x, y, tmp);
  s = -tmp;
  Vector x_unused;
  kkt.solve(-P.c, Vector::Zero(P.b.size()), Vector::Zero(L.total), x_unused, y,
            z);
  {
    const double ts = -min_eig(L, s);
    if (ts >= -1e-8 * std::max(s.norm(), 1.0)) s += (1.0 + ts) * e;
    const double tz = -min_eig(L, z);
    if (tz >= -1e-8 * std::max(z.norm(), 1.0)) z += (1.0 + tz) * e;
  }
  double tau = 1.0, kappa = 1.0;

  Vector lam;
  if (!compute_scaling(L, s, z, S, lam))
    return finish(SolverStatus::NumericalFailure,
                  "could not scale the starting point");

  const double resx0 = std::max(1.0, P.c.norm());
  const double resy0 = std::max(1.0, P.b.norm());
  const double resz0 = std::max(1.0, P.h.norm());

  Vector dsa, dza;
  double dtau_a = 0.0, dkap_a = 0.0;
  double last_step = 1.0;

  for (int iter = 0;; ++iter) {
    res.iterations = iter;
    const Vector hrx = -(P.A.transpose() * y) - P.G.transpose() * z;
    const Vector rx = hrx - tau * P.c;
    const Vector hry = P.A * x;
    const Vector ry = hry - tau * P.b;
    const Vector hrz = s + P.G * x;
    const Vector rz = hrz - tau * P.h;
    const double cx = P.c.dot(x), by = P.b.dot(y), hz = P.h.dot(z);
    const double rt = kappa + cx + by + hz;

    const double gap = s.dot(z) / (tau * tau);
    const double pcost = cx / tau;
    const double dcost = -(by + hz) / tau;
    double relgap = inf;
    if (pcost < 0.0)
      relgap = gap / -pcost;
    else if (dcost > 0.0)
      relgap = gap / dcost;
    const double pres =
        std::max(ry.norm() / tau / resy0, rz.norm() / tau / resz0);
    const double dres = rx.norm() / tau / resx0;
    const double pinfres =
        (hz + by < 0.0) ? hrx.norm() / resx0 / (-hz - by) : inf;
    const double dinfres =
        (cx < 0.0) ? std::max(hry.norm() / resy0, hrz.norm() / resz0) / (-cx)
                   : inf;

    res.gap = gap;
    res.relative_gap = relgap;
    res.primal_residual = pres;
    res.dual_residual = dres;
    res.objective = pcost + P.objective_constant;
    res.dual_objective = dcost + P.objective_constant;
    res.x = x / tau;
    res.y = y / tau;
    res.s = s / tau;
    res.z = z / tau;

    const bool optimal = pres <= opt.feastol && dres <= opt.feastol &&
                         (gap <= opt.abstol || relgap <= opt.reltol);
    if (optimal) return finish(SolverStatus::Optimal, "optimal");
    if (pinfres <= opt.feastol) {
      const double scale = -hz - by;
      res.y = y / scale;
      res.z = z / scale;
      res.certificate_norm = res.z.norm();
      return finish(SolverStatus::PrimalInfeasible,
                    "primal infeasible (dual ray found)");
    }
    if (dinfres <= opt.feastol) {
      res.x = x / -cx;
      res.s = s / -cx;
      res.certificate_norm = res.x.norm();
      return finish(SolverStatus::DualInfeasible,
                    "dual infeasible (primal ray found)");
    }

    const double f = opt.near_optimal_factor;
    auto stalled = [&](const std::string& why) {
      const bool near = pres <= f * opt.feastol && dres <= f * opt.feastol &&
                        (gap <= f * opt.abstol || relgap <= f * opt.reltol);
      return finish(near ? SolverStatus::NearOptimal
                         : (iter >= opt.max_iterations
                                ? SolverStatus::IterationLimit
                                : SolverStatus::NumericalFailure),
                    why);
    };
    if (iter >= opt.max_iterations) return stalled("iteration limit reached");
    if (last_step < 1e-10) return stalled("step length stagnated");

    if (!kkt.factor(S)) return stalled("KKT factorization failed");

    Vector x1, y1, z1t;
    kkt.solve(P.c, P.b, P.h, x1, y1, z1t);
    const Vector hs = apply(L, S, ScaleOp::WinvT, P.h);
    const double denom = kappa / tau + P.c.dot(x1) + P.b.dot(y1) + hs.dot(z1t);

    const double mu = (lam.squaredNorm() + tau * kappa) / (L.degree + 1);
    const Vector lamsq = jordan(L, lam, lam);

    double sigma = 0.0, eta = 0.0, alpha = 0.0;
    Vector dx, dy, dzt, dst;
    double dtau = 0.0, dkap = 0.0;
    for (int pass = 0; pass < 2; ++pass) {
      Vector ds = -lamsq + sigma * mu * e;
      double dk = -tau * kappa + sigma * mu;
      if (pass == 1) {
        ds -= jordan(L, dsa, dza);
        dk -= dtau_a * dkap_a;
      }
      const Vector u = jordan_solve(L, lam, ds);
      const Vector rzp = (1.0 - eta) * rz + apply(L, S, ScaleOp::WT, u);
      Vector x2, y2, z2t;
      kkt.solve((1.0 - eta) * rx, (1.0 - eta) * ry, rzp, x2, y2, z2t);
      dtau = ((1.0 - eta) * rt + dk / tau + P.c.dot(x2) + P.b.dot(y2) +
              hs.dot(z2t)) /
             denom;
      dx = x2 - dtau * x1;
      dy = y2 - dtau * y1;
      dzt = z2t - dtau * z1t;
      dst = u - dzt;
      dkap = (dk - kappa * dtau) / tau;
      if (!dx.allFinite() || !dzt.allFinite() || !std::isfinite(dtau))
        return stalled("non-finite search direction");

      double amax = std::min(max_step(L, lam, dst), max_step(L, lam, dzt));
      if (dtau < 0.0) amax = std::min(amax, -tau / dtau);
      if (dkap < 0.0) amax = std::min(amax, -kappa / dkap);
      if (pass == 0) {
        const double a_aff = std::min(1.0, amax);
        sigma = std::pow(1.0 - a_aff, 3);
        eta = sigma;
        dsa = dst;
        dza = dzt;
        dtau_a = dtau;
        dkap_a = dkap;
      } else {
        alpha = std::min(1.0, opt.step_fraction * amax);
      }
    }

    x += alpha * dx;
    y += alpha * dy;
    tau += alpha * dtau;
    kappa += alpha * dkap;
    const Vector st = lam + alpha * dst;
    const Vector zt = lam + alpha * dzt;
    if (!update_scaling(L, S, lam, st, zt))
      return stalled("scaling update failed");
    s = apply(L, S, ScaleOp::WT, lam);
    z = apply(L, S, ScaleOp::Winv, lam);
    last_step = alpha;
  }
}

/// Solves a ConicProgram; SolveResult::x indexes the program's scalars.
inline SolveResult solve(const ConicProgram& program,
                         const SolverOptions& options = {}) {
  return solve_standard_form(to_standard_form(program), options);
}

}  // namespace robustkf
