#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "robustkf/model.hpp"
#include "robustkf/verify.hpp"

namespace robustkf {

struct SimConfig {
  /// Seconds for continuous models, number of steps for discrete ones.
  double horizon = 200.0;
  /// Integration step of continuous simulations [s].
  double dt = 0.01;
  int n_runs = 1;
  std::uint64_t seed = 0;
  /// Fixed true initial state; when absent each run draws x0 ~ N(xhat0, sigma0).
  std::optional<Vector> x0_true;
  /// Initial estimate; empty means zero.
  Vector xhat0;
  /// Initial error covariance; empty means identity.
  Matrix sigma0;
  bool store_runs = false;
};

struct SimResult {
  Vector time;
  /// Rows are time points, columns states.
  Matrix mean_error;
  Matrix sample_cov_diag;
  Matrix predicted_cov_diag;
  /// Per-run error trajectories (time x state) when requested.
  std::vector<Matrix> per_run_errors;
  int n_runs = 0;
};

struct CovarianceTrajectory {
  Vector time;
  std::vector<Matrix> sigma;
};

/// Number of samples in a simulation or covariance trajectory.
inline long trajectory_steps(const LtiModel& model, double horizon, double dt) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw PreconditionError("horizon must be positive");
  if (model.is_discrete()) return std::lround(horizon);
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw PreconditionError("dt must be positive");
  return std::lround(horizon / dt);
}

/// Error covariance from sigma0: the Joseph recursion for discrete models,
/// RK4 on dS/dt = F S + S F' + K R K' + B Q B' (F = A - K C) for continuous.
/// `horizon` is in steps for discrete models.
inline CovarianceTrajectory propagate_covariance(const LtiModel& model,
                                                 const Matrix& K,
                                                 const Matrix& Q,
                                                 const Matrix& R,
                                                 const Matrix& sigma0,
                                                 double horizon,
                                                 double dt = 0.01) {
  const int n = model.n();
  if (sigma0.rows() != n || sigma0.cols() != n)
    throw PreconditionError("sigma0 must be n x n");
  const long steps = trajectory_steps(model, horizon, dt);
  CovarianceTrajectory out;
  out.time.resize(steps + 1);
  out.sigma.reserve(static_cast<size_t>(steps + 1));
  Matrix S = linalg::symmetrize(sigma0);
  out.sigma.push_back(S);
  out.time(0) = 0.0;
  const double limit = 1e12 * (1.0 + S.trace());

  if (model.is_discrete()) {
    const double Ts = *model.sample_time();
    const Matrix IKC = Matrix::Identity(n, n) - K * model.C();
    const Matrix& A = model.A();
    const Matrix BQB = model.B() * Q * model.B().transpose();
    const Matrix KRK = K * R * K.transpose();
    for (long k = 1; k <= steps; ++k) {
      S = linalg::symmetrize(IKC * (A * S * A.transpose() + BQB) *
                                 IKC.transpose() +
                             KRK);
      out.time(k) = k * Ts;
      if (!S.allFinite() || S.trace() > limit)
        throw DivergenceError("covariance recursion diverged", out.time(k));
      out.sigma.push_back(S);
    }
    return out;
  }

  const Matrix F = model.A() - K * model.C();
  const Matrix M = K * R * K.transpose() + model.B() * Q * model.B().transpose();
  auto f = [&](const Matrix& X) -> Matrix {
    return F * X + X * F.transpose() + M;
  };
  for (long k = 1; k <= steps; ++k) {
    const Matrix k1 = f(S);
    const Matrix k2 = f(S + 0.5 * dt * k1);
    const Matrix k3 = f(S + 0.5 * dt * k2);
    const Matrix k4 = f(S + dt * k3);
    S = linalg::symmetrize(S + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    out.time(k) = k * dt;
    if (!S.allFinite() || S.trace() > limit)
      throw DivergenceError("covariance integration diverged; reduce dt",
                            out.time(k));
    out.sigma.push_back(S);
  }
  return out;
}

/// Seed of Monte-Carlo run i; depends only on (seed, i).
inline std::uint64_t run_seed(std::uint64_t seed, std::uint64_t i) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (i + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace detail {

/// Lower Cholesky-type factor L with L L' = M for PSD M (zero rows allowed).
inline Matrix noise_factor(const Matrix& M) {
  const Matrix S = linalg::symmetrize(M);
  Eigen::LDLT<Matrix> ldlt(S);
  if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() >= 0.0).all()) {
    const Matrix L = ldlt.matrixL();
    Matrix out = ldlt.transpositionsP().transpose() *
                 (L * ldlt.vectorD().cwiseSqrt().asDiagonal());
    return out;
  }
  return psd_sqrt(S);
}

}  // namespace detail

/// Monte-Carlo simulation of plant and filter with gain K under noise
/// covariances (Q, R). Continuous models use Euler-Maruyama: process noise
/// B sqrt(dt) Q^1/2 xi and measurement noise with variance R/dt per step.
/// Statistics are of the error e = x - xhat (posterior for discrete models).
inline SimResult simulate_filter(const LtiModel& model, const Matrix& K,
                                 const Matrix& Q, const Matrix& R,
                                 const SimConfig& config) {
  const int n = model.n(), m = model.m(), p = model.p();
  if (config.n_runs < 1) throw PreconditionError("n_runs must be at least 1");
  if (K.rows() != n || K.cols() != p) throw PreconditionError("K must be n x p");
  if (Q.rows() != m || Q.cols() != m) throw PreconditionError("Q must be m x m");
  if (R.rows() != p || R.cols() != p) throw PreconditionError("R must be p x p");
  if (!Q.allFinite() || !R.allFinite())
    throw PreconditionError("simulation needs finite Q and R");
  const long steps = trajectory_steps(model, config.horizon, config.dt);
  const Vector xhat0 = config.xhat0.size() ? config.xhat0 : Vector::Zero(n);
  const Matrix sigma0 =
      config.sigma0.size() ? config.sigma0 : Matrix::Identity(n, n);
  if (xhat0.size() != n) throw PreconditionError("xhat0 must have length n");
  if (config.x0_true && config.x0_true->size() != n)
    throw PreconditionError("x0_true must have length n");

  const CovarianceTrajectory pred =
      propagate_covariance(model, K, Q, R, sigma0, config.horizon, config.dt);

  SimResult res;
  res.n_runs = config.n_runs;
  res.time = pred.time;
  const long T = steps + 1;
  res.predicted_cov_diag.resize(T, n);
  for (long k = 0; k < T; ++k)
    res.predicted_cov_diag.row(k) = pred.sigma[static_cast<size_t>(k)].diagonal().transpose();

  Matrix sum = Matrix::Zero(T, n);
  Matrix sumsq = Matrix::Zero(T, n);

  const bool discrete = model.is_discrete();
  const double dt = discrete ? *model.sample_time() : config.dt;
  const Matrix& A = model.A();
  const Matrix& C = model.C();
  const Matrix Bq = model.B() * detail::noise_factor(Q);
  const Matrix Lr = detail::noise_factor(R);
  const Matrix L0 = detail::noise_factor(sigma0);
  const double sdt = std::sqrt(dt);
  // Euler-Maruyama: x+ = x + dt A x + Bw xi, y = C x + Ln nu. Truth and
  // estimate share the same arithmetic so a perfect start stays exact.
  const Matrix Bw = discrete ? Bq : Matrix(sdt * Bq);
  const Matrix Ln = discrete ? Lr : Matrix(Lr / sdt);

  Vector x(n), xh(n), xi(m), nu(p), e(n), y(p);
  for (int run = 0; run < config.n_runs; ++run) {
    std::mt19937_64 rng(run_seed(config.seed, static_cast<std::uint64_t>(run)));
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw = [&](Vector& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
    };
    Vector z0(n);
    draw(z0);
    x = config.x0_true ? *config.x0_true : Vector(xhat0 + L0 * z0);
    xh = xhat0;
    Matrix traj;
    if (config.store_runs) traj.resize(T, n);

    e = x - xh;
    sum.row(0) += e.transpose();
    sumsq.row(0) += e.cwiseAbs2().transpose();
    if (config.store_runs) traj.row(0) = e.transpose();

    for (long k = 1; k < T; ++k) {
      draw(xi);
      draw(nu);
      if (discrete) {
        x = A * x + Bw * xi;
        const Vector prior = A * xh;
        y = C * x + Ln * nu;
        xh = prior + K * (y - C * prior);
      } else {
        y = C * x + Ln * nu;
        const Vector xh_next = xh + dt * (A * xh + K * (y - C * xh));
        x = x + dt * (A * x) + Bw * xi;
        xh = xh_next;
      }
      e = x - xh;
      if (!e.allFinite())
        throw DivergenceError("simulation diverged in run " +
                                  std::to_string(run),
                              res.time(k));
      sum.row(k) += e.transpose();
      sumsq.row(k) += e.cwiseAbs2().transpose();
      if (config.store_runs) traj.row(k) = e.transpose();
    }
    if (config.store_runs) res.per_run_errors.push_back(std::move(traj));
  }

  const double N = config.n_runs;
  res.mean_error = sum / N;
  if (config.n_runs > 1) {
    res.sample_cov_diag =
        ((sumsq - N * res.mean_error.cwiseAbs2()) / (N - 1.0)).cwiseMax(0.0);
  } else {
    res.sample_cov_diag = Matrix::Zero(T, n);
  }
  return res;
}

/// Rows of the final `fraction` of the time grid.
inline long steady_state_start(const SimResult& r, double fraction = 0.25) {
  const long T = r.time.size();
  return std::max<long>(0, T - static_cast<long>(std::ceil(fraction * T)));
}

/// Per-state ratio of the time-averaged sample std to the time-averaged
/// predicted std over the final `fraction` of the horizon.
inline Vector steady_state_std_ratio(const SimResult& r, double fraction = 0.25) {
  const long k0 = steady_state_start(r, fraction);
  const long rows = r.time.size() - k0;
  const Vector sample =
      r.sample_cov_diag.bottomRows(rows).cwiseSqrt().colwise().mean().transpose();
  const Vector pred =
      r.predicted_cov_diag.bottomRows(rows).cwiseSqrt().colwise().mean().transpose();
  return sample.cwiseQuotient(pred);
}

/// RMS over the final `fraction` of the horizon of ||mean_error(t)||.
inline double final_quarter_mean_norm(const SimResult& r, double fraction = 0.25) {
  const long k0 = steady_state_start(r, fraction);
  const long rows = r.time.size() - k0;
  return std::sqrt(r.mean_error.bottomRows(rows).rowwise().squaredNorm().mean());
}

/// CSV with columns time, mean_e_i, std_e_i, pred_std_i (1-based i).
inline void write_sim_csv(std::ostream& os, const SimResult& r) {
  const auto n = r.mean_error.cols();
  os << "time";
  for (const char* prefix : {"mean_e_", "std_e_", "pred_std_"})
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << prefix << (i + 1);
  os << '\n';
  os.precision(12);
  for (Eigen::Index k = 0; k < r.time.size(); ++k) {
    os << r.time(k);
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << r.mean_error(k, i);
    for (Eigen::Index i = 0; i < n; ++i)
      os << ',' << std::sqrt(r.sample_cov_diag(k, i));
    for (Eigen::Index i = 0; i < n; ++i)
      os << ',' << std::sqrt(r.predicted_cov_diag(k, i));
    os << '\n';
  }
}

}  // namespace robustkf
