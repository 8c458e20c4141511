#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "robustkf/design.hpp"
#include "robustkf/verify.hpp"

namespace robustkf {

struct SparsityResult {
  std::vector<int> active_sensors;
  std::vector<int> inactive_sensors;
  /// Gain with the columns of inactive sensors set to zero.
  Matrix pruned_gain;
  /// ||K(:, j)|| of the gain before pruning.
  Vector column_norms;
  /// One zeta vector per reweighting iteration (a single entry otherwise).
  std::vector<Vector> zeta_history;
  std::vector<std::vector<int>> active_history;
  int sparsity_level = 0;
  int iterations = 0;
  /// Oracle trace of the pruned filter, when it was re-verified.
  double pruned_trace = std::numeric_limits<double>::quiet_NaN();
  double pruned_margin = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;
};

/// The l1 design: design_robust_filter with lambda forced to 1.
inline DesignSolution sparse_design(const LtiModel& model, DesignSpec spec) {
  spec.lambda = 1.0;
  return design_robust_filter(model, spec);
}

namespace detail {

inline std::vector<int> complement(const std::vector<int>& idx, int size) {
  std::vector<int> out;
  for (int j = 0; j < size; ++j)
    if (std::find(idx.begin(), idx.end(), j) == idx.end()) out.push_back(j);
  return out;
}

}  // namespace detail

struct ReweightedResult {
  DesignSolution solution;
  SparsityResult sparsity;
};

/// Iteratively reweighted l1. Iteration t + 1 uses sensor weights
///   w_i = W_r,ii (max(zeta) + eps) / (zeta_i + eps)
/// computed from iteration t; the constant factor keeps the largest entry's
/// weight at W_r,ii and makes eps = inf reproduce the plain l1 design.
/// Stops when the active set repeats or after `max_iters` solves.
inline ReweightedResult reweighted_l1(const LtiModel& model, DesignSpec spec,
                                      int max_iters = 10,
                                      std::optional<double> eps_reweight = std::nullopt) {
  if (max_iters < 1) throw PreconditionError("max_iters must be at least 1");
  spec.lambda = 1.0;
  const Vector base = detail::weights_or_ones(spec.sensor_weights, model.p(),
                                              "sensor weights");
  ReweightedResult out;
  SparsityResult& sp = out.sparsity;
  bool have_solution = false;
  std::optional<double> eps = eps_reweight;

  for (int it = 1; it <= max_iters; ++it) {
    DesignSolution sol = design_robust_filter(model, spec);
    if (!has_solution(sol.status)) {
      if (!have_solution) {
        out.solution = std::move(sol);
        sp.warnings.push_back("first l1 solve failed");
        return out;
      }
      sp.warnings.push_back("iteration " + std::to_string(it) + " returned " +
                            to_string(sol.status) +
                            "; keeping the previous iterate");
      break;
    }
    const std::vector<int> active = sol.active_sensors();
    if (!sp.active_history.empty() &&
        active.size() > sp.active_history.back().size())
      sp.warnings.push_back("active set grew at iteration " +
                            std::to_string(it));
    sp.zeta_history.push_back(sol.zeta);
    sp.active_history.push_back(active);
    sp.iterations = it;
    out.solution = std::move(sol);
    have_solution = true;

    const auto& hist = sp.active_history;
    if (hist.size() >= 2 && hist[hist.size() - 1] == hist[hist.size() - 2])
      break;

    const Vector& z = out.solution.zeta;
    const double zmax = z.maxCoeff();
    if (!eps) eps = 1e-6 * zmax;
    if (std::isinf(*eps)) {
      spec.sensor_weights = base;
    } else {
      spec.sensor_weights = base.cwiseProduct(
          ((zmax + *eps) / (z.array() + *eps)).matrix());
    }
  }

  const DesignSolution& sol = out.solution;
  sp.inactive_sensors = sol.inactive_sensors;
  sp.active_sensors = sol.active_sensors();
  sp.sparsity_level = static_cast<int>(sp.inactive_sensors.size());
  sp.column_norms = sol.K.colwise().norm().transpose();
  sp.pruned_gain = sol.K;
  for (int j : sp.inactive_sensors) sp.pruned_gain.col(j).setZero();
  return out;
}

/// Zeroes the gain columns of sensors with zeta_j < threshold and checks
/// with the oracle that the pruned filter still meets the trace budget.
/// Throws PruningRejected when it does not.
inline SparsityResult prune_sensors(const LtiModel& model,
                                    const DesignSolution& sol,
                                    const DesignSpec& spec, double threshold) {
  if (sol.zeta.size() != model.p() || sol.K.cols() != model.p())
    throw PreconditionError("solution does not carry zeta and K for every sensor");
  SparsityResult sp;
  for (int j = 0; j < sol.zeta.size(); ++j)
    if (sol.zeta(j) < threshold) sp.inactive_sensors.push_back(j);
  sp.active_sensors = detail::complement(sp.inactive_sensors, model.p());
  sp.sparsity_level = static_cast<int>(sp.inactive_sensors.size());
  sp.column_norms = sol.K.colwise().norm().transpose();
  sp.pruned_gain = sol.K;
  for (int j : sp.inactive_sensors) sp.pruned_gain.col(j).setZero();
  sp.zeta_history.push_back(sol.zeta);
  sp.active_history.push_back(sp.active_sensors);
  sp.iterations = 1;

  const double eps_col = 1e-8 * sol.K.norm();
  for (int j : sp.inactive_sensors)
    if (sp.column_norms(j) > eps_col)
      sp.warnings.push_back("sensor " + std::to_string(j) +
                            " has a nonzero gain column before pruning (" +
                            std::to_string(sp.column_norms(j)) + ")");

  const Matrix Q = sol.finite_Q();
  // Pruned columns of K are zero, so their noise never enters K R K'.
  Matrix R = sol.finite_R();
  for (int j : sp.inactive_sensors) R(j, j) = 0.0;
  Matrix sigma;
  try {
    sigma = model.is_discrete()
                ? joseph_fixed_point(model, sp.pruned_gain, Q, R)
                : care_lyapunov_steady_state(model, sp.pruned_gain, Q, R);
  } catch (const StabilityError& e) {
    throw PruningRejected(
        std::string("pruned filter is unstable: ") + e.what(),
        sp.inactive_sensors);
  }
  const double budget = spec.trace_budget();
  sp.pruned_trace = sigma.trace();
  sp.pruned_margin = budget - sp.pruned_trace;
  if (sp.pruned_margin < -kTraceTolerance * std::max(1.0, budget))
    throw PruningRejected("pruned filter violates the trace budget (trace " +
                              std::to_string(sp.pruned_trace) + " > " +
                              std::to_string(budget) + ")",
                          sp.inactive_sensors);
  return sp;
}

}  // namespace robustkf
