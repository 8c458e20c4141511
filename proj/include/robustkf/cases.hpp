#pragma once

#include <string>
#include <vector>

#include "robustkf/design.hpp"
#include "robustkf/model.hpp"

namespace robustkf {

/// Mean motion of the reference orbit used by the CWH example [rad/s].
inline constexpr double kCwhOmega = 0.00113;
/// Sample time of the discretized CWH examples [s].
inline constexpr double kCwhSampleTime = 0.01;
/// Trace budget shared by every example.
inline constexpr double kPaperTheta = 0.1;

/// Clohessy-Wiltshire relative motion, state (x, y, z, xdot, ydot, zdot),
/// process noise entering the three velocity rows, full-state measurement.
inline LtiModel cwh_model(double omega = kCwhOmega) {
  if (!(omega > 0.0)) throw PreconditionError("omega_ref must be positive");
  Matrix A = Matrix::Zero(6, 6);
  A(0, 3) = A(1, 4) = A(2, 5) = 1.0;
  A(3, 0) = 3.0 * omega * omega;
  A(3, 4) = 2.0 * omega;
  A(4, 3) = -2.0 * omega;
  A(5, 2) = -omega * omega;
  Matrix B = Matrix::Zero(6, 3);
  B.bottomRows(3).setIdentity();
  ModelLabels labels;
  labels.states = {"x", "y", "z", "xdot", "ydot", "zdot"};
  labels.noises = {"w_Fx", "w_Fy", "w_Fz"};
  labels.sensors = {"n_x", "n_y", "n_z", "n_xdot", "n_ydot", "n_zdot"};
  return LtiModel::continuous(std::move(A), std::move(B),
                              Matrix::Identity(6, 6), std::move(labels));
}

/// Trim point of the F-16 linearization; metadata only.
struct F16Trim {
  Vector x0;
  Vector u0;
};

inline F16Trim f16_trim() {
  F16Trim t;
  t.x0 = Vector(4);
  t.x0 << 1000.0, -3.02e-3, -3.02e-3, 0.0;
  t.u0 = Vector(2);
  t.u0 << 6041.2, -1.38;
  return t;
}

/// Longitudinal F-16 dynamics, state (V, alpha, theta, q).
inline LtiModel f16_model() {
  Matrix A(4, 4);
  A << -1.8969e-2, -0.4052, -32.17, 0.8915,
       -6.4397e-5, -1.6176, 0.0, 0.9325,
       0.0, 0.0, 0.0, 1.0,
       0.0, -2.3683, 0.0, -1.9696;
  Matrix B = Matrix::Zero(4, 3);
  B(0, 0) = 1.0;
  B(1, 1) = 1.0;
  B(3, 2) = 1.0;
  Matrix C(5, 4);
  C << -0.0191, -5.2893, -32.17, 3.7071,
       -0.0643, -1.6176, 0.0971, 932.5332,
       0.0, 1.0, 0.0, 0.0,
       0.0, 0.0, 0.0, 1.0,
       1.7578, 0.0, 0.0, 0.0;
  ModelLabels labels;
  labels.states = {"V", "alpha", "theta", "q"};
  labels.noises = {"w_V", "w_alpha", "w_q"};
  labels.sensors = {"n_udot", "n_wdot", "n_alpha", "n_q", "n_qbar"};
  return LtiModel::continuous(std::move(A), std::move(B), std::move(C),
                              std::move(labels));
}

struct PaperCase {
  std::string name;
  LtiModel model;
  DesignSpec spec;
};

inline const std::vector<std::string>& case_names() {
  static const std::vector<std::string> names = {
      "cwh-cont-c1", "cwh-cont-c2", "cwh-disc-c1", "cwh-disc-c2",
      "f16-c1",      "f16-c2",      "f16-sparse"};
  return names;
}

inline PaperCase paper_case(const std::string& name) {
  auto diag = [](std::initializer_list<double> v) {
    Vector d(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) d(i++) = x;
    return d;
  };
  DesignSpec spec;
  spec.target = TraceBound{kPaperTheta};
  spec.gamma = 1.0;
  spec.lambda = 2.0;

  if (name.rfind("cwh-", 0) == 0) {
    const bool discrete = name.rfind("cwh-disc-", 0) == 0;
    const bool weighted = name.size() > 3 && name.substr(name.size() - 3) == "-c2";
    if (name != "cwh-cont-c1" && name != "cwh-cont-c2" &&
        name != "cwh-disc-c1" && name != "cwh-disc-c2")
      throw UnknownCaseError(name, case_names());
    LtiModel model = discrete ? tustin_discretize(cwh_model(), kCwhSampleTime)
                              : cwh_model();
    if (weighted) {
      spec.process_weights = diag({1, 100, 10});
      spec.sensor_weights = diag({100, 10, 1, 100, 10, 1});
    }
    return {name, std::move(model), std::move(spec)};
  }
  if (name == "f16-c1") return {name, f16_model(), std::move(spec)};
  if (name == "f16-c2") {
    spec.process_weights = diag({1, 10, 1});
    spec.sensor_weights = diag({1, 1, 0.1, 1, 1});
    return {name, f16_model(), std::move(spec)};
  }
  if (name == "f16-sparse") {
    spec.lambda = 1.0;
    return {name, f16_model(), std::move(spec)};
  }
  throw UnknownCaseError(name, case_names());
}

}  // namespace robustkf
