#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "robustkf/error.hpp"
#include "robustkf/linalg.hpp"

namespace robustkf {

enum class TimeDomain { Continuous, Discrete };

inline const char* to_string(TimeDomain d) {
  return d == TimeDomain::Continuous ? "continuous" : "discrete";
}

/// Optional human-readable names used in reports. Each list is either empty
/// or matches the corresponding dimension.
struct ModelLabels {
  std::vector<std::string> states;
  std::vector<std::string> noises;
  std::vector<std::string> sensors;
};

/// Throws ValidationError naming the first inconsistent matrix.
inline void check_dimensions(const Matrix& A, const Matrix& B,
                             const Matrix& C) {
  if (A.rows() != A.cols())
    throw ValidationError("A", "A must be square, got " +
                                   std::to_string(A.rows()) + "x" +
                                   std::to_string(A.cols()));
  if (A.rows() == 0) throw ValidationError("A", "A must be non-empty");
  if (B.rows() != A.rows())
    throw ValidationError("B", "B must have " + std::to_string(A.rows()) +
                                   " rows, got " + std::to_string(B.rows()));
  if (C.cols() != A.rows())
    throw ValidationError("C", "C must have " + std::to_string(A.rows()) +
                                   " columns, got " +
                                   std::to_string(C.cols()));
  if (!A.allFinite()) throw ValidationError("A", "A has non-finite entries");
  if (!B.allFinite()) throw ValidationError("B", "B has non-finite entries");
  if (!C.allFinite()) throw ValidationError("C", "C has non-finite entries");
}

/// Linear time-invariant system x' = A x + B w, y = C x + n, either in
/// continuous time or sampled with period `sample_time`. Immutable.
class LtiModel {
 public:
  LtiModel(Matrix A, Matrix B, Matrix C, TimeDomain domain,
           std::optional<double> sample_time = std::nullopt,
           ModelLabels labels = {})
      : A_(std::move(A)),
        B_(std::move(B)),
        C_(std::move(C)),
        domain_(domain),
        sample_time_(sample_time),
        labels_(std::move(labels)) {
    check_dimensions(A_, B_, C_);
    if (domain_ == TimeDomain::Discrete) {
      if (!sample_time_ || !(*sample_time_ > 0.0) ||
          !std::isfinite(*sample_time_))
        throw ValidationError("sample_time",
                              "discrete models need a positive sample_time");
    } else if (sample_time_) {
      throw ValidationError("sample_time",
                            "continuous models must not carry a sample_time");
    }
    check_labels(labels_.states, n(), "state_labels");
    check_labels(labels_.noises, m(), "noise_labels");
    check_labels(labels_.sensors, p(), "sensor_labels");
  }

  static LtiModel continuous(Matrix A, Matrix B, Matrix C,
                             ModelLabels labels = {}) {
    return {std::move(A), std::move(B), std::move(C), TimeDomain::Continuous,
            std::nullopt, std::move(labels)};
  }

  static LtiModel discrete(Matrix A, Matrix B, Matrix C, double sample_time,
                           ModelLabels labels = {}) {
    return {std::move(A), std::move(B),   std::move(C),
            TimeDomain::Discrete, sample_time, std::move(labels)};
  }

  const Matrix& A() const noexcept { return A_; }
  const Matrix& B() const noexcept { return B_; }
  const Matrix& C() const noexcept { return C_; }
  TimeDomain domain() const noexcept { return domain_; }
  bool is_discrete() const noexcept { return domain_ == TimeDomain::Discrete; }
  std::optional<double> sample_time() const noexcept { return sample_time_; }
  const ModelLabels& labels() const noexcept { return labels_; }

  int n() const noexcept { return static_cast<int>(A_.rows()); }
  int m() const noexcept { return static_cast<int>(B_.cols()); }
  int p() const noexcept { return static_cast<int>(C_.rows()); }

  std::string state_label(int i) const {
    return label_or(labels_.states, i, "x");
  }
  std::string noise_label(int i) const {
    return label_or(labels_.noises, i, "w");
  }
  std::string sensor_label(int i) const {
    return label_or(labels_.sensors, i, "y");
  }

 private:
  static void check_labels(const std::vector<std::string>& l, int expected,
                           const char* what) {
    if (!l.empty() && static_cast<int>(l.size()) != expected)
      throw ValidationError(what, std::string(what) + " has " +
                                      std::to_string(l.size()) +
                                      " entries, expected " +
                                      std::to_string(expected));
  }
  static std::string label_or(const std::vector<std::string>& l, int i,
                              const char* prefix) {
    if (i >= 0 && i < static_cast<int>(l.size())) return l[i];
    return std::string(prefix) + std::to_string(i + 1);
  }

  Matrix A_, B_, C_;
  TimeDomain domain_;
  std::optional<double> sample_time_;
  ModelLabels labels_;
};

struct ValidationReport {
  bool controllable = false;
  bool observable = false;
  int controllability_rank = 0;
  int observability_rank = 0;
};

/// Singular values below this fraction of the largest count as zero.
inline constexpr double kRankTolerance = 1e-9;

inline Matrix controllability_matrix(const Matrix& A, const Matrix& B) {
  const auto n = A.rows();
  Matrix M(n, n * B.cols());
  Matrix block = B;
  for (Eigen::Index k = 0; k < n; ++k) {
    M.middleCols(k * B.cols(), B.cols()) = block;
    block = A * block;
  }
  return M;
}

inline Matrix observability_matrix(const Matrix& A, const Matrix& C) {
  const auto n = A.rows();
  Matrix M(n * C.rows(), n);
  Matrix block = C;
  for (Eigen::Index k = 0; k < n; ++k) {
    M.middleRows(k * C.rows(), C.rows()) = block;
    block = block * A;
  }
  return M;
}

/// Structural checks on (A, B) and (C, A). The noise covariance is a design
/// variable here, so controllability is tested on B rather than B Q B^T.
inline ValidationReport validate_model(const LtiModel& model) {
  check_dimensions(model.A(), model.B(), model.C());
  ValidationReport r;
  r.controllability_rank = linalg::numerical_rank(
      controllability_matrix(model.A(), model.B()), kRankTolerance);
  r.observability_rank = linalg::numerical_rank(
      observability_matrix(model.A(), model.C()), kRankTolerance);
  r.controllable = r.controllability_rank == model.n();
  r.observable = r.observability_rank == model.n();
  return r;
}

/// Bilinear (Tustin) discretization:
///   A_d = (I - Ts/2 A)^-1 (I + Ts/2 A),  B_d = (I - Ts/2 A)^-1 B Ts,  C_d = C.
inline LtiModel tustin_discretize(const LtiModel& model, double Ts) {
  if (model.is_discrete())
    throw DomainError("tustin_discretize expects a continuous model");
  if (!(Ts > 0.0) || !std::isfinite(Ts))
    throw PreconditionError("sample time must be positive, got " +
                            std::to_string(Ts));
  const int n = model.n();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix left = I - 0.5 * Ts * model.A();
  const double smin = linalg::min_singular_value(left);
  const double smax = left.norm();
  if (!(smin > 1e-14 * std::max(1.0, smax)))
    throw DiscretizationError(
        "I - (Ts/2) A is singular; smallest singular value " +
            std::to_string(smin),
        smin);
  Eigen::PartialPivLU<Matrix> lu(left);
  Matrix Ad = lu.solve(I + 0.5 * Ts * model.A());
  Matrix Bd = lu.solve(model.B()) * Ts;
  return LtiModel::discrete(std::move(Ad), std::move(Bd), model.C(), Ts,
                            model.labels());
}

/// Relative tolerance applied to ||M||_F for symmetry and eigenvalue clipping.
inline constexpr double kSymmetryTolerance = 1e-10;

/// Symmetric square root of a symmetric positive semidefinite matrix.
inline Matrix psd_sqrt(const Matrix& M) {
  if (M.rows() != M.cols())
    throw PreconditionError("psd_sqrt expects a square matrix");
  const double scale = M.norm();
  const double eps = kSymmetryTolerance * scale;
  if (linalg::asymmetry(M) > eps)
    throw PreconditionError("psd_sqrt input is not symmetric (asymmetry " +
                            std::to_string(linalg::asymmetry(M)) + ")");
  Eigen::SelfAdjointEigenSolver<Matrix> es(linalg::symmetrize(M));
  Vector ev = es.eigenvalues();
  if (ev.size() > 0 && ev(0) < -eps)
    throw NotPsdError("matrix is not positive semidefinite; eigenvalue " +
                          std::to_string(ev(0)),
                      ev(0));
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  Matrix S = es.eigenvectors() * ev.asDiagonal() *
             es.eigenvectors().transpose();
  return linalg::symmetrize(S);
}

}  // namespace robustkf
