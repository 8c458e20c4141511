#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "robustkf/affine.hpp"
#include "robustkf/error.hpp"
#include "robustkf/linalg.hpp"

namespace robustkf {

enum class VariableStructure { FullMatrix, Symmetric, DiagonalVector, Scalar };

inline const char* to_string(VariableStructure s) {
  switch (s) {
    case VariableStructure::FullMatrix: return "full-matrix";
    case VariableStructure::Symmetric: return "symmetric";
    case VariableStructure::DiagonalVector: return "diagonal-vector";
    case VariableStructure::Scalar: return "scalar";
  }
  return "?";
}

/// A named block of the flattened decision vector. Full matrices are stored
/// row-major, symmetric matrices as their packed upper triangle, and
/// diagonal-vector variables as `rows` scalars.
struct Variable {
  std::string name;
  int rows = 0;
  int cols = 0;
  VariableStructure structure = VariableStructure::Scalar;
  int offset = 0;
  int size = 0;
};

/// expr >= margin * I in the semidefinite order.
struct PsdBlock {
  std::string name;
  AffineMatrix expr;
  double margin = 0.0;
};

/// bound >= || vec ||_2
struct SocConstraint {
  std::string name;
  LinExpr bound;
  std::vector<LinExpr> vec;
};

enum class LinearKind { NonNegative, Zero };

struct LinearConstraint {
  std::string name;
  LinExpr expr;
  LinearKind kind = LinearKind::NonNegative;
};

enum class ProgramKind { Theorem1, Corollary1, Theorem2, Corollary2, Generic };

inline const char* to_string(ProgramKind k) {
  switch (k) {
    case ProgramKind::Theorem1: return "discrete-exact-covariance";
    case ProgramKind::Corollary1: return "discrete-trace-bound";
    case ProgramKind::Theorem2: return "continuous-exact-covariance";
    case ProgramKind::Corollary2: return "continuous-trace-bound";
    case ProgramKind::Generic: return "generic";
  }
  return "?";
}

/// Raw design variables pulled out of a solver assignment.
struct RecoveredVariables {
  /// K for the exact-covariance programs, W = Z K for the trace-bound ones.
  Matrix gain_or_w;
  Vector eta;
  Vector zeta;
  std::optional<Matrix> Z;
  std::optional<Matrix> X;
};

class ConicProgram;

/// Describes which variables carry K (or W), eta, zeta, Z and X and how the
/// engineering quantities follow from them:
///   Q = diag(eta)^-1, R = diag(zeta)^-1,
///   Sigma = Z^-1 and K = Z^-1 W for the trace-bound programs,
///   Sigma = the fixed covariance for the exact-covariance programs.
struct RecoveryMap {
  ProgramKind kind = ProgramKind::Generic;
  std::string gain_variable;
  std::string eta_variable;
  std::string zeta_variable;
  std::string z_variable;
  std::string x_variable;
  std::optional<Matrix> sigma_inf;

  bool uses_congruence() const {
    return kind == ProgramKind::Corollary1 || kind == ProgramKind::Corollary2;
  }

  inline RecoveredVariables extract(const ConicProgram& program,
                                    const Vector& x) const;
};

class ConicProgram {
 public:
  const std::vector<Variable>& variables() const noexcept { return variables_; }
  const std::vector<PsdBlock>& psd_blocks() const noexcept { return psd_; }
  const std::vector<SocConstraint>& soc_constraints() const noexcept {
    return soc_;
  }
  const std::vector<LinearConstraint>& linear_constraints() const noexcept {
    return linear_;
  }
  const LinExpr& objective() const noexcept { return objective_; }
  const RecoveryMap& recovery() const noexcept { return recovery_; }
  int num_scalars() const noexcept { return num_scalars_; }

  bool has_variable(const std::string& name) const {
    return std::any_of(variables_.begin(), variables_.end(),
                       [&](const Variable& v) { return v.name == name; });
  }

  const Variable& variable(const std::string& name) const {
    for (const auto& v : variables_)
      if (v.name == name) return v;
    throw PreconditionError("program has no variable named '" + name + "'");
  }

  /// Expression matrix of a declared variable (column vector for
  /// diagonal-vector variables, 1x1 for scalars).
  AffineMatrix expression(const std::string& name) const {
    return expression_of(variable(name));
  }

  static AffineMatrix expression_of(const Variable& v) {
    switch (v.structure) {
      case VariableStructure::FullMatrix: {
        AffineMatrix M(v.rows, v.cols);
        for (int i = 0; i < v.rows; ++i)
          for (int j = 0; j < v.cols; ++j)
            M(i, j) = LinExpr::variable(v.offset + i * v.cols + j);
        return M;
      }
      case VariableStructure::Symmetric: {
        AffineMatrix M(v.rows, v.rows);
        int k = v.offset;
        for (int i = 0; i < v.rows; ++i)
          for (int j = i; j < v.rows; ++j, ++k) {
            M(i, j) = LinExpr::variable(k);
            M(j, i) = LinExpr::variable(k);
          }
        return M;
      }
      case VariableStructure::DiagonalVector: {
        AffineMatrix M(v.rows, 1);
        for (int i = 0; i < v.rows; ++i)
          M(i, 0) = LinExpr::variable(v.offset + i);
        return M;
      }
      case VariableStructure::Scalar: {
        AffineMatrix M(1, 1);
        M(0, 0) = LinExpr::variable(v.offset);
        return M;
      }
    }
    return {};
  }

  /// Entries of a vector-shaped variable as individual expressions.
  std::vector<LinExpr> entries(const std::string& name) const {
    const AffineMatrix M = expression(name);
    std::vector<LinExpr> out;
    M.for_each([&](auto, auto, const LinExpr& e) { out.push_back(e); });
    return out;
  }

  Matrix value(const std::string& name, const Vector& x) const {
    return expression(name).evaluate(x);
  }

  Vector value_vector(const std::string& name, const Vector& x) const {
    const Matrix M = value(name, x);
    return Eigen::Map<const Vector>(M.data(), M.size());
  }

  double objective_value(const Vector& x) const {
    return objective_.evaluate(x);
  }

 private:
  friend class ProgramBuilder;

  std::vector<Variable> variables_;
  std::vector<PsdBlock> psd_;
  std::vector<SocConstraint> soc_;
  std::vector<LinearConstraint> linear_;
  LinExpr objective_;
  RecoveryMap recovery_;
  int num_scalars_ = 0;
};

/// Incremental construction of a ConicProgram. `build()` checks that every
/// referenced scalar belongs to a declared variable and that every PSD block
/// is symmetric.
class ProgramBuilder {
 public:
  AffineMatrix add_variable(const std::string& name, int rows, int cols,
                            VariableStructure structure) {
    if (program_.has_variable(name))
      throw PreconditionError("variable '" + name + "' declared twice");
    Variable v;
    v.name = name;
    v.rows = rows;
    v.cols = cols;
    v.structure = structure;
    v.offset = program_.num_scalars_;
    switch (structure) {
      case VariableStructure::FullMatrix: v.size = rows * cols; break;
      case VariableStructure::Symmetric:
        if (rows != cols)
          throw PreconditionError("symmetric variable must be square");
        v.size = rows * (rows + 1) / 2;
        break;
      case VariableStructure::DiagonalVector:
        v.cols = 1;
        v.size = rows;
        break;
      case VariableStructure::Scalar:
        v.rows = v.cols = 1;
        v.size = 1;
        break;
    }
    program_.num_scalars_ += v.size;
    program_.variables_.push_back(v);
    return ConicProgram::expression_of(v);
  }

  LinExpr add_scalar(const std::string& name) {
    return add_variable(name, 1, 1, VariableStructure::Scalar)(0, 0);
  }

  std::vector<LinExpr> add_vector(const std::string& name, int size) {
    const AffineMatrix M =
        add_variable(name, size, 1, VariableStructure::DiagonalVector);
    std::vector<LinExpr> out;
    for (int i = 0; i < size; ++i) out.push_back(M(i, 0));
    return out;
  }

  void add_psd(std::string name, AffineMatrix expr, double margin = 0.0) {
    program_.psd_.push_back({std::move(name), std::move(expr), margin});
  }

  void add_soc(std::string name, LinExpr bound, std::vector<LinExpr> vec) {
    program_.soc_.push_back({std::move(name), std::move(bound), std::move(vec)});
  }

  void add_nonnegative(std::string name, LinExpr expr) {
    program_.linear_.push_back(
        {std::move(name), std::move(expr), LinearKind::NonNegative});
  }

  void add_equality(std::string name, LinExpr expr) {
    program_.linear_.push_back(
        {std::move(name), std::move(expr), LinearKind::Zero});
  }

  void set_objective(LinExpr objective) {
    program_.objective_ = std::move(objective);
  }

  void set_recovery(RecoveryMap recovery) {
    program_.recovery_ = std::move(recovery);
  }

  const ConicProgram& peek() const noexcept { return program_; }

  ConicProgram build() const {
    const int N = program_.num_scalars_;
    auto check = [N](const LinExpr& e, const std::string& where) {
      for (const auto& [i, a] : e.terms())
        if (i < 0 || i >= N)
          throw PreconditionError(where + " references undeclared scalar " +
                                  std::to_string(i));
    };
    std::set<std::string> names;
    for (const auto& b : program_.psd_) {
      if (!names.insert(b.name).second)
        throw PreconditionError("duplicate constraint name '" + b.name + "'");
      if (!b.expr.is_symmetric())
        throw PreconditionError("PSD block '" + b.name + "' is not symmetric");
      b.expr.for_each([&](auto, auto, const LinExpr& e) { check(e, b.name); });
    }
    for (const auto& s : program_.soc_) {
      check(s.bound, s.name);
      for (const auto& e : s.vec) check(e, s.name);
    }
    for (const auto& l : program_.linear_) check(l.expr, l.name);
    check(program_.objective_, "objective");
    const auto& r = program_.recovery_;
    for (const std::string* v : {&r.gain_variable, &r.eta_variable,
                                 &r.zeta_variable, &r.z_variable,
                                 &r.x_variable})
      if (!v->empty() && !program_.has_variable(*v))
        throw PreconditionError("recovery map references undeclared '" + *v +
                                "'");
    return program_;
  }

 private:
  ConicProgram program_;
};

inline RecoveredVariables RecoveryMap::extract(const ConicProgram& program,
                                               const Vector& x) const {
  RecoveredVariables out;
  if (!gain_variable.empty()) out.gain_or_w = program.value(gain_variable, x);
  if (!eta_variable.empty()) out.eta = program.value_vector(eta_variable, x);
  if (!zeta_variable.empty()) out.zeta = program.value_vector(zeta_variable, x);
  if (!z_variable.empty()) out.Z = program.value(z_variable, x);
  if (!x_variable.empty()) out.X = program.value(x_variable, x);
  return out;
}

}  // namespace robustkf
