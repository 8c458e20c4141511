#pragma once

#include <cassert>
#include <optional>
#include <utility>
#include <vector>

#include "robustkf/error.hpp"
#include "robustkf/linalg.hpp"

namespace robustkf {

/// Scalar affine function  c + sum_k a_k x_k  of the flattened decision
/// vector x. Terms are kept sorted by variable index without duplicates.
class LinExpr {
 public:
  using Term = std::pair<int, double>;

  LinExpr() = default;
  LinExpr(double constant) : constant_(constant) {}  // NOLINT: implicit

  static LinExpr variable(int index, double coef = 1.0) {
    LinExpr e;
    if (coef != 0.0) e.terms_.emplace_back(index, coef);
    return e;
  }

  double constant() const noexcept { return constant_; }
  const std::vector<Term>& terms() const noexcept { return terms_; }
  bool is_constant() const noexcept { return terms_.empty(); }

  double coefficient(int index) const {
    for (const auto& [i, a] : terms_)
      if (i == index) return a;
    return 0.0;
  }

  double evaluate(const Vector& x) const {
    double v = constant_;
    for (const auto& [i, a] : terms_) v += a * x(i);
    return v;
  }

  /// *this += s * other
  LinExpr& add_scaled(const LinExpr& other, double s) {
    if (s == 0.0) return *this;
    constant_ += s * other.constant_;
    if (other.terms_.empty()) return *this;
    std::vector<Term> merged;
    merged.reserve(terms_.size() + other.terms_.size());
    auto a = terms_.begin();
    auto b = other.terms_.begin();
    while (a != terms_.end() || b != other.terms_.end()) {
      if (b == other.terms_.end() ||
          (a != terms_.end() && a->first < b->first)) {
        merged.push_back(*a++);
      } else if (a == terms_.end() || b->first < a->first) {
        merged.emplace_back(b->first, s * b->second);
        ++b;
      } else {
        const double c = a->second + s * b->second;
        if (c != 0.0) merged.emplace_back(a->first, c);
        ++a;
        ++b;
      }
    }
    terms_ = std::move(merged);
    return *this;
  }

  LinExpr& operator+=(const LinExpr& o) { return add_scaled(o, 1.0); }
  LinExpr& operator-=(const LinExpr& o) { return add_scaled(o, -1.0); }
  LinExpr& operator*=(double s) {
    constant_ *= s;
    if (s == 0.0) {
      terms_.clear();
    } else {
      for (auto& t : terms_) t.second *= s;
    }
    return *this;
  }

  friend LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
  friend LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
  friend LinExpr operator-(LinExpr a) { return a *= -1.0; }
  friend LinExpr operator*(LinExpr a, double s) { return a *= s; }
  friend LinExpr operator*(double s, LinExpr a) { return a *= s; }

  friend bool operator==(const LinExpr& a, const LinExpr& b) {
    return a.constant_ == b.constant_ && a.terms_ == b.terms_;
  }

 private:
  double constant_ = 0.0;
  std::vector<Term> terms_;
};

/// Matrix whose entries are LinExpr. Products are only formed with constant
/// matrices, so every result stays affine in the decision vector.
class AffineMatrix {
 public:
  AffineMatrix() = default;
  AffineMatrix(Eigen::Index rows, Eigen::Index cols)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows * cols)) {}

  static AffineMatrix constant(const Matrix& M) {
    AffineMatrix A(M.rows(), M.cols());
    for (Eigen::Index i = 0; i < M.rows(); ++i)
      for (Eigen::Index j = 0; j < M.cols(); ++j) A(i, j) = LinExpr(M(i, j));
    return A;
  }

  static AffineMatrix identity(Eigen::Index n) {
    return constant(Matrix::Identity(n, n));
  }

  /// Column vector of expressions.
  static AffineMatrix column(const std::vector<LinExpr>& v) {
    AffineMatrix A(static_cast<Eigen::Index>(v.size()), 1);
    for (size_t i = 0; i < v.size(); ++i)
      A(static_cast<Eigen::Index>(i), 0) = v[i];
    return A;
  }

  static AffineMatrix diagonal(const std::vector<LinExpr>& v) {
    const auto n = static_cast<Eigen::Index>(v.size());
    AffineMatrix A(n, n);
    for (Eigen::Index i = 0; i < n; ++i) A(i, i) = v[static_cast<size_t>(i)];
    return A;
  }

  Eigen::Index rows() const noexcept { return rows_; }
  Eigen::Index cols() const noexcept { return cols_; }

  LinExpr& operator()(Eigen::Index i, Eigen::Index j) {
    assert(i >= 0 && i < rows_ && j >= 0 && j < cols_);
    return data_[static_cast<size_t>(i * cols_ + j)];
  }
  const LinExpr& operator()(Eigen::Index i, Eigen::Index j) const {
    assert(i >= 0 && i < rows_ && j >= 0 && j < cols_);
    return data_[static_cast<size_t>(i * cols_ + j)];
  }

  AffineMatrix transpose() const {
    AffineMatrix T(cols_, rows_);
    for (Eigen::Index i = 0; i < rows_; ++i)
      for (Eigen::Index j = 0; j < cols_; ++j) T(j, i) = (*this)(i, j);
    return T;
  }

  Matrix evaluate(const Vector& x) const {
    Matrix M(rows_, cols_);
    for (Eigen::Index i = 0; i < rows_; ++i)
      for (Eigen::Index j = 0; j < cols_; ++j) M(i, j) = (*this)(i, j).evaluate(x);
    return M;
  }

  /// Constant part (all variables at zero).
  Matrix constant_part() const {
    Matrix M(rows_, cols_);
    for (Eigen::Index i = 0; i < rows_; ++i)
      for (Eigen::Index j = 0; j < cols_; ++j) M(i, j) = (*this)(i, j).constant();
    return M;
  }

  /// Exact structural symmetry: entry (i,j) and (j,i) are identical expressions.
  bool is_symmetric() const {
    if (rows_ != cols_) return false;
    for (Eigen::Index i = 0; i < rows_; ++i)
      for (Eigen::Index j = i + 1; j < cols_; ++j)
        if (!((*this)(i, j) == (*this)(j, i))) return false;
    return true;
  }

  AffineMatrix& operator+=(const AffineMatrix& o) {
    check_same_shape(o);
    for (size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  AffineMatrix& operator-=(const AffineMatrix& o) {
    check_same_shape(o);
    for (size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  AffineMatrix& operator*=(double s) {
    for (auto& e : data_) e *= s;
    return *this;
  }

  friend AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b) {
    return a += b;
  }
  friend AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b) {
    return a -= b;
  }
  friend AffineMatrix operator-(AffineMatrix a) { return a *= -1.0; }
  friend AffineMatrix operator*(double s, AffineMatrix a) { return a *= s; }

  friend AffineMatrix operator+(AffineMatrix a, const Matrix& b) {
    return a += constant(b);
  }
  friend AffineMatrix operator-(AffineMatrix a, const Matrix& b) {
    return a -= constant(b);
  }
  friend AffineMatrix operator-(const Matrix& a, const AffineMatrix& b) {
    return constant(a) - b;
  }

  friend AffineMatrix operator*(const AffineMatrix& X, const Matrix& M) {
    if (X.cols_ != M.rows())
      throw PreconditionError("AffineMatrix * Matrix: shape mismatch");
    AffineMatrix R(X.rows_, M.cols());
    for (Eigen::Index i = 0; i < X.rows_; ++i)
      for (Eigen::Index k = 0; k < X.cols_; ++k) {
        const LinExpr& xik = X(i, k);
        for (Eigen::Index j = 0; j < M.cols(); ++j)
          if (M(k, j) != 0.0) R(i, j).add_scaled(xik, M(k, j));
      }
    return R;
  }

  friend AffineMatrix operator*(const Matrix& M, const AffineMatrix& X) {
    if (M.cols() != X.rows_)
      throw PreconditionError("Matrix * AffineMatrix: shape mismatch");
    AffineMatrix R(M.rows(), X.cols_);
    for (Eigen::Index i = 0; i < M.rows(); ++i)
      for (Eigen::Index k = 0; k < M.cols(); ++k) {
        if (M(i, k) == 0.0) continue;
        for (Eigen::Index j = 0; j < X.cols_; ++j)
          R(i, j).add_scaled(X(k, j), M(i, k));
      }
    return R;
  }

  /// sym(X) = X + X^T
  AffineMatrix sym() const {
    if (rows_ != cols_) throw PreconditionError("sym() needs a square matrix");
    return *this + transpose();
  }

  /// Assembles a symmetric block matrix from its upper block triangle.
  /// `upper[i][j]` for j >= i holds block (i, j) or nullopt for zero; blocks
  /// below the diagonal are mirrored from the upper ones, and diagonal blocks
  /// contribute only their upper triangle, so the result is symmetric exactly.
  static AffineMatrix symmetric_blocks(
      const std::vector<Eigen::Index>& sizes,
      const std::vector<std::vector<std::optional<AffineMatrix>>>& upper) {
    std::vector<Eigen::Index> offsets(sizes.size() + 1, 0);
    for (size_t i = 0; i < sizes.size(); ++i)
      offsets[i + 1] = offsets[i] + sizes[i];
    const Eigen::Index N = offsets.back();
    AffineMatrix R(N, N);
    for (size_t bi = 0; bi < sizes.size(); ++bi) {
      for (size_t bj = bi; bj < sizes.size(); ++bj) {
        if (bi >= upper.size() || bj >= upper[bi].size()) continue;
        const auto& blk = upper[bi][bj];
        if (!blk) continue;
        if (blk->rows() != sizes[bi] || blk->cols() != sizes[bj])
          throw PreconditionError("symmetric_blocks: block (" +
                                  std::to_string(bi) + "," +
                                  std::to_string(bj) + ") has wrong shape");
        for (Eigen::Index i = 0; i < sizes[bi]; ++i)
          for (Eigen::Index j = (bi == bj ? i : 0); j < sizes[bj]; ++j) {
            const Eigen::Index r = offsets[bi] + i;
            const Eigen::Index c = offsets[bj] + j;
            R(r, c) = (*blk)(i, j);
            R(c, r) = (*blk)(i, j);
          }
      }
    }
    return R;
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (Eigen::Index i = 0; i < rows_; ++i)
      for (Eigen::Index j = 0; j < cols_; ++j) fn(i, j, (*this)(i, j));
  }

 private:
  void check_same_shape(const AffineMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw PreconditionError("AffineMatrix shape mismatch");
  }

  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
  std::vector<LinExpr> data_;
};

}  // namespace robustkf
