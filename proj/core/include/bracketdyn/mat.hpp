#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include "bracketdyn/funs.hpp"

namespace bracketdyn {

// Dense row-major matrix of doubles. Everything at desk scale is small, so a
// single dense value type carries node/edge feature blocks, metric diagonals
// (as column vectors), and network parameters.
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols) : rows_(rows), cols_(cols), data_(size_t(rows) * cols, 0.0) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("Mat: negative shape");
  }
  Mat(int rows, int cols, std::initializer_list<double> vals) : Mat(rows, cols) {
    if (vals.size() != data_.size()) throw std::invalid_argument("Mat: init list size mismatch");
    std::copy(vals.begin(), vals.end(), data_.begin());
  }

  static Mat zeros(int r, int c) { return Mat(r, c); }
  static Mat ones(int r, int c) {
    Mat m(r, c);
    std::fill(m.data_.begin(), m.data_.end(), 1.0);
    return m;
  }
  static Mat eye(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Mat full(int r, int c, double v) {
    Mat m(r, c);
    std::fill(m.data_.begin(), m.data_.end(), v);
    return m;
  }
  static Mat scalar(double v) { return full(1, 1, v); }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int r, int c) { return data_[size_t(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[size_t(r) * cols_ + c]; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

inline int rows(const Mat& m) { return m.rows(); }
inline int cols(const Mat& m) { return m.cols(); }

namespace detail {
inline void check_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}
} // namespace detail

inline Mat add(const Mat& a, const Mat& b) {
  detail::check_same_shape(a, b, "add");
  Mat y = a;
  for (size_t i = 0; i < y.size(); ++i) y.data()[i] += b.data()[i];
  return y;
}

inline Mat sub(const Mat& a, const Mat& b) {
  detail::check_same_shape(a, b, "sub");
  Mat y = a;
  for (size_t i = 0; i < y.size(); ++i) y.data()[i] -= b.data()[i];
  return y;
}

inline Mat scale(const Mat& a, double c) {
  Mat y = a;
  for (size_t i = 0; i < y.size(); ++i) y.data()[i] *= c;
  return y;
}

inline Mat neg(const Mat& a) { return scale(a, -1.0); }

inline Mat hadamard(const Mat& a, const Mat& b) {
  detail::check_same_shape(a, b, "hadamard");
  Mat y = a;
  for (size_t i = 0; i < y.size(); ++i) y.data()[i] *= b.data()[i];
  return y;
}

// y = a * b
inline Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dim mismatch");
  Mat y(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.data() + size_t(k) * b.cols();
      double* yrow = y.data() + size_t(i) * y.cols();
      for (int j = 0; j < b.cols(); ++j) yrow[j] += aik * brow[j];
    }
  }
  return y;
}

// y = a * b^T
inline Mat matmul_nt(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dim mismatch");
  Mat y(a.rows(), b.rows());
  for (int i = 0; i < a.rows(); ++i) {
    const double* arow = a.data() + size_t(i) * a.cols();
    for (int j = 0; j < b.rows(); ++j) {
      const double* brow = b.data() + size_t(j) * b.cols();
      double s = 0.0;
      for (int k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
      y(i, j) = s;
    }
  }
  return y;
}

inline Mat transpose(const Mat& a) {
  Mat y(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) y(j, i) = a(i, j);
  return y;
}

// Rows of a scaled by the column vector w (rows x 1).
inline Mat scale_rows(const Mat& a, const Mat& w) {
  if (w.cols() != 1 || w.rows() != a.rows())
    throw std::invalid_argument("scale_rows: weight must be rows x 1");
  Mat y = a;
  for (int i = 0; i < a.rows(); ++i) {
    const double wi = w(i, 0);
    double* row = y.data() + size_t(i) * y.cols();
    for (int j = 0; j < y.cols(); ++j) row[j] *= wi;
  }
  return y;
}

// Broadcast add of a row vector v (1 x cols) to every row of a.
inline Mat add_rowvec(const Mat& a, const Mat& v) {
  if (v.rows() != 1 || v.cols() != a.cols())
    throw std::invalid_argument("add_rowvec: vector must be 1 x cols");
  Mat y = a;
  for (int i = 0; i < a.rows(); ++i) {
    double* row = y.data() + size_t(i) * y.cols();
    for (int j = 0; j < y.cols(); ++j) row[j] += v(0, j);
  }
  return y;
}

inline Mat map_unary(const Mat& a, UnaryFun f) {
  Mat y = a;
  for (size_t i = 0; i < y.size(); ++i) y.data()[i] = unary_eval(f, y.data()[i]);
  return y;
}

inline Mat map_exp(const Mat& a) { return map_unary(a, UnaryFun::kExp); }
inline Mat map_log(const Mat& a) { return map_unary(a, UnaryFun::kLog); }
inline Mat map_sqrt(const Mat& a) { return map_unary(a, UnaryFun::kSqrt); }
inline Mat map_tanh(const Mat& a) { return map_unary(a, UnaryFun::kTanh); }
inline Mat map_tanh_prime(const Mat& a) { return map_unary(a, UnaryFun::kTanhPrime); }
inline Mat map_sigmoid(const Mat& a) { return map_unary(a, UnaryFun::kSigmoid); }
inline Mat map_relu(const Mat& a) { return map_unary(a, UnaryFun::kRelu); }
inline Mat map_lrelu(const Mat& a) { return map_unary(a, UnaryFun::kLeakyRelu); }
inline Mat map_squareplus(const Mat& a) { return map_unary(a, UnaryFun::kSquareplus); }
inline Mat map_squareplus_prime(const Mat& a) { return map_unary(a, UnaryFun::kSquareplusPrime); }
inline Mat map_recip(const Mat& a) { return map_unary(a, UnaryFun::kRecip); }
inline Mat map_abs(const Mat& a) { return map_unary(a, UnaryFun::kAbs); }

inline Mat col_sum(const Mat& a) {
  Mat y(1, a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) y(0, j) += a(i, j);
  return y;
}

inline Mat row_sum(const Mat& a) {
  Mat y(a.rows(), 1);
  for (int i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < a.cols(); ++j) s += a(i, j);
    y(i, 0) = s;
  }
  return y;
}

inline Mat sum_all(const Mat& a) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a.data()[i];
  return Mat::scalar(s);
}

inline Mat gather_rows(const Mat& a, const std::vector<int>& idx) {
  Mat y(int(idx.size()), a.cols());
  for (size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= a.rows()) throw std::out_of_range("gather_rows: bad index");
    std::copy(a.data() + size_t(idx[r]) * a.cols(), a.data() + size_t(idx[r] + 1) * a.cols(),
              y.data() + r * a.cols());
  }
  return y;
}

inline Mat scatter_rows(const Mat& a, const std::vector<int>& idx, int n_out) {
  if (int(idx.size()) != a.rows()) throw std::invalid_argument("scatter_rows: index count mismatch");
  Mat y(n_out, a.cols());
  for (size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= n_out) throw std::out_of_range("scatter_rows: bad index");
    const double* src = a.data() + r * a.cols();
    double* dst = y.data() + size_t(idx[r]) * a.cols();
    for (int j = 0; j < a.cols(); ++j) dst[j] += src[j];
  }
  return y;
}

// Per-row dot product: (rows x 1) with y_i = a_i . b_i.
inline Mat row_dot(const Mat& a, const Mat& b) {
  detail::check_same_shape(a, b, "row_dot");
  Mat y(a.rows(), 1);
  for (int i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < a.cols(); ++j) s += a(i, j) * b(i, j);
    y(i, 0) = s;
  }
  return y;
}

inline Mat concat_cols(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols: row mismatch");
  Mat y(a.rows(), a.cols() + b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) y(i, j) = a(i, j);
    for (int j = 0; j < b.cols(); ++j) y(i, a.cols() + j) = b(i, j);
  }
  return y;
}

inline Mat slice_cols(const Mat& a, int c0, int c1) {
  if (c0 < 0 || c1 > a.cols() || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
  Mat y(a.rows(), c1 - c0);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = c0; j < c1; ++j) y(i, j - c0) = a(i, j);
  return y;
}

inline Mat reshape(const Mat& a, int r, int c) {
  if (size_t(r) * c != a.size()) throw std::invalid_argument("reshape: element count mismatch");
  Mat y(r, c);
  std::copy(a.data(), a.data() + a.size(), y.data());
  return y;
}

// Lifting a constant next to an existing value. For Mat this is the identity;
// the tape overload records a constant leaf on the same tape.
inline Mat lift(const Mat&, const Mat& value) { return value; }

inline double max_abs(const Mat& a) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.data()[i]));
  return m;
}

inline double frob_norm(const Mat& a) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a.data()[i] * a.data()[i];
  return std::sqrt(s);
}

// Flattened dot product of all entries.
inline double dot_all(const Mat& a, const Mat& b) {
  detail::check_same_shape(a, b, "dot_all");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

inline double mean_abs(const Mat& a) {
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += std::fabs(a.data()[i]);
  return s / double(a.size());
}

inline bool is_finite(const Mat& a) {
  for (size_t i = 0; i < a.size(); ++i)
    if (!std::isfinite(a.data()[i])) return false;
  return true;
}

inline bool is_finite(double x) { return std::isfinite(x); }

inline double rel_diff(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-300});
  return std::fabs(a - b) / denom;
}

} // namespace bracketdyn
