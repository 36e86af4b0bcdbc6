#include "bracketdyn/tape.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace bracketdyn {

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kScale: return "scale";
    case Op::kScaleVar: return "scale_var";
    case Op::kHadamard: return "hadamard";
    case Op::kMatMul: return "matmul";
    case Op::kMatMulNT: return "matmul_nt";
    case Op::kScaleRows: return "scale_rows";
    case Op::kAddRowVec: return "add_rowvec";
    case Op::kUnary: return "unary";
    case Op::kColSum: return "col_sum";
    case Op::kRowSum: return "row_sum";
    case Op::kSumAll: return "sum_all";
    case Op::kGather: return "gather_rows";
    case Op::kScatter: return "scatter_rows";
    case Op::kRowDot: return "row_dot";
    case Op::kConcatCols: return "concat_cols";
    case Op::kSliceCols: return "slice_cols";
    case Op::kReshape: return "reshape";
    case Op::kIncidence: return "incidence";
  }
  return "?";
}

namespace {
[[noreturn]] void shape_error(const char* op, Var a, Var b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.n_rows) +
                              "x" + std::to_string(a.n_cols) + " vs " + std::to_string(b.n_rows) +
                              "x" + std::to_string(b.n_cols));
}
} // namespace

int Tape::check_tape(Var v) const {
  if (v.tape != this || v.id < 0 || size_t(v.id) >= nodes_.size())
    throw std::invalid_argument("Tape: foreign or stale Var handle");
  return v.id;
}

Var Tape::push(Node n) {
  n.off = cursor_;
  const size_t sz = size_t(n.rows) * n.cols;
  cursor_ += sz;
  if (buf_.size() < cursor_) buf_.resize(cursor_);
  nodes_.push_back(n);
  const int id = int(nodes_.size()) - 1;
  forward_node(id);
  return Var{this, id, n.rows, n.cols};
}

Var Tape::leaf(const Mat& value, int param_id) {
  Node n;
  n.op = Op::kLeaf;
  n.rows = value.rows();
  n.cols = value.cols();
  n.param = param_id;
  n.off = cursor_;
  const size_t sz = value.size();
  cursor_ += sz;
  if (buf_.size() < cursor_) buf_.resize(cursor_);
  std::memcpy(buf_.data() + n.off, value.data(), sz * sizeof(double));
  nodes_.push_back(n);
  return Var{this, int(nodes_.size()) - 1, n.rows, n.cols};
}

void Tape::forward_node(int id) {
  Node& n = nodes_[size_t(id)];
  double* y = vp(id);
  const size_t ysz = node_size(id);
  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kAdd: {
      const double* a = vp(n.a);
      const double* b = vp(n.b);
      for (size_t i = 0; i < ysz; ++i) y[i] = a[i] + b[i];
      break;
    }
    case Op::kSub: {
      const double* a = vp(n.a);
      const double* b = vp(n.b);
      for (size_t i = 0; i < ysz; ++i) y[i] = a[i] - b[i];
      break;
    }
    case Op::kScale: {
      const double* a = vp(n.a);
      for (size_t i = 0; i < ysz; ++i) y[i] = n.scalar * a[i];
      break;
    }
    case Op::kScaleVar: {
      const double* a = vp(n.a);
      const double s = vp(n.b)[0];
      for (size_t i = 0; i < ysz; ++i) y[i] = s * a[i];
      break;
    }
    case Op::kHadamard: {
      const double* a = vp(n.a);
      const double* b = vp(n.b);
      for (size_t i = 0; i < ysz; ++i) y[i] = a[i] * b[i];
      break;
    }
    case Op::kMatMul: {
      const Node& na = nodes_[size_t(n.a)];
      const Node& nb = nodes_[size_t(n.b)];
      const double* a = vp(n.a);
      const double* b = vp(n.b);
      std::memset(y, 0, ysz * sizeof(double));
      for (int i = 0; i < na.rows; ++i)
        for (int k = 0; k < na.cols; ++k) {
          const double aik = a[size_t(i) * na.cols + k];
          if (aik == 0.0) continue;
          const double* brow = b + size_t(k) * nb.cols;
          double* yrow = y + size_t(i) * nb.cols;
          for (int j = 0; j < nb.cols; ++j) yrow[j] += aik * brow[j];
        }
      break;
    }
    case Op::kMatMulNT: {
      const Node& na = nodes_[size_t(n.a)];
      const Node& nb = nodes_[size_t(n.b)];
      const double* a = vp(n.a);
      const double* b = vp(n.b);
      for (int i = 0; i < na.rows; ++i)
        for (int j = 0; j < nb.rows; ++j) {
          const double* arow = a + size_t(i) * na.cols;
          const double* brow = b + size_t(j) * nb.cols;
          double s = 0.0;
          for (int k = 0; k < na.cols; ++k) s += arow[k] * brow[k];
          y[size_t(i) * nb.rows + j] = s;
        }
      break;
    }
    case Op::kScaleRows: {
      const double* a = vp(n.a);
      const double* w = vp(n.b);
      for (int i = 0; i < n.rows; ++i)
        for (int j = 0; j < n.cols; ++j) y[size_t(i) * n.cols + j] = w[i] * a[size_t(i) * n.cols + j];
      break;
    }
    case Op::kAddRowVec: {
      const double* a = vp(n.a);
      const double* v = vp(n.b);
      for (int i = 0; i < n.rows; ++i)
        for (int j = 0; j < n.cols; ++j) y[size_t(i) * n.cols + j] = a[size_t(i) * n.cols + j] + v[j];
      break;
    }
    case Op::kUnary: {
      const double* a = vp(n.a);
      for (size_t i = 0; i < ysz; ++i) y[i] = unary_eval(n.fun, a[i]);
      break;
    }
    case Op::kColSum: {
      const Node& na = nodes_[size_t(n.a)];
      const double* a = vp(n.a);
      std::memset(y, 0, ysz * sizeof(double));
      for (int i = 0; i < na.rows; ++i)
        for (int j = 0; j < na.cols; ++j) y[j] += a[size_t(i) * na.cols + j];
      break;
    }
    case Op::kRowSum: {
      const Node& na = nodes_[size_t(n.a)];
      const double* a = vp(n.a);
      for (int i = 0; i < na.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < na.cols; ++j) s += a[size_t(i) * na.cols + j];
        y[i] = s;
      }
      break;
    }
    case Op::kSumAll: {
      const double* a = vp(n.a);
      double s = 0.0;
      for (size_t i = 0; i < node_size(n.a); ++i) s += a[i];
      y[0] = s;
      break;
    }
    case Op::kGather: {
      const Node& na = nodes_[size_t(n.a)];
      const double* a = vp(n.a);
      for (int r = 0; r < n.rows; ++r) {
        const int src = idx_[size_t(n.aux0) + r];
        std::memcpy(y + size_t(r) * n.cols, a + size_t(src) * na.cols, size_t(n.cols) * sizeof(double));
      }
      break;
    }
    case Op::kScatter: {
      const Node& na = nodes_[size_t(n.a)];
      const double* a = vp(n.a);
      std::memset(y, 0, ysz * sizeof(double));
      for (int r = 0; r < na.rows; ++r) {
        const int dst = idx_[size_t(n.aux0) + r];
        const double* arow = a + size_t(r) * na.cols;
        double* yrow = y + size_t(dst) * n.cols;
        for (int j = 0; j < n.cols; ++j) yrow[j] += arow[j];
      }
      break;
    }
    case Op::kRowDot: {
      const Node& na = nodes_[size_t(n.a)];
      const double* a = vp(n.a);
      const double* b = vp(n.b);
      for (int i = 0; i < na.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < na.cols; ++j)
          s += a[size_t(i) * na.cols + j] * b[size_t(i) * na.cols + j];
        y[i] = s;
      }
      break;
    }
    case Op::kConcatCols: {
      const Node& na = nodes_[size_t(n.a)];
      const Node& nb = nodes_[size_t(n.b)];
      const double* a = vp(n.a);
      const double* b = vp(n.b);
      for (int i = 0; i < n.rows; ++i) {
        std::memcpy(y + size_t(i) * n.cols, a + size_t(i) * na.cols, size_t(na.cols) * sizeof(double));
        std::memcpy(y + size_t(i) * n.cols + na.cols, b + size_t(i) * nb.cols,
                    size_t(nb.cols) * sizeof(double));
      }
      break;
    }
    case Op::kSliceCols: {
      const Node& na = nodes_[size_t(n.a)];
      const double* a = vp(n.a);
      for (int i = 0; i < n.rows; ++i)
        std::memcpy(y + size_t(i) * n.cols, a + size_t(i) * na.cols + n.aux0,
                    size_t(n.cols) * sizeof(double));
      break;
    }
    case Op::kReshape: {
      std::memcpy(y, vp(n.a), ysz * sizeof(double));
      break;
    }
    case Op::kIncidence: {
      const Node& na = nodes_[size_t(n.a)];
      const double* a = vp(n.a);
      const Incidence& S = *n.inc;
      std::memset(y, 0, ysz * sizeof(double));
      if (!n.transposed) {
        for (int r = 0; r < S.n_rows; ++r) {
          double* yrow = y + size_t(r) * n.cols;
          for (int e = S.row_ptr[r]; e < S.row_ptr[r + 1]; ++e) {
            const double s = S.val[e];
            const double* arow = a + size_t(S.col[e]) * na.cols;
            for (int j = 0; j < n.cols; ++j) yrow[j] += s * arow[j];
          }
        }
      } else {
        for (int r = 0; r < S.n_rows; ++r) {
          const double* arow = a + size_t(r) * na.cols;
          for (int e = S.row_ptr[r]; e < S.row_ptr[r + 1]; ++e) {
            const double s = S.val[e];
            double* yrow = y + size_t(S.col[e]) * n.cols;
            for (int j = 0; j < n.cols; ++j) yrow[j] += s * arow[j];
          }
        }
      }
      break;
    }
  }
}

void Tape::backward_node(int id) {
  const Node& n = nodes_[size_t(id)];
  const double* g = grad_.data() + n.off;
  const size_t ysz = node_size(id);
  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kAdd: {
      double* ga = gp(n.a);
      double* gb = gp(n.b);
      for (size_t i = 0; i < ysz; ++i) {
        ga[i] += g[i];
        gb[i] += g[i];
      }
      break;
    }
    case Op::kSub: {
      double* ga = gp(n.a);
      double* gb = gp(n.b);
      for (size_t i = 0; i < ysz; ++i) {
        ga[i] += g[i];
        gb[i] -= g[i];
      }
      break;
    }
    case Op::kScale: {
      double* ga = gp(n.a);
      for (size_t i = 0; i < ysz; ++i) ga[i] += n.scalar * g[i];
      break;
    }
    case Op::kScaleVar: {
      double* ga = gp(n.a);
      double* gs = gp(n.b);
      const double* a = vp(n.a);
      const double s = vp(n.b)[0];
      double acc = 0.0;
      for (size_t i = 0; i < ysz; ++i) {
        ga[i] += s * g[i];
        acc += g[i] * a[i];
      }
      gs[0] += acc;
      break;
    }
    case Op::kHadamard: {
      double* ga = gp(n.a);
      double* gb = gp(n.b);
      const double* a = vp(n.a);
      const double* b = vp(n.b);
      for (size_t i = 0; i < ysz; ++i) {
        ga[i] += g[i] * b[i];
        gb[i] += g[i] * a[i];
      }
      break;
    }
    case Op::kMatMul: {
      // y = a b  =>  ga += g b^T; gb += a^T g.
      const Node& na = nodes_[size_t(n.a)];
      const Node& nb = nodes_[size_t(n.b)];
      const double* a = vp(n.a);
      const double* b = vp(n.b);
      double* ga = gp(n.a);
      double* gb = gp(n.b);
      for (int i = 0; i < na.rows; ++i)
        for (int k = 0; k < na.cols; ++k) {
          const double* grow = g + size_t(i) * nb.cols;
          const double* brow = b + size_t(k) * nb.cols;
          double s = 0.0;
          for (int j = 0; j < nb.cols; ++j) s += grow[j] * brow[j];
          ga[size_t(i) * na.cols + k] += s;
        }
      for (int k = 0; k < na.cols; ++k)
        for (int i = 0; i < na.rows; ++i) {
          const double aik = a[size_t(i) * na.cols + k];
          if (aik == 0.0) continue;
          const double* grow = g + size_t(i) * nb.cols;
          double* gbrow = gb + size_t(k) * nb.cols;
          for (int j = 0; j < nb.cols; ++j) gbrow[j] += aik * grow[j];
        }
      break;
    }
    case Op::kMatMulNT: {
      // y = a b^T  =>  ga += g b; gb += g^T a.
      const Node& na = nodes_[size_t(n.a)];
      const Node& nb = nodes_[size_t(n.b)];
      const double* a = vp(n.a);
      const double* b = vp(n.b);
      double* ga = gp(n.a);
      double* gb = gp(n.b);
      for (int i = 0; i < na.rows; ++i)
        for (int j = 0; j < nb.rows; ++j) {
          const double gij = g[size_t(i) * nb.rows + j];
          if (gij == 0.0) continue;
          const double* brow = b + size_t(j) * nb.cols;
          const double* arow = a + size_t(i) * na.cols;
          double* garow = ga + size_t(i) * na.cols;
          double* gbrow = gb + size_t(j) * nb.cols;
          for (int k = 0; k < na.cols; ++k) {
            garow[k] += gij * brow[k];
            gbrow[k] += gij * arow[k];
          }
        }
      break;
    }
    case Op::kScaleRows: {
      const double* a = vp(n.a);
      const double* w = vp(n.b);
      double* ga = gp(n.a);
      double* gw = gp(n.b);
      for (int i = 0; i < n.rows; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n.cols; ++j) {
          const size_t o = size_t(i) * n.cols + j;
          ga[o] += w[i] * g[o];
          acc += g[o] * a[o];
        }
        gw[i] += acc;
      }
      break;
    }
    case Op::kAddRowVec: {
      double* ga = gp(n.a);
      double* gv = gp(n.b);
      for (int i = 0; i < n.rows; ++i)
        for (int j = 0; j < n.cols; ++j) {
          const size_t o = size_t(i) * n.cols + j;
          ga[o] += g[o];
          gv[j] += g[o];
        }
      break;
    }
    case Op::kUnary: {
      const double* a = vp(n.a);
      const double* y = vp(id);
      double* ga = gp(n.a);
      for (size_t i = 0; i < ysz; ++i) ga[i] += g[i] * unary_deriv(n.fun, a[i], y[i]);
      break;
    }
    case Op::kColSum: {
      const Node& na = nodes_[size_t(n.a)];
      double* ga = gp(n.a);
      for (int i = 0; i < na.rows; ++i)
        for (int j = 0; j < na.cols; ++j) ga[size_t(i) * na.cols + j] += g[j];
      break;
    }
    case Op::kRowSum: {
      const Node& na = nodes_[size_t(n.a)];
      double* ga = gp(n.a);
      for (int i = 0; i < na.rows; ++i)
        for (int j = 0; j < na.cols; ++j) ga[size_t(i) * na.cols + j] += g[i];
      break;
    }
    case Op::kSumAll: {
      double* ga = gp(n.a);
      const double g0 = g[0];
      for (size_t i = 0; i < node_size(n.a); ++i) ga[i] += g0;
      break;
    }
    case Op::kGather: {
      const Node& na = nodes_[size_t(n.a)];
      double* ga = gp(n.a);
      for (int r = 0; r < n.rows; ++r) {
        const int src = idx_[size_t(n.aux0) + r];
        const double* grow = g + size_t(r) * n.cols;
        double* garow = ga + size_t(src) * na.cols;
        for (int j = 0; j < n.cols; ++j) garow[j] += grow[j];
      }
      break;
    }
    case Op::kScatter: {
      const Node& na = nodes_[size_t(n.a)];
      double* ga = gp(n.a);
      for (int r = 0; r < na.rows; ++r) {
        const int dst = idx_[size_t(n.aux0) + r];
        const double* grow = g + size_t(dst) * n.cols;
        double* garow = ga + size_t(r) * na.cols;
        for (int j = 0; j < n.cols; ++j) garow[j] += grow[j];
      }
      break;
    }
    case Op::kRowDot: {
      const Node& na = nodes_[size_t(n.a)];
      const double* a = vp(n.a);
      const double* b = vp(n.b);
      double* ga = gp(n.a);
      double* gb = gp(n.b);
      for (int i = 0; i < na.rows; ++i) {
        const double gi = g[i];
        for (int j = 0; j < na.cols; ++j) {
          const size_t o = size_t(i) * na.cols + j;
          ga[o] += gi * b[o];
          gb[o] += gi * a[o];
        }
      }
      break;
    }
    case Op::kConcatCols: {
      const Node& na = nodes_[size_t(n.a)];
      const Node& nb = nodes_[size_t(n.b)];
      double* ga = gp(n.a);
      double* gb = gp(n.b);
      for (int i = 0; i < n.rows; ++i) {
        for (int j = 0; j < na.cols; ++j) ga[size_t(i) * na.cols + j] += g[size_t(i) * n.cols + j];
        for (int j = 0; j < nb.cols; ++j)
          gb[size_t(i) * nb.cols + j] += g[size_t(i) * n.cols + na.cols + j];
      }
      break;
    }
    case Op::kSliceCols: {
      const Node& na = nodes_[size_t(n.a)];
      double* ga = gp(n.a);
      for (int i = 0; i < n.rows; ++i)
        for (int j = 0; j < n.cols; ++j)
          ga[size_t(i) * na.cols + n.aux0 + j] += g[size_t(i) * n.cols + j];
      break;
    }
    case Op::kReshape: {
      double* ga = gp(n.a);
      for (size_t i = 0; i < ysz; ++i) ga[i] += g[i];
      break;
    }
    case Op::kIncidence: {
      // Adjoint of a linear map is its transpose.
      const Node& na = nodes_[size_t(n.a)];
      double* ga = gp(n.a);
      const Incidence& S = *n.inc;
      if (!n.transposed) {
        for (int r = 0; r < S.n_rows; ++r) {
          const double* grow = g + size_t(r) * n.cols;
          for (int e = S.row_ptr[r]; e < S.row_ptr[r + 1]; ++e) {
            double* garow = ga + size_t(S.col[e]) * na.cols;
            const double s = S.val[e];
            for (int j = 0; j < n.cols; ++j) garow[j] += s * grow[j];
          }
        }
      } else {
        for (int r = 0; r < S.n_rows; ++r) {
          double* garow = ga + size_t(r) * na.cols;
          for (int e = S.row_ptr[r]; e < S.row_ptr[r + 1]; ++e) {
            const double* grow = g + size_t(S.col[e]) * n.cols;
            const double s = S.val[e];
            for (int j = 0; j < n.cols; ++j) garow[j] += s * grow[j];
          }
        }
      }
      break;
    }
  }
}

void Tape::backward(Var loss) {
  const int id = check_tape(loss);
  if (loss.n_rows != 1 || loss.n_cols != 1)
    throw std::invalid_argument("Tape::backward: loss must be a 1x1 scalar");
  if (!std::isfinite(vp(id)[0])) {
    // Locate the first primitive that produced a non-finite value.
    for (size_t k = 0; k < nodes_.size(); ++k) {
      const double* v = buf_.data() + nodes_[k].off;
      const size_t sz = size_t(nodes_[k].rows) * nodes_[k].cols;
      for (size_t i = 0; i < sz; ++i)
        if (!std::isfinite(v[i]))
          throw std::runtime_error(std::string("Tape::backward: non-finite value produced by '") +
                                   op_name(nodes_[k].op) + "' node " + std::to_string(k));
    }
    throw std::runtime_error("Tape::backward: non-finite loss");
  }
  grad_.assign(cursor_, 0.0);
  grad_[nodes_[size_t(id)].off] = 1.0;
  for (int k = id; k >= 0; --k) backward_node(k);
}

Mat Tape::value(Var v) const {
  const int id = check_tape(v);
  Mat m(v.n_rows, v.n_cols);
  std::memcpy(m.data(), vp(id), node_size(id) * sizeof(double));
  return m;
}

double Tape::scalar_value(Var v) const {
  const int id = check_tape(v);
  return vp(id)[0];
}

Mat Tape::adjoint(Var v) const {
  const int id = check_tape(v);
  Mat m(v.n_rows, v.n_cols);
  if (grad_.size() >= nodes_[size_t(id)].off + node_size(id))
    std::memcpy(m.data(), grad_.data() + nodes_[size_t(id)].off, node_size(id) * sizeof(double));
  return m;
}

void Tape::accumulate_param_grads(std::vector<Mat>& grads) const {
  for (size_t k = 0; k < nodes_.size(); ++k) {
    const Node& n = nodes_[k];
    if (n.op != Op::kLeaf || n.param < 0) continue;
    if (size_t(n.param) >= grads.size())
      throw std::out_of_range("Tape::accumulate_param_grads: parameter index out of range");
    Mat& g = grads[size_t(n.param)];
    if (g.rows() != n.rows || g.cols() != n.cols)
      throw std::invalid_argument("Tape::accumulate_param_grads: gradient shape mismatch");
    const double* src = grad_.data() + n.off;
    for (size_t i = 0; i < size_t(n.rows) * n.cols; ++i) g.data()[i] += src[i];
  }
}

void Tape::reset() {
  nodes_.clear();
  idx_.clear();
  cursor_ = 0;
}

bool Tape::value_finite(Var v) const {
  const int id = check_tape(v);
  const double* p = vp(id);
  for (size_t i = 0; i < node_size(id); ++i)
    if (!std::isfinite(p[i])) return false;
  return true;
}

namespace {
Tape* same_tape(Var a, Var b, const char* op) {
  if (a.tape == nullptr || a.tape != b.tape)
    throw std::invalid_argument(std::string(op) + ": operands from different tapes");
  return a.tape;
}
} // namespace

Var add(Var a, Var b) {
  Tape* t = same_tape(a, b, "add");
  if (a.n_rows != b.n_rows || a.n_cols != b.n_cols) shape_error("add", a, b);
  Tape::Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.rows = a.n_rows;
  n.cols = a.n_cols;
  return t->push(n);
}

Var sub(Var a, Var b) {
  Tape* t = same_tape(a, b, "sub");
  if (a.n_rows != b.n_rows || a.n_cols != b.n_cols) shape_error("sub", a, b);
  Tape::Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.rows = a.n_rows;
  n.cols = a.n_cols;
  return t->push(n);
}

Var scale(Var a, double c) {
  Tape::Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.rows = a.n_rows;
  n.cols = a.n_cols;
  n.scalar = c;
  return a.tape->push(n);
}

Var scale_var(Var a, Var s) {
  Tape* t = same_tape(a, s, "scale_var");
  if (s.n_rows != 1 || s.n_cols != 1)
    throw std::invalid_argument("scale_var: scale factor must be 1x1");
  Tape::Node n;
  n.op = Op::kScaleVar;
  n.a = a.id;
  n.b = s.id;
  n.rows = a.n_rows;
  n.cols = a.n_cols;
  return t->push(n);
}

Var hadamard(Var a, Var b) {
  Tape* t = same_tape(a, b, "hadamard");
  if (a.n_rows != b.n_rows || a.n_cols != b.n_cols) shape_error("hadamard", a, b);
  Tape::Node n;
  n.op = Op::kHadamard;
  n.a = a.id;
  n.b = b.id;
  n.rows = a.n_rows;
  n.cols = a.n_cols;
  return t->push(n);
}

Var matmul(Var a, Var b) {
  Tape* t = same_tape(a, b, "matmul");
  if (a.n_cols != b.n_rows) shape_error("matmul", a, b);
  Tape::Node n;
  n.op = Op::kMatMul;
  n.a = a.id;
  n.b = b.id;
  n.rows = a.n_rows;
  n.cols = b.n_cols;
  return t->push(n);
}

Var matmul_nt(Var a, Var b) {
  Tape* t = same_tape(a, b, "matmul_nt");
  if (a.n_cols != b.n_cols) shape_error("matmul_nt", a, b);
  Tape::Node n;
  n.op = Op::kMatMulNT;
  n.a = a.id;
  n.b = b.id;
  n.rows = a.n_rows;
  n.cols = b.n_rows;
  return t->push(n);
}

Var scale_rows(Var a, Var w) {
  Tape* t = same_tape(a, w, "scale_rows");
  if (w.n_cols != 1 || w.n_rows != a.n_rows)
    throw std::invalid_argument("scale_rows: weight must be rows x 1");
  Tape::Node n;
  n.op = Op::kScaleRows;
  n.a = a.id;
  n.b = w.id;
  n.rows = a.n_rows;
  n.cols = a.n_cols;
  return t->push(n);
}

Var add_rowvec(Var a, Var v) {
  Tape* t = same_tape(a, v, "add_rowvec");
  if (v.n_rows != 1 || v.n_cols != a.n_cols)
    throw std::invalid_argument("add_rowvec: vector must be 1 x cols");
  Tape::Node n;
  n.op = Op::kAddRowVec;
  n.a = a.id;
  n.b = v.id;
  n.rows = a.n_rows;
  n.cols = a.n_cols;
  return t->push(n);
}

Var map_unary(Var a, UnaryFun f) {
  Tape::Node n;
  n.op = Op::kUnary;
  n.fun = f;
  n.a = a.id;
  n.rows = a.n_rows;
  n.cols = a.n_cols;
  return a.tape->push(n);
}

Var col_sum(Var a) {
  Tape::Node n;
  n.op = Op::kColSum;
  n.a = a.id;
  n.rows = 1;
  n.cols = a.n_cols;
  return a.tape->push(n);
}

Var row_sum(Var a) {
  Tape::Node n;
  n.op = Op::kRowSum;
  n.a = a.id;
  n.rows = a.n_rows;
  n.cols = 1;
  return a.tape->push(n);
}

Var sum_all(Var a) {
  Tape::Node n;
  n.op = Op::kSumAll;
  n.a = a.id;
  n.rows = 1;
  n.cols = 1;
  return a.tape->push(n);
}

Var gather_rows(Var a, const std::vector<int>& idx) {
  Tape* t = a.tape;
  for (int i : idx)
    if (i < 0 || i >= a.n_rows) throw std::out_of_range("gather_rows: bad index");
  Tape::Node n;
  n.op = Op::kGather;
  n.a = a.id;
  n.rows = int(idx.size());
  n.cols = a.n_cols;
  n.aux0 = int(t->idx_.size());
  n.aux1 = int(idx.size());
  t->idx_.insert(t->idx_.end(), idx.begin(), idx.end());
  return t->push(n);
}

Var scatter_rows(Var a, const std::vector<int>& idx, int n_out) {
  Tape* t = a.tape;
  if (int(idx.size()) != a.n_rows)
    throw std::invalid_argument("scatter_rows: index count mismatch");
  for (int i : idx)
    if (i < 0 || i >= n_out) throw std::out_of_range("scatter_rows: bad index");
  Tape::Node n;
  n.op = Op::kScatter;
  n.a = a.id;
  n.rows = n_out;
  n.cols = a.n_cols;
  n.aux0 = int(t->idx_.size());
  n.aux1 = int(idx.size());
  t->idx_.insert(t->idx_.end(), idx.begin(), idx.end());
  return t->push(n);
}

Var row_dot(Var a, Var b) {
  Tape* t = same_tape(a, b, "row_dot");
  if (a.n_rows != b.n_rows || a.n_cols != b.n_cols) shape_error("row_dot", a, b);
  Tape::Node n;
  n.op = Op::kRowDot;
  n.a = a.id;
  n.b = b.id;
  n.rows = a.n_rows;
  n.cols = 1;
  return t->push(n);
}

Var concat_cols(Var a, Var b) {
  Tape* t = same_tape(a, b, "concat_cols");
  if (a.n_rows != b.n_rows) shape_error("concat_cols", a, b);
  Tape::Node n;
  n.op = Op::kConcatCols;
  n.a = a.id;
  n.b = b.id;
  n.rows = a.n_rows;
  n.cols = a.n_cols + b.n_cols;
  return t->push(n);
}

Var slice_cols(Var a, int c0, int c1) {
  if (c0 < 0 || c1 > a.n_cols || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
  Tape::Node n;
  n.op = Op::kSliceCols;
  n.a = a.id;
  n.rows = a.n_rows;
  n.cols = c1 - c0;
  n.aux0 = c0;
  n.aux1 = c1;
  return a.tape->push(n);
}

Var reshape(Var a, int r, int c) {
  if (size_t(r) * c != size_t(a.n_rows) * a.n_cols)
    throw std::invalid_argument("reshape: element count mismatch");
  Tape::Node n;
  n.op = Op::kReshape;
  n.a = a.id;
  n.rows = r;
  n.cols = c;
  return a.tape->push(n);
}

Var incidence_apply(Var a, const Incidence& inc, bool transposed) {
  const int in_rows = transposed ? inc.n_rows : inc.n_cols;
  const int out_rows = transposed ? inc.n_cols : inc.n_rows;
  if (a.n_rows != in_rows) throw std::invalid_argument("incidence_apply: row count mismatch");
  Tape::Node n;
  n.op = Op::kIncidence;
  n.a = a.id;
  n.rows = out_rows;
  n.cols = a.n_cols;
  n.inc = &inc;
  n.transposed = transposed;
  return a.tape->push(n);
}

} // namespace bracketdyn
