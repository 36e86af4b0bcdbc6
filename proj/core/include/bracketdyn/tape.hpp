#pragma once

#include <cstdint>
#include <vector>

#include "bracketdyn/complex.hpp"
#include "bracketdyn/funs.hpp"
#include "bracketdyn/mat.hpp"

namespace bracketdyn {

class Tape;

// Handle to a recorded matrix-valued node. Cheap to copy; valid until the
// owning tape is reset.
struct Var {
  Tape* tape = nullptr;
  int32_t id = -1;
  int32_t n_rows = 0;
  int32_t n_cols = 0;
};

inline int rows(Var v) { return v.n_rows; }
inline int cols(Var v) { return v.n_cols; }

enum class Op : uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kScale,
  kScaleVar, // multiply by a 1x1 node
  kHadamard,
  kMatMul,
  kMatMulNT,
  kScaleRows,
  kAddRowVec,
  kUnary,
  kColSum,
  kRowSum,
  kSumAll,
  kGather,
  kScatter,
  kRowDot,
  kConcatCols,
  kSliceCols,
  kReshape,
  kIncidence,
};

const char* op_name(Op op);

// Define-by-run reverse-mode tape over dense matrix values. Forward values
// are computed eagerly at record time into a bump arena; backward() walks the
// nodes in reverse topological order exactly once. One tape per thread.
//
// Incidence nodes keep a pointer to the caller's Incidence, which must
// outlive the tape's current recording (complexes are immutable and
// long-lived in practice). Gather/scatter index lists are copied.
class Tape {
 public:
  Var leaf(const Mat& value, int param_id = -1);
  Var constant(const Mat& value) { return leaf(value, -1); }

  // Runs reverse-mode accumulation from a scalar loss. Throws if the forward
  // pass produced a non-finite value, naming the first offending primitive.
  void backward(Var loss);

  Mat value(Var v) const;
  Mat adjoint(Var v) const; // valid after backward()
  double scalar_value(Var v) const;

  // Adds leaf adjoints into `grads[param_id]` for every parameter leaf
  // recorded since the last reset. Shapes must match the leaf values.
  void accumulate_param_grads(std::vector<Mat>& grads) const;

  // Clears the recording but keeps allocated capacity.
  void reset();

  size_t node_count() const { return nodes_.size(); }
  bool value_finite(Var v) const;

 private:
  friend Var add(Var, Var);
  friend Var sub(Var, Var);
  friend Var scale(Var, double);
  friend Var scale_var(Var, Var);
  friend Var hadamard(Var, Var);
  friend Var matmul(Var, Var);
  friend Var matmul_nt(Var, Var);
  friend Var scale_rows(Var, Var);
  friend Var add_rowvec(Var, Var);
  friend Var map_unary(Var, UnaryFun);
  friend Var col_sum(Var);
  friend Var row_sum(Var);
  friend Var sum_all(Var);
  friend Var gather_rows(Var, const std::vector<int>&);
  friend Var scatter_rows(Var, const std::vector<int>&, int);
  friend Var row_dot(Var, Var);
  friend Var concat_cols(Var, Var);
  friend Var slice_cols(Var, int, int);
  friend Var reshape(Var, int, int);
  friend Var incidence_apply(Var, const Incidence&, bool transposed);

  struct Node {
    Op op = Op::kLeaf;
    UnaryFun fun = UnaryFun::kExp;
    int32_t a = -1, b = -1;
    int32_t rows = 0, cols = 0;
    size_t off = 0;      // offset into the value/adjoint arenas
    double scalar = 0.0; // kScale factor
    int32_t aux0 = 0, aux1 = 0; // indices into idx arena / slice bounds
    const Incidence* inc = nullptr;
    bool transposed = false;
    int32_t param = -1; // ParamSet slot for parameter leaves
  };

  Var push(Node n); // allocates arena space, returns handle
  double* vp(int id) { return buf_.data() + nodes_[size_t(id)].off; }
  const double* vp(int id) const { return buf_.data() + nodes_[size_t(id)].off; }
  double* gp(int id) { return grad_.data() + nodes_[size_t(id)].off; }
  size_t node_size(int id) const {
    return size_t(nodes_[size_t(id)].rows) * nodes_[size_t(id)].cols;
  }
  void forward_node(int id);
  void backward_node(int id);
  int check_tape(Var v) const;

  std::vector<Node> nodes_;
  std::vector<double> buf_;
  std::vector<double> grad_;
  std::vector<int> idx_;
  size_t cursor_ = 0;
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double c);
Var scale_var(Var a, Var s); // s is 1x1
Var hadamard(Var a, Var b);
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b); // a * b^T
Var scale_rows(Var a, Var w);
Var add_rowvec(Var a, Var v);
Var map_unary(Var a, UnaryFun f);
Var col_sum(Var a);
Var row_sum(Var a);
Var sum_all(Var a);
Var gather_rows(Var a, const std::vector<int>& idx);
Var scatter_rows(Var a, const std::vector<int>& idx, int n_out);
Var row_dot(Var a, Var b);
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, int c0, int c1);
Var reshape(Var a, int r, int c);
Var incidence_apply(Var a, const Incidence& inc, bool transposed);

inline Var neg(Var a) { return scale(a, -1.0); }
inline Var map_exp(Var a) { return map_unary(a, UnaryFun::kExp); }
inline Var map_log(Var a) { return map_unary(a, UnaryFun::kLog); }
inline Var map_sqrt(Var a) { return map_unary(a, UnaryFun::kSqrt); }
inline Var map_tanh(Var a) { return map_unary(a, UnaryFun::kTanh); }
inline Var map_tanh_prime(Var a) { return map_unary(a, UnaryFun::kTanhPrime); }
inline Var map_sigmoid(Var a) { return map_unary(a, UnaryFun::kSigmoid); }
inline Var map_relu(Var a) { return map_unary(a, UnaryFun::kRelu); }
inline Var map_lrelu(Var a) { return map_unary(a, UnaryFun::kLeakyRelu); }
inline Var map_squareplus(Var a) { return map_unary(a, UnaryFun::kSquareplus); }
inline Var map_squareplus_prime(Var a) { return map_unary(a, UnaryFun::kSquareplusPrime); }
inline Var map_recip(Var a) { return map_unary(a, UnaryFun::kRecip); }
inline Var map_abs(Var a) { return map_unary(a, UnaryFun::kAbs); }

inline Var d_apply(const CliqueComplex& cx, int k, Var x) {
  return incidence_apply(x, k == 0 ? cx.d0 : cx.d1, false);
}
inline Var dt_apply(const CliqueComplex& cx, int k, Var x) {
  return incidence_apply(x, k == 0 ? cx.d0 : cx.d1, true);
}

inline Var lift(Var like, const Mat& value) { return like.tape->constant(value); }
inline bool is_finite(Var v) { return v.tape->value_finite(v); }

} // namespace bracketdyn
