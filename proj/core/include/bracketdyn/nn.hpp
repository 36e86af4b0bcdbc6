#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "bracketdyn/funs.hpp"
#include "bracketdyn/mat.hpp"
#include "bracketdyn/rng.hpp"
#include "bracketdyn/tape.hpp"

namespace bracketdyn {

// Dense layers stored as (out x in) weights with 1 x out biases; the
// activation is applied between layers, not after the last.
template <class M>
struct MlpT {
  std::vector<M> w;
  std::vector<M> b;
};
using Mlp = MlpT<Mat>;

template <class M>
M mlp_forward(const MlpT<M>& net, const M& x, UnaryFun act) {
  M h = x;
  for (size_t l = 0; l < net.w.size(); ++l) {
    h = add_rowvec(matmul_nt(h, net.w[l]), net.b[l]);
    if (l + 1 < net.w.size()) h = map_unary(h, act);
  }
  return h;
}

// Gradient of a scalar-output 2-layer perceptron with respect to its input
// row, assembled from forward primitives so it can itself be differentiated:
// grad f(x) = (w2 .* act'(x W1^T + b1)) W1.
template <class M>
M mlp_input_grad_scalar(const MlpT<M>& net, const M& x, UnaryFun act) {
  if (net.w.size() != 2)
    throw std::invalid_argument("mlp_input_grad_scalar: expects a 2-layer scalar network");
  UnaryFun prime;
  switch (act) {
    case UnaryFun::kTanh: prime = UnaryFun::kTanhPrime; break;
    case UnaryFun::kSquareplus: prime = UnaryFun::kSquareplusPrime; break;
    default:
      throw std::invalid_argument("mlp_input_grad_scalar: activation must be tanh or squareplus");
  }
  M pre = add_rowvec(matmul_nt(x, net.w[0]), net.b[0]); // 1 x H
  return matmul(hadamard(map_unary(pre, prime), net.w[1]), net.w[0]); // 1 x F
}

// Named parameter store with Adam moment buffers.
struct ParamSet {
  struct Entry {
    std::string name;
    Mat value, grad, m, v;
  };
  std::vector<Entry> items;

  int add(std::string name, Mat init) {
    const int id = int(items.size());
    Entry e;
    e.name = std::move(name);
    e.grad = Mat(init.rows(), init.cols());
    e.m = Mat(init.rows(), init.cols());
    e.v = Mat(init.rows(), init.cols());
    e.value = std::move(init);
    items.push_back(std::move(e));
    return id;
  }

  void zero_grads() {
    for (auto& e : items) e.grad.fill(0.0);
  }

  std::vector<Mat> grad_view() const {
    std::vector<Mat> g;
    g.reserve(items.size());
    for (const auto& e : items) g.push_back(Mat(e.value.rows(), e.value.cols()));
    return g;
  }

  size_t scalar_count() const {
    size_t n = 0;
    for (const auto& e : items) n += e.value.size();
    return n;
  }
};

// Weight initialization used throughout: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)).
inline Mat init_linear(int out, int in, Rng& rng) {
  const double b = 1.0 / std::sqrt(double(std::max(1, in)));
  return rng.uniform_mat(out, in, -b, b);
}

struct MlpIds {
  std::vector<int> w, b;
};

inline MlpIds add_mlp(ParamSet& ps, const std::string& name, const std::vector<int>& dims,
                      Rng& rng) {
  MlpIds ids;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    ids.w.push_back(ps.add(name + ".w" + std::to_string(l), init_linear(dims[l + 1], dims[l], rng)));
    ids.b.push_back(ps.add(name + ".b" + std::to_string(l), Mat(1, dims[l + 1])));
  }
  return ids;
}

inline MlpT<Var> lift_mlp(Tape& tape, const ParamSet& ps, const MlpIds& ids) {
  MlpT<Var> net;
  for (size_t l = 0; l < ids.w.size(); ++l) {
    net.w.push_back(tape.leaf(ps.items[size_t(ids.w[l])].value, ids.w[l]));
    net.b.push_back(tape.leaf(ps.items[size_t(ids.b[l])].value, ids.b[l]));
  }
  return net;
}

inline Mlp mlp_view(const ParamSet& ps, const MlpIds& ids) {
  Mlp net;
  for (size_t l = 0; l < ids.w.size(); ++l) {
    net.w.push_back(ps.items[size_t(ids.w[l])].value);
    net.b.push_back(ps.items[size_t(ids.b[l])].value);
  }
  return net;
}

} // namespace bracketdyn
