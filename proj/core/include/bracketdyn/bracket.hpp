#pragma once

#include <optional>
#include <string>

#include "bracketdyn/complex.hpp"
#include "bracketdyn/metric.hpp"
#include "bracketdyn/nn.hpp"

namespace bracketdyn {

enum class BracketKind { kHamiltonian, kGradient, kDoubleBracket, kMetriplectic };

BracketKind bracket_kind_from_string(const std::string& s);
std::string to_string(BracketKind k);

// Node-edge feature pair (q on 0-cliques, p on 1-cliques; equal channel
// counts in latent space).
template <class M>
struct StateT {
  M q, p;
};
using State = StateT<Mat>;

template <class M>
StateT<M> operator+(const StateT<M>& a, const StateT<M>& b) {
  return {add(a.q, b.q), add(a.p, b.p)};
}
template <class M>
StateT<M> operator*(double c, const StateT<M>& a) {
  return {scale(a.q, c), scale(a.p, c)};
}
inline bool is_finite(const State& s) { return is_finite(s.q) && is_finite(s.p); }
inline bool is_finite(const StateT<Var>& s) { return is_finite(s.q) && is_finite(s.p); }

// A-weighted inner product on node-edge pairs, summed over channels.
double inner_a(const Metric& m, const State& x, const State& y);

// ----- generator operators ------------------------------------------------
// L = [[0, -d0*], [d0, 0]]   (skew-adjoint in <.,.>_A)
// G = diag(Delta_0, Delta_1) (self-adjoint, positive semi-definite)
// M = diag(0, A1 d1* d1 A1)  (self-adjoint, positive semi-definite)

template <class M>
StateT<M> op_l(const CliqueComplex& cx, const MetricT<M>& m, const StateT<M>& x) {
  return {neg(dual_derivative(m, cx, 0, x.p)), d_apply(cx, 0, x.q)};
}

template <class M>
StateT<M> op_g(const CliqueComplex& cx, const MetricT<M>& m, const StateT<M>& x) {
  M lap0 = dual_derivative(m, cx, 0, d_apply(cx, 0, x.q));
  M lap1 = d_apply(cx, 0, dual_derivative(m, cx, 0, x.p));
  if (!cx.triangles.empty())
    lap1 = add(lap1, dual_derivative(m, cx, 1, d_apply(cx, 1, x.p)));
  return {lap0, lap1};
}

template <class M>
StateT<M> op_m(const CliqueComplex& cx, const MetricT<M>& m, const StateT<M>& x) {
  M zero = scale(x.q, 0.0);
  if (cx.triangles.empty()) return {zero, scale(x.p, 0.0)};
  M inner = dual_derivative(m, cx, 1, d_apply(cx, 1, scale_rows(x.p, m.a1)));
  return {zero, scale_rows(inner, m.a1)};
}

// ----- energy functionals ---------------------------------------------------

// Total kinetic energy E = (|q|^2 + |p|^2) / 2 in the plain l2 sense.
template <class M>
M kinetic_energy(const StateT<M>& x) {
  return scale(add(sum_all(hadamard(x.q, x.q)), sum_all(hadamard(x.p, x.p))), 0.5);
}

// Its A-gradient (A0^{-1} q, A1^{-1} p).
template <class M>
StateT<M> kinetic_energy_grad(const MetricT<M>& m, const StateT<M>& x) {
  return {scale_rows(x.q, map_recip(m.a0)), scale_rows(x.p, map_recip(m.a1))};
}

// ----- right-hand sides -----------------------------------------------------

template <class M>
StateT<M> hamiltonian_rhs(const CliqueComplex& cx, const MetricT<M>& m, const StateT<M>& x) {
  return op_l(cx, m, kinetic_energy_grad(m, x));
}

template <class M>
StateT<M> gradient_rhs(const CliqueComplex& cx, const MetricT<M>& m, const StateT<M>& x) {
  StateT<M> g = op_g(cx, m, kinetic_energy_grad(m, x));
  return {neg(g.q), neg(g.p)};
}

template <class M>
StateT<M> double_bracket_rhs(const CliqueComplex& cx, const MetricT<M>& m, const StateT<M>& x) {
  StateT<M> grad = kinetic_energy_grad(m, x);
  StateT<M> l1 = op_l(cx, m, grad);
  StateT<M> l2 = op_l(cx, m, l1);
  return l1 + l2;
}

// Scalar-output networks defining the metriplectic energy and entropy.
template <class M>
struct MetriplecticNetsT {
  MlpT<M> f_e, g_e, g_s;
  UnaryFun act = UnaryFun::kTanh;
};
using MetriplecticNets = MetriplecticNetsT<Mat>;

template <class M>
struct MetriplecticFunctionals {
  M energy, entropy;        // 1 x 1
  StateT<M> grad_e, grad_s; // A-gradients
};

// E = f_E(s(q)) + g_E(s(d0 d0^T p)), S = g_S(s(d1^T d1 p)) with s the column
// sum over cliques; the A-gradients have the outer-product (Kronecker) form
// with the network input-gradients assembled explicitly.
template <class M>
MetriplecticFunctionals<M> metriplectic_functionals(const CliqueComplex& cx,
                                                    const MetriplecticNetsT<M>& nets,
                                                    const MetricT<M>& m, const StateT<M>& x) {
  MetriplecticFunctionals<M> out;
  const int n_e = cx.count(1);

  M sq = col_sum(x.q);
  M b_e = d_apply(cx, 0, dt_apply(cx, 0, x.p)); // d0 d0^T p
  M s_e = col_sum(b_e);
  out.energy = add(mlp_forward(nets.f_e, sq, nets.act), mlp_forward(nets.g_e, s_e, nets.act));

  M ones_v = lift(x.q, Mat::ones(cx.n, 1));
  M ones_e = lift(x.q, Mat::ones(n_e, 1));
  M v_e = d_apply(cx, 0, dt_apply(cx, 0, ones_e)); // d0 d0^T 1
  out.grad_e.q = scale_rows(matmul(ones_v, mlp_input_grad_scalar(nets.f_e, sq, nets.act)),
                            map_recip(m.a0));
  out.grad_e.p = scale_rows(matmul(v_e, mlp_input_grad_scalar(nets.g_e, s_e, nets.act)),
                            map_recip(m.a1));

  if (cx.triangles.empty()) {
    M zero_in = lift(x.q, Mat(1, cols(x.p)));
    out.entropy = mlp_forward(nets.g_s, zero_in, nets.act);
    out.grad_s.q = scale(x.q, 0.0);
    out.grad_s.p = scale(x.p, 0.0);
  } else {
    M w = dt_apply(cx, 1, d_apply(cx, 1, x.p)); // d1^T d1 p
    M s_s = col_sum(w);
    out.entropy = mlp_forward(nets.g_s, s_s, nets.act);
    M v_s = dt_apply(cx, 1, d_apply(cx, 1, ones_e)); // d1^T d1 1
    out.grad_s.q = scale(x.q, 0.0);
    out.grad_s.p = scale_rows(matmul(v_s, mlp_input_grad_scalar(nets.g_s, s_s, nets.act)),
                              map_recip(m.a1));
  }
  return out;
}

// xdot = L grad E + M grad S. The degeneracy L grad S = M grad E = 0 holds by
// the exact sequence d1 d0 = 0, for any positive metric and weights.
template <class M>
StateT<M> metriplectic_rhs(const CliqueComplex& cx, const MetriplecticNetsT<M>& nets,
                           const MetricT<M>& m, const StateT<M>& x) {
  auto f = metriplectic_functionals(cx, nets, m, x);
  StateT<M> le = op_l(cx, m, f.grad_e);
  StateT<M> ms = op_m(cx, m, f.grad_s);
  return le + ms;
}

// ----- bracket system -------------------------------------------------------

inline Mat scale_var_generic(const Mat& a, const Mat& s) { return scale(a, s(0, 0)); }
inline Var scale_var_generic(Var a, Var s) { return scale_var(a, s); }

// One of the four right-hand-side generators over (q, p), with its attention
// metric configuration and optional learnable output scale sigmoid(alpha)
// (applied to the Hamiltonian, gradient, and double-bracket systems only).
template <class M>
struct BracketSystemT {
  BracketKind kind = BracketKind::kHamiltonian;
  const CliqueComplex* cx = nullptr;
  PreAttentionConfig cfg;
  AttentionWeightsT<M> attn;
  MetriplecticNetsT<M> nets;   // kind == kMetriplectic only
  std::optional<M> alpha;      // pre-sigmoid scalar, 1 x 1
  std::optional<MetricT<M>> frozen_metric;

  MetricT<M> metric_at(const M& q) const {
    if (frozen_metric) return *frozen_metric;
    return build_metric(cfg, attn, *cx, q);
  }

  void freeze_from(const M& q) { frozen_metric = build_metric(cfg, attn, *cx, q); }

  StateT<M> rhs(const StateT<M>& x) const {
    MetricT<M> m = metric_at(x.q);
    StateT<M> out;
    switch (kind) {
      case BracketKind::kHamiltonian: out = hamiltonian_rhs(*cx, m, x); break;
      case BracketKind::kGradient: out = gradient_rhs(*cx, m, x); break;
      case BracketKind::kDoubleBracket: out = double_bracket_rhs(*cx, m, x); break;
      case BracketKind::kMetriplectic: return metriplectic_rhs(*cx, nets, m, x);
    }
    if (alpha) {
      M s = map_sigmoid(*alpha);
      out.q = scale_var_generic(out.q, s);
      out.p = scale_var_generic(out.p, s);
    }
    return out;
  }
};
using BracketSystem = BracketSystemT<Mat>;

// ----- structure audit ------------------------------------------------------

// Maximum violations of the algebraic identities behind each bracket, probed
// on random states; reported, never thrown.
struct StructureReport {
  double skew = 0;            // |<Lx,y> + <x,Ly>| / scale
  double g_self_adjoint = 0;  // |<Gx,y> - <x,Gy>| / scale
  double g_negative = 0;      // max(0, -<Gx,x>) / scale
  double m_self_adjoint = 0;
  double m_negative = 0;
  double dual_exactness = 0;  // max entry of d0* d1* applied to unit loads
  double adjointness = 0;     // relative <d0 q, p>_{A1} vs <q, d0* p>_{A0}
  double degeneracy_ls = 0;   // max-abs of L grad S (metriplectic)
  double degeneracy_me = 0;   // max-abs of M grad E
  double first_law = 0;       // |<xdot, grad E>_A| / scale
  double second_law_neg = 0;  // max(0, -<xdot, grad S>_A) / scale
  int trials = 0;
};

StructureReport structure_audit(const BracketSystem& sys, int trials, Rng& rng);

std::string to_json(const StructureReport& r);

} // namespace bracketdyn
