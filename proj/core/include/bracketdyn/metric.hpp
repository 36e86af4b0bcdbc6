#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bracketdyn/complex.hpp"
#include "bracketdyn/mat.hpp"
#include "bracketdyn/tape.hpp"

namespace bracketdyn {

enum class AttentionKind {
  kScaledDotProduct,
  kCosineSimilarity,
  kPearsonCorrelation,
  kExponentialKernel,
};

enum class PositiveFn { kExp, kSquareplus };

AttentionKind attention_kind_from_string(const std::string& s);
std::string to_string(AttentionKind k);
PositiveFn positive_fn_from_string(const std::string& s);
std::string to_string(PositiveFn f);

struct PreAttentionConfig {
  AttentionKind kind = AttentionKind::kScaledDotProduct;
  int heads = 1;
  int embed_dim = 8;
  PositiveFn positive_fn = PositiveFn::kExp;
  bool self_loops = false;
  // Metric rebuilt from the current state at each evaluation when false;
  // built once from the initial features when true.
  bool frozen = false;
  // Exponential-kernel parameters. Positional features are out of scope, so
  // both kernel factors act on the node features.
  double sigma_u = 1.0, sigma_x = 1.0, ell_u = 1.0, ell_x = 1.0;
};

// Per-head key/query embeddings (embed_dim x n_features each).
template <class M>
struct AttentionWeightsT {
  std::vector<M> wk, wq;
};
using AttentionWeights = AttentionWeightsT<Mat>;

// Learnable diagonal inner products: one positive scalar per node, per
// unordered edge, and per triangle, applied identically across channels.
template <class M>
struct MetricT {
  M a0, a1, a2; // column vectors |V| x 1, |E| x 1, |T| x 1
  bool self_loops = false;
};
using Metric = MetricT<Mat>;

namespace detail {

inline int guard_heads(const PreAttentionConfig& cfg) {
  if (cfg.heads < 1) throw std::invalid_argument("pre-attention: heads must be >= 1");
  if (cfg.embed_dim < 1) throw std::invalid_argument("pre-attention: embed_dim must be >= 1");
  return cfg.heads;
}

// Epsilon inside the norms keeps degenerate zero features out of the
// cosine/Pearson denominators.
constexpr double kNormEps = 1e-12;

template <class M>
M centered(const M& a) {
  const int d = cols(a);
  M mean = scale(row_sum(a), 1.0 / double(d));
  return sub(a, matmul(mean, lift(a, Mat::ones(1, d))));
}

template <class M>
M guarded_row_norm(const M& a) {
  return map_sqrt(add(row_dot(a, a), lift(a, Mat::full(rows(a), 1, kNormEps))));
}

// Single-head pre-attention for the feature rows of `qa` paired with the rows
// of `qb` (same row counts); returns rows x 1 scores.
template <class M>
M pre_attention_head(const PreAttentionConfig& cfg, const M& wk, const M& wq, const M& qa,
                     const M& qb) {
  M ka = matmul_nt(qa, wk);
  M qb_emb = matmul_nt(qb, wq);
  switch (cfg.kind) {
    case AttentionKind::kScaledDotProduct:
      return scale(row_dot(ka, qb_emb), 1.0 / double(cfg.embed_dim));
    case AttentionKind::kCosineSimilarity: {
      M denom = hadamard(guarded_row_norm(ka), guarded_row_norm(qb_emb));
      return hadamard(row_dot(ka, qb_emb), map_recip(denom));
    }
    case AttentionKind::kPearsonCorrelation: {
      M ca = centered(ka);
      M cb = centered(qb_emb);
      M denom = hadamard(guarded_row_norm(ca), guarded_row_norm(cb));
      return hadamard(row_dot(ca, cb), map_recip(denom));
    }
    case AttentionKind::kExponentialKernel: {
      M du = sub(ka, qb_emb);
      M eu = map_exp(scale(row_dot(du, du), -0.5 / (cfg.ell_u * cfg.ell_u)));
      M ex = map_exp(scale(row_dot(du, du), -0.5 / (cfg.ell_x * cfg.ell_x)));
      const double amp = (cfg.sigma_u * cfg.sigma_x) * (cfg.sigma_u * cfg.sigma_x);
      return scale(hadamard(eu, ex), amp);
    }
  }
  throw std::logic_error("pre_attention_head: bad kind");
}

} // namespace detail

// Multi-head pre-attention scores for paired feature rows; heads are averaged
// on the pre-attention values.
template <class M>
M pre_attention_rows(const PreAttentionConfig& cfg, const AttentionWeightsT<M>& w, const M& qa,
                     const M& qb) {
  const int h = detail::guard_heads(cfg);
  M acc = detail::pre_attention_head(cfg, w.wk[0], w.wq[0], qa, qb);
  for (int i = 1; i < h; ++i)
    acc = add(acc, detail::pre_attention_head(cfg, w.wk[i], w.wq[i], qa, qb));
  return h == 1 ? acc : scale(acc, 1.0 / double(h));
}

// Scalar pre-attention between a single pair of node features (1 x F rows).
double pre_attention(const PreAttentionConfig& cfg, const AttentionWeights& w, const Mat& qi,
                     const Mat& qj);

template <class M>
M positive_map(PositiveFn f, const M& x) {
  return f == PositiveFn::kExp ? map_exp(x) : map_squareplus(x);
}

// Builds A0/A1 from pre-attention on the current node features. The edge
// value is the symmetrization (f(a(qi,qj)) + f(a(qj,qi))) / 2, which is what
// makes A1 a valid inner product; A0 sums the symmetrized values over the
// (optionally self-looped) neighborhood, so A0^{-1} A1 is row-stochastic.
// A2 is the identity.
template <class M>
MetricT<M> build_metric(const PreAttentionConfig& cfg, const AttentionWeightsT<M>& w,
                        const CliqueComplex& cx, const M& q) {
  if (rows(q) != cx.n) throw std::invalid_argument("build_metric: node features do not match complex");
  if (!cfg.self_loops) {
    for (int i = 0; i < cx.n; ++i)
      if (cx.degree[i] == 0)
        throw std::invalid_argument("build_metric: node " + std::to_string(i) +
                                    " is isolated; enable self_loops to give it a metric entry");
  }
  M q_src = gather_rows(q, cx.edge_src);
  M q_tgt = gather_rows(q, cx.edge_tgt);
  M fwd = positive_map(cfg.positive_fn, pre_attention_rows(cfg, w, q_src, q_tgt));
  M bwd = positive_map(cfg.positive_fn, pre_attention_rows(cfg, w, q_tgt, q_src));
  MetricT<M> m;
  m.self_loops = cfg.self_loops;
  m.a1 = scale(add(fwd, bwd), 0.5);
  m.a0 = add(scatter_rows(m.a1, cx.edge_src, cx.n), scatter_rows(m.a1, cx.edge_tgt, cx.n));
  if (cfg.self_loops) {
    M self = positive_map(cfg.positive_fn, pre_attention_rows(cfg, w, q, q));
    m.a0 = add(m.a0, self);
  }
  m.a2 = lift(q, Mat::ones(cx.count(2), 1));
  return m;
}

// d_k^* = A_k^{-1} d_k^T A_{k+1} applied to a degree-(k+1) cochain block.
template <class M>
M dual_derivative(const MetricT<M>& m, const CliqueComplex& cx, int k, const M& x) {
  if (k == 0) return scale_rows(dt_apply(cx, 0, scale_rows(x, m.a1)), map_recip(m.a0));
  if (k == 1) return scale_rows(dt_apply(cx, 1, scale_rows(x, m.a2)), map_recip(m.a1));
  throw std::invalid_argument("dual_derivative: degree must be 0 or 1");
}

Cochain dual_derivative(const Metric& m, const CliqueComplex& cx, const Cochain& c);

// Attention over 2-cliques (K = 3): A2 entries come from a learnable 3-tensor
// applied to the node features of each triangle; A1/A0 sum the A2 values of
// the incident triangles. w3 holds W[a][b][c] flattened as w3(a, b*F + c).
Metric higher_order_metric(const Mat& w3, PositiveFn f, const CliqueComplex& cx, const Mat& q);

// One forward-Euler heat step q - step * Delta_0 q with Delta_0 = d0^* d0 on
// the self-looped metric; at step = 1 this is the non-activated attention
// aggregation over the self-looped neighborhood.
Mat gat_heat_step(const Metric& m, const CliqueComplex& cx, const Mat& q, double step);

} // namespace bracketdyn
