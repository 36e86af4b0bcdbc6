#include "bracketdyn/metric.hpp"

#include <stdexcept>

namespace bracketdyn {

AttentionKind attention_kind_from_string(const std::string& s) {
  if (s == "scaled-dot-product" || s == "scaled_dot_product") return AttentionKind::kScaledDotProduct;
  if (s == "cosine-similarity" || s == "cosine_similarity") return AttentionKind::kCosineSimilarity;
  if (s == "pearson-correlation" || s == "pearson_correlation")
    return AttentionKind::kPearsonCorrelation;
  if (s == "exponential-kernel" || s == "exponential_kernel") return AttentionKind::kExponentialKernel;
  throw std::invalid_argument("unknown attention kind '" + s + "'");
}

std::string to_string(AttentionKind k) {
  switch (k) {
    case AttentionKind::kScaledDotProduct: return "scaled-dot-product";
    case AttentionKind::kCosineSimilarity: return "cosine-similarity";
    case AttentionKind::kPearsonCorrelation: return "pearson-correlation";
    case AttentionKind::kExponentialKernel: return "exponential-kernel";
  }
  return "?";
}

PositiveFn positive_fn_from_string(const std::string& s) {
  if (s == "exp") return PositiveFn::kExp;
  if (s == "squareplus") return PositiveFn::kSquareplus;
  throw std::invalid_argument("unknown positive_fn '" + s + "'");
}

std::string to_string(PositiveFn f) {
  return f == PositiveFn::kExp ? "exp" : "squareplus";
}

double pre_attention(const PreAttentionConfig& cfg, const AttentionWeights& w, const Mat& qi,
                     const Mat& qj) {
  if (qi.rows() != 1 || qj.rows() != 1 || qi.cols() != qj.cols())
    throw std::invalid_argument("pre_attention: features must be matching 1 x F rows");
  return pre_attention_rows(cfg, w, qi, qj)(0, 0);
}

Cochain dual_derivative(const Metric& m, const CliqueComplex& cx, const Cochain& c) {
  if (c.degree != 1 && c.degree != 2)
    throw std::invalid_argument("dual_derivative: degree must be 1 or 2");
  if (c.values.rows() != cx.count(c.degree))
    throw std::invalid_argument("dual_derivative: cochain does not match complex");
  return Cochain{c.degree - 1, dual_derivative(m, cx, c.degree - 1, c.values)};
}

Metric higher_order_metric(const Mat& w3, PositiveFn f, const CliqueComplex& cx, const Mat& q) {
  const int ft = q.cols();
  if (w3.rows() != ft || w3.cols() != ft * ft)
    throw std::invalid_argument("higher_order_metric: tensor must be F x F*F");
  if (cx.triangles.empty())
    throw std::invalid_argument("higher_order_metric: complex has no triangles");

  Metric m;
  m.a2 = Mat(cx.count(2), 1);
  for (int t = 0; t < cx.count(2); ++t) {
    const auto& tri = cx.triangles[t];
    double v = 0.0;
    for (int a = 0; a < ft; ++a)
      for (int b = 0; b < ft; ++b)
        for (int c = 0; c < ft; ++c)
          v += w3(a, b * ft + c) * q(tri[0], a) * q(tri[1], b) * q(tri[2], c);
    m.a2(t, 0) = unary_eval(f == PositiveFn::kExp ? UnaryFun::kExp : UnaryFun::kSquareplus, v);
  }

  // Sum of incident triangle values per edge and per node.
  m.a1 = Mat(cx.count(1), 1);
  m.a0 = Mat(cx.count(0), 1);
  for (int t = 0; t < cx.count(2); ++t) {
    for (int e = cx.d1.row_ptr[t]; e < cx.d1.row_ptr[t + 1]; ++e)
      m.a1(cx.d1.col[e], 0) += m.a2(t, 0);
    for (int j = 0; j < 3; ++j) m.a0(cx.triangles[t][j], 0) += m.a2(t, 0);
  }
  for (int e = 0; e < cx.count(1); ++e)
    if (m.a1(e, 0) == 0.0)
      throw std::invalid_argument("higher_order_metric: edge (" +
                                  std::to_string(cx.edges[e][0]) + "," +
                                  std::to_string(cx.edges[e][1]) +
                                  ") has no common neighbor, so its metric entry would vanish");
  for (int i = 0; i < cx.count(0); ++i)
    if (m.a0(i, 0) == 0.0)
      throw std::invalid_argument("higher_order_metric: node " + std::to_string(i) +
                                  " lies in no triangle");
  return m;
}

Mat gat_heat_step(const Metric& m, const CliqueComplex& cx, const Mat& q, double step) {
  if (!m.self_loops)
    throw std::invalid_argument("gat_heat_step: metric must be built with self_loops enabled");
  Mat lap = dual_derivative(m, cx, 0, d_apply(cx, 0, q));
  return sub(q, scale(lap, step));
}

} // namespace bracketdyn
