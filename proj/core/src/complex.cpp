#include "bracketdyn/complex.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace bracketdyn {

Mat Incidence::apply(const Mat& x) const {
  if (x.rows() != n_cols) throw std::invalid_argument("Incidence::apply: row count mismatch");
  Mat y(n_rows, x.cols());
  for (int r = 0; r < n_rows; ++r) {
    double* yrow = y.data() + size_t(r) * y.cols();
    for (int e = row_ptr[r]; e < row_ptr[r + 1]; ++e) {
      const double s = val[e];
      const double* xrow = x.data() + size_t(col[e]) * x.cols();
      for (int j = 0; j < x.cols(); ++j) yrow[j] += s * xrow[j];
    }
  }
  return y;
}

Mat Incidence::apply_t(const Mat& x) const {
  if (x.rows() != n_rows) throw std::invalid_argument("Incidence::apply_t: row count mismatch");
  Mat y(n_cols, x.cols());
  for (int r = 0; r < n_rows; ++r) {
    const double* xrow = x.data() + size_t(r) * x.cols();
    for (int e = row_ptr[r]; e < row_ptr[r + 1]; ++e) {
      const double s = val[e];
      double* yrow = y.data() + size_t(col[e]) * y.cols();
      for (int j = 0; j < x.cols(); ++j) yrow[j] += s * xrow[j];
    }
  }
  return y;
}

Mat Incidence::dense() const {
  Mat m(n_rows, n_cols);
  for (int r = 0; r < n_rows; ++r)
    for (int e = row_ptr[r]; e < row_ptr[r + 1]; ++e) m(r, col[e]) = val[e];
  return m;
}

CliqueComplex build_complex(int node_count, const std::vector<std::array<int, 2>>& edge_list) {
  if (node_count < 0) throw std::invalid_argument("build_complex: negative node count");
  CliqueComplex cx;
  cx.n = node_count;
  cx.degree.assign(node_count, 0);

  std::unordered_map<long long, int> edge_index;
  edge_index.reserve(edge_list.size() * 2);
  auto key = [node_count](int i, int j) { return (long long)i * node_count + j; };

  for (const auto& e : edge_list) {
    const int a = e[0], b = e[1];
    if (a < 0 || a >= node_count || b < 0 || b >= node_count)
      throw std::invalid_argument("build_complex: edge (" + std::to_string(a) + "," +
                                  std::to_string(b) + ") references an invalid node");
    if (a == b)
      throw std::invalid_argument("build_complex: self-loop at node " + std::to_string(a));
    const int i = std::min(a, b), j = std::max(a, b);
    if (edge_index.count(key(i, j)))
      throw std::invalid_argument("build_complex: duplicate edge (" + std::to_string(a) + "," +
                                  std::to_string(b) + ")");
    edge_index[key(i, j)] = int(cx.edges.size());
    cx.edges.push_back({i, j});
    cx.edge_src.push_back(i);
    cx.edge_tgt.push_back(j);
    cx.degree[i]++;
    cx.degree[j]++;
  }

  // d0: row per edge, -1 at source (min), +1 at target (max).
  const int m = int(cx.edges.size());
  cx.d0.n_rows = m;
  cx.d0.n_cols = node_count;
  cx.d0.row_ptr.resize(m + 1);
  cx.d0.col.resize(2 * size_t(m));
  cx.d0.val.resize(2 * size_t(m));
  for (int r = 0; r < m; ++r) {
    cx.d0.row_ptr[r] = 2 * r;
    cx.d0.col[2 * r] = cx.edges[r][0];
    cx.d0.val[2 * r] = -1.0;
    cx.d0.col[2 * r + 1] = cx.edges[r][1];
    cx.d0.val[2 * r + 1] = +1.0;
  }
  cx.d0.row_ptr[m] = 2 * m;

  // Triangles: sorted adjacency, common neighbors above each edge's max node.
  std::vector<std::vector<int>> adj(node_count);
  for (const auto& e : cx.edges) {
    adj[e[0]].push_back(e[1]);
    adj[e[1]].push_back(e[0]);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  for (const auto& e : cx.edges) {
    const int i = e[0], j = e[1];
    const auto& ai = adj[i];
    const auto& aj = adj[j];
    size_t pi = 0, pj = 0;
    while (pi < ai.size() && pj < aj.size()) {
      if (ai[pi] < aj[pj]) ++pi;
      else if (ai[pi] > aj[pj]) ++pj;
      else {
        if (ai[pi] > j) cx.triangles.push_back({i, j, ai[pi]});
        ++pi;
        ++pj;
      }
    }
  }
  std::sort(cx.triangles.begin(), cx.triangles.end());

  // d1: row per triangle (i, j, k); alternating-sum signs on canonical edges
  // give +1 on (i,j), -1 on (i,k), +1 on (j,k).
  const int t = int(cx.triangles.size());
  cx.d1.n_rows = t;
  cx.d1.n_cols = m;
  cx.d1.row_ptr.resize(t + 1);
  cx.d1.col.resize(3 * size_t(t));
  cx.d1.val.resize(3 * size_t(t));
  for (int r = 0; r < t; ++r) {
    const auto& tri = cx.triangles[r];
    cx.d1.row_ptr[r] = 3 * r;
    cx.d1.col[3 * r + 0] = edge_index.at(key(tri[0], tri[1]));
    cx.d1.val[3 * r + 0] = +1.0;
    cx.d1.col[3 * r + 1] = edge_index.at(key(tri[0], tri[2]));
    cx.d1.val[3 * r + 1] = -1.0;
    cx.d1.col[3 * r + 2] = edge_index.at(key(tri[1], tri[2]));
    cx.d1.val[3 * r + 2] = +1.0;
  }
  cx.d1.row_ptr[t] = 3 * t;

  return cx;
}

Mat d_apply(const CliqueComplex& cx, int k, const Mat& x) {
  if (k == 0) return cx.d0.apply(x);
  if (k == 1) return cx.d1.apply(x);
  throw std::invalid_argument("d_apply: degree must be 0 or 1");
}

Mat dt_apply(const CliqueComplex& cx, int k, const Mat& x) {
  if (k == 0) return cx.d0.apply_t(x);
  if (k == 1) return cx.d1.apply_t(x);
  throw std::invalid_argument("dt_apply: degree must be 0 or 1");
}

Cochain apply_d(const CliqueComplex& cx, const Cochain& c) {
  if (c.degree != 0 && c.degree != 1)
    throw std::invalid_argument("apply_d: degree must be 0 or 1");
  if (c.values.rows() != cx.count(c.degree))
    throw std::invalid_argument("apply_d: cochain does not match complex");
  return Cochain{c.degree + 1, d_apply(cx, c.degree, c.values)};
}

Cochain apply_d_transpose(const CliqueComplex& cx, const Cochain& c) {
  if (c.degree != 1 && c.degree != 2)
    throw std::invalid_argument("apply_d_transpose: degree must be 1 or 2");
  if (c.values.rows() != cx.count(c.degree))
    throw std::invalid_argument("apply_d_transpose: cochain does not match complex");
  return Cochain{c.degree - 1, dt_apply(cx, c.degree - 1, c.values)};
}

Mat conjugate_gradient(const std::function<Mat(const Mat&)>& matvec, const Mat& rhs,
                       double tol, int max_iter) {
  Mat x(rhs.rows(), rhs.cols());
  if (max_iter <= 0) max_iter = 10 * std::max(1, rhs.rows());
  // Columns solved independently on the shared operator. The operator may be
  // singular (the systems here are consistent), so search directions that
  // fall into the kernel stop the iteration.
  for (int c = 0; c < rhs.cols(); ++c) {
    Mat b = slice_cols(rhs, c, c + 1);
    Mat xc(b.rows(), 1);
    const double b_norm = frob_norm(b);
    const double stop = std::max(tol * b_norm, 1e-300);
    Mat r = b;
    Mat p = r;
    double rr = dot_all(r, r);
    for (int it = 0; it < max_iter && std::sqrt(rr) > stop; ++it) {
      Mat ap = matvec(p);
      const double pap = dot_all(p, ap);
      if (pap <= 1e-28 * dot_all(p, p)) break;
      const double alpha = rr / pap;
      xc = add(xc, scale(p, alpha));
      r = sub(r, scale(ap, alpha));
      const double rr_new = dot_all(r, r);
      p = add(r, scale(p, rr_new / rr));
      rr = rr_new;
    }
    for (int i = 0; i < x.rows(); ++i) x(i, c) = xc(i, 0);
  }
  return x;
}

HodgeParts hodge_decompose(const CliqueComplex& cx, const Cochain& p) {
  if (p.degree != 1) throw std::invalid_argument("hodge_decompose: degree-1 cochain required");
  if (p.values.rows() != cx.count(1))
    throw std::invalid_argument("hodge_decompose: cochain does not match complex");

  // A right-hand side at roundoff scale relative to p means the component is
  // absent; solving it would only amplify noise through the singular system.
  const double p_scale = std::max(1.0, frob_norm(p.values));

  // Exact part: d0 a with (d0^T d0) a = d0^T p; consistent, so CG converges on
  // the quotient modulo constants.
  Mat exact(p.values.rows(), p.values.cols());
  {
    Mat rhs = cx.d0.apply_t(p.values);
    if (frob_norm(rhs) > 1e-13 * p_scale) {
      Mat a = conjugate_gradient(
          [&cx](const Mat& v) { return cx.d0.apply_t(cx.d0.apply(v)); }, rhs);
      exact = cx.d0.apply(a);
    }
  }

  Mat coexact(p.values.rows(), p.values.cols());
  if (!cx.triangles.empty()) {
    // Coexact part: d1^T b with (d1 d1^T) b = d1 p.
    Mat rhs = cx.d1.apply(p.values);
    if (frob_norm(rhs) > 1e-13 * p_scale) {
      Mat b = conjugate_gradient(
          [&cx](const Mat& v) { return cx.d1.apply(cx.d1.apply_t(v)); }, rhs);
      coexact = cx.d1.apply_t(b);
    }
  }

  Mat harmonic = sub(sub(p.values, exact), coexact);
  return HodgeParts{Cochain{1, exact}, Cochain{1, harmonic}, Cochain{1, coexact}};
}

} // namespace bracketdyn
