#pragma once

#include <array>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bracketdyn/mat.hpp"

namespace bracketdyn {

// Signed incidence matrix in CSR form, entries in {-1, +1}.
struct Incidence {
  int n_rows = 0;
  int n_cols = 0;
  std::vector<int> row_ptr; // size n_rows + 1
  std::vector<int> col;
  std::vector<double> val;

  // y = S x (x: n_cols x f) or y = S^T x (x: n_rows x f).
  Mat apply(const Mat& x) const;
  Mat apply_t(const Mat& x) const;
  Mat dense() const;
};

// Oriented clique complex of a simple graph up to 2-cliques (triangles).
// Edges are stored canonically as (i, j) with i < j and all orientation signs
// live in d0; triangles are the node triples (i, j, k), i < j < k, whose three
// unordered pairs are all edges. Immutable after construction.
struct CliqueComplex {
  int n = 0;                                 // node count
  std::vector<std::array<int, 2>> edges;     // canonical (i, j), i < j
  std::vector<std::array<int, 3>> triangles; // canonical (i, j, k), i < j < k
  Incidence d0; // |E| x |V|
  Incidence d1; // |T| x |E|
  std::vector<int> edge_src, edge_tgt; // per-edge endpoint indices (i, j)
  std::vector<int> degree;             // node degrees

  int count(int k) const { // number of k-cliques
    return k == 0 ? n : (k == 1 ? int(edges.size()) : int(triangles.size()));
  }
};

// Real features on the k-cliques of a complex (one row per clique). Edge
// cochains are stored against the fixed canonical orientation.
struct Cochain {
  int degree = 0;
  Mat values;
};

// Builds the complex from an edge list. Edge pairs may come in either
// orientation; duplicates (up to orientation) and self-loops are rejected
// with an error naming the offending edge.
CliqueComplex build_complex(int node_count, const std::vector<std::array<int, 2>>& edge_list);

// d_k applied columnwise; k in {0, 1}. For k = 0 this is the graph gradient
// (d0 q)_{ij} = q_j - q_i.
Cochain apply_d(const CliqueComplex& cx, const Cochain& c);

// Matrix-transpose application (the l2 adjoint); maps degree k+1 to k.
Cochain apply_d_transpose(const CliqueComplex& cx, const Cochain& c);

struct HodgeParts {
  Cochain exact;    // in Im d0
  Cochain harmonic; // in Ker Delta_1
  Cochain coexact;  // in Im d1^T
};

// l2 Hodge decomposition of a degree-1 cochain, p = d0 a + h + d1^T b.
HodgeParts hodge_decompose(const CliqueComplex& cx, const Cochain& p);

// Conjugate gradients for s.p.s.d. systems given as a matvec; used for the
// least-squares subproblems of the decomposition (consistent by construction).
Mat conjugate_gradient(const std::function<Mat(const Mat&)>& matvec, const Mat& rhs,
                       double tol = 1e-13, int max_iter = 0);

// Convenience applications on raw feature blocks (rows must match count(k)).
Mat d_apply(const CliqueComplex& cx, int k, const Mat& x);
Mat dt_apply(const CliqueComplex& cx, int k, const Mat& x);

} // namespace bracketdyn
