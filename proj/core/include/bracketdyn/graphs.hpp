#pragma once

#include <string>
#include <vector>

#include "bracketdyn/complex.hpp"
#include "bracketdyn/rng.hpp"

namespace bracketdyn {

struct GraphSpec {
  int n = 0;
  std::vector<std::array<int, 2>> edges;
};

// Reads a graph from disk. A leading '{' (or a .json extension) selects the
// JSON form {"n": int, "edges": [[i,j],...]}; otherwise the file is parsed as
// an edge list with one 0-indexed "i j" pair per line ('#' comments allowed),
// with the node count inferred as max index + 1.
GraphSpec load_graph(const std::string& path);

GraphSpec complete_graph(int n);
GraphSpec path_graph(int n);
GraphSpec cycle_graph(int n);

// G(n, p); when connect_isolated is set, each isolated node gets one edge to
// a random other node so that attention metrics are well defined without
// self-loops.
GraphSpec erdos_renyi(int n, double p, Rng& rng, bool connect_isolated = true);

// Ring with chords to the second neighbor: every node has degree 4 and every
// consecutive node triple is a triangle. Used for scaling runs and wherever a
// triangle-rich graph of controlled size is needed.
GraphSpec triangulated_ring(int n);

struct PlantedPartition {
  GraphSpec graph;
  std::vector<int> labels;  // class per node
  Mat features;             // n x feature_dim
};

// Planted-partition graph with per-class mean features (orthogonal class
// directions scaled by `separation`) plus N(0, noise) perturbations. Edges are
// sampled within classes with probability p_in and across with p_out; each
// class is seeded with a triangle so every bracket is applicable.
PlantedPartition planted_partition(int n_per_class, int classes, double p_in, double p_out,
                                   double separation, double noise, int feature_dim, Rng& rng);

} // namespace bracketdyn
