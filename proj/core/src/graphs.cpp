#include "bracketdyn/graphs.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace bracketdyn {

GraphSpec load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_graph: cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  const auto first = text.find_first_not_of(" \t\r\n");
  const bool looks_json = path.size() > 5 && path.substr(path.size() - 5) == ".json";
  if (looks_json || (first != std::string::npos && text[first] == '{')) {
    auto j = nlohmann::json::parse(text);
    GraphSpec g;
    g.n = j.at("n").get<int>();
    for (const auto& e : j.at("edges")) g.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    return g;
  }

  GraphSpec g;
  std::istringstream ss(text);
  std::string line;
  int max_node = -1;
  while (std::getline(ss, line)) {
    const auto h = line.find('#');
    if (h != std::string::npos) line.resize(h);
    std::istringstream ls(line);
    int a, b;
    if (ls >> a >> b) {
      g.edges.push_back({a, b});
      max_node = std::max({max_node, a, b});
    }
  }
  g.n = max_node + 1;
  return g;
}

GraphSpec complete_graph(int n) {
  GraphSpec g{n, {}};
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) g.edges.push_back({i, j});
  return g;
}

GraphSpec path_graph(int n) {
  GraphSpec g{n, {}};
  for (int i = 0; i + 1 < n; ++i) g.edges.push_back({i, i + 1});
  return g;
}

GraphSpec cycle_graph(int n) {
  GraphSpec g = path_graph(n);
  if (n > 2) g.edges.push_back({0, n - 1});
  return g;
}

GraphSpec erdos_renyi(int n, double p, Rng& rng, bool connect_isolated) {
  GraphSpec g{n, {}};
  std::vector<int> deg(n, 0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < p) {
        g.edges.push_back({i, j});
        deg[i]++;
        deg[j]++;
      }
  if (connect_isolated && n > 1) {
    for (int i = 0; i < n; ++i)
      if (deg[i] == 0) {
        int j = i;
        while (j == i) j = rng.uniform_int(0, n - 1);
        g.edges.push_back({std::min(i, j), std::max(i, j)});
        deg[i]++;
        deg[j]++;
      }
  }
  return g;
}

GraphSpec triangulated_ring(int n) {
  if (n < 5) throw std::invalid_argument("triangulated_ring: need at least 5 nodes");
  GraphSpec g{n, {}};
  std::set<std::pair<int, int>> seen;
  auto put = [&](int a, int b) {
    const auto e = std::minmax(a, b);
    if (seen.insert({e.first, e.second}).second) g.edges.push_back({e.first, e.second});
  };
  for (int i = 0; i < n; ++i) {
    put(i, (i + 1) % n);
    put(i, (i + 2) % n);
  }
  return g;
}

PlantedPartition planted_partition(int n_per_class, int classes, double p_in, double p_out,
                                   double separation, double noise, int feature_dim, Rng& rng) {
  if (feature_dim < classes)
    throw std::invalid_argument("planted_partition: feature_dim must be >= classes");
  const int n = n_per_class * classes;
  PlantedPartition pp;
  pp.graph.n = n;
  pp.labels.resize(n);
  pp.features = Mat(n, feature_dim);

  std::set<std::pair<int, int>> seen;
  auto put = [&](int a, int b) {
    const auto e = std::minmax(a, b);
    if (a != b && seen.insert({e.first, e.second}).second)
      pp.graph.edges.push_back({e.first, e.second});
  };

  for (int c = 0; c < classes; ++c) {
    const int base = c * n_per_class;
    for (int r = 0; r < n_per_class; ++r) {
      const int i = base + r;
      pp.labels[i] = c;
      for (int f = 0; f < feature_dim; ++f)
        pp.features(i, f) = (f == c ? separation : 0.0) + noise * rng.normal();
    }
    // Seed triangle, then a ring so the class stays connected.
    if (n_per_class >= 3) {
      put(base, base + 1);
      put(base + 1, base + 2);
      put(base, base + 2);
      for (int r = 2; r + 1 < n_per_class; ++r) put(base + r, base + r + 1);
    } else {
      for (int r = 0; r + 1 < n_per_class; ++r) put(base + r, base + r + 1);
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double p = pp.labels[i] == pp.labels[j] ? p_in : p_out;
      if (rng.uniform() < p) put(i, j);
    }
  return pp;
}

} // namespace bracketdyn
