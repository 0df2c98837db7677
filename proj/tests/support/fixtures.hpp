#pragma once

// Small hand-built worlds and reference implementations shared by the unit
// and acceptance tests. Nothing here calls into the code under test except
// to construct inputs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "syntaxnav/treeio.hpp"
#include "syntaxnav/world.hpp"

namespace fixtures {

using syntaxnav::Edge;
using syntaxnav::EnvironmentGraph;
using syntaxnav::Viewpoint;

inline Viewpoint make_viewpoint(int id, double x, double y, const std::string& landmark = "rug") {
  Viewpoint v;
  v.id = id;
  v.position = Eigen::Vector3d(x, y, 0.0);
  v.landmark = landmark;
  v.slices.fill("wall");
  return v;
}

// w x h grid, row-major ids, 4-connected, spacing metres apart.
inline EnvironmentGraph grid_graph(int w, int h, double spacing = 2.0, Eigen::Index feature_dim = 4) {
  std::vector<Viewpoint> vps;
  std::vector<Edge> edges;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) vps.push_back(make_viewpoint(y * w + x, x * spacing, y * spacing));
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int id = y * w + x;
      if (x + 1 < w) edges.push_back({id, id + 1, spacing});
      if (y + 1 < h) edges.push_back({id, id + w, spacing});
    }
  }
  return EnvironmentGraph("grid", "train", feature_dim, 0.1, 1, std::move(vps), std::move(edges));
}

// Viewpoints on the x axis at the given coordinates, consecutive ones joined.
inline EnvironmentGraph line_graph(const std::vector<double>& xs, Eigen::Index feature_dim = 4) {
  std::vector<Viewpoint> vps;
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < xs.size(); ++i) vps.push_back(make_viewpoint(static_cast<int>(i), xs[i], 0.0));
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    edges.push_back({static_cast<int>(i), static_cast<int>(i + 1), std::abs(xs[i + 1] - xs[i])});
  }
  return EnvironmentGraph("line", "train", feature_dim, 0.1, 1, std::move(vps), std::move(edges));
}

// ---- trees

// Random dependency tree: a shuffled token order where each token after the
// first attaches to a uniformly chosen earlier one.
inline syntaxnav::DependencyTree random_dependency_tree(int n, std::mt19937_64& rng) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i + 1;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> heads(static_cast<std::size_t>(n));
  std::vector<std::string> forms(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const int tok = perm[static_cast<std::size_t>(k)];
    int parent = 0;
    if (k > 0) parent = perm[std::uniform_int_distribution<std::size_t>(0, static_cast<std::size_t>(k - 1))(rng)];
    heads[static_cast<std::size_t>(tok - 1)] = parent;
    forms[static_cast<std::size_t>(tok - 1)] = "w" + std::to_string(tok);
  }
  return syntaxnav::DependencyTree::from_heads(forms, heads);
}

// Same tree with every child list stored in a random order.
inline syntaxnav::RootedTree shuffle_children(syntaxnav::RootedTree tree, std::mt19937_64& rng) {
  for (auto& kids : tree.children) std::shuffle(kids.begin(), kids.end(), rng);
  return tree;
}

// Chain 1 <- 2 <- ... <- n with n the root.
inline syntaxnav::DependencyTree chain_tree(int n) {
  std::vector<int> heads;
  std::vector<std::string> forms;
  for (int i = 1; i <= n; ++i) {
    heads.push_back(i == n ? 0 : i + 1);
    forms.push_back("w" + std::to_string(i));
  }
  return syntaxnav::DependencyTree::from_heads(forms, heads);
}

// ---- reference implementations

// Shortest-path distances by repeated relaxation (Bellman-Ford).
inline std::vector<std::vector<double>> all_pairs(const EnvironmentGraph& g) {
  const std::size_t n = g.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, inf));
  for (std::size_t s = 0; s < n; ++s) {
    d[s][s] = 0.0;
    for (std::size_t round = 0; round < n; ++round) {
      for (const Edge& e : g.edges()) {
        const auto a = static_cast<std::size_t>(e.a), b = static_cast<std::size_t>(e.b);
        d[s][b] = std::min(d[s][b], d[s][a] + e.length);
        d[s][a] = std::min(d[s][a], d[s][b] + e.length);
      }
    }
  }
  return d;
}

// Minimum alignment cost over every monotone warping path, enumerated by
// plain recursion (exponential; keep sequences short).
inline double brute_dtw(const std::vector<std::vector<double>>& d, const std::vector<int>& q,
                        const std::vector<int>& r) {
  std::function<double(std::size_t, std::size_t)> best = [&](std::size_t i, std::size_t j) -> double {
    const double here = d[static_cast<std::size_t>(q[i])][static_cast<std::size_t>(r[j])];
    if (i == 0 && j == 0) return here;
    double m = std::numeric_limits<double>::infinity();
    if (i > 0) m = std::min(m, best(i - 1, j));
    if (j > 0) m = std::min(m, best(i, j - 1));
    if (i > 0 && j > 0) m = std::min(m, best(i - 1, j - 1));
    return here + m;
  };
  return best(q.size() - 1, r.size() - 1);
}

inline double path_len(const std::vector<std::vector<double>>& d, const std::vector<int>& p) {
  double s = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) s += d[static_cast<std::size_t>(p[i - 1])][static_cast<std::size_t>(p[i])];
  return s;
}

inline double oracle_ndtw(const std::vector<std::vector<double>>& d, const std::vector<int>& q,
                          const std::vector<int>& r, double th = 3.0) {
  return std::exp(-brute_dtw(d, q, r) / (static_cast<double>(r.size()) * th));
}

inline double oracle_spl(const std::vector<std::vector<double>>& d, const std::vector<int>& q,
                         const std::vector<int>& r, double th = 3.0) {
  const double s = d[static_cast<std::size_t>(q.back())][static_cast<std::size_t>(r.back())] < th ? 1.0 : 0.0;
  const double l = d[static_cast<std::size_t>(r.front())][static_cast<std::size_t>(r.back())];
  const double p = path_len(d, q);
  const double denom = std::max(p, l);
  return denom == 0.0 ? s : s * l / denom;
}

inline double oracle_cls(const std::vector<std::vector<double>>& d, const std::vector<int>& q,
                         const std::vector<int>& r, double th = 3.0) {
  double pc = 0.0;
  for (int rv : r) {
    double m = std::numeric_limits<double>::infinity();
    for (int qv : q) m = std::min(m, d[static_cast<std::size_t>(rv)][static_cast<std::size_t>(qv)]);
    pc += std::exp(-m / th);
  }
  pc /= static_cast<double>(r.size());
  const double pl = path_len(d, q);
  const double epl = pc * path_len(d, r);
  const double denom = epl + std::abs(epl - pl);
  const double ls = denom == 0.0 ? 1.0 : epl / denom;
  return pc * ls;
}

// R_t as the explicit sum_k gamma^k r_{t+k}.
inline std::vector<double> direct_returns(const std::vector<double>& r, double gamma) {
  std::vector<double> out(r.size());
  for (std::size_t t = 0; t < r.size(); ++t) {
    double s = 0.0;
    for (std::size_t k = t; k < r.size(); ++k) s += std::pow(gamma, static_cast<double>(k - t)) * r[k];
    out[t] = s;
  }
  return out;
}

}  // namespace fixtures
