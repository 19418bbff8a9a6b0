#pragma once

#include <algorithm>
#include <functional>
#include <utility>

#include "qsd/chain.hpp"

namespace qsd {

struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

// Communication classes of the support digraph, the accessibility order,
// the leading-class strata and the per-class polynomial parameter.
struct ClassGraph {
  int k = 0;
  std::vector<std::vector<int>> classes;  // states per class, ascending
  std::vector<int> class_of;              // state -> class id
  std::vector<std::vector<int>> dag;      // direct condensation edges, from -> to
  std::vector<std::vector<bool>> reach;   // reach[a][b]: b accessible from a, a != b
  // pairs (j, i) with class i accessible from class j (transitive closure)
  std::vector<std::pair<int, int>> edges;

  // filled by stratify()
  std::vector<double> theta;
  double theta_bar = 0;
  std::vector<bool> in_fbar;
  std::vector<int> fbar;
  std::vector<std::vector<int>> fbar_levels;  // F_0 .. F_lbar
  std::vector<std::vector<int>> jbar_levels;  // J_0 .. J_lbar
  std::vector<int> level_of;                  // class -> stratum, -1 outside
  std::vector<int> g_classes;                 // classes with no access to fbar
  bool fragile = false;
  std::vector<std::string> warnings;

  // filled by polynomial_parameter()
  std::vector<int> j_class;

  bool accessible(int from, int to) const {
    return from == to || reach[from][to];
  }
};

// Strongly connected components plus reachability closure. Class ids are
// assigned by ascending minimal state so output is label-stable.
inline ClassGraph find_classes(const AbsorbedChain& chain) {
  const int d = chain.size();
  ClassGraph g;
  g.class_of.assign(d, -1);

  // Tarjan
  std::vector<int> num(d, -1), low(d, 0), stack;
  std::vector<bool> on_stack(d, false);
  std::vector<std::vector<int>> comps;
  int counter = 0;
  std::function<void(int)> dfs = [&](int v) {
    num[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (const auto& e : chain.row(v)) {
      if (e.p <= 0) continue;
      if (num[e.col] < 0) {
        dfs(e.col);
        low[v] = std::min(low[v], low[e.col]);
      } else if (on_stack[e.col]) {
        low[v] = std::min(low[v], num[e.col]);
      }
    }
    if (low[v] == num[v]) {
      comps.emplace_back();
      int w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comps.back().push_back(w);
      } while (w != v);
    }
  };
  for (int v = 0; v < d; ++v)
    if (num[v] < 0) dfs(v);

  for (auto& c : comps) std::sort(c.begin(), c.end());
  std::sort(comps.begin(), comps.end());
  g.k = static_cast<int>(comps.size());
  g.classes = std::move(comps);
  for (int c = 0; c < g.k; ++c)
    for (int s : g.classes[c]) g.class_of[s] = c;

  g.dag.assign(g.k, {});
  std::vector<std::vector<bool>> direct(g.k, std::vector<bool>(g.k, false));
  for (int x = 0; x < d; ++x)
    for (const auto& e : chain.row(x)) {
      if (e.p <= 0) continue;
      int a = g.class_of[x], b = g.class_of[e.col];
      if (a != b && !direct[a][b]) {
        direct[a][b] = true;
        g.dag[a].push_back(b);
      }
    }
  for (auto& adj : g.dag) std::sort(adj.begin(), adj.end());

  // Transitive closure in reverse topological order of the condensation.
  std::vector<int> order;
  {
    std::vector<int> indeg(g.k, 0);
    for (int a = 0; a < g.k; ++a)
      for (int b : g.dag[a]) ++indeg[b];
    std::vector<int> queue;
    for (int a = 0; a < g.k; ++a)
      if (indeg[a] == 0) queue.push_back(a);
    std::sort(queue.begin(), queue.end());
    while (!queue.empty()) {
      int a = queue.front();
      queue.erase(queue.begin());
      order.push_back(a);
      for (int b : g.dag[a])
        if (--indeg[b] == 0) queue.push_back(b);
    }
    if (static_cast<int>(order.size()) != g.k)
      throw InternalError("cycle in condensation graph");
  }
  g.reach.assign(g.k, std::vector<bool>(g.k, false));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    int a = *it;
    for (int b : g.dag[a]) {
      g.reach[a][b] = true;
      for (int c = 0; c < g.k; ++c)
        if (g.reach[b][c]) g.reach[a][c] = true;
    }
  }
  for (int a = 0; a < g.k; ++a)
    for (int b = 0; b < g.k; ++b)
      if (g.reach[a][b]) g.edges.emplace_back(a, b);
  return g;
}

// F-bar strata (minimal leading classes first) and the J-bar partition,
// top stratum carved out first.
inline void stratify(ClassGraph& g, const std::vector<double>& theta,
                     double theta_bar) {
  g.theta = theta;
  g.theta_bar = theta_bar;
  g.in_fbar.assign(g.k, false);
  g.fbar.clear();
  g.fbar_levels.clear();
  g.jbar_levels.clear();
  g.g_classes.clear();
  g.level_of.assign(g.k, -1);

  const double cutoff = theta_bar * (1.0 - kThetaTol);
  for (int c = 0; c < g.k; ++c)
    if (theta[c] >= cutoff) {
      g.in_fbar[c] = true;
      g.fbar.push_back(c);
    }
  if (g.fbar.empty()) throw InternalError("empty leading set");
  for (int c = 0; c < g.k; ++c)
    if (!g.in_fbar[c] && theta[c] >= theta_bar * (1.0 - 10 * kThetaTol)) {
      g.fragile = true;
      g.warnings.push_back("class " + std::to_string(c) +
                           " has a Perron root within 10x the tie tolerance "
                           "of the leading value; stratification is fragile");
    }

  // F_{l+1} = minimal elements of F-bar minus earlier strata, for the order
  // "i < j iff i accessible from j".
  std::vector<bool> placed(g.k, false);
  std::vector<int> remaining = g.fbar;
  while (!remaining.empty()) {
    std::vector<int> level;
    for (int c : remaining) {
      bool minimal = true;
      for (int o : remaining)
        if (o != c && g.reach[c][o]) {
          minimal = false;
          break;
        }
      if (minimal) level.push_back(c);
    }
    if (level.empty()) throw InternalError("stratification stalled");
    for (int c : level) placed[c] = true;
    std::vector<int> rest;
    for (int c : remaining)
      if (!placed[c]) rest.push_back(c);
    remaining.swap(rest);
    g.fbar_levels.push_back(std::move(level));
  }

  const int lbar = static_cast<int>(g.fbar_levels.size()) - 1;
  g.jbar_levels.assign(lbar + 1, {});
  for (int l = lbar; l >= 0; --l) {
    for (int c = 0; c < g.k; ++c) {
      if (g.level_of[c] >= 0) continue;
      bool dominates = false;
      for (int f : g.fbar_levels[l])
        if (g.accessible(c, f)) {
          dominates = true;
          break;
        }
      if (dominates) {
        g.jbar_levels[l].push_back(c);
        g.level_of[c] = l;
      }
    }
    std::sort(g.jbar_levels[l].begin(), g.jbar_levels[l].end());
  }
  for (int c = 0; c < g.k; ++c)
    if (g.level_of[c] < 0) g.g_classes.push_back(c);
}

// j per class: longest-path count of leading classes along descending
// chains ending in F-bar, endpoint excluded (max over the empty set is 0).
inline void polynomial_parameter(ClassGraph& g) {
  if (g.in_fbar.empty()) throw InternalError("stratify before polynomial_parameter");
  // M(c) = max leading-class count over paths from c ending in F-bar,
  // endpoint included; 0 when no leading class is reachable.
  std::vector<int> m(g.k, -1);
  std::function<int(int)> solve = [&](int c) -> int {
    if (m[c] >= 0) return m[c];
    m[c] = 0;  // guards against condensation cycles (impossible on a DAG)
    int best = 0;
    for (int b : g.dag[c]) best = std::max(best, solve(b));
    if (g.in_fbar[c])
      best = std::max(best + 1, 1);
    m[c] = best;
    return best;
  };
  g.j_class.assign(g.k, 0);
  for (int c = 0; c < g.k; ++c) g.j_class[c] = std::max(solve(c) - 1, 0);
}

}  // namespace qsd
