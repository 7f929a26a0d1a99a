#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "decompdual/model.hpp"

namespace decompdual {

enum class VarKind { Binary, Continuous };

struct FlatRow {
  std::vector<std::pair<int, double>> a;
  double rhs = 0.0;
};

// A flat mixed-binary MIP: min c'x s.t. rows (<=), binaries in {0,1},
// continuous vars >= 0.
struct FlatMIP {
  std::vector<VarKind> kinds;
  std::vector<double> c;
  std::vector<FlatRow> rows;

  int nVars() const { return static_cast<int>(kinds.size()); }
};

struct IntersectionGraph {
  int n = 0;
  std::vector<std::set<int>> adj;
};

// Two variables are adjacent iff some row has nonzero coefficients on both.
inline IntersectionGraph build_intersection_graph(const FlatMIP& m) {
  IntersectionGraph g;
  g.n = m.nVars();
  g.adj.resize(g.n);
  for (const auto& row : m.rows) {
    for (std::size_t i = 0; i < row.a.size(); ++i) {
      if (row.a[i].second == 0.0) continue;
      for (std::size_t j = i + 1; j < row.a.size(); ++j) {
        if (row.a[j].second == 0.0) continue;
        int u = row.a[i].first, v = row.a[j].first;
        if (u == v) continue;
        g.adj[u].insert(v);
        g.adj[v].insert(u);
      }
    }
  }
  return g;
}

struct TreeDecomposition {
  std::vector<std::set<int>> bags;
  std::vector<std::pair<int, int>> edges;

  int width() const {
    int w = 0;
    for (const auto& b : bags) w = std::max(w, static_cast<int>(b.size()));
    return w - 1;
  }
};

// Max number of bags containing a single variable.
inline int bag_multiplicity(const TreeDecomposition& td) {
  std::map<int, int> count;
  for (const auto& b : td.bags)
    for (int v : b) ++count[v];
  int tau = 0;
  for (auto& [v, c] : count) tau = std::max(tau, c);
  return tau;
}

// Min-fill elimination ordering. Each elimination contributes the closed
// neighbourhood as a bag; a bag hangs off the bag of its earliest-eliminated
// remaining neighbour. Bags that are subsets of a tree neighbour are merged
// away afterwards.
inline TreeDecomposition tree_decompose(const IntersectionGraph& g) {
  const int n = g.n;
  TreeDecomposition td;
  if (n == 0) {
    td.bags.push_back({});
    return td;
  }
  std::vector<std::set<int>> adj(g.adj);
  std::vector<char> eliminated(n, 0);
  std::vector<int> position(n, -1);
  std::vector<std::set<int>> rawBags;
  std::vector<int> elimOrder;

  for (int step = 0; step < n; ++step) {
    int bestV = -1;
    long bestFill = -1;
    for (int v = 0; v < n; ++v) {
      if (eliminated[v]) continue;
      long fill = 0;
      std::vector<int> nb(adj[v].begin(), adj[v].end());
      for (std::size_t i = 0; i < nb.size(); ++i)
        for (std::size_t j = i + 1; j < nb.size(); ++j)
          if (!adj[nb[i]].count(nb[j])) ++fill;
      if (bestV < 0 || fill < bestFill) {
        bestV = v;
        bestFill = fill;
      }
    }
    std::set<int> bag(adj[bestV].begin(), adj[bestV].end());
    bag.insert(bestV);
    rawBags.push_back(bag);
    position[bestV] = step;
    elimOrder.push_back(bestV);
    std::vector<int> nb(adj[bestV].begin(), adj[bestV].end());
    for (std::size_t i = 0; i < nb.size(); ++i)
      for (std::size_t j = i + 1; j < nb.size(); ++j) {
        adj[nb[i]].insert(nb[j]);
        adj[nb[j]].insert(nb[i]);
      }
    for (int u : nb) adj[u].erase(bestV);
    adj[bestV].clear();
    eliminated[bestV] = 1;
  }

  // Tree: bag of v attaches to the bag of its first-eliminated neighbour
  // among those eliminated later; parentless bags chain to the next one.
  std::vector<int> parent(n, -1);
  for (int step = 0; step < n; ++step) {
    int v = elimOrder[step];
    int bestPos = n + 1, bestU = -1;
    for (int u : rawBags[step]) {
      if (u == v) continue;
      if (position[u] > step && position[u] < bestPos) {
        bestPos = position[u];
        bestU = u;
      }
    }
    if (bestU >= 0) parent[step] = position[bestU];
  }
  std::vector<std::pair<int, int>> edges;
  int prevRoot = -1;
  for (int step = 0; step < n; ++step) {
    if (parent[step] >= 0) {
      edges.emplace_back(step, parent[step]);
    } else {
      if (prevRoot >= 0) edges.emplace_back(prevRoot, step);
      prevRoot = step;
    }
  }

  // Merge bags contained in a tree neighbour.
  std::vector<std::set<int>> bags = rawBags;
  std::vector<int> alias(n);
  for (int i = 0; i < n; ++i) alias[i] = i;
  auto root = [&](int i) {
    while (alias[i] != i) i = alias[i] = alias[alias[i]];
    return i;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto& [a, b] : edges) {
      int ra = root(a), rb = root(b);
      if (ra == rb) continue;
      const auto& A = bags[ra];
      const auto& B = bags[rb];
      if (std::includes(B.begin(), B.end(), A.begin(), A.end())) {
        alias[ra] = rb;
        changed = true;
      } else if (std::includes(A.begin(), A.end(), B.begin(), B.end())) {
        alias[rb] = ra;
        changed = true;
      }
    }
  }
  std::map<int, int> compact;
  for (int i = 0; i < n; ++i) {
    int r = root(i);
    if (!compact.count(r)) {
      compact[r] = static_cast<int>(td.bags.size());
      td.bags.push_back(bags[r]);
    }
  }
  std::set<std::pair<int, int>> treeEdges;
  for (auto& [a, b] : edges) {
    int ra = compact[root(a)], rb = compact[root(b)];
    if (ra != rb) treeEdges.insert({std::min(ra, rb), std::max(ra, rb)});
  }
  td.edges.assign(treeEdges.begin(), treeEdges.end());
  return td;
}

struct TDValidation {
  bool ok = false;
  std::vector<std::string> violations;
};

inline TDValidation validate_tree_decomposition(const IntersectionGraph& g,
                                                const TreeDecomposition& td) {
  TDValidation out;
  const int nb = static_cast<int>(td.bags.size());
  // The edge set must form a tree over the bag nodes.
  if (static_cast<int>(td.edges.size()) != nb - 1) {
    out.violations.push_back("bag graph is not a tree (edge count)");
  } else {
    detail::UnionFind uf(nb);
    bool acyclic = true;
    for (auto [a, b] : td.edges) acyclic &= uf.unite(a, b);
    if (!acyclic) out.violations.push_back("bag graph is not a tree (cycle)");
  }
  std::vector<std::vector<int>> adj(nb);
  for (auto [a, b] : td.edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  // (1) occupied nodes of each variable form a subtree.
  for (int v = 0; v < g.n; ++v) {
    std::vector<int> occupied;
    for (int t = 0; t < nb; ++t)
      if (td.bags[t].count(v)) occupied.push_back(t);
    if (occupied.empty()) continue;
    std::set<int> occ(occupied.begin(), occupied.end());
    std::vector<int> stack{occupied[0]};
    std::set<int> seen{occupied[0]};
    while (!stack.empty()) {
      int t = stack.back();
      stack.pop_back();
      for (int u : adj[t])
        if (occ.count(u) && !seen.count(u)) {
          seen.insert(u);
          stack.push_back(u);
        }
    }
    if (seen.size() != occ.size())
      out.violations.push_back("condition 1: variable " + std::to_string(v) +
                               " does not induce a subtree");
  }
  // (2) every graph edge covered by some bag.
  for (int u = 0; u < g.n; ++u)
    for (int v : g.adj[u]) {
      if (v < u) continue;
      bool covered = false;
      for (const auto& bag : td.bags)
        covered |= bag.count(u) && bag.count(v);
      if (!covered)
        out.violations.push_back("condition 2: edge (" + std::to_string(u) +
                                 "," + std::to_string(v) + ") uncovered");
    }
  // (3) bags cover all vertices.
  for (int v = 0; v < g.n; ++v) {
    bool present = false;
    for (const auto& bag : td.bags) present |= bag.count(v) > 0;
    if (!present)
      out.violations.push_back("condition 3: vertex " + std::to_string(v) +
                               " missing from every bag");
  }
  out.ok = out.violations.empty();
  return out;
}

// Rewrites the flat MIP as one block per bag with local variable copies,
// assigning every row (and every cost entry) to the smallest bag that
// contains it; tree edges couple the shared binaries.
inline Instance reformulate_to_blocks(const FlatMIP& m,
                                      const TreeDecomposition& td) {
  const int nb = static_cast<int>(td.bags.size());
  Instance inst;
  // Local layout per bag: binaries first (ascending flat id), then
  // continuous.
  std::vector<std::map<int, int>> localOf(nb);
  for (int t = 0; t < nb; ++t) {
    Block b;
    b.id = t;
    std::vector<int> bins, conts;
    for (int v : td.bags[t])
      (m.kinds[v] == VarKind::Binary ? bins : conts).push_back(v);
    b.nBin = static_cast<int>(bins.size());
    b.nCont = static_cast<int>(conts.size());
    b.c.assign(b.nBin, 0.0);
    b.d.assign(b.nCont, 0.0);
    for (int i = 0; i < b.nBin; ++i) localOf[t][bins[i]] = i;
    for (int i = 0; i < b.nCont; ++i) localOf[t][conts[i]] = b.nBin + i;
    inst.blocks.push_back(std::move(b));
  }
  // Costs: each flat variable's cost lands in its smallest containing bag.
  for (int v = 0; v < m.nVars(); ++v) {
    int owner = -1;
    for (int t = 0; t < nb && owner < 0; ++t)
      if (td.bags[t].count(v)) owner = t;
    if (owner < 0) throw std::runtime_error("decomposition misses a variable");
    int local = localOf[owner][v];
    Block& b = inst.blocks[owner];
    if (m.kinds[v] == VarKind::Binary)
      b.c[local] = m.c[v];
    else
      b.d[local - b.nBin] = m.c[v];
  }
  // Rows: smallest bag covering the support.
  for (std::size_t ri = 0; ri < m.rows.size(); ++ri) {
    const auto& row = m.rows[ri];
    int owner = -1;
    for (int t = 0; t < nb && owner < 0; ++t) {
      bool covers = true;
      for (auto [v, coef] : row.a)
        if (coef != 0.0 && !td.bags[t].count(v)) covers = false;
      if (covers) owner = t;
    }
    if (owner < 0)
      throw std::runtime_error("row " + std::to_string(ri) +
                               " is not contained in any bag");
    Block& b = inst.blocks[owner];
    Block::Row br;
    br.rhs = row.rhs;
    for (auto [v, coef] : row.a) {
      if (coef == 0.0) continue;
      int local = localOf[owner][v];
      if (m.kinds[v] == VarKind::Binary)
        br.ax.emplace_back(local, coef);
      else
        br.ay.emplace_back(local - b.nBin, coef);
    }
    b.rows.push_back(std::move(br));
  }
  // Coupling edges over bag intersections; continuous overlap is rejected.
  for (auto [a, b] : td.edges) {
    CouplingEdge e;
    e.blockA = a;
    e.blockB = b;
    for (int v : td.bags[a]) {
      if (!td.bags[b].count(v)) continue;
      if (m.kinds[v] == VarKind::Continuous)
        throw std::runtime_error(
            "bag intersection contains a continuous variable; such couplings "
            "are unsupported");
      e.pairs.push_back({localOf[a][v], localOf[b][v], v});
    }
    if (!e.pairs.empty()) inst.edges.push_back(std::move(e));
  }
  inst.meta = is_packing(inst)    ? InstanceTag::Packing
              : is_covering(inst) ? InstanceTag::Covering
                                  : InstanceTag::General;
  canonicalize(inst);
  return inst;
}

}  // namespace decompdual
